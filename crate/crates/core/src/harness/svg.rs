//! Minimal SVG figure: the shape in black, medial clouds as dots.

use std::fmt::Write;

use crate::geom::{Primitive, Shape};
use crate::medial::MedialCloud;

pub const GREEN: &str = "#1a9850";
pub const BLUE: &str = "#2c7bb6";
pub const GRAY: &str = "#999999";

const SIZE: f64 = 600.0;

/// Clouds are drawn in order, so later ones sit on top.
pub fn render(shape: &Shape, clouds: &[(&MedialCloud, &str)]) -> String {
    let ball = shape.bounding_circle();
    let margin = 0.05 * ball.radius;
    let half = ball.radius + margin;
    let scale = SIZE / (2.0 * half);
    // y grows upward in the plane and downward in SVG
    let tx = |x: f64| (x - ball.center.x + half) * scale;
    let ty = |y: f64| (ball.center.y + half - y) * scale;
    let stroke = 1.5;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for prim in shape.primitives() {
        let _ = match *prim {
            Primitive::SinglePoint { at: p } => writeln!(
                out,
                r#"<circle cx="{:.3}" cy="{:.3}" r="3" fill="black"/>"#,
                tx(p.x),
                ty(p.y)
            ),
            Primitive::Segment { a, b } => writeln!(
                out,
                r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="black" stroke-width="{stroke}"/>"#,
                tx(a.x),
                ty(a.y),
                tx(b.x),
                ty(b.y)
            ),
            Primitive::Circle { center, radius } => writeln!(
                out,
                r#"<circle cx="{:.3}" cy="{:.3}" r="{:.3}" fill="none" stroke="black" stroke-width="{stroke}"/>"#,
                tx(center.x),
                ty(center.y),
                radius * scale
            ),
        };
    }
    for (cloud, color) in clouds {
        for s in &cloud.samples {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.3}" cy="{:.3}" r="1.2" fill="{color}"/>"#,
                tx(s.center.x),
                ty(s.center.y)
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
