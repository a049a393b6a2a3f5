//! Planar primitives, shapes with a mandatory bounding circle, and the
//! distance / nearest-point-set queries the rest of the crate builds on.

use std::fmt;

use nalgebra::Vector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Points and vectors share one representation.
pub type Vec2 = Vector2<f64>;

#[inline]
pub fn vec2(x: f64, y: f64) -> Vec2 {
    Vec2::new(x, y)
}

/// Counter-clockwise rotation of `v` by `angle` radians.
#[inline]
pub fn rotate(v: Vec2, angle: f64) -> Vec2 {
    let (s, c) = angle.sin_cos();
    vec2(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// `v` turned a quarter counter-clockwise.
#[inline]
pub fn perp(v: Vec2) -> Vec2 {
    vec2(-v.y, v.x)
}

fn is_finite(v: &Vec2) -> bool {
    v.x.is_finite() && v.y.is_finite()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("empty point set")]
    EmptySet,
    #[error("invalid bounding circle: {0}")]
    InvalidBounding(String),
    #[error("primitive #{index} ({primitive}): {reason}")]
    InvalidPrimitive {
        index: usize,
        primitive: String,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

impl Circle {
    pub fn new(center: Vec2, radius: f64) -> Self {
        Self { center, radius }
    }

    /// Whether this disk lies inside `outer`.
    pub fn within(&self, outer: &Circle, slack: f64) -> bool {
        (self.center - outer.center).norm() + self.radius <= outer.radius + slack
    }

    pub fn contains(&self, x: Vec2, slack: f64) -> bool {
        (x - self.center).norm() <= self.radius + slack
    }
}

/// A closed subset of the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Primitive {
    #[serde(rename = "point")]
    SinglePoint {
        at: Vec2,
    },
    Segment {
        a: Vec2,
        b: Vec2,
    },
    Circle {
        center: Vec2,
        radius: f64,
    },
}

/// Per-primitive nearest point. A circle queried at its center has a whole
/// circle of nearest points, reported through two antipodal representatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrimitiveNearest {
    Unique(Vec2),
    Continuum([Vec2; 2]),
}

impl Primitive {
    pub fn point(at: Vec2) -> Self {
        Primitive::SinglePoint { at }
    }

    pub fn segment(a: Vec2, b: Vec2) -> Self {
        Primitive::Segment { a, b }
    }

    pub fn circle(center: Vec2, radius: f64) -> Self {
        Primitive::Circle { center, radius }
    }

    fn check(&self) -> Result<(), String> {
        match *self {
            Primitive::SinglePoint { at } => {
                if !is_finite(&at) {
                    return Err("non-finite coordinates".into());
                }
            }
            Primitive::Segment { a, b } => {
                if !is_finite(&a) || !is_finite(&b) {
                    return Err("non-finite coordinates".into());
                }
                if a == b {
                    return Err("segment endpoints coincide".into());
                }
            }
            Primitive::Circle { center, radius } => {
                if !is_finite(&center) || !radius.is_finite() {
                    return Err("non-finite coordinates".into());
                }
                if radius <= 0.0 {
                    return Err(format!("radius {radius} is not positive"));
                }
            }
        }
        Ok(())
    }

    /// Exact Euclidean distance from `x` to the primitive.
    pub fn distance(&self, x: Vec2) -> f64 {
        match *self {
            Primitive::SinglePoint { at } => (x - at).norm(),
            Primitive::Segment { a, b } => (x - segment_foot(a, b, x)).norm(),
            Primitive::Circle { center, radius } => ((x - center).norm() - radius).abs(),
        }
    }

    /// Nearest point(s) of the primitive to `x`. `center_tol` decides when a
    /// query sits on a circle's center.
    pub fn nearest(&self, x: Vec2, center_tol: f64) -> PrimitiveNearest {
        match *self {
            Primitive::SinglePoint { at } => PrimitiveNearest::Unique(at),
            Primitive::Segment { a, b } => PrimitiveNearest::Unique(segment_foot(a, b, x)),
            Primitive::Circle { center, radius } => {
                let d = x - center;
                let n = d.norm();
                if n <= center_tol {
                    PrimitiveNearest::Continuum([
                        center + vec2(radius, 0.0),
                        center - vec2(radius, 0.0),
                    ])
                } else {
                    PrimitiveNearest::Unique(center + d * (radius / n))
                }
            }
        }
    }

    /// Whether every point of the primitive lies in the closed disk.
    pub fn inside(&self, disk: &Circle, slack: f64) -> bool {
        match *self {
            Primitive::SinglePoint { at } => disk.contains(at, slack),
            Primitive::Segment { a, b } => disk.contains(a, slack) && disk.contains(b, slack),
            Primitive::Circle { center, radius } => {
                (center - disk.center).norm() + radius <= disk.radius + slack
            }
        }
    }

    /// Image under a similarity `x ↦ f(x)` with linear scale factor `scale`.
    pub fn mapped(&self, f: impl Fn(Vec2) -> Vec2, scale: f64) -> Primitive {
        match *self {
            Primitive::SinglePoint { at } => Primitive::SinglePoint { at: f(at) },
            Primitive::Segment { a, b } => Primitive::Segment { a: f(a), b: f(b) },
            Primitive::Circle { center, radius } => Primitive::Circle {
                center: f(center),
                radius: radius * scale,
            },
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Primitive::SinglePoint { at } => write!(f, "point({}, {})", at.x, at.y),
            Primitive::Segment { a, b } => {
                write!(f, "segment(({}, {}) -> ({}, {}))", a.x, a.y, b.x, b.y)
            }
            Primitive::Circle { center, radius } => {
                write!(f, "circle(({}, {}), r={})", center.x, center.y, radius)
            }
        }
    }
}

/// Closest point to `x` on segment `[a, b]`.
pub fn segment_foot(a: Vec2, b: Vec2, x: Vec2) -> Vec2 {
    let ab = b - a;
    let t = ((x - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    a + ab * t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub point: Vec2,
    pub primitive: usize,
}

/// Nearest points of a closed set to a query point, clustered so that
/// witnesses are more than `separation` apart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearestSet {
    pub distance: f64,
    pub witnesses: Vec<Witness>,
    pub tolerance: f64,
    pub separation: f64,
    /// The query sits on the center of a circle that attains the distance.
    pub continuum: bool,
}

impl NearestSet {
    /// More than one closest point: the query lies on the medial axis.
    pub fn is_multiple(&self) -> bool {
        self.continuum || self.witnesses.len() > 1
    }

    /// Some witness other than `p` (farther than the separation from it).
    pub fn has_witness_other_than(&self, p: Vec2) -> bool {
        self.witnesses
            .iter()
            .any(|w| (w.point - p).norm() > self.separation)
    }
}

/// Gathers candidate witnesses `(distance, point, primitive, continuum)` into a
/// [`NearestSet`]; candidates are visited in the order given.
pub(crate) fn cluster_witnesses(
    candidates: &[(f64, Vec2, usize, bool)],
    distance: f64,
    tol: f64,
    sep: f64,
) -> NearestSet {
    let mut witnesses: Vec<Witness> = Vec::new();
    let mut continuum = false;
    for &(d, point, primitive, cont) in candidates {
        if d > distance + tol {
            continue;
        }
        continuum |= cont;
        if witnesses.iter().all(|w| (w.point - point).norm() > sep) {
            witnesses.push(Witness { point, primitive });
        }
    }
    NearestSet {
        distance,
        witnesses,
        tolerance: tol,
        separation: sep,
        continuum,
    }
}

fn nearest_set_of(primitives: &[Primitive], x: Vec2, tol: f64, sep: f64) -> NearestSet {
    debug_assert!(tol > 0.0 && sep > tol);
    let distance = distance_of(primitives, x);
    let mut candidates = Vec::with_capacity(primitives.len() + 1);
    for (i, prim) in primitives.iter().enumerate() {
        let d = prim.distance(x);
        match prim.nearest(x, tol) {
            PrimitiveNearest::Unique(q) => candidates.push((d, q, i, false)),
            PrimitiveNearest::Continuum(qs) => {
                for q in qs {
                    candidates.push((d, q, i, true));
                }
            }
        }
    }
    cluster_witnesses(&candidates, distance, tol, sep)
}

fn distance_of(primitives: &[Primitive], x: Vec2) -> f64 {
    primitives
        .iter()
        .map(|p| p.distance(x))
        .fold(f64::INFINITY, f64::min)
}

/// A closed planar set that can answer distance and nearest-set queries.
pub trait ClosedSet: Sync {
    fn distance(&self, x: Vec2) -> f64;

    fn nearest_set(&self, x: Vec2, tol: f64, sep: f64) -> NearestSet;

    /// Bounding circle contained in the set, when there is one.
    fn bounding(&self) -> Option<Circle>;
}

/// A finite union of primitives together with its bounding circle, which is
/// always one of the primitives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ShapeDoc", into = "ShapeDoc")]
pub struct Shape {
    primitives: Vec<Primitive>,
    bounding: Circle,
}

/// On-disk form of a [`Shape`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeDoc {
    pub bounding: Circle,
    pub primitives: Vec<Primitive>,
}

impl TryFrom<ShapeDoc> for Shape {
    type Error = GeomError;

    fn try_from(doc: ShapeDoc) -> Result<Self, Self::Error> {
        Shape::new(doc.bounding, doc.primitives)
    }
}

impl From<Shape> for ShapeDoc {
    fn from(shape: Shape) -> Self {
        ShapeDoc {
            bounding: shape.bounding,
            primitives: shape.primitives,
        }
    }
}

impl Shape {
    /// Builds a shape, appending the bounding circle to the primitives when it
    /// is not already listed.
    pub fn new(
        bounding: Circle,
        primitives: impl IntoIterator<Item = Primitive>,
    ) -> Result<Self, GeomError> {
        if !is_finite(&bounding.center) || !bounding.radius.is_finite() {
            return Err(GeomError::InvalidBounding("non-finite coordinates".into()));
        }
        if bounding.radius <= 0.0 {
            return Err(GeomError::InvalidBounding(format!(
                "radius {} is not positive",
                bounding.radius
            )));
        }
        let slack = 1e-12 * bounding.radius;
        let mut prims: Vec<Primitive> = primitives.into_iter().collect();
        for (index, prim) in prims.iter().enumerate() {
            let invalid = |reason: String| GeomError::InvalidPrimitive {
                index,
                primitive: prim.to_string(),
                reason,
            };
            prim.check().map_err(invalid)?;
            if !prim.inside(&bounding, slack) {
                return Err(invalid("not contained in the bounding ball".into()));
            }
        }
        let has_bounding = prims.iter().any(|p| is_bounding(p, &bounding, slack));
        if !has_bounding {
            prims.push(Primitive::Circle {
                center: bounding.center,
                radius: bounding.radius,
            });
        }
        Ok(Shape {
            primitives: prims,
            bounding,
        })
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn bounding_circle(&self) -> Circle {
        self.bounding
    }

    pub fn radius(&self) -> f64 {
        self.bounding.radius
    }

    pub fn center(&self) -> Vec2 {
        self.bounding.center
    }

    /// Whether primitive `i` is the bounding circle.
    pub fn is_bounding_primitive(&self, i: usize) -> bool {
        is_bounding(
            &self.primitives[i],
            &self.bounding,
            1e-12 * self.bounding.radius,
        )
    }

    /// Rotation by `angle` about the bounding center.
    pub fn rotated(&self, angle: f64) -> Shape {
        let c = self.bounding.center;
        self.similar(|x| c + rotate(x - c, angle), 1.0)
    }

    /// The scaled set `λ·S` (scaling about the origin).
    pub fn scaled(&self, factor: f64) -> Shape {
        self.similar(|x| x * factor, factor)
    }

    fn similar(&self, f: impl Fn(Vec2) -> Vec2, scale: f64) -> Shape {
        Shape {
            primitives: self
                .primitives
                .iter()
                .map(|p| p.mapped(&f, scale))
                .collect(),
            bounding: Circle::new(f(self.bounding.center), self.bounding.radius * scale),
        }
    }
}

fn is_bounding(p: &Primitive, bounding: &Circle, slack: f64) -> bool {
    matches!(*p, Primitive::Circle { center, radius }
        if (center - bounding.center).norm() <= slack && (radius - bounding.radius).abs() <= slack)
}

impl ClosedSet for Shape {
    fn distance(&self, x: Vec2) -> f64 {
        distance_of(&self.primitives, x)
    }

    fn nearest_set(&self, x: Vec2, tol: f64, sep: f64) -> NearestSet {
        nearest_set_of(&self.primitives, x, tol, sep)
    }

    fn bounding(&self) -> Option<Circle> {
        Some(self.bounding)
    }
}

/// A primitive union with no bounding circle. Only used to show what goes
/// wrong without one.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeSet {
    pub primitives: Vec<Primitive>,
}

impl ClosedSet for FreeSet {
    fn distance(&self, x: Vec2) -> f64 {
        distance_of(&self.primitives, x)
    }

    fn nearest_set(&self, x: Vec2, tol: f64, sep: f64) -> NearestSet {
        nearest_set_of(&self.primitives, x, tol, sep)
    }

    fn bounding(&self) -> Option<Circle> {
        None
    }
}

/// `sup_{a∈A} d(a, B)`.
pub fn directed_hausdorff(a: &[Vec2], b: &[Vec2]) -> Result<f64, GeomError> {
    if a.is_empty() || b.is_empty() {
        return Err(GeomError::EmptySet);
    }
    Ok(a.par_iter()
        .map(|p| {
            b.iter()
                .map(|q| (p - q).norm_squared())
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| 0.0, f64::max)
        .sqrt())
}

/// Symmetric Hausdorff distance between two finite point sets.
pub fn hausdorff(a: &[Vec2], b: &[Vec2]) -> Result<f64, GeomError> {
    Ok(directed_hausdorff(a, b)?.max(directed_hausdorff(b, a)?))
}
