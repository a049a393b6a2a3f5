//! The image `F(S)` of a shape under a diffeomorphism, queried through the
//! pullback `F⁻¹`.
//!
//! A query at `y` first pulls back to `x = F⁻¹(y)`. Any `q ∈ S` with
//! `|y − F(q)| ≤ U` satisfies `|x − q| ≤ L_F·U`, so only primitives inside that
//! window can hold a nearest point. On each of them the image curve is
//! searched for local minima of `|y − F(γ(t))|` and polished by golden
//! section. Primitives outside the support ball are fixed by `F` and are
//! handled exactly.

use std::f64::consts::{PI, TAU};

use crate::diffeo::{DiffeoError, Diffeomorphism};
use crate::geom::{
    cluster_witnesses, Circle, ClosedSet, NearestSet, Primitive, PrimitiveNearest, Shape, Vec2,
};

/// Samples per parameter window before local polishing.
const WINDOW_SAMPLES: usize = 32;
const GOLDEN_ITERS: usize = 90;

#[derive(Debug, Clone, Copy)]
pub struct ImageShape<'a> {
    pub shape: &'a Shape,
    pub diffeo: &'a Diffeomorphism,
    l_f: f64,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    distance: f64,
    point: Vec2,
    primitive: usize,
    continuum: bool,
}

impl<'a> ImageShape<'a> {
    pub fn new(shape: &'a Shape, diffeo: &'a Diffeomorphism) -> Result<Self, DiffeoError> {
        let l_f = diffeo.constants()?.l_f;
        let support = Circle::new(diffeo.phi.center, diffeo.phi.radius);
        if !support.within(&shape.bounding_circle(), 1e-12 * shape.radius()) {
            return Err(DiffeoError::BadFamily(
                "support ball must lie inside the bounding ball".into(),
            ));
        }
        Ok(Self { shape, diffeo, l_f })
    }

    fn pullback(&self, y: Vec2) -> Vec2 {
        // the contraction was checked when the constants were built
        self.diffeo.inverse(y).unwrap_or(y)
    }

    /// Certified bracket `[d/L_F, L_F·d]` with `d = d(F⁻¹(y), S)`.
    pub fn distance_bracket(&self, y: Vec2) -> (f64, f64) {
        let d = self.shape.distance(self.pullback(y));
        (d / self.l_f, d * self.l_f)
    }

    fn fixed_by_f(&self, prim: &Primitive) -> bool {
        let c = self.diffeo.phi.center;
        let r = self.diffeo.phi.radius;
        self.diffeo.is_identity() || prim.distance(c) >= r
    }

    fn candidates(&self, y: Vec2, tol: f64) -> Vec<Candidate> {
        let x = self.pullback(y);
        let prims = self.shape.primitives();
        let (seed_idx, _) = prims
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.distance(x)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("shape has its bounding circle");
        let seed_point = match prims[seed_idx].nearest(x, 0.0) {
            PrimitiveNearest::Unique(q) | PrimitiveNearest::Continuum([q, _]) => q,
        };
        let upper = (y - self.diffeo.forward(seed_point)).norm();
        let window = self.l_f * (upper + tol) * (1.0 + 1e-9)
            + 2.0 * self.diffeo.tau_inv
            + 1e-12 * self.shape.radius();

        let mut out = Vec::new();
        for (i, prim) in prims.iter().enumerate() {
            // the seed primitive holds a point within the window by construction
            if i != seed_idx && prim.distance(x) > window {
                continue;
            }
            if self.fixed_by_f(prim) {
                let d = prim.distance(y);
                match prim.nearest(y, tol) {
                    PrimitiveNearest::Unique(q) => out.push(Candidate {
                        distance: d,
                        point: q,
                        primitive: i,
                        continuum: false,
                    }),
                    PrimitiveNearest::Continuum(qs) => {
                        out.extend(qs.into_iter().map(|q| Candidate {
                            distance: d,
                            point: q,
                            primitive: i,
                            continuum: true,
                        }))
                    }
                }
                continue;
            }
            match *prim {
                Primitive::SinglePoint { at } => {
                    let q = self.diffeo.forward(at);
                    out.push(Candidate {
                        distance: (y - q).norm(),
                        point: q,
                        primitive: i,
                        continuum: false,
                    });
                }
                Primitive::Segment { a, b } => {
                    let t = segment_param(a, b, x);
                    let Some((lo, hi)) =
                        segment_window(a, b, x, window).or((i == seed_idx).then_some((t, t)))
                    else {
                        continue;
                    };
                    let seed = clamp_param(t, lo, hi);
                    let curve = |t: f64| self.diffeo.forward(a + (b - a) * t);
                    self.search(y, i, lo, hi, seed, &curve, &mut out);
                }
                Primitive::Circle { center, radius } => {
                    let d = x - center;
                    let phase = d.y.atan2(d.x);
                    let Some((lo, hi)) = circle_window(center, radius, x, window)
                        .or((i == seed_idx).then_some((phase, phase)))
                    else {
                        continue;
                    };
                    let mut seed = phase;
                    while seed < lo {
                        seed += TAU;
                    }
                    while seed > hi {
                        seed -= TAU;
                    }
                    let seed = clamp_param(seed, lo, hi);
                    let curve = |t: f64| {
                        let (s, c) = t.sin_cos();
                        self.diffeo.forward(center + Vec2::new(c, s) * radius)
                    };
                    self.search(y, i, lo, hi, seed, &curve, &mut out);
                }
            }
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn search(
        &self,
        y: Vec2,
        primitive: usize,
        lo: f64,
        hi: f64,
        seed: f64,
        curve: &dyn Fn(f64) -> Vec2,
        out: &mut Vec<Candidate>,
    ) {
        let g = |t: f64| (y - curve(t)).norm_squared();
        let mut ts: Vec<f64> = (0..=WINDOW_SAMPLES)
            .map(|k| lo + (hi - lo) * k as f64 / WINDOW_SAMPLES as f64)
            .collect();
        ts.push(seed);
        ts.sort_by(f64::total_cmp);
        // a seed next to a grid node would make a degenerate bracket
        let min_gap = 1e-6 * (hi - lo) / WINDOW_SAMPLES as f64;
        ts.dedup_by(|next, kept| *next - *kept <= min_gap);
        let gs: Vec<f64> = ts.iter().map(|&t| g(t)).collect();
        let n = ts.len();
        for k in 0..n {
            let left = k == 0 || gs[k] <= gs[k - 1];
            let right = k + 1 == n || gs[k] <= gs[k + 1];
            if !(left && right) {
                continue;
            }
            let a = ts[k.saturating_sub(1)];
            let b = ts[(k + 1).min(n - 1)];
            let t = golden_min(&g, a, b, ts[k], gs[k]);
            let q = curve(t);
            out.push(Candidate {
                distance: (y - q).norm(),
                point: q,
                primitive,
                continuum: false,
            });
        }
    }
}

fn clamp_param(t: f64, lo: f64, hi: f64) -> f64 {
    t.clamp(lo, hi)
}

fn segment_param(a: Vec2, b: Vec2, x: Vec2) -> f64 {
    let ab = b - a;
    ((x - a).dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0)
}

/// Parameters `t ∈ [0,1]` with `|a + t(b−a) − x| ≤ radius`, from the
/// perpendicular foot so tiny radii do not cancel.
fn segment_window(a: Vec2, b: Vec2, x: Vec2, radius: f64) -> Option<(f64, f64)> {
    let d = b - a;
    let len = d.norm();
    let t_foot = (x - a).dot(&d) / (len * len);
    let h = (x - (a + d * t_foot)).norm();
    if h > radius {
        return None;
    }
    let half = (radius * radius - h * h).sqrt() / len;
    let lo = (t_foot - half).max(0.0);
    let hi = (t_foot + half).min(1.0);
    (lo <= hi).then_some((lo, hi))
}

/// Angular parameters of the circle points within `radius` of `x`, from
/// `|x − q(θ)|² = (dist − ρ)² + 4ρ·dist·sin²(θ/2)`.
fn circle_window(center: Vec2, rho: f64, x: Vec2, radius: f64) -> Option<(f64, f64)> {
    let d = x - center;
    let dist = d.norm();
    let phase = d.y.atan2(d.x);
    let gap = (dist - rho).abs();
    if gap > radius {
        return None;
    }
    let denom = 4.0 * rho * dist;
    let s2 = (radius - gap) * (radius + gap);
    if denom == 0.0 || s2 >= denom {
        return Some((phase - PI, phase + PI));
    }
    let half = 2.0 * (s2 / denom).sqrt().asin();
    Some((phase - half, phase + half))
}

/// Golden-section minimum of `g` on `[a, b]`, never worse than the start.
fn golden_min(g: &dyn Fn(f64) -> f64, a: f64, b: f64, start: f64, g_start: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..GOLDEN_ITERS {
        if b - a <= 1e-15 * (a.abs() + b.abs()).max(1.0) {
            break;
        }
        if gc <= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - INV_PHI * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INV_PHI * (b - a);
            gd = g(d);
        }
    }
    let mut best = (start, g_start);
    for t in [a, b, c, d, 0.5 * (a + b)] {
        let v = g(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    best.0
}

impl ClosedSet for ImageShape<'_> {
    fn distance(&self, y: Vec2) -> f64 {
        self.candidates(y, 0.0)
            .iter()
            .map(|c| c.distance)
            .fold(f64::INFINITY, f64::min)
    }

    fn nearest_set(&self, y: Vec2, tol: f64, sep: f64) -> NearestSet {
        let cands = self.candidates(y, tol);
        let distance = cands
            .iter()
            .map(|c| c.distance)
            .fold(f64::INFINITY, f64::min);
        let tuples: Vec<_> = cands
            .iter()
            .map(|c| (c.distance, c.point, c.primitive, c.continuum))
            .collect();
        cluster_witnesses(&tuples, distance, tol, sep)
    }

    fn bounding(&self) -> Option<Circle> {
        Some(self.shape.bounding_circle())
    }
}
