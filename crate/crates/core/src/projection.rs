//! Projection ranges along unit directions, back-projection pairs, the map
//! onto the closure of the medial axis, and tangent / normal cone probes.
//!
//! The range in direction `u` from `p ∈ S` is the largest `λ` for which the
//! closed ball `B(p + λu, λ)` has no point of `S` in its interior. The deficit
//! `λ - d(p + λu, S)` is zero up to that radius and strictly positive beyond
//! it, because the balls are nested; the range is found by bisecting on that
//! monotone predicate.

use serde::Serialize;
use thiserror::Error;

use crate::geom::{perp, rotate, ClosedSet, Primitive, Shape, Vec2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("origin is not on the set (distance {distance:e})")]
    NotOnSet { distance: f64 },
    #[error("direction is not a unit vector (|u| = {norm})")]
    NotUnit { norm: f64 },
    #[error("projection range is {0}, not a finite positive value")]
    NotBackProjection(&'static str),
}

/// Numerical knobs for range computation. All are lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct RangeParams {
    /// Ranges reaching this far are reported as unbounded.
    pub lambda_max: f64,
    /// Final bisection bracket width.
    pub tau_bis: f64,
    /// How far the origin may sit from the set.
    pub on_set_tol: f64,
    /// Deficits at or below this count as zero (rounding floor).
    pub zero_tol: f64,
    pub max_iter: u32,
}

impl RangeParams {
    pub fn for_radius(r: f64) -> Self {
        Self {
            lambda_max: 2.0 * r,
            tau_bis: 1e-8 * r,
            on_set_tol: 1e-9 * r,
            zero_tol: 1e-12 * r,
            max_iter: 80,
        }
    }

    pub fn with_tau_bis(mut self, tau_bis: f64) -> Self {
        self.tau_bis = tau_bis;
        self
    }

    /// Radius at which a zero range is told apart from a positive one.
    pub fn probe(&self) -> f64 {
        (16.0 * self.tau_bis).min(self.lambda_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Extent {
    Finite(f64),
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionRange {
    pub origin: Vec2,
    pub direction: Vec2,
    pub extent: Extent,
    pub iterations: u32,
}

impl ProjectionRange {
    /// Finite positive range, if any.
    pub fn lambda(&self) -> Option<f64> {
        match self.extent {
            Extent::Finite(l) if l > 0.0 => Some(l),
            _ => None,
        }
    }

    pub fn status(&self) -> &'static str {
        match self.extent {
            Extent::Finite(l) if l > 0.0 => "finite",
            Extent::Finite(_) => "zero",
            Extent::Unbounded => "unbounded",
        }
    }
}

fn check_on_set<S: ClosedSet + ?Sized>(
    set: &S,
    p: Vec2,
    params: &RangeParams,
) -> Result<(), ProjectionError> {
    let distance = set.distance(p);
    if distance > params.on_set_tol {
        return Err(ProjectionError::NotOnSet { distance });
    }
    Ok(())
}

#[inline]
fn raw_deficit<S: ClosedSet + ?Sized>(set: &S, p: Vec2, u: Vec2, lambda: f64) -> f64 {
    lambda - set.distance(p + u * lambda)
}

/// `λ - d(p + λu, S)`; nondecreasing in `λ`.
pub fn deficit<S: ClosedSet + ?Sized>(
    set: &S,
    p: Vec2,
    u: Vec2,
    lambda: f64,
    params: &RangeParams,
) -> Result<f64, ProjectionError> {
    check_on_set(set, p, params)?;
    Ok(raw_deficit(set, p, u, lambda))
}

/// Bisection for the last `λ ∈ [lo, hi]` satisfying a monotone predicate that
/// holds at `lo` and fails at `hi`. Returns the final `lo` and the step count.
pub fn bisect_last_true(
    mut lo: f64,
    mut hi: f64,
    width: f64,
    max_iter: u32,
    mut holds: impl FnMut(f64) -> bool,
) -> (f64, u32) {
    let mut it = 0;
    while hi - lo >= width && it < max_iter {
        let mid = 0.5 * (lo + hi);
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        it += 1;
    }
    (lo, it)
}

/// Projection range of `set` at `p` in unit direction `u`.
pub fn projection_range<S: ClosedSet + ?Sized>(
    set: &S,
    p: Vec2,
    u: Vec2,
    params: &RangeParams,
) -> Result<ProjectionRange, ProjectionError> {
    check_on_set(set, p, params)?;
    let empty = |lambda: f64| raw_deficit(set, p, u, lambda) <= params.zero_tol;
    let result = |extent, iterations| ProjectionRange {
        origin: p,
        direction: u,
        extent,
        iterations,
    };
    let probe = params.probe();
    if !empty(probe) {
        return Ok(result(Extent::Finite(0.0), 0));
    }
    if empty(params.lambda_max) {
        return Ok(result(Extent::Unbounded, 0));
    }
    let (lambda, it) = bisect_last_true(
        probe,
        params.lambda_max,
        params.tau_bis,
        params.max_iter,
        empty,
    );
    Ok(result(Extent::Finite(lambda), it))
}

/// Whether `u` is a unit back-projection direction at `p`.
pub fn ubp_membership<S: ClosedSet + ?Sized>(
    set: &S,
    p: Vec2,
    u: Vec2,
    params: &RangeParams,
) -> Result<bool, ProjectionError> {
    let norm = u.norm();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(ProjectionError::NotUnit { norm });
    }
    Ok(projection_range(set, p, u, params)?.lambda().is_some())
}

/// A point of the set with a direction of finite positive projection range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BackProjectionPair {
    pub p: Vec2,
    pub u: Vec2,
    pub range: ProjectionRange,
}

impl BackProjectionPair {
    pub fn from_range(range: ProjectionRange) -> Result<Self, ProjectionError> {
        match range.extent {
            Extent::Unbounded => Err(ProjectionError::NotBackProjection("unbounded")),
            Extent::Finite(l) if l <= 0.0 => Err(ProjectionError::NotBackProjection("zero")),
            Extent::Finite(_) => Ok(Self {
                p: range.origin,
                u: range.direction,
                range,
            }),
        }
    }

    pub fn new<S: ClosedSet + ?Sized>(
        set: &S,
        p: Vec2,
        u: Vec2,
        params: &RangeParams,
    ) -> Result<Self, ProjectionError> {
        Self::from_range(projection_range(set, p, u, params)?)
    }

    pub fn lambda(&self) -> f64 {
        self.range.lambda().expect("validated at construction")
    }
}

/// Center `p + λu` of the maximal empty ball weakly tangent at `p`.
pub fn medial_projection(pair: &BackProjectionPair) -> Vec2 {
    pair.p + pair.u * pair.lambda()
}

/// Sampled tangent directions of a shape at one of its points, each with a
/// nearby point of the shape that realizes it.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentProbe {
    pub p: Vec2,
    pub directions: Vec<Vec2>,
    pub realizations: Vec<Vec2>,
    pub resolution: f64,
}

impl TangentProbe {
    /// Analytic tangents of every primitive through `p`. Isolated points
    /// contribute nothing (their tangent cone is `{0}`).
    pub fn at(shape: &Shape, p: Vec2, on_set_tol: f64, resolution: f64) -> Self {
        let mut directions: Vec<Vec2> = Vec::new();
        let mut realizations = Vec::new();
        let mut push = |t: Vec2, q: Vec2| {
            if directions.iter().all(|d| (d - t).norm() > 1e-12) {
                directions.push(t);
                realizations.push(q);
            }
        };
        for prim in shape.primitives() {
            if prim.distance(p) > on_set_tol {
                continue;
            }
            match *prim {
                Primitive::SinglePoint { .. } => {}
                Primitive::Segment { a, b } => {
                    let len = (b - a).norm();
                    let t = (b - a) / len;
                    let step = |room: f64| (0.5 * resolution).min(0.5 * room);
                    let to_b = (b - p).norm();
                    let to_a = (a - p).norm();
                    if to_b > on_set_tol {
                        push(t, p + t * step(to_b));
                    }
                    if to_a > on_set_tol {
                        push(-t, p - t * step(to_a));
                    }
                }
                Primitive::Circle { center, radius } => {
                    let radial = (p - center) / (p - center).norm();
                    let tangent = perp(radial);
                    let arc = (resolution / (2.0 * radius)).min(resolution);
                    push(tangent, center + rotate(radial, arc) * radius);
                    push(-tangent, center + rotate(radial, -arc) * radius);
                }
            }
        }
        Self {
            p,
            directions,
            realizations,
            resolution,
        }
    }
}

/// `max_t ⟨v, t⟩ / |v|` over sampled tangents; `-∞` when there are none.
pub fn normal_cone_margin(probe: &TangentProbe, v: Vec2) -> f64 {
    let n = v.norm();
    if n == 0.0 {
        return 0.0;
    }
    probe
        .directions
        .iter()
        .map(|t| v.dot(t) / n)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Whether `v` lies in the generalized normal cone (dual of the tangents),
/// up to `tau_angle`.
pub fn normal_cone_check(probe: &TangentProbe, v: Vec2, tau_angle: f64) -> bool {
    normal_cone_margin(probe, v) <= tau_angle
}

/// Whether `p + v` projects back onto `p` alone.
pub fn projects_back_uniquely<S: ClosedSet + ?Sized>(
    set: &S,
    p: Vec2,
    v: Vec2,
    tol: f64,
    sep: f64,
) -> bool {
    let ns = set.nearest_set(p + v, tol, sep);
    !ns.continuum && ns.witnesses.len() == 1 && (ns.witnesses[0].point - p).norm() <= sep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{vec2, Circle};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn circle_center() -> Shape {
        Shape::new(
            Circle::new(vec2(0.0, 0.0), 3.0),
            [Primitive::point(vec2(0.0, 0.0))],
        )
        .unwrap()
    }

    fn circle_only(r: f64) -> Shape {
        Shape::new(Circle::new(vec2(0.0, 0.0), r), []).unwrap()
    }

    fn two_points() -> Shape {
        Shape::new(
            Circle::new(vec2(0.0, 0.0), 3.0),
            [
                Primitive::point(vec2(-1.0, 0.0)),
                Primitive::point(vec2(1.0, 0.0)),
            ],
        )
        .unwrap()
    }

    fn segment_shape() -> Shape {
        Shape::new(
            Circle::new(vec2(0.0, 0.0), 3.0),
            [Primitive::segment(vec2(-1.0, 0.0), vec2(1.0, 0.0))],
        )
        .unwrap()
    }

    fn params(r: f64) -> RangeParams {
        RangeParams::for_radius(r).with_tau_bis(1e-8)
    }

    #[test]
    fn deficit_examples() {
        let s = circle_center();
        let p = vec2(3.0, 0.0);
        let u = vec2(-1.0, 0.0);
        let pr = params(3.0);
        assert_eq!(deficit(&s, p, u, 1.0, &pr).unwrap(), 0.0);
        assert_eq!(deficit(&s, p, u, 2.0, &pr).unwrap(), 1.0);
        assert_eq!(deficit(&s, p, u, 1.5, &pr).unwrap(), 0.0);
        assert!(matches!(
            deficit(&s, vec2(1.0, 1.0), u, 1.0, &pr),
            Err(ProjectionError::NotOnSet { .. })
        ));
    }

    #[test]
    fn range_examples() {
        let pr = params(3.0);
        let r = projection_range(&circle_center(), vec2(3.0, 0.0), vec2(-1.0, 0.0), &pr).unwrap();
        assert_abs_diff_eq!(r.lambda().unwrap(), 1.5, epsilon = 1e-8);

        let pr1 = params(1.0);
        let r = projection_range(&circle_only(1.0), vec2(1.0, 0.0), vec2(-1.0, 0.0), &pr1).unwrap();
        assert_abs_diff_eq!(r.lambda().unwrap(), 1.0, epsilon = 1e-8);

        let r = projection_range(&circle_only(3.0), vec2(3.0, 0.0), vec2(1.0, 0.0), &pr).unwrap();
        assert_eq!(r.extent, Extent::Unbounded);
        assert_eq!(r.status(), "unbounded");
    }

    #[test]
    fn medial_projection_examples() {
        let pr = params(3.0);
        let s = circle_center();
        let pair = BackProjectionPair::new(&s, vec2(3.0, 0.0), vec2(-1.0, 0.0), &pr).unwrap();
        let c = medial_projection(&pair);
        assert!((c - vec2(1.5, 0.0)).norm() <= 1e-8);
        let pair = BackProjectionPair::new(&s, vec2(0.0, 3.0), vec2(0.0, -1.0), &pr).unwrap();
        assert!((medial_projection(&pair) - vec2(0.0, 1.5)).norm() <= 1e-8);

        let out = BackProjectionPair::new(&s, vec2(3.0, 0.0), vec2(1.0, 0.0), &pr);
        assert_eq!(out, Err(ProjectionError::NotBackProjection("unbounded")));
    }

    #[test]
    fn two_point_projection_matches_ray_scan() {
        let s = two_points();
        let p = vec2(1.0, 0.0);
        let u = vec2(-1.0, 0.0);
        let pair = BackProjectionPair::new(&s, p, u, &params(3.0)).unwrap();
        let c = medial_projection(&pair);
        assert!(c.norm() <= 1e-8);
        // oracle: walk the ray on a 1e-4 grid until another witness appears
        let step = 1e-4;
        let mut k = 1;
        let first_multiple = loop {
            let lambda = k as f64 * step;
            if s.nearest_set(p + u * lambda, 1e-6, 1e-3)
                .has_witness_other_than(p)
            {
                break lambda;
            }
            k += 1;
        };
        assert!((first_multiple - pair.lambda()).abs() <= step);
    }

    #[test]
    fn ubp_examples() {
        let s = circle_only(1.0);
        let pr = params(1.0);
        let p = vec2(1.0, 0.0);
        assert!(ubp_membership(&s, p, vec2(-1.0, 0.0), &pr).unwrap());
        let tangent = projection_range(&s, p, vec2(0.0, 1.0), &pr).unwrap();
        assert_eq!(tangent.status(), "zero");
        assert!(!ubp_membership(&s, p, vec2(0.0, 1.0), &pr).unwrap());
        assert!(!ubp_membership(&s, p, vec2(1.0, 0.0), &pr).unwrap());
        assert!(matches!(
            ubp_membership(&s, p, vec2(2.0, 0.0), &pr),
            Err(ProjectionError::NotUnit { .. })
        ));
    }

    #[test]
    fn normal_cone_examples() {
        let s = circle_only(1.0);
        let p = vec2(1.0, 0.0);
        let probe = TangentProbe::at(&s, p, 1e-9, 1e-3);
        assert_eq!(probe.directions.len(), 2);
        assert!(normal_cone_check(&probe, vec2(-1.0, 0.0), 0.0));
        // the inward normal sits exactly on the cone boundary
        assert_eq!(normal_cone_margin(&probe, vec2(-1.0, 0.0)), 0.0);
        // a tangent direction is not normal
        assert!(!normal_cone_check(&probe, vec2(0.0, 1.0), 1e-2));

        let seg = segment_shape();
        let probe = TangentProbe::at(&seg, vec2(0.0, 0.0), 1e-9, 1e-3);
        assert!(!normal_cone_check(&probe, vec2(0.5, 1.0), 1e-2));
        assert_abs_diff_eq!(
            normal_cone_margin(&probe, vec2(0.5, 1.0)),
            0.5 / 1.25f64.sqrt(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn tangent_probe_realizations_meet_the_definition() {
        let s = Shape::new(
            Circle::new(vec2(0.0, 0.0), 3.0),
            [
                Primitive::segment(vec2(-1.0, 0.0), vec2(1.0, 0.5)),
                Primitive::circle(vec2(0.5, -1.0), 0.7),
            ],
        )
        .unwrap();
        let eps = 1e-3;
        for p in [
            vec2(-1.0, 0.0),
            vec2(0.0, 0.25),
            vec2(0.5, -0.3),
            vec2(0.0, 3.0),
        ] {
            let probe = TangentProbe::at(&s, p, 1e-9, eps);
            assert!(!probe.directions.is_empty());
            for (t, q) in probe.directions.iter().zip(&probe.realizations) {
                assert!(s.distance(*q) <= 1e-12);
                let d = (q - p).norm();
                assert!(d > 0.0 && d < eps);
                assert!(((q - p) / d - t).norm() < eps);
            }
        }
        // an isolated point has no tangents, so every vector is normal
        let iso = two_points();
        let probe = TangentProbe::at(&iso, vec2(1.0, 0.0), 1e-9, eps);
        assert!(probe.directions.is_empty());
        assert!(normal_cone_check(&probe, vec2(0.3, -0.7), 0.0));
    }

    #[test]
    fn normal_cone_agrees_with_unique_back_projection() {
        // positive-reach points: v normal iff p + ρv/|v| projects back onto p
        let s = segment_shape();
        let p = vec2(0.3, 0.0);
        let probe = TangentProbe::at(&s, p, 1e-9, 1e-3);
        for k in 0..64 {
            let v = rotate(vec2(1.0, 0.0), k as f64 * std::f64::consts::TAU / 64.0);
            let normal = normal_cone_check(&probe, v, 1e-9);
            let back = projects_back_uniquely(&s, p, v * 0.1, 1e-12, 1e-6);
            assert_eq!(normal, back, "direction {v:?}");
        }
    }

    fn corpus() -> Vec<Shape> {
        vec![
            circle_center(),
            two_points(),
            segment_shape(),
            Shape::new(
                Circle::new(vec2(0.0, 0.0), 3.0),
                [
                    Primitive::circle(vec2(-0.8, 0.0), 0.7),
                    Primitive::point(vec2(1.2, 0.3)),
                ],
            )
            .unwrap(),
        ]
    }

    /// A point on primitive `k` of the shape chosen by parameter `t ∈ [0,1)`.
    fn point_on(shape: &Shape, k: usize, t: f64) -> Vec2 {
        let prims = shape.primitives();
        match prims[k % prims.len()] {
            Primitive::SinglePoint { at } => at,
            Primitive::Segment { a, b } => a + (b - a) * t,
            Primitive::Circle { center, radius } => {
                center + rotate(vec2(radius, 0.0), t * std::f64::consts::TAU)
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn deficit_is_monotone(s_idx in 0usize..4, k in 0usize..4, t in 0.0..1.0f64,
                               angle in 0.0..std::f64::consts::TAU, l1 in 0.0..6.0f64, l2 in 0.0..6.0f64) {
            let shapes = corpus();
            let s = &shapes[s_idx];
            let p = point_on(s, k, t);
            let u = rotate(vec2(1.0, 0.0), angle);
            let pr = params(3.0);
            let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
            let dlo = deficit(s, p, u, lo, &pr).unwrap();
            let dhi = deficit(s, p, u, hi, &pr).unwrap();
            prop_assert!(dlo <= dhi + 1e-12);
        }

        #[test]
        fn back_projection_properties(s_idx in 0usize..4, k in 0usize..4, t in 0.0..1.0f64,
                                      angle in 0.0..std::f64::consts::TAU) {
            let shapes = corpus();
            let s = &shapes[s_idx];
            let p = point_on(s, k, t);
            let pr = params(3.0);
            // bias half of the draws towards the analytic normal so ranges are often positive
            let u = match s.primitives()[k % s.primitives().len()] {
                Primitive::Circle { center, .. } if angle < std::f64::consts::PI => {
                    let n = (p - center).normalize();
                    if angle < 1.57 { -n } else { n }
                }
                Primitive::Segment { a, b } if angle < std::f64::consts::PI => {
                    let n = perp((b - a).normalize());
                    if angle < 1.57 { n } else { -n }
                }
                _ => rotate(vec2(1.0, 0.0), angle),
            };
            let range = projection_range(s, p, u, &pr).unwrap();
            if let Some(lambda) = range.lambda() {
                // BP ⊆ Nor
                let probe = TangentProbe::at(s, p, pr.on_set_tol, 1e-4);
                prop_assert!(normal_cone_check(&probe, u, 1e-2));
                let pair = BackProjectionPair::from_range(range).unwrap();
                let c = medial_projection(&pair);
                // empty interior
                prop_assert!(s.distance(c) >= lambda - 2.0 * pr.tau_bis);
                // another witness just beyond the range
                let beyond = s.nearest_set(p + u * (lambda + 10.0 * pr.tau_bis), 1e-9, 1e-3);
                prop_assert!(beyond.has_witness_other_than(p));
                // weak tangency: nearby points along the tangents stay outside the ball
                for q in &probe.realizations {
                    prop_assert!((c - q).norm() >= lambda - probe.resolution.powi(2));
                }
            }
        }
    }
}
