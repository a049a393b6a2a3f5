//! Medial-axis sampling by shooting along boundary normals, a brute-force grid
//! oracle, local feature size, and reach.

use std::collections::HashMap;
use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::geom::{perp, rotate, vec2, Circle, ClosedSet, Primitive, Shape, Vec2};
use crate::projection::{projection_range, ProjectionError, ProjectionRange, RangeParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MedialError {
    #[error("medial cloud is empty")]
    NoAxis,
    #[error(transparent)]
    Projection(#[from] ProjectionError),
}

/// A point of the set with the candidate directions to shoot from it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundarySample {
    pub point: Vec2,
    pub normals: Vec<Vec2>,
    pub primitive: usize,
}

fn fan(n_dir: usize) -> impl Iterator<Item = Vec2> {
    (0..n_dir).map(move |k| rotate(vec2(1.0, 0.0), TAU * k as f64 / n_dir as f64))
}

/// Arc-length uniform samples on every primitive with candidate normals.
///
/// Segments and circles get both sides; isolated points get `n_dir` evenly
/// spread directions. Segment endpoints additionally get the part of that fan
/// pointing away from the segment, since their normal cone is a half-plane.
pub fn sample_boundary(shape: &Shape, h_b: f64, n_dir: usize) -> Vec<BoundarySample> {
    let mut out = Vec::new();
    for (i, prim) in shape.primitives().iter().enumerate() {
        match *prim {
            Primitive::SinglePoint { at } => out.push(BoundarySample {
                point: at,
                normals: fan(n_dir).collect(),
                primitive: i,
            }),
            Primitive::Segment { a, b } => {
                let len = (b - a).norm();
                let dir = (b - a) / len;
                let n = ((len / h_b) - 1e-9).ceil().max(1.0) as usize;
                let side = perp(dir);
                for k in 0..=n {
                    let mut normals = vec![side, -side];
                    let outward = if k == 0 {
                        Some(-dir)
                    } else if k == n {
                        Some(dir)
                    } else {
                        None
                    };
                    if let Some(out_dir) = outward {
                        normals.extend(fan(n_dir).filter(|u| u.dot(&out_dir) > 1e-12));
                    }
                    out.push(BoundarySample {
                        point: a + (b - a) * (k as f64 / n as f64),
                        normals,
                        primitive: i,
                    });
                }
            }
            Primitive::Circle { center, radius } => {
                let n = ((TAU * radius / h_b) - 1e-9).ceil().max(3.0) as usize;
                for k in 0..n {
                    let radial = rotate(vec2(1.0, 0.0), TAU * k as f64 / n as f64);
                    out.push(BoundarySample {
                        point: center + radial * radius,
                        normals: vec![-radial, radial],
                        primitive: i,
                    });
                }
            }
        }
    }
    out
}

/// One projection-range computation from a boundary sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Shot {
    pub sample: usize,
    pub range: ProjectionRange,
}

/// Projection ranges for every (sample, candidate direction), in sample order.
pub fn shoot<S: ClosedSet + ?Sized>(
    set: &S,
    samples: &[BoundarySample],
    params: &RangeParams,
) -> Result<Vec<Shot>, ProjectionError> {
    let jobs: Vec<(usize, Vec2, Vec2)> = samples
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.normals.iter().map(move |u| (i, s.point, *u)))
        .collect();
    jobs.par_iter()
        .map(|&(sample, p, u)| {
            projection_range(set, p, u, params).map(|range| Shot { sample, range })
        })
        .collect()
}

/// Center of a maximal empty weakly tangent ball with its witness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MedialSample {
    pub center: Vec2,
    pub radius: f64,
    pub witness: Vec2,
    pub direction: Vec2,
}

impl MedialSample {
    pub fn from_range(range: &ProjectionRange) -> Option<Self> {
        range.lambda().map(|radius| MedialSample {
            center: range.origin + range.direction * radius,
            radius,
            witness: range.origin,
            direction: range.direction,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudSource {
    Shooting,
    GridOracle,
}

impl CloudSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            CloudSource::Shooting => "shooting",
            CloudSource::GridOracle => "grid_oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MedialCloud {
    pub samples: Vec<MedialSample>,
    pub source: CloudSource,
    pub h_b: Option<f64>,
    pub n_dir: Option<usize>,
    pub h_g: Option<f64>,
}

impl MedialCloud {
    pub fn centers(&self) -> Vec<Vec2> {
        self.samples.iter().map(|s| s.center).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }
}

/// Keeps one sample per cluster of centers closer than `sep`. Samples are
/// visited in lexicographic center order so the result does not depend on
/// how they were produced.
pub fn dedup_centers(mut samples: Vec<MedialSample>, sep: f64) -> Vec<MedialSample> {
    samples.sort_by(|a, b| {
        a.center
            .x
            .total_cmp(&b.center.x)
            .then(a.center.y.total_cmp(&b.center.y))
            .then(a.radius.total_cmp(&b.radius))
    });
    if sep <= 0.0 {
        return samples;
    }
    let cell = |c: Vec2| ((c.x / sep).floor() as i64, (c.y / sep).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<Vec2>> = HashMap::new();
    let mut kept = Vec::new();
    for s in samples {
        let (cx, cy) = cell(s.center);
        let near = (-1..=1).any(|dx| {
            (-1..=1).any(|dy| {
                grid.get(&(cx + dx, cy + dy))
                    .is_some_and(|v| v.iter().any(|c| (c - s.center).norm() < sep))
            })
        });
        if !near {
            grid.entry((cx, cy)).or_default().push(s.center);
            kept.push(s);
        }
    }
    kept
}

/// Cloud from already computed shots, deduplicated at `h_b / 2`.
pub fn cloud_from_shots(shots: &[Shot], h_b: f64, n_dir: usize) -> MedialCloud {
    let raw: Vec<MedialSample> = shots
        .iter()
        .filter_map(|s| MedialSample::from_range(&s.range))
        .collect();
    MedialCloud {
        samples: dedup_centers(raw, 0.5 * h_b),
        source: CloudSource::Shooting,
        h_b: Some(h_b),
        n_dir: Some(n_dir),
        h_g: None,
    }
}

/// Maximal-ball centers reached from every boundary sample and candidate
/// direction with finite positive projection range.
pub fn shoot_medial_cloud(
    shape: &Shape,
    h_b: f64,
    n_dir: usize,
    params: &RangeParams,
) -> Result<MedialCloud, MedialError> {
    let samples = sample_boundary(shape, h_b, n_dir);
    let shots = shoot(shape, &samples, params)?;
    Ok(cloud_from_shots(&shots, h_b, n_dir))
}

/// Grid points of the closed bounding ball whose nearest set is not a single
/// point (up to `tol`, clustered at `sep`).
pub fn grid_medial_oracle<S: ClosedSet + ?Sized>(
    set: &S,
    h_g: f64,
    tol: f64,
    sep: f64,
) -> Result<MedialCloud, MedialError> {
    let ball = set.bounding().ok_or(MedialError::NoAxis)?;
    Ok(grid_medial_oracle_window(
        set,
        ball.center,
        ball.radius,
        h_g,
        tol,
        sep,
        Some(ball),
    ))
}

/// Grid oracle over the square `center ± half_width`, optionally restricted
/// to a disk. Grid points are `center + h_g·(i, j)`.
pub fn grid_medial_oracle_window<S: ClosedSet + ?Sized>(
    set: &S,
    center: Vec2,
    half_width: f64,
    h_g: f64,
    tol: f64,
    sep: f64,
    disk: Option<Circle>,
) -> MedialCloud {
    let n = (half_width / h_g + 1e-9).floor() as i64;
    let samples: Vec<MedialSample> = (-n..=n)
        .into_par_iter()
        .flat_map_iter(|i| {
            (-n..=n).filter_map(move |j| {
                let x = center + vec2(i as f64, j as f64) * h_g;
                if let Some(d) = disk {
                    if !d.contains(x, 1e-12 * d.radius) {
                        return None;
                    }
                }
                let ns = set.nearest_set(x, tol, sep);
                if !ns.is_multiple() || ns.distance <= 0.0 {
                    return None;
                }
                let witness = ns.witnesses[0].point;
                Some(MedialSample {
                    center: x,
                    radius: ns.distance,
                    witness,
                    direction: (x - witness) / (x - witness).norm(),
                })
            })
        })
        .collect();
    MedialCloud {
        samples,
        source: CloudSource::GridOracle,
        h_b: None,
        n_dir: None,
        h_g: Some(h_g),
    }
}

/// Distance from `p` to the nearest cloud center; an upper estimate of the
/// local feature size.
pub fn local_feature_size(p: Vec2, cloud: &MedialCloud) -> Result<f64, MedialError> {
    cloud
        .samples
        .iter()
        .map(|s| (s.center - p).norm())
        .min_by(f64::total_cmp)
        .ok_or(MedialError::NoAxis)
}

/// Minimum local feature size over boundary samples at spacing `h_b`.
pub fn reach(shape: &Shape, cloud: &MedialCloud, h_b: f64) -> Result<f64, MedialError> {
    if cloud.is_empty() {
        return Err(MedialError::NoAxis);
    }
    sample_boundary(shape, h_b, 1)
        .par_iter()
        .map(|s| local_feature_size(s.point, cloud))
        .try_reduce(|| f64::INFINITY, |a, b| Ok(a.min(b)))
}
