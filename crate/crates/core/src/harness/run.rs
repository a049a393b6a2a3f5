//! Verification runs: matched medial samples of `S` and `F(S)`, measured
//! Hausdorff distances, and the analytic bounds they are checked against.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{DemoSpec, ExperimentConfig, Resolved};
use super::HarnessError;
use crate::bounds::{banach_bound, rho_prime_interval, BoundInput, BoundReport, RegimeFlags};
use crate::diffeo::{
    angle_cosine_floor, certify_constants, transport_normal, Audit, Constants, Diffeomorphism,
    Family,
};
use crate::geom::{directed_hausdorff, hausdorff, vec2, FreeSet, Primitive, Shape, Vec2};
use crate::image::ImageShape;
use crate::medial::{
    dedup_centers, grid_medial_oracle, grid_medial_oracle_window, sample_boundary, shoot,
    CloudSource, MedialCloud, MedialSample, Shot,
};
use crate::projection::{projection_range, Extent, ProjectionRange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(&self) -> bool {
        *self == Verdict::Pass
    }
}

/// One matched pair: a maximal ball of `S` at `(p, u)` and the maximal ball
/// of `F(S)` at `(F(p), u′)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairRecord {
    pub p: Vec2,
    pub u: Vec2,
    pub rho: f64,
    pub rho_prime: f64,
    pub cosine: f64,
    pub c_dist: f64,
    pub rho_ok: bool,
    pub c_dist_ok: bool,
    pub cosine_ok: bool,
}

impl PairRecord {
    pub fn bound_ok(&self) -> bool {
        self.rho_ok && self.c_dist_ok && self.cosine_ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checks {
    pub n_pairs: usize,
    /// Pairs whose image range was unbounded; reported, not interpreted.
    pub n_dropped: usize,
    pub rho_violations: usize,
    pub c_dist_violations: usize,
    pub cosine_violations: usize,
    pub dh_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub family: Family,
    pub magnitude: f64,
    pub resolved: Resolved,
    pub constants: Constants,
    pub audit: Audit,
    pub cosine_floor: f64,
    /// Tolerance on the radius interval and on center displacements.
    pub pair_tolerance: f64,
    pub measured_dh: f64,
    pub bound: BoundReport,
    pub sampling_slack: f64,
    pub checks: Checks,
    pub cloud_sizes: [usize; 2],
    pub verdict: Verdict,
    pub wall_clock_s: f64,
    #[serde(skip)]
    pub pairs: Vec<PairRecord>,
    #[serde(skip)]
    pub cloud_s: MedialCloud,
    #[serde(skip)]
    pub cloud_fs: MedialCloud,
    #[serde(skip)]
    pub ranges_s: Vec<ProjectionRange>,
    #[serde(skip)]
    pub ranges_fs: Vec<ProjectionRange>,
}

/// Shooting on `F(S)` from the forward-mapped samples of `S` with
/// transported normals.
struct ImageShots {
    /// `(index into S shots, image range)` for shots of `S` with positive
    /// finite range.
    matched: Vec<(usize, ProjectionRange)>,
}

fn image_shots(
    shape: &Shape,
    diffeo: &Diffeomorphism,
    res: &Resolved,
    shots: &[Shot],
) -> Result<ImageShots, HarnessError> {
    let image = ImageShape::new(shape, diffeo)?;
    let params = res.range_params();
    let matched = shots
        .par_iter()
        .enumerate()
        .filter(|(_, s)| s.range.lambda().is_some())
        .map(|(i, s)| {
            let s = &s.range;
            let p_img = diffeo.forward(s.origin);
            let u_img = transport_normal(&diffeo.jacobian(s.origin), s.direction)?;
            Ok((i, projection_range(&image, p_img, u_img, &params)?))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(ImageShots { matched })
}

fn range_value(r: &ProjectionRange) -> Option<f64> {
    match r.extent {
        Extent::Finite(l) => Some(l),
        Extent::Unbounded => None,
    }
}

/// Matched-pair verification of one shape and diffeomorphism.
pub fn verify(
    shape: &Shape,
    diffeo: &Diffeomorphism,
    res: &Resolved,
    seed: u64,
    n_probe: usize,
    config_hash: String,
) -> Result<RunRecord, HarnessError> {
    let start = Instant::now();
    let (constants, audit) = certify_constants(diffeo, n_probe, seed)?;
    let r = shape.radius();
    let mut input = BoundInput {
        r,
        rho: r,
        l_f: constants.l_f,
        l_df: constants.l_df,
        eps1: constants.eps1,
        eps2: constants.eps2,
        eps_banach: constants.eps_banach,
    };
    if let Some(flag) = RegimeFlags::of(&input).main_violation() {
        return Err(HarnessError::Regime(flag));
    }
    let cosine_floor = angle_cosine_floor(constants.eps2)?;
    let pair_tol = res.tau_bis * constants.l_f * constants.l_f;

    let params = res.range_params();
    let samples = sample_boundary(shape, res.h_b, res.n_dir);
    let shots_s = shoot(shape, &samples, &params)?;
    let ImageShots { matched } = image_shots(shape, diffeo, res, &shots_s)?;

    let mut rho_max: f64 = 0.0;
    let mut pairs = Vec::with_capacity(matched.len());
    let mut image_samples = Vec::with_capacity(matched.len());
    let mut n_dropped = 0;
    // the main bound does not depend on ρ, so evaluate it once
    let bound_value = BoundReport::evaluate(&input)?.hausdorff_bound;
    for (i, img) in &matched {
        let s = &shots_s[*i].range;
        let rho = s.lambda().expect("filtered to finite ranges");
        let Some(rho_prime) = range_value(img) else {
            n_dropped += 1;
            continue;
        };
        rho_max = rho_max.max(rho);
        let (rho1, rho2) = rho_prime_interval(rho, constants.l_f, constants.l_df)?;
        let c = s.origin + s.direction * rho;
        let c_img = img.origin + img.direction * rho_prime;
        let cosine = s.direction.dot(&img.direction);
        let c_dist = (c - c_img).norm();
        pairs.push(PairRecord {
            p: s.origin,
            u: s.direction,
            rho,
            rho_prime,
            cosine,
            c_dist,
            rho_ok: rho1 - pair_tol <= rho_prime && rho_prime <= rho2 + pair_tol,
            c_dist_ok: c_dist <= bound_value + 2.0 * pair_tol,
            cosine_ok: cosine >= cosine_floor - 1e-10,
        });
        if let Some(m) = MedialSample::from_range(img) {
            image_samples.push(m);
        }
    }

    let cloud_s = full_cloud(&shots_s, res);
    let cloud_fs = MedialCloud {
        samples: dedup_centers(image_samples, 0.0),
        ..cloud_s.clone()
    };
    if cloud_s.is_empty() || cloud_fs.is_empty() {
        return Err(HarnessError::NoAxis);
    }
    let measured_dh = hausdorff(&cloud_s.centers(), &cloud_fs.centers())?;
    input.rho = rho_max.max(f64::MIN_POSITIVE);
    let bound = BoundReport::evaluate(&input)?.with_measurement(measured_dh);
    let slack = res.sampling_slack();
    let checks = Checks {
        n_pairs: pairs.len(),
        n_dropped,
        rho_violations: pairs.iter().filter(|p| !p.rho_ok).count(),
        c_dist_violations: pairs.iter().filter(|p| !p.c_dist_ok).count(),
        cosine_violations: pairs.iter().filter(|p| !p.cosine_ok).count(),
        dh_ok: measured_dh <= bound.hausdorff_bound + slack,
    };
    let verdict = Verdict::from_bool(
        checks.dh_ok
            && checks.n_pairs > 0
            && checks.rho_violations == 0
            && checks.c_dist_violations == 0
            && checks.cosine_violations == 0,
    );
    Ok(RunRecord {
        config_hash,
        family: diffeo.phi.family,
        magnitude: diffeo.phi.magnitude(),
        resolved: *res,
        constants,
        audit,
        cosine_floor,
        pair_tolerance: pair_tol,
        measured_dh,
        bound,
        sampling_slack: slack,
        checks,
        cloud_sizes: [cloud_s.len(), cloud_fs.len()],
        verdict,
        wall_clock_s: start.elapsed().as_secs_f64(),
        pairs,
        cloud_s,
        cloud_fs,
        ranges_s: shots_s.into_iter().map(|s| s.range).collect(),
        ranges_fs: matched.into_iter().map(|(_, r)| r).collect(),
    })
}

/// Every finite positive shot, sorted. Deduplication would add up to its
/// separation to measured distances, so measurements use the full set.
fn full_cloud(shots: &[Shot], res: &Resolved) -> MedialCloud {
    let samples = shots
        .iter()
        .filter_map(|s| MedialSample::from_range(&s.range))
        .collect();
    MedialCloud {
        samples: dedup_centers(samples, 0.0),
        source: CloudSource::Shooting,
        h_b: Some(res.h_b),
        n_dir: Some(res.n_dir),
        h_g: None,
    }
}

pub fn run_verify(config: &ExperimentConfig) -> Result<RunRecord, HarnessError> {
    let shape = config.build_shape()?;
    let res = config.resolve(&shape)?;
    let diffeo = config.build_diffeo(&shape, &res)?;
    verify(
        &shape,
        &diffeo,
        &res,
        config.seed,
        config.n_probe,
        config.hash(),
    )
}

/// Magnitude of the configured family whose certified `ε` equals `eps`.
pub fn magnitude_for_eps(template: &Diffeomorphism, eps: f64) -> Result<f64, HarnessError> {
    if eps == 0.0 {
        return Ok(0.0);
    }
    let eps_of = |m: f64| -> Option<f64> {
        let d = Diffeomorphism {
            phi: template.phi.with_magnitude(m),
            ..*template
        };
        d.constants().ok().map(|c| c.eps_banach)
    };
    let mut hi = match template.phi.family {
        Family::Identity => {
            return Err(HarnessError::Input(
                "a sweep needs a bump or twist family".into(),
            ))
        }
        Family::Bump { .. } => template.phi.radius,
        Family::Twist { .. } => std::f64::consts::PI,
    };
    // shrink until the constants exist, then bisect on the monotone ε(m)
    while eps_of(hi).is_none() {
        hi *= 0.5;
    }
    if eps_of(hi).unwrap() < eps {
        return Err(HarnessError::Input(format!("eps = {eps} is not reachable")));
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eps_of(mid).is_some_and(|e| e < eps) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Ordinary least squares with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub r_squared: f64,
    pub n: usize,
}

impl LinearFit {
    pub fn new(xs: &[f64], ys: &[f64]) -> Option<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return None;
        }
        let nf = n as f64;
        let mx = xs.iter().sum::<f64>() / nf;
        let my = ys.iter().sum::<f64>() / nf;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        if sxx == 0.0 {
            return None;
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let sse: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        let slope_se = if n > 2 {
            (sse / (nf - 2.0) / sxx).sqrt()
        } else {
            f64::NAN
        };
        let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
        Some(LinearFit {
            slope,
            intercept,
            slope_se,
            r_squared,
            n,
        })
    }

    /// `slope ± 2·se`.
    pub fn band(&self) -> (f64, f64) {
        (
            self.slope - 2.0 * self.slope_se,
            self.slope + 2.0 * self.slope_se,
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub config_hash: String,
    pub eps: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub n_admissible: usize,
    /// Fit of `ln d_H` against `ln ε` over positive entries.
    pub loglog: Option<LinearFit>,
    pub loglog_band: Option<(f64, f64)>,
    /// `max d_H/ε` over the positive entries.
    pub max_dh_over_eps: f64,
    pub verdict: Verdict,
    pub records: Vec<RunRecord>,
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepReport, HarnessError> {
    let spec = config
        .sweep
        .as_ref()
        .ok_or_else(|| HarnessError::Input("sweep mode needs a `sweep.eps` grid".into()))?;
    let shape = config.build_shape()?;
    let res = config.resolve(&shape)?;
    let template = config.build_diffeo(&shape, &res)?;
    let r = shape.radius();
    let n_admissible = spec
        .eps
        .iter()
        .filter(|&&e| e >= 0.0 && r * e <= 0.25)
        .count();
    if n_admissible < 5 {
        return Err(HarnessError::Input(format!(
            "sweep needs at least 5 grid points with r*eps <= 1/4, got {n_admissible}"
        )));
    }
    let mut records = Vec::with_capacity(spec.eps.len());
    let mut magnitudes = Vec::with_capacity(spec.eps.len());
    for &eps in &spec.eps {
        if !(eps >= 0.0) {
            return Err(HarnessError::Input(format!(
                "eps = {eps} must be nonnegative"
            )));
        }
        let m = magnitude_for_eps(&template, eps)?;
        let diffeo = if eps == 0.0 {
            Diffeomorphism {
                phi: crate::diffeo::DisplacementField::identity(shape.center(), r)?,
                ..template
            }
        } else {
            Diffeomorphism {
                phi: template.phi.with_magnitude(m),
                ..template
            }
        };
        magnitudes.push(m);
        records.push(verify(
            &shape,
            &diffeo,
            &res,
            config.seed,
            config.n_probe,
            config.hash(),
        )?);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = spec
        .eps
        .iter()
        .zip(&records)
        .filter(|(e, rec)| **e > 0.0 && rec.measured_dh > 0.0)
        .map(|(e, rec)| (e.ln(), rec.measured_dh.ln()))
        .unzip();
    let loglog = LinearFit::new(&xs, &ys);
    let max_dh_over_eps = spec
        .eps
        .iter()
        .zip(&records)
        .filter(|(e, _)| **e > 0.0)
        .map(|(e, rec)| rec.measured_dh / e)
        .fold(0.0, f64::max);
    let verdict = Verdict::from_bool(records.iter().all(|r| r.verdict.passed()));
    Ok(SweepReport {
        config_hash: config.hash(),
        eps: spec.eps.clone(),
        magnitudes,
        n_admissible,
        loglog_band: loglog.map(|f| f.band()),
        loglog,
        max_dh_over_eps,
        verdict,
        records,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingEntry {
    pub factor: f64,
    pub banach_leading: f64,
    pub leading_ratio: f64,
    pub leading_ok: bool,
    pub measured_dh: f64,
    pub dh_ratio: f64,
    /// `2·λ·(sampling slack)`.
    pub dh_allowance: f64,
    pub dh_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub config_hash: String,
    pub entries: Vec<ScalingEntry>,
    pub verdict: Verdict,
    pub records: Vec<RunRecord>,
}

/// Scales shape, densities, and tolerances by each factor and conjugates
/// the diffeomorphism accordingly.
pub fn run_scaling(config: &ExperimentConfig) -> Result<ScalingReport, HarnessError> {
    let factors = config
        .scaling
        .as_ref()
        .map(|s| s.factors.clone())
        .unwrap_or_else(|| vec![1.0, 2.0, 5.0]);
    if factors.iter().any(|f| !(*f > 0.0)) {
        return Err(HarnessError::Input(
            "scaling factors must be positive".into(),
        ));
    }
    let shape = config.build_shape()?;
    let res = config.resolve(&shape)?;
    let diffeo = config.build_diffeo(&shape, &res)?;
    let base = verify(
        &shape,
        &diffeo,
        &res,
        config.seed,
        config.n_probe,
        config.hash(),
    )?;
    let base_leading = banach_bound(shape.radius(), base.constants.eps_banach).0;
    let mut entries = Vec::new();
    let mut records = Vec::new();
    for &lambda in &factors {
        let rec = if lambda == 1.0 {
            base.clone()
        } else {
            verify(
                &shape.scaled(lambda),
                &diffeo.conjugated(lambda),
                &res.scaled(lambda),
                config.seed,
                config.n_probe,
                config.hash(),
            )?
        };
        let leading = banach_bound(shape.radius() * lambda, rec.constants.eps_banach).0;
        let leading_ratio = if base_leading > 0.0 {
            leading / base_leading
        } else {
            lambda
        };
        let dh_ratio = if base.measured_dh > 0.0 {
            rec.measured_dh / base.measured_dh
        } else {
            f64::NAN
        };
        let allowance = 2.0 * lambda * res.sampling_slack();
        let dh_ok = if base.measured_dh > 0.0 {
            (dh_ratio - lambda).abs() <= allowance
        } else {
            rec.measured_dh <= allowance
        };
        entries.push(ScalingEntry {
            factor: lambda,
            banach_leading: leading,
            leading_ratio,
            leading_ok: (leading_ratio - lambda).abs() <= 1e-12 * lambda,
            measured_dh: rec.measured_dh,
            dh_ratio,
            dh_allowance: allowance,
            dh_ok,
        });
        records.push(rec);
    }
    let verdict = Verdict::from_bool(
        entries.iter().all(|e| e.leading_ok && e.dh_ok)
            && records.iter().all(|r| r.verdict.passed()),
    );
    Ok(ScalingReport {
        config_hash: config.hash(),
        entries,
        verdict,
        records,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub config_hash: String,
    pub h_b: f64,
    pub h_g: f64,
    pub threshold: f64,
    pub dh_shape: f64,
    pub dh_image: Option<f64>,
    pub verdict: Verdict,
    #[serde(skip)]
    pub shooting_s: MedialCloud,
    #[serde(skip)]
    pub oracle_s: MedialCloud,
    #[serde(skip)]
    pub shooting_fs: Option<MedialCloud>,
    #[serde(skip)]
    pub oracle_fs: Option<MedialCloud>,
}

/// Shooting clouds against brute-force grid oracles for `S` and, when the
/// diffeomorphism is not the identity, for `F(S)`.
pub fn run_oracle_compare(config: &ExperimentConfig) -> Result<OracleReport, HarnessError> {
    let shape = config.build_shape()?;
    let res = config.resolve(&shape)?;
    let diffeo = config.build_diffeo(&shape, &res)?;
    let params = res.range_params();
    let samples = sample_boundary(&shape, res.h_b, res.n_dir);
    let shots = shoot(&shape, &samples, &params)?;
    let shooting_s = full_cloud(&shots, &res);
    let oracle_s = grid_medial_oracle(&shape, res.h_g, res.h_g, 2.0 * res.h_g)?;
    if shooting_s.is_empty() || oracle_s.is_empty() {
        return Err(HarnessError::NoAxis);
    }
    let dh_shape = hausdorff(&shooting_s.centers(), &oracle_s.centers())?;
    let threshold = res.sampling_slack();
    let (mut shooting_fs, mut oracle_fs, mut dh_image) = (None, None, None);
    if !diffeo.is_identity() {
        let image = ImageShape::new(&shape, &diffeo)?;
        let ImageShots { matched } = image_shots(&shape, &diffeo, &res, &shots)?;
        let samples: Vec<MedialSample> = matched
            .iter()
            .filter_map(|(_, r)| MedialSample::from_range(r))
            .collect();
        let cloud = MedialCloud {
            samples: dedup_centers(samples, 0.0),
            ..shooting_s.clone()
        };
        let oracle = grid_medial_oracle(&image, res.h_g, res.h_g, 2.0 * res.h_g)?;
        if cloud.is_empty() || oracle.is_empty() {
            return Err(HarnessError::NoAxis);
        }
        dh_image = Some(hausdorff(&cloud.centers(), &oracle.centers())?);
        shooting_fs = Some(cloud);
        oracle_fs = Some(oracle);
    }
    let verdict =
        Verdict::from_bool(dh_shape <= threshold && dh_image.is_none_or(|d| d <= threshold));
    Ok(OracleReport {
        config_hash: config.hash(),
        h_b: res.h_b,
        h_g: res.h_g,
        threshold,
        dh_shape,
        dh_image,
        verdict,
        shooting_s,
        oracle_s,
        shooting_fs,
        oracle_fs,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoReport {
    pub windows: Vec<f64>,
    /// Directed distance from the perturbed axis to the original one.
    pub directed_dh: Vec<f64>,
    pub fit: Option<LinearFit>,
    pub monotone: bool,
    pub verdict: Verdict,
}

/// Without a bounding circle, the bisector of two points moves by an amount
/// that grows with the scan window under a generic perturbation.
pub fn run_demo_unbounded(spec: &DemoSpec) -> Result<DemoReport, HarnessError> {
    if spec.windows.len() < 2 || !(spec.pitch > 0.0) {
        return Err(HarnessError::Input(
            "demo needs >= 2 windows and a positive pitch".into(),
        ));
    }
    let set = |pts: &[[f64; 2]; 2]| FreeSet {
        primitives: pts
            .iter()
            .map(|p| Primitive::point(vec2(p[0], p[1])))
            .collect(),
    };
    let (orig, pert) = (set(&spec.original), set(&spec.perturbed));
    let h = spec.pitch;
    let mut dh = Vec::with_capacity(spec.windows.len());
    for &w in &spec.windows {
        let a = grid_medial_oracle_window(&orig, vec2(0.0, 0.0), w, h, h, 2.0 * h, None);
        let b = grid_medial_oracle_window(&pert, vec2(0.0, 0.0), w, h, h, 2.0 * h, None);
        if a.is_empty() || b.is_empty() {
            return Err(HarnessError::NoAxis);
        }
        dh.push(directed_hausdorff(&b.centers(), &a.centers())?);
    }
    let monotone = dh.windows(2).all(|p| p[1] > p[0]);
    let fit = LinearFit::new(&spec.windows, &dh);
    let verdict =
        Verdict::from_bool(monotone && fit.is_some_and(|f| f.slope > 0.0 && f.r_squared > 0.99));
    Ok(DemoReport {
        windows: spec.windows.clone(),
        directed_dh: dh,
        fit,
        monotone,
        verdict,
    })
}
