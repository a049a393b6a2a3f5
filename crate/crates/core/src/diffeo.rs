//! Compactly supported C^{1,1} deformations `F = Id + φ`, their certified
//! constants, inversion, and adjoint normal transport.

use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{rotate, vec2, Vec2};

pub type Mat2 = Matrix2<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffeoError {
    #[error("bad family parameters: {0}")]
    BadFamily(String),
    #[error("displacement is not a contraction (Lip = {lip_phi})")]
    NotContraction { lip_phi: f64 },
    #[error("inverse iteration stalled with step {step}")]
    NoConvergence { step: f64 },
    #[error("sampled {name} = {sampled} exceeds analytic bound {analytic}")]
    ConstantBreach {
        name: &'static str,
        sampled: f64,
        analytic: f64,
    },
    #[error("singular Jacobian (det = {det})")]
    SingularJacobian { det: f64 },
    #[error("eps2 = {eps2} outside [0, 1)")]
    OutOfRegime { eps2: f64 },
}

/// Spectral norm of a 2×2 matrix.
pub fn op_norm(m: &Mat2) -> f64 {
    let s = m.iter().map(|v| v * v).sum::<f64>();
    let det = m.determinant();
    let disc = (s * s - 4.0 * det * det).max(0.0).sqrt();
    (0.5 * (s + disc)).sqrt()
}

/// Piecewise-quadratic C^{1,1} taper: 1 on `[0, t0]`, 0 on `[1, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Taper {
    pub t0: f64,
}

impl Taper {
    fn mid(&self) -> f64 {
        0.5 * (self.t0 + 1.0)
    }

    pub fn value(&self, s: f64) -> f64 {
        let w = 1.0 - self.t0;
        if s <= self.t0 {
            1.0
        } else if s <= self.mid() {
            let q = (s - self.t0) / w;
            1.0 - 2.0 * q * q
        } else if s < 1.0 {
            let q = (1.0 - s) / w;
            2.0 * q * q
        } else {
            0.0
        }
    }

    pub fn slope(&self, s: f64) -> f64 {
        let w = 1.0 - self.t0;
        if s <= self.t0 || s >= 1.0 {
            0.0
        } else if s <= self.mid() {
            -4.0 * (s - self.t0) / (w * w)
        } else {
            -4.0 * (1.0 - s) / (w * w)
        }
    }

    /// `max |η′|`, attained at the midpoint.
    pub fn max_slope(&self) -> f64 {
        2.0 / (1.0 - self.t0)
    }

    /// Lipschitz constant of `η′`; also bounds `|η′(s)/s|`.
    pub fn slope_lip(&self) -> f64 {
        let w = 1.0 - self.t0;
        4.0 / (w * w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "lowercase")]
pub enum Family {
    Identity,
    Bump {
        v: Vec2,
        #[serde(default = "default_plateau")]
        t0: f64,
    },
    Twist {
        theta: f64,
        #[serde(default = "default_plateau")]
        t0: f64,
    },
}

pub const DEFAULT_PLATEAU: f64 = 0.3;

fn default_plateau() -> f64 {
    DEFAULT_PLATEAU
}

/// Analytic constants of a displacement field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConstants {
    pub lip_phi: f64,
    pub lip_dphi: f64,
    pub sup_phi: f64,
    pub sup_dphi: f64,
}

/// `φ` supported in the closed ball `B(center, radius)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplacementField {
    pub family: Family,
    pub center: Vec2,
    pub radius: f64,
}

fn check_support(center: Vec2, radius: f64) -> Result<(), DiffeoError> {
    if !(radius > 0.0 && radius.is_finite()) || !center.iter().all(|c| c.is_finite()) {
        return Err(DiffeoError::BadFamily(format!(
            "support ball ({}, {}) radius {radius}",
            center.x, center.y
        )));
    }
    Ok(())
}

fn check_t0(t0: f64) -> Result<(), DiffeoError> {
    if !(t0 > 0.0 && t0 < 1.0) {
        return Err(DiffeoError::BadFamily(format!(
            "plateau t0 = {t0} not in (0, 1)"
        )));
    }
    Ok(())
}

const ROT90: Mat2 = Matrix2::new(0.0, -1.0, 1.0, 0.0);

fn rotation(a: f64) -> Mat2 {
    let (s, c) = a.sin_cos();
    Matrix2::new(c, -s, s, c)
}

impl DisplacementField {
    pub fn identity(center: Vec2, radius: f64) -> Result<Self, DiffeoError> {
        check_support(center, radius)?;
        Ok(Self {
            family: Family::Identity,
            center,
            radius,
        })
    }

    pub fn bump(v: Vec2, center: Vec2, radius: f64, t0: f64) -> Result<Self, DiffeoError> {
        check_support(center, radius)?;
        check_t0(t0)?;
        if !v.iter().all(|c| c.is_finite()) {
            return Err(DiffeoError::BadFamily(format!(
                "translation ({}, {})",
                v.x, v.y
            )));
        }
        Ok(Self {
            family: Family::Bump { v, t0 },
            center,
            radius,
        })
    }

    pub fn twist(theta: f64, center: Vec2, radius: f64, t0: f64) -> Result<Self, DiffeoError> {
        check_support(center, radius)?;
        check_t0(t0)?;
        if !(theta.abs() <= std::f64::consts::PI) {
            return Err(DiffeoError::BadFamily(format!(
                "twist angle {theta} not in [-π, π]"
            )));
        }
        Ok(Self {
            family: Family::Twist { theta, t0 },
            center,
            radius,
        })
    }

    pub fn from_family(family: Family, center: Vec2, radius: f64) -> Result<Self, DiffeoError> {
        match family {
            Family::Identity => Self::identity(center, radius),
            Family::Bump { v, t0 } => Self::bump(v, center, radius, t0),
            Family::Twist { theta, t0 } => Self::twist(theta, center, radius, t0),
        }
    }

    fn scaled_radius(&self, x: Vec2) -> f64 {
        (x - self.center).norm() / self.radius
    }

    pub fn evaluate(&self, x: Vec2) -> Vec2 {
        let s = self.scaled_radius(x);
        if s >= 1.0 {
            return Vec2::zeros();
        }
        match self.family {
            Family::Identity => Vec2::zeros(),
            Family::Bump { v, t0 } => v * Taper { t0 }.value(s),
            Family::Twist { theta, t0 } => {
                let w = x - self.center;
                rotate(w, theta * Taper { t0 }.value(s)) - w
            }
        }
    }

    pub fn jacobian(&self, x: Vec2) -> Mat2 {
        let s = self.scaled_radius(x);
        if s >= 1.0 {
            return Mat2::zeros();
        }
        let w = x - self.center;
        let dir = if s > 0.0 { w / w.norm() } else { Vec2::zeros() };
        match self.family {
            Family::Identity => Mat2::zeros(),
            Family::Bump { v, t0 } => v * (dir * (Taper { t0 }.slope(s) / self.radius)).transpose(),
            Family::Twist { theta, t0 } => {
                let taper = Taper { t0 };
                let rot = rotation(theta * taper.value(s));
                let grad = dir * (theta * taper.slope(s) / self.radius);
                rot + (rot * ROT90 * w) * grad.transpose() - Mat2::identity()
            }
        }
    }

    pub fn constants(&self) -> FieldConstants {
        let r = self.radius;
        match self.family {
            Family::Identity => FieldConstants {
                lip_phi: 0.0,
                lip_dphi: 0.0,
                sup_phi: 0.0,
                sup_dphi: 0.0,
            },
            Family::Bump { v, t0 } => {
                let taper = Taper { t0 };
                let m = v.norm();
                let sup_dphi = m * taper.max_slope() / r;
                FieldConstants {
                    lip_phi: sup_dphi,
                    lip_dphi: m * taper.slope_lip() / (r * r),
                    sup_phi: m,
                    sup_dphi,
                }
            }
            Family::Twist { theta, t0 } => {
                let taper = Taper { t0 };
                let (a, b, th) = (taper.max_slope(), taper.slope_lip(), theta.abs());
                let sup_dphi = th * (1.0 + a);
                FieldConstants {
                    lip_phi: sup_dphi,
                    lip_dphi: (th * th * a * a + 2.0 * th * a + th * b) / r,
                    sup_phi: 2.0 * r * (0.5 * th).sin(),
                    sup_dphi,
                }
            }
        }
    }

    /// The field of `x ↦ λ·F(x/λ)`.
    pub fn conjugated(&self, lambda: f64) -> Self {
        let family = match self.family {
            Family::Bump { v, t0 } => Family::Bump { v: v * lambda, t0 },
            other => other,
        };
        Self {
            family,
            center: self.center * lambda,
            radius: self.radius * lambda,
        }
    }

    /// Same family with its magnitude (|v| or |θ|) replaced by `m`.
    pub fn with_magnitude(&self, m: f64) -> Self {
        let family = match self.family {
            Family::Identity => Family::Identity,
            Family::Bump { v, t0 } => {
                let n = v.norm();
                let dir = if n > 0.0 { v / n } else { vec2(1.0, 0.0) };
                Family::Bump { v: dir * m, t0 }
            }
            Family::Twist { theta, t0 } => Family::Twist {
                theta: if theta < 0.0 { -m } else { m },
                t0,
            },
        };
        Self { family, ..*self }
    }

    pub fn magnitude(&self) -> f64 {
        match self.family {
            Family::Identity => 0.0,
            Family::Bump { v, .. } => v.norm(),
            Family::Twist { theta, .. } => theta.abs(),
        }
    }
}

/// Certified constants of `F` that the stability bounds consume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Bounds both `Lip F` and `Lip F⁻¹`.
    pub l_f: f64,
    /// Bounds both `Lip DF` and `Lip DF⁻¹`.
    pub l_df: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub lip_dphi: f64,
    /// Analytic majorant of `Lip(Dφ̃)` where `Id + φ̃ = F⁻¹`.
    pub lip_dphi_tilde: f64,
    pub eps_banach: f64,
    /// Provenance of `lip_dphi_tilde`; always `"majorant"`.
    pub eps_banach_label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diffeomorphism {
    pub phi: DisplacementField,
    pub tau_inv: f64,
}

pub const MAX_INVERSE_STEPS: usize = 200;

impl Diffeomorphism {
    pub fn new(phi: DisplacementField) -> Self {
        Self {
            tau_inv: 1e-12 * phi.radius,
            phi,
        }
    }

    pub fn with_tau_inv(mut self, tau_inv: f64) -> Self {
        self.tau_inv = tau_inv;
        self
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.phi.family, Family::Identity)
    }

    pub fn forward(&self, x: Vec2) -> Vec2 {
        x + self.phi.evaluate(x)
    }

    pub fn jacobian(&self, x: Vec2) -> Mat2 {
        Mat2::identity() + self.phi.jacobian(x)
    }

    /// Fixed point of `x ↦ y − φ(x)`.
    pub fn inverse(&self, y: Vec2) -> Result<Vec2, DiffeoError> {
        let lip_phi = self.phi.constants().lip_phi;
        if lip_phi >= 1.0 {
            return Err(DiffeoError::NotContraction { lip_phi });
        }
        let mut x = y;
        let mut step = f64::INFINITY;
        for _ in 0..MAX_INVERSE_STEPS {
            let next = y - self.phi.evaluate(x);
            step = (next - x).norm();
            x = next;
            if step < self.tau_inv {
                return Ok(x);
            }
        }
        Err(DiffeoError::NoConvergence { step })
    }

    /// `D(F⁻¹)` at `y`.
    pub fn inverse_jacobian(&self, y: Vec2) -> Result<Mat2, DiffeoError> {
        let j = self.jacobian(self.inverse(y)?);
        j.try_inverse().ok_or(DiffeoError::SingularJacobian {
            det: j.determinant(),
        })
    }

    pub fn constants(&self) -> Result<Constants, DiffeoError> {
        let c = self.phi.constants();
        if c.sup_dphi >= 1.0 {
            return Err(DiffeoError::NotContraction { lip_phi: c.lip_phi });
        }
        let l_f = 1.0 / (1.0 - c.sup_dphi);
        let tilde = c.lip_dphi * l_f * l_f * l_f;
        Ok(Constants {
            l_f,
            l_df: tilde.max(c.lip_dphi),
            eps1: c.sup_phi,
            eps2: c.sup_dphi,
            lip_dphi: c.lip_dphi,
            lip_dphi_tilde: tilde,
            eps_banach: tilde.max(c.lip_dphi),
            eps_banach_label: "majorant".into(),
        })
    }

    /// The diffeomorphism `x ↦ λ·F(x/λ)`.
    pub fn conjugated(&self, lambda: f64) -> Self {
        Self {
            phi: self.phi.conjugated(lambda),
            tau_inv: self.tau_inv * lambda,
        }
    }
}

/// Sampled lower estimates of the certified quantities.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SampledConstants {
    pub lip_f: f64,
    pub lip_f_inv: f64,
    pub lip_phi: f64,
    pub lip_dphi: f64,
    pub lip_df_inv: f64,
    pub sup_phi: f64,
    pub sup_dphi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    pub n_probe: usize,
    pub seed: u64,
    pub relative_slack: f64,
    pub analytic: FieldConstants,
    pub sampled: SampledConstants,
    pub lip_dphi_tilde_label: String,
}

/// Relative slack for sampled-vs-analytic comparisons; covers the inverse
/// iteration residual divided by the shortest probe distance.
pub const AUDIT_SLACK: f64 = 1e-6;

/// Analytic constants plus a random-pair audit that they dominate sampled
/// difference quotients.
pub fn certify_constants(
    diffeo: &Diffeomorphism,
    n_probe: usize,
    seed: u64,
) -> Result<(Constants, Audit), DiffeoError> {
    let constants = diffeo.constants()?;
    let analytic = diffeo.phi.constants();
    let c0 = diffeo.phi.center;
    let r = diffeo.phi.radius;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let point = |rng: &mut ChaCha8Rng, reach: f64| {
        let rad = reach * r * rng.random::<f64>().sqrt();
        c0 + rotate(vec2(rad, 0.0), rng.random_range(0.0..std::f64::consts::TAU))
    };
    let mut sampled = SampledConstants::default();
    for k in 0..n_probe {
        let x = point(&mut rng, 1.1);
        // alternate far pairs with short pairs at random scales
        let y = if k % 2 == 0 {
            point(&mut rng, 1.1)
        } else {
            let len = r * 10f64.powf(rng.random_range(-3.0..-0.5));
            x + rotate(vec2(len, 0.0), rng.random_range(0.0..std::f64::consts::TAU))
        };
        let d = (x - y).norm();
        if d < 1e-3 * r {
            continue;
        }
        let phi = &diffeo.phi;
        sampled.sup_phi = sampled.sup_phi.max(phi.evaluate(x).norm());
        sampled.sup_dphi = sampled.sup_dphi.max(op_norm(&phi.jacobian(x)));
        sampled.lip_f = sampled
            .lip_f
            .max((diffeo.forward(x) - diffeo.forward(y)).norm() / d);
        sampled.lip_phi = sampled
            .lip_phi
            .max((phi.evaluate(x) - phi.evaluate(y)).norm() / d);
        sampled.lip_dphi = sampled
            .lip_dphi
            .max(op_norm(&(phi.jacobian(x) - phi.jacobian(y))) / d);
        let (xi, yi) = (diffeo.inverse(x)?, diffeo.inverse(y)?);
        sampled.lip_f_inv = sampled.lip_f_inv.max((xi - yi).norm() / d);
        let (jx, jy) = (diffeo.inverse_jacobian(x)?, diffeo.inverse_jacobian(y)?);
        sampled.lip_df_inv = sampled.lip_df_inv.max(op_norm(&(jx - jy)) / d);
    }
    let checks = [
        ("Lip F", sampled.lip_f, constants.l_f),
        ("Lip F^-1", sampled.lip_f_inv, constants.l_f),
        ("Lip phi", sampled.lip_phi, analytic.lip_phi),
        ("Lip Dphi", sampled.lip_dphi, analytic.lip_dphi),
        ("Lip DF^-1", sampled.lip_df_inv, constants.lip_dphi_tilde),
        ("sup |phi|", sampled.sup_phi, analytic.sup_phi),
        ("sup |Dphi|", sampled.sup_dphi, analytic.sup_dphi),
    ];
    for (name, s, a) in checks {
        if s > a * (1.0 + AUDIT_SLACK) + 1e-15 {
            return Err(DiffeoError::ConstantBreach {
                name,
                sampled: s,
                analytic: a,
            });
        }
    }
    Ok((
        constants,
        Audit {
            n_probe,
            seed,
            relative_slack: AUDIT_SLACK,
            analytic,
            sampled,
            lip_dphi_tilde_label: "majorant".into(),
        },
    ))
}

/// Normalized `(Jᵀ)⁻¹u`: the image of the normal `u` under `J`.
pub fn transport_normal(j: &Mat2, u: Vec2) -> Result<Vec2, DiffeoError> {
    let det = j.determinant();
    if det.abs() <= 1e-12 {
        return Err(DiffeoError::SingularJacobian { det });
    }
    let jt = j.transpose();
    let w = vec2(
        jt[(1, 1)] * u.x - jt[(0, 1)] * u.y,
        -jt[(1, 0)] * u.x + jt[(0, 0)] * u.y,
    ) / det;
    Ok(w / w.norm())
}

pub fn angle_cosine_floor(eps2: f64) -> Result<f64, DiffeoError> {
    if !(0.0..1.0).contains(&eps2) {
        return Err(DiffeoError::OutOfRegime { eps2 });
    }
    Ok((1.0 - eps2 * eps2).sqrt())
}
