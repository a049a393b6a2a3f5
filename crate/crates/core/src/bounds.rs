//! Closed-form stability bounds and their regime conditions.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeFlag {
    /// `eps2 < 1`.
    Eps2BelowOne,
    /// `r·L_DF·L_F² ≤ 1/2`.
    CurvatureBudget,
    /// `r·ε ≤ 1/4`.
    BanachSmall,
    /// `rho·L_DF·L_F² < 1`.
    RhoDenominator,
    /// Strictly positive reach and scale arguments.
    PositiveScale,
}

impl fmt::Display for RegimeFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RegimeFlag::Eps2BelowOne => "eps2 < 1",
            RegimeFlag::CurvatureBudget => "r*L_DF*L_F^2 <= 1/2",
            RegimeFlag::BanachSmall => "r*eps <= 1/4",
            RegimeFlag::RhoDenominator => "rho*L_DF*L_F^2 < 1",
            RegimeFlag::PositiveScale => "positive scale",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("out of regime: {0} violated")]
    OutOfRegime(RegimeFlag),
    #[error("radicand {0} is negative beyond rounding")]
    NegativeRadicand(f64),
}

/// Radicands in `[RADICAND_CLAMP, 0)` are rounding dust and clamp to 0.
pub const RADICAND_CLAMP: f64 = -1e-15;

/// Lower bound on the reach of `F(S)` given `rch(S) ≥ t` and `F` defined on
/// an `s`-neighbourhood.
pub fn federer_reach_bound(
    t: f64,
    s: f64,
    lip_f: f64,
    lip_f_inv: f64,
    lip_df: f64,
) -> Result<f64, BoundError> {
    if !(t > 0.0) || !(s > 0.0) {
        return Err(BoundError::OutOfRegime(RegimeFlag::PositiveScale));
    }
    let first = s / lip_f_inv;
    let second = 1.0 / ((lip_f / t + lip_df) * lip_f_inv * lip_f_inv);
    Ok(first.min(second))
}

/// Interval containing the radius of the image maximal ball.
pub fn rho_prime_interval(rho: f64, l_f: f64, l_df: f64) -> Result<(f64, f64), BoundError> {
    if !(rho > 0.0) {
        return Err(BoundError::OutOfRegime(RegimeFlag::PositiveScale));
    }
    let l2 = l_f * l_f;
    let l3 = l2 * l_f;
    let denom = 1.0 - rho * l_df * l2;
    if !(denom > 0.0) {
        return Err(BoundError::OutOfRegime(RegimeFlag::RhoDenominator));
    }
    Ok((rho / (l3 + rho * l_df * l2), l3 * rho / denom))
}

/// Hausdorff bound between the medial axes of `S` and `F(S)`.
pub fn hausdorff_bound_main(
    r: f64,
    l_f: f64,
    l_df: f64,
    eps1: f64,
    eps2: f64,
) -> Result<f64, BoundError> {
    if !(r > 0.0) {
        return Err(BoundError::OutOfRegime(RegimeFlag::PositiveScale));
    }
    if !(eps2 < 1.0) {
        return Err(BoundError::OutOfRegime(RegimeFlag::Eps2BelowOne));
    }
    let l2 = l_f * l_f;
    if !(r * l_df * l2 <= 0.5) {
        return Err(BoundError::OutOfRegime(RegimeFlag::CurvatureBudget));
    }
    let l3 = l2 * l_f;
    let k = 1.0 + 4.0 * r * l_df * l2;
    let radicand = 1.0 + l3 * l3 * k * k - 2.0 * l3 * k * (1.0 - eps2 * eps2).sqrt();
    let radicand = if radicand >= 0.0 {
        radicand
    } else if radicand >= RADICAND_CLAMP {
        0.0
    } else {
        return Err(BoundError::NegativeRadicand(radicand));
    };
    Ok(2.0 * r * radicand.sqrt() + eps1)
}

pub const BANACH_COEFFICIENT: f64 = 8.071_067_811_865_475;

/// Leading term `(1+√50)·r²·ε` and whether `r·ε ≤ 1/4`.
pub fn banach_bound(r: f64, eps_banach: f64) -> (f64, bool) {
    (
        (1.0 + 50f64.sqrt()) * r * r * eps_banach,
        r * eps_banach <= 0.25,
    )
}

/// Inputs of the stability bounds, in the units of the shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInput {
    pub r: f64,
    pub rho: f64,
    pub l_f: f64,
    pub l_df: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps_banach: f64,
}

/// Upper bounds on every constant from the single norm `ε`; `rho` is set to
/// its maximal value `r`.
pub fn constants_from_banach(r: f64, lip_dphi: f64, lip_dphi_tilde: f64) -> BoundInput {
    let eps = lip_dphi.max(lip_dphi_tilde);
    BoundInput {
        r,
        rho: r,
        l_f: 1.0 + r * eps,
        l_df: eps,
        eps1: r * r * eps,
        eps2: r * eps,
        eps_banach: eps,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeFlags {
    pub eps2_below_one: bool,
    pub curvature_budget: bool,
    pub banach_small: bool,
}

impl RegimeFlags {
    pub fn of(input: &BoundInput) -> Self {
        RegimeFlags {
            eps2_below_one: input.eps2 < 1.0,
            curvature_budget: input.r * input.l_df * input.l_f * input.l_f <= 0.5,
            banach_small: input.r * input.eps_banach <= 0.25,
        }
    }

    /// First violated hypothesis of the main bound.
    pub fn main_violation(&self) -> Option<RegimeFlag> {
        if !self.eps2_below_one {
            Some(RegimeFlag::Eps2BelowOne)
        } else if !self.curvature_budget {
            Some(RegimeFlag::CurvatureBudget)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub rho: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub hausdorff_bound: f64,
    pub banach_bound_leading: f64,
    pub regime_flags: RegimeFlags,
    pub measured_dh: Option<f64>,
    /// `hausdorff_bound − measured_dh`.
    pub margin: Option<f64>,
}

impl BoundReport {
    pub fn evaluate(input: &BoundInput) -> Result<Self, BoundError> {
        let flags = RegimeFlags::of(input);
        if let Some(flag) = flags.main_violation() {
            return Err(BoundError::OutOfRegime(flag));
        }
        let (rho1, rho2) = rho_prime_interval(input.rho, input.l_f, input.l_df)?;
        Ok(BoundReport {
            rho: input.rho,
            rho1,
            rho2,
            hausdorff_bound: hausdorff_bound_main(
                input.r, input.l_f, input.l_df, input.eps1, input.eps2,
            )?,
            banach_bound_leading: banach_bound(input.r, input.eps_banach).0,
            regime_flags: flags,
            measured_dh: None,
            margin: None,
        })
    }

    pub fn with_measurement(mut self, measured_dh: f64) -> Self {
        self.measured_dh = Some(measured_dh);
        self.margin = Some(self.hausdorff_bound - measured_dh);
        self
    }
}
