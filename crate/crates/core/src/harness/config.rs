//! Experiment configuration: a single JSON document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::diffeo::{Diffeomorphism, DisplacementField, Family};
use crate::geom::{vec2, Circle, Primitive, Shape, ShapeDoc};
use crate::projection::RangeParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Verify,
    Sweep,
    Scaling,
    OracleCompare,
    DemoUnbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    CircleOnly,
    CircleCenter,
    TwoPoints,
    SegmentCircle,
    /// An off-center circle and a point.
    CirclePoint,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::CircleOnly,
        Preset::CircleCenter,
        Preset::TwoPoints,
        Preset::SegmentCircle,
        Preset::CirclePoint,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::CircleOnly => "circle_only",
            Preset::CircleCenter => "circle_center",
            Preset::TwoPoints => "two_points",
            Preset::SegmentCircle => "segment_circle",
            Preset::CirclePoint => "circle_point",
        }
    }

    /// The preset inside a bounding circle of radius `r` at the origin;
    /// interior primitives are given for `r = 3` and scaled by `r/3`.
    pub fn build(&self, r: f64) -> Result<Shape, HarnessError> {
        let k = r / 3.0;
        let prims = match self {
            Preset::CircleOnly => vec![],
            Preset::CircleCenter => vec![Primitive::point(vec2(0.0, 0.0))],
            Preset::TwoPoints => vec![
                Primitive::point(vec2(-k, 0.0)),
                Primitive::point(vec2(k, 0.0)),
            ],
            Preset::SegmentCircle => vec![Primitive::segment(vec2(-k, 0.0), vec2(k, 0.0))],
            Preset::CirclePoint => vec![
                Primitive::circle(vec2(-0.8 * k, 0.0), 0.7 * k),
                Primitive::point(vec2(1.2 * k, 0.3 * k)),
            ],
        };
        Ok(Shape::new(Circle::new(vec2(0.0, 0.0), r), prims)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShapeSpec {
    Preset {
        preset: Preset,
        #[serde(default = "default_radius")]
        radius: f64,
    },
    Inline(ShapeDoc),
}

fn default_radius() -> f64 {
    3.0
}

impl ShapeSpec {
    pub fn build(&self) -> Result<Shape, HarnessError> {
        match self {
            ShapeSpec::Preset { preset, radius } => preset.build(*radius),
            ShapeSpec::Inline(doc) => Ok(Shape::try_from(doc.clone())?),
        }
    }
}

/// Sampling densities; absent values scale with the bounding radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Densities {
    pub h_b: Option<f64>,
    pub n_dir: Option<usize>,
    pub h_g: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Tolerances {
    pub tau: Option<f64>,
    pub delta: Option<f64>,
    pub tau_bis: Option<f64>,
    pub tau_inv: Option<f64>,
    pub tau_angle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Target values of the certified norm `ε`; 0 selects the identity.
    pub eps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub factors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSpec {
    /// Half-widths of the square scan windows.
    pub windows: Vec<f64>,
    pub pitch: f64,
    pub original: [[f64; 2]; 2],
    pub perturbed: [[f64; 2]; 2],
}

impl Default for DemoSpec {
    fn default() -> Self {
        DemoSpec {
            windows: vec![10.0, 20.0, 30.0, 40.0, 50.0],
            pitch: 0.1,
            original: [[-1.0, 0.0], [1.0, 0.0]],
            perturbed: [[-1.0, -0.05], [1.02, 0.1]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub mode: Mode,
    pub shape: ShapeSpec,
    #[serde(default = "identity_family")]
    pub diffeo: Family,
    #[serde(default)]
    pub densities: Densities,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Random pairs for the constant audit.
    #[serde(default = "default_probes")]
    pub n_probe: usize,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub scaling: Option<ScalingSpec>,
    #[serde(default)]
    pub demo: Option<DemoSpec>,
}

fn identity_family() -> Family {
    Family::Identity
}

fn default_probes() -> usize {
    2000
}

/// Every density and tolerance with defaults filled in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub r: f64,
    pub h_b: f64,
    pub n_dir: usize,
    pub h_g: f64,
    pub tau: f64,
    pub delta: f64,
    pub tau_bis: f64,
    pub tau_inv: f64,
    pub tau_angle: f64,
}

impl Resolved {
    /// Discretization allowance added to the analytic bound.
    pub fn sampling_slack(&self) -> f64 {
        2.0 * (self.h_b + self.h_g)
    }

    pub fn range_params(&self) -> RangeParams {
        RangeParams::for_radius(self.r).with_tau_bis(self.tau_bis)
    }

    /// Same experiment at scale `λ`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Resolved {
            r: self.r * lambda,
            h_b: self.h_b * lambda,
            n_dir: self.n_dir,
            h_g: self.h_g * lambda,
            tau: self.tau * lambda,
            delta: self.delta * lambda,
            tau_bis: self.tau_bis * lambda,
            tau_inv: self.tau_inv * lambda,
            tau_angle: self.tau_angle,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Input(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Input(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn preset(preset: Preset, diffeo: Family) -> Self {
        ExperimentConfig {
            mode: Mode::Verify,
            shape: ShapeSpec::Preset {
                preset,
                radius: 3.0,
            },
            diffeo,
            densities: Densities::default(),
            tolerances: Tolerances::default(),
            seed: 0,
            out: None,
            n_probe: default_probes(),
            sweep: None,
            scaling: None,
            demo: None,
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&canonical)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn build_shape(&self) -> Result<Shape, HarnessError> {
        self.shape.build()
    }

    pub fn resolve(&self, shape: &Shape) -> Result<Resolved, HarnessError> {
        let r = shape.radius();
        let d = &self.densities;
        let t = &self.tolerances;
        let res = Resolved {
            r,
            h_b: d.h_b.unwrap_or(r / 60.0),
            n_dir: d.n_dir.unwrap_or(256),
            h_g: d.h_g.unwrap_or(r / 60.0),
            tau: t.tau.unwrap_or(1e-9 * r),
            delta: t.delta.unwrap_or(1e-3 * r),
            tau_bis: t.tau_bis.unwrap_or(1e-8 * r),
            tau_inv: t.tau_inv.unwrap_or(1e-12 * r),
            tau_angle: t.tau_angle.unwrap_or(1e-9),
        };
        let positive = [
            ("h_b", res.h_b),
            ("h_g", res.h_g),
            ("tau", res.tau),
            ("delta", res.delta),
            ("tau_bis", res.tau_bis),
            ("tau_inv", res.tau_inv),
            ("tau_angle", res.tau_angle),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(HarnessError::Input(format!(
                    "{name} = {v} must be positive"
                )));
            }
        }
        if res.n_dir == 0 {
            return Err(HarnessError::Input("n_dir must be positive".into()));
        }
        if res.h_b >= r {
            return Err(HarnessError::Input(format!(
                "h_b = {} must be below r = {r}",
                res.h_b
            )));
        }
        if res.delta <= res.tau {
            return Err(HarnessError::Input("delta must exceed tau".into()));
        }
        Ok(res)
    }

    /// The diffeomorphism supported on the bounding ball.
    pub fn build_diffeo(
        &self,
        shape: &Shape,
        res: &Resolved,
    ) -> Result<Diffeomorphism, HarnessError> {
        let field = DisplacementField::from_family(self.diffeo, shape.center(), shape.radius())?;
        Ok(Diffeomorphism::new(field).with_tau_inv(res.tau_inv))
    }
}
