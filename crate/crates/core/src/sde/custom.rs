//! Models described by a JSON document of affine/polynomial coefficients.
//!
//! ```json
//! {
//!   "dim": 1, "noise_dim": 1, "jump_dim": 1,
//!   "horizon": 1.0, "x0": [1.0],
//!   "drift":     [{"linear": [0.05]}],
//!   "diffusion": [[{"linear": [0.2]}]],
//!   "jump":      [[{"linear": [-0.1]}]],
//!   "intensity": [2.0]
//! }
//! ```
//!
//! Each coefficient entry is a plain number or an object with optional
//! fields `constant`, `time`, `linear` (one weight per state component),
//! `poly` (coefficients of 1, x_v, x_v², …) and `var` (the index v, default 0).
//! Its value is constant + time·t + Σ linear_i·x_i + Σ_k poly_k·x_v^k.

use serde::{Deserialize, Serialize};

use super::{JumpDiffusionModel, JumpDriver};
use crate::error::{Error, Result};
use crate::rand::{Intensity, RandomStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Constant(f64),
    Expr(CoefficientExpr),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientExpr {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub time: f64,
    #[serde(default)]
    pub linear: Vec<f64>,
    #[serde(default)]
    pub poly: Vec<f64>,
    #[serde(default)]
    pub var: usize,
}

impl Coefficient {
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Expr(e) => {
                let lin: f64 = e.linear.iter().zip(x).map(|(a, b)| a * b).sum();
                let xv = x[e.var];
                let poly = e.poly.iter().rev().fold(0.0, |acc, c| acc * xv + c);
                e.constant + e.time * t + lin + poly
            }
        }
    }

    fn check(&self, d: usize, what: &str) -> Result<()> {
        if let Coefficient::Expr(e) = self {
            if e.linear.len() > d {
                return Err(Error::Model(format!("{what}: `linear` has {} weights for dimension {d}", e.linear.len())));
            }
            if e.var >= d {
                return Err(Error::Model(format!("{what}: `var` = {} out of range for dimension {d}", e.var)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModelSpec {
    pub dim: usize,
    #[serde(default = "one")]
    pub noise_dim: usize,
    #[serde(default)]
    pub jump_dim: usize,
    pub horizon: f64,
    pub x0: Vec<f64>,
    pub drift: Vec<Coefficient>,
    #[serde(default)]
    pub diffusion: Vec<Vec<Coefficient>>,
    #[serde(default)]
    pub jump: Vec<Vec<Coefficient>>,
    /// Constant intensity per jump component.
    #[serde(default)]
    pub intensity: Vec<f64>,
}

fn one() -> usize {
    1
}

/// A validated [`CustomModelSpec`].
#[derive(Debug, Clone)]
pub struct CustomModel {
    spec: CustomModelSpec,
    drivers: Vec<JumpDriver>,
}

impl CustomModel {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: CustomModelSpec = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        Self::new(spec)
    }

    pub fn new(spec: CustomModelSpec) -> Result<Self> {
        let d = spec.dim;
        let err = |m: String| Err(Error::Model(m));
        if d == 0 {
            return err("`dim` must be at least 1".into());
        }
        if !(spec.horizon > 0.0) {
            return err(format!("`horizon` must be positive, got {}", spec.horizon));
        }
        if spec.x0.len() != d {
            return err(format!("`x0` has {} entries, expected {d}", spec.x0.len()));
        }
        if spec.drift.len() != d {
            return err(format!("`drift` has {} entries, expected {d}", spec.drift.len()));
        }
        let shape_ok = |m: &Vec<Vec<Coefficient>>, cols: usize| m.len() == d && m.iter().all(|r| r.len() == cols);
        if spec.noise_dim > 0 && !shape_ok(&spec.diffusion, spec.noise_dim) {
            return err(format!("`diffusion` must be {d}×{}", spec.noise_dim));
        }
        if spec.jump_dim > 0 && !shape_ok(&spec.jump, spec.jump_dim) {
            return err(format!("`jump` must be {d}×{}", spec.jump_dim));
        }
        if spec.intensity.len() != spec.jump_dim {
            return err(format!("`intensity` needs {} entries", spec.jump_dim));
        }
        if let Some(l) = spec.intensity.iter().find(|&&l| !(l > 0.0) || !l.is_finite()) {
            return err(format!("intensity {l} must be positive and finite"));
        }
        for c in &spec.drift {
            c.check(d, "drift")?;
        }
        for c in spec.diffusion.iter().chain(&spec.jump).flatten() {
            c.check(d, "diffusion/jump")?;
        }
        let drivers = spec.intensity.iter().map(|&l| JumpDriver::Poisson(Intensity::Constant(l))).collect();
        Ok(Self { spec, drivers })
    }

    pub fn spec(&self) -> &CustomModelSpec {
        &self.spec
    }
}

fn fill(rows: &[Vec<Coefficient>], t: f64, x: &[f64], out: &mut [f64]) {
    for (o, c) in out.iter_mut().zip(rows.iter().flatten()) {
        *o = c.eval(t, x);
    }
}

impl JumpDiffusionModel for CustomModel {
    fn dim(&self) -> usize {
        self.spec.dim
    }
    fn noise_dim(&self) -> usize {
        self.spec.noise_dim
    }
    fn jump_dim(&self) -> usize {
        self.spec.jump_dim
    }
    fn horizon(&self) -> f64 {
        self.spec.horizon
    }
    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.spec.drift) {
            *o = c.eval(t, x);
        }
    }
    fn diffusion(&self, t: f64, x: &[f64], out: &mut [f64]) {
        fill(&self.spec.diffusion, t, x, out)
    }
    fn jump(&self, t: f64, x: &[f64], out: &mut [f64]) {
        fill(&self.spec.jump, t, x, out)
    }
    fn jump_driver(&self, j: usize) -> &JumpDriver {
        &self.drivers[j]
    }
    fn initial(&self, _stream: &mut RandomStream, out: &mut [f64]) {
        out.copy_from_slice(&self.spec.x0);
    }
}
