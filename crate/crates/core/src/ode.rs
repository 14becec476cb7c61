//! One-step ODE solvers with deterministic and randomized time nodes, and
//! the gradient-descent family built from the same recurrences.
//!
//! Every scheme here has the form y_{k+1} = y_k + h·s_k with a frozen slope
//! s_k per cell, and [`SolutionPath`] keeps those slopes so the continuous
//! interpolant l_n(t) = y_k + (t − t_k)·s_k is exact at the nodes.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::grid::TimeGrid;
use crate::rand::RandomStream;
use crate::rate::RateStudy;

/// States with norm above this abort the integration.
pub const BLOW_UP: f64 = 1e12;

type Rhs = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

/// Initial-value problem z' = f(t, z) on [a, b], z(a) = ξ.
#[derive(Clone)]
pub struct OdeProblem {
    rhs: Rhs,
    pub a: f64,
    pub b: f64,
    pub xi: Vec<f64>,
}

impl fmt::Debug for OdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OdeProblem").field("a", &self.a).field("b", &self.b).field("xi", &self.xi).finish()
    }
}

impl OdeProblem {
    /// `rhs(t, x, out)` writes f(t, x) into `out`.
    pub fn new(rhs: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static, a: f64, b: f64, xi: Vec<f64>) -> Result<Self> {
        if !(a < b) {
            return Err(Error::InvalidRange { lo: a, hi: b });
        }
        if xi.is_empty() {
            return Err(invalid("xi", "initial value must have dimension ≥ 1"));
        }
        Ok(Self { rhs: Arc::new(rhs), a, b, xi })
    }

    pub fn scalar(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static, a: f64, b: f64, xi: f64) -> Result<Self> {
        Self::new(move |t, x, out| out[0] = f(t, x[0]), a, b, vec![xi])
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    pub fn eval(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.rhs)(t, x, out)
    }
}

/// f(t, x) = x·sin(x²|t|^ρ) on [−1, 1] with ξ = 1: Hölder-ρ in t, smooth in x.
pub fn holder_test_problem(rho: f64) -> OdeProblem {
    OdeProblem::scalar(move |t, x| x * (x * x * t.abs().powf(rho)).sin(), -1.0, 1.0, 1.0).expect("valid interval")
}

/// Space-free f(t) = |t|^ρ on [−1, 1] with ξ = 0.
pub fn holder_quadrature_problem(rho: f64) -> OdeProblem {
    OdeProblem::scalar(move |t, _| t.abs().powf(rho), -1.0, 1.0, 0.0).expect("valid interval")
}

/// Exact solution of [`holder_quadrature_problem`]: ∫_{−1}^t |s|^ρ ds.
pub fn holder_quadrature_solution(rho: f64, t: f64) -> f64 {
    let p = rho + 1.0;
    (1.0 + t.signum() * t.abs().powf(p)) / p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OdeScheme {
    Euler,
    RandomizedEuler,
    Rk2,
    RandomizedRk2,
}

impl OdeScheme {
    pub fn is_randomized(self) -> bool {
        matches!(self, OdeScheme::RandomizedEuler | OdeScheme::RandomizedRk2)
    }
}

/// Nodes y_k with frozen per-cell slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionPath {
    pub grid: TimeGrid,
    pub dim: usize,
    /// Node values, node-major: `values[k * dim + i]`.
    pub values: Vec<f64>,
    /// Slopes s_k, cell-major.
    pub slopes: Vec<f64>,
}

impl SolutionPath {
    pub fn node(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.node(self.grid.cells())
    }

    /// Continuous interpolant l_n(t).
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let k = self.grid.cell_of(t);
        let dt = t - self.grid.points()[k];
        let y = self.node(k);
        let s = &self.slopes[k * self.dim..(k + 1) * self.dim];
        y.iter().zip(s).map(|(y, s)| y + dt * s).collect()
    }
}

fn guard(step: usize, y: &[f64]) -> Result<()> {
    let norm2: f64 = y.iter().map(|v| v * v).sum();
    if !norm2.is_finite() || norm2 > BLOW_UP * BLOW_UP {
        Err(Error::BlowUp { step })
    } else {
        Ok(())
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(invalid("n", "need at least one step"))
    } else {
        Ok(())
    }
}

/// Euler with slope f(t_k + h·τ_k, y_k).
fn euler_with(problem: &OdeProblem, n: usize, tau: impl Fn(usize) -> f64) -> Result<SolutionPath> {
    check_n(n)?;
    let grid = TimeGrid::uniform(problem.a, problem.b, n)?;
    let d = problem.dim();
    let h = (problem.b - problem.a) / n as f64;
    let mut values = Vec::with_capacity((n + 1) * d);
    let mut slopes = vec![0.0; n * d];
    values.extend_from_slice(&problem.xi);
    for k in 0..n {
        let t = grid.points()[k] + h * tau(k);
        let (y, s) = (&values[k * d..(k + 1) * d], &mut slopes[k * d..(k + 1) * d]);
        problem.eval(t, y, s);
        for i in 0..d {
            let next = values[k * d + i] + h * slopes[k * d + i];
            values.push(next);
        }
        guard(k + 1, &values[(k + 1) * d..])?;
    }
    Ok(SolutionPath { grid, dim: d, values, slopes })
}

/// Two-stage scheme: y_τ = y + hτ f(t, y), y_next = y + h f(t + hτ, y_τ).
fn rk2_with(problem: &OdeProblem, n: usize, tau: impl Fn(usize) -> f64) -> Result<SolutionPath> {
    check_n(n)?;
    let grid = TimeGrid::uniform(problem.a, problem.b, n)?;
    let d = problem.dim();
    let h = (problem.b - problem.a) / n as f64;
    let mut values = Vec::with_capacity((n + 1) * d);
    let mut slopes = vec![0.0; n * d];
    let mut k1 = vec![0.0; d];
    let mut stage = vec![0.0; d];
    values.extend_from_slice(&problem.xi);
    for k in 0..n {
        let t = grid.points()[k];
        let tk = tau(k);
        let y = &values[k * d..(k + 1) * d];
        problem.eval(t, y, &mut k1);
        for i in 0..d {
            stage[i] = y[i] + h * tk * k1[i];
        }
        problem.eval(t + h * tk, &stage, &mut slopes[k * d..(k + 1) * d]);
        for i in 0..d {
            let next = values[k * d + i] + h * slopes[k * d + i];
            values.push(next);
        }
        guard(k + 1, &values[(k + 1) * d..])?;
    }
    Ok(SolutionPath { grid, dim: d, values, slopes })
}

/// Explicit Euler: y_{k+1} = y_k + h f(t_k, y_k).
pub fn euler_det(problem: &OdeProblem, n: usize) -> Result<SolutionPath> {
    euler_with(problem, n, |_| 0.0)
}

/// Randomized Euler: drift evaluated at θ_k = t_k + hτ_k, τ_k from `stream.substream(k)`.
pub fn euler_rand(problem: &OdeProblem, n: usize, stream: &RandomStream) -> Result<SolutionPath> {
    euler_with(problem, n, |k| stream.substream(k as u64).next_f64())
}

/// Explicit midpoint method.
pub fn rk2_det(problem: &OdeProblem, n: usize) -> Result<SolutionPath> {
    rk2_with(problem, n, |_| 0.5)
}

/// Randomized two-stage Runge–Kutta with τ_k from `stream.substream(k)`.
pub fn rk2_rand(problem: &OdeProblem, n: usize, stream: &RandomStream) -> Result<SolutionPath> {
    rk2_with(problem, n, |k| stream.substream(k as u64).next_f64())
}

/// Two-stage scheme with caller-supplied τ_k; τ ≡ ½ is the midpoint method.
pub fn rk2_with_taus(problem: &OdeProblem, n: usize, taus: &[f64]) -> Result<SolutionPath> {
    if taus.len() != n {
        return Err(invalid("taus", format!("need {n} values, got {}", taus.len())));
    }
    rk2_with(problem, n, |k| taus[k])
}

/// Run any scheme; `stream` is ignored by the deterministic ones.
pub fn solve(problem: &OdeProblem, scheme: OdeScheme, n: usize, stream: &RandomStream) -> Result<SolutionPath> {
    match scheme {
        OdeScheme::Euler => euler_det(problem, n),
        OdeScheme::RandomizedEuler => euler_rand(problem, n, stream),
        OdeScheme::Rk2 => rk2_det(problem, n),
        OdeScheme::RandomizedRk2 => rk2_rand(problem, n, stream),
    }
}

/// Self-convergence study against the same scheme at `n_ref` steps.
///
/// The error at level n is the maximum over the coarse nodes of the RMS
/// over `paths` independent runs of ‖y_n(t_k) − y_ref(t_k)‖. Deterministic
/// schemes use a single run. `skip` coarsest levels are left out of the fit.
pub fn rate_study(
    problem: &OdeProblem,
    scheme: OdeScheme,
    levels: &[usize],
    n_ref: usize,
    paths: usize,
    skip: usize,
    stream: &RandomStream,
) -> Result<RateStudy> {
    for &n in levels {
        if n == 0 || n_ref % n != 0 {
            return Err(invalid("levels", format!("level {n} does not divide n_ref = {n_ref}")));
        }
    }
    let paths = if scheme.is_randomized() { paths.max(1) } else { 1 };
    let d = problem.dim();
    // per path: squared error at each coarse node, per level
    let per_path = exec::try_map_indexed(paths, |p| {
        let reference = solve(problem, scheme, n_ref, &stream.fork(n_ref as u64).fork(p as u64))?;
        levels
            .iter()
            .map(|&n| {
                let coarse = solve(problem, scheme, n, &stream.fork(n as u64).fork(p as u64))?;
                let stride = n_ref / n;
                Ok((0..=n)
                    .map(|k| {
                        let (c, r) = (coarse.node(k), reference.node(k * stride));
                        (0..d).map(|i| (c[i] - r[i]).powi(2)).sum::<f64>()
                    })
                    .collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let errors = levels
        .iter()
        .enumerate()
        .map(|(li, &n)| {
            (0..=n)
                .map(|k| (per_path.iter().map(|p| p[li][k]).sum::<f64>() / paths as f64).sqrt())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(RateStudy::fit(levels.to_vec(), errors, skip))
}

// ---------------------------------------------------------------------------
// Gradient descent family

/// Gradient callable: `grad(x, out)` writes ∇f(x).
pub trait Gradient: Fn(&[f64], &mut [f64]) + Sync + Send {}
impl<T: Fn(&[f64], &mut [f64]) + Sync + Send> Gradient for T {}

fn check_step(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(invalid("h", format!("step size must be positive, got {h}")))
    }
}

/// Gradient descent y_{k+1} = y_k − h∇f(y_k); returns y_0, …, y_steps.
pub fn gd(grad: impl Gradient, x0: &[f64], h: f64, steps: usize) -> Result<Vec<Vec<f64>>> {
    check_step(h)?;
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = x0.to_vec();
    let mut g = vec![0.0; y.len()];
    out.push(y.clone());
    for k in 0..steps {
        grad(&y, &mut g);
        for (yi, gi) in y.iter_mut().zip(&g) {
            *yi -= h * gi;
        }
        guard(k + 1, &y)?;
        out.push(y.clone());
    }
    Ok(out)
}

/// Randomized two-stage gradient descent: y_τ = y − hτ∇f(y), y_next = y − h∇f(y_τ).
pub fn gd_rk2(grad: impl Gradient, x0: &[f64], h: f64, steps: usize, stream: &RandomStream) -> Result<Vec<Vec<f64>>> {
    check_step(h)?;
    let d = x0.len();
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = x0.to_vec();
    let (mut g, mut stage) = (vec![0.0; d], vec![0.0; d]);
    out.push(y.clone());
    for k in 0..steps {
        let tau = stream.substream(k as u64).next_f64();
        grad(&y, &mut g);
        for i in 0..d {
            stage[i] = y[i] - h * tau * g[i];
        }
        grad(&stage, &mut g);
        for (yi, gi) in y.iter_mut().zip(&g) {
            *yi -= h * gi;
        }
        guard(k + 1, &y)?;
        out.push(y.clone());
    }
    Ok(out)
}

/// Mini-batch SGD for f = (1/n)Σ f_j: each step averages M gradients with
/// indices drawn uniformly with replacement. M = 1 is plain SGD.
pub fn sgd<G: Gradient>(grads: &[G], x0: &[f64], h: f64, steps: usize, batch: usize, stream: &RandomStream) -> Result<Vec<Vec<f64>>> {
    check_step(h)?;
    if grads.is_empty() {
        return Err(invalid("grads", "need at least one component gradient"));
    }
    if batch == 0 || batch > grads.len() {
        return Err(invalid("batch", format!("must lie in 1..={}, got {batch}", grads.len())));
    }
    let d = x0.len();
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = x0.to_vec();
    let (mut g, mut sum) = (vec![0.0; d], vec![0.0; d]);
    out.push(y.clone());
    for k in 0..steps {
        let mut s = stream.substream(k as u64);
        sum.iter_mut().for_each(|v| *v = 0.0);
        for _ in 0..batch {
            grads[s.next_index(grads.len())](&y, &mut g);
            for (a, b) in sum.iter_mut().zip(&g) {
                *a += b;
            }
        }
        for (yi, si) in y.iter_mut().zip(&sum) {
            *yi -= h * si / batch as f64;
        }
        guard(k + 1, &y)?;
        out.push(y.clone());
    }
    Ok(out)
}

/// Randomized two-stage SGD with independent indices ξ_k, ζ_k and τ_k ~ U(0,1):
/// y_τ = y − hτ∇f_ξ(y), y_next = y − h∇f_ζ(y_τ).
pub fn sgd_rk2<G: Gradient>(grads: &[G], x0: &[f64], h: f64, steps: usize, stream: &RandomStream) -> Result<Vec<Vec<f64>>> {
    check_step(h)?;
    if grads.is_empty() {
        return Err(invalid("grads", "need at least one component gradient"));
    }
    let d = x0.len();
    let mut out = Vec::with_capacity(steps + 1);
    let mut y = x0.to_vec();
    let (mut g, mut stage) = (vec![0.0; d], vec![0.0; d]);
    out.push(y.clone());
    for k in 0..steps {
        let mut s = stream.substream(k as u64);
        let xi = s.next_index(grads.len());
        let zeta = s.next_index(grads.len());
        let tau = s.next_f64();
        grads[xi](&y, &mut g);
        for i in 0..d {
            stage[i] = y[i] - h * tau * g[i];
        }
        grads[zeta](&stage, &mut g);
        for (yi, gi) in y.iter_mut().zip(&g) {
            *yi -= h * gi;
        }
        guard(k + 1, &y)?;
        out.push(y.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euler_examples() {
        let p = OdeProblem::scalar(|_, _| 1.0, 0.0, 1.0, 0.0).unwrap();
        let s = euler_det(&p, 8).unwrap();
        for k in 0..=8 {
            assert!((s.node(k)[0] - s.grid.points()[k]).abs() < 1e-15);
        }
        let p = OdeProblem::scalar(|_, x| x, 0.0, 1.0, 1.0).unwrap();
        let s = euler_det(&p, 10).unwrap();
        for k in 0..=10 {
            assert!((s.node(k)[0] - 1.1f64.powi(k as i32)).abs() < 1e-14);
        }
    }

    #[test]
    fn interpolant_hits_nodes_and_is_continuous() {
        let p = holder_test_problem(0.5);
        let s = euler_rand(&p, 16, &RandomStream::new(3, 0)).unwrap();
        for k in 0..=16 {
            let t = s.grid.points()[k];
            assert!((s.interpolate(t)[0] - s.node(k)[0]).abs() < 1e-14);
            if k > 0 {
                let left = t - 1e-12;
                assert!((s.interpolate(left)[0] - s.node(k)[0]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let p = OdeProblem::scalar(|_, x| x * x, 0.0, 10.0, 1.0).unwrap();
        assert!(matches!(euler_det(&p, 100), Err(Error::BlowUp { .. })));
    }

    #[test]
    fn gd_linear_recurrence() {
        let it = gd(|x: &[f64], g: &mut [f64]| g[0] = x[0], &[1.0], 0.1, 20).unwrap();
        for (k, y) in it.iter().enumerate() {
            assert!((y[0] - 0.9f64.powi(k as i32)).abs() < 1e-15);
        }
        assert!(gd(|_: &[f64], _: &mut [f64]| {}, &[1.0], 0.0, 3).is_err());
    }

    #[test]
    fn sgd_batch_validation() {
        let grads = [|x: &[f64], g: &mut [f64]| g[0] = x[0]];
        let s = RandomStream::new(0, 0);
        assert!(sgd(&grads, &[1.0], 0.1, 3, 2, &s).is_err());
        assert!(sgd(&grads, &[1.0], 0.1, 3, 0, &s).is_err());
    }
}
