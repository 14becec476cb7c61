//! Grid simulation of Wiener, Poisson and compound Poisson processes,
//! bridge refinement, optimal reconstruction and integration of W, and the
//! Ornstein–Uhlenbeck conditional-mean approximation on optimal grids.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::TimeGrid;
use crate::numerics::{adaptive_simpson, bisect_increasing};
use crate::rand::{Intensity, RandomStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessKind {
    Wiener,
    Poisson,
    Compound,
}

/// Values of a simulated process at the nodes of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub kind: ProcessKind,
    /// Jump counts N(t_i) for compound paths.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub counts: Vec<u64>,
    /// Jump marks ξ_1, ξ_2, … in order of occurrence for compound paths.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub marks: Vec<f64>,
}

impl ProcessPath {
    fn new(grid: TimeGrid, values: Vec<f64>, kind: ProcessKind) -> Self {
        Self { grid, values, kind, counts: Vec::new(), marks: Vec::new() }
    }

    pub fn terminal(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Increments X(t_{k+1}) − X(t_k).
    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// W on the grid: W(t_0) = 0 and independent N(0, Δt) increments.
pub fn simulate_wiener(grid: &TimeGrid, stream: &mut RandomStream) -> ProcessPath {
    let mut values = Vec::with_capacity(grid.cells() + 1);
    let mut w = 0.0;
    values.push(w);
    for k in 0..grid.cells() {
        w += grid.dt(k).sqrt() * stream.std_normal();
        values.push(w);
    }
    ProcessPath::new(grid.clone(), values, ProcessKind::Wiener)
}

fn validate_intensity(grid: &TimeGrid, lambda: &Intensity) -> Result<()> {
    lambda.validate_on(grid.points().iter().copied())
}

/// Non-homogeneous Poisson process with increments Poisson(∫ λ) per cell.
pub fn simulate_poisson(grid: &TimeGrid, lambda: &Intensity, stream: &mut RandomStream) -> Result<ProcessPath> {
    validate_intensity(grid, lambda)?;
    let pts = grid.points();
    let mut values = Vec::with_capacity(pts.len());
    let mut n = 0u64;
    values.push(0.0);
    for k in 0..grid.cells() {
        n += stream.poisson(lambda.integral(pts[k], pts[k + 1]))?;
        values.push(n as f64);
    }
    Ok(ProcessPath::new(grid.clone(), values, ProcessKind::Poisson))
}

/// Compound Poisson J(t) = Σ_{k ≤ N(t)} ξ_k with constant intensity.
///
/// Each cell draws its jump count and then one mark per jump.
pub fn simulate_compound(
    grid: &TimeGrid,
    lambda: f64,
    jump_sampler: &dyn Fn(&mut RandomStream) -> f64,
    stream: &mut RandomStream,
) -> Result<ProcessPath> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda", format!("intensity must be positive, got {lambda}")));
    }
    let mut values = vec![0.0];
    let mut counts = vec![0u64];
    let mut marks = Vec::new();
    let mut j = 0.0;
    for k in 0..grid.cells() {
        let jumps = stream.poisson(lambda * grid.dt(k))?;
        for _ in 0..jumps {
            let xi = jump_sampler(stream);
            marks.push(xi);
            j += xi;
        }
        counts.push(counts[k] + jumps);
        values.push(j);
    }
    let mut path = ProcessPath::new(grid.clone(), values, ProcessKind::Compound);
    path.counts = counts;
    path.marks = marks;
    Ok(path)
}

fn check_cell(t: f64, ti: f64, ti1: f64) -> Result<()> {
    if !(ti < ti1) || !(ti..=ti1).contains(&t) {
        return Err(invalid("t", format!("{t} is outside the cell [{ti}, {ti1}]")));
    }
    Ok(())
}

/// Draw W(t) given W(t_i) = w_i and W(t_{i+1}) = w_{i+1} (Brownian bridge).
///
/// Always consumes one normal variate; the endpoints are returned exactly.
pub fn bridge_refine_wiener(t: f64, left: (f64, f64), right: (f64, f64), stream: &mut RandomStream) -> Result<f64> {
    let ((ti, wi), (ti1, wi1)) = (left, right);
    check_cell(t, ti, ti1)?;
    let z = stream.std_normal();
    if t == ti {
        return Ok(wi);
    }
    if t == ti1 {
        return Ok(wi1);
    }
    let delta = ti1 - ti;
    let mean = ((t - ti) * wi1 + (ti1 - t) * wi) / delta;
    let var = (ti1 - t) * (t - ti) / delta;
    Ok(mean + var.sqrt() * z)
}

/// Draw N(t) given N(t_i) = n_i and N(t_{i+1}) = n_{i+1}:
/// n_i + Binomial(n_{i+1} − n_i, Λ(t_i, t)/Λ(t_i, t_{i+1})).
pub fn bridge_refine_poisson(
    t: f64,
    left: (f64, u64),
    right: (f64, u64),
    lambda: &Intensity,
    stream: &mut RandomStream,
) -> Result<u64> {
    let ((ti, ni), (ti1, ni1)) = (left, right);
    check_cell(t, ti, ti1)?;
    if ni1 < ni {
        return Err(Error::InvalidPath(format!("counts decrease from {ni} to {ni1}")));
    }
    let p = if t == ti1 { 1.0 } else { (lambda.integral(ti, t) / lambda.integral(ti, ti1)).clamp(0.0, 1.0) };
    Ok(ni + stream.binomial(ni1 - ni, p)?)
}

/// Refine by `levels` rounds of midpoint bisection (factor 2^levels).
///
/// The midpoint of cell c at depth ℓ is drawn from
/// `stream.fork(ℓ).substream(c)`, so a refined path is a pure function of
/// the coarse path, the seed, the cell index and the depth.
pub fn refine_wiener(path: &ProcessPath, levels: u32, stream: &RandomStream) -> Result<ProcessPath> {
    if path.kind != ProcessKind::Wiener {
        return Err(invalid("path", "expected a Wiener path"));
    }
    let mut t = path.grid.points().to_vec();
    let mut w = path.values.clone();
    for depth in 0..levels {
        let family = stream.fork(u64::from(depth));
        let mut nt = Vec::with_capacity(2 * t.len() - 1);
        let mut nw = Vec::with_capacity(2 * t.len() - 1);
        for c in 0..t.len() - 1 {
            let mid = 0.5 * (t[c] + t[c + 1]);
            let mut s = family.substream(c as u64);
            nt.push(t[c]);
            nw.push(w[c]);
            nt.push(mid);
            nw.push(bridge_refine_wiener(mid, (t[c], w[c]), (t[c + 1], w[c + 1]), &mut s)?);
        }
        nt.push(*t.last().unwrap());
        nw.push(*w.last().unwrap());
        t = nt;
        w = nw;
    }
    Ok(ProcessPath::new(TimeGrid::new(t)?, w, ProcessKind::Wiener))
}

/// Poisson analogue of [`refine_wiener`] using binomial bridges.
pub fn refine_poisson(path: &ProcessPath, lambda: &Intensity, levels: u32, stream: &RandomStream) -> Result<ProcessPath> {
    if path.kind != ProcessKind::Poisson {
        return Err(invalid("path", "expected a Poisson path"));
    }
    let mut t = path.grid.points().to_vec();
    let mut n: Vec<u64> = path.values.iter().map(|&v| v as u64).collect();
    for depth in 0..levels {
        let family = stream.fork(u64::from(depth));
        let mut nt = Vec::with_capacity(2 * t.len() - 1);
        let mut nn = Vec::with_capacity(2 * t.len() - 1);
        for c in 0..t.len() - 1 {
            let mid = 0.5 * (t[c] + t[c + 1]);
            let mut s = family.substream(c as u64);
            nt.push(t[c]);
            nn.push(n[c]);
            nt.push(mid);
            nn.push(bridge_refine_poisson(mid, (t[c], n[c]), (t[c + 1], n[c + 1]), lambda, &mut s)?);
        }
        nt.push(*t.last().unwrap());
        nn.push(*n.last().unwrap());
        t = nt;
        n = nn;
    }
    let values = n.into_iter().map(|v| v as f64).collect();
    Ok(ProcessPath::new(TimeGrid::new(t)?, values, ProcessKind::Poisson))
}

/// Piecewise-linear interpolant through the nodes of a path.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearInterpolant {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl LinearInterpolant {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.points().len() {
            return Err(invalid("values", "one value per grid point required"));
        }
        Ok(Self { grid, values })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = self.grid.cell_of(t);
        let (t0, t1) = (self.grid.points()[k], self.grid.points()[k + 1]);
        let (v0, v1) = (self.values[k], self.values[k + 1]);
        if t <= t0 {
            return v0;
        }
        if t >= t1 {
            return v1;
        }
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }
}

/// Optimal reconstruction of W from its grid values: linear interpolation.
pub fn reconstruct_linear(path: &ProcessPath) -> Result<LinearInterpolant> {
    LinearInterpolant::new(path.grid.clone(), path.values.clone())
}

/// Predicted L²(Ω × [0, T]) error T/√6·n^{−1/2} of linear reconstruction on a uniform grid.
pub fn l2_reconstruction_error(n: usize, horizon: f64) -> f64 {
    horizon / (6.0 * n as f64).sqrt()
}

/// Squared L²([0, T]) distance between a fine path and the linear interpolant
/// of a coarse one, by the trapezoid rule on the fine grid.
pub fn squared_path_distance(fine: &ProcessPath, coarse: &LinearInterpolant) -> f64 {
    let t = fine.grid.points();
    let diff: Vec<f64> = t.iter().zip(&fine.values).map(|(&s, &w)| (w - coarse.eval(s)).powi(2)).collect();
    (0..t.len() - 1).map(|k| 0.5 * (t[k + 1] - t[k]) * (diff[k] + diff[k + 1])).sum()
}

/// Trapezoid approximation of ∫_0^T W(t) dt from grid values.
pub fn trapezoid_integral_w(path: &ProcessPath) -> f64 {
    let t = path.grid.points();
    let w = &path.values;
    (0..t.len() - 1).map(|k| 0.5 * (t[k + 1] - t[k]) * (w[k] + w[k + 1])).sum()
}

/// Predicted L²(Ω) error T^{3/2}/√12·n^{−1} of the trapezoid rule for ∫W.
pub fn predicted_trapezoid_error(n: usize, horizon: f64) -> f64 {
    horizon.powf(1.5) / 12f64.sqrt() / n as f64
}

/// Density h on [0, T] with ∫h = T that generates a grid by ∫_0^{t_i} h = iT/n.
#[derive(Clone)]
pub struct SamplingDensity {
    h: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub horizon: f64,
}

impl fmt::Debug for SamplingDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SamplingDensity").field("horizon", &self.horizon).finish()
    }
}

impl SamplingDensity {
    pub fn new(h: impl Fn(f64) -> f64 + Send + Sync + 'static, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidDensity(format!("horizon must be positive, got {horizon}")));
        }
        for k in 0..=64 {
            let t = horizon * k as f64 / 64.0;
            let v = h(t);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidDensity(format!("h({t}) = {v} is not positive")));
            }
        }
        let total = adaptive_simpson(&h, 0.0, horizon, 1e-12);
        if (total - horizon).abs() > 1e-8 {
            return Err(Error::InvalidDensity(format!("∫h = {total}, expected {horizon}")));
        }
        Ok(Self { h: Arc::new(h), horizon })
    }

    pub fn uniform(horizon: f64) -> Result<Self> {
        Self::new(|_| 1.0, horizon)
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.h)(t)
    }

    /// H(t) = ∫_0^t h.
    pub fn cumulative(&self, t: f64) -> f64 {
        adaptive_simpson(&*self.h, 0.0, t, 1e-13)
    }
}

/// Grid with ∫_0^{t_i} h = iT/n, found by bisection to 1e-10.
pub fn density_grid(density: &SamplingDensity, n: usize) -> Result<TimeGrid> {
    if n == 0 {
        return Err(Error::InvalidGrid("need at least one cell".into()));
    }
    let t_end = density.horizon;
    let mut points = Vec::with_capacity(n + 1);
    points.push(0.0);
    for i in 1..n {
        let target = i as f64 * t_end / n as f64;
        let lo = points[i - 1];
        // integrate from the previous point to keep each solve cheap
        let base = target - (i - 1) as f64 * t_end / n as f64;
        let t = bisect_increasing(|t| adaptive_simpson(&*density.h, lo, t, 1e-13) - base, lo, t_end, 1e-10);
        points.push(t);
    }
    points.push(t_end);
    TimeGrid::new(points).map_err(|e| Error::InvalidDensity(format!("generated grid is degenerate: {e}")))
}

/// Asymptotically optimal OU sampling points t_j = (3/(2κ))·ln(1 + (j/n)(e^{2κT/3} − 1)).
pub fn ou_optimal_grid(kappa: f64, horizon: f64, n: usize) -> Result<TimeGrid> {
    if !(kappa > 0.0) {
        return Err(invalid("kappa", format!("must be positive, got {kappa}")));
    }
    if n == 0 || !(horizon > 0.0) {
        return Err(Error::InvalidGrid("need n ≥ 1 and T > 0".into()));
    }
    let c = (2.0 * kappa * horizon / 3.0).exp_m1();
    let mut points: Vec<f64> = (0..n).map(|j| 1.5 / kappa * (j as f64 / n as f64 * c).ln_1p()).collect();
    points.push(horizon);
    TimeGrid::new(points)
}

/// Density whose generated grid is [`ou_optimal_grid`].
pub fn ou_optimal_density(kappa: f64, horizon: f64) -> Result<SamplingDensity> {
    if !(kappa > 0.0) {
        return Err(invalid("kappa", format!("must be positive, got {kappa}")));
    }
    let rate = 2.0 * kappa / 3.0;
    let scale = horizon * rate / (rate * horizon).exp_m1();
    SamplingDensity::new(move |t| scale * (rate * t).exp(), horizon)
}

/// e^{−κ(T − t_j)}·(I_{1,j}, I_{2,j}) where
/// I_1 = ∫ e^{κs}(s − t_j) ds and I_2 = ∫ e^{κs}(t_{j+1} − s) ds over the cell.
fn scaled_cell_weights(kappa: f64, decay: f64, dt: f64) -> (f64, f64) {
    let x = kappa * dt;
    let (a, b) = if x < 1e-4 {
        (dt * dt * (0.5 + x / 3.0 + x * x / 8.0), dt * dt * (0.5 + x / 6.0 + x * x / 24.0))
    } else {
        let em1 = x.exp_m1();
        ((x * (em1 + 1.0) - em1) / (kappa * kappa), (em1 - x) / (kappa * kappa))
    };
    (decay * a, decay * b)
}

/// E[X(T) | W(t_0), …, W(t_n)] for dX = κ(μ − X)dt + σ dW, X(0) = x0.
pub fn ou_conditional_terminal(kappa: f64, mu: f64, sigma: f64, x0: f64, grid: &TimeGrid, w: &[f64]) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(invalid("kappa", format!("must be positive, got {kappa}")));
    }
    if !(sigma >= 0.0) {
        return Err(invalid("sigma", format!("must be non-negative, got {sigma}")));
    }
    if w.len() != grid.points().len() {
        return Err(invalid("w", "one Wiener value per grid point required"));
    }
    let t_end = grid.end();
    let e = (-kappa * t_end).exp();
    let deterministic = e * x0 + mu * (-(-kappa * t_end).exp_m1());
    if sigma == 0.0 {
        return Ok(deterministic);
    }
    let t = grid.points();
    let mut sum = 0.0;
    for j in 0..grid.cells() {
        let dt = t[j + 1] - t[j];
        let decay = (-kappa * (t_end - t[j])).exp();
        let (i1, i2) = scaled_cell_weights(kappa, decay, dt);
        sum += (w[j + 1] * i1 + w[j] * i2) / dt;
    }
    Ok(deterministic + sigma * w[w.len() - 1] - kappa * sigma * sum)
}

/// Sandwich [e^{−κT}, 1]·κσT^{3/2}/√12·n^{−1} for the conditional-mean RMSE.
pub fn ou_error_band(kappa: f64, sigma: f64, horizon: f64, n: usize) -> (f64, f64) {
    let upper = kappa * sigma * horizon.powf(1.5) / 12f64.sqrt() / n as f64;
    ((-kappa * horizon).exp() * upper, upper)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bridge_endpoints_are_exact() {
        let mut s = RandomStream::new(0, 0);
        assert_eq!(bridge_refine_wiener(0.3, (0.3, 1.7), (1.0, -2.0), &mut s).unwrap(), 1.7);
        assert_eq!(bridge_refine_wiener(1.0, (0.3, 1.7), (1.0, -2.0), &mut s).unwrap(), -2.0);
        assert!(bridge_refine_wiener(1.5, (0.3, 1.7), (1.0, -2.0), &mut s).is_err());
        let l = Intensity::Constant(1.0);
        assert_eq!(bridge_refine_poisson(0.5, (0.0, 4), (1.0, 4), &l, &mut s).unwrap(), 4);
        assert_eq!(bridge_refine_poisson(1.0, (0.0, 4), (1.0, 9), &l, &mut s).unwrap(), 9);
        assert!(matches!(bridge_refine_poisson(0.5, (0.0, 4), (1.0, 3), &l, &mut s), Err(Error::InvalidPath(_))));
    }

    #[test]
    fn trapezoid_examples() {
        let g = TimeGrid::uniform(0.0, 1.0, 1).unwrap();
        let p = ProcessPath::new(g, vec![0.0, 0.8], ProcessKind::Wiener);
        assert_eq!(trapezoid_integral_w(&p), 0.4);
        assert_eq!(l2_reconstruction_error(6, 1.0), 1.0 / 6.0);
        assert!((l2_reconstruction_error(4, 1.0) / l2_reconstruction_error(16, 1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn ou_grid_examples() {
        let g = ou_optimal_grid(1.0, 1.0, 2).unwrap();
        let expect = 1.5 * (0.5 * ((2.0f64 / 3.0).exp() - 1.0) + 1.0).ln();
        assert!((g.points()[1] - expect).abs() < 1e-15);
        let g = ou_optimal_grid(1e-6, 2.0, 10).unwrap();
        let u = TimeGrid::uniform(0.0, 2.0, 10).unwrap();
        let dev = g.points().iter().zip(u.points()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-4 * 2.0);
    }

    #[test]
    fn density_grid_uniform_and_ou() {
        let g = density_grid(&SamplingDensity::uniform(2.0).unwrap(), 8).unwrap();
        let u = TimeGrid::uniform(0.0, 2.0, 8).unwrap();
        for (a, b) in g.points().iter().zip(u.points()) {
            assert!((a - b).abs() < 1e-9);
        }
        let g = density_grid(&ou_optimal_density(1.5, 1.0).unwrap(), 6).unwrap();
        let o = ou_optimal_grid(1.5, 1.0, 6).unwrap();
        for (a, b) in g.points().iter().zip(o.points()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(SamplingDensity::new(|t| 2.0 * t, 1.0).is_err());
        assert!(matches!(SamplingDensity::new(|_| 2.0, 1.0), Err(Error::InvalidDensity(_))));
    }

    #[test]
    fn ou_conditional_deterministic_cases() {
        let g = TimeGrid::uniform(0.0, 1.5, 8).unwrap();
        let expect = (-2.0f64 * 1.5).exp() * 0.7 + 0.3 * (1.0 - (-2.0f64 * 1.5).exp());
        let w: Vec<f64> = (0..9).map(|k| (k as f64).sin()).collect();
        assert!((ou_conditional_terminal(2.0, 0.3, 0.0, 0.7, &g, &w).unwrap() - expect).abs() < 1e-15);
        assert!((ou_conditional_terminal(2.0, 0.3, 0.4, 0.7, &g, &[0.0; 9]).unwrap() - expect).abs() < 1e-15);
        assert!(ou_conditional_terminal(0.0, 0.3, 0.4, 0.7, &g, &[0.0; 9]).is_err());
    }

    #[test]
    fn series_and_closed_form_weights_agree() {
        // at the switch point both forms must agree closely
        for &x in &[1e-4, 2e-4, 1e-3] {
            let kappa = 2.0;
            let dt = x / kappa;
            let x2 = x;
            let series = (dt * dt * (0.5 + x2 / 3.0 + x2 * x2 / 8.0), dt * dt * (0.5 + x2 / 6.0 + x2 * x2 / 24.0));
            let exact = scaled_cell_weights(kappa, 1.0, dt);
            assert!((series.0 - exact.0).abs() < 1e-9 * series.0);
            assert!((series.1 - exact.1).abs() < 1e-9 * series.1);
        }
    }
}
