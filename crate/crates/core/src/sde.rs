//! Jump-diffusion models dX = a(t,X)dt + b(t,X)dW + c(t,X)dN, the classical
//! and randomized Euler–Maruyama schemes, their interpolants and closed-form
//! solutions for GBM, Merton and Ornstein–Uhlenbeck models.
//!
//! Schemes and exact solutions read the same [`NoiseTape`], so strong errors
//! are measured pathwise on identical increments.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::grid::TimeGrid;
use crate::rand::{Intensity, RandomStream};
use crate::rate::RateStudy;

pub mod custom;

/// States with norm above this abort the scheme.
pub const BLOW_UP: f64 = 1e12;

/// Label of the substream family that supplies the randomized-Euler times τ_k.
pub const TAU_FAMILY: u64 = 0x7A75;

/// Source of the jump increments ΔN for one jump component.
#[derive(Clone)]
pub enum JumpDriver {
    /// Poisson process with the given intensity.
    Poisson(Intensity),
    /// Compound Poisson process with constant intensity and i.i.d. marks.
    Compound { lambda: f64, marks: Arc<dyn Fn(&mut RandomStream) -> f64 + Send + Sync> },
}

impl fmt::Debug for JumpDriver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JumpDriver::Poisson(l) => write!(f, "Poisson({l:?})"),
            JumpDriver::Compound { lambda, .. } => write!(f, "Compound(λ = {lambda})"),
        }
    }
}

/// A jump-diffusion SDE on [0, T].
///
/// Matrices are row-major: `diffusion` writes d×m_W entries, `jump` d×m_N.
pub trait JumpDiffusionModel: Send + Sync {
    fn dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn jump_dim(&self) -> usize;
    fn horizon(&self) -> f64;
    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]);
    fn diffusion(&self, t: f64, x: &[f64], out: &mut [f64]);
    fn jump(&self, t: f64, x: &[f64], out: &mut [f64]);
    fn jump_driver(&self, j: usize) -> &JumpDriver;
    /// Draw the initial state ξ.
    fn initial(&self, stream: &mut RandomStream, out: &mut [f64]);

    /// One Euler step x + a(θ, x)Δt + b(t, x)ΔW + c(t, x)ΔN.
    ///
    /// Models with a factored closed form may override this to evaluate the
    /// same expression in a different order.
    #[allow(clippy::too_many_arguments)]
    fn euler_step(&self, theta: f64, t: f64, x: &[f64], dt: f64, dw: &[f64], dn: &[f64], out: &mut [f64]) {
        generic_euler_step(self, theta, t, x, dt, dw, dn, out)
    }

    /// Closed-form solution at the tape nodes, when one is known.
    fn exact(&self, _x0: &[f64], _tape: &NoiseTape) -> Option<Result<Vec<f64>>> {
        None
    }
}

/// The default Euler step, usable from overriding implementations.
#[allow(clippy::too_many_arguments)]
pub fn generic_euler_step<M: JumpDiffusionModel + ?Sized>(
    model: &M,
    theta: f64,
    t: f64,
    x: &[f64],
    dt: f64,
    dw: &[f64],
    dn: &[f64],
    out: &mut [f64],
) {
    let (d, mw, mn) = (model.dim(), model.noise_dim(), model.jump_dim());
    let mut a = vec![0.0; d];
    model.drift(theta, x, &mut a);
    for i in 0..d {
        out[i] = x[i] + a[i] * dt;
    }
    if mw > 0 {
        let mut b = vec![0.0; d * mw];
        model.diffusion(t, x, &mut b);
        for i in 0..d {
            out[i] += (0..mw).map(|j| b[i * mw + j] * dw[j]).sum::<f64>();
        }
    }
    if mn > 0 {
        let mut c = vec![0.0; d * mn];
        model.jump(t, x, &mut c);
        for i in 0..d {
            out[i] += (0..mn).map(|j| c[i * mn + j] * dn[j]).sum::<f64>();
        }
    }
}

/// Driving increments on a grid: ΔW (cells × m_W) and ΔN (cells × m_N).
///
/// For compound drivers ΔN holds the increments of J and `marks[j]` lists
/// the jump marks of component j in order; `counts[j]` the jump counts per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseTape {
    pub grid: TimeGrid,
    pub m_w: usize,
    pub m_n: usize,
    pub dw: Vec<f64>,
    pub dn: Vec<f64>,
    pub counts: Vec<Vec<u64>>,
    pub marks: Vec<Vec<f64>>,
}

impl NoiseTape {
    pub fn dw(&self, k: usize) -> &[f64] {
        &self.dw[k * self.m_w..(k + 1) * self.m_w]
    }

    pub fn dn(&self, k: usize) -> &[f64] {
        &self.dn[k * self.m_n..(k + 1) * self.m_n]
    }

    /// Cumulative W_j(t_k) for all nodes.
    pub fn wiener(&self, j: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.grid.cells() + 1);
        let mut w = 0.0;
        out.push(w);
        for k in 0..self.grid.cells() {
            w += self.dw[k * self.m_w + j];
            out.push(w);
        }
        out
    }

    /// Cumulative jump counts N_j(t_k) for all nodes.
    pub fn jump_counts(&self, j: usize) -> Vec<u64> {
        let mut out = vec![0u64];
        for k in 0..self.grid.cells() {
            out.push(out[k] + self.counts[j][k]);
        }
        out
    }

    /// Tape on a coarser grid that keeps every `factor`-th node; increments are summed.
    pub fn coarsen(&self, factor: usize) -> Result<NoiseTape> {
        let n = self.grid.cells();
        if factor == 0 || n % factor != 0 {
            return Err(invalid("factor", format!("{factor} does not divide {n} cells")));
        }
        let points: Vec<f64> = self.grid.points().iter().step_by(factor).copied().collect();
        let cells = n / factor;
        let sum_blocks = |src: &[f64], m: usize| {
            let mut out = vec![0.0; cells * m];
            for c in 0..cells {
                for k in c * factor..(c + 1) * factor {
                    for j in 0..m {
                        out[c * m + j] += src[k * m + j];
                    }
                }
            }
            out
        };
        let counts = self
            .counts
            .iter()
            .map(|cnt| (0..cells).map(|c| cnt[c * factor..(c + 1) * factor].iter().sum()).collect())
            .collect();
        Ok(NoiseTape {
            grid: TimeGrid::new(points)?,
            m_w: self.m_w,
            m_n: self.m_n,
            dw: sum_blocks(&self.dw, self.m_w),
            dn: sum_blocks(&self.dn, self.m_n),
            counts,
            marks: self.marks.clone(),
        })
    }
}

/// Draw the increments of every driver on `grid` from `stream`.
///
/// Per cell: m_W normals, then for each jump component its count and marks.
pub fn draw_noise<M: JumpDiffusionModel + ?Sized>(model: &M, grid: &TimeGrid, stream: &mut RandomStream) -> Result<NoiseTape> {
    let (mw, mn, n) = (model.noise_dim(), model.jump_dim(), grid.cells());
    let mut dw = Vec::with_capacity(n * mw);
    let mut dn = Vec::with_capacity(n * mn);
    let mut counts = vec![Vec::with_capacity(n); mn];
    let mut marks = vec![Vec::new(); mn];
    let pts = grid.points();
    for k in 0..n {
        let sq = grid.dt(k).sqrt();
        for _ in 0..mw {
            dw.push(sq * stream.std_normal());
        }
        for j in 0..mn {
            match model.jump_driver(j) {
                JumpDriver::Poisson(l) => {
                    let c = stream.poisson(l.integral(pts[k], pts[k + 1]))?;
                    counts[j].push(c);
                    dn.push(c as f64);
                }
                JumpDriver::Compound { lambda, marks: sampler } => {
                    let c = stream.poisson(lambda * grid.dt(k))?;
                    let mut jump = 0.0;
                    for _ in 0..c {
                        let xi = sampler(stream);
                        marks[j].push(xi);
                        jump += xi;
                    }
                    counts[j].push(c);
                    dn.push(jump);
                }
            }
        }
    }
    Ok(NoiseTape { grid: grid.clone(), m_w: mw, m_n: mn, dw, dn, counts, marks })
}

fn validate_model<M: JumpDiffusionModel + ?Sized>(model: &M, grid: &TimeGrid) -> Result<()> {
    for j in 0..model.jump_dim() {
        match model.jump_driver(j) {
            JumpDriver::Poisson(l) => l.validate_on(grid.points().iter().copied())?,
            JumpDriver::Compound { lambda, .. } => {
                if !(*lambda > 0.0) {
                    return Err(invalid("lambda", format!("intensity must be positive, got {lambda}")));
                }
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Euler,
    RandomizedEuler,
}

/// Node states of a scheme together with the increments that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeOutput {
    pub scheme: SchemeKind,
    pub dim: usize,
    /// States, node-major: `states[k * dim + i]`; `states[..dim]` is ξ.
    pub states: Vec<f64>,
    pub tape: NoiseTape,
    /// τ_k of the randomized scheme (empty for the classical one).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub taus: Vec<f64>,
}

impl SchemeOutput {
    pub fn grid(&self) -> &TimeGrid {
        &self.tape.grid
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.grid().cells())
    }

    /// Component i at every node.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.states.iter().skip(i).step_by(self.dim).copied().collect()
    }
}

/// Run the Euler recurrence on a tape from x0; drift times t_k + τ_k·h when `taus` is given.
pub fn euler_on_tape<M: JumpDiffusionModel + ?Sized>(
    model: &M,
    x0: &[f64],
    tape: &NoiseTape,
    taus: Option<&[f64]>,
) -> Result<SchemeOutput> {
    let d = model.dim();
    if x0.len() != d {
        return Err(invalid("x0", format!("expected dimension {d}, got {}", x0.len())));
    }
    let grid = &tape.grid;
    let n = grid.cells();
    let uniform_h = (grid.end() - grid.start()) / n as f64;
    let mut states = Vec::with_capacity((n + 1) * d);
    states.extend_from_slice(x0);
    let mut next = vec![0.0; d];
    for k in 0..n {
        let t = grid.points()[k];
        let (theta, dt) = match taus {
            Some(ts) => (t + uniform_h * ts[k], uniform_h),
            None => (t, grid.dt(k)),
        };
        model.euler_step(theta, t, &states[k * d..(k + 1) * d], dt, tape.dw(k), tape.dn(k), &mut next);
        let norm2: f64 = next.iter().map(|v| v * v).sum();
        if !norm2.is_finite() || norm2 > BLOW_UP * BLOW_UP {
            return Err(Error::BlowUp { step: k + 1 });
        }
        states.extend_from_slice(&next);
    }
    Ok(SchemeOutput {
        scheme: if taus.is_some() { SchemeKind::RandomizedEuler } else { SchemeKind::Euler },
        dim: d,
        states,
        tape: tape.clone(),
        taus: taus.map(<[f64]>::to_vec).unwrap_or_default(),
    })
}

/// Classical Euler–Maruyama on an arbitrary grid.
///
/// `stream` supplies ξ first and then the increments cell by cell.
pub fn euler_maruyama<M: JumpDiffusionModel + ?Sized>(model: &M, grid: &TimeGrid, stream: &mut RandomStream) -> Result<SchemeOutput> {
    validate_model(model, grid)?;
    let mut x0 = vec![0.0; model.dim()];
    model.initial(stream, &mut x0);
    let tape = draw_noise(model, grid, stream)?;
    euler_on_tape(model, &x0, &tape, None)
}

/// The randomized times τ_k ∈ [0, 1) used for `stream`.
pub fn randomized_taus(stream: &RandomStream, n: usize) -> Vec<f64> {
    let family = stream.fork(TAU_FAMILY);
    (0..n).map(|k| family.substream(k as u64).next_f64()).collect()
}

/// Randomized Euler–Maruyama on the uniform grid t_k = kT/n with drift at θ_k = t_k + τ_k·T/n.
///
/// ξ and the increments are drawn exactly as in [`euler_maruyama`]; τ_k come
/// from a separate substream family, so forcing τ ≡ 0 reproduces the
/// classical scheme bit for bit.
pub fn euler_maruyama_randomized<M: JumpDiffusionModel + ?Sized>(model: &M, n: usize, stream: &mut RandomStream) -> Result<SchemeOutput> {
    let taus = randomized_taus(stream, n);
    euler_maruyama_with_taus(model, n, stream, &taus)
}

/// Randomized scheme with caller-supplied τ_k.
pub fn euler_maruyama_with_taus<M: JumpDiffusionModel + ?Sized>(
    model: &M,
    n: usize,
    stream: &mut RandomStream,
    taus: &[f64],
) -> Result<SchemeOutput> {
    if taus.len() != n {
        return Err(invalid("taus", format!("need {n} values, got {}", taus.len())));
    }
    let grid = TimeGrid::uniform(0.0, model.horizon(), n)?;
    validate_model(model, &grid)?;
    let mut x0 = vec![0.0; model.dim()];
    model.initial(stream, &mut x0);
    let tape = draw_noise(model, &grid, stream)?;
    euler_on_tape(model, &x0, &tape, Some(taus))
}

/// Continuous-time interpolants of scheme output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterpolantKind {
    /// X̄: piecewise linear through the nodes.
    Linear,
    /// X̂: equal to the left node on [t_k, t_{k+1}), and to X(T) at T.
    Step,
}

#[derive(Debug, Clone)]
pub struct PathInterpolant<'a> {
    output: &'a SchemeOutput,
    kind: InterpolantKind,
}

impl PathInterpolant<'_> {
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let g = self.output.grid();
        let k = g.cell_of(t);
        let d = self.output.dim;
        if t >= g.end() {
            return self.output.terminal().to_vec();
        }
        let x0 = self.output.state(k);
        match self.kind {
            InterpolantKind::Step => x0.to_vec(),
            InterpolantKind::Linear => {
                let x1 = self.output.state(k + 1);
                let (t0, t1) = (g.points()[k], g.points()[k + 1]);
                let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
                (0..d).map(|i| x0[i] + w * (x1[i] - x0[i])).collect()
            }
        }
    }
}

pub fn interpolate_linear(output: &SchemeOutput) -> PathInterpolant<'_> {
    PathInterpolant { output, kind: InterpolantKind::Linear }
}

pub fn interpolate_step(output: &SchemeOutput) -> PathInterpolant<'_> {
    PathInterpolant { output, kind: InterpolantKind::Step }
}

// ---------------------------------------------------------------------------
// Closed-form solutions

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(invalid("sigma", format!("must be non-negative, got {sigma}")))
    }
}

/// x0·exp((μ − σ²/2)t + σW(t)) at the given nodes.
pub fn exact_gbm(x0: f64, mu: f64, sigma: f64, times: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    check_sigma(sigma)?;
    Ok(times.iter().zip(w).map(|(&t, &w)| x0 * ((mu - 0.5 * sigma * sigma) * t + sigma * w).exp()).collect())
}

/// Merton jump model x0·exp((μ − σ²/2)t + σW(t))·(1 + c)^{N(t)}.
pub fn exact_merton(x0: f64, mu: f64, sigma: f64, c: f64, times: &[f64], w: &[f64], n: &[u64]) -> Result<Vec<f64>> {
    if !(c > -1.0) {
        return Err(invalid("c", format!("jump factor must exceed −1, got {c}")));
    }
    let base = exact_gbm(x0, mu, sigma, times, w)?;
    Ok(base.iter().zip(n).map(|(b, &k)| b * (1.0 + c).powi(k as i32)).collect())
}

/// Merton model driven by a compound Poisson process: x0·exp(…)·Π_{k ≤ N(t)}(1 + ξ_k).
pub fn exact_merton_compound(x0: f64, mu: f64, sigma: f64, times: &[f64], w: &[f64], n: &[u64], marks: &[f64]) -> Result<Vec<f64>> {
    if let Some(m) = marks.iter().find(|&&m| !(m > -1.0)) {
        return Err(invalid("marks", format!("jump mark {m} must exceed −1")));
    }
    let base = exact_gbm(x0, mu, sigma, times, w)?;
    let mut prod = 1.0;
    let mut used = 0usize;
    Ok(base
        .iter()
        .zip(n)
        .map(|(b, &k)| {
            while used < k as usize {
                prod *= 1.0 + marks[used];
                used += 1;
            }
            b * prod
        })
        .collect())
}

/// OU transition X(t+h) = e^{−κh}X(t) + μ(1 − e^{−κh}) + σ√((1 − e^{−2κh})/(2κ))·Z,
/// with Z_k = ΔW_k/√Δt_k taken from the Wiener increments.
pub fn exact_ou(x0: f64, kappa: f64, mu: f64, sigma: f64, grid: &TimeGrid, dw: &[f64]) -> Result<Vec<f64>> {
    if !(kappa > 0.0) {
        return Err(invalid("kappa", format!("must be positive, got {kappa}")));
    }
    check_sigma(sigma)?;
    let mut out = Vec::with_capacity(grid.cells() + 1);
    let mut x = x0;
    out.push(x);
    for (k, dw) in dw.iter().enumerate().take(grid.cells()) {
        let h = grid.dt(k);
        let e = (-kappa * h).exp();
        let sd = sigma * (-(-2.0 * kappa * h).exp_m1() / (2.0 * kappa)).sqrt();
        x = e * x + mu * (1.0 - e) + sd * dw / h.sqrt();
        out.push(x);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Built-in models

/// Geometric Brownian motion dX = μX dt + σX dW.
#[derive(Debug, Clone)]
pub struct Gbm {
    pub mu: f64,
    pub sigma: f64,
    pub x0: f64,
    pub horizon: f64,
}

/// Merton model dX = μX dt + σX dW + cX dN with a Poisson process of intensity λ.
#[derive(Debug, Clone)]
pub struct Merton {
    pub mu: f64,
    pub sigma: f64,
    pub c: f64,
    pub x0: f64,
    pub horizon: f64,
    driver: JumpDriver,
}

impl Merton {
    pub fn new(mu: f64, sigma: f64, c: f64, lambda: f64, x0: f64, horizon: f64) -> Result<Self> {
        if !(c > -1.0) {
            return Err(invalid("c", format!("jump factor must exceed −1, got {c}")));
        }
        if !(lambda > 0.0) {
            return Err(invalid("lambda", format!("intensity must be positive, got {lambda}")));
        }
        Ok(Self { mu, sigma, c, x0, horizon, driver: JumpDriver::Poisson(Intensity::Constant(lambda)) })
    }

    pub fn lambda(&self) -> f64 {
        match &self.driver {
            JumpDriver::Poisson(Intensity::Constant(l)) => *l,
            _ => unreachable!("Merton uses a constant-intensity Poisson driver"),
        }
    }
}

/// Merton model driven by compound Poisson jumps: dX = μX dt + σX dW + X dJ.
#[derive(Debug, Clone)]
pub struct MertonCompound {
    pub mu: f64,
    pub sigma: f64,
    pub x0: f64,
    pub horizon: f64,
    driver: JumpDriver,
}

impl MertonCompound {
    /// Jump marks are uniform on `[mark_lo, mark_hi)` with `mark_lo > −1`.
    pub fn uniform_marks(mu: f64, sigma: f64, lambda: f64, mark_lo: f64, mark_hi: f64, x0: f64, horizon: f64) -> Result<Self> {
        if !(mark_lo > -1.0 && mark_lo < mark_hi) {
            return Err(invalid("marks", format!("need −1 < lo < hi, got [{mark_lo}, {mark_hi})")));
        }
        if !(lambda > 0.0) {
            return Err(invalid("lambda", format!("intensity must be positive, got {lambda}")));
        }
        let marks = Arc::new(move |s: &mut RandomStream| mark_lo + (mark_hi - mark_lo) * s.next_f64());
        Ok(Self { mu, sigma, x0, horizon, driver: JumpDriver::Compound { lambda, marks } })
    }
}

/// Ornstein–Uhlenbeck / Vasicek dX = κ(μ − X)dt + σ dW.
#[derive(Debug, Clone)]
pub struct OrnsteinUhlenbeck {
    pub kappa: f64,
    pub mu: f64,
    pub sigma: f64,
    pub x0: f64,
    pub horizon: f64,
}

const NO_JUMPS: &str = "model has no jump components";

impl JumpDiffusionModel for Gbm {
    fn dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn jump_dim(&self) -> usize {
        0
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.mu * x[0];
    }
    fn diffusion(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma * x[0];
    }
    fn jump(&self, _t: f64, _x: &[f64], _out: &mut [f64]) {}
    fn jump_driver(&self, _j: usize) -> &JumpDriver {
        panic!("{NO_JUMPS}")
    }
    fn initial(&self, _stream: &mut RandomStream, out: &mut [f64]) {
        out[0] = self.x0;
    }
    fn euler_step(&self, _theta: f64, _t: f64, x: &[f64], dt: f64, dw: &[f64], _dn: &[f64], out: &mut [f64]) {
        out[0] = x[0] * (1.0 + self.mu * dt + self.sigma * dw[0]);
    }
    fn exact(&self, x0: &[f64], tape: &NoiseTape) -> Option<Result<Vec<f64>>> {
        Some(exact_gbm(x0[0], self.mu, self.sigma, tape.grid.points(), &tape.wiener(0)))
    }
}

impl JumpDiffusionModel for Merton {
    fn dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn jump_dim(&self) -> usize {
        1
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.mu * x[0];
    }
    fn diffusion(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma * x[0];
    }
    fn jump(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.c * x[0];
    }
    fn jump_driver(&self, _j: usize) -> &JumpDriver {
        &self.driver
    }
    fn initial(&self, _stream: &mut RandomStream, out: &mut [f64]) {
        out[0] = self.x0;
    }
    fn euler_step(&self, _theta: f64, _t: f64, x: &[f64], dt: f64, dw: &[f64], dn: &[f64], out: &mut [f64]) {
        out[0] = x[0] * (1.0 + self.mu * dt + self.sigma * dw[0] + self.c * dn[0]);
    }
    fn exact(&self, x0: &[f64], tape: &NoiseTape) -> Option<Result<Vec<f64>>> {
        Some(exact_merton(x0[0], self.mu, self.sigma, self.c, tape.grid.points(), &tape.wiener(0), &tape.jump_counts(0)))
    }
}

impl JumpDiffusionModel for MertonCompound {
    fn dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn jump_dim(&self) -> usize {
        1
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.mu * x[0];
    }
    fn diffusion(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma * x[0];
    }
    fn jump(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = x[0];
    }
    fn jump_driver(&self, _j: usize) -> &JumpDriver {
        &self.driver
    }
    fn initial(&self, _stream: &mut RandomStream, out: &mut [f64]) {
        out[0] = self.x0;
    }
    fn euler_step(&self, _theta: f64, _t: f64, x: &[f64], dt: f64, dw: &[f64], dn: &[f64], out: &mut [f64]) {
        out[0] = x[0] * (1.0 + self.mu * dt + self.sigma * dw[0] + dn[0]);
    }
    fn exact(&self, x0: &[f64], tape: &NoiseTape) -> Option<Result<Vec<f64>>> {
        Some(exact_merton_compound(
            x0[0],
            self.mu,
            self.sigma,
            tape.grid.points(),
            &tape.wiener(0),
            &tape.jump_counts(0),
            &tape.marks[0],
        ))
    }
}

impl JumpDiffusionModel for OrnsteinUhlenbeck {
    fn dim(&self) -> usize {
        1
    }
    fn noise_dim(&self) -> usize {
        1
    }
    fn jump_dim(&self) -> usize {
        0
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.kappa * (self.mu - x[0]);
    }
    fn diffusion(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out[0] = self.sigma;
    }
    fn jump(&self, _t: f64, _x: &[f64], _out: &mut [f64]) {}
    fn jump_driver(&self, _j: usize) -> &JumpDriver {
        panic!("{NO_JUMPS}")
    }
    fn initial(&self, _stream: &mut RandomStream, out: &mut [f64]) {
        out[0] = self.x0;
    }
    fn exact(&self, x0: &[f64], tape: &NoiseTape) -> Option<Result<Vec<f64>>> {
        Some(exact_ou(x0[0], self.kappa, self.mu, self.sigma, &tape.grid, &tape.dw))
    }
}

/// Model given by closures, for tests and ad-hoc experiments.
pub struct FnModel {
    pub d: usize,
    pub m_w: usize,
    pub horizon: f64,
    pub x0: Vec<f64>,
    #[allow(clippy::type_complexity)]
    pub drift: Box<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>,
    #[allow(clippy::type_complexity)]
    pub diffusion: Box<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>,
}

impl JumpDiffusionModel for FnModel {
    fn dim(&self) -> usize {
        self.d
    }
    fn noise_dim(&self) -> usize {
        self.m_w
    }
    fn jump_dim(&self) -> usize {
        0
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.drift)(t, x, out)
    }
    fn diffusion(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(t, x, out)
    }
    fn jump(&self, _t: f64, _x: &[f64], _out: &mut [f64]) {}
    fn jump_driver(&self, _j: usize) -> &JumpDriver {
        panic!("{NO_JUMPS}")
    }
    fn initial(&self, _stream: &mut RandomStream, out: &mut [f64]) {
        out.copy_from_slice(&self.x0);
    }
}

// ---------------------------------------------------------------------------
// Strong-error studies

/// Coupled strong-error study on nested uniform grids.
///
/// Each path draws one tape at the finest level `levels.last()` from
/// `stream.substream(p)`; coarser levels sum its increments. The error at a
/// level is the maximum over its nodes of the RMS over paths of
/// ‖X_n(t_k) − X(t_k)‖, where X is the closed-form solution when the model
/// has one and the finest-level scheme otherwise. `skip` coarsest levels
/// are left out of the rate fit.
pub fn strong_rate_study<M: JumpDiffusionModel + ?Sized>(
    model: &M,
    scheme: SchemeKind,
    levels: &[usize],
    paths: usize,
    skip: usize,
    stream: &RandomStream,
) -> Result<RateStudy> {
    let finest = *levels.iter().max().ok_or_else(|| invalid("levels", "need at least one level"))?;
    for &n in levels {
        if n == 0 || finest % n != 0 {
            return Err(invalid("levels", format!("level {n} does not divide {finest}")));
        }
    }
    let grid = TimeGrid::uniform(0.0, model.horizon(), finest)?;
    validate_model(model, &grid)?;
    let d = model.dim();
    let per_path = exec::try_map_indexed(paths, |p| {
        let mut s = stream.substream(p as u64);
        let mut x0 = vec![0.0; d];
        model.initial(&mut s, &mut x0);
        let tape = draw_noise(model, &grid, &mut s)?;
        let taus_for = |n: usize| (scheme == SchemeKind::RandomizedEuler).then(|| randomized_taus(&s.fork(n as u64), n));
        let reference = match model.exact(&x0, &tape) {
            Some(r) => r?,
            None => euler_on_tape(model, &x0, &tape, taus_for(finest).as_deref())?.states,
        };
        levels
            .iter()
            .map(|&n| {
                let factor = finest / n;
                let coarse = tape.coarsen(factor)?;
                let out = euler_on_tape(model, &x0, &coarse, taus_for(n).as_deref())?;
                Ok((0..=n)
                    .map(|k| (0..d).map(|i| (out.states[k * d + i] - reference[k * factor * d + i]).powi(2)).sum::<f64>())
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coefficients_keep_the_initial_state() {
        let m = FnModel {
            d: 2,
            m_w: 1,
            horizon: 1.0,
            x0: vec![1.5, -2.0],
            drift: Box::new(|_, _, o| o.fill(0.0)),
            diffusion: Box::new(|_, _, o| o.fill(0.0)),
        };
        let g = TimeGrid::uniform(0.0, 1.0, 10).unwrap();
        let out = euler_maruyama(&m, &g, &mut RandomStream::new(0, 0)).unwrap();
        for k in 0..=10 {
            assert_eq!(out.state(k), &[1.5, -2.0]);
        }
    }

    #[test]
    fn interpolants_on_two_nodes() {
        let m = Gbm { mu: 0.0, sigma: 0.0, x0: 0.0, horizon: 1.0 };
        let g = TimeGrid::uniform(0.0, 1.0, 1).unwrap();
        let tape = draw_noise(&m, &g, &mut RandomStream::new(0, 0)).unwrap();
        let mut out = euler_on_tape(&m, &[0.0], &tape, None).unwrap();
        out.states = vec![0.0, 1.0];
        assert_eq!(interpolate_linear(&out).eval(0.5), vec![0.5]);
        assert_eq!(interpolate_step(&out).eval(0.5), vec![0.0]);
        assert_eq!(interpolate_step(&out).eval(1.0), vec![1.0]);
    }

    #[test]
    fn exact_forms() {
        let t = [0.0, 0.5, 1.0];
        let v = exact_gbm(2.0, 0.3, 0.0, &t, &[0.0, 0.7, -0.1]).unwrap();
        for (x, &s) in v.iter().zip(&t) {
            assert!((x - 2.0 * (0.3 * s).exp()).abs() < 1e-15);
        }
        let v = exact_merton(1.0, 0.0, 0.0, 1.0, &t, &[0.0; 3], &[0, 1, 1]).unwrap();
        assert_eq!(v, vec![1.0, 2.0, 2.0]);
        assert!(exact_merton(1.0, 0.0, 0.0, -1.0, &t, &[0.0; 3], &[0, 0, 0]).is_err());
        assert!(Merton::new(0.0, 0.1, -1.5, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn coarsening_sums_increments() {
        let m = Merton::new(0.0, 1.0, 0.1, 3.0, 1.0, 1.0).unwrap();
        let g = TimeGrid::uniform(0.0, 1.0, 8).unwrap();
        let tape = draw_noise(&m, &g, &mut RandomStream::new(2, 0)).unwrap();
        let c = tape.coarsen(4).unwrap();
        assert_eq!(c.grid.cells(), 2);
        assert!((c.wiener(0)[2] - tape.wiener(0)[8]).abs() < 1e-14);
        assert_eq!(c.jump_counts(0)[2], tape.jump_counts(0)[8]);
        assert!(tape.coarsen(3).is_err());
    }
}
