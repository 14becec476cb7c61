//! Deterministic quadratures, randomized Riemann sums and variance reduction
//! by control variates and stratification on the unit cube.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec;
use crate::mc::{asymptotic_interval, ConfidenceInterval, McAccumulator, McEstimate, DEFAULT_LEVEL};
use crate::rand::RandomStream;

pub mod corpus;

/// Constants of a Hölder class: |f(x) − f(y)| ≤ L‖x − y‖^ρ, with the
/// r-th derivative Hölder with constant H.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderClassParams {
    pub l: f64,
    pub rho: f64,
    pub r: usize,
    pub h: f64,
}

impl HolderClassParams {
    pub fn new(l: f64, rho: f64, r: usize, h: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(invalid("rho", format!("must lie in (0, 1], got {rho}")));
        }
        if !(l > 0.0) || !(h > 0.0) {
            return Err(invalid("L/H", "Hölder constants must be positive"));
        }
        Ok(Self { l, rho, r, h })
    }
}

fn grid_size(d: usize, n: usize) -> Result<usize> {
    if n == 0 {
        return Err(invalid("n", "need at least one cell per axis"));
    }
    if d == 0 {
        return Err(invalid("d", "dimension must be at least 1"));
    }
    n.checked_pow(d as u32)
        .filter(|&c| c <= 1 << 34)
        .ok_or_else(|| invalid("n", format!("n^d = {n}^{d} cells is too many")))
}

/// Sum of f over the n^d cell points `(i + offset)·h`, times h^d.
fn product_rule(f: &impl Fn(&[f64]) -> f64, d: usize, n: usize, offset: f64) -> Result<f64> {
    let cells = grid_size(d, n)?;
    let h = 1.0 / n as f64;
    let mut x = vec![0.0; d];
    let mut idx = vec![0usize; d];
    let mut sum = 0.0;
    for _ in 0..cells {
        for (xi, &k) in x.iter_mut().zip(&idx) {
            *xi = (k as f64 + offset) * h;
        }
        sum += f(&x);
        for k in idx.iter_mut() {
            *k += 1;
            if *k < n {
                break;
            }
            *k = 0;
        }
    }
    Ok(sum / cells as f64)
}

/// Rectangle rule on [0,1]^d: h^d Σ f(lower-left corners), h = 1/n.
pub fn rect_rule(f: impl Fn(&[f64]) -> f64, d: usize, n: usize) -> Result<f64> {
    product_rule(&f, d, n, 0.0)
}

/// Midpoint rule on [0,1]^d: h^d Σ f(cell centers).
pub fn midpoint_rule(f: impl Fn(&[f64]) -> f64, d: usize, n: usize) -> Result<f64> {
    product_rule(&f, d, n, 0.5)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Composite Taylor quadrature from the derivatives f, f', …, f^(r−1).
///
/// T_n = Σ_i Σ_{j<r} f^(j)(t_i)/(j+1)!·h^{j+1}. The corrected rule adds
/// h^r/(r+1)!·(f^(r−1)(b) − f^(r−1)(a)).
pub fn taylor_quadrature(derivs: &[&dyn Fn(f64) -> f64], a: f64, b: f64, n: usize, corrected: bool) -> Result<f64> {
    let r = derivs.len();
    if r == 0 {
        return Err(invalid("derivs", "at least f itself must be supplied"));
    }
    if n == 0 {
        return Err(invalid("n", "need at least one cell"));
    }
    if !(a < b) {
        return Err(Error::InvalidRange { lo: a, hi: b });
    }
    let h = (b - a) / n as f64;
    let coef: Vec<f64> = (0..r).map(|j| h.powi(j as i32 + 1) / factorial(j + 1)).collect();
    let mut sum = 0.0;
    for i in 0..n {
        let t = a + i as f64 * h;
        for (d, c) in derivs.iter().zip(&coef) {
            sum += c * d(t);
        }
    }
    if corrected {
        let last = derivs[r - 1];
        sum += h.powi(r as i32) / factorial(r + 1) * (last(b) - last(a));
    }
    Ok(sum)
}

/// Limit of n^r·(I − T_n): (b−a)^r/(r+1)!·(f^(r−1)(b) − f^(r−1)(a)).
pub fn taylor_asymptotic_constant(last_deriv_a: f64, last_deriv_b: f64, a: f64, b: f64, r: usize) -> f64 {
    (b - a).powi(r as i32) / factorial(r + 1) * (last_deriv_b - last_deriv_a)
}

/// Randomized Riemann sum h Σ f(θ_k), θ_k ~ U[t_k, t_{k+1}].
///
/// Cell k draws its node from `stream.substream(k)`.
pub fn randomized_riemann(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize, stream: &RandomStream) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n", "need at least one cell"));
    }
    if !(a < b) {
        return Err(Error::InvalidRange { lo: a, hi: b });
    }
    let h = (b - a) / n as f64;
    let mut sum = 0.0;
    for k in 0..n {
        let theta = a + h * (k as f64 + stream.substream(k as u64).next_f64());
        let v = f(theta);
        if !v.is_finite() {
            return Err(Error::Evaluation { index: k, value: v });
        }
        sum += v;
    }
    Ok(h * sum)
}

/// Piecewise Lagrange interpolant of degree r on n equal cells of [0, 1],
/// with r + 1 equidistant nodes per cell (cell ends included).
#[derive(Debug, Clone)]
pub struct PiecewiseLagrange {
    n: usize,
    r: usize,
    /// Node values, cell-major: `values[i * (r + 1) + j]`.
    values: Vec<f64>,
    /// ∫_0^1 ℓ_j(s) ds for the Lagrange basis on nodes j/r.
    weights: Vec<f64>,
}

impl PiecewiseLagrange {
    pub fn new(f: impl Fn(f64) -> f64, r: usize, n: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::Unsupported("control variate of degree 0".into()));
        }
        if n == 0 {
            return Err(invalid("n", "need at least one cell"));
        }
        let h = 1.0 / n as f64;
        let mut values = Vec::with_capacity(n * (r + 1));
        for i in 0..n {
            for j in 0..=r {
                let x = (i as f64 + j as f64 / r as f64) * h;
                let v = f(x);
                if !v.is_finite() {
                    return Err(Error::Evaluation { index: i * (r + 1) + j, value: v });
                }
                values.push(v);
            }
        }
        Ok(Self { n, r, values, weights: lagrange_weights(r)? })
    }

    /// Evaluate g_n(x) for x in [0, 1].
    pub fn eval(&self, x: f64) -> f64 {
        let scaled = x * self.n as f64;
        let i = (scaled.floor() as usize).min(self.n - 1);
        let s = (scaled - i as f64) * self.r as f64;
        let vals = &self.values[i * (self.r + 1)..(i + 1) * (self.r + 1)];
        let mut out = 0.0;
        for (j, v) in vals.iter().enumerate() {
            let mut basis = 1.0;
            for k in 0..=self.r {
                if k != j {
                    basis *= (s - k as f64) / (j as f64 - k as f64);
                }
            }
            out += basis * v;
        }
        out
    }

    /// Exact integral of g_n over [0, 1].
    pub fn integral(&self) -> f64 {
        let h = 1.0 / self.n as f64;
        let per_cell: f64 = self
            .values
            .chunks(self.r + 1)
            .map(|c| c.iter().zip(&self.weights).map(|(v, w)| v * w).sum::<f64>())
            .sum();
        h * per_cell
    }
}

/// Integrals of the Lagrange basis on nodes {0, 1/r, …, 1} over [0, 1],
/// from the monomial moment equations Σ_j w_j (j/r)^k = 1/(k+1).
fn lagrange_weights(r: usize) -> Result<Vec<f64>> {
    let m = r + 1;
    let v = DMatrix::from_fn(m, m, |k, j| (j as f64 / r as f64).powi(k as i32));
    let rhs = DVector::from_fn(m, |k, _| 1.0 / (k as f64 + 1.0));
    let w = v
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Unsupported(format!("Newton–Cotes weights for r = {r}")))?;
    Ok(w.iter().copied().collect())
}

/// Shift every accumulated value by `c` (mean moves, spread does not).
fn shifted(acc: McAccumulator, c: f64) -> McAccumulator {
    McAccumulator { mean: acc.mean + c, ..acc }
}

/// Control-variate estimator I(g_n) + MC_N(f − g_n) on [0, 1] with a
/// piecewise Lagrange interpolant of degree r on n cells.
pub fn control_variate_mc<F>(f: F, r: usize, n: usize, samples: usize, stream: &RandomStream) -> Result<McEstimate>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let g = PiecewiseLagrange::new(&f, r, n)?;
    if samples < 2 {
        return Err(Error::InsufficientData(format!("need N ≥ 2 samples, got {samples}")));
    }
    let residual = exec::accumulate(samples, |j| {
        let x = stream.substream(j as u64).next_f64();
        let v = f(x) - g.eval(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation { index: j, value: v })
        }
    })?;
    McEstimate::from_acc(shifted(residual, g.integral()))
}

/// Error bound (H/r!)·n^{−(r+ρ)}·N^{−1/2} of the control-variate estimator.
pub fn control_variate_bound(params: &HolderClassParams, n: usize, samples: usize) -> f64 {
    params.h / factorial(params.r) * (n as f64).powf(-(params.r as f64 + params.rho)) / (samples as f64).sqrt()
}

/// Sup-norm distance between f and its piecewise Lagrange interpolant on a uniform probe grid.
pub fn interpolation_sup_error(f: impl Fn(f64) -> f64, r: usize, n: usize, probes: usize) -> Result<f64> {
    let g = PiecewiseLagrange::new(&f, r, n)?;
    Ok((0..=probes)
        .map(|k| {
            let x = k as f64 / probes as f64;
            (f(x) - g.eval(x)).abs()
        })
        .fold(0.0, f64::max))
}

/// Multidimensional control variate: g equals f at the lower corner of each
/// of the n^d cells, I(g) is the rectangle rule and the residual is sampled.
pub fn piecewise_constant_cv<F>(f: F, d: usize, n: usize, samples: usize, stream: &RandomStream) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let q = rect_rule(&f, d, n)?;
    if samples < 2 {
        return Err(Error::InsufficientData(format!("need N ≥ 2 samples, got {samples}")));
    }
    let h = 1.0 / n as f64;
    let residual = exec::accumulate_with(
        samples,
        || (vec![0.0; d], vec![0.0; d]),
        |(x, corner), j| {
            let mut s = stream.substream(j as u64);
            for (xi, ci) in x.iter_mut().zip(corner.iter_mut()) {
                *xi = s.next_f64();
                *ci = ((*xi * n as f64).floor()).min(n as f64 - 1.0) * h;
            }
            let v = f(x) - f(corner);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Evaluation { index: j, value: v })
            }
        },
    )?;
    McEstimate::from_acc(shifted(residual, q))
}

/// Stratified estimate with per-cell statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratifiedEstimate {
    pub estimate: f64,
    /// Estimated variance of the estimator, Σ_i vol_i² σ̂_i² / N_i.
    pub variance: f64,
    pub ci: ConfidenceInterval,
}

/// Stratified sampling over K^d equal cubes with proportional allocation N_i = N / K^d.
pub fn stratified_mc<F>(f: F, d: usize, k: usize, samples: usize, stream: &RandomStream) -> Result<StratifiedEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    let cells = grid_size(d, k)?;
    if samples % cells != 0 {
        return Err(Error::Allocation(format!("N = {samples} is not divisible by the {cells} strata")));
    }
    let per_cell = samples / cells;
    if per_cell < 2 {
        return Err(Error::InsufficientData(format!("{per_cell} sample(s) per stratum; need at least 2")));
    }
    let h = 1.0 / k as f64;
    let vol = h.powi(d as i32);
    let cell_stats = exec::try_map_indexed(cells, |c| {
        let mut corner = vec![0.0; d];
        let mut rest = c;
        for ci in corner.iter_mut() {
            *ci = (rest % k) as f64 * h;
            rest /= k;
        }
        let mut x = vec![0.0; d];
        let mut acc = McAccumulator::new();
        for s in 0..per_cell {
            let j = c * per_cell + s;
            let mut st = stream.substream(j as u64);
            for (xi, lo) in x.iter_mut().zip(&corner) {
                *xi = lo + h * st.next_f64();
            }
            let v = f(&x);
            if !v.is_finite() {
                return Err(Error::Evaluation { index: j, value: v });
            }
            acc.push(v);
        }
        Ok(acc)
    })?;
    let mut estimate = 0.0;
    let mut variance = 0.0;
    for acc in &cell_stats {
        estimate += vol * acc.mean;
        variance += vol * vol * acc.variance()? / per_cell as f64;
    }
    let q = crate::numerics::two_sided_quantile(DEFAULT_LEVEL)?;
    Ok(StratifiedEstimate {
        estimate,
        variance,
        ci: ConfidenceInterval {
            center: estimate,
            halfwidth: q * variance.sqrt(),
            level: DEFAULT_LEVEL,
            kind: crate::mc::IntervalKind::Asymptotic,
        },
    })
}

/// Analytic stratified variance (1/N)(I(f²) − Σ_i I_i(f)²/vol_i).
pub fn stratified_variance(integral_sq: f64, cell_integrals: &[f64], cell_volumes: &[f64], samples: usize) -> f64 {
    let between: f64 = cell_integrals.iter().zip(cell_volumes).map(|(i, v)| i * i / v).sum();
    (integral_sq - between) / samples as f64
}

/// Analytic crude MC variance (I(f²) − I(f)²)/N.
pub fn crude_variance(integral: f64, integral_sq: f64, samples: usize) -> f64 {
    (integral_sq - integral * integral) / samples as f64
}

/// Asymptotic interval of an accumulator at the default level (re-exported convenience).
pub fn default_interval(acc: &McAccumulator) -> Result<ConfidenceInterval> {
    asymptotic_interval(acc, DEFAULT_LEVEL)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_examples() {
        assert_eq!(rect_rule(|_| 1.0, 3, 5).unwrap(), 1.0);
        assert_eq!(rect_rule(|x| x[0], 1, 4).unwrap(), 0.375);
        assert_eq!(rect_rule(|x| x[0] + x[1], 2, 2).unwrap(), 0.5);
        assert!(rect_rule(|_| 1.0, 1, 0).is_err());
    }

    #[test]
    fn midpoint_examples() {
        assert_eq!(midpoint_rule(|_| 2.0, 2, 3).unwrap(), 2.0);
        for n in 1..10 {
            assert!((midpoint_rule(|x| x[0], 1, n).unwrap() - 0.5).abs() < 1e-15);
        }
        assert_eq!(midpoint_rule(|x| x[0] * x[0], 1, 2).unwrap(), 0.3125);
    }

    #[test]
    fn taylor_examples() {
        let one = |_: f64| 1.0;
        for n in 1..6 {
            assert!((taylor_quadrature(&[&one], 0.0, 3.0, n, false).unwrap() - 3.0).abs() < 1e-14);
        }
        let id = |x: f64| x;
        assert_eq!(taylor_quadrature(&[&id], 0.0, 1.0, 4, false).unwrap(), 0.375);
        assert_eq!(taylor_quadrature(&[&id], 0.0, 1.0, 4, true).unwrap(), 0.5);
        assert!(taylor_quadrature(&[], 0.0, 1.0, 4, true).is_err());
    }

    #[test]
    fn lagrange_reproduces_polynomials() {
        let cubic = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x * x;
        let g = PiecewiseLagrange::new(cubic, 3, 5).unwrap();
        for k in 0..=50 {
            let x = k as f64 / 50.0;
            assert!((g.eval(x) - cubic(x)).abs() < 1e-12);
        }
        assert!((g.integral() - (1.0 - 1.0 + 0.125)).abs() < 1e-13);
        assert!(matches!(PiecewiseLagrange::new(cubic, 0, 5), Err(Error::Unsupported(_))));
    }

    #[test]
    fn stratified_allocation_error() {
        let s = RandomStream::new(0, 0);
        assert!(matches!(stratified_mc(|x| x[0], 1, 3, 100, &s), Err(Error::Allocation(_))));
    }
}
