//! Derivative-free Nelder–Mead minimization with box bounds and restarts.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Stop when max f − min f over the simplex falls below this.
    pub f_tol: f64,
    /// ...and every vertex lies within x_tol·(1 + ‖best‖∞) of the best one.
    pub x_tol: f64,
    pub max_iter: usize,
    /// Fresh simplices built around the incumbent after the first run.
    pub restarts: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { f_tol: 1e-8, x_tol: 1e-9, max_iter: 20_000, restarts: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexReport {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub restarts: usize,
    pub converged: bool,
}

/// Minimize `f` over the box `bounds`; points outside the box score +∞.
pub fn minimize(f: impl Fn(&[f64]) -> f64, x0: &[f64], bounds: &[(f64, f64)], opts: SimplexOptions) -> SimplexReport {
    let inside = |x: &[f64]| x.iter().zip(bounds).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi);
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = if inside(x) { f(x) } else { f64::INFINITY };
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut best = x0.to_vec();
    let mut best_val = eval(&best);
    let mut iterations = 0;
    let mut converged = false;
    let mut restarts = 0;
    for run in 0..=opts.restarts {
        let (x, v, it, ok) = run_once(&mut eval, &best, best_val, bounds, opts);
        iterations += it;
        converged = ok;
        let improved = best_val - v;
        if v <= best_val {
            best = x;
            best_val = v;
        }
        restarts = run;
        if run > 0 && ok && improved <= opts.f_tol {
            break;
        }
    }
    SimplexReport { x: best, value: best_val, iterations, evaluations, restarts, converged }
}

fn initial_simplex(x0: &[f64], bounds: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let mut simplex = vec![x0.to_vec()];
    for i in 0..x0.len() {
        let mut v = x0.to_vec();
        let step = if x0[i] != 0.0 { 0.05 * x0[i].abs() } else { 2.5e-4 };
        let (lo, hi) = bounds[i];
        v[i] = if x0[i] + step <= hi { x0[i] + step } else if x0[i] - step >= lo { x0[i] - step } else { 0.5 * (lo + x0[i]) };
        simplex.push(v);
    }
    simplex
}

fn run_once(
    eval: &mut impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    f0: f64,
    bounds: &[(f64, f64)],
    opts: SimplexOptions,
) -> (Vec<f64>, f64, usize, bool) {
    let s = x0.len();
    let mut pts = initial_simplex(x0, bounds);
    let mut vals: Vec<f64> = std::iter::once(f0).chain(pts[1..].iter().map(|p| eval(p))).collect();
    let mut order: Vec<usize> = (0..=s).collect();
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };
    for it in 0..opts.max_iter {
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        let (b, w, sw) = (order[0], order[s], order[s - 1]);
        let scale = 1.0 + pts[b].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let spread = pts.iter().flat_map(|p| p.iter().zip(&pts[b]).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max);
        if vals[w] - vals[b] <= opts.f_tol && spread <= opts.x_tol * scale {
            return (pts[b].clone(), vals[b], it, true);
        }
        let mut centroid = vec![0.0; s];
        for &i in &order[..s] {
            for (c, v) in centroid.iter_mut().zip(&pts[i]) {
                *c += v / s as f64;
            }
        }
        let reflected = lerp(&centroid, &pts[w], -1.0);
        let fr = eval(&reflected);
        if fr < vals[b] {
            let expanded = lerp(&centroid, &pts[w], -2.0);
            let fe = eval(&expanded);
            (pts[w], vals[w]) = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < vals[sw] {
            (pts[w], vals[w]) = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < vals[w] {
            let c = lerp(&centroid, &pts[w], -0.5);
            let v = eval(&c);
            (c, v)
        } else {
            let c = lerp(&centroid, &pts[w], 0.5);
            let v = eval(&c);
            (c, v)
        };
        if fc < vals[w].min(fr) {
            (pts[w], vals[w]) = (contracted, fc);
            continue;
        }
        let anchor = pts[b].clone();
        for i in 0..=s {
            if i != b {
                pts[i] = lerp(&anchor, &pts[i], 0.5);
                vals[i] = eval(&pts[i]);
            }
        }
    }
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    (pts[order[0]].clone(), vals[order[0]], opts.max_iter, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let r = minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
            &[(-5.0, 5.0), (-5.0, 5.0)],
            SimplexOptions::default(),
        );
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn respects_bounds() {
        let r = minimize(|x| (x[0] + 3.0).powi(2), &[1.0], &[(0.0, 2.0)], SimplexOptions::default());
        assert!(r.x[0] >= 0.0 && r.x[0] < 1e-6);
    }
}
