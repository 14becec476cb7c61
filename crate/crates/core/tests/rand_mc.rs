use proptest::prelude::*;
use stochkit::mc::{self, hoeffding_interval, pi_integrand, pi_rmse, UniformBox};
use stochkit::quadrature::{crude_variance, stratified_mc, stratified_variance};
use stochkit::{McAccumulator, RandomStream};

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn uniform_and_normal_moments() {
    let mut s = RandomStream::new(42, 0);
    let n = 200_000;
    let u = McAccumulator::from_values((0..n).map(|_| s.next_f64()));
    assert!((u.mean - 0.5).abs() < 4.0 * (1.0 / 12.0 / n as f64).sqrt());
    assert!((u.variance().unwrap() - 1.0 / 12.0).abs() < 2e-3);

    let z = McAccumulator::from_values((0..n).map(|_| s.std_normal()));
    assert!(z.mean.abs() < 4.0 / (n as f64).sqrt());
    assert!((z.variance().unwrap() - 1.0).abs() < 0.015);
}

#[test]
fn poisson_and_binomial_means() {
    let mut s = RandomStream::new(3, 1);
    for &mean in &[0.3, 4.0, 75.0] {
        let n = 50_000;
        let acc = McAccumulator::from_values((0..n).map(|_| s.poisson(mean).unwrap() as f64));
        let se = (mean / n as f64).sqrt();
        assert!((acc.mean - mean).abs() < 4.0 * se, "poisson({mean}) mean {}", acc.mean);
        assert!((acc.variance().unwrap() / mean - 1.0).abs() < 0.05);
    }
    let acc = McAccumulator::from_values((0..50_000).map(|_| s.binomial(40, 0.25).unwrap() as f64));
    assert!((acc.mean - 10.0).abs() < 4.0 * (7.5f64 / 50_000.0).sqrt());
}

#[test]
fn substreams_are_reproducible_and_distinct() {
    let root = RandomStream::new(9, 0);
    let a: Vec<u64> = {
        let mut s = root.substream(5);
        (0..8).map(|_| s.next_u64()).collect()
    };
    let b: Vec<u64> = {
        let mut s = RandomStream::new(9, 0).substream(5);
        (0..8).map(|_| s.next_u64()).collect()
    };
    assert_eq!(a, b);
    let mut other = root.substream(6);
    assert_ne!(a[0], other.next_u64());
    let mut forked = root.fork(5);
    assert_ne!(a[0], forked.next_u64());
}

proptest! {
    #[test]
    fn merge_matches_sequential(values in prop::collection::vec(-1e3f64..1e3, 2..200), split in 0usize..200) {
        let split = split.min(values.len());
        let whole = McAccumulator::from_values(values.iter().copied());
        let left = McAccumulator::from_values(values[..split].iter().copied());
        let right = McAccumulator::from_values(values[split..].iter().copied());
        let merged = left.merge(&right);
        prop_assert_eq!(merged.count, whole.count);
        let scale = 1.0 + whole.mean.abs();
        prop_assert!((merged.mean - whole.mean).abs() <= 1e-12 * scale);
        let vscale = 1.0 + whole.m2.abs();
        prop_assert!((merged.m2 - whole.m2).abs() <= 1e-9 * vscale);
    }

    #[test]
    fn hoeffding_interval_contains_its_mean(mean in -1.0f64..1.0, n in 1u64..100_000, delta in 0.001f64..0.5) {
        let ci = hoeffding_interval(mean, n, delta, 1.0).unwrap();
        prop_assert!(ci.contains(mean));
        prop_assert!(ci.high() - ci.low() > 0.0);
    }
}

#[test]
fn crude_mc_is_independent_of_thread_count() {
    let stream = RandomStream::new(123, 0);
    let f = |x: &[f64]| (x[0] * x[1]).sin() + x[2];
    let one = in_pool(1, || mc::crude_mc(f, 3, 10_007, &stream).unwrap());
    let four = in_pool(4, || mc::crude_mc(f, 3, 10_007, &stream).unwrap());
    assert_eq!(one.acc.mean.to_bits(), four.acc.mean.to_bits());
    assert_eq!(one.acc.m2.to_bits(), four.acc.m2.to_bits());
}

#[test]
fn pi_estimator_hits_its_analytic_rmse() {
    let root = RandomStream::new(1, 0);
    let reps = 300;
    let n = 4000;
    let mse: f64 = (0..reps)
        .map(|r| {
            let est = mc::crude_mc(pi_integrand, 2, n, &root.fork(r)).unwrap();
            (est.estimate() - std::f64::consts::PI).powi(2)
        })
        .sum::<f64>()
        / reps as f64;
    let rel = (mse.sqrt() - pi_rmse(n)).abs() / pi_rmse(n);
    assert!(rel < 0.12, "relative RMSE deviation {rel}");
}

#[test]
fn asymptotic_interval_covers_near_nominal() {
    let root = RandomStream::new(5, 0);
    let reps = 400;
    let covered = (0..reps)
        .filter(|&r| mc::crude_mc(|x| x[0] * x[0], 1, 2000, &root.fork(r)).unwrap().ci.contains(1.0 / 3.0))
        .count();
    let cov = covered as f64 / reps as f64;
    assert!((cov - 0.95).abs() < 0.04, "coverage {cov}");
}

#[test]
fn lebesgue_measure_of_unit_disc() {
    let bbox = UniformBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    let est = mc::lebesgue_measure(|x| x[0] * x[0] + x[1] * x[1] <= 1.0, &bbox, 100_000, &RandomStream::new(8, 0)).unwrap();
    assert!((est.estimate() - std::f64::consts::PI).abs() < 0.025, "area {}", est.estimate());
}

#[test]
fn stratified_variance_formula_matches_empirical_scatter() {
    // f(x) = x on [0,1], K = 4 strata.
    let (k, n) = (4usize, 4000usize);
    let cells: Vec<f64> = (0..k).map(|i| (2 * i + 1) as f64 / (2.0 * (k * k) as f64)).collect();
    let vols = vec![1.0 / k as f64; k];
    let analytic = stratified_variance(1.0 / 3.0, &cells, &vols, n);
    assert!((analytic - 1.0 / (12.0 * 16.0 * n as f64)).abs() < 1e-15);
    assert!(analytic < crude_variance(0.5, 1.0 / 3.0, n));

    let root = RandomStream::new(77, 0);
    let est: Vec<f64> = (0..300).map(|r| stratified_mc(|x| x[0], 1, k, n, &root.fork(r)).unwrap().estimate).collect();
    let acc = McAccumulator::from_values(est);
    let ratio = acc.variance().unwrap() / analytic;
    assert!((0.75..1.3).contains(&ratio), "empirical/analytic variance {ratio}");
}
