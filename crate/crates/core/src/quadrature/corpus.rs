//! Test integrands on [0, 1] and [0, 1]^d with closed-form integrals.
//!
//! Each entry lists the antiderivatives of f and f² (so cell integrals are
//! exact), a Hölder exponent/constant pair and derivatives for the Taylor
//! rule. Values were derived by hand and checked against adaptive
//! quadrature in the unit tests below.

use std::f64::consts::{E, PI};

/// One-dimensional test function.
#[derive(Clone, Copy)]
pub struct Integrand1d {
    pub name: &'static str,
    pub f: fn(f64) -> f64,
    /// Antiderivative of f with F(0) = 0.
    pub antiderivative: fn(f64) -> f64,
    /// Antiderivative of f² with value 0 at 0.
    pub antiderivative_sq: fn(f64) -> f64,
    /// Hölder exponent ρ and constant L (ρ = 1 means Lipschitz).
    pub rho: f64,
    pub l: f64,
    /// f, f', f'', … as far as they exist on [0, 1].
    pub derivs: &'static [fn(f64) -> f64],
}

impl std::fmt::Debug for Integrand1d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name)
    }
}

impl Integrand1d {
    pub fn integral(&self) -> f64 {
        (self.antiderivative)(1.0)
    }

    pub fn integral_sq(&self) -> f64 {
        (self.antiderivative_sq)(1.0)
    }

    pub fn cell_integral(&self, a: f64, b: f64) -> f64 {
        (self.antiderivative)(b) - (self.antiderivative)(a)
    }

    pub fn variance(&self) -> f64 {
        self.integral_sq() - self.integral().powi(2)
    }
}

pub const LINEAR: Integrand1d = Integrand1d {
    name: "linear",
    f: |x| x,
    antiderivative: |x| x * x / 2.0,
    antiderivative_sq: |x| x * x * x / 3.0,
    rho: 1.0,
    l: 1.0,
    derivs: &[|x| x, |_| 1.0, |_| 0.0],
};

pub const SQUARE: Integrand1d = Integrand1d {
    name: "square",
    f: |x| x * x,
    antiderivative: |x| x * x * x / 3.0,
    antiderivative_sq: |x| x.powi(5) / 5.0,
    rho: 1.0,
    l: 2.0,
    derivs: &[|x| x * x, |x| 2.0 * x, |_| 2.0],
};

pub const SINE: Integrand1d = Integrand1d {
    name: "sine",
    f: |x| (2.0 * PI * x).sin(),
    antiderivative: |x| (1.0 - (2.0 * PI * x).cos()) / (2.0 * PI),
    antiderivative_sq: |x| x / 2.0 - (4.0 * PI * x).sin() / (8.0 * PI),
    rho: 1.0,
    l: 2.0 * PI,
    derivs: &[
        |x| (2.0 * PI * x).sin(),
        |x| 2.0 * PI * (2.0 * PI * x).cos(),
        |x| -4.0 * PI * PI * (2.0 * PI * x).sin(),
    ],
};

pub const POW15: Integrand1d = Integrand1d {
    name: "pow1.5",
    f: |x| x.powf(1.5),
    antiderivative: |x| x.powf(2.5) / 2.5,
    antiderivative_sq: |x| x.powi(4) / 4.0,
    rho: 1.0,
    l: 1.5,
    derivs: &[|x| x.powf(1.5), |x| 1.5 * x.sqrt()],
};

pub const SQRT: Integrand1d = Integrand1d {
    name: "sqrt",
    f: |x| x.sqrt(),
    antiderivative: |x| x.powf(1.5) / 1.5,
    antiderivative_sq: |x| x * x / 2.0,
    rho: 0.5,
    l: 1.0,
    derivs: &[|x| x.sqrt()],
};

pub const STEP: Integrand1d = Integrand1d {
    name: "step0.3",
    f: |x| if x <= 0.3 { 1.0 } else { 0.0 },
    antiderivative: |x| x.min(0.3),
    antiderivative_sq: |x| x.min(0.3),
    rho: 1.0,
    l: f64::INFINITY,
    derivs: &[|x| if x <= 0.3 { 1.0 } else { 0.0 }],
};

pub const EXP: Integrand1d = Integrand1d {
    name: "exp",
    f: |x| x.exp(),
    antiderivative: |x| x.exp() - 1.0,
    antiderivative_sq: |x| ((2.0 * x).exp() - 1.0) / 2.0,
    rho: 1.0,
    l: E,
    derivs: &[|x| x.exp(), |x| x.exp(), |x| x.exp()],
};

/// All one-dimensional entries.
pub const CORPUS_1D: &[Integrand1d] = &[LINEAR, SQUARE, SINE, POW15, SQRT, STEP, EXP];

/// Entries that are Lipschitz on [0, 1] (finite L with ρ = 1).
pub fn lipschitz_1d() -> impl Iterator<Item = &'static Integrand1d> {
    CORPUS_1D.iter().filter(|c| c.rho == 1.0 && c.l.is_finite())
}

pub fn find_1d(name: &str) -> Option<&'static Integrand1d> {
    CORPUS_1D.iter().find(|c| c.name == name)
}

/// Function on [0, 1]^d with known integral and max-norm Lipschitz constant.
#[derive(Clone, Copy)]
pub struct IntegrandNd {
    pub name: &'static str,
    pub d: usize,
    pub f: fn(&[f64]) -> f64,
    pub integral: f64,
    pub l: f64,
}

impl std::fmt::Debug for IntegrandNd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name)
    }
}

pub const CORPUS_ND: &[IntegrandNd] = &[
    IntegrandNd { name: "sum2", d: 2, f: |x| x[0] + x[1], integral: 1.0, l: 2.0 },
    IntegrandNd { name: "prod2", d: 2, f: |x| x[0] * x[1], integral: 0.25, l: 2.0 },
    // ∫∫ sin(x + y) = 2 sin 1 − sin 2
    IntegrandNd { name: "sin-sum2", d: 2, f: |x| (x[0] + x[1]).sin(), integral: 0.773_644_542_790_111_4, l: 2.0 },
    IntegrandNd { name: "sum3", d: 3, f: |x| x[0] + x[1] + x[2], integral: 1.5, l: 3.0 },
];

pub fn find_nd(name: &str) -> Option<&'static IntegrandNd> {
    CORPUS_ND.iter().find(|c| c.name == name)
}
