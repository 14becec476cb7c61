use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing partition t_0 < t_1 < … < t_n of an interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = Error;

    fn try_from(points: Vec<f64>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(g: TimeGrid) -> Self {
        g.points
    }
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {}", points.len())));
        }
        if let Some(bad) = points.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid(format!("point {bad} is not finite")));
        }
        if let Some(k) = points.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidGrid(format!(
                "points {} and {} are not strictly increasing ({} ≥ {})",
                k,
                k + 1,
                points[k],
                points[k + 1]
            )));
        }
        Ok(Self { points })
    }

    /// n equal cells on [a, b]; the last point is exactly b.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGrid("need at least one cell".into()));
        }
        if !(a < b) {
            return Err(Error::InvalidGrid(format!("empty interval [{a}, {b}]")));
        }
        let h = (b - a) / n as f64;
        let mut points: Vec<f64> = (0..n).map(|k| a + k as f64 * h).collect();
        points.push(b);
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of cells n.
    pub fn cells(&self) -> usize {
        self.points.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.points[0]
    }

    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn dt(&self, k: usize) -> f64 {
        self.points[k + 1] - self.points[k]
    }

    pub fn max_step(&self) -> f64 {
        self.points.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// True when all steps agree with the mean step to relative tolerance `rel_tol`.
    pub fn is_uniform(&self, rel_tol: f64) -> bool {
        let h = (self.end() - self.start()) / self.cells() as f64;
        self.points.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= rel_tol * h)
    }

    /// Index k of the cell [t_k, t_{k+1}) containing t (the last cell is closed).
    pub fn cell_of(&self, t: f64) -> usize {
        let n = self.cells();
        match self.points.partition_point(|&p| p <= t) {
            0 => 0,
            i => (i - 1).min(n - 1),
        }
    }

    /// Split every cell into `m` equal sub-cells; original points are kept exactly.
    pub fn refine(&self, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidGrid("refinement factor must be positive".into()));
        }
        let mut points = Vec::with_capacity(self.cells() * m + 1);
        for w in self.points.windows(2) {
            let h = (w[1] - w[0]) / m as f64;
            for j in 0..m {
                points.push(if j == 0 { w[0] } else { w[0] + j as f64 * h });
            }
        }
        points.push(self.end());
        Self::new(points)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(TimeGrid::new(vec![0.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, f64::NAN]).is_err());
        assert!(TimeGrid::uniform(1.0, 1.0, 3).is_err());
        let g = TimeGrid::uniform(0.0, 1.0, 3).unwrap();
        assert_eq!(g.end(), 1.0);
        assert!(g.is_uniform(1e-12));
    }

    #[test]
    fn cells_and_refinement() {
        let g = TimeGrid::new(vec![0.0, 0.5, 2.0]).unwrap();
        assert_eq!(g.cell_of(0.0), 0);
        assert_eq!(g.cell_of(0.5), 1);
        assert_eq!(g.cell_of(2.0), 1);
        let r = g.refine(4).unwrap();
        assert_eq!(r.cells(), 8);
        assert_eq!(r.points()[4], 0.5);
        assert_eq!(r.end(), 2.0);
    }
}
