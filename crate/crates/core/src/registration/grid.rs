//! Equiangular `2B × 2B` grid on the sphere and its quadrature weights.

use crate::linalg::vec3::Vec3;
use std::f64::consts::PI;

/// Colatitude of row `j`: `π(2j+1)/(4B)`.
pub fn theta(b: usize, j: usize) -> f64 {
    PI * (2 * j + 1) as f64 / (4 * b) as f64
}

/// Longitude of column `k`: `2πk/(2B)`.
pub fn phi(b: usize, k: usize) -> f64 {
    2.0 * PI * k as f64 / (2 * b) as f64
}

pub fn direction(b: usize, j: usize, k: usize) -> Vec3<f64> {
    let (t, p) = (theta(b, j), phi(b, k));
    [t.sin() * p.cos(), t.sin() * p.sin(), t.cos()]
}

/// Per-row quadrature weights, longitude spacing included:
/// `(2π/2B) · (2/B) sin θ_j Σ_{k<B} sin((2k+1)θ_j)/(2k+1)`.
/// Exact for band-limited integrands of degree below `2B`; the weights sum
/// over the full grid to `4π`.
pub fn weights(b: usize) -> Vec<f64> {
    let dphi = 2.0 * PI / (2 * b) as f64;
    (0..2 * b)
        .map(|j| {
            let t = theta(b, j);
            let s: f64 = (0..b).map(|k| ((2 * k + 1) as f64 * t).sin() / (2 * k + 1) as f64).sum();
            dphi * (2.0 / b as f64) * t.sin() * s
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("grid has {got} samples, bandwidth {b} needs {expected}")]
    Dimension { b: usize, got: usize, expected: usize },
    #[error("bandwidths differ: {0} vs {1}")]
    BandwidthMismatch(usize, usize),
}

/// Real samples on the equiangular grid, row `j` (colatitude) major.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalGridFunction {
    b: usize,
    values: Vec<f64>,
}

impl SphericalGridFunction {
    pub fn new(b: usize, values: Vec<f64>) -> Result<Self, GridError> {
        let expected = 4 * b * b;
        if values.len() != expected {
            return Err(GridError::Dimension { b, got: values.len(), expected });
        }
        Ok(SphericalGridFunction { b, values })
    }

    /// Evaluate a field at every grid direction.
    pub fn sample(b: usize, field: impl Fn(Vec3<f64>) -> f64) -> Self {
        let n = 2 * b;
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n {
            for k in 0..n {
                values.push(field(direction(b, j, k)));
            }
        }
        SphericalGridFunction { b, values }
    }

    pub fn bandwidth(&self) -> usize {
        self.b
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[j * 2 * self.b + k]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let n = 2 * self.b;
        &self.values[j * n..(j + 1) * n]
    }

    /// Quadrature of the samples over the sphere.
    pub fn integrate(&self) -> f64 {
        let w = weights(self.b);
        (0..2 * self.b).map(|j| w[j] * self.row(j).iter().sum::<f64>()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_sphere_area() {
        for b in [4, 8, 16, 32] {
            let total: f64 = weights(b).iter().sum::<f64>() * (2 * b) as f64;
            assert!((total - 4.0 * PI).abs() < 1e-12);
        }
    }

    #[test]
    fn integrates_polynomials_exactly() {
        let b = 8;
        // ∫ z² = 4π/3, ∫ x²y² = 4π/15
        let g = SphericalGridFunction::sample(b, |x| x[2] * x[2]);
        assert!((g.integrate() - 4.0 * PI / 3.0).abs() < 1e-13);
        let g = SphericalGridFunction::sample(b, |x| x[0] * x[0] * x[1] * x[1]);
        assert!((g.integrate() - 4.0 * PI / 15.0).abs() < 1e-13);
    }

    #[test]
    fn constant_and_axisymmetric_samples() {
        let g = SphericalGridFunction::sample(4, |_| 2.5);
        assert!(g.values().iter().all(|&v| v == 2.5));
        assert_eq!(g.values().len(), 64);
        let z = SphericalGridFunction::sample(4, |x| x[2]);
        for j in 0..8 {
            for k in 0..8 {
                assert!((z.get(j, k) - theta(4, j).cos()).abs() < 1e-15);
            }
        }
    }
}
