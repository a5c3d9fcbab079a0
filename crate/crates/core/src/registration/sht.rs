//! Spherical harmonic transform on the equiangular grid.
//!
//! Harmonics are orthonormal with the Condon–Shortley phase:
//! `Y_l^m(θ, φ) = P̄_l^m(cos θ) e^{imφ}`, `Y_l^{-m} = (-1)^m conj(Y_l^m)`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rustfft::FftPlanner;

use super::grid::{self, GridError, SphericalGridFunction};
use crate::linalg::vec3::Vec3;

/// Orthonormal associated Legendre values `P̄_l^m(cos θ)` for `0 ≤ m ≤ l < b`,
/// stored at `l(l+1)/2 + m`.
pub fn legendre_table(b: usize, theta: f64) -> Vec<f64> {
    let (c, s) = (theta.cos(), theta.sin());
    let mut p = vec![0.0; b * (b + 1) / 2];
    let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let mut pmm = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
    for m in 0..b {
        if m > 0 {
            pmm *= -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s;
        }
        p[idx(m, m)] = pmm;
        if m + 1 < b {
            p[idx(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * c * pmm;
        }
        for l in (m + 2)..b {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let bb = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[idx(l, m)] = a * (c * p[idx(l - 1, m)] - bb * p[idx(l - 2, m)]);
        }
    }
    p
}

fn legendre(table: &[f64], l: usize, m: i64) -> f64 {
    let am = m.unsigned_abs() as usize;
    let v = table[l * (l + 1) / 2 + am];
    if m < 0 && am % 2 == 1 {
        -v
    } else {
        v
    }
}

/// Spherical harmonic `Y_l^m` at a unit direction.
pub fn spherical_harmonic(l: usize, m: i64, x: Vec3<f64>) -> Complex64 {
    let theta = x[2].clamp(-1.0, 1.0).acos();
    let phi = x[1].atan2(x[0]);
    let table = legendre_table(l + 1, theta);
    Complex64::from_polar(legendre(&table, l, m), m as f64 * phi)
}

/// Coefficients `f̂_lm`, `0 ≤ l < B`, `−l ≤ m ≤ l`, stored at `l² + l + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoefficients {
    b: usize,
    data: Vec<Complex64>,
}

impl HarmonicCoefficients {
    pub fn zeros(b: usize) -> Self {
        HarmonicCoefficients { b, data: vec![Complex64::new(0.0, 0.0); b * b] }
    }

    pub fn bandwidth(&self) -> usize {
        self.b
    }

    fn index(l: usize, m: i64) -> usize {
        debug_assert!(m.unsigned_abs() as usize <= l);
        ((l * l + l) as i64 + m) as usize
    }

    pub fn get(&self, l: usize, m: i64) -> Complex64 {
        self.data[Self::index(l, m)]
    }

    pub fn set(&mut self, l: usize, m: i64, v: Complex64) {
        self.data[Self::index(l, m)] = v;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    /// Evaluate the truncated expansion at a unit direction.
    pub fn evaluate(&self, x: Vec3<f64>) -> Complex64 {
        let theta = x[2].clamp(-1.0, 1.0).acos();
        let phi = x[1].atan2(x[0]);
        let table = legendre_table(self.b, theta);
        let mut s = Complex64::new(0.0, 0.0);
        for l in 0..self.b {
            for m in -(l as i64)..=(l as i64) {
                s += self.get(l, m) * Complex64::from_polar(legendre(&table, l, m), m as f64 * phi);
            }
        }
        s
    }

    /// `Σ |f̂_lm|²`.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Analysis: `f̂_lm = Σ_j w_j P̄_l^m(θ_j) Σ_k f_jk e^{−imφ_k}`.
pub fn sht_forward(g: &SphericalGridFunction) -> HarmonicCoefficients {
    let b = g.bandwidth();
    let n = 2 * b;
    let w = grid::weights(b);
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut out = HarmonicCoefficients::zeros(b);
    let mut row = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for (k, v) in row.iter_mut().enumerate() {
            *v = Complex64::new(g.get(j, k), 0.0);
        }
        fft.process(&mut row);
        let table = legendre_table(b, grid::theta(b, j));
        for l in 0..b {
            for m in -(l as i64)..=(l as i64) {
                let fm = row[m.rem_euclid(n as i64) as usize];
                let idx = HarmonicCoefficients::index(l, m);
                out.data[idx] += fm * (w[j] * legendre(&table, l, m));
            }
        }
    }
    out
}

/// Synthesis on the grid; returns the real part (imaginary parts vanish for
/// conjugate-symmetric coefficients).
pub fn sht_inverse(c: &HarmonicCoefficients, b: usize) -> Result<SphericalGridFunction, GridError> {
    if c.bandwidth() != b {
        return Err(GridError::BandwidthMismatch(c.bandwidth(), b));
    }
    let n = 2 * b;
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    let mut values = Vec::with_capacity(n * n);
    let mut row = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        row.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        let table = legendre_table(b, grid::theta(b, j));
        for l in 0..b {
            for m in -(l as i64)..=(l as i64) {
                row[m.rem_euclid(n as i64) as usize] += c.get(l, m) * legendre(&table, l, m);
            }
        }
        ifft.process(&mut row);
        values.extend(row.iter().map(|v| v.re));
    }
    SphericalGridFunction::new(b, values)
}

/// Conjugate-symmetric random coefficients, i.e. a real band-limited field,
/// uniform in `[-1, 1]` per real component.
pub fn random_real_coefficients(b: usize, seed: u64) -> HarmonicCoefficients {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut c = HarmonicCoefficients::zeros(b);
    for l in 0..b {
        c.set(l, 0, Complex64::new(rng.random_range(-1.0..1.0), 0.0));
        for m in 1..=(l as i64) {
            let v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            c.set(l, m, v);
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            c.set(l, -m, v.conj() * sign);
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn legendre_low_orders() {
        let t = 0.7f64;
        let p = legendre_table(3, t);
        let k = 1.0 / (4.0 * PI).sqrt();
        assert!((p[0] - k).abs() < 1e-15);
        assert!((p[1] - 3f64.sqrt() * k * t.cos()).abs() < 1e-15);
        // P̄_1^1 = −sqrt(3/2) k sin θ
        assert!((p[2] + (1.5f64).sqrt() * k * t.sin()).abs() < 1e-15);
    }

    #[test]
    fn constant_has_only_dc_term() {
        let c = sht_forward(&SphericalGridFunction::sample(8, |_| 1.0));
        assert!((c.get(0, 0).re - (4.0 * PI).sqrt()).abs() < 1e-12);
        for l in 1..8 {
            for m in -(l as i64)..=(l as i64) {
                assert!(c.get(l, m).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn real_y32_round_trip() {
        let b = 16;
        let g = SphericalGridFunction::sample(b, |x| spherical_harmonic(3, 2, x).re);
        let c = sht_forward(&g);
        let back = sht_inverse(&c, b).unwrap();
        let err = g.values().iter().zip(back.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
        assert!((c.get(3, 2).re - 0.5).abs() < 1e-12);
    }

    #[test]
    fn parseval_on_band_limited_field() {
        let b = 8;
        let c = random_real_coefficients(b, 1);
        let g = sht_inverse(&c, b).unwrap();
        let sq = SphericalGridFunction::new(b, g.values().iter().map(|v| v * v).collect()).unwrap();
        assert!((sq.integrate() - c.energy()).abs() < 1e-8 * c.energy());
        let again = sht_forward(&g);
        for (a, b) in again.as_slice().iter().zip(c.as_slice()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn pointwise_evaluation_matches_grid() {
        let b = 6;
        let c = random_real_coefficients(b, 2);
        let g = sht_inverse(&c, b).unwrap();
        for (j, k) in [(0, 0), (3, 5), (11, 7)] {
            let v = c.evaluate(grid::direction(b, j, k));
            assert!((v.re - g.get(j, k)).abs() < 1e-12);
            assert!(v.im.abs() < 1e-12);
        }
    }
}
