//! Correlation of two spherical functions over the Euler-angle grid.

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::grid::{self, GridError, SphericalGridFunction};
use super::sht::HarmonicCoefficients;
use super::wigner::WignerTable;
use crate::linalg::vec3::{self, Mat3, Vec3};
use std::f64::consts::PI;

/// `R = R_z(α) R_y(β) R_z(γ)`.
pub fn euler_zyz(alpha: f64, beta: f64, gamma: f64) -> Mat3<f64> {
    let rz = |a: f64| [[a.cos(), -a.sin(), 0.0], [a.sin(), a.cos(), 0.0], [0.0, 0.0, 1.0]];
    let ry = [[beta.cos(), 0.0, beta.sin()], [0.0, 1.0, 0.0], [-beta.sin(), 0.0, beta.cos()]];
    vec3::mat_mul(&vec3::mat_mul(&rz(alpha), &ry), &rz(gamma))
}

/// Euler angles of a rotation matrix, inverse of [`euler_zyz`].
pub fn zyz_angles(r: &Mat3<f64>) -> [f64; 3] {
    let beta = r[2][2].clamp(-1.0, 1.0).acos();
    if beta.sin() > 1e-12 {
        [r[1][2].atan2(r[0][2]), beta, r[2][1].atan2(-r[2][0])]
    } else if r[2][2] > 0.0 {
        [r[1][0].atan2(r[0][0]), 0.0, 0.0]
    } else {
        [(-r[1][0]).atan2(-r[0][0]), PI, 0.0]
    }
}

/// Geodesic angle between two rotations.
pub fn rotation_angle_between(a: &Mat3<f64>, b: &Mat3<f64>) -> f64 {
    let m = vec3::mat_mul(&vec3::transpose(a), b);
    ((m[0][0] + m[1][1] + m[2][2] - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// `C(α, β, γ)` sampled at `α_a = 2πa/2B`, `β_j = π(2j+1)/4B`,
/// `γ_c = 2πc/2B`; stored `[j][a][c]`.
#[derive(Debug, Clone)]
pub struct CorrelationGrid {
    b: usize,
    values: Vec<f64>,
    /// Largest `|Im C|` seen before taking the real part.
    pub max_imaginary: f64,
}

impl CorrelationGrid {
    pub fn bandwidth(&self) -> usize {
        self.b
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, a: usize, j: usize, c: usize) -> f64 {
        let n = 2 * self.b;
        self.values[(j * n + a) * n + c]
    }

    pub fn angles(&self, a: usize, j: usize, c: usize) -> [f64; 3] {
        [grid::phi(self.b, a), grid::theta(self.b, j), grid::phi(self.b, c)]
    }

    /// Grid node `(a, j, c)` with the largest value; first in storage order on ties.
    pub fn argmax(&self) -> (usize, usize, usize) {
        let n = 2 * self.b;
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        let c = best % n;
        let a = (best / n) % n;
        let j = best / (n * n);
        (a, j, c)
    }

    pub fn range(&self) -> f64 {
        let (lo, hi) = self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi - lo
    }
}

/// `C(R) = Σ_l Σ_{m,m'} f̂_lm conj(ĝ_lm') conj(D^l_{mm'}(R))` with
/// `D^l_{mm'}(α,β,γ) = e^{−imα} d^l_{mm'}(β) e^{−im'γ}`. For each `β_j` the
/// `(m, m')` sums become one inverse 2D DFT over `(α, γ)`.
pub fn so3_correlation_grid(f: &HarmonicCoefficients, g: &HarmonicCoefficients) -> Result<CorrelationGrid, GridError> {
    let b = f.bandwidth();
    if g.bandwidth() != b {
        return Err(GridError::BandwidthMismatch(b, g.bandwidth()));
    }
    let n = 2 * b;
    let bi = b as i64;
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(n);
    let mut values = vec![0.0; n * n * n];
    let mut max_imaginary: f64 = 0.0;
    let mut s = vec![Complex64::new(0.0, 0.0); n * n];
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        let d = WignerTable::new(b, grid::theta(b, j));
        s.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for m in -(bi - 1)..bi {
            for mp in -(bi - 1)..bi {
                let l0 = m.abs().max(mp.abs()) as usize;
                let dcol = d.column(m, mp);
                let mut acc = Complex64::new(0.0, 0.0);
                for l in l0..b {
                    acc += f.get(l, m) * g.get(l, mp).conj() * dcol[l];
                }
                let (ia, ic) = (m.rem_euclid(n as i64) as usize, mp.rem_euclid(n as i64) as usize);
                s[ia * n + ic] = acc;
            }
        }
        // inverse DFT along γ (rows), then along α (columns)
        for ia in 0..n {
            ifft.process(&mut s[ia * n..(ia + 1) * n]);
        }
        for ic in 0..n {
            for ia in 0..n {
                col[ia] = s[ia * n + ic];
            }
            ifft.process(&mut col);
            for ia in 0..n {
                s[ia * n + ic] = col[ia];
            }
        }
        for a in 0..n {
            for c in 0..n {
                let v = s[a * n + c];
                max_imaginary = max_imaginary.max(v.im.abs());
                values[(j * n + a) * n + c] = v.re;
            }
        }
    }
    Ok(CorrelationGrid { b, values, max_imaginary })
}

/// Direct quadrature `∫ f(x) g(Rᵀx) dx` on the `2B × 2B` grid of `f`.
pub fn direct_correlation(f: &SphericalGridFunction, g: impl Fn(Vec3<f64>) -> f64, r: &Mat3<f64>) -> f64 {
    let b = f.bandwidth();
    let w = grid::weights(b);
    let mut total = 0.0;
    for j in 0..2 * b {
        let mut row = 0.0;
        for k in 0..2 * b {
            let x = grid::direction(b, j, k);
            row += f.get(j, k) * g(vec3::mat_t_vec(r, x));
        }
        total += w[j] * row;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registration::sht::{random_real_coefficients, sht_forward, HarmonicCoefficients};
    use rand::{Rng, SeedableRng};

    #[test]
    fn euler_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let a = [rng.random_range(-3.0..3.0), rng.random_range(0.01..3.1), rng.random_range(-3.0..3.0)];
            let r = euler_zyz(a[0], a[1], a[2]);
            let back = zyz_angles(&r);
            let r2 = euler_zyz(back[0], back[1], back[2]);
            assert!(rotation_angle_between(&r, &r2) < 1e-7);
        }
    }

    #[test]
    fn rotating_a_field_rotates_coefficients() {
        let b = 6;
        let f = random_real_coefficients(b, 3);
        let (al, be, ga) = (0.7, 1.1, -2.0);
        let r = euler_zyz(al, be, ga);
        let rotated = SphericalGridFunction::sample(b, |x| f.evaluate(vec3::mat_t_vec(&r, x)).re);
        let g = sht_forward(&rotated);
        let d = WignerTable::new(b, be);
        for l in 0..b {
            for m in -(l as i64)..=(l as i64) {
                let mut expect = Complex64::new(0.0, 0.0);
                for mp in -(l as i64)..=(l as i64) {
                    let dm = Complex64::from_polar(1.0, -(m as f64) * al - (mp as f64) * ga) * d.get(l, m, mp);
                    expect += dm * f.get(l, mp);
                }
                assert!((g.get(l, m) - expect).norm() < 1e-10, "l={l} m={m}");
            }
        }
    }

    #[test]
    fn grid_matches_direct_quadrature() {
        let b = 8;
        let fc = random_real_coefficients(b, 4);
        let gc = random_real_coefficients(b, 5);
        let fgrid = super::super::sht::sht_inverse(&fc, b).unwrap();
        let c = so3_correlation_grid(&fc, &gc).unwrap();
        assert!(c.max_imaginary < 1e-9);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let (a, j, k) = (rng.random_range(0..2 * b), rng.random_range(0..2 * b), rng.random_range(0..2 * b));
            let [al, be, ga] = c.angles(a, j, k);
            let direct = direct_correlation(&fgrid, |y| gc.evaluate(y).re, &euler_zyz(al, be, ga));
            let rel = (c.get(a, j, k) - direct).abs() / direct.abs().max(1e-300);
            assert!(rel < 1e-6, "{} vs {direct}", c.get(a, j, k));
        }
    }

    #[test]
    fn constant_fields_give_flat_correlation() {
        let b = 4;
        let mut f = HarmonicCoefficients::zeros(b);
        f.set(0, 0, Complex64::new(2.0, 0.0));
        let mut g = HarmonicCoefficients::zeros(b);
        g.set(0, 0, Complex64::new(3.0, 0.0));
        let c = so3_correlation_grid(&f, &g).unwrap();
        assert!(c.range() < 1e-9);
        assert!(c.values().iter().all(|&v| (v - 6.0).abs() < 1e-9));
    }
}
