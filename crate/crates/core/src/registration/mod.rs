//! Rigid alignment of spherical parameterizations by maximizing the
//! correlation of their log conformal factor fields over SO(3).

pub mod grid;
pub mod sht;
pub mod so3;
pub mod wigner;

pub use grid::{GridError, SphericalGridFunction};
pub use sht::{sht_forward, sht_inverse, HarmonicCoefficients};
pub use so3::{so3_correlation_grid, CorrelationGrid};

use crate::correspondence::{CorrespondenceError, SphericalTriangulation};
use crate::linalg::vec3::{self, Mat3, Vec3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const ORTHO_TOL: f64 = 1e-10;
/// Correlation ranges below this are treated as a flat landscape.
pub const FLAT_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum RegistrationError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("sampling the conformal factor failed: {0}")]
    Correspondence(#[from] CorrespondenceError),
    #[error("not a rotation: |RᵀR − I| = {ortho:e}, det = {det}")]
    NotRotation { ortho: f64, det: f64 },
    #[error("bandwidth must be at least 1")]
    ZeroBandwidth,
}

/// Proper rotation of R³; persisted as nine row-major numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 9]", into = "[f64; 9]")]
pub struct Rotation {
    m: Mat3<f64>,
}

impl Rotation {
    pub fn new(m: Mat3<f64>) -> Result<Self, RegistrationError> {
        let mtm = vec3::mat_mul(&vec3::transpose(&m), &m);
        let mut ortho: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                ortho = ortho.max((mtm[i][j] - id).abs());
            }
        }
        let det = vec3::mat_det(&m);
        if !(ortho <= ORTHO_TOL) || !((det - 1.0).abs() <= ORTHO_TOL) {
            return Err(RegistrationError::NotRotation { ortho, det });
        }
        Ok(Rotation { m })
    }

    pub fn identity() -> Self {
        Rotation { m: vec3::identity() }
    }

    /// `R_z(α) R_y(β) R_z(γ)`.
    pub fn from_euler_zyz(alpha: f64, beta: f64, gamma: f64) -> Self {
        Rotation { m: so3::euler_zyz(alpha, beta, gamma) }
    }

    /// Rotation by `angle` about `axis` (normalized internally).
    pub fn from_axis_angle(axis: Vec3<f64>, angle: f64) -> Self {
        let [x, y, z] = vec3::normalize(axis);
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        Rotation {
            m: [
                [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
                [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
                [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
            ],
        }
    }

    /// Uniformly distributed rotation from a random unit quaternion.
    pub fn random(rng: &mut impl rand::Rng) -> Self {
        use rand_distr::{Distribution, StandardNormal};
        let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let [w, x, y, z] = q.map(|v| v / n);
        Rotation {
            m: [
                [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
                [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
                [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
            ],
        }
    }

    pub fn matrix(&self) -> &Mat3<f64> {
        &self.m
    }

    pub fn euler_zyz(&self) -> [f64; 3] {
        so3::zyz_angles(&self.m)
    }

    pub fn apply(&self, x: Vec3<f64>) -> Vec3<f64> {
        vec3::mat_vec(&self.m, x)
    }

    pub fn apply_inverse(&self, x: Vec3<f64>) -> Vec3<f64> {
        vec3::mat_t_vec(&self.m, x)
    }

    pub fn inverse(&self) -> Self {
        Rotation { m: vec3::transpose(&self.m) }
    }

    /// `self · other`.
    pub fn compose(&self, other: &Rotation) -> Self {
        Rotation { m: vec3::mat_mul(&self.m, &other.m) }
    }

    /// Geodesic distance on SO(3), in radians.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        so3::rotation_angle_between(&self.m, &other.m)
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.m;
        [m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2]]
    }

    pub fn from_row_major(v: [f64; 9]) -> Result<Self, RegistrationError> {
        Rotation::new([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
    }
}

impl From<Rotation> for [f64; 9] {
    fn from(r: Rotation) -> Self {
        r.to_row_major()
    }
}

impl TryFrom<[f64; 9]> for Rotation {
    type Error = RegistrationError;
    fn try_from(v: [f64; 9]) -> Result<Self, Self::Error> {
        Rotation::from_row_major(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignOptions {
    pub bandwidth: usize,
    /// Local coordinate search on the Euler angles after the grid argmax.
    pub refine: bool,
}

impl Default for AlignOptions {
    fn default() -> Self {
        AlignOptions { bandwidth: 32, refine: false }
    }
}

/// Result of an alignment. `rotation` maps points of the other sphere into
/// the reference frame: `ū_other(y) ≈ ū_ref(R y)`.
#[derive(Debug, Clone)]
pub struct Alignment {
    pub rotation: Rotation,
    pub euler: [f64; 3],
    /// Correlation of the mean-centered fields at `rotation`.
    pub correlation: f64,
    /// Set when the correlation landscape was flat and identity was returned.
    pub flat: bool,
}

/// Samples `ū` of a spherical triangulation onto the equiangular grid.
pub fn sample_to_grid(tri: &SphericalTriangulation<f64>, b: usize) -> Result<SphericalGridFunction, RegistrationError> {
    let n = 2 * b;
    let mut values = Vec::with_capacity(n * n);
    for j in 0..n {
        for k in 0..n {
            values.push(tri.interp_log_conformal(grid::direction(b, j, k))?);
        }
    }
    Ok(SphericalGridFunction::new(b, values)?)
}

fn centered(mut c: HarmonicCoefficients) -> HarmonicCoefficients {
    c.set(0, 0, Complex64::new(0.0, 0.0));
    c
}

/// Aligns field `g` to field `f`: finds `R` maximizing
/// `C(R) = ∫ f(x) g(Rᵀx) dx` after both fields are mean-centered.
pub fn align_fields(
    f: impl Fn(Vec3<f64>) -> f64,
    g: impl Fn(Vec3<f64>) -> f64,
    opts: &AlignOptions,
) -> Result<Alignment, RegistrationError> {
    let b = opts.bandwidth;
    if b == 0 {
        return Err(RegistrationError::ZeroBandwidth);
    }
    let fgrid = SphericalGridFunction::sample(b, &f);
    let ggrid = SphericalGridFunction::sample(b, &g);
    align_grids(&fgrid, &ggrid, &g, opts)
}

fn align_grids(
    fgrid: &SphericalGridFunction,
    ggrid: &SphericalGridFunction,
    g: &dyn Fn(Vec3<f64>) -> f64,
    opts: &AlignOptions,
) -> Result<Alignment, RegistrationError> {
    let b = opts.bandwidth;
    let fc = centered(sht_forward(fgrid));
    let gc = centered(sht_forward(ggrid));
    let corr = so3_correlation_grid(&fc, &gc)?;
    if corr.range() < FLAT_TOL {
        log::warn!("correlation landscape is flat; returning the identity rotation");
        return Ok(Alignment { rotation: Rotation::identity(), euler: [0.0; 3], correlation: 0.0, flat: true });
    }
    let (a, j, c) = corr.argmax();
    let mut euler = corr.angles(a, j, c);
    let mut best = corr.get(a, j, c);
    if opts.refine {
        let fmean = fgrid.integrate() / (4.0 * PI);
        let gmean = ggrid.integrate() / (4.0 * PI);
        let fcent = SphericalGridFunction::new(b, fgrid.values().iter().map(|v| v - fmean).collect())?;
        let eval = |e: [f64; 3]| {
            so3::direct_correlation(&fcent, |y| g(y) - gmean, &so3::euler_zyz(e[0], e[1], e[2]))
        };
        (euler, best) = coordinate_search(euler, eval(euler), PI / b as f64, eval);
    }
    Ok(Alignment { rotation: Rotation::from_euler_zyz(euler[0], euler[1], euler[2]), euler, correlation: best, flat: false })
}

/// Gradient-free ascent on the Euler angles, confined to `±window` around
/// the start.
fn coordinate_search(start: [f64; 3], start_value: f64, window: f64, eval: impl Fn([f64; 3]) -> f64) -> ([f64; 3], f64) {
    let (mut x, mut best) = (start, start_value);
    let mut h = window / 2.0;
    while h > window / 64.0 {
        let mut improved = false;
        for i in 0..3 {
            for s in [1.0, -1.0] {
                let mut y = x;
                y[i] += s * h;
                if (y[i] - start[i]).abs() > window {
                    continue;
                }
                let v = eval(y);
                if v > best {
                    (x, best, improved) = (y, v, true);
                    break;
                }
            }
        }
        if !improved {
            h /= 2.0;
        }
    }
    (x, best)
}

/// Rotation taking `other` into the frame of `reference`, by correlation of
/// their interpolated log conformal factors.
pub fn align(
    reference: &SphericalTriangulation<f64>,
    other: &SphericalTriangulation<f64>,
    opts: &AlignOptions,
) -> Result<Alignment, RegistrationError> {
    let b = opts.bandwidth;
    if b == 0 {
        return Err(RegistrationError::ZeroBandwidth);
    }
    let fgrid = sample_to_grid(reference, b)?;
    let ggrid = sample_to_grid(other, b)?;
    // refinement evaluates off-grid; a located point always exists on a valid
    // triangulation, so fall back to 0 only on a broken one
    let g = |y: Vec3<f64>| other.interp_log_conformal(y).unwrap_or(0.0);
    align_grids(&fgrid, &ggrid, &g, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn rotation_invariants_are_checked() {
        assert!(Rotation::new([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]]).is_err());
        assert!(Rotation::new([[1.0, 1e-6, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).is_err());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let r = Rotation::random(&mut rng);
        assert!(Rotation::new(*r.matrix()).is_ok());
        let back = Rotation::from_row_major(r.to_row_major()).unwrap();
        assert_eq!(back, r);
        let [a, b, c] = r.euler_zyz();
        assert!(Rotation::from_euler_zyz(a, b, c).angle_to(&r) < 1e-9);
    }

    #[test]
    fn axis_angle_matches_euler_about_z() {
        let r = Rotation::from_axis_angle([0.0, 0.0, 2.0], 0.4);
        assert!(r.angle_to(&Rotation::from_euler_zyz(0.4, 0.0, 0.0)) < 1e-12);
        assert!((r.angle_to(&Rotation::identity()) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn flat_fields_return_identity() {
        let a = align_fields(|_| 1.0, |_| 2.0, &AlignOptions { bandwidth: 4, refine: false }).unwrap();
        assert!(a.flat);
        assert_eq!(a.rotation, Rotation::identity());
    }

    #[test]
    fn recovers_a_known_rotation() {
        let b = 8;
        let coeffs = sht::random_real_coefficients(b, 11);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..3 {
            let r0 = Rotation::random(&mut rng);
            // g(y) = f(R₀ y), so the aligning rotation is R₀
            let f = |x: Vec3<f64>| coeffs.evaluate(x).re;
            let g = |y: Vec3<f64>| coeffs.evaluate(r0.apply(y)).re;
            let a = align_fields(f, g, &AlignOptions { bandwidth: b, refine: false }).unwrap();
            assert!(a.rotation.angle_to(&r0) < PI / b as f64, "{}", a.rotation.angle_to(&r0));
            let refined = align_fields(f, g, &AlignOptions { bandwidth: b, refine: true }).unwrap();
            assert!(refined.correlation >= a.correlation - 1e-9);
            assert!(refined.rotation.angle_to(&r0) < PI / b as f64);
        }
    }
}
