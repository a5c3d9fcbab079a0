//! Surface datasets: intensity-driven face distributions, surface sampling,
//! and transport of samples between a mesh and its aligned sphere.

mod csv_io;

pub use csv_io::{read_dataset_csv, write_dataset_csv, DatasetRecord};

use crate::correspondence::{CorrespondenceError, SphericalTriangulation};
use crate::linalg::vec3::{self, Vec3};
use crate::mesh::{face_area, SurfacePoint, TriangleMesh};
use crate::registration::Rotation;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Probabilities assigned to the extreme intensities.
pub const P_MIN: f64 = 0.001;
pub const P_MAX: f64 = 0.999;

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error(transparent)]
    Correspondence(#[from] CorrespondenceError),
    #[error("face distribution has no positive weight")]
    NoPositiveWeight,
    #[error("weight {value} of face {face} is negative or not finite")]
    InvalidWeight { face: usize, value: f64 },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// A data point on the sphere with its source and precomputed `log Δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereSample {
    pub direction: Vec3<f64>,
    pub mesh_id: usize,
    pub source: SurfacePoint<f64>,
    pub log_area_correction: f64,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Sigmoid calibration of per-vertex intensities: the maximum maps to
/// [`P_MAX`], the minimum to [`P_MIN`]. Equal intensities give 0.5
/// everywhere (with a warning).
pub fn contact_probabilities(intensities: &[f64]) -> Vec<f64> {
    let (lo, hi) = intensities.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| (lo.min(t), hi.max(t)));
    if intensities.is_empty() {
        return Vec::new();
    }
    if !(hi > lo) {
        log::warn!("all intensities are equal; using probability 0.5 everywhere");
        return vec![0.5; intensities.len()];
    }
    let a = (logit(P_MAX) - logit(P_MIN)) / (hi - lo);
    let b = logit(P_MIN) - a * lo;
    intensities.iter().map(|&t| 1.0 / (1.0 + (-(a * t + b)).exp())).collect()
}

/// Unnormalized nonnegative weight per face.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceDistribution {
    weights: Vec<f64>,
}

impl FaceDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self, TransportError> {
        if let Some((face, &value)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
            return Err(TransportError::InvalidWeight { face, value });
        }
        if !weights.iter().any(|&w| w > 0.0) {
            return Err(TransportError::NoPositiveWeight);
        }
        Ok(FaceDistribution { weights })
    }

    /// Weights proportional to face area: samples are uniform by area.
    pub fn by_area(mesh: &TriangleMesh<f64>) -> Result<Self, TransportError> {
        Self::new((0..mesh.n_faces()).map(|f| face_area(mesh, f)).collect())
    }

    /// Face weights proportional to `area · density(centroid)`.
    pub fn from_density(mesh: &TriangleMesh<f64>, density: impl Fn(Vec3<f64>) -> f64) -> Result<Self, TransportError> {
        let w = (0..mesh.n_faces())
            .map(|f| {
                let [a, b, c] = mesh.face_positions(f);
                face_area(mesh, f) * density(vec3::combine([a, b, c], [1.0 / 3.0; 3]))
            })
            .collect();
        Self::new(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Face weight = mean of the three vertex probabilities.
pub fn face_distribution(mesh: &TriangleMesh<f64>, vertex_probs: &[f64]) -> Result<FaceDistribution, TransportError> {
    if vertex_probs.len() != mesh.n_vertices() {
        return Err(TransportError::LengthMismatch { expected: mesh.n_vertices(), got: vertex_probs.len() });
    }
    FaceDistribution::new(mesh.faces().iter().map(|t| t.iter().map(|&v| vertex_probs[v]).sum::<f64>() / 3.0).collect())
}

/// `n` surface points: face drawn with probability ∝ weight, then a uniform
/// point in it via `(1−√r₁, √r₁(1−r₂), √r₁ r₂)`. Stream: ChaCha8 seeded
/// with `seed`; each sample consumes the face draw, then `r₁`, then `r₂`.
pub fn sample_surface(
    mesh: &TriangleMesh<f64>,
    dist: &FaceDistribution,
    n: usize,
    seed: u64,
) -> Result<Vec<SurfacePoint<f64>>, TransportError> {
    if n == 0 {
        return Err(TransportError::NoSamples);
    }
    if dist.len() != mesh.n_faces() {
        return Err(TransportError::LengthMismatch { expected: mesh.n_faces(), got: dist.len() });
    }
    let index = WeightedIndex::new(&dist.weights).map_err(|_| TransportError::NoPositiveWeight)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let face = index.sample(&mut rng);
            let s = rng.random::<f64>().sqrt();
            let r2 = rng.random::<f64>();
            SurfacePoint::new(face, [1.0 - s, s * (1.0 - r2), s * r2])
        })
        .collect())
}

/// Maps surface points to the aligned sphere. The correction is evaluated
/// in the stored face at the unrotated direction.
pub fn to_sphere_dataset(
    points: &[SurfacePoint<f64>],
    tri: &SphericalTriangulation<f64>,
    rotation: &Rotation,
    mesh_id: usize,
) -> Result<Vec<SphereSample>, TransportError> {
    points
        .iter()
        .map(|sp| {
            let x = tri.from_surface(sp)?;
            Ok(SphereSample {
                direction: rotation.apply(x),
                mesh_id,
                source: *sp,
                log_area_correction: tri.change_of_area(x, sp.face).ln(),
            })
        })
        .collect()
}

/// Surface point of an aligned-sphere direction: undo the rotation, then
/// locate and reuse the inscribed barycentric coordinates.
pub fn from_sphere(
    x: Vec3<f64>,
    tri: &SphericalTriangulation<f64>,
    rotation: &Rotation,
) -> Result<SurfacePoint<f64>, TransportError> {
    Ok(tri.to_surface(rotation.apply_inverse(x))?)
}

/// `log Δ` at an aligned-sphere direction (locates the face).
pub fn log_area_correction_at(
    x: Vec3<f64>,
    tri: &SphericalTriangulation<f64>,
    rotation: &Rotation,
) -> Result<f64, TransportError> {
    let y = rotation.apply_inverse(x);
    let f = tri.locate(y)?;
    Ok(tri.change_of_area(y, f).ln())
}

/// Concatenates datasets ordered by mesh id, then original index.
pub fn pool(datasets: &[Vec<SphereSample>]) -> Vec<SphereSample> {
    let mut out: Vec<SphereSample> = datasets.iter().flatten().copied().collect();
    out.sort_by_key(|s| s.mesh_id);
    out
}
