//! Procedural meshes used by tests, benchmarks and the bundled test set.

use std::collections::HashMap;

use super::TriangleMesh;
use crate::linalg::vec3::{self, Mat3};
use crate::scalar::Real;

fn build<T: Real>(positions: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> TriangleMesh<T> {
    let positions = positions.into_iter().map(|p| p.map(T::c)).collect();
    TriangleMesh::new(positions, faces).expect("generator produces a valid mesh")
}

/// Flip faces so their normals point away from the origin.
fn orient_outward(positions: &[[f64; 3]], faces: &mut [[usize; 3]]) {
    for f in faces.iter_mut() {
        let [a, b, c] = f.map(|v| positions[v]);
        let n = vec3::cross(vec3::sub(b, a), vec3::sub(c, a));
        let centroid = vec3::add(vec3::add(a, b), c);
        if vec3::dot(n, centroid) < 0.0 {
            f.swap(1, 2);
        }
    }
}

/// Regular tetrahedron inscribed in the unit sphere.
pub fn tetrahedron<T: Real>() -> TriangleMesh<T> {
    let s = 1.0 / 3f64.sqrt();
    let p = vec![[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]];
    let mut f = vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    orient_outward(&p, &mut f);
    build(p, f)
}

fn icosahedron_raw() -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let p: Vec<[f64; 3]> = raw.iter().map(|&v| vec3::normalize(v)).collect();
    let mut f = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    orient_outward(&p, &mut f);
    (p, f)
}

/// Regular icosahedron with vertices on the unit sphere.
pub fn icosahedron<T: Real>() -> TriangleMesh<T> {
    let (p, f) = icosahedron_raw();
    build(p, f)
}

/// Class-I geodesic sphere: every icosahedron face split into `freq²`
/// triangles, vertices pushed to the unit sphere. `freq = 2^L` matches the
/// level-`L` icosphere (`10·freq² + 2` vertices).
pub fn geodesic_sphere<T: Real>(level: u32) -> TriangleMesh<T> {
    geodesic_sphere_freq(1usize << level)
}

pub fn geodesic_sphere_freq<T: Real>(freq: usize) -> TriangleMesh<T> {
    assert!(freq >= 1);
    let (base, base_faces) = icosahedron_raw();
    let mut index: HashMap<Vec<(usize, usize)>, usize> = HashMap::new();
    let mut positions: Vec<[f64; 3]> = Vec::new();
    let mut faces = Vec::new();
    let n = freq;
    for tri in &base_faces {
        let mut id = |i: usize, j: usize| -> usize {
            let k = n - i - j;
            let mut key: Vec<(usize, usize)> =
                [(tri[0], i), (tri[1], j), (tri[2], k)].into_iter().filter(|&(_, w)| w > 0).collect();
            key.sort_unstable();
            *index.entry(key).or_insert_with(|| {
                let w = [i as f64, j as f64, k as f64];
                let p = vec3::combine([base[tri[0]], base[tri[1]], base[tri[2]]], w.map(|x| x / n as f64));
                positions.push(vec3::normalize(p));
                positions.len() - 1
            })
        };
        // (i, j) are weights on corners 0 and 1; corner 2 takes the rest
        for i in 0..n {
            for j in 0..(n - i) {
                let a = id(i + 1, j);
                let b = id(i, j + 1);
                let c = id(i, j);
                faces.push([c, a, b]);
                if i + j + 1 < n {
                    let d = id(i + 1, j + 1);
                    faces.push([a, d, b]);
                }
            }
        }
    }
    orient_outward(&positions, &mut faces);
    build(positions, faces)
}

/// Latitude-longitude sphere; the poles have valence `n_lon`.
pub fn uv_sphere<T: Real>(n_lon: usize, n_lat: usize) -> TriangleMesh<T> {
    assert!(n_lon >= 3 && n_lat >= 2);
    let mut p = vec![[0.0, 0.0, 1.0]];
    for i in 1..n_lat {
        let theta = std::f64::consts::PI * i as f64 / n_lat as f64;
        for j in 0..n_lon {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / n_lon as f64;
            p.push([theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]);
        }
    }
    p.push([0.0, 0.0, -1.0]);
    let south = p.len() - 1;
    let ring = |i: usize, j: usize| 1 + (i - 1) * n_lon + (j % n_lon);
    let mut f = Vec::new();
    for j in 0..n_lon {
        f.push([0, ring(1, j), ring(1, j + 1)]);
        f.push([south, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)]);
    }
    for i in 1..(n_lat - 1) {
        for j in 0..n_lon {
            f.push([ring(i, j), ring(i + 1, j), ring(i + 1, j + 1)]);
            f.push([ring(i, j), ring(i + 1, j + 1), ring(i, j + 1)]);
        }
    }
    orient_outward(&p, &mut f);
    build(p, f)
}

/// Triangulated torus on an `n × m` grid.
pub fn torus<T: Real>(n: usize, m: usize, major: f64, minor: f64) -> TriangleMesh<T> {
    let mut p = Vec::new();
    for i in 0..n {
        let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        for j in 0..m {
            let b = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            let r = major + minor * b.cos();
            p.push([r * a.cos(), r * a.sin(), minor * b.sin()]);
        }
    }
    let id = |i: usize, j: usize| (i % n) * m + (j % m);
    let mut f = Vec::new();
    for i in 0..n {
        for j in 0..m {
            f.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            f.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    build(p, f)
}

/// Equilateral triangle with unit edges.
pub fn single_triangle<T: Real>() -> TriangleMesh<T> {
    build(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, 0.75f64.sqrt(), 0.0]], vec![[0, 1, 2]])
}

/// Smooth star-shaped surface: radius along unit direction `d`.
pub fn blob_radius(d: [f64; 3], amplitude: f64) -> f64 {
    let [x, y, z] = d;
    let bumps = 0.9 * x * y + 0.7 * (z * z - 1.0 / 3.0) + 0.6 * x * x * x - 0.5 * y * z * z + 0.4 * x * z;
    1.0 + amplitude * bumps
}

/// Push each vertex direction of `base` onto the blob surface and stretch
/// along x. Different tessellations of the unit sphere give distinct meshes
/// of the same underlying surface.
pub fn blob<T: Real>(base: &TriangleMesh<T>, amplitude: f64, stretch_x: f64) -> TriangleMesh<T> {
    base.map_positions(|p| {
        let d = vec3::normalize(p.map(|x| x.f64()));
        let r = blob_radius(d, amplitude);
        [T::c(r * d[0] * stretch_x), T::c(r * d[1]), T::c(r * d[2])]
    })
}

pub fn rotate<T: Real>(mesh: &TriangleMesh<T>, r: &Mat3<T>) -> TriangleMesh<T> {
    mesh.map_positions(|p| vec3::mat_vec(r, p))
}

/// Planar fan of `n` unit equilateral-ish triangles around vertex 0 (a disk
/// with one interior vertex). `n = 6` is flat; `n = 5` is a cone.
pub fn fan<T: Real>(n: usize) -> TriangleMesh<T> {
    let mut p = vec![[0.0, 0.0, 0.0]];
    for k in 0..n {
        let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        p.push([a.cos(), a.sin(), 0.0]);
    }
    let f = (0..n).map(|k| [0, 1 + k, 1 + (k + 1) % n]).collect();
    build(p, f)
}

/// Grid disk of `(nx+1)(ny+1)` vertices on the unit square with alternating
/// diagonals, lifted by a smooth height field.
pub fn bumpy_grid<T: Real>(nx: usize, ny: usize, height: f64) -> TriangleMesh<T> {
    let mut p = Vec::new();
    for i in 0..=nx {
        for j in 0..=ny {
            let (x, y) = (i as f64 / nx as f64, j as f64 / ny as f64);
            let z = height * (3.0 * x).sin() * (2.0 * y + 0.5).cos();
            p.push([x, y, z]);
        }
    }
    let id = |i: usize, j: usize| i * (ny + 1) + j;
    let mut f = Vec::new();
    for i in 0..nx {
        for j in 0..ny {
            if (i + j) % 2 == 0 {
                f.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                f.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            } else {
                f.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
                f.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
    }
    build(p, f)
}

/// Rodrigues rotation matrix about a (not necessarily unit) axis.
pub fn axis_angle_matrix(axis: [f64; 3], angle: f64) -> Mat3<f64> {
    let [x, y, z] = vec3::normalize(axis);
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    [
        [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
        [y * x * t + z * s, c + y * y * t, y * z * t - x * s],
        [z * x * t - y * s, z * y * t + x * s, c + z * z * t],
    ]
}

pub const BLOB_AMPLITUDE: f64 = 0.25;
pub const BLOB_STRETCH: f64 = 1.6;

/// The bundled conformal test set, in a fixed order.
pub fn test_set() -> Vec<(&'static str, TriangleMesh<f64>)> {
    let coarse = rotate(&geodesic_sphere_freq::<f64>(4), &axis_angle_matrix([1.0, 2.0, 3.0], 0.7));
    vec![
        ("tetrahedron", tetrahedron()),
        ("icosahedron", icosahedron()),
        ("icosphere1", geodesic_sphere(1)),
        ("icosphere2", geodesic_sphere(2)),
        ("icosphere3", geodesic_sphere(3)),
        ("blob", blob(&geodesic_sphere_freq(8), BLOB_AMPLITUDE, BLOB_STRETCH)),
        ("blob_decimated", blob(&coarse, BLOB_AMPLITUDE, BLOB_STRETCH)),
        ("stress", uv_sphere(24, 12)),
    ]
}

/// Five distinct tessellations of the same stretched blob surface:
/// geodesic frequencies 6 to 10, each tessellation turned by its own
/// rotation before being pushed onto the surface.
pub fn blob_family() -> Vec<(String, TriangleMesh<f64>)> {
    let axes = [[0.3, -1.0, 0.5], [1.0, 0.2, -0.4], [-0.6, 0.7, 1.0], [0.9, 0.9, 0.1], [-0.2, -0.5, 0.8]];
    (0..5)
        .map(|k| {
            let base = rotate(&geodesic_sphere_freq::<f64>(6 + k), &axis_angle_matrix(axes[k], 0.4 + 0.5 * k as f64));
            (format!("blob_family_{}", k + 1), blob(&base, BLOB_AMPLITUDE, BLOB_STRETCH))
        })
        .collect()
}

/// Synthetic contact intensity concentrated around the surface direction
/// `center`: `exp(κ (d̂·ĉ − 1))` at each vertex direction `d̂`.
pub fn cap_intensity(mesh: &TriangleMesh<f64>, center: [f64; 3], kappa: f64) -> Vec<f64> {
    let c = vec3::normalize(center);
    mesh.positions().iter().map(|&p| (kappa * (vec3::dot(vec3::normalize(p), c) - 1.0)).exp()).collect()
}
