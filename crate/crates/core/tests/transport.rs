use cgm_core::conformal::{spherical_parameterize, ParameterizeOptions};
use cgm_core::correspondence::SphericalTriangulation;
use cgm_core::linalg::vec3;
use cgm_core::mesh::{barycentric_point, generators as gen, total_area};
use cgm_core::registration::Rotation;
use cgm_core::transport::*;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

fn self_inscribed_tetra() -> (cgm_core::TriangleMesh, SphericalTriangulation<f64>) {
    let m = gen::tetrahedron::<f64>();
    let tri = SphericalTriangulation::from_parts(&m, m.positions().to_vec(), vec![0.0; 4]).unwrap();
    (m, tri)
}

fn uniform_sphere(rng: &mut impl Rng) -> [f64; 3] {
    vec3::normalize(std::array::from_fn(|_| StandardNormal.sample(rng)))
}

#[test]
fn uniform_tetra_face_counts() {
    let (m, _) = self_inscribed_tetra();
    let n = 40000;
    let s = sample_surface(&m, &FaceDistribution::new(vec![1.0; 4]).unwrap(), n, 5).unwrap();
    let sigma = (n as f64 * 0.25 * 0.75).sqrt();
    for f in 0..4 {
        let c = s.iter().filter(|p| p.face == f).count() as f64;
        assert!((c - n as f64 / 4.0).abs() < 3.0 * sigma, "face {f}: {c}");
    }
    for k in 0..3 {
        let mean = s.iter().map(|p| p.bary[k]).sum::<f64>() / n as f64;
        assert!((mean - 1.0 / 3.0).abs() < 0.01);
    }
}

#[test]
fn centroid_correction_and_vertices() {
    let (m, tri) = self_inscribed_tetra();
    let c = cgm_core::SurfacePoint::new(1, [1.0 / 3.0; 3]);
    let d = to_sphere_dataset(&[c], &tri, &Rotation::identity(), 0).unwrap();
    assert!((d[0].log_area_correction - (1.0f64 / 9.0).ln()).abs() < 1e-12);

    let r = Rotation::from_axis_angle([1.0, 2.0, 0.5], 0.8);
    let v = m.faces()[2][1];
    let at_vertex = to_sphere_dataset(&[cgm_core::SurfacePoint::new(2, [0.0, 1.0, 0.0])], &tri, &r, 0).unwrap();
    assert!(vec3::dist(at_vertex[0].direction, r.apply(m.position(v))) < 1e-14);
    let back = from_sphere(r.apply(m.position(v)), &tri, &r).unwrap();
    let p = barycentric_point(&m, &back);
    assert!(vec3::dist(p, m.position(v)) < 1e-12);
}

#[test]
fn round_trip_through_the_sphere() {
    let mesh = gen::blob(&gen::geodesic_sphere_freq(5), 0.25, 1.6);
    let p = spherical_parameterize(&mesh, &ParameterizeOptions::default()).unwrap();
    let tri = SphericalTriangulation::new(&mesh, &p).unwrap();
    let r = Rotation::from_axis_angle([0.3, -1.0, 0.2], 2.0);
    let pts = sample_surface(&mesh, &FaceDistribution::by_area(&mesh).unwrap(), 10_000, 8).unwrap();
    let data = to_sphere_dataset(&pts, &tri, &r, 4).unwrap();
    for (s, sp) in data.iter().zip(&pts) {
        assert!((vec3::norm(s.direction) - 1.0).abs() < 1e-12);
        assert!(s.log_area_correction.is_finite());
        let back = from_sphere(s.direction, &tri, &r).unwrap();
        let (a, b) = (barycentric_point(&mesh, &back), barycentric_point(&mesh, sp));
        assert!(vec3::dist(a, b) < 1e-10);
        if back.face == sp.face {
            for k in 0..3 {
                assert!((back.bary[k] - sp.bary[k]).abs() < 1e-9);
            }
        }
        let again = to_sphere_dataset(&[back], &tri, &r, 4).unwrap();
        assert!(vec3::dist(again[0].direction, s.direction) < 1e-10);
    }
}

#[test]
fn pushforward_of_uniform_sphere_matches_spherical_areas() {
    let (_, tri) = self_inscribed_tetra();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let n = 100_000;
    let mut counts = [0usize; 4];
    for _ in 0..n {
        counts[from_sphere(uniform_sphere(&mut rng), &tri, &Rotation::identity()).unwrap().face] += 1;
    }
    let chi2: f64 = (0..4)
        .map(|f| {
            let e = n as f64 * tri.spherical_area(f) / (4.0 * std::f64::consts::PI);
            (counts[f] as f64 - e).powi(2) / e
        })
        .sum();
    // 3 degrees of freedom: mean 3, std √6
    assert!(chi2 < 3.0 + 3.0 * 6f64.sqrt(), "chi2 = {chi2}");
}

/// Area factor of the map sphere → mesh by central differences in a
/// tangent frame at `x`.
fn fd_area_factor(mesh: &cgm_core::TriangleMesh, tri: &SphericalTriangulation<f64>, x: [f64; 3], f: usize) -> f64 {
    let e1 = vec3::normalize(vec3::orthogonal(x));
    let e2 = vec3::cross(x, e1);
    let h = 1e-5;
    let map = |y: [f64; 3]| {
        let b = tri.barycentric(vec3::normalize(y), f);
        vec3::combine(mesh.face_positions(f), b)
    };
    let d = |e: [f64; 3]| vec3::scale(vec3::sub(map(vec3::add(x, vec3::scale(e, h))), map(vec3::sub(x, vec3::scale(e, h)))), 0.5 / h);
    vec3::norm(vec3::cross(d(e1), d(e2)))
}

#[test]
fn change_of_area_matches_finite_differences() {
    let mesh = gen::blob(&gen::geodesic_sphere_freq(5), 0.25, 1.6);
    let p = spherical_parameterize(&mesh, &ParameterizeOptions::default()).unwrap();
    let tri = SphericalTriangulation::new(&mesh, &p).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
    for _ in 0..2000 {
        let x = uniform_sphere(&mut rng);
        let f = tri.locate(x).unwrap();
        let exact = tri.change_of_area(x, f);
        let fd = fd_area_factor(&mesh, &tri, x, f);
        assert!((exact - fd).abs() / exact < 1e-5, "{exact} vs {fd}");
    }
}

#[test]
fn monte_carlo_area_identity() {
    let (m, tri) = self_inscribed_tetra();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let n = 200_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let x = uniform_sphere(&mut rng);
        sum += tri.change_of_area(x, tri.locate(x).unwrap());
    }
    let estimate = 4.0 * std::f64::consts::PI * sum / n as f64;
    let target = 8.0 * 3f64.sqrt() / 3.0;
    assert!((total_area(&m) - target).abs() < 1e-12);
    assert!((estimate - target).abs() / target < 0.01, "{estimate}");
}

#[test]
fn csv_artifact_is_deterministic() {
    let mesh = gen::icosahedron::<f64>();
    let p = spherical_parameterize(&mesh, &ParameterizeOptions::default()).unwrap();
    let tri = SphericalTriangulation::new(&mesh, &p).unwrap();
    let make = || {
        let pts = sample_surface(&mesh, &FaceDistribution::by_area(&mesh).unwrap(), 500, 1).unwrap();
        let d = to_sphere_dataset(&pts, &tri, &Rotation::identity(), 0).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &d).unwrap();
        (buf, d)
    };
    let (a, d) = make();
    let (b, _) = make();
    assert_eq!(a, b);
    assert_eq!(read_dataset_csv(&a[..]).unwrap(), d);
}
