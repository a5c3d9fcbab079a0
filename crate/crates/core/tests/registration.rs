use cgm_core::conformal::{spherical_parameterize, ParameterizeOptions};
use cgm_core::correspondence::SphericalTriangulation;
use cgm_core::linalg::vec3;
use cgm_core::mesh::generators as gen;
use cgm_core::registration::{align, sample_to_grid, AlignOptions, Rotation};
use rand::SeedableRng;
use std::f64::consts::PI;

fn blob() -> cgm_core::TriangleMesh {
    gen::blob(&gen::geodesic_sphere_freq(6), 0.25, 1.6)
}

#[test]
fn self_alignment_is_identity() {
    let mesh = blob();
    let p = spherical_parameterize(&mesh, &ParameterizeOptions::default()).unwrap();
    let tri = SphericalTriangulation::new(&mesh, &p).unwrap();
    let opts = AlignOptions { bandwidth: 16, refine: false };
    let a = align(&tri, &tri, &opts).unwrap();
    assert!(!a.flat);
    assert!(a.rotation.angle_to(&Rotation::identity()) < PI / 16.0);
}

#[test]
fn recovers_rigid_rotation_of_the_sphere() {
    let mesh = blob();
    let p = spherical_parameterize(&mesh, &ParameterizeOptions::default()).unwrap();
    let tri = SphericalTriangulation::new(&mesh, &p).unwrap();
    let opts = AlignOptions { bandwidth: 16, refine: false };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
    for _ in 0..3 {
        let r0 = Rotation::random(&mut rng);
        // other sphere = R₀ᵀ · reference, so R₀ carries it back
        let moved: Vec<_> = p.positions.iter().map(|&x| r0.apply_inverse(x)).collect();
        let other = SphericalTriangulation::from_parts(&mesh, moved, p.u.clone()).unwrap();
        let a = align(&tri, &other, &opts).unwrap();
        assert!(a.rotation.angle_to(&r0) < PI / 16.0, "{}", a.rotation.angle_to(&r0));
    }
}

#[test]
fn independent_parameterizations_align_vertices() {
    let mesh = blob();
    let p1 = spherical_parameterize(&mesh, &ParameterizeOptions::default()).unwrap();
    let other_vertex = (0..mesh.n_vertices())
        .filter(|&v| v != p1.removed_vertex && mesh.topology().degree(v) == 5)
        .find_map(|v| {
            let opts = ParameterizeOptions { removed_vertex: Some(v), ..Default::default() };
            spherical_parameterize(&mesh, &opts).ok()
        })
        .expect("some alternative removed vertex parameterizes");
    let p2 = other_vertex;
    assert_ne!(p1.removed_vertex, p2.removed_vertex);
    let t1 = SphericalTriangulation::new(&mesh, &p1).unwrap();
    let t2 = SphericalTriangulation::new(&mesh, &p2).unwrap();
    let b = 16;
    let a = align(&t1, &t2, &AlignOptions { bandwidth: b, refine: false }).unwrap();
    let mut d: Vec<f64> = (0..mesh.n_vertices())
        .map(|v| vec3::dot(p1.positions[v], a.rotation.apply(p2.positions[v])).clamp(-1.0, 1.0).acos())
        .collect();
    d.sort_by(f64::total_cmp);
    let median = d[d.len() / 2];
    assert!(median < 2.0 * PI / b as f64, "median {median}");
}

#[test]
fn sampled_field_is_finite() {
    let mesh = gen::tetrahedron();
    let p = spherical_parameterize(&mesh, &ParameterizeOptions::default()).unwrap();
    let tri = SphericalTriangulation::new(&mesh, &p).unwrap();
    let g = sample_to_grid(&tri, 8).unwrap();
    assert_eq!(g.values().len(), 256);
    assert!(g.values().iter().all(|v| v.is_finite()));
}
