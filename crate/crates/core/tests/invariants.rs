use cgm_core::conformal::{spherical_parameterize, weighted_center, FlattenError, ParameterizeOptions};
use cgm_core::correspondence::SphericalTriangulation;
use cgm_core::flows::Evaluation;
use cgm_core::linalg::vec3;
use cgm_core::mesh::generators as gen;
use cgm_core::mesh::geometry::vertex_area_weights;
use cgm_core::mesh::metric::satisfies_triangle_inequality;
use cgm_core::mesh::{cotan_laplacian, DiscreteMetric};
use cgm_core::registration::Rotation;
use cgm_core::transport::{contact_probabilities, P_MAX, P_MIN};
use cgm_core::TriangleMesh;
use proptest::prelude::*;
use std::f64::consts::PI;

fn axis() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-1.0..1.0f64).prop_filter("non-degenerate axis", |a| vec3::norm(*a) > 0.1)
}

fn blob(freq: usize, amplitude: f64, stretch: f64, axis: [f64; 3], angle: f64) -> TriangleMesh {
    let base = gen::rotate(&gen::geodesic_sphere_freq::<f64>(freq), &gen::axis_angle_matrix(axis, angle));
    gen::blob(&base, amplitude, stretch)
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn metric_and_laplacian(freq in 1usize..6, amp in 0.0..0.3, stretch in 1.0..2.0, ax in axis(), angle in 0.0..3.0) {
        let m = blob(freq, amp, stretch, ax, angle);
        prop_assert_eq!(m.euler_characteristic(), 2);
        let metric = DiscreteMetric::from_mesh(&m).unwrap();
        for f in 0..m.n_faces() {
            prop_assert!(satisfies_triangle_inequality(metric.face_lengths(m.topology(), f)));
        }
        let l = cotan_laplacian(m.topology(), &metric).unwrap();
        prop_assert!(max_abs(l.mul_vec(&vec![1.0; m.n_vertices()])) < 1e-10);
        for i in 0..m.n_vertices() {
            for (j, v) in l.row(i) {
                prop_assert!((v - l.get(j, i)).abs() < 1e-12);
            }
        }
    }

    /// Either a valid parameterization or the documented abort when the
    /// flattened metric leaves the triangle inequality (no edge flips).
    #[test]
    fn parameterization_invariants(freq in 2usize..6, amp in 0.0..0.3, stretch in 1.0..2.0, ax in axis(), angle in 0.0..3.0) {
        let m = blob(freq, amp, stretch, ax, angle);
        let p = match spherical_parameterize(&m, &ParameterizeOptions::default()) {
            Ok(p) => p,
            Err(FlattenError::TriangleInequality { faces, .. }) => {
                prop_assert!(!faces.is_empty() && faces.iter().all(|&f| f < m.n_faces()));
                return Ok(());
            }
            Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
        };
        prop_assert!(max_abs(p.positions.iter().map(|x| vec3::norm(*x) - 1.0)) <= 1e-9);
        prop_assert!(max_abs(p.conformal_residuals(&m)) <= 1e-6);
        prop_assert!(p.report.max_angle_defect <= 1e-10);
        prop_assert!(vec3::norm(weighted_center(&p.positions, &vertex_area_weights(&m))) <= 1e-6);
        let tri = SphericalTriangulation::new(&m, &p).unwrap();
        prop_assert!((tri.total_spherical_area() - 4.0 * PI).abs() <= 1e-6);
        let u_sum: f64 = p.stages.iter().map(|s| s.u[0]).sum();
        prop_assert!((u_sum - p.u[0]).abs() < 1e-9);
    }

    /// The parameterization depends only on edge lengths: rigid motions leave
    /// it unchanged and a uniform scale s shifts u by −log s.
    #[test]
    fn similarity_invariance(freq in 2usize..5, amp in 0.0..0.3, s in 0.2..5.0, ax in axis(), angle in 0.0..3.0) {
        let m = blob(freq, amp, 1.3, [0.0, 0.0, 1.0], 0.0);
        let opts = ParameterizeOptions::default();
        let p = spherical_parameterize(&m, &opts).unwrap();
        let moved = gen::rotate(&m.scaled(s), &gen::axis_angle_matrix(ax, angle));
        let q = spherical_parameterize(&moved, &opts).unwrap();
        prop_assert_eq!(p.removed_vertex, q.removed_vertex);
        for v in 0..m.n_vertices() {
            prop_assert!(vec3::dist(p.positions[v], q.positions[v]) < 1e-7);
            prop_assert!((q.u[v] - (p.u[v] - s.ln())).abs() < 1e-7);
        }
    }

    #[test]
    fn contact_probabilities_are_calibrated(v in prop::collection::vec(-50.0..50.0f64, 2..40)) {
        let p = contact_probabilities(&v);
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        for (i, &pi) in p.iter().enumerate() {
            prop_assert!((P_MIN - 1e-12..=P_MAX + 1e-12).contains(&pi));
            if v[i] == lo { prop_assert!((pi - P_MIN).abs() < 1e-12 || hi == lo); }
            if v[i] == hi { prop_assert!((pi - P_MAX).abs() < 1e-12 || hi == lo); }
            for j in 0..v.len() {
                if v[i] < v[j] { prop_assert!(pi <= p[j]); }
            }
        }
    }

    #[test]
    fn rotation_algebra(a in -PI..PI, b in 0.01..3.13, c in -PI..PI, ax in axis(), angle in 0.0..3.1) {
        let r = Rotation::from_euler_zyz(a, b, c);
        let [x, y, z] = r.euler_zyz();
        prop_assert!(Rotation::from_euler_zyz(x, y, z).angle_to(&r) < 1e-7);
        prop_assert!(r.compose(&r.inverse()).angle_to(&Rotation::identity()) < 1e-7);
        let s = Rotation::from_axis_angle(ax, angle);
        prop_assert!((s.angle_to(&Rotation::identity()) - angle).abs() < 1e-7);
        prop_assert!((r.angle_to(&s) - s.angle_to(&r)).abs() < 1e-9);
        let p = vec3::normalize(ax);
        prop_assert!(vec3::dist(r.apply_inverse(r.apply(p)), p) < 1e-12);
    }

    #[test]
    fn evaluation_is_shift_equivariant(v in prop::collection::vec(-10.0..10.0f64, 1..60), c in -100.0..100.0f64) {
        let e = Evaluation::from_values(&v);
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let f = Evaluation::from_values(&shifted);
        prop_assert!((f.mean - (e.mean + c)).abs() < 1e-9);
        prop_assert!((f.stderr - e.stderr).abs() < 1e-9);
        prop_assert_eq!(f.n, v.len());
    }
}

/// A coarse, strongly stretched blob whose flattened metric breaks the
/// triangle inequality; found by `parameterization_invariants`.
#[test]
fn coarse_stretched_blob_aborts_with_faces() {
    let m = blob(2, 0.1682492974826216, 1.9431308881097176, [0.4263833496393833, -0.8495230001662862, -0.05005572298636034], 2.8939780041962813);
    match spherical_parameterize(&m, &ParameterizeOptions::default()) {
        Err(FlattenError::TriangleInequality { faces, .. }) => assert!(!faces.is_empty()),
        other => panic!("expected a triangle inequality abort, got {other:?}"),
    }
    // the same surface at a finer tessellation parameterizes
    assert!(spherical_parameterize(&blob(4, 0.1682492974826216, 1.9431308881097176, [0.43, -0.85, -0.05], 2.89), &ParameterizeOptions::default()).is_ok());
}

/// Stopping Newton right at the defect tolerance left this layout 1.09e-8
/// off on one edge.
#[test]
fn stretched_blob_lays_out_within_tolerance() {
    let m = blob(4, 0.06526868243905087, 1.9111127967926058, [-0.2719984428948189, -0.9875240811596037, 0.9241438078821994], 1.5712308983363819);
    let p = spherical_parameterize(&m, &ParameterizeOptions::default()).unwrap();
    assert!(p.report.max_angle_defect < 1e-13);
    assert!(p.report.max_conformal_residual < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sphere_surface_round_trip(d in prop::array::uniform3(-1.0..1.0f64)) {
        prop_assume!(vec3::norm(d) > 0.1);
        let x = vec3::normalize(d);
        let m = blob(4, 0.25, 1.6, [0.3, 0.2, 1.0], 0.5);
        let p = spherical_parameterize(&m, &ParameterizeOptions::default()).unwrap();
        let tri = SphericalTriangulation::new(&m, &p).unwrap();
        let sp = tri.to_surface(x).unwrap();
        prop_assert!(sp.is_valid(1e-9));
        prop_assert!(vec3::dist(tri.from_surface(&sp).unwrap(), x) < 1e-10);
        let f = tri.locate(x).unwrap();
        prop_assert!(tri.change_of_area(x, f) > 0.0);
    }
}
