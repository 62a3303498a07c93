use helfrich_core::correction::*;
use helfrich_core::curvature::helfrich_energy;
use helfrich_core::{shapes, Constraints, TriMesh, Vec3};
use nalgebra::Vector2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if v.norm() > 0.1 && v.norm() <= 1.0 {
            return v.normalize();
        }
    }
}

fn ellipsoid(level: u32) -> TriMesh {
    shapes::icosphere(level, 1.0)
        .map_positions(|p| Vec3::new(1.1 * p.x, p.y, 0.7 * p.z))
        .unwrap()
}

fn random_pair(mesh: &TriMesh, rng: &mut ChaCha8Rng) -> CorrectionPair {
    let normals = vertex_normals(mesh);
    let n = mesh.num_vertices();
    let a = rng.gen_range(0..n);
    let b = rng.gen_range(0..n);
    let x = BumpField::new(mesh.position(a), rng.gen_range(0.3..0.7), normals[a]);
    let y = BumpField::new(mesh.position(b), rng.gen_range(0.3..0.7), random_unit(rng));
    CorrectionPair::new(mesh, x, y)
}

#[test]
fn analytic_jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let meshes = [
        shapes::icosphere(2, 1.0),
        shapes::icosphere(3, 1.0),
        ellipsoid(2),
        ellipsoid(3),
        shapes::torus(1.0, 0.4, 32, 16),
    ];
    for k in 0..10 {
        let m = &meshes[k % meshes.len()];
        let pair = random_pair(m, &mut rng);
        let fd = jacobian_fd(m, &pair, &Vector2::zeros(), 1e-5);
        for col in 0..2 {
            let (a, b) = (pair.jacobian0.column(col), fd.column(col));
            assert!((a - b).norm() <= 1e-6 * a.norm().max(1e-3), "pair {k} column {col}: {a} vs {b}");
        }
    }
}

#[test]
fn constraint_map_at_origin_is_current_values() {
    let m = ellipsoid(2);
    let pair = random_pair(&m, &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(constraint_map(&m, &pair, 0.0, 0.0), (m.area(), m.enclosed_volume()));
}

#[test]
fn constraint_map_is_lipschitz_near_origin() {
    let m = ellipsoid(3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pair = random_pair(&m, &mut rng);
    let f0 = Vector2::new(m.area(), m.enclosed_volume());
    let mut c: f64 = 0.0;
    for _ in 0..100 {
        let z = Vector2::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
        let (a, v) = constraint_map(&m, &pair, z.x, z.y);
        c = c.max((Vector2::new(a, v) - f0).norm() / z.norm());
    }
    // the linearization bounds the slope up to the curvature of F over the ball
    let linear = pair.jacobian0.norm();
    assert!(c.is_finite() && c <= 1.5 * linear, "{c} vs {linear}");
}

#[test]
fn antipodal_normal_bumps_are_degenerate() {
    let m = shapes::icosphere(3, 1.0);
    let normals = vertex_normals(&m);
    let north = (0..m.num_vertices())
        .max_by(|&a, &b| m.position(a).z.total_cmp(&m.position(b).z))
        .unwrap();
    let south = (0..m.num_vertices())
        .min_by(|&a, &b| m.position(a).z.total_cmp(&m.position(b).z))
        .unwrap();
    let pair = CorrectionPair::new(
        &m,
        BumpField::new(m.position(north), 0.5, normals[north]),
        BumpField::new(m.position(south), 0.5, normals[south]),
    );
    // equal columns by the antipodal symmetry of the icosphere
    let (cx, cy) = (pair.jacobian0.column(0), pair.jacobian0.column(1));
    assert!((cx - cy).norm() <= 1e-12 * cx.norm(), "{cx} {cy}");
    let scale = cx.norm_squared();
    assert!(pair.det_jacobian0().abs() <= 1e-12 * scale);
    let picked = pick_fields(&m, None, &PickOptions::default()).unwrap();
    assert!(picked.det_jacobian0().abs() > 1e3 * pair.det_jacobian0().abs().max(1e-15 * scale));
    assert!(picked.jacobian0[(1, 0)] != 0.0 && picked.jacobian0[(1, 1)] != 0.0);
}

#[test]
fn solve_reaches_targets_inside_the_guaranteed_ball() {
    let m = ellipsoid(3);
    let opts = SolveOptions {
        tol: 1e-10,
        ..Default::default()
    };
    let pair = pick_fields(&m, None, &PickOptions::default()).unwrap();
    let region = trust_region(&m, &pair, &opts).unwrap();
    assert!(region.guaranteed > 0.0 && region.oscillation <= opts.delta_target);
    for frac in [0.1, 0.5, 0.9] {
        let dz = Vector2::new(0.8, -0.6) * (frac * region.guaranteed);
        let df = pair.jacobian0 * dz;
        let targets = Constraints::new(m.area() + df.x, m.enclosed_volume() + df.y, 0.0).unwrap();
        let c = solve_correction(&m, &pair, &targets, &opts).unwrap();
        assert!(c.report.iterations <= 20);
        assert!(c.report.residual_area <= 1e-10 && c.report.residual_vol <= 1e-10);
        // the solution is the parameter the targets were generated from, to first order
        assert!((Vector2::new(c.s, c.t) - dz).norm() <= 0.5 * dz.norm(), "{frac}: ({}, {}) vs {dz}", c.s, c.t);
        for w in c.residual_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
    let far = Vector2::new(0.8, -0.6) * (10.0 * region.guaranteed);
    let df = pair.jacobian0 * far;
    let targets = Constraints::new(m.area() + df.x, m.enclosed_volume() + df.y, 0.0).unwrap();
    assert!(matches!(
        solve_correction(&m, &pair, &targets, &opts),
        Err(helfrich_core::Error::OutOfRadius { .. })
    ));
}

#[test]
fn curvature_drift_is_locally_lipschitz() {
    let m = shapes::icosphere(3, 1.0);
    let pair = pick_fields(&m, None, &PickOptions::default()).unwrap();
    let small = curvature_drift_bound(&m, &pair, 0.1, 25, 0.0).unwrap();
    let large = curvature_drift_bound(&m, &pair, 0.2, 25, 0.0).unwrap();
    assert!(small.curvature_mass.is_finite() && small.curvature_mass > 0.0);
    assert!(large.curvature_mass <= 2.0 * small.curvature_mass, "{small:?} {large:?}");
    assert!(large.helfrich <= 2.0 * small.helfrich, "{small:?} {large:?}");
    // spot check the helfrich constant against one direct evaluation
    let w0 = helfrich_energy(&m, 0.0).unwrap();
    let w = helfrich_energy(&flow(&m, &pair, 0.05, 0.0), 0.0).unwrap();
    assert!((w - w0).abs() <= small.helfrich * 0.05 * 1.5);
}

#[test]
fn zero_amplitude_pair_does_not_drift() {
    let m = shapes::icosphere(2, 1.0);
    let x = BumpField::new(m.position(0), 0.5, Vec3::z()).with_amplitude(0.0);
    let y = BumpField::new(m.position(5), 0.5, Vec3::x()).with_amplitude(0.0);
    let pair = CorrectionPair::new(&m, x, y);
    let d = curvature_drift_bound(&m, &pair, 0.1, 25, 0.0).unwrap();
    assert_eq!(d.curvature_mass, 0.0);
    assert_eq!(d.helfrich, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flow_is_identity_outside_supports(s in -0.3..0.3f64, t in -0.3..0.3f64, seed in 0u64..1000) {
        let m = ellipsoid(2);
        let pair = random_pair(&m, &mut ChaCha8Rng::seed_from_u64(seed));
        let moved = flow(&m, &pair, s, t);
        for v in 0..m.num_vertices() {
            let p = m.position(v);
            let outside = |f: &BumpField| (p - f.center).norm() >= f.radius;
            if outside(&pair.field_x) && outside(&pair.field_y) {
                prop_assert_eq!(moved.position(v), p);
            }
        }
    }

    #[test]
    fn flow_is_reversible(s in -0.3..0.3f64, seed in 0u64..1000) {
        let m = ellipsoid(2);
        let pair = random_pair(&m, &mut ChaCha8Rng::seed_from_u64(seed));
        let back = flow(&flow(&m, &pair, s, 0.0), &pair, -s, 0.0);
        for (p, q) in back.positions().iter().zip(m.positions()) {
            prop_assert!((p - q).norm() <= 1e-10);
        }
    }
}
