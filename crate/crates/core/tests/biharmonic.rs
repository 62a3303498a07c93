use helfrich_core::biharmonic::*;
use helfrich_core::correction::{pick_fields, solve_correction, Ball, BumpField, PickOptions, SolveOptions};
use helfrich_core::curvature::compute_curvature;
use helfrich_core::{shapes, Constraints, TriMesh, Vec3};

fn cap_height(x: f64, y: f64) -> f64 {
    (1.0 - x * x - y * y).sqrt()
}

fn log_log_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn sphere_cap_estimates_have_bounded_constants() {
    let tr = BoundaryTraces::from_fn(0.4, 128, cap_height);
    let p = solve_biharmonic(&tr, 65).unwrap();
    let r = p.report;
    assert!(p.residual <= 1e-10);
    assert!(r.boundary_value_error <= 1e-8);
    assert!(r.boundary_normal_error <= 1e-6);
    assert!(r.c_sup.unwrap() <= 10.0, "{r:?}");
    assert!(r.c_grad.unwrap() <= 10.0, "{r:?}");
    assert!(r.c_hessian.unwrap() <= 10.0, "{r:?}");
    // the graph of the cap is close to its biharmonic replacement
    assert!((p.value_at(0.0, 0.0) - 1.0).abs() < 5e-3);
}

#[test]
fn replacing_a_sphere_cap_by_its_own_data() {
    let m = shapes::icosphere(4, 1.0);
    let curv = compute_curvature(&m).unwrap();
    let r = replace_patch(&m, &Vec3::z(), 0.6, &ReplaceOptions::default()).unwrap();
    let sigma = r.report.sigma;
    let cap_energy: f64 = (0..m.num_vertices())
        .filter(|&v| m.position(v).xy().norm() < sigma && m.position(v).z > 0.0)
        .map(|v| curv.mean_curvature[v].powi(2) * curv.vertex_area[v])
        .sum();
    assert!(r.report.d_helfrich.abs() <= 0.1 * cap_energy, "{} vs {cap_energy}", r.report.d_helfrich);
    assert!(r.report.d_area.abs() < 1e-3 && r.report.d_vol.abs() < 1e-3);
    assert_eq!(r.mesh.genus().unwrap(), 0);
    assert_eq!(r.mesh.euler_characteristic(), 2);
}

#[test]
fn volume_change_scales_quadratically() {
    let m = shapes::icosphere(5, 1.0);
    let pts: Vec<(f64, f64)> = [0.1, 0.2, 0.4]
        .iter()
        .map(|&sigma| {
            let r = replace_patch_at(&m, &Vec3::z(), sigma, &ReplaceOptions::default()).unwrap();
            (sigma, r.report.d_vol.abs())
        })
        .collect();
    let slope = log_log_slope(&pts);
    assert!(slope >= 1.8, "fitted exponent {slope}, {pts:?}");
}

#[test]
fn ripple_is_excised() {
    let base = shapes::icosphere(6, 1.0);
    let m = base
        .map_positions(|p| {
            let d = (p - Vec3::z()).norm();
            let cut = BumpField::profile(d / 0.15);
            p * (1.0 + 0.02 * (2.0 * std::f64::consts::PI * d / 0.1).cos() * cut)
        })
        .unwrap();
    let r = replace_patch(&m, &Vec3::z(), 0.6, &ReplaceOptions::default()).unwrap();
    assert!(r.report.sigma / 2.0 >= 0.15);
    assert!(r.report.d_helfrich < 0.0);
}

#[test]
fn replace_then_correct_restores_constraints() {
    let m = shapes::icosphere(4, 1.0).map_positions(|p| Vec3::new(p.x, p.y, 0.7 * p.z)).unwrap();
    let target = Constraints::from_mesh(&m, 0.0).unwrap();
    let pole = Vec3::z() * 0.7;
    let r = replace_patch(&m, &pole, 0.6, &ReplaceOptions::default()).unwrap();
    let ball = Ball {
        center: pole,
        radius: r.report.sigma,
    };
    let pair = pick_fields(&r.mesh, Some(&ball), &PickOptions::default()).unwrap();
    let c = solve_correction(&r.mesh, &pair, &target, &SolveOptions { tol: 1e-10, ..Default::default() }).unwrap();
    assert!((c.mesh.area() - target.area0).abs() <= 1e-9 * target.area0);
    assert!((c.mesh.enclosed_volume() - target.vol0).abs() <= 1e-9 * target.vol0);
    assert_eq!(c.mesh.genus().unwrap(), m.genus().unwrap());
    // the replaced patch itself is left alone by the correction
    for v in 0..c.mesh.num_vertices() {
        let p = r.mesh.position(v);
        if (p - pole).norm() < ball.radius {
            assert_eq!(c.mesh.position(v), p);
        }
    }
}

#[test]
fn good_radius_avoids_curvature_ring() {
    let rho = 0.8;
    let ring = 0.6 * rho;
    let m = shapes::slab(96, 1.0, 2.0, |x, y| 0.01 * (-((x.hypot(y) - ring) / 0.02).powi(2)).exp());
    let center = Vec3::zeros();
    let sigma = good_radius(&m, &center, rho).unwrap();
    let spacing = 0.25 * rho / 16.0;
    assert!((sigma - ring).abs() >= spacing, "{sigma}");
    let curv = compute_curvature(&m).unwrap();
    assert!(level_curvature_integral(&m, &curv, &center, sigma) < level_curvature_integral(&m, &curv, &center, ring));
}

#[test]
fn flat_region_roundtrip_through_replace_is_exact() {
    let m: TriMesh = shapes::slab(32, 1.0, 3.0, |x, y| 0.1 + 0.2 * x - 0.1 * y);
    let r = replace_patch(&m, &Vec3::new(0.0, 0.0, 0.1), 0.6, &ReplaceOptions::default()).unwrap();
    assert!(r.report.d_area.abs() <= 1e-8, "{:?}", r.report);
    assert!(r.report.d_vol.abs() <= 1e-8);
    assert!(r.report.d_helfrich.abs() <= 1e-8);
}

#[test]
fn fold_and_multisheet_errors() {
    let m = shapes::icosphere(3, 1.0);
    assert!(matches!(replace_patch(&m, &Vec3::z(), 2.0, &ReplaceOptions::default()), Err(helfrich_core::Error::NotAGraph)));
}
