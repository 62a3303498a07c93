//! The four batch commands.

use std::f64::consts::PI;
use std::path::PathBuf;

use helfrich_core::correction::{
    pick_fields, solve_correction, vertex_normals, Ball, BumpField, CorrectionReport, PickOptions, SolveOptions,
};
use helfrich_core::curvature::{compute_curvature, gauss_bonnet_total};
use helfrich_core::diagnostics::{diagnostics_csv, diameter_check, good_point_map};
use helfrich_core::io::{load, to_off};
use helfrich_core::minimize::{descend, el_residual, run_log_csv, DescendOptions, OptimizerState, StopReason};
use helfrich_core::biharmonic::{replace_patch, replace_patch_at, DeltaReport, ReplaceOptions};
use helfrich_core::varifold::{current_rep, volume_via_current};
use helfrich_core::{Constraints, TriMesh, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{PerturbConfig, RunConfig};
use crate::output::{write_atomic, write_json};
use crate::CliError;

/// Loads the input mesh and applies the configured perturbation.
pub fn load_input(config: &RunConfig) -> Result<TriMesh, CliError> {
    let path = config.mesh.as_ref().ok_or_else(|| CliError::Config("no input mesh given".into()))?;
    if !path.is_file() {
        return Err(CliError::MeshNotFound(path.clone()));
    }
    let mesh = load(path)?;
    Ok(match &config.perturb {
        Some(p) => perturb(&mesh, p, config.seed),
        None => mesh,
    })
}

/// Bump along the vertex normal at the vertex extreme in a seeded random
/// direction. Amplitude and radius are relative to `√(area / 4π)`.
pub fn perturb(mesh: &TriMesh, p: &PerturbConfig, seed: u64) -> TriMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dir = loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            break v / n;
        }
    };
    let centroid: Vec3 = mesh.positions().iter().sum::<Vec3>() / mesh.num_vertices() as f64;
    let v = (0..mesh.num_vertices())
        .max_by(|&a, &b| {
            let da = dir.dot(&(mesh.position(a) - centroid));
            let db = dir.dot(&(mesh.position(b) - centroid));
            da.total_cmp(&db).then(b.cmp(&a))
        })
        .expect("nonempty mesh");
    let scale = (mesh.area() / (4.0 * PI)).sqrt();
    let normal = vertex_normals(mesh)[v];
    BumpField::new(mesh.position(v), p.radius * scale, normal)
        .with_amplitude(p.amplitude * scale)
        .displace(mesh, 1.0)
}

fn targets(config: &RunConfig, mesh: &TriMesh) -> Result<Constraints, CliError> {
    Ok(Constraints::new(
        config.area0.unwrap_or_else(|| mesh.area()),
        config.vol0.unwrap_or_else(|| mesh.enclosed_volume()),
        config.h0,
    )?)
}

fn pick_options(config: &RunConfig) -> PickOptions {
    PickOptions {
        candidates: config.correct.candidates,
        radius: config.correct.bump_radius,
    }
}

fn solve_options(config: &RunConfig) -> SolveOptions {
    SolveOptions {
        tol: config.correct.tol,
        max_iter: config.correct.max_iter,
        t_max: config.correct.t_max,
        ..SolveOptions::default()
    }
}

fn out_dir(config: &RunConfig) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(&config.out)?;
    Ok(config.out.clone())
}

#[derive(Debug, Serialize)]
struct GaussBonnet {
    total: f64,
    expected: f64,
    error: f64,
}

#[derive(Debug, Serialize)]
struct Range {
    min: f64,
    max: f64,
    mean: f64,
}

#[derive(Debug, Serialize)]
struct GoodPoints {
    eps0: f64,
    rho: f64,
    bad_count: usize,
}

#[derive(Debug, Serialize)]
struct Analysis {
    vertices: usize,
    faces: usize,
    euler_characteristic: i64,
    genus: usize,
    area: f64,
    volume: f64,
    volume_via_current: f64,
    volume_grid: usize,
    h0: f64,
    willmore: f64,
    helfrich: f64,
    mean_curvature: Range,
    gauss_bonnet: GaussBonnet,
    diameter_ratio: f64,
    good_points: GoodPoints,
}

pub fn analyze(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let mesh = load_input(config)?;
    let curv = compute_curvature(&mesh)?;
    let chi = mesh.euler_characteristic();
    let gb = gauss_bonnet_total(&mesh);
    let h = &curv.mean_curvature;
    let a = &config.analyze;
    let map = good_point_map(&mesh, a.eps0, a.rho)?;
    let analysis = Analysis {
        vertices: mesh.num_vertices(),
        faces: mesh.num_faces(),
        euler_characteristic: chi,
        genus: mesh.genus()?,
        area: mesh.area(),
        volume: mesh.enclosed_volume(),
        volume_via_current: volume_via_current(&current_rep(&mesh), a.grid)?,
        volume_grid: a.grid,
        h0: config.h0,
        willmore: curv.willmore_energy(),
        helfrich: curv.helfrich_energy(config.h0),
        mean_curvature: Range {
            min: h.iter().cloned().fold(f64::INFINITY, f64::min),
            max: h.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            mean: h.iter().sum::<f64>() / h.len() as f64,
        },
        gauss_bonnet: GaussBonnet {
            total: gb,
            expected: 2.0 * PI * chi as f64,
            error: (gb - 2.0 * PI * chi as f64).abs(),
        },
        diameter_ratio: diameter_check(&mesh)?,
        good_points: GoodPoints {
            eps0: a.eps0,
            rho: a.rho,
            bad_count: map.bad_count,
        },
    };
    let dir = out_dir(config)?;
    Ok(vec![
        write_json(&dir, "analysis.json", &analysis)?,
        write_atomic(&dir, "diagnostics.csv", diagnostics_csv(&mesh, &map, a.rho).as_bytes())?,
    ])
}

#[derive(Debug, Serialize)]
struct CorrectionOutput {
    targets: Constraints,
    area: f64,
    vol: f64,
    relative_residual_area: f64,
    relative_residual_vol: f64,
    field_x: BumpField,
    field_y: BumpField,
    report: CorrectionReport,
    residual_history: Vec<f64>,
}

/// Picks a pair, restores the targets and describes the result.
fn correct_mesh(
    config: &RunConfig,
    mesh: &TriMesh,
    targets: &Constraints,
    protected: Option<&Ball>,
) -> Result<(TriMesh, CorrectionOutput), CliError> {
    let pair = pick_fields(mesh, protected, &pick_options(config))?;
    let c = solve_correction(mesh, &pair, targets, &solve_options(config))?;
    let (area, vol) = (c.mesh.area(), c.mesh.enclosed_volume());
    let out = CorrectionOutput {
        targets: *targets,
        area,
        vol,
        relative_residual_area: (area - targets.area0).abs() / targets.area0,
        relative_residual_vol: (vol - targets.vol0).abs() / targets.vol0.abs(),
        field_x: pair.field_x,
        field_y: pair.field_y,
        report: c.report,
        residual_history: c.residual_history,
    };
    Ok((c.mesh, out))
}

pub fn correct(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let mesh = load_input(config)?;
    let targets = targets(config, &mesh)?;
    let (corrected, report) = correct_mesh(config, &mesh, &targets, None)?;
    let dir = out_dir(config)?;
    Ok(vec![
        write_atomic(&dir, "corrected.off", to_off(&corrected).as_bytes())?,
        write_json(&dir, "correction.json", &report)?,
    ])
}

#[derive(Debug, Serialize)]
struct MinimizeSummary {
    constraints: Constraints,
    initial_energy: f64,
    final_energy: f64,
    final_willmore: f64,
    initial_el_residual: f64,
    el_residual: f64,
    lambda_a: f64,
    lambda_v: f64,
    projection_multipliers: (f64, f64),
    steps: usize,
    trials: usize,
    stop: StopReason,
    area: f64,
    vol: f64,
    initial_correction: Option<CorrectionOutput>,
}

pub fn minimize(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let mesh = load_input(config)?;
    let constraints = targets(config, &mesh)?;
    let m = &config.minimize;
    let ra = (mesh.area() - constraints.area0).abs() / constraints.area0;
    let rv = (mesh.enclosed_volume() - constraints.vol0).abs() / constraints.vol0.abs();
    let (start, initial_correction) = if ra > m.constraint_tol || rv > m.constraint_tol {
        let (c, report) = correct_mesh(config, &mesh, &constraints, None)?;
        (c, Some(report))
    } else {
        (mesh, None)
    };
    let h0 = constraints.h0;
    let initial_el = el_residual(&start, h0, None)?.value;
    let state = OptimizerState::new(start, constraints, m.constraint_tol)?;
    let opts = DescendOptions {
        max_steps: m.max_steps,
        step_tol: m.step_tol,
        grad_tol: m.grad_tol,
        gradient_mode: m.gradient,
        gauss_weight: m.gauss_weight,
        max_vertex_step: m.max_vertex_step,
        constraint_tol: m.constraint_tol,
        step_growth: m.step_growth,
        pick: pick_options(config),
        solve: solve_options(config),
        ..DescendOptions::default()
    };
    let outcome = descend(state, &opts)?;
    let last = outcome.state.mesh();
    let curv = compute_curvature(last)?;
    let el = el_residual(last, h0, None)?;
    let summary = MinimizeSummary {
        constraints,
        initial_energy: outcome.accepted_energies[0],
        final_energy: *outcome.accepted_energies.last().expect("initial energy"),
        final_willmore: curv.willmore_energy(),
        initial_el_residual: initial_el,
        el_residual: el.value,
        lambda_a: el.lambda_a,
        lambda_v: el.lambda_v,
        projection_multipliers: outcome.state.multipliers,
        steps: outcome.accepted_steps,
        trials: outcome.log.len() - 1,
        stop: outcome.stop,
        area: last.area(),
        vol: last.enclosed_volume(),
        initial_correction,
    };
    let dir = out_dir(config)?;
    let written = vec![
        write_atomic(&dir, "final.off", to_off(last).as_bytes())?,
        write_atomic(&dir, "run_log.csv", run_log_csv(&outcome.log).as_bytes())?,
        write_json(&dir, "summary.json", &summary)?,
    ];
    if outcome.stop == StopReason::LineSearchStalled {
        return Err(CliError::Stationary(outcome.accepted_steps));
    }
    Ok(written)
}

#[derive(Debug, Serialize)]
struct ReplaceOutput {
    center: [f64; 3],
    delta: DeltaReport,
    removed_faces: usize,
    added_vertices: usize,
    correction: Option<CorrectionOutput>,
}

pub fn replace(config: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let r = &config.replace;
    let center = r
        .center
        .ok_or_else(|| CliError::Config("replace needs a patch centre (--center x,y,z)".into()))?;
    let mesh = load_input(config)?;
    let c = Vec3::from(center);
    let opts = ReplaceOptions {
        grid_n: r.grid_n,
        samples: r.samples,
        h0: config.h0,
    };
    let rep = match r.sigma {
        Some(sigma) => replace_patch_at(&mesh, &c, sigma, &opts)?,
        None => replace_patch(&mesh, &c, r.rho, &opts)?,
    };
    let (out_mesh, correction) = if r.correct {
        let targets = Constraints::new(mesh.area(), mesh.enclosed_volume(), config.h0)?;
        let ball = Ball {
            center: c,
            radius: rep.report.sigma,
        };
        let (m, report) = correct_mesh(config, &rep.mesh, &targets, Some(&ball))?;
        (m, Some(report))
    } else {
        (rep.mesh.clone(), None)
    };
    let report = ReplaceOutput {
        center,
        delta: rep.report,
        removed_faces: rep.removed_faces,
        added_vertices: rep.added_vertices,
        correction,
    };
    let dir = out_dir(config)?;
    Ok(vec![
        write_atomic(&dir, "replaced.off", to_off(&out_mesh).as_bytes())?,
        write_json(&dir, "delta_report.json", &report)?,
    ])
}
