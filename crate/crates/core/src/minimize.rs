//! Constrained gradient descent for the Helfrich energy at prescribed area
//! and enclosed volume.
//!
//! Every trial step moves along the energy gradient projected orthogonally
//! to the area and volume gradients, then restores both constraints exactly
//! with the two-parameter flow correction. Trials are accepted on an
//! Armijo decrease of the corrected energy.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::Dual;
use crate::correction::{pick_fields, solve_correction, PickOptions, SolveOptions};
use crate::curvature::{
    compute_curvature, face_angles, face_terms, gauss_bonnet_total, helfrich_energy, signed_mean, to_v3,
    vertex_energy, vertex_sums,
};
use crate::error::{Error, Result};
use crate::mesh::{Constraints, TriMesh, Vec3};
use crate::varifold::{area_gradient, volume_gradient};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GradientMode {
    #[default]
    Fd,
    Analytic,
}

/// Relative step of the central differences, scaled by the bounding-box
/// diagonal.
pub const FD_RELATIVE_STEP: f64 = 1e-6;

/// Gradient of the discrete Helfrich energy with respect to the vertex
/// positions.
pub fn energy_gradient(mesh: &TriMesh, h0: f64, mode: GradientMode) -> Result<Vec<Vec3>> {
    match mode {
        GradientMode::Fd => fd_gradient(mesh, h0, 0.0),
        GradientMode::Analytic => analytic_gradient(mesh, h0),
    }
}

fn vertex_angle_defect(mesh: &TriMesh, positions: &[Vec3], v: usize) -> f64 {
    let mut sum = 0.0;
    for &f in mesh.vertex_faces(v) {
        let face = mesh.face(f);
        let k = face.iter().position(|&w| w == v).unwrap();
        sum += face_angles(face.map(|w| positions[w]))[k];
    }
    2.0 * std::f64::consts::PI - sum
}

/// Central differences of the objective `W_{h0} + κ Σ angle defects`,
/// recomputing only the vertices whose terms depend on the moved vertex.
pub fn fd_gradient(mesh: &TriMesh, h0: f64, gauss_weight: f64) -> Result<Vec<Vec3>> {
    // validates faces once; the local evaluations below assume nondegenerate input
    vertex_sums(mesh, mesh.positions())?;
    let step = FD_RELATIVE_STEP * mesh.bbox_diagonal();
    let stars: Vec<Vec<usize>> = (0..mesh.num_vertices())
        .map(|v| {
            let mut s = mesh.vertex_neighbors(v);
            s.push(v);
            s
        })
        .collect();
    let local = |pos: &[Vec3], star: &[usize]| -> f64 {
        star.iter()
            .map(|&u| {
                let mut e = vertex_energy(mesh, pos, u, h0);
                if gauss_weight != 0.0 {
                    e += gauss_weight * vertex_angle_defect(mesh, pos, u);
                }
                e
            })
            .sum()
    };
    let grad = (0..mesh.num_vertices())
        .into_par_iter()
        .map_init(
            || mesh.positions().to_vec(),
            |pos, v| {
                let mut g = Vec3::zeros();
                let x0 = pos[v];
                for c in 0..3 {
                    pos[v][c] = x0[c] + step;
                    let ep = local(pos, &stars[v]);
                    pos[v][c] = x0[c] - step;
                    let em = local(pos, &stars[v]);
                    pos[v][c] = x0[c];
                    g[c] = (ep - em) / (2.0 * step);
                }
                g
            },
        )
        .collect();
    Ok(grad)
}

/// Chain rule through the cotangent discretization: vertex adjoints
/// `∂f/∂L = (H̄ - h0) s L/|L|` and `∂f/∂A = h0² - H̄²` contracted with the
/// forward-mode derivatives of each face's Laplacian and area terms.
pub fn analytic_gradient(mesh: &TriMesh, h0: f64) -> Result<Vec<Vec3>> {
    let positions = mesh.positions();
    let sums = vertex_sums(mesh, positions)?;
    let n = mesh.num_vertices();
    let mut adj_l = vec![Vec3::zeros(); n];
    let mut adj_a = vec![0.0; n];
    for i in 0..n {
        let hbar = signed_mean(&sums.lap[i], sums.area[i], &sums.normal[i]);
        let len = sums.lap[i].norm();
        if len > 0.0 {
            let s = if hbar < 0.0 { -1.0 } else { 1.0 };
            adj_l[i] = sums.lap[i] * ((hbar - h0) * s / len);
        }
        adj_a[i] = h0 * h0 - hbar * hbar;
    }
    let mut grad = vec![Vec3::zeros(); n];
    for f in 0..mesh.num_faces() {
        let face = mesh.face(f);
        let p: [[Dual<9>; 3]; 3] = std::array::from_fn(|k| {
            let x = to_v3(&positions[face[k]]);
            std::array::from_fn(|c| Dual::var(x[c], 3 * k + c))
        });
        let t = face_terms(p);
        let mut d = [0.0; 9];
        for k in 0..3 {
            let v = face[k];
            for c in 0..3 {
                let w = adj_l[v][c];
                for (di, li) in d.iter_mut().zip(t.lap[k][c].d.iter()) {
                    *di += w * li;
                }
            }
            for (di, ai) in d.iter_mut().zip(t.varea[k].d.iter()) {
                *di += adj_a[v] * ai;
            }
        }
        for k in 0..3 {
            grad[face[k]] += Vec3::new(d[3 * k], d[3 * k + 1], d[3 * k + 2]);
        }
    }
    Ok(grad)
}

fn inner(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn field_norm(a: &[Vec3]) -> f64 {
    inner(a, a).sqrt()
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub field: Vec<Vec3>,
    /// Coefficients `(a, b)` of the removed `a ∇Area + b ∇Vol`.
    pub multipliers: (f64, f64),
}

/// `grad - a ∇Area - b ∇Vol`, orthogonal to both constraint gradients.
pub fn project_gradient(mesh: &TriMesh, grad: &[Vec3]) -> Result<Projection> {
    let ga = area_gradient(mesh);
    let gv = volume_gradient(mesh);
    let gram = Matrix2::new(inner(&ga, &ga), inner(&ga, &gv), inner(&gv, &ga), inner(&gv, &gv));
    let det = gram.determinant();
    if !(det.abs() > 1e-12 * gram[(0, 0)] * gram[(1, 1)]) {
        return Err(Error::DegenerateConstraints(det.abs()));
    }
    let rhs = Vector2::new(inner(grad, &ga), inner(grad, &gv));
    let ab = gram.try_inverse().ok_or(Error::DegenerateConstraints(det.abs()))? * rhs;
    let field = grad
        .iter()
        .zip(ga.iter().zip(&gv))
        .map(|(g, (a, v))| g - a * ab.x - v * ab.y)
        .collect();
    Ok(Projection {
        field,
        multipliers: (ab.x, ab.y),
    })
}

/// Cotangent Laplace–Beltrami of a per-vertex scalar field.
pub fn laplace_beltrami(mesh: &TriMesh, values: &[f64]) -> Result<Vec<f64>> {
    let positions = mesh.positions();
    let sums = vertex_sums(mesh, positions)?;
    let mut out = vec![0.0; mesh.num_vertices()];
    for f in 0..mesh.num_faces() {
        let face = mesh.face(f);
        let t = face_terms(face.map(|v| to_v3(&positions[v])));
        for k in 0..3 {
            let (i, j) = (face[k], face[(k + 1) % 3]);
            let w = t.cot[(k + 2) % 3];
            out[i] += w * (values[j] - values[i]);
            out[j] += w * (values[i] - values[j]);
        }
    }
    for (o, a) in out.iter_mut().zip(&sums.area) {
        *o /= 2.0 * a;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElResidual {
    /// `‖R‖_{L²(μ)} / √area`.
    pub value: f64,
    pub lambda_a: f64,
    pub lambda_v: f64,
}

/// Pointwise Euler–Lagrange residual
/// `2ΔH̄ + 4H̄(H̄²/4 - K) - 2h0 K - h0² H̄ - λ_A H̄ + λ_V` in `L²(μ)`,
/// normalized by `√area`. Without supplied multipliers they are fitted by
/// weighted least squares.
pub fn el_residual(mesh: &TriMesh, h0: f64, multipliers: Option<(f64, f64)>) -> Result<ElResidual> {
    let curv = compute_curvature(mesh)?;
    let hb = &curv.mean_curvature;
    let k = &curv.gauss_curvature;
    let a = &curv.vertex_area;
    let lap = laplace_beltrami(mesh, hb)?;
    let c: Vec<f64> = (0..mesh.num_vertices())
        .map(|i| 2.0 * lap[i] + 4.0 * hb[i] * (0.25 * hb[i] * hb[i] - k[i]) - 2.0 * h0 * k[i] - h0 * h0 * hb[i])
        .collect();
    let (la, lv) = match multipliers {
        Some(m) => m,
        None => {
            let n = mesh.num_vertices();
            let mut m = DMatrix::zeros(n, 2);
            let mut rhs = DVector::zeros(n);
            for i in 0..n {
                let w = a[i].sqrt();
                m[(i, 0)] = -w * hb[i];
                m[(i, 1)] = w;
                rhs[i] = -w * c[i];
            }
            let svd = m.svd(true, true);
            let tol = 1e-10 * svd.singular_values.max();
            let sol = svd.solve(&rhs, tol).map_err(|e| Error::InvalidInput(e.to_string()))?;
            (sol[0], sol[1])
        }
    };
    let sq: f64 = (0..mesh.num_vertices())
        .map(|i| a[i] * (c[i] - la * hb[i] + lv).powi(2))
        .sum();
    Ok(ElResidual {
        value: (sq / mesh.area()).sqrt(),
        lambda_a: la,
        lambda_v: lv,
    })
}

/// Objective of the descent: `W_{h0} + κ Σ angle defects`.
pub fn objective(mesh: &TriMesh, h0: f64, gauss_weight: f64) -> Result<f64> {
    let mut e = helfrich_energy(mesh, h0)?;
    if gauss_weight != 0.0 {
        e += gauss_weight * gauss_bonnet_total(mesh);
    }
    Ok(e)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerState {
    #[serde(skip)]
    pub mesh: Option<TriMesh>,
    pub constraints: Constraints,
    pub step: f64,
    pub energy_history: Vec<f64>,
    pub multipliers: (f64, f64),
}

impl OptimizerState {
    /// Fails unless the mesh already satisfies the constraints to
    /// `tol` relative accuracy.
    pub fn new(mesh: TriMesh, constraints: Constraints, tol: f64) -> Result<Self> {
        check_constraints(&mesh, &constraints, tol)?;
        Ok(OptimizerState {
            mesh: Some(mesh),
            constraints,
            step: 0.0,
            energy_history: Vec::new(),
            multipliers: (0.0, 0.0),
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        self.mesh.as_ref().expect("optimizer state without mesh")
    }
}

fn check_constraints(mesh: &TriMesh, c: &Constraints, tol: f64) -> Result<()> {
    let ra = (mesh.area() - c.area0).abs() / c.area0;
    let rv = (mesh.enclosed_volume() - c.vol0).abs() / c.vol0.abs();
    if ra > tol || rv > tol {
        return Err(Error::InvalidInput(format!(
            "mesh violates constraints: relative area error {ra:e}, volume error {rv:e}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescendOptions {
    pub max_steps: usize,
    /// Line search gives up below this step, relative to the bbox diagonal.
    pub step_tol: f64,
    /// Stationary when the projected gradient norm is below
    /// `grad_tol · √area`.
    pub grad_tol: f64,
    pub gradient_mode: GradientMode,
    /// Weight κ of the added total Gauss curvature.
    pub gauss_weight: f64,
    pub armijo: f64,
    pub backtrack: f64,
    /// Factor applied to the last accepted step to seed the next line search.
    pub step_growth: f64,
    /// Vertex displacement cap per step, relative to the bbox diagonal.
    pub max_vertex_step: f64,
    pub constraint_tol: f64,
    /// Evaluate the Euler–Lagrange residual for the run log.
    pub log_el_residual: bool,
    pub pick: PickOptions,
    pub solve: SolveOptions,
}

impl Default for DescendOptions {
    fn default() -> Self {
        DescendOptions {
            max_steps: 500,
            step_tol: 1e-9,
            grad_tol: 1e-6,
            gradient_mode: GradientMode::Fd,
            gauss_weight: 0.0,
            armijo: 1e-4,
            backtrack: 0.5,
            step_growth: 1.0,
            max_vertex_step: 0.01,
            constraint_tol: 1e-8,
            log_el_residual: true,
            pick: PickOptions::default(),
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunLogRow {
    pub step: usize,
    pub energy: f64,
    pub area: f64,
    pub vol: f64,
    pub grad_norm: f64,
    pub el_residual: f64,
    pub s: f64,
    pub t: f64,
    pub accepted: bool,
}

pub fn run_log_csv(rows: &[RunLogRow]) -> String {
    let mut out = String::from("step,energy,area,vol,grad_norm,el_residual,s,t,accepted\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
            r.step, r.energy, r.area, r.vol, r.grad_norm, r.el_residual, r.s, r.t, r.accepted
        ));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxSteps,
    Stationary,
    LineSearchStalled,
}

#[derive(Debug, Clone)]
pub struct DescendOutcome {
    pub state: OptimizerState,
    pub log: Vec<RunLogRow>,
    /// Every accepted mesh, starting with the initial one.
    pub accepted_energies: Vec<f64>,
    pub stop: StopReason,
    pub accepted_steps: usize,
}

struct Trial {
    mesh: TriMesh,
    energy: f64,
    s: f64,
    t: f64,
    trust: f64,
}

fn try_step(
    mesh: &TriMesh,
    dir: &[Vec3],
    alpha: f64,
    state: &OptimizerState,
    opts: &DescendOptions,
    solve: &SolveOptions,
) -> Result<Trial> {
    let moved: Vec<Vec3> = mesh.positions().iter().zip(dir).map(|(p, d)| p + d * alpha).collect();
    let trial = mesh.with_positions(moved)?;
    let pair = pick_fields(&trial, None, &opts.pick)?;
    let corrected = solve_correction(&trial, &pair, &state.constraints, solve)?;
    check_constraints(&corrected.mesh, &state.constraints, opts.constraint_tol)?;
    let energy = objective(&corrected.mesh, state.constraints.h0, opts.gauss_weight)?;
    Ok(Trial {
        energy,
        s: corrected.s,
        t: corrected.t,
        trust: corrected.report.trust_radius,
        mesh: corrected.mesh,
    })
}

/// Projected gradient descent with exact constraint restoration after each
/// step.
pub fn descend(mut state: OptimizerState, opts: &DescendOptions) -> Result<DescendOutcome> {
    let h0 = state.constraints.h0;
    let mut mesh = state.mesh.take().ok_or_else(|| Error::InvalidInput("state has no mesh".into()))?;
    let mut energy = objective(&mesh, h0, opts.gauss_weight)?;
    if state.energy_history.is_empty() {
        state.energy_history.push(energy);
    }
    let mut accepted_energies = vec![energy];
    let mut log = Vec::new();
    let mut stop = StopReason::MaxSteps;
    let mut accepted_steps = 0;
    let mut solve = opts.solve;

    let el = |m: &TriMesh| -> Result<f64> {
        if opts.log_el_residual {
            Ok(el_residual(m, h0, None)?.value)
        } else {
            Ok(f64::NAN)
        }
    };
    log.push(RunLogRow {
        step: 0,
        energy,
        area: mesh.area(),
        vol: mesh.enclosed_volume(),
        grad_norm: f64::NAN,
        el_residual: el(&mesh)?,
        s: 0.0,
        t: 0.0,
        accepted: true,
    });

    for step in 1..=opts.max_steps {
        let grad = match (opts.gradient_mode, opts.gauss_weight) {
            (GradientMode::Fd, k) => fd_gradient(&mesh, h0, k)?,
            (GradientMode::Analytic, _) => analytic_gradient(&mesh, h0)?,
        };
        let proj = project_gradient(&mesh, &grad)?;
        state.multipliers = proj.multipliers;
        let gnorm = field_norm(&proj.field);
        if gnorm <= opts.grad_tol * mesh.area().sqrt() {
            stop = StopReason::Stationary;
            break;
        }
        let diag = mesh.bbox_diagonal();
        let vmax = proj.field.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let cap = opts.max_vertex_step * diag / vmax;
        let mut alpha = if state.step > 0.0 { state.step.min(cap) } else { cap };
        let dir: Vec<Vec3> = proj.field.iter().map(|v| -v).collect();

        let mut accepted = None;
        while alpha * vmax >= opts.step_tol * diag {
            match try_step(&mesh, &dir, alpha, &state, opts, &solve) {
                Ok(trial) if trial.energy <= energy - opts.armijo * alpha * gnorm * gnorm && trial.energy < energy => {
                    accepted = Some(trial);
                    break;
                }
                Ok(_)
                | Err(Error::OutOfRadius { .. })
                | Err(Error::NoConvergence(_))
                | Err(Error::DegenerateConstraints(_))
                | Err(Error::DegenerateTriangle(_))
                | Err(Error::DegenerateFace(_))
                | Err(Error::InvalidInput(_)) => {
                    log.push(RunLogRow {
                        step,
                        energy,
                        area: mesh.area(),
                        vol: mesh.enclosed_volume(),
                        grad_norm: gnorm,
                        el_residual: f64::NAN,
                        s: f64::NAN,
                        t: f64::NAN,
                        accepted: false,
                    });
                    alpha *= opts.backtrack;
                }
                Err(e) => return Err(e),
            }
        }
        match accepted {
            Some(trial) => {
                energy = trial.energy;
                mesh = trial.mesh;
                state.energy_history.push(energy);
                accepted_energies.push(energy);
                accepted_steps += 1;
                state.step = (opts.step_growth * alpha).min(opts.max_vertex_step * diag / vmax.max(f64::MIN_POSITIVE));
                solve.t_max = (4.0 * trial.trust).clamp(1e-6, opts.solve.t_max);
                log.push(RunLogRow {
                    step,
                    energy,
                    area: mesh.area(),
                    vol: mesh.enclosed_volume(),
                    grad_norm: gnorm,
                    el_residual: el(&mesh)?,
                    s: trial.s,
                    t: trial.t,
                    accepted: true,
                });
            }
            None => {
                stop = StopReason::LineSearchStalled;
                break;
            }
        }
    }
    state.mesh = Some(mesh);
    Ok(DescendOutcome {
        state,
        log,
        accepted_energies,
        stop,
        accepted_steps,
    })
}
