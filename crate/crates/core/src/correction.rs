//! Two-parameter flow correction of area and enclosed volume.
//!
//! Two compactly supported bump fields `X`, `Y` define the map
//! `Φ(s, t, ·) = Φ_X(s, Φ_Y(t, ·))` and the constraint map
//! `F(s, t) = (area, volume)` of the flowed mesh. Targets are reached by a
//! Newton solve on the normalized map `DF(0,0)⁻¹ (F(s,t) - F(0,0))`, which
//! is only attempted when the targets lie inside the ball on which the
//! normalized Jacobian oscillates by at most `δ₀`.

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::compute_curvature;
use crate::error::{Error, Result};
use crate::mesh::{Constraints, TriMesh, Vec3};
use crate::varifold::{first_variation_area, first_variation_volume, VectorField};

/// `sup |g|` of `g(ρ) = b(ρ) · 2ρ / (1 - ρ²)²`, attained at `ρ² = 1/√3`.
fn profile_slope_max() -> f64 {
    let rho = 3f64.powf(-0.25);
    let s = 1.0 - rho * rho;
    (1.0 - 1.0 / s).exp() * 2.0 * rho / (s * s)
}

/// Smooth bump `amplitude · b(|x - c| / ε) · direction` with
/// `b(ρ) = exp(1 - 1/(1 - ρ²))` for `ρ < 1` and zero outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpField {
    pub center: Vec3,
    pub radius: f64,
    pub direction: Vec3,
    pub amplitude: f64,
}

impl BumpField {
    pub fn new(center: Vec3, radius: f64, direction: Vec3) -> Self {
        assert!(radius > 0.0, "bump radius must be positive");
        BumpField {
            center,
            radius,
            direction: direction.normalize(),
            amplitude: 1.0,
        }
    }

    pub fn with_amplitude(self, amplitude: f64) -> Self {
        BumpField { amplitude, ..self }
    }

    pub fn profile(rho: f64) -> f64 {
        if rho.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - rho * rho)).exp()
        }
    }

    pub fn in_support(&self, x: &Vec3) -> bool {
        (x - self.center).norm() < self.radius
    }

    /// `sup |∇X|`, from the closed-form maximum of the profile slope.
    pub fn max_derivative(&self) -> f64 {
        self.amplitude.abs() * profile_slope_max() / self.radius
    }

    fn ode_steps(&self, time: f64, min_steps: usize) -> usize {
        let stiff = (32.0 * time.abs() * self.max_derivative()).ceil() as usize;
        min_steps.max(stiff)
    }

    /// Transports `points` along the flow of this field for `time`.
    /// Points outside the support are left untouched.
    pub fn flow_points(&self, points: &mut [Vec3], time: f64, min_steps: usize) {
        if time == 0.0 || self.amplitude == 0.0 {
            return;
        }
        let steps = self.ode_steps(time, min_steps);
        let h = time / steps as f64;
        for p in points.iter_mut().filter(|p| self.in_support(p)) {
            let mut x = *p;
            for _ in 0..steps {
                let k1 = self.eval(&x);
                let k2 = self.eval(&(x + k1 * (h / 2.0)));
                let k3 = self.eval(&(x + k2 * (h / 2.0)));
                let k4 = self.eval(&(x + k3 * h));
                x += (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6.0);
            }
            *p = x;
        }
    }

    /// The mesh flowed along this field for `time`.
    pub fn displace(&self, mesh: &TriMesh, time: f64) -> TriMesh {
        let mut p = mesh.positions().to_vec();
        self.flow_points(&mut p, time, MIN_ODE_STEPS);
        mesh.with_positions_unchecked(p)
    }
}

impl VectorField for BumpField {
    fn eval(&self, x: &Vec3) -> Vec3 {
        let r = (x - self.center).norm();
        if r >= self.radius {
            return Vec3::zeros();
        }
        self.direction * (self.amplitude * Self::profile(r / self.radius))
    }
}

pub const MIN_ODE_STEPS: usize = 16;

/// A ball in ℝ³, used to protect a region from the correction fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec3,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionPair {
    pub field_x: BumpField,
    pub field_y: BumpField,
    pub ode_steps: usize,
    /// `DF(0,0)`: rows are (area, volume), columns are (s, t).
    pub jacobian0: Matrix2<f64>,
}

fn variation_column(mesh: &TriMesh, field: &BumpField) -> Vector2<f64> {
    Vector2::new(first_variation_area(mesh, field), first_variation_volume(mesh, field))
}

impl CorrectionPair {
    /// Builds the pair and evaluates `DF(0,0)` from the first variations.
    pub fn new(mesh: &TriMesh, field_x: BumpField, field_y: BumpField) -> Self {
        let cx = variation_column(mesh, &field_x);
        let cy = variation_column(mesh, &field_y);
        CorrectionPair {
            field_x,
            field_y,
            ode_steps: MIN_ODE_STEPS,
            jacobian0: Matrix2::from_columns(&[cx, cy]),
        }
    }

    pub fn det_jacobian0(&self) -> f64 {
        self.jacobian0.determinant()
    }

    pub fn supports_disjoint(&self) -> bool {
        (self.field_x.center - self.field_y.center).norm() >= self.field_x.radius + self.field_y.radius
    }

    pub fn flow_positions(&self, positions: &[Vec3], s: f64, t: f64) -> Vec<Vec3> {
        let mut p = positions.to_vec();
        self.field_y.flow_points(&mut p, t, self.ode_steps);
        self.field_x.flow_points(&mut p, s, self.ode_steps);
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PickOptions {
    pub candidates: usize,
    /// Bump radius; `None` uses half the radius of the sphere with equal area.
    pub radius: Option<f64>,
}

impl Default for PickOptions {
    fn default() -> Self {
        PickOptions {
            candidates: 64,
            radius: None,
        }
    }
}

pub fn default_bump_radius(mesh: &TriMesh) -> f64 {
    0.5 * (mesh.area() / (4.0 * std::f64::consts::PI)).sqrt()
}

/// Fibonacci-sphere directions, deterministic.
fn fibonacci_directions(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * k as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Area-weighted vertex normals.
pub fn vertex_normals(mesh: &TriMesh) -> Vec<Vec3> {
    let mut n = vec![Vec3::zeros(); mesh.num_vertices()];
    for f in 0..mesh.num_faces() {
        let a = mesh.face_area_vector(f);
        for v in mesh.face(f) {
            n[v] += a;
        }
    }
    n.into_iter().map(|v| v.normalize()).collect()
}

/// Candidate bump centres: the extreme vertex of the mesh in each
/// Fibonacci direction, deduplicated, in order of first appearance.
pub fn candidate_centers(mesh: &TriMesh, count: usize) -> Vec<usize> {
    let centroid: Vec3 = mesh.positions().iter().sum::<Vec3>() / mesh.num_vertices() as f64;
    let mut out: Vec<usize> = Vec::new();
    for d in fibonacci_directions(count) {
        let best = (0..mesh.num_vertices())
            .max_by(|&a, &b| {
                let da = d.dot(&(mesh.position(a) - centroid));
                let db = d.dot(&(mesh.position(b) - centroid));
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .unwrap();
        if !out.contains(&best) {
            out.push(best);
        }
    }
    out
}

/// Chooses the pair of normal bump fields maximizing `|det DF(0,0)|`.
pub fn pick_fields(mesh: &TriMesh, protected: Option<&Ball>, options: &PickOptions) -> Result<CorrectionPair> {
    let radius = options.radius.unwrap_or_else(|| default_bump_radius(mesh));
    let normals = vertex_normals(mesh);
    let fields: Vec<BumpField> = candidate_centers(mesh, options.candidates)
        .into_iter()
        .map(|v| BumpField::new(mesh.position(v), radius, normals[v]))
        .filter(|f| protected.is_none_or(|b| (f.center - b.center).norm() >= b.radius + f.radius))
        .collect();
    let columns: Vec<Vector2<f64>> = fields.par_iter().map(|f| variation_column(mesh, f)).collect();

    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..fields.len() {
        for j in i + 1..fields.len() {
            if (fields[i].center - fields[j].center).norm() < 2.0 * radius {
                continue;
            }
            let det = Matrix2::from_columns(&[columns[i], columns[j]]).determinant().abs();
            // near-equal determinants keep the earlier pair so that rounding
            // noise cannot switch between symmetric choices
            if best.is_none_or(|(_, _, b)| det > b * (1.0 + 1e-9)) {
                best = Some((i, j, det));
            }
        }
    }
    let threshold = 1e-10 * mesh.area() * mesh.enclosed_volume().abs();
    match best {
        Some((i, j, det)) if det >= threshold => Ok(CorrectionPair {
            field_x: fields[i],
            field_y: fields[j],
            ode_steps: MIN_ODE_STEPS,
            jacobian0: Matrix2::from_columns(&[columns[i], columns[j]]),
        }),
        Some((_, _, det)) => Err(Error::DegenerateConstraints(det)),
        None => Err(Error::DegenerateConstraints(0.0)),
    }
}

/// `Φ(s, t, ·)` applied to every vertex.
pub fn flow(mesh: &TriMesh, pair: &CorrectionPair, s: f64, t: f64) -> TriMesh {
    mesh.with_positions_unchecked(pair.flow_positions(mesh.positions(), s, t))
}

/// `F(s, t) = (area, enclosed volume)` of the flowed mesh.
pub fn constraint_map(mesh: &TriMesh, pair: &CorrectionPair, s: f64, t: f64) -> (f64, f64) {
    let m = flow(mesh, pair, s, t);
    (m.area(), m.enclosed_volume())
}

fn f_vec(mesh: &TriMesh, pair: &CorrectionPair, z: &Vector2<f64>) -> Vector2<f64> {
    let (a, v) = constraint_map(mesh, pair, z.x, z.y);
    Vector2::new(a, v)
}

/// Central-difference Jacobian of the constraint map at `z`.
pub fn jacobian_fd(mesh: &TriMesh, pair: &CorrectionPair, z: &Vector2<f64>, step: f64) -> Matrix2<f64> {
    let ds = (f_vec(mesh, pair, &(z + Vector2::new(step, 0.0))) - f_vec(mesh, pair, &(z - Vector2::new(step, 0.0))))
        / (2.0 * step);
    let dt = (f_vec(mesh, pair, &(z + Vector2::new(0.0, step))) - f_vec(mesh, pair, &(z - Vector2::new(0.0, step))))
        / (2.0 * step);
    Matrix2::from_columns(&[ds, dt])
}

const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Componentwise relative tolerance on (area, volume).
    pub tol: f64,
    pub max_iter: usize,
    /// Largest trust radius tried; halved until the oscillation bound holds.
    pub t_max: f64,
    /// Bound on `‖DF̃(z) - DF̃(z')‖` over the trust ball.
    pub delta_target: f64,
    pub max_halvings: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iter: 20,
            t_max: 0.5,
            delta_target: 0.5,
            max_halvings: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustRegion {
    /// Parameter-ball radius `T`.
    pub radius: f64,
    /// Observed normalized Jacobian oscillation on the ball.
    pub oscillation: f64,
    /// Radius `(1 - δ₀) T` of the ball of normalized targets reachable with
    /// guarantee.
    pub guaranteed: f64,
}

/// Sample points for oscillation estimates: the centre and eight points on
/// the circle of radius `t`.
fn nine_points(t: f64) -> Vec<Vector2<f64>> {
    let mut pts = vec![Vector2::zeros()];
    for k in 0..8 {
        let a = std::f64::consts::FRAC_PI_4 * k as f64;
        pts.push(Vector2::new(a.cos(), a.sin()) * t);
    }
    pts
}

/// Max pairwise operator-norm difference of `DF(0,0)⁻¹ DF(z)` over nine
/// sample points of the ball of radius `t`.
pub fn normalized_oscillation(mesh: &TriMesh, pair: &CorrectionPair, t: f64) -> Result<f64> {
    let inv = pair
        .jacobian0
        .try_inverse()
        .ok_or(Error::DegenerateConstraints(0.0))?;
    let step = FD_STEP.max(1e-4 * t);
    let jacs: Vec<Matrix2<f64>> = nine_points(t)
        .iter()
        .map(|z| inv * jacobian_fd(mesh, pair, z, step))
        .collect();
    let mut osc: f64 = 0.0;
    for i in 0..jacs.len() {
        for j in i + 1..jacs.len() {
            osc = osc.max((jacs[i] - jacs[j]).norm_l2_spectral());
        }
    }
    Ok(osc)
}

trait SpectralNorm {
    fn norm_l2_spectral(&self) -> f64;
}

impl SpectralNorm for Matrix2<f64> {
    fn norm_l2_spectral(&self) -> f64 {
        self.singular_values().max()
    }
}

/// Largest `T = t_max / 2^k` whose normalized Jacobian oscillation is at
/// most `delta_target`.
pub fn trust_region(mesh: &TriMesh, pair: &CorrectionPair, options: &SolveOptions) -> Result<TrustRegion> {
    let mut t = options.t_max;
    for _ in 0..=options.max_halvings {
        let osc = normalized_oscillation(mesh, pair, t)?;
        if osc <= options.delta_target {
            return Ok(TrustRegion {
                radius: t,
                oscillation: osc,
                guaranteed: (1.0 - options.delta_target) * t,
            });
        }
        t *= 0.5;
    }
    Ok(TrustRegion {
        radius: 0.0,
        oscillation: f64::INFINITY,
        guaranteed: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionReport {
    pub s: f64,
    pub t: f64,
    pub iterations: usize,
    pub residual_area: f64,
    pub residual_vol: f64,
    #[serde(rename = "det_DF0")]
    pub det_df0: f64,
    pub delta0: f64,
    pub trust_radius: f64,
}

#[derive(Debug, Clone)]
pub struct Correction {
    pub s: f64,
    pub t: f64,
    pub mesh: TriMesh,
    pub report: CorrectionReport,
    /// Max-norm relative residual after each iterate, starting with the
    /// initial state.
    pub residual_history: Vec<f64>,
}

fn relative_residual(f: &Vector2<f64>, targets: &Constraints) -> (f64, f64) {
    ((f.x - targets.area0).abs() / targets.area0, (f.y - targets.vol0).abs() / targets.vol0.abs())
}

/// Solves `F(s, t) = (area0, vol0)` by Newton iteration inside the
/// guaranteed ball.
pub fn solve_correction(
    mesh: &TriMesh,
    pair: &CorrectionPair,
    targets: &Constraints,
    options: &SolveOptions,
) -> Result<Correction> {
    let det = pair.det_jacobian0();
    let inv = pair.jacobian0.try_inverse().ok_or(Error::DegenerateConstraints(det.abs()))?;
    let target = Vector2::new(targets.area0, targets.vol0);
    let f0 = Vector2::new(mesh.area(), mesh.enclosed_volume());
    let res0 = relative_residual(&f0, targets);
    let mut report = CorrectionReport {
        s: 0.0,
        t: 0.0,
        iterations: 0,
        residual_area: res0.0,
        residual_vol: res0.1,
        det_df0: det,
        delta0: 0.0,
        trust_radius: 0.0,
    };
    if res0.0 <= options.tol && res0.1 <= options.tol {
        return Ok(Correction {
            s: 0.0,
            t: 0.0,
            mesh: mesh.clone(),
            report,
            residual_history: vec![res0.0.max(res0.1)],
        });
    }

    let distance = (inv * (target - f0)).norm();
    let region = trust_region(mesh, pair, options)?;
    report.delta0 = region.oscillation;
    report.trust_radius = region.radius;
    if !(distance <= region.guaranteed) {
        return Err(Error::OutOfRadius {
            distance,
            radius: region.guaranteed,
        });
    }

    let mut z = Vector2::zeros();
    let mut f = f0;
    let mut history = vec![res0.0.max(res0.1)];
    for iter in 1..=options.max_iter {
        let jac = if iter == 1 {
            pair.jacobian0
        } else {
            jacobian_fd(mesh, pair, &z, FD_STEP)
        };
        let dz = jac
            .try_inverse()
            .ok_or(Error::DegenerateConstraints(jac.determinant().abs()))?
            * (target - f);
        let current = (target - f).norm();
        let mut scale = 1.0;
        let (mut z_new, mut f_new) = (z + dz, f_vec(mesh, pair, &(z + dz)));
        while iter > 1 && (target - f_new).norm() > current && scale > 1e-3 {
            scale *= 0.5;
            z_new = z + dz * scale;
            f_new = f_vec(mesh, pair, &z_new);
        }
        z = z_new;
        f = f_new;
        let (ra, rv) = relative_residual(&f, targets);
        history.push(ra.max(rv));
        if ra <= options.tol && rv <= options.tol {
            let corrected = flow(mesh, pair, z.x, z.y);
            report.s = z.x;
            report.t = z.y;
            report.iterations = iter;
            report.residual_area = ra;
            report.residual_vol = rv;
            return Ok(Correction {
                s: z.x,
                t: z.y,
                mesh: corrected,
                report,
                residual_history: history,
            });
        }
    }
    Err(Error::NoConvergence(options.max_iter))
}

/// Empirical Lipschitz constants of `∫|A|²` and of the Helfrich energy
/// under the correction flow over the ball of radius `t_radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub curvature_mass: f64,
    pub helfrich: f64,
}

/// Sunflower samples of the disc of radius `t`.
pub(crate) fn disc_samples(t: f64, count: usize) -> Vec<Vector2<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let r = t * ((k as f64 + 0.5) / count as f64).sqrt();
            let a = golden * k as f64;
            Vector2::new(r * a.cos(), r * a.sin())
        })
        .collect()
}

pub fn curvature_drift_bound(
    mesh: &TriMesh,
    pair: &CorrectionPair,
    t_radius: f64,
    samples: usize,
    h0: f64,
) -> Result<DriftReport> {
    let base = compute_curvature(mesh)?;
    let (a0, w0) = (base.total_curvature_mass(), base.helfrich_energy(h0));
    let mut out = DriftReport {
        curvature_mass: 0.0,
        helfrich: 0.0,
    };
    for z in disc_samples(t_radius, samples) {
        let c = compute_curvature(&flow(mesh, pair, z.x, z.y))?;
        let norm = z.norm();
        out.curvature_mass = out.curvature_mass.max((c.total_curvature_mass() - a0).abs() / norm);
        out.helfrich = out.helfrich.max((c.helfrich_energy(h0) - w0).abs() / norm);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn profile_is_compactly_supported() {
        assert_eq!(BumpField::profile(0.0), 1.0);
        assert_eq!(BumpField::profile(1.0), 0.0);
        assert_eq!(BumpField::profile(1.5), 0.0);
        assert!(BumpField::profile(0.999) < 1e-100);
    }

    #[test]
    fn max_derivative_matches_sampling() {
        let f = BumpField::new(Vec3::zeros(), 0.3, Vec3::z());
        let h = 1e-6;
        let sampled = (1..10_000)
            .map(|k| {
                let r = 0.3 * k as f64 / 10_000.0;
                (BumpField::profile((r + h) / 0.3) - BumpField::profile((r - h) / 0.3)).abs() / (2.0 * h)
            })
            .fold(0.0, f64::max);
        assert!((sampled / f.max_derivative() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn zero_flow_is_identity() {
        let m = shapes::icosphere(2, 1.0);
        let pair = pick_fields(&m, None, &PickOptions::default()).unwrap();
        let f = flow(&m, &pair, 0.0, 0.0);
        assert_eq!(f.positions(), m.positions());
        assert_eq!(constraint_map(&m, &pair, 0.0, 0.0), (m.area(), m.enclosed_volume()));
    }

    #[test]
    fn flow_group_property() {
        let m = shapes::icosphere(3, 1.0);
        let pair = CorrectionPair::new(
            &m,
            BumpField::new(Vec3::z(), 0.5, Vec3::z()),
            BumpField::new(-Vec3::z(), 0.5, -Vec3::z()),
        );
        let there = flow(&m, &pair, 0.1, 0.0);
        let back = flow(&there, &pair, -0.1, 0.0);
        for (a, b) in back.positions().iter().zip(m.positions()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn outward_bump_increases_volume() {
        let m = shapes::icosphere(3, 1.0);
        let field = BumpField::new(Vec3::x(), 0.4, Vec3::x());
        let pair = CorrectionPair::new(&m, field, BumpField::new(-Vec3::x(), 0.4, -Vec3::x()));
        assert!(pair.jacobian0[(1, 0)] > 0.0);
        assert!(constraint_map(&m, &pair, 1e-3, 0.0).1 > m.enclosed_volume());
    }

    #[test]
    fn support_locality_is_bit_exact() {
        let m = shapes::icosphere(3, 1.0);
        let pair = CorrectionPair::new(
            &m,
            BumpField::new(Vec3::z(), 0.4, Vec3::z()),
            BumpField::new(Vec3::x(), 0.4, Vec3::x()),
        );
        let f = flow(&m, &pair, 0.07, -0.05);
        for (a, b) in f.positions().iter().zip(m.positions()) {
            if !pair.field_x.in_support(b) && !pair.field_y.in_support(b) {
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn protected_region_respected() {
        let m = shapes::icosphere(3, 1.0);
        let cap = Ball {
            center: Vec3::z(),
            radius: 0.6,
        };
        let pair = pick_fields(&m, Some(&cap), &PickOptions::default()).unwrap();
        for f in [pair.field_x, pair.field_y] {
            assert!((f.center - cap.center).norm() >= cap.radius + f.radius);
        }
        assert!(pair.supports_disjoint());
    }

    #[test]
    fn targets_at_current_values() {
        let m = shapes::icosphere(2, 1.0);
        let pair = pick_fields(&m, None, &PickOptions::default()).unwrap();
        let c = Constraints::from_mesh(&m, 0.0).unwrap();
        let out = solve_correction(&m, &pair, &c, &SolveOptions::default()).unwrap();
        assert_eq!((out.s, out.t), (0.0, 0.0));
        assert_eq!(out.mesh.positions(), m.positions());
    }

    #[test]
    fn zero_amplitude_pair_has_no_drift() {
        let m = shapes::icosphere(2, 1.0);
        let x = BumpField::new(Vec3::z(), 0.5, Vec3::z()).with_amplitude(0.0);
        let y = BumpField::new(-Vec3::z(), 0.5, -Vec3::z()).with_amplitude(0.0);
        let pair = CorrectionPair::new(&m, x, y);
        let d = curvature_drift_bound(&m, &pair, 0.1, 5, 0.0).unwrap();
        assert_eq!(d.curvature_mass, 0.0);
        assert_eq!(d.helfrich, 0.0);
    }
}
