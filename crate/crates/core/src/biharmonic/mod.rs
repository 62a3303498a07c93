//! Clamped biharmonic graphs on discs and graphical patch replacement.
//!
//! [`solve_biharmonic`] solves `Δ²w = 0` on the disc `B_σ` with `w = u` and
//! `∂w/∂ν = ∂u/∂ν` on the boundary circle. The disc is discretized by the
//! 13-point stencil on a square grid; grid nodes outside the open disc that
//! the stencil reaches carry the first-order normal extension
//! `u(θ) + (r - σ) ∂u/∂ν(θ)`, which imposes both boundary conditions and
//! reproduces affine data exactly.

mod banded;
mod patch;
mod replace;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use banded::BandMatrix;

pub use patch::{extract_patch, extract_patch_with, good_radius, level_curvature_integral, GraphPatch, DEFAULT_PATCH_GRID};
pub use replace::{replace_patch, replace_patch_at, DeltaReport, ReplaceOptions, Replacement};

/// Trigonometric interpolant of equally spaced periodic samples.
#[derive(Debug, Clone)]
struct Fourier {
    a0: f64,
    a: Vec<f64>,
    b: Vec<f64>,
    nyquist: f64,
}

impl Fourier {
    fn new(samples: &[f64]) -> Fourier {
        let m = samples.len();
        let half = m / 2;
        let top = if m % 2 == 0 { half.saturating_sub(1) } else { half };
        let mut a = vec![0.0; top];
        let mut b = vec![0.0; top];
        let a0 = samples.iter().sum::<f64>() / m as f64;
        for k in 1..=top {
            let (mut sa, mut sb) = (0.0, 0.0);
            for (j, f) in samples.iter().enumerate() {
                let t = 2.0 * PI * (k * j % m) as f64 / m as f64;
                sa += f * t.cos();
                sb += f * t.sin();
            }
            a[k - 1] = 2.0 * sa / m as f64;
            b[k - 1] = 2.0 * sb / m as f64;
        }
        let nyquist = if m % 2 == 0 {
            samples
                .iter()
                .enumerate()
                .map(|(j, f)| if j % 2 == 0 { *f } else { -*f })
                .sum::<f64>()
                / m as f64
        } else {
            0.0
        };
        Fourier { a0, a, b, nyquist }
    }

    fn eval(&self, theta: f64) -> f64 {
        let mut s = self.a0;
        for k in 0..self.a.len() {
            let t = (k + 1) as f64 * theta;
            s += self.a[k] * t.cos() + self.b[k] * t.sin();
        }
        if self.nyquist != 0.0 {
            s += self.nyquist * ((self.a.len() + 1) as f64 * theta).cos();
        }
        s
    }

    fn derivative(&self, theta: f64) -> f64 {
        let mut s = 0.0;
        for k in 0..self.a.len() {
            let kk = (k + 1) as f64;
            let t = kk * theta;
            s += kk * (self.b[k] * t.cos() - self.a[k] * t.sin());
        }
        s
    }
}

/// `|A|²` of the graph of `u` at a point with gradient `g` and Hessian
/// `(uxx, uxy, uyy)`.
pub fn graph_sec_fund_sq(g: [f64; 2], hess: [f64; 3]) -> f64 {
    let q = 1.0 + g[0] * g[0] + g[1] * g[1];
    // inverse metric I - g gᵀ / q
    let ginv = [
        [1.0 - g[0] * g[0] / q, -g[0] * g[1] / q],
        [-g[0] * g[1] / q, 1.0 - g[1] * g[1] / q],
    ];
    let a = [[hess[0], hess[1]], [hess[1], hess[2]]];
    let mut m = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                m[i][j] += ginv[i][k] * a[k][j];
            }
        }
    }
    (m[0][0] * m[0][0] + m[0][1] * m[1][0] + m[1][0] * m[0][1] + m[1][1] * m[1][1]) / q
}

/// Boundary data on `∂B_σ(0)` sampled at `θ_k = 2πk/m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTraces {
    pub sigma: f64,
    pub u: Vec<f64>,
    pub du_dnu: Vec<f64>,
    /// `|A|²` of the graph of `u` at the samples, if known.
    pub sec_fund_sq: Option<Vec<f64>>,
}

impl BoundaryTraces {
    pub fn angles(&self) -> Vec<f64> {
        let m = self.u.len();
        (0..m).map(|k| 2.0 * PI * k as f64 / m as f64).collect()
    }

    /// Samples a smooth height function and its derivatives by central
    /// differences.
    pub fn from_fn(sigma: f64, samples: usize, u: impl Fn(f64, f64) -> f64) -> BoundaryTraces {
        let h = 1e-4 * sigma;
        let mut us = Vec::with_capacity(samples);
        let mut dn = Vec::with_capacity(samples);
        let mut a2 = Vec::with_capacity(samples);
        for k in 0..samples {
            let t = 2.0 * PI * k as f64 / samples as f64;
            let (c, s) = (t.cos(), t.sin());
            let (x, y) = (sigma * c, sigma * s);
            let f0 = u(x, y);
            let gx = (u(x + h, y) - u(x - h, y)) / (2.0 * h);
            let gy = (u(x, y + h) - u(x, y - h)) / (2.0 * h);
            let uxx = (u(x + h, y) - 2.0 * f0 + u(x - h, y)) / (h * h);
            let uyy = (u(x, y + h) - 2.0 * f0 + u(x, y - h)) / (h * h);
            let uxy = (u(x + h, y + h) - u(x + h, y - h) - u(x - h, y + h) + u(x - h, y - h)) / (4.0 * h * h);
            us.push(f0);
            dn.push(gx * c + gy * s);
            a2.push(graph_sec_fund_sq([gx, gy], [uxx, uxy, uyy]));
        }
        BoundaryTraces {
            sigma,
            u: us,
            du_dnu: dn,
            sec_fund_sq: Some(a2),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.u.len() < 64 || self.du_dnu.len() != self.u.len() {
            return Err(Error::InvalidInput(format!(
                "boundary traces need at least 64 matching samples, got {} and {}",
                self.u.len(),
                self.du_dnu.len()
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidInput("disc radius must be positive".into()));
        }
        Ok(())
    }

    /// `sup |Du|` on the circle, with the tangential part taken from the
    /// trigonometric interpolant of `u`.
    pub fn gradient_sup(&self) -> f64 {
        let f = Fourier::new(&self.u);
        self.angles()
            .iter()
            .zip(&self.du_dnu)
            .map(|(t, dn)| (dn * dn + (f.derivative(*t) / self.sigma).powi(2)).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn value_sup(&self) -> f64 {
        self.u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `∫_{∂B_σ} |A|² dH¹`, by the trapezoid rule on the samples.
    pub fn boundary_curvature_integral(&self) -> Option<f64> {
        let a2 = self.sec_fund_sq.as_ref()?;
        Some(a2.iter().sum::<f64>() * 2.0 * PI * self.sigma / a2.len() as f64)
    }
}

/// The quantities entering the clamped comparison estimates and their
/// observed ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub boundary_value_error: f64,
    pub boundary_normal_error: f64,
    pub w_sup: f64,
    pub w_grad_sup: f64,
    pub hessian_l2_sq: f64,
    pub u_sup: f64,
    pub u_grad_sup: f64,
    pub boundary_curvature_integral: Option<f64>,
    /// `(‖w‖∞/σ) / (‖u‖∞,∂/σ + ‖Du‖∞,∂)`.
    pub c_sup: Option<f64>,
    /// `‖Dw‖∞ / ‖Du‖∞,∂`.
    pub c_grad: Option<f64>,
    /// `∫|D²w|² / (σ ∫_∂ |A|² dH¹)`.
    pub c_hessian: Option<f64>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    const TINY: f64 = 1e-300;
    if den > TINY {
        Some(num / den)
    } else if num <= 1e-12 {
        Some(0.0)
    } else {
        None
    }
}

/// Discrete clamped biharmonic solution on a square grid over `B_σ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiharmonicPatch {
    pub sigma: f64,
    /// Nodes per side of the grid over `[-σ, σ]²`; two padding layers are
    /// added on each side.
    pub n: usize,
    pub spacing: f64,
    /// Values on the padded `(n + 4)²` grid, row-major in `y`.
    pub w: Vec<f64>,
    pub interior: Vec<bool>,
    pub traces: BoundaryTraces,
    pub residual: f64,
    pub report: EstimateReport,
}

const PAD: usize = 2;

fn bicubic(w: &[f64], side: usize, origin: f64, h: f64, x: f64, y: f64) -> f64 {
    let gx = ((x - origin) / h).clamp(1.0, side as f64 - 3.0 - 1e-12);
    let gy = ((y - origin) / h).clamp(1.0, side as f64 - 3.0 - 1e-12);
    let (i0, j0) = (gx.floor() as usize, gy.floor() as usize);
    let (tx, ty) = (gx - i0 as f64, gy - j0 as f64);
    let weights = |t: f64| {
        let t2 = t * t;
        let t3 = t2 * t;
        [
            0.5 * (-t3 + 2.0 * t2 - t),
            0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
            0.5 * (-3.0 * t3 + 4.0 * t2 + t),
            0.5 * (t3 - t2),
        ]
    };
    let (wx, wy) = (weights(tx), weights(ty));
    let mut s = 0.0;
    for (b, wyb) in wy.iter().enumerate() {
        for (a, wxa) in wx.iter().enumerate() {
            s += wxa * wyb * w[(j0 + b - 1) * side + i0 + a - 1];
        }
    }
    s
}

const MAX_GHOST_SWEEPS: usize = 200;

const STENCIL: [(i64, i64, f64); 13] = [
    (0, 0, 20.0),
    (1, 0, -8.0),
    (-1, 0, -8.0),
    (0, 1, -8.0),
    (0, -1, -8.0),
    (1, 1, 2.0),
    (1, -1, 2.0),
    (-1, 1, 2.0),
    (-1, -1, 2.0),
    (2, 0, 1.0),
    (-2, 0, 1.0),
    (0, 2, 1.0),
    (0, -2, 1.0),
];

impl BiharmonicPatch {
    pub fn side(&self) -> usize {
        self.n + 2 * PAD
    }

    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        let o = -self.sigma - PAD as f64 * self.spacing;
        (o + i as f64 * self.spacing, o + j as f64 * self.spacing)
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.w[j * self.side() + i]
    }

    /// Catmull–Rom bicubic interpolation of the grid values; exact for
    /// affine data.
    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        let o = -self.sigma - PAD as f64 * self.spacing;
        bicubic(&self.w, self.side(), o, self.spacing, x, y)
    }

    /// Sup norm of `w` over grid nodes in the closed disc.
    pub fn sup_norm(&self) -> f64 {
        let side = self.side();
        let mut m: f64 = 0.0;
        for j in 0..side {
            for i in 0..side {
                let (x, y) = self.node(i, j);
                if x * x + y * y <= self.sigma * self.sigma {
                    m = m.max(self.at(i, j).abs());
                }
            }
        }
        m
    }
}

/// Solves the clamped biharmonic problem on `B_σ(0)` for the given traces
/// on an `n × n` grid (plus padding).
pub fn solve_biharmonic(traces: &BoundaryTraces, n: usize) -> Result<BiharmonicPatch> {
    traces.validate()?;
    if n < 33 {
        return Err(Error::InvalidInput(format!("grid_n must be at least 33, got {n}")));
    }
    let sigma = traces.sigma;
    let h = 2.0 * sigma / (n - 1) as f64;
    let side = n + 2 * PAD;
    let origin = -sigma - PAD as f64 * h;
    let fu = Fourier::new(&traces.u);
    let fdn = Fourier::new(&traces.du_dnu);

    let mut w = vec![0.0; side * side];
    let mut interior = vec![false; side * side];
    let mut index = vec![usize::MAX; side * side];
    let mut unknowns = Vec::new();
    // exterior nodes as (node, angle, r - σ)
    let mut ghosts = Vec::new();
    for j in 0..side {
        for i in 0..side {
            let (x, y) = (origin + i as f64 * h, origin + j as f64 * h);
            let r = x.hypot(y);
            let p = j * side + i;
            if r < sigma * (1.0 - 1e-12) {
                interior[p] = true;
                index[p] = unknowns.len();
                unknowns.push(p);
            } else {
                let t = y.atan2(x);
                w[p] = fu.eval(t) + (r - sigma) * fdn.eval(t);
                ghosts.push((p, t, r - sigma));
            }
        }
    }
    if unknowns.is_empty() {
        return Err(Error::InvalidInput("grid has no interior nodes".into()));
    }

    let neighbors = |p: usize| {
        let (i, j) = ((p % side) as i64, (p / side) as i64);
        STENCIL.iter().map(move |&(di, dj, c)| (((j + dj) as usize) * side + (i + di) as usize, c))
    };
    let mut band = 0;
    for &p in &unknowns {
        for (q, _) in neighbors(p) {
            if interior[q] {
                band = band.max(index[p].abs_diff(index[q]));
            }
        }
    }
    let mut a = BandMatrix::zeros(unknowns.len(), band);
    for (row, &p) in unknowns.iter().enumerate() {
        for (q, c) in neighbors(p) {
            if interior[q] {
                a.add(row, index[q], c);
            }
        }
    }
    let chol = a.factor()?;
    let assemble = |w: &[f64]| -> Vec<f64> {
        unknowns
            .iter()
            .map(|&p| neighbors(p).filter(|(q, _)| !interior[*q]).map(|(q, c)| -c * w[q]).sum())
            .collect()
    };
    let solve = |rhs: &[f64]| -> Vec<f64> {
        let mut x = chol.solve(rhs);
        // one step of iterative refinement
        let ax = a.mul(&x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, v)| b - v).collect();
        let dx = chol.solve(&r);
        x.iter_mut().zip(&dx).for_each(|(v, d)| *v += d);
        x
    };

    // Ghost values carry the first-order extension plus a curvature term
    // ½(r - σ)² w_νν, with w_νν read off the interior solution along the
    // inward normal; sweeps repeat until the ghost values settle.
    let angles = traces.angles();
    let d = 2.0 * h;
    let mut rhs = assemble(&w);
    let mut x = solve(&rhs);
    for _ in 0..MAX_GHOST_SWEEPS {
        for (row, &p) in unknowns.iter().enumerate() {
            w[p] = x[row];
        }
        let kappa: Vec<f64> = angles
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let inner = bicubic(&w, side, origin, h, (sigma - d) * t.cos(), (sigma - d) * t.sin());
                2.0 * (inner - traces.u[k] + d * traces.du_dnu[k]) / (d * d)
            })
            .collect();
        let fk = Fourier::new(&kappa);
        let mut change: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for &(p, t, dr) in &ghosts {
            let v = fu.eval(t) + dr * fdn.eval(t) + 0.5 * dr * dr * fk.eval(t);
            change = change.max((v - w[p]).abs());
            scale = scale.max(v.abs());
            w[p] = v;
        }
        rhs = assemble(&w);
        x = solve(&rhs);
        if change <= 1e-14 * scale {
            break;
        }
    }
    for (row, &p) in unknowns.iter().enumerate() {
        w[p] = x[row];
    }

    let ax = a.mul(&x);
    let wmax = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let residual = rhs.iter().zip(&ax).map(|(b, v)| (b - v).abs()).fold(0.0, f64::max) / wmax.max(1.0);
    if residual > 1e-8 {
        return Err(Error::SolverFailure(residual));
    }

    let mut patch = BiharmonicPatch {
        sigma,
        n,
        spacing: h,
        w,
        interior,
        traces: traces.clone(),
        residual,
        report: EstimateReport {
            boundary_value_error: 0.0,
            boundary_normal_error: 0.0,
            w_sup: 0.0,
            w_grad_sup: 0.0,
            hessian_l2_sq: 0.0,
            u_sup: 0.0,
            u_grad_sup: 0.0,
            boundary_curvature_integral: None,
            c_sup: None,
            c_grad: None,
            c_hessian: None,
        },
    };
    patch.report = estimate_report(&patch);
    Ok(patch)
}

fn estimate_report(p: &BiharmonicPatch) -> EstimateReport {
    let side = p.side();
    let h = p.spacing;
    let tr = &p.traces;
    let mut value_err: f64 = 0.0;
    let mut normal_err: f64 = 0.0;
    for (k, t) in tr.angles().into_iter().enumerate() {
        let (c, s) = (t.cos(), t.sin());
        let on = p.value_at(p.sigma * c, p.sigma * s);
        let in1 = p.value_at((p.sigma - h) * c, (p.sigma - h) * s);
        let in2 = p.value_at((p.sigma - 2.0 * h) * c, (p.sigma - 2.0 * h) * s);
        value_err = value_err.max((on - tr.u[k]).abs());
        let one_sided = (3.0 * on - 4.0 * in1 + in2) / (2.0 * h);
        normal_err = normal_err.max((one_sided - tr.du_dnu[k]).abs());
    }

    let mut grad_sup: f64 = 0.0;
    let mut hess = 0.0;
    for j in 0..side {
        for i in 0..side {
            if !p.interior[j * side + i] {
                continue;
            }
            let c = p.at(i, j);
            let (e, wv, nn, sv) = (p.at(i + 1, j), p.at(i - 1, j), p.at(i, j + 1), p.at(i, j - 1));
            let gx = (e - wv) / (2.0 * h);
            let gy = (nn - sv) / (2.0 * h);
            grad_sup = grad_sup.max(gx.hypot(gy));
            let uxx = (e - 2.0 * c + wv) / (h * h);
            let uyy = (nn - 2.0 * c + sv) / (h * h);
            let uxy = (p.at(i + 1, j + 1) - p.at(i + 1, j - 1) - p.at(i - 1, j + 1) + p.at(i - 1, j - 1)) / (4.0 * h * h);
            hess += (uxx * uxx + 2.0 * uxy * uxy + uyy * uyy) * h * h;
        }
    }
    let w_sup = p.sup_norm();
    let u_sup = tr.value_sup();
    let u_grad_sup = tr.gradient_sup();
    let bci = tr.boundary_curvature_integral();
    EstimateReport {
        boundary_value_error: value_err,
        boundary_normal_error: normal_err,
        w_sup,
        w_grad_sup: grad_sup,
        hessian_l2_sq: hess,
        u_sup,
        u_grad_sup,
        boundary_curvature_integral: bci,
        c_sup: ratio(w_sup / p.sigma, u_sup / p.sigma + u_grad_sup),
        c_grad: ratio(grad_sup, u_grad_sup),
        c_hessian: bci.and_then(|b| ratio(hess, p.sigma * b)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fourier_interpolates_low_modes() {
        let f = |t: f64| 1.0 + 0.5 * (2.0 * t).cos() - 0.25 * (3.0 * t).sin();
        let samples: Vec<f64> = (0..64).map(|k| f(2.0 * PI * k as f64 / 64.0)).collect();
        let four = Fourier::new(&samples);
        for t in [0.1, 1.3, 4.0] {
            assert!((four.eval(t) - f(t)).abs() < 1e-13);
            let d = -1.0 * (2.0 * t).sin() - 0.75 * (3.0 * t).cos();
            assert!((four.derivative(t) - d).abs() < 1e-12);
        }
    }

    #[test]
    fn sec_fund_of_sphere_graph() {
        // graph of sqrt(1 - x² - y²) at (0.3, 0.2): |A|² = 2
        let (x, y) = (0.3f64, 0.2f64);
        let z = (1.0 - x * x - y * y).sqrt();
        let g = [-x / z, -y / z];
        let z3 = z * z * z;
        let hess = [-(1.0 - y * y) / z3, -x * y / z3, -(1.0 - x * x) / z3];
        assert!((graph_sec_fund_sq(g, hess) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn affine_data_is_reproduced() {
        let tr = BoundaryTraces::from_fn(0.7, 64, |x, y| 0.3 + 0.4 * x - 0.2 * y);
        let p = solve_biharmonic(&tr, 33).unwrap();
        let side = p.side();
        for j in 0..side {
            for i in 0..side {
                let (x, y) = p.node(i, j);
                if x.hypot(y) <= p.sigma {
                    assert!((p.at(i, j) - (0.3 + 0.4 * x - 0.2 * y)).abs() < 1e-8);
                }
            }
        }
        assert!(p.report.boundary_value_error < 1e-8);
        assert!(p.report.boundary_normal_error < 1e-6);
        assert!(p.residual <= 1e-10);
    }

    #[test]
    fn zero_data_gives_zero() {
        let tr = BoundaryTraces::from_fn(1.0, 64, |_, _| 0.0);
        let p = solve_biharmonic(&tr, 41).unwrap();
        assert!(p.sup_norm() <= 1e-12);
        assert_eq!(p.report.c_hessian, Some(0.0));
    }

    #[test]
    fn quadratic_radial_data_is_biharmonic() {
        // r² is biharmonic; stencil and ghost extension are exact on quadratics
        let tr = BoundaryTraces::from_fn(0.5, 128, |x, y| x * x + y * y);
        let p = solve_biharmonic(&tr, 33).unwrap();
        for (x, y) in [(0.0, 0.0), (0.2, -0.1), (-0.3, 0.3)] {
            assert!((p.value_at(x, y) - (x * x + y * y)).abs() < 1e-10);
        }
    }

    #[test]
    fn input_validation() {
        let tr = BoundaryTraces::from_fn(1.0, 32, |_, _| 0.0);
        assert!(matches!(solve_biharmonic(&tr, 33), Err(Error::InvalidInput(_))));
        let tr = BoundaryTraces::from_fn(1.0, 64, |_, _| 0.0);
        assert!(matches!(solve_biharmonic(&tr, 17), Err(Error::InvalidInput(_))));
    }
}
