//! Discrete curvature operators and bending energies.
//!
//! Mean curvature uses the cotangent formula with mixed-Voronoi vertex
//! areas (obtuse-safe), Gauss curvature the angle defect. Energies are
//! lumped at vertices.

use std::f64::consts::PI;

use serde::Serialize;

use crate::autodiff::{cross3, dot3, sub3, Real, V3};
use crate::error::{Error, Result};
use crate::mesh::{TriMesh, Vec3};

/// Cotangent weights are clamped to this magnitude.
pub const COT_CLAMP: f64 = 1e8;

/// Per-vertex curvature quantities.
///
/// `mean_curvature_vector` is `H = H̄ ν`; `mean_curvature` is the signed
/// scalar `H̄` (sum of principal curvatures, positive on an outward
/// oriented sphere), signed by the area-weighted vertex normal.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureField {
    pub mean_curvature_vector: Vec<Vec3>,
    pub mean_curvature: Vec<f64>,
    pub gauss_curvature: Vec<f64>,
    pub angle_defect: Vec<f64>,
    pub vertex_area: Vec<f64>,
    pub sec_fund_sq: Vec<f64>,
}

pub(crate) struct FaceTerms<T> {
    /// Contribution `Σ cot (x_i - x_j)` to each corner's Laplacian sum.
    pub lap: [V3<T>; 3],
    /// Mixed-Voronoi area assigned to each corner.
    pub varea: [T; 3],
    pub cot: [T; 3],
}

fn clamp_cot<T: Real>(c: T) -> T {
    if c.value() > COT_CLAMP {
        T::cst(COT_CLAMP)
    } else if c.value() < -COT_CLAMP {
        T::cst(-COT_CLAMP)
    } else {
        c
    }
}

pub(crate) fn face_terms<T: Real>(p: [V3<T>; 3]) -> FaceTerms<T> {
    let zero = T::cst(0.0);
    let n = cross3(sub3(p[1], p[0]), sub3(p[2], p[0]));
    let double_area = dot3(n, n).sqrt();
    let mut cot = [zero; 3];
    let mut dots = [0.0; 3];
    for k in 0..3 {
        let e1 = sub3(p[(k + 1) % 3], p[k]);
        let e2 = sub3(p[(k + 2) % 3], p[k]);
        let d = dot3(e1, e2);
        dots[k] = d.value();
        cot[k] = clamp_cot(d / double_area);
    }
    let mut lap = [[zero; 3]; 3];
    for k in 0..3 {
        let (i, j) = (k, (k + 1) % 3);
        let w = cot[(k + 2) % 3];
        let e = sub3(p[i], p[j]);
        for c in 0..3 {
            lap[i][c] = lap[i][c] + w * e[c];
            lap[j][c] = lap[j][c] - w * e[c];
        }
    }
    let area = double_area.scale(0.5);
    let varea = match (0..3).find(|&k| dots[k] < 0.0) {
        None => {
            let mut a = [zero; 3];
            for k in 0..3 {
                let eij = sub3(p[k], p[(k + 1) % 3]);
                let eik = sub3(p[k], p[(k + 2) % 3]);
                a[k] = (dot3(eij, eij) * cot[(k + 2) % 3] + dot3(eik, eik) * cot[(k + 1) % 3]).scale(0.125);
            }
            a
        }
        Some(obtuse) => {
            let mut a = [area.scale(0.25); 3];
            a[obtuse] = area.scale(0.5);
            a
        }
    };
    FaceTerms { lap, varea, cot }
}

pub(crate) fn to_v3(p: &Vec3) -> V3<f64> {
    [p.x, p.y, p.z]
}

fn check_face(mesh: &TriMesh, positions: &[Vec3], f: usize) -> Result<()> {
    let [a, b, c] = mesh.face(f);
    let n = (positions[b] - positions[a]).cross(&(positions[c] - positions[a]));
    let dbl = n.norm();
    if !(dbl > 0.0) || !dbl.is_finite() {
        return Err(Error::DegenerateTriangle(f));
    }
    Ok(())
}

fn face_terms_at(mesh: &TriMesh, positions: &[Vec3], f: usize) -> FaceTerms<f64> {
    let [a, b, c] = mesh.face(f);
    face_terms([to_v3(&positions[a]), to_v3(&positions[b]), to_v3(&positions[c])])
}

/// Interior angles of a triangle, computed with `atan2` for accuracy.
pub(crate) fn face_angles(p: [Vec3; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..3 {
        let e1 = p[(k + 1) % 3] - p[k];
        let e2 = p[(k + 2) % 3] - p[k];
        out[k] = e1.cross(&e2).norm().atan2(e1.dot(&e2));
    }
    out
}

/// Raw per-vertex sums: cotangent Laplacian of position, mixed area,
/// area-weighted normal (unnormalised).
pub(crate) struct VertexSums {
    pub lap: Vec<Vec3>,
    pub area: Vec<f64>,
    pub normal: Vec<Vec3>,
}

pub(crate) fn vertex_sums(mesh: &TriMesh, positions: &[Vec3]) -> Result<VertexSums> {
    let n = mesh.num_vertices();
    let mut lap = vec![Vec3::zeros(); n];
    let mut area = vec![0.0; n];
    let mut normal = vec![Vec3::zeros(); n];
    for f in 0..mesh.num_faces() {
        check_face(mesh, positions, f)?;
        let t = face_terms_at(mesh, positions, f);
        let face = mesh.face(f);
        let [a, b, c] = face;
        let nf = 0.5 * (positions[b] - positions[a]).cross(&(positions[c] - positions[a]));
        for k in 0..3 {
            lap[face[k]] += Vec3::new(t.lap[k][0], t.lap[k][1], t.lap[k][2]);
            area[face[k]] += t.varea[k];
            normal[face[k]] += nf;
        }
    }
    Ok(VertexSums { lap, area, normal })
}

/// Signed scalar mean curvature from the Laplacian sum, mixed area and normal.
pub(crate) fn signed_mean(lap: &Vec3, area: f64, normal: &Vec3) -> f64 {
    let h = lap.norm() / (2.0 * area);
    if lap.dot(normal) < 0.0 {
        -h
    } else {
        h
    }
}

/// Helfrich energy density contribution of a single vertex computed only from
/// its incident faces; used by local finite differences.
pub(crate) fn vertex_energy(mesh: &TriMesh, positions: &[Vec3], v: usize, h0: f64) -> f64 {
    let mut lap = Vec3::zeros();
    let mut area = 0.0;
    let mut normal = Vec3::zeros();
    for &f in mesh.vertex_faces(v) {
        let t = face_terms_at(mesh, positions, f);
        let face = mesh.face(f);
        let k = face.iter().position(|&w| w == v).unwrap();
        lap += Vec3::new(t.lap[k][0], t.lap[k][1], t.lap[k][2]);
        area += t.varea[k];
        let [a, b, c] = face;
        normal += (positions[b] - positions[a]).cross(&(positions[c] - positions[a]));
    }
    let hbar = signed_mean(&lap, area, &normal);
    (hbar - h0).powi(2) * area
}

pub fn compute_curvature(mesh: &TriMesh) -> Result<CurvatureField> {
    let positions = mesh.positions();
    let sums = vertex_sums(mesh, positions)?;
    let n = mesh.num_vertices();
    let mut angle_sum = vec![0.0; n];
    for f in 0..mesh.num_faces() {
        let angles = face_angles(mesh.face_vertices(f));
        for (k, &v) in mesh.face(f).iter().enumerate() {
            angle_sum[v] += angles[k];
        }
    }
    let mut field = CurvatureField {
        mean_curvature_vector: Vec::with_capacity(n),
        mean_curvature: Vec::with_capacity(n),
        gauss_curvature: Vec::with_capacity(n),
        angle_defect: Vec::with_capacity(n),
        vertex_area: sums.area.clone(),
        sec_fund_sq: Vec::with_capacity(n),
    };
    for i in 0..n {
        let a = sums.area[i];
        let hvec = sums.lap[i] / (2.0 * a);
        let defect = 2.0 * PI - angle_sum[i];
        let k = defect / a;
        field.mean_curvature_vector.push(hvec);
        field.mean_curvature.push(signed_mean(&sums.lap[i], a, &sums.normal[i]));
        field.gauss_curvature.push(k);
        field.angle_defect.push(defect);
        field.sec_fund_sq.push(sec_fund_sq(hvec.norm_squared(), k));
    }
    Ok(field)
}

impl CurvatureField {
    pub fn helfrich_energy(&self, h0: f64) -> f64 {
        self.mean_curvature
            .iter()
            .zip(&self.vertex_area)
            .map(|(h, a)| (h - h0).powi(2) * a)
            .sum()
    }

    pub fn willmore_energy(&self) -> f64 {
        0.25 * self.helfrich_energy(0.0)
    }

    /// `∫ |H̄|² dμ`.
    pub fn mean_curvature_l2_sq(&self) -> f64 {
        self.helfrich_energy(0.0)
    }

    pub fn total_curvature_mass(&self) -> f64 {
        self.sec_fund_sq.iter().zip(&self.vertex_area).map(|(s, a)| s * a).sum()
    }

    /// `Σ |A|²_i A_i` over vertices strictly inside the ball.
    pub fn curvature_mass_in_ball(&self, mesh: &TriMesh, center: &Vec3, radius: f64) -> f64 {
        mesh.positions()
            .iter()
            .enumerate()
            .filter(|(_, p)| (*p - center).norm() < radius)
            .map(|(i, _)| self.sec_fund_sq[i] * self.vertex_area[i])
            .sum()
    }
}

/// `|A|² = κ₁² + κ₂²` from `H̄²` and `K`. Equals `H̄² - 2K` whenever the
/// discrete values admit real principal curvatures (`H̄² ≥ 4K`), and the
/// lower bound `2|K|` of `κ₁² + κ₂²` at vertices such as cone tips where
/// they do not.
pub fn sec_fund_sq(h2: f64, k: f64) -> f64 {
    (h2 - 2.0 * k).max(2.0 * k)
}

/// Sum of angle defects; equals `2πχ` for every closed mesh.
///
/// Summed as `π (2V - F) - Σ_f (angle sum_f - π)` so that rounding does not
/// grow with the number of vertices.
pub fn gauss_bonnet_total(mesh: &TriMesh) -> f64 {
    let excess: f64 = (0..mesh.num_faces())
        .map(|f| face_angles(mesh.face_vertices(f)).iter().sum::<f64>() - PI)
        .sum();
    PI * (2 * mesh.num_vertices() as i64 - mesh.num_faces() as i64) as f64 - excess
}

/// `Σ_i (H̄_i - h0)² A_i`.
pub fn helfrich_energy(mesh: &TriMesh, h0: f64) -> Result<f64> {
    helfrich_energy_at(mesh, mesh.positions(), h0)
}

pub(crate) fn helfrich_energy_at(mesh: &TriMesh, positions: &[Vec3], h0: f64) -> Result<f64> {
    let s = vertex_sums(mesh, positions)?;
    Ok((0..mesh.num_vertices())
        .map(|i| (signed_mean(&s.lap[i], s.area[i], &s.normal[i]) - h0).powi(2) * s.area[i])
        .sum())
}

pub fn willmore_energy(mesh: &TriMesh) -> Result<f64> {
    Ok(0.25 * helfrich_energy(mesh, 0.0)?)
}

/// Discrete `∫_{B_radius(center)} |A|² dμ`.
pub fn local_curvature_mass(mesh: &TriMesh, center: &Vec3, radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Ok(0.0);
    }
    Ok(compute_curvature(mesh)?.curvature_mass_in_ball(mesh, center, radius))
}
