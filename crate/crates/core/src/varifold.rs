//! Oriented sample clouds, the integer volume representative and first
//! variations of area and volume.
//!
//! The representative `θ_R(x)` is minus the generalized winding number of
//! the surface around `x`, so that `-∫ θ_R dx` equals the signed enclosed
//! volume: an outward-oriented sphere has `θ_R = -1` inside and `0`
//! outside.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{TriMesh, Vec3};

/// A smooth vector field on ℝ³.
pub trait VectorField: Sync {
    fn eval(&self, x: &Vec3) -> Vec3;
}

impl<F> VectorField for F
where
    F: Fn(&Vec3) -> Vec3 + Sync,
{
    fn eval(&self, x: &Vec3) -> Vec3 {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientedSample {
    pub point: Vec3,
    /// Unit normal, the Hodge dual of the orienting 2-vector.
    pub normal: Vec3,
    pub weight: f64,
    pub theta_plus: u32,
    pub theta_minus: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OrientedSampleCloud {
    samples: Vec<OrientedSample>,
}

impl OrientedSampleCloud {
    pub fn new(samples: Vec<OrientedSample>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if !(s.weight > 0.0) || !s.weight.is_finite() {
                return Err(Error::InvalidInput(format!("sample {i}: weight must be positive")));
            }
            if s.theta_plus + s.theta_minus == 0 {
                return Err(Error::InvalidInput(format!("sample {i}: zero multiplicity")));
            }
            if (s.normal.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!("sample {i}: normal is not a unit vector")));
            }
        }
        Ok(OrientedSampleCloud { samples })
    }

    pub fn samples(&self) -> &[OrientedSample] {
        &self.samples
    }

    pub fn merged(&self, other: &OrientedSampleCloud) -> OrientedSampleCloud {
        let mut samples = self.samples.clone();
        samples.extend_from_slice(&other.samples);
        OrientedSampleCloud { samples }
    }

    pub fn translated(&self, offset: &Vec3) -> OrientedSampleCloud {
        let samples = self
            .samples
            .iter()
            .map(|s| OrientedSample {
                point: s.point + offset,
                ..*s
            })
            .collect();
        OrientedSampleCloud { samples }
    }

    /// Total mass `Σ w (θ₊ + θ₋)`.
    pub fn area(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.weight * (s.theta_plus + s.theta_minus) as f64)
            .sum()
    }

    /// `(1/3) Σ w ⟨x, n⟩ (θ₊ - θ₋)`.
    pub fn volume(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.weight * s.point.dot(&s.normal) * (s.theta_plus as f64 - s.theta_minus as f64))
            .sum::<f64>()
            / 3.0
    }

    /// `Σ w n (θ₊ - θ₋)`; vanishes for clouds sampled from closed surfaces.
    pub fn net_normal(&self) -> Vec3 {
        self.samples
            .iter()
            .map(|s| s.normal * s.weight * (s.theta_plus as f64 - s.theta_minus as f64))
            .sum()
    }

    /// CSV with columns `x,y,z,nx,ny,nz,w,theta_plus,theta_minus`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,z,nx,ny,nz,w,theta_plus,theta_minus\n");
        for s in &self.samples {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                s.point.x, s.point.y, s.point.z, s.normal.x, s.normal.y, s.normal.z, s.weight, s.theta_plus, s.theta_minus
            )
            .unwrap();
        }
        out
    }
}

/// One sample per face at the centroid, weighted by face area.
pub fn cloud_from_mesh(mesh: &TriMesh, multiplicity: u32, flip: bool) -> Result<OrientedSampleCloud> {
    if multiplicity == 0 {
        return Err(Error::InvalidInput("multiplicity must be positive".into()));
    }
    let sign = if flip { -1.0 } else { 1.0 };
    let samples = (0..mesh.num_faces())
        .map(|f| OrientedSample {
            point: mesh.face_centroid(f),
            normal: mesh.face_normal(f) * sign,
            weight: mesh.face_area(f),
            theta_plus: multiplicity,
            theta_minus: 0,
        })
        .collect();
    OrientedSampleCloud::new(samples)
}

pub fn cloud_area(cloud: &OrientedSampleCloud) -> f64 {
    cloud.area()
}

pub fn cloud_volume(cloud: &OrientedSampleCloud) -> f64 {
    cloud.volume()
}

/// Axis-aligned integration grid with `resolution` cells per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: Vec3,
    pub hi: Vec3,
    pub resolution: usize,
}

impl Grid {
    /// Bounding box of `mesh` padded by `pad` times its extent on every side.
    pub fn around(mesh: &TriMesh, resolution: usize, pad: f64) -> Grid {
        let (lo, hi) = mesh.bbox();
        let margin = (hi - lo) * pad;
        Grid {
            lo: lo - margin,
            hi: hi + margin,
            resolution,
        }
    }

    pub fn cell_size(&self) -> Vec3 {
        (self.hi - self.lo) / self.resolution as f64
    }

    pub fn cell_volume(&self) -> f64 {
        let c = self.cell_size();
        c.x * c.y * c.z
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let c = self.cell_size();
        self.lo + Vec3::new((i as f64 + 0.5) * c.x, (j as f64 + 0.5) * c.y, (k as f64 + 0.5) * c.z)
    }
}

/// The filling current of a closed mesh, evaluated through winding numbers.
#[derive(Debug, Clone)]
pub struct CurrentRep {
    mesh: TriMesh,
    lo: Vec3,
    hi: Vec3,
    diag: f64,
    /// Unit normal per face.
    normals: Vec<Vec3>,
}

/// Distance under which a query counts as lying on the surface, relative to
/// the bounding-box diagonal.
const ON_SURFACE_TOL: f64 = 1e-9;
const PERTURBATION: f64 = 1e-7;
const MAX_RETRIES: usize = 3;

pub fn current_rep(mesh: &TriMesh) -> CurrentRep {
    let (lo, hi) = mesh.bbox();
    let normals = (0..mesh.num_faces()).map(|f| mesh.face_normal(f)).collect();
    CurrentRep {
        mesh: mesh.clone(),
        lo,
        hi,
        diag: mesh.bbox_diagonal(),
        normals,
    }
}

fn solid_angle(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let num = a.dot(&b.cross(&c));
    let den = la * lb * lc + a.dot(&b) * lc + a.dot(&c) * lb + b.dot(&c) * la;
    2.0 * num.atan2(den)
}

/// Closest distance from `p` to triangle `abc`.
pub(crate) fn point_triangle_distance(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (p - (a + ab * v)).norm();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (p - (a + ac * w)).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b) * w)).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (p - (a + ab * v + ac * w)).norm()
}

impl CurrentRep {
    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    fn outside_bbox(&self, p: &Vec3) -> bool {
        (0..3).any(|k| p[k] < self.lo[k] || p[k] > self.hi[k])
    }

    /// Generalized winding number; `None` if `p` is within the on-surface
    /// tolerance of a face.
    fn winding_checked(&self, p: &Vec3) -> Option<f64> {
        let tol = ON_SURFACE_TOL * self.diag;
        let rel: Vec<(Vec3, f64)> = self
            .mesh
            .positions()
            .iter()
            .map(|v| {
                let d = v - p;
                (d, d.norm())
            })
            .collect();
        let mut total = 0.0;
        for (f, &[i, j, k]) in self.mesh.faces().iter().enumerate() {
            let ((a, la), (b, lb), (c, lc)) = (rel[i], rel[j], rel[k]);
            if a.dot(&self.normals[f]).abs() <= tol {
                let [x, y, z] = self.mesh.face_vertices(f);
                if point_triangle_distance(p, &x, &y, &z) <= tol {
                    return None;
                }
            }
            let num = a.dot(&b.cross(&c));
            let den = la * lb * lc + a.dot(&b) * lc + a.dot(&c) * lb + b.dot(&c) * la;
            total += 2.0 * num.atan2(den);
        }
        Some(total / (4.0 * PI))
    }

    /// Raw generalized winding number at `p` (not rounded).
    pub fn winding_number(&self, p: &Vec3) -> f64 {
        self.mesh
            .faces()
            .iter()
            .map(|&[a, b, c]| {
                let m = self.mesh.positions();
                solid_angle(m[a] - p, m[b] - p, m[c] - p)
            })
            .sum::<f64>()
            / (4.0 * PI)
    }

    /// Integer `θ_R(p)`. Queries on the surface are nudged by a small
    /// deterministic offset, up to three times.
    pub fn theta(&self, p: &Vec3) -> Result<i32> {
        if self.outside_bbox(p) {
            return Ok(0);
        }
        let dirs = [
            Vec3::new(1.0, 2f64.sqrt(), 3f64.sqrt()),
            Vec3::new(-3f64.sqrt(), 1.0, 2f64.sqrt()),
            Vec3::new(2f64.sqrt(), -3f64.sqrt(), 1.0),
        ];
        let mut q = *p;
        for attempt in 0..=MAX_RETRIES {
            if let Some(w) = self.winding_checked(&q) {
                return Ok(-(w.round() as i32));
            }
            if attempt == MAX_RETRIES {
                break;
            }
            q += dirs[attempt].normalize() * (PERTURBATION * self.diag);
        }
        Err(Error::PointOnSurface)
    }

    /// `θ_R` at every cell centre of `grid`, in `i + n (j + n k)` order.
    ///
    /// Cell boxes are split octree style. A box whose circumscribed ball
    /// meets no face has a single winding number, so one evaluation fills
    /// all its cells. Only cells near the surface are evaluated one by one.
    pub fn theta_on_grid(&self, grid: &Grid) -> Result<Vec<i32>> {
        const TOP: usize = 8;
        let n = grid.resolution;
        let nb = n.div_ceil(TOP);
        let eps = 1e-9 * self.diag;
        let boxes: Vec<(Vec3, Vec3)> = (0..self.mesh.num_faces())
            .map(|f| {
                let [a, b, c] = self.mesh.face_vertices(f);
                (a.inf(&b).inf(&c).add_scalar(-eps), a.sup(&b).sup(&c).add_scalar(eps))
            })
            .collect();
        let all: Vec<usize> = (0..boxes.len()).collect();
        let blocks: Vec<Vec<(usize, i32)>> = (0..nb * nb * nb)
            .into_par_iter()
            .map(|b| -> Result<Vec<(usize, i32)>> {
                let lo = [b % nb * TOP, (b / nb) % nb * TOP, b / (nb * nb) * TOP];
                let hi = [(lo[0] + TOP).min(n), (lo[1] + TOP).min(n), (lo[2] + TOP).min(n)];
                let mut out = Vec::new();
                self.fill_cells(grid, &boxes, &all, lo, hi, &mut out)?;
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let mut values = vec![0; n * n * n];
        for (idx, v) in blocks.into_iter().flatten() {
            values[idx] = v;
        }
        Ok(values)
    }

    /// Fills the cells `lo..hi` (per axis), recursing while some face comes
    /// within the circumradius of the cell box.
    fn fill_cells(
        &self,
        grid: &Grid,
        boxes: &[(Vec3, Vec3)],
        faces: &[usize],
        lo: [usize; 3],
        hi: [usize; 3],
        out: &mut Vec<(usize, i32)>,
    ) -> Result<()> {
        let n = grid.resolution;
        let cell = grid.cell_size();
        let box_lo = grid.lo + Vec3::new(lo[0] as f64 * cell.x, lo[1] as f64 * cell.y, lo[2] as f64 * cell.z);
        let box_hi = grid.lo + Vec3::new(hi[0] as f64 * cell.x, hi[1] as f64 * cell.y, hi[2] as f64 * cell.z);
        let centre = (box_lo + box_hi) * 0.5;
        let reach = 0.5 * (box_hi - box_lo).norm() + 1e-9 * self.diag;
        let near: Vec<usize> = faces
            .iter()
            .copied()
            .filter(|&f| {
                let (flo, fhi) = &boxes[f];
                if !(0..3).all(|k| flo[k] <= box_hi[k] && fhi[k] >= box_lo[k]) {
                    return false;
                }
                let [a, b, c] = self.mesh.face_vertices(f);
                point_triangle_distance(&centre, &a, &b, &c) <= reach
            })
            .collect();
        let count = (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]);
        let cells = (lo[2]..hi[2])
            .flat_map(|k| (lo[1]..hi[1]).flat_map(move |j| (lo[0]..hi[0]).map(move |i| (i, j, k))));
        if near.is_empty() || count == 1 {
            let value = self.theta(&grid.cell_center(lo[0], lo[1], lo[2]))?;
            out.extend(cells.map(|(i, j, k)| (i + n * (j + n * k), value)));
            return Ok(());
        }
        let mid = |a: usize, b: usize| if b - a > 1 { (a + b) / 2 } else { b };
        let m = [mid(lo[0], hi[0]), mid(lo[1], hi[1]), mid(lo[2], hi[2])];
        for oct in 0..8 {
            let pick = |axis: usize| {
                if oct >> axis & 1 == 0 {
                    (lo[axis], m[axis])
                } else {
                    (m[axis], hi[axis])
                }
            };
            let (x, y, z) = (pick(0), pick(1), pick(2));
            if x.0 < x.1 && y.0 < y.1 && z.0 < z.1 {
                self.fill_cells(grid, boxes, &near, [x.0, y.0, z.0], [x.1, y.1, z.1], out)?;
            }
        }
        Ok(())
    }
}

/// `-Σ_cells θ_R(center) · cell volume` over a grid around the mesh padded
/// by 5%.
pub fn volume_via_current(rep: &CurrentRep, resolution: usize) -> Result<f64> {
    if resolution < 32 {
        return Err(Error::InvalidInput("grid resolution must be at least 32".into()));
    }
    let grid = Grid::around(&rep.mesh, resolution, 0.05);
    let theta = rep.theta_on_grid(&grid)?;
    let sum: i64 = theta.iter().map(|&t| t as i64).sum();
    Ok(-(sum as f64) * grid.cell_volume())
}

pub fn vertex_velocities(mesh: &TriMesh, field: &dyn VectorField) -> Vec<Vec3> {
    mesh.positions().iter().map(|p| field.eval(p)).collect()
}

/// `∂Area/∂x_i` for every vertex.
pub fn area_gradient(mesh: &TriMesh) -> Vec<Vec3> {
    let mut g = vec![Vec3::zeros(); mesh.num_vertices()];
    for f in 0..mesh.num_faces() {
        let face = mesh.face(f);
        let p = mesh.face_vertices(f);
        let n = mesh.face_normal(f);
        for k in 0..3 {
            g[face[k]] += 0.5 * n.cross(&(p[(k + 2) % 3] - p[(k + 1) % 3]));
        }
    }
    g
}

/// `∂Vol/∂x_i` for every vertex.
pub fn volume_gradient(mesh: &TriMesh) -> Vec<Vec3> {
    let mut g = vec![Vec3::zeros(); mesh.num_vertices()];
    for f in 0..mesh.num_faces() {
        let face = mesh.face(f);
        let p = mesh.face_vertices(f);
        for k in 0..3 {
            g[face[k]] += p[(k + 1) % 3].cross(&p[(k + 2) % 3]) / 6.0;
        }
    }
    g
}

/// Exact derivative of the discrete area when vertices move with the given
/// velocities.
pub fn area_derivative(mesh: &TriMesh, velocities: &[Vec3]) -> f64 {
    (0..mesh.num_faces())
        .map(|f| {
            let [i0, i1, i2] = mesh.face(f);
            let [p0, p1, p2] = mesh.face_vertices(f);
            let (e1, e2) = (p1 - p0, p2 - p0);
            let c = e1.cross(&e2);
            let dc = (velocities[i1] - velocities[i0]).cross(&e2) + e1.cross(&(velocities[i2] - velocities[i0]));
            0.5 * c.dot(&dc) / c.norm()
        })
        .sum()
}

/// Exact derivative of the discrete enclosed volume,
/// `(1/6) Σ [det(X0,v1,v2) + det(v0,X1,v2) + det(v0,v1,X2)]`.
pub fn volume_derivative(mesh: &TriMesh, velocities: &[Vec3]) -> f64 {
    (0..mesh.num_faces())
        .map(|f| {
            let [i0, i1, i2] = mesh.face(f);
            let [p0, p1, p2] = mesh.face_vertices(f);
            velocities[i0].dot(&p1.cross(&p2)) + p0.dot(&velocities[i1].cross(&p2)) + p0.dot(&p1.cross(&velocities[i2]))
        })
        .sum::<f64>()
        / 6.0
}

pub fn first_variation_area(mesh: &TriMesh, field: &dyn VectorField) -> f64 {
    area_derivative(mesh, &vertex_velocities(mesh, field))
}

pub fn first_variation_volume(mesh: &TriMesh, field: &dyn VectorField) -> f64 {
    volume_derivative(mesh, &vertex_velocities(mesh, field))
}

/// `Σ_f ⟨X̄_f, n_f⟩ area_f` with `X̄_f` the mean of the field at the face's
/// vertices: the oriented-surface integral that the volume variation equals
/// exactly on closed meshes.
pub fn oriented_flux(mesh: &TriMesh, field: &dyn VectorField) -> f64 {
    let v = vertex_velocities(mesh, field);
    (0..mesh.num_faces())
        .map(|f| {
            let [a, b, c] = mesh.face(f);
            ((v[a] + v[b] + v[c]) / 3.0).dot(&mesh.face_area_vector(f))
        })
        .sum()
}

/// Same integral with one-point centroid quadrature.
pub fn oriented_flux_centroid(mesh: &TriMesh, field: &dyn VectorField) -> f64 {
    (0..mesh.num_faces())
        .map(|f| field.eval(&mesh.face_centroid(f)).dot(&mesh.face_area_vector(f)))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn cloud_basics() {
        let m = shapes::icosphere(4, 1.0);
        let c = cloud_from_mesh(&m, 1, false).unwrap();
        assert_eq!(c.area(), m.area());
        assert!((c.area() / (4.0 * PI) - 1.0).abs() < 0.01);
        assert!((c.volume() / (4.0 * PI / 3.0) - 1.0).abs() < 0.01);
        let c2 = cloud_from_mesh(&m, 2, false).unwrap();
        assert!((c2.volume() / c.volume() - 2.0).abs() < 1e-14);
        let f = cloud_from_mesh(&m, 1, true).unwrap();
        assert!((f.volume() + c.volume()).abs() < 1e-14);
        assert_eq!(f.area(), c.area());
        assert!(c.merged(&f).volume().abs() < 1e-12);
    }

    #[test]
    fn cloud_volume_translation_invariant() {
        let m = shapes::torus(2.0, 0.5, 24, 16);
        let c = cloud_from_mesh(&m, 1, false).unwrap();
        assert!(c.net_normal().norm() < 1e-10 * c.area());
        let t = c.translated(&Vec3::new(3.0, -7.0, 0.5));
        assert!((t.volume() / c.volume() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn invalid_samples_rejected() {
        let s = OrientedSample {
            point: Vec3::zeros(),
            normal: Vec3::z(),
            weight: 1.0,
            theta_plus: 0,
            theta_minus: 0,
        };
        assert!(OrientedSampleCloud::new(vec![s]).is_err());
        assert!(OrientedSampleCloud::new(vec![OrientedSample { weight: -1.0, theta_plus: 1, ..s }]).is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let c = cloud_from_mesh(&shapes::tetrahedron(), 1, false).unwrap();
        let csv = c.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x,y,z,nx,ny,nz,w,theta_plus,theta_minus"));
        assert_eq!(lines.count(), 4);
    }

    #[test]
    fn theta_on_unit_sphere() {
        let rep = current_rep(&shapes::icosphere(3, 1.0));
        assert_eq!(rep.theta(&Vec3::zeros()).unwrap(), -1);
        assert_eq!(rep.theta(&Vec3::new(10.0, 0.0, 0.0)).unwrap(), 0);
    }

    #[test]
    fn theta_on_surface_is_nudged() {
        let cube = shapes::unit_cube();
        let rep = current_rep(&cube);
        let t = rep.theta(&Vec3::new(0.5, 0.5, 1.0)).unwrap();
        assert!(t == 0 || t == -1);
        // a vertex of the cube: nudges stay within 1e-7 of the surface
        let v = rep.theta(&Vec3::new(1.0, 1.0, 1.0)).unwrap();
        assert!(v == 0 || v == -1);
    }

    #[test]
    fn theta_inverted_sphere() {
        let rep = current_rep(&shapes::icosphere(2, 1.0).reversed());
        assert_eq!(rep.theta(&Vec3::zeros()).unwrap(), 1);
    }

    #[test]
    fn cube_volume_via_current() {
        let rep = current_rep(&shapes::unit_cube());
        let v = volume_via_current(&rep, 64).unwrap();
        assert!((v - 1.0).abs() < 0.02, "{v}");
        assert!(volume_via_current(&rep, 16).is_err());
    }

    #[test]
    fn area_and_volume_gradients_match_derivatives() {
        let m = shapes::torus(2.0, 0.6, 12, 10);
        let field = |x: &Vec3| Vec3::new(x.y.sin(), x.z * x.x, (0.3 * x.x).cos());
        let vel = vertex_velocities(&m, &field);
        let ga = area_gradient(&m);
        let gv = volume_gradient(&m);
        let da: f64 = ga.iter().zip(&vel).map(|(g, v)| g.dot(v)).sum();
        let dv: f64 = gv.iter().zip(&vel).map(|(g, v)| g.dot(v)).sum();
        assert!((da - area_derivative(&m, &vel)).abs() < 1e-10 * m.area());
        assert!((dv - volume_derivative(&m, &vel)).abs() < 1e-10 * m.area());
    }

    #[test]
    fn dilation_and_translation_variations() {
        let m = shapes::icosphere(3, 1.0);
        let a = m.area();
        let dil = first_variation_area(&m, &|x: &Vec3| *x);
        assert!((dil / (2.0 * a) - 1.0).abs() < 1e-8);
        let c = Vec3::new(0.3, -1.2, 2.0);
        let tr = first_variation_area(&m, &move |_: &Vec3| c);
        assert!(tr.abs() < 1e-10 * a);
        let tv = first_variation_volume(&m, &move |_: &Vec3| c);
        assert!(tv.abs() < 1e-10 * c.norm() * a);
        let third = first_variation_volume(&m, &|x: &Vec3| *x / 3.0);
        assert!((third / m.enclosed_volume() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn distance_to_triangle() {
        let (a, b, c) = (Vec3::zeros(), Vec3::x(), Vec3::y());
        assert!((point_triangle_distance(&Vec3::new(0.2, 0.2, 0.5), &a, &b, &c) - 0.5).abs() < 1e-15);
        assert!((point_triangle_distance(&Vec3::new(-1.0, 0.0, 0.0), &a, &b, &c) - 1.0).abs() < 1e-15);
        let d = point_triangle_distance(&Vec3::new(1.0, 1.0, 0.0), &a, &b, &c);
        assert!((d - 0.5f64.sqrt()).abs() < 1e-15);
    }
}
