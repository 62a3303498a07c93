//! Closed oriented triangle meshes.
//!
//! Faces are stored with counterclockwise winding seen from outside, so
//! face normals point outward and embedded bodies have positive enclosed
//! volume. Self-intersecting immersions are representable; only local
//! validity (closedness, consistent orientation, nondegenerate faces) is
//! enforced.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Relative threshold for degenerate faces, scaled by the squared
/// bounding-box diagonal.
pub const DEGENERATE_AREA_FACTOR: f64 = 1e-14;

#[derive(Debug)]
struct Topology {
    faces: Vec<[usize; 3]>,
    twin: Vec<usize>,
    vf_offsets: Vec<usize>,
    vf_indices: Vec<usize>,
}

impl Topology {
    fn build(num_vertices: usize, faces: Vec<[usize; 3]>) -> Result<Self> {
        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.len() * 3);
        for (f, face) in faces.iter().enumerate() {
            for k in 0..3 {
                let a = face[k];
                let b = face[(k + 1) % 3];
                if directed.insert((a, b), 3 * f + k).is_some() {
                    return Err(Error::NonManifold(a, b));
                }
            }
        }
        let mut twin = vec![usize::MAX; faces.len() * 3];
        for (f, face) in faces.iter().enumerate() {
            for k in 0..3 {
                let a = face[k];
                let b = face[(k + 1) % 3];
                match directed.get(&(b, a)) {
                    Some(&h) => twin[3 * f + k] = h,
                    None => return Err(Error::OpenBoundary(a, b)),
                }
            }
        }

        let mut counts = vec![0usize; num_vertices + 1];
        for face in &faces {
            for &v in face {
                counts[v + 1] += 1;
            }
        }
        for v in 0..num_vertices {
            counts[v + 1] += counts[v];
        }
        let vf_offsets = counts.clone();
        let mut fill = counts;
        let mut vf_indices = vec![0; faces.len() * 3];
        for (f, face) in faces.iter().enumerate() {
            for &v in face {
                vf_indices[fill[v]] = f;
                fill[v] += 1;
            }
        }
        Ok(Topology {
            faces,
            twin,
            vf_offsets,
            vf_indices,
        })
    }
}

/// A closed, consistently oriented triangle mesh.
///
/// Half-edge `3 * f + k` runs from `faces[f][k]` to `faces[f][(k + 1) % 3]`.
/// Connectivity is shared between meshes created with
/// [`TriMesh::with_positions`], so moving vertices is cheap.
#[derive(Debug, Clone)]
pub struct TriMesh {
    positions: Vec<Vec3>,
    topo: Arc<Topology>,
}

impl TriMesh {
    pub fn new(positions: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = positions.len();
        if faces.is_empty() {
            return Err(Error::InvalidTopology("mesh has no faces".into()));
        }
        for (f, face) in faces.iter().enumerate() {
            if face.iter().any(|&v| v >= n) {
                return Err(Error::InvalidTopology(format!("face {f} has an out-of-range index")));
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(Error::DegenerateFace(f));
            }
        }
        let topo = Topology::build(n, faces)?;
        if let Some(v) = (0..n).find(|&v| topo.vf_offsets[v] == topo.vf_offsets[v + 1]) {
            return Err(Error::InvalidTopology(format!("vertex {v} is not referenced by any face")));
        }
        let mesh = TriMesh {
            positions,
            topo: Arc::new(topo),
        };
        let chi = mesh.euler_characteristic();
        if chi % 2 != 0 {
            return Err(Error::InvalidTopology(format!("odd Euler characteristic {chi}")));
        }
        mesh.check_faces()?;
        Ok(mesh)
    }

    /// Same connectivity, new vertex positions. Fails on degenerate faces.
    pub fn with_positions(&self, positions: Vec<Vec3>) -> Result<Self> {
        let mesh = self.with_positions_unchecked(positions);
        mesh.check_faces()?;
        Ok(mesh)
    }

    pub(crate) fn with_positions_unchecked(&self, positions: Vec<Vec3>) -> Self {
        assert_eq!(positions.len(), self.positions.len());
        TriMesh {
            positions,
            topo: Arc::clone(&self.topo),
        }
    }

    fn check_faces(&self) -> Result<()> {
        if self.positions.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidInput("non-finite vertex coordinate".into()));
        }
        let threshold = DEGENERATE_AREA_FACTOR * self.bbox_diagonal().powi(2);
        match (0..self.num_faces()).find(|&f| !(self.face_area(f) > threshold)) {
            Some(f) => Err(Error::DegenerateFace(f)),
            None => Ok(()),
        }
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn position(&self, v: usize) -> Vec3 {
        self.positions[v]
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.topo.faces
    }

    pub fn face(&self, f: usize) -> [usize; 3] {
        self.topo.faces[f]
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn num_faces(&self) -> usize {
        self.topo.faces.len()
    }

    pub fn num_edges(&self) -> usize {
        self.num_faces() * 3 / 2
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_faces() as i64
    }

    pub fn halfedge_origin(&self, h: usize) -> usize {
        self.topo.faces[h / 3][h % 3]
    }

    pub fn halfedge_target(&self, h: usize) -> usize {
        self.topo.faces[h / 3][(h % 3 + 1) % 3]
    }

    pub fn twin(&self, h: usize) -> usize {
        self.topo.twin[h]
    }

    pub fn next(&self, h: usize) -> usize {
        3 * (h / 3) + (h % 3 + 1) % 3
    }

    pub fn prev(&self, h: usize) -> usize {
        3 * (h / 3) + (h % 3 + 2) % 3
    }

    /// Faces incident to vertex `v`, in ascending order.
    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.topo.vf_indices[self.topo.vf_offsets[v]..self.topo.vf_offsets[v + 1]]
    }

    /// Distinct neighbours of `v`, sorted.
    pub fn vertex_neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .vertex_faces(v)
            .iter()
            .flat_map(|&f| self.topo.faces[f])
            .filter(|&w| w != v)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn face_vertices(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.topo.faces[f];
        [self.positions[a], self.positions[b], self.positions[c]]
    }

    /// Half the cross product of the edge vectors: area times unit normal.
    pub fn face_area_vector(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.face_vertices(f);
        0.5 * (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        self.face_area_vector(f).norm()
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        self.face_area_vector(f).normalize()
    }

    pub fn face_centroid(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.face_vertices(f);
        (a + b + c) / 3.0
    }

    pub fn bbox(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in &self.positions {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bbox();
        (hi - lo).norm()
    }

    pub fn mean_edge_length(&self) -> f64 {
        let mut total = 0.0;
        let mut count = 0usize;
        for h in 0..3 * self.num_faces() {
            let (a, b) = (self.halfedge_origin(h), self.halfedge_target(h));
            if a < b {
                total += (self.positions[a] - self.positions[b]).norm();
                count += 1;
            }
        }
        total / count as f64
    }

    pub fn area(&self) -> f64 {
        (0..self.num_faces()).map(|f| self.face_area(f)).sum()
    }

    /// Signed enclosed volume, `(1/6) Σ det[v0, v1, v2]`.
    pub fn enclosed_volume(&self) -> f64 {
        self.faces()
            .iter()
            .map(|&[a, b, c]| {
                let (p, q, r) = (self.positions[a], self.positions[b], self.positions[c]);
                p.dot(&q.cross(&r))
            })
            .sum::<f64>()
            / 6.0
    }

    /// Connected components of the face graph, as a per-face label.
    pub fn face_components(&self) -> (usize, Vec<usize>) {
        let mut label = vec![usize::MAX; self.num_faces()];
        let mut count = 0;
        let mut stack = Vec::new();
        for seed in 0..self.num_faces() {
            if label[seed] != usize::MAX {
                continue;
            }
            label[seed] = count;
            stack.push(seed);
            while let Some(f) = stack.pop() {
                for k in 0..3 {
                    let g = self.twin(3 * f + k) / 3;
                    if label[g] == usize::MAX {
                        label[g] = count;
                        stack.push(g);
                    }
                }
            }
            count += 1;
        }
        (count, label)
    }

    pub fn num_components(&self) -> usize {
        self.face_components().0
    }

    /// Genus of a connected closed mesh, `(2 - χ) / 2`.
    pub fn genus(&self) -> Result<usize> {
        let components = self.num_components();
        if components != 1 {
            return Err(Error::Disconnected(components));
        }
        let chi = self.euler_characteristic();
        if chi > 2 {
            return Err(Error::InvalidTopology(format!("Euler characteristic {chi} > 2")));
        }
        Ok(((2 - chi) / 2) as usize)
    }

    /// Same surface with every face winding reversed.
    pub fn reversed(&self) -> Self {
        let faces = self.faces().iter().map(|&[a, b, c]| [a, c, b]).collect();
        TriMesh::new(self.positions.clone(), faces).expect("reversal preserves validity")
    }

    pub fn map_positions(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<Self> {
        self.with_positions(self.positions.iter().map(f).collect())
    }

    pub fn translated(&self, offset: &Vec3) -> Self {
        self.with_positions_unchecked(self.positions.iter().map(|p| p + offset).collect())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor > 0.0);
        self.with_positions_unchecked(self.positions.iter().map(|p| p * factor).collect())
    }

    /// Disjoint union of two meshes.
    pub fn merged(&self, other: &TriMesh) -> Result<Self> {
        let offset = self.num_vertices();
        let mut positions = self.positions.clone();
        positions.extend_from_slice(&other.positions);
        let mut faces = self.faces().to_vec();
        faces.extend(other.faces().iter().map(|f| f.map(|v| v + offset)));
        TriMesh::new(positions, faces)
    }

    /// One-to-four midpoint subdivision; new vertices are passed through `project`.
    pub fn subdivided(&self, project: impl Fn(Vec3) -> Vec3) -> Self {
        let mut positions = self.positions.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, positions: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                positions.push(project(0.5 * (positions[a] + positions[b])));
                positions.len() - 1
            })
        };
        let mut faces = Vec::with_capacity(self.num_faces() * 4);
        for &[a, b, c] in self.faces() {
            let ab = mid(a, b, &mut positions);
            let bc = mid(b, c, &mut positions);
            let ca = mid(c, a, &mut positions);
            faces.extend_from_slice(&[[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        TriMesh::new(positions, faces).expect("subdivision preserves validity")
    }
}

/// Prescribed area, enclosed volume and spontaneous curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    pub area0: f64,
    pub vol0: f64,
    pub h0: f64,
}

impl Constraints {
    pub fn new(area0: f64, vol0: f64, h0: f64) -> Result<Self> {
        if !(area0 > 0.0) || !area0.is_finite() {
            return Err(Error::InvalidInput(format!("area0 must be positive, got {area0}")));
        }
        if vol0 == 0.0 || !vol0.is_finite() {
            return Err(Error::InvalidInput("vol0 must be a nonzero real".into()));
        }
        if !h0.is_finite() {
            return Err(Error::InvalidInput("h0 must be finite".into()));
        }
        let c = Constraints { area0, vol0, h0 };
        if !c.is_isoperimetric_admissible() {
            log::warn!(
                "|vol0| = {} exceeds the isoperimetric bound {} for area0 = {}",
                vol0.abs(),
                c.isoperimetric_bound(),
                area0
            );
        }
        Ok(c)
    }

    pub fn from_mesh(mesh: &TriMesh, h0: f64) -> Result<Self> {
        Constraints::new(mesh.area(), mesh.enclosed_volume(), h0)
    }

    /// Largest volume enclosable by area `area0`: `area0^{3/2} / (6√π)`.
    pub fn isoperimetric_bound(&self) -> f64 {
        self.area0.powf(1.5) / (6.0 * std::f64::consts::PI.sqrt())
    }

    pub fn is_isoperimetric_admissible(&self) -> bool {
        self.vol0.abs() <= self.isoperimetric_bound()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn tetrahedron_is_closed_sphere() {
        let m = shapes::tetrahedron();
        assert_eq!(m.euler_characteristic(), 2);
        assert_eq!(m.genus().unwrap(), 0);
        for h in 0..12 {
            assert_eq!(m.twin(m.twin(h)), h);
            assert_eq!(m.halfedge_origin(m.twin(h)), m.halfedge_target(h));
            assert_eq!(m.next(m.next(m.next(h))), h);
            assert_eq!(m.prev(m.next(h)), h);
        }
    }

    #[test]
    fn cube_area_and_volume_exact() {
        let cube = shapes::unit_cube();
        assert_eq!(cube.num_faces(), 12);
        assert_eq!(cube.area(), 6.0);
        assert_eq!(cube.enclosed_volume(), 1.0);
        assert_eq!(cube.reversed().enclosed_volume(), -1.0);
        assert_eq!(cube.reversed().area(), 6.0);
    }

    #[test]
    fn icosphere_area_volume() {
        use std::f64::consts::PI;
        let s = shapes::icosphere(4, 1.0);
        assert!((s.area() / (4.0 * PI) - 1.0).abs() < 0.01);
        assert!((s.enclosed_volume() / (4.0 * PI / 3.0) - 1.0).abs() < 0.01);
        let s2 = s.scaled(3.0);
        assert!((s2.area() / s.area() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn open_mesh_rejected() {
        let t = shapes::tetrahedron();
        let faces = t.faces()[..3].to_vec();
        assert!(matches!(
            TriMesh::new(t.positions().to_vec(), faces),
            Err(Error::OpenBoundary(..))
        ));
    }

    #[test]
    fn inconsistent_orientation_rejected() {
        let t = shapes::tetrahedron();
        let mut faces = t.faces().to_vec();
        faces[0] = [faces[0][0], faces[0][2], faces[0][1]];
        assert!(matches!(
            TriMesh::new(t.positions().to_vec(), faces),
            Err(Error::NonManifold(..))
        ));
    }

    #[test]
    fn degenerate_face_rejected() {
        let t = shapes::tetrahedron();
        let mut p = t.positions().to_vec();
        p[3] = (p[0] + p[1]) * 0.5;
        // face containing 0, 1, 3 collapses
        assert!(matches!(t.with_positions(p), Err(Error::DegenerateFace(_))));
    }

    #[test]
    fn genus_of_disjoint_union_fails() {
        let a = shapes::icosphere(1, 1.0);
        let b = shapes::icosphere(1, 1.0).translated(&Vec3::new(5.0, 0.0, 0.0));
        let u = a.merged(&b).unwrap();
        assert_eq!(u.euler_characteristic(), 4);
        assert!(matches!(u.genus(), Err(Error::Disconnected(2))));
    }

    #[test]
    fn constraints_validation() {
        assert!(Constraints::new(0.0, 1.0, 0.0).is_err());
        assert!(Constraints::new(1.0, 0.0, 0.0).is_err());
        let c = Constraints::new(4.0 * std::f64::consts::PI, 1.0, 0.0).unwrap();
        assert!(c.is_isoperimetric_admissible());
        let bad = Constraints::new(1.0, 10.0, 0.0).unwrap();
        assert!(!bad.is_isoperimetric_admissible());
    }
}
