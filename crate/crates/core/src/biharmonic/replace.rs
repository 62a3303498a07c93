use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::patch::{extract_patch_with, good_radius_with};
use super::{solve_biharmonic, BiharmonicPatch, BoundaryTraces, EstimateReport};
use crate::curvature::compute_curvature;
use crate::error::{Error, Result};
use crate::mesh::{TriMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplaceOptions {
    pub grid_n: usize,
    /// Boundary samples for the traces.
    pub samples: usize,
    /// Spontaneous curvature used for the reported energy change.
    pub h0: f64,
}

impl Default for ReplaceOptions {
    fn default() -> Self {
        ReplaceOptions {
            grid_n: 65,
            samples: 128,
            h0: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedConstants {
    /// `|Δarea| / σ²`.
    pub area: f64,
    /// `|Δvolume| / σ²`.
    pub volume: f64,
    pub estimates: EstimateReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub sigma: f64,
    pub d_area: f64,
    pub d_vol: f64,
    pub d_helfrich: f64,
    pub solver_residual: f64,
    pub fitted_constants: FittedConstants,
}

#[derive(Debug, Clone)]
pub struct Replacement {
    pub mesh: TriMesh,
    pub report: DeltaReport,
    pub solution: BiharmonicPatch,
    pub removed_faces: usize,
    pub added_vertices: usize,
}

fn stitch(msg: impl Into<String>) -> Error {
    Error::StitchFailure(msg.into())
}

/// Replaces the graphical patch at a good radius `σ ∈ (ρ/2, 3ρ/4)` around
/// `center` by the clamped biharmonic graph with the same boundary data.
pub fn replace_patch(mesh: &TriMesh, center: &Vec3, rho: f64, options: &ReplaceOptions) -> Result<Replacement> {
    let curv = compute_curvature(mesh)?;
    let sigma = good_radius_with(mesh, &curv, center, rho);
    replace_patch_at(mesh, center, sigma, options)
}

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

fn orient(p: (f64, f64), q: (f64, f64), r: (f64, f64)) -> f64 {
    (q.0 - p.0) * (r.1 - p.1) - (r.0 - p.0) * (q.1 - p.1)
}

/// Triangulates the band between two nested counterclockwise loops.
/// Advances greedily along whichever loop gives the shorter new edge among
/// the positively oriented candidates.
fn stitch_band(outer: &[usize], inner: &[usize], xy: &dyn Fn(usize) -> (f64, f64), faces: &mut Vec<[usize; 3]>) -> Result<()> {
    let (n, m) = (outer.len(), inner.len());
    let dist = |a: usize, b: usize| {
        let (p, q) = (xy(a), xy(b));
        (p.0 - q.0).hypot(p.1 - q.1)
    };
    let start = (0..m)
        .min_by(|&p, &q| dist(outer[0], inner[p]).total_cmp(&dist(outer[0], inner[q])))
        .ok_or_else(|| stitch("empty inner loop"))?;
    let ov = |k: usize| outer[k % n];
    let iv = |k: usize| inner[(start + k) % m];
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        let a = (i < n).then(|| [ov(i), ov(i + 1), iv(j)]);
        let b = (j < m).then(|| [ov(i), iv(j + 1), iv(j)]);
        let valid = |t: &Option<[usize; 3]>| t.is_some_and(|t| orient(xy(t[0]), xy(t[1]), xy(t[2])) > 0.0);
        let take_a = match (valid(&a), valid(&b)) {
            (true, true) => dist(ov(i + 1), iv(j)) <= dist(ov(i), iv(j + 1)),
            (true, false) => true,
            (false, true) => false,
            (false, false) => return Err(stitch("new patch triangle folds over in projection")),
        };
        if take_a {
            faces.push(a.unwrap());
            i += 1;
        } else {
            faces.push(b.unwrap());
            j += 1;
        }
    }
    Ok(())
}

/// Mean edge length of faces with centroid within `radius` of `center`.
fn local_edge_length(mesh: &TriMesh, center: &Vec3, radius: f64) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for f in (0..mesh.num_faces()).filter(|&f| (mesh.face_centroid(f) - center).norm() < radius) {
        let p = mesh.face_vertices(f);
        for k in 0..3 {
            sum += (p[k] - p[(k + 1) % 3]).norm();
            count += 1;
        }
    }
    if count == 0 {
        mesh.mean_edge_length()
    } else {
        sum / count as f64
    }
}

/// Replacement at a prescribed radius `σ`.
pub fn replace_patch_at(mesh: &TriMesh, center: &Vec3, sigma: f64, options: &ReplaceOptions) -> Result<Replacement> {
    let curv = compute_curvature(mesh)?;
    let ell = local_edge_length(mesh, center, 2.0 * sigma);
    let patch = extract_patch_with(mesh, center, sigma + 4.0 * ell, 2)?;
    let plane = patch.plane;

    let delta = 0.5 * ell;
    let mut u = Vec::with_capacity(options.samples);
    let mut dn = Vec::with_capacity(options.samples);
    let mut a2 = Vec::with_capacity(options.samples);
    let uncovered = || stitch("boundary circle not covered by the patch");
    for k in 0..options.samples {
        let t = 2.0 * PI * k as f64 / options.samples as f64;
        let (c, s) = (t.cos(), t.sin());
        u.push(patch.height_at(mesh, sigma * c, sigma * s).ok_or_else(uncovered)?);
        let out = patch.height_at(mesh, (sigma + delta) * c, (sigma + delta) * s).ok_or_else(uncovered)?;
        let inn = patch.height_at(mesh, (sigma - delta) * c, (sigma - delta) * s).ok_or_else(uncovered)?;
        dn.push((out - inn) / (2.0 * delta));
        a2.push(patch.interpolate(mesh, &curv.sec_fund_sq, sigma * c, sigma * s).ok_or_else(uncovered)?);
    }
    let traces = BoundaryTraces {
        sigma,
        u,
        du_dnu: dn,
        sec_fund_sq: Some(a2),
    };
    let solution = solve_biharmonic(&traces, options.grid_n)?;

    let inside = |v: usize| {
        let (x, y, _) = plane.coords(&mesh.position(v));
        x.hypot(y) < sigma
    };
    let mut removed = vec![false; mesh.num_faces()];
    for &f in &patch.faces {
        if mesh.face(f).iter().all(|&v| inside(v)) {
            removed[f] = true;
        }
    }
    // smooth the hole outline: fill notches (kept faces with two removed
    // neighbours) and drop spikes (removed faces with two kept neighbours)
    for _ in 0..64 {
        let mut changed = false;
        for &f in &patch.faces {
            let nbrs = (0..3).filter(|k| removed[mesh.twin(3 * f + k) / 3]).count();
            if (removed[f] && nbrs <= 1) || (!removed[f] && nbrs >= 2) {
                removed[f] = !removed[f];
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let n_removed = removed.iter().filter(|r| **r).count();
    if n_removed == 0 {
        return Err(stitch("no faces inside the replacement disc"));
    }

    let mut next: HashMap<usize, usize> = HashMap::new();
    for f in (0..mesh.num_faces()).filter(|&f| removed[f]) {
        for k in 0..3 {
            let h = 3 * f + k;
            if !removed[mesh.twin(h) / 3] && next.insert(mesh.halfedge_origin(h), mesh.halfedge_target(h)).is_some() {
                return Err(stitch("pinched boundary loop"));
            }
        }
    }
    let first = *next.keys().min().ok_or_else(|| stitch("removed region has no boundary"))?;
    let mut lp = vec![first];
    let mut cur = next[&first];
    while cur != first {
        lp.push(cur);
        cur = *next.get(&cur).ok_or_else(|| stitch("open boundary loop"))?;
        if lp.len() > next.len() {
            return Err(stitch("boundary loop does not close"));
        }
    }
    if lp.len() != next.len() {
        return Err(stitch("removed region has several boundary loops"));
    }

    let coords: Vec<(f64, f64)> = lp
        .iter()
        .map(|&v| {
            let (x, y, _) = plane.coords(&mesh.position(v));
            (x, y)
        })
        .collect();
    let turn: f64 = (0..coords.len())
        .map(|i| {
            let (p, q) = (coords[i], coords[(i + 1) % coords.len()]);
            wrap(q.1.atan2(q.0) - p.1.atan2(p.0))
        })
        .sum();
    if (turn - 2.0 * PI).abs() > 1e-9 {
        return Err(stitch("boundary loop does not wind once around the centre"));
    }
    let hole_area: f64 = 0.5
        * (0..coords.len())
            .map(|i| orient((0.0, 0.0), coords[i], coords[(i + 1) % coords.len()]))
            .sum::<f64>();

    // reindex kept vertices, then append the new graph vertices
    let mut used = vec![false; mesh.num_vertices()];
    for f in (0..mesh.num_faces()).filter(|&f| !removed[f]) {
        for v in mesh.face(f) {
            used[v] = true;
        }
    }
    let mut map = vec![usize::MAX; mesh.num_vertices()];
    let mut positions = Vec::new();
    for v in 0..mesh.num_vertices() {
        if used[v] {
            map[v] = positions.len();
            positions.push(mesh.position(v));
        }
    }
    let mut faces: Vec<[usize; 3]> = (0..mesh.num_faces())
        .filter(|&f| !removed[f])
        .map(|f| mesh.face(f).map(|v| map[v]))
        .collect();
    let n_kept_faces = faces.len();

    let loop_len: f64 = (0..coords.len())
        .map(|i| {
            let (p, q) = (coords[i], coords[(i + 1) % coords.len()]);
            (q.0 - p.0).hypot(q.1 - p.1)
        })
        .sum();
    let spacing = loop_len / coords.len() as f64;
    // first ring: a circle kept half a spacing inside the hole polygon
    let inradius = (0..coords.len())
        .map(|i| {
            let (p, q) = (coords[i], coords[(i + 1) % coords.len()]);
            let d = (q.0 - p.0, q.1 - p.1);
            let t = (-(p.0 * d.0 + p.1 * d.1) / (d.0 * d.0 + d.1 * d.1)).clamp(0.0, 1.0);
            (p.0 + t * d.0).hypot(p.1 + t * d.1)
        })
        .fold(f64::INFINITY, f64::min);
    let r0 = inradius - 0.5 * spacing;
    if !(r0 > 0.0) {
        return Err(stitch("hole polygon too narrow around the centre"));
    }
    let rings = ((r0 / spacing).round() as usize).max(1);
    let alpha0 = coords[0].1.atan2(coords[0].0);
    let added_start = positions.len();

    let mut outer: Vec<usize> = lp.iter().map(|&v| map[v]).collect();
    for j in 0..rings {
        let r = r0 * (rings - j) as f64 / rings as f64;
        let count = ((2.0 * PI * r / spacing).round() as usize).max(6);
        let inner: Vec<usize> = (0..count)
            .map(|k| {
                let t = alpha0 + (k as f64 + 0.5 * j as f64) * 2.0 * PI / count as f64;
                let (x, y) = (r * t.cos(), r * t.sin());
                positions.push(plane.lift(x, y, solution.value_at(x, y)));
                positions.len() - 1
            })
            .collect();
        let xy = |v: usize| {
            let (x, y, _) = plane.coords(&positions[v]);
            (x, y)
        };
        stitch_band(&outer, &inner, &xy, &mut faces)?;
        outer = inner;
    }
    positions.push(plane.lift(0.0, 0.0, solution.value_at(0.0, 0.0)));
    let c = positions.len() - 1;
    for k in 0..outer.len() {
        faces.push([outer[k], outer[(k + 1) % outer.len()], c]);
    }

    let mut filled = 0.0;
    for f in &faces[n_kept_faces..] {
        let q: Vec<(f64, f64)> = f
            .iter()
            .map(|&v| {
                let (x, y, _) = plane.coords(&positions[v]);
                (x, y)
            })
            .collect();
        let area = orient(q[0], q[1], q[2]);
        if !(area > 0.0) {
            return Err(stitch("new patch triangle folds over in projection"));
        }
        filled += 0.5 * area;
    }
    if (filled - hole_area).abs() > 1e-9 * hole_area {
        return Err(stitch("new patch triangles overlap in projection"));
    }
    let added = positions.len() - added_start;
    let out = TriMesh::new(positions, faces).map_err(|e| stitch(e.to_string()))?;
    if out.euler_characteristic() != mesh.euler_characteristic() {
        return Err(stitch("replacement changed the Euler characteristic"));
    }

    let new_curv = compute_curvature(&out)?;
    let d_area = out.area() - mesh.area();
    let d_vol = out.enclosed_volume() - mesh.enclosed_volume();
    let report = DeltaReport {
        sigma,
        d_area,
        d_vol,
        d_helfrich: new_curv.helfrich_energy(options.h0) - curv.helfrich_energy(options.h0),
        solver_residual: solution.residual,
        fitted_constants: FittedConstants {
            area: d_area.abs() / (sigma * sigma),
            volume: d_vol.abs() / (sigma * sigma),
            estimates: solution.report,
        },
    };
    Ok(Replacement {
        mesh: out,
        report,
        solution,
        removed_faces: n_removed,
        added_vertices: added,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn band_closes_annulus() {
        let pts: Vec<(f64, f64)> = (0..7)
            .map(|k| 2.0 * PI * k as f64 / 7.0 + 0.1)
            .map(|t| (2.0 * t.cos(), 2.0 * t.sin()))
            .chain((0..5).map(|k| 2.0 * PI * k as f64 / 5.0 - 0.3).map(|t| (t.cos(), t.sin())))
            .collect();
        let outer: Vec<usize> = (0..7).collect();
        let inner: Vec<usize> = (7..12).collect();
        let mut faces = Vec::new();
        stitch_band(&outer, &inner, &|v| pts[v], &mut faces).unwrap();
        assert_eq!(faces.len(), 12);
        let mut edges = HashMap::new();
        for f in &faces {
            assert!(orient(pts[f[0]], pts[f[1]], pts[f[2]]) > 0.0);
            for k in 0..3 {
                *edges.entry((f[k], f[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        // every directed edge used once, interior edges paired
        assert!(edges.values().all(|&c| c == 1));
    }

    #[test]
    fn grid_holes_fill_at_every_radius() {
        let m = shapes::slab(32, 1.0, 3.0, |x, y| 0.1 + 0.2 * x - 0.1 * y);
        for k in 0..16 {
            let sigma = 0.3 + (k as f64 + 0.5) * 0.15 / 16.0;
            let r = replace_patch_at(&m, &Vec3::new(0.0, 0.0, 0.1), sigma, &ReplaceOptions::default());
            assert!(r.is_ok(), "{sigma}: {:?}", r.err());
        }
    }

    #[test]
    fn flat_region_replaced_by_itself() {
        let m = shapes::slab(24, 1.0, 3.0, |_, _| 0.0);
        let r = replace_patch_at(&m, &Vec3::zeros(), 0.5, &ReplaceOptions::default()).unwrap();
        assert!(r.report.d_area.abs() <= 1e-8);
        assert!(r.report.d_vol.abs() <= 1e-8);
        assert!(r.report.d_helfrich.abs() <= 1e-8);
        assert_eq!(r.mesh.genus().unwrap(), 0);
    }
}
