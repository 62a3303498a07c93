use crate::curvature::{compute_curvature, CurvatureField};
use crate::error::{Error, Result};
use crate::mesh::{TriMesh, Vec3};
use crate::plane::Plane;

pub const DEFAULT_PATCH_GRID: usize = 65;

/// Projected triangles of a graphical region with a bucket index for
/// point location.
#[derive(Debug, Clone)]
pub(crate) struct Locator {
    tris: Vec<([[f64; 2]; 3], usize)>,
    lo: [f64; 2],
    cell: f64,
    dim: usize,
    buckets: Vec<Vec<usize>>,
}

impl Locator {
    fn new(tris: Vec<([[f64; 2]; 3], usize)>, half_width: f64) -> Locator {
        let dim = ((tris.len() as f64).sqrt().ceil() as usize).clamp(1, 256);
        let lo = [-half_width, -half_width];
        let cell = 2.0 * half_width / dim as f64;
        let mut buckets = vec![Vec::new(); dim * dim];
        let to_cell = |v: f64, o: f64| (((v - o) / cell).floor().max(0.0) as usize).min(dim - 1);
        for (t, (p, _)) in tris.iter().enumerate() {
            let xs = [p[0][0], p[1][0], p[2][0]];
            let ys = [p[0][1], p[1][1], p[2][1]];
            let (x0, x1) = (xs.iter().cloned().fold(f64::MAX, f64::min), xs.iter().cloned().fold(f64::MIN, f64::max));
            let (y0, y1) = (ys.iter().cloned().fold(f64::MAX, f64::min), ys.iter().cloned().fold(f64::MIN, f64::max));
            if x1 < lo[0] || y1 < lo[1] || x0 > -lo[0] || y0 > -lo[1] {
                continue;
            }
            for j in to_cell(y0, lo[1])..=to_cell(y1, lo[1]) {
                for i in to_cell(x0, lo[0])..=to_cell(x1, lo[0]) {
                    buckets[j * dim + i].push(t);
                }
            }
        }
        Locator {
            tris,
            lo,
            cell,
            dim,
            buckets,
        }
    }

    /// Face and barycentric coordinates of the triangle containing `(x, y)`.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, [f64; 3])> {
        let i = ((x - self.lo[0]) / self.cell).floor();
        let j = ((y - self.lo[1]) / self.cell).floor();
        if i < 0.0 || j < 0.0 || i >= self.dim as f64 || j >= self.dim as f64 {
            return None;
        }
        let bucket = &self.buckets[j as usize * self.dim + i as usize];
        for &t in bucket {
            let (p, f) = &self.tris[t];
            let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            let l1 = ((x - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (y - p[0][1])) / det;
            let l2 = ((p[1][0] - p[0][0]) * (y - p[0][1]) - (x - p[0][0]) * (p[1][1] - p[0][1])) / det;
            let l0 = 1.0 - l1 - l2;
            const TOL: f64 = -1e-12;
            if l0 >= TOL && l1 >= TOL && l2 >= TOL {
                return Some((*f, [l0, l1, l2]));
            }
        }
        None
    }
}

/// A single-sheet region of a mesh written as a graph over a plane.
#[derive(Debug, Clone)]
pub struct GraphPatch {
    /// Best-fit plane; its origin is the projection of the query centre.
    pub plane: Plane,
    pub radius: f64,
    /// Grid size per side over `[-radius, radius]²`.
    pub n: usize,
    pub spacing: f64,
    /// Heights on the grid (row-major in `y`), `None` outside the disc or
    /// where no region triangle covers the node.
    pub heights: Vec<Option<f64>>,
    pub lipschitz: f64,
    /// Faces of the mesh belonging to the region.
    pub faces: Vec<usize>,
    vertex_heights: Vec<f64>,
    locator: Locator,
}

impl GraphPatch {
    pub fn grid_point(&self, i: usize, j: usize) -> (f64, f64) {
        (-self.radius + i as f64 * self.spacing, -self.radius + j as f64 * self.spacing)
    }

    /// Height of the piecewise-linear surface over `(x, y)`.
    pub fn height_at(&self, mesh: &TriMesh, x: f64, y: f64) -> Option<f64> {
        let (f, l) = self.locator.locate(x, y)?;
        let v = mesh.face(f);
        Some((0..3).map(|k| l[k] * self.vertex_heights[v[k]]).sum())
    }

    /// Barycentric interpolation of a per-vertex quantity at `(x, y)`.
    pub fn interpolate(&self, mesh: &TriMesh, values: &[f64], x: f64, y: f64) -> Option<f64> {
        let (f, l) = self.locator.locate(x, y)?;
        let v = mesh.face(f);
        Some((0..3).map(|k| l[k] * values[v[k]]).sum())
    }

    pub fn height_sup(&self) -> f64 {
        self.heights.iter().flatten().fold(0.0, |m, h| m.max(h.abs()))
    }

    /// `ρ⁻¹‖u‖∞ + ‖∇u‖∞`; the working regime requires this to be at most 1.
    pub fn smallness(&self) -> f64 {
        self.height_sup() / self.radius + self.lipschitz
    }
}

fn projected_area(plane: &Plane, p: [Vec3; 3]) -> f64 {
    let q: Vec<(f64, f64, f64)> = p.iter().map(|v| plane.coords(v)).collect();
    0.5 * ((q[1].0 - q[0].0) * (q[2].1 - q[0].1) - (q[2].0 - q[0].0) * (q[1].1 - q[0].1))
}

pub fn extract_patch(mesh: &TriMesh, center: &Vec3, radius: f64) -> Result<GraphPatch> {
    extract_patch_with(mesh, center, radius, DEFAULT_PATCH_GRID)
}

/// Extracts the graphical region of `mesh` over the disc of `radius`
/// around `center`, with heights sampled on an `n × n` grid.
pub fn extract_patch_with(mesh: &TriMesh, center: &Vec3, radius: f64, n: usize) -> Result<GraphPatch> {
    if !(radius > 0.0) || n < 2 {
        return Err(Error::InvalidInput("patch radius must be positive and grid at least 2".into()));
    }
    let in_ball: Vec<usize> = (0..mesh.num_faces())
        .filter(|&f| (mesh.face_centroid(f) - center).norm() < radius)
        .collect();
    let seed_faces = if in_ball.is_empty() {
        let nearest = (0..mesh.num_faces())
            .min_by(|&a, &b| {
                let da = (mesh.face_centroid(a) - center).norm();
                let db = (mesh.face_centroid(b) - center).norm();
                da.total_cmp(&db)
            })
            .ok_or_else(|| Error::InvalidInput("empty mesh".into()))?;
        vec![nearest]
    } else {
        in_ball
    };
    let hint: Vec3 = seed_faces.iter().map(|&f| mesh.face_area_vector(f)).sum();
    let plane = if seed_faces.len() >= 3 {
        let pts: Vec<(Vec3, f64)> = seed_faces.iter().map(|&f| (mesh.face_centroid(f), mesh.face_area(f))).collect();
        Plane::fit(&pts).unwrap()
    } else {
        Plane::from_normal(*center, hint)
    };
    let plane = plane.oriented_along(&hint);
    let plane = plane.with_origin(plane.project(center));

    let mut max_edge: f64 = 0.0;
    for &f in &seed_faces {
        let p = mesh.face_vertices(f);
        for k in 0..3 {
            max_edge = max_edge.max((p[k] - p[(k + 1) % 3]).norm());
        }
    }
    let in_region = |f: usize| {
        let (x, y, h) = plane.coords(&mesh.face_centroid(f));
        x.hypot(y) < radius + max_edge && h.abs() <= radius
    };
    let mut region = vec![false; mesh.num_faces()];
    let faces: Vec<usize> = (0..mesh.num_faces()).filter(|&f| in_region(f)).collect();
    for &f in &faces {
        region[f] = true;
    }

    // connected components through shared edges inside the region
    let mut comp = vec![usize::MAX; mesh.num_faces()];
    let mut ncomp = 0;
    for &f0 in &faces {
        if comp[f0] != usize::MAX {
            continue;
        }
        let mut stack = vec![f0];
        comp[f0] = ncomp;
        while let Some(f) = stack.pop() {
            for k in 0..3 {
                let g = mesh.twin(3 * f + k) / 3;
                if region[g] && comp[g] == usize::MAX {
                    comp[g] = ncomp;
                    stack.push(g);
                }
            }
        }
        ncomp += 1;
    }
    if ncomp > 1 {
        return Err(Error::MultiSheet(ncomp));
    }

    let mut tris = Vec::with_capacity(faces.len());
    for &f in &faces {
        let p = mesh.face_vertices(f);
        let area = projected_area(&plane, p);
        let (x, y, _) = plane.coords(&mesh.face_centroid(f));
        if x.hypot(y) < radius && area <= 0.0 {
            return Err(Error::NotAGraph);
        }
        if area > 0.0 {
            let q = p.map(|v| {
                let (x, y, _) = plane.coords(&v);
                [x, y]
            });
            tris.push((q, f));
        }
    }
    let vertex_heights: Vec<f64> = mesh.positions().iter().map(|p| plane.coords(p).2).collect();
    let locator = Locator::new(tris, radius + 2.0 * max_edge);

    let spacing = 2.0 * radius / (n - 1) as f64;
    let mut patch = GraphPatch {
        plane,
        radius,
        n,
        spacing,
        heights: vec![None; n * n],
        lipschitz: 0.0,
        faces,
        vertex_heights,
        locator,
    };
    for j in 0..n {
        for i in 0..n {
            let (x, y) = patch.grid_point(i, j);
            if x.hypot(y) <= radius {
                patch.heights[j * n + i] = patch.height_at(mesh, x, y);
            }
        }
    }
    let mut lip: f64 = 0.0;
    for j in 0..n {
        for i in 0..n {
            let Some(h) = patch.heights[j * n + i] else { continue };
            if i + 1 < n {
                if let Some(e) = patch.heights[j * n + i + 1] {
                    lip = lip.max((e - h).abs() / spacing);
                }
            }
            if j + 1 < n {
                if let Some(e) = patch.heights[(j + 1) * n + i] {
                    lip = lip.max((e - h).abs() / spacing);
                }
            }
        }
    }
    patch.lipschitz = lip;
    if patch.smallness() > 1.0 {
        log::warn!("patch outside the small-Lipschitz regime: {:.3}", patch.smallness());
    }
    Ok(patch)
}

/// `∫ |A|² dH¹` over the level set `|x - c| = σ` of the mesh, with `|A|²`
/// and the distance interpolated linearly on each face.
pub fn level_curvature_integral(mesh: &TriMesh, curv: &CurvatureField, center: &Vec3, sigma: f64) -> f64 {
    let mut total = 0.0;
    for f in 0..mesh.num_faces() {
        let v = mesh.face(f);
        let p = mesh.face_vertices(f);
        let d: Vec<f64> = p.iter().map(|x| (x - center).norm() - sigma).collect();
        let mut pts: Vec<(Vec3, f64)> = Vec::with_capacity(2);
        for k in 0..3 {
            let (a, b) = (k, (k + 1) % 3);
            if (d[a] < 0.0) != (d[b] < 0.0) {
                let t = d[a] / (d[a] - d[b]);
                let x = p[a] + (p[b] - p[a]) * t;
                let s = curv.sec_fund_sq[v[a]] * (1.0 - t) + curv.sec_fund_sq[v[b]] * t;
                pts.push((x, s));
            }
        }
        if pts.len() == 2 {
            total += (pts[0].0 - pts[1].0).norm() * 0.5 * (pts[0].1 + pts[1].1);
        }
    }
    total
}

pub(crate) const GOOD_RADIUS_CANDIDATES: usize = 16;

/// Radius in `(ρ/2, 3ρ/4)` minimizing the boundary curvature line integral
/// over 16 equally spaced candidates; the first minimum wins ties.
pub fn good_radius(mesh: &TriMesh, center: &Vec3, rho: f64) -> Result<f64> {
    let curv = compute_curvature(mesh)?;
    Ok(good_radius_with(mesh, &curv, center, rho))
}

pub(crate) fn good_radius_with(mesh: &TriMesh, curv: &CurvatureField, center: &Vec3, rho: f64) -> f64 {
    let occupied = mesh.positions().iter().any(|p| {
        let r = (p - center).norm();
        r >= 0.5 * rho && r <= 0.75 * rho
    });
    if !occupied {
        log::warn!("no vertices in the annulus around the patch centre, using 5ρ/8");
        return 0.625 * rho;
    }
    let step = 0.25 * rho / GOOD_RADIUS_CANDIDATES as f64;
    let tie = 1e-12 * (1.0 + curv.total_curvature_mass());
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..GOOD_RADIUS_CANDIDATES {
        let sigma = 0.5 * rho + (k as f64 + 0.5) * step;
        let value = level_curvature_integral(mesh, curv, center, sigma);
        if value < best.0 - tie {
            best = (value, sigma);
        }
    }
    best.1
}
