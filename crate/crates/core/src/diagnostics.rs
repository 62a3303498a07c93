//! Local regularity diagnostics: density ratios, tilt and height excess
//! against a plane, good-point maps and the diameter ratio.

use std::f64::consts::PI;

use nalgebra::Vector2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{compute_curvature, willmore_energy};
use crate::error::Result;
use crate::mesh::{TriMesh, Vec3};
use crate::plane::Plane;

/// Recursion depth of the subdivision quadrature on triangles that cross
/// the sphere `∂B_ω(x)`.
pub const CLIP_DEPTH: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessReport {
    pub center: Vec3,
    pub radius: f64,
    pub plane: Plane,
    pub tilt: f64,
    pub height: f64,
    pub density_ratio: f64,
}

fn cross2(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Signed area of the disc `|p| ≤ r` intersected with the triangle
/// `(0, a, b)`.
fn origin_wedge_area(a: Vector2<f64>, b: Vector2<f64>, r: f64) -> f64 {
    let sector = |p: &Vector2<f64>, q: &Vector2<f64>| 0.5 * r * r * cross2(p, q).atan2(p.dot(q));
    let d = b - a;
    let qa = d.dot(&d);
    if qa == 0.0 {
        return 0.0;
    }
    let qb = a.dot(&d);
    let qc = a.dot(&a) - r * r;
    let disc = qb * qb - qa * qc;
    if disc <= 0.0 {
        return sector(&a, &b);
    }
    let s = disc.sqrt();
    let (t1, t2) = ((-qb - s) / qa, (-qb + s) / qa);
    if t2 <= 0.0 || t1 >= 1.0 {
        return sector(&a, &b);
    }
    let p1 = a + d * t1.max(0.0);
    let p2 = a + d * t2.min(1.0);
    sector(&a, &p1) + 0.5 * cross2(&p1, &p2) + sector(&p2, &b)
}

/// Area of the planar triangle `tri` inside the ball `B_σ(x)`, exact.
pub fn triangle_ball_area(tri: [Vec3; 3], x: &Vec3, sigma: f64) -> f64 {
    let inside = |p: &Vec3| (p - x).norm_squared() <= sigma * sigma;
    let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
    let full = 0.5 * n.norm();
    if full == 0.0 {
        return 0.0;
    }
    if tri.iter().all(inside) {
        return full;
    }
    let plane = Plane::from_normal(tri[0], n);
    let d = plane.distance(x);
    if d.abs() >= sigma {
        return 0.0;
    }
    let r = (sigma * sigma - d * d).sqrt();
    let c = plane.project(x);
    let local = |p: &Vec3| Vector2::new((p - c).dot(&plane.e1), (p - c).dot(&plane.e2));
    let q = tri.map(|p| local(&p));
    let area: f64 = (0..3).map(|k| origin_wedge_area(q[k], q[(k + 1) % 3], r)).sum();
    area.abs().min(full)
}

fn ball_faces(mesh: &TriMesh, x: &Vec3, radius: f64) -> Vec<usize> {
    (0..mesh.num_faces())
        .filter(|&f| {
            let p = mesh.face_vertices(f);
            let lo = p[0].inf(&p[1]).inf(&p[2]);
            let hi = p[0].sup(&p[1]).sup(&p[2]);
            let nearest = x.sup(&lo).inf(&hi);
            (nearest - x).norm() < radius
        })
        .collect()
}

/// `μ(B_σ(x)) / (π σ²)` with exact triangle–ball clipping.
pub fn density_ratio(mesh: &TriMesh, x: &Vec3, sigma: f64) -> f64 {
    if !(sigma > 0.0) {
        return 0.0;
    }
    let area: f64 = ball_faces(mesh, x, sigma)
        .into_iter()
        .map(|f| triangle_ball_area(mesh.face_vertices(f), x, sigma))
        .sum();
    area / (PI * sigma * sigma)
}

/// Area-weighted least-squares plane of the surface inside `B_ω(x)`,
/// translated to pass through `x`.
pub fn best_fit_plane(mesh: &TriMesh, x: &Vec3, omega: f64) -> Option<Plane> {
    let pts: Vec<(Vec3, f64)> = ball_faces(mesh, x, omega)
        .into_iter()
        .flat_map(|f| {
            let p = mesh.face_vertices(f);
            let w = triangle_ball_area(p, x, omega) / 3.0;
            [p[0], p[1], p[2]].map(|q| (q, w))
        })
        .filter(|(_, w)| *w > 0.0)
        .collect();
    Some(Plane::fit(&pts)?.with_origin(*x))
}

/// `∫_{tri ∩ B_ω(x)} f` for a quadratic `f`, exact on triangles inside the
/// ball and refined by subdivision across its boundary.
fn clipped_quadratic(tri: [Vec3; 3], x: &Vec3, omega: f64, f: &dyn Fn(&Vec3) -> f64, depth: u32) -> f64 {
    let full = 0.5 * (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).norm();
    let mids = [
        (tri[0] + tri[1]) * 0.5,
        (tri[1] + tri[2]) * 0.5,
        (tri[2] + tri[0]) * 0.5,
    ];
    let exact = full / 3.0 * (f(&mids[0]) + f(&mids[1]) + f(&mids[2]));
    if tri.iter().all(|p| (p - x).norm() <= omega) {
        return exact;
    }
    let clipped = triangle_ball_area(tri, x, omega);
    if clipped == 0.0 {
        return 0.0;
    }
    if depth == 0 {
        return exact * clipped / full;
    }
    [
        [tri[0], mids[0], mids[2]],
        [mids[0], tri[1], mids[1]],
        [mids[2], mids[1], tri[2]],
        [mids[0], mids[1], mids[2]],
    ]
    .into_iter()
    .map(|t| clipped_quadratic(t, x, omega, f, depth - 1))
    .sum()
}

/// `ω⁻² ∫_{B_ω(x)} ‖P_ξ - P_T‖²_F dμ` with `P` the orthogonal projectors
/// onto the tangent planes.
pub fn tilt_excess(mesh: &TriMesh, x: &Vec3, omega: f64, plane: &Plane) -> f64 {
    let pt = plane.projector();
    let sum: f64 = ball_faces(mesh, x, omega)
        .into_iter()
        .map(|f| {
            let p = mesh.face_vertices(f);
            let n = mesh.face_normal(f);
            let pf = nalgebra::Matrix3::identity() - n * n.transpose();
            triangle_ball_area(p, x, omega) * (pf - pt).norm_squared()
        })
        .sum();
    sum / (omega * omega)
}

/// `ω⁻⁴ ∫_{B_ω(x)} dist(ξ - x, T)² dμ`.
pub fn height_excess(mesh: &TriMesh, x: &Vec3, omega: f64, plane: &Plane) -> f64 {
    let n = plane.normal;
    let f = |p: &Vec3| (p - x).dot(&n).powi(2);
    let sum: f64 = ball_faces(mesh, x, omega)
        .into_iter()
        .map(|face| clipped_quadratic(mesh.face_vertices(face), x, omega, &f, CLIP_DEPTH))
        .sum();
    sum / omega.powi(4)
}

/// Both excesses and the density ratio at `(x, ω)`, against `plane` or the
/// best-fit plane when none is given.
pub fn excess(mesh: &TriMesh, x: &Vec3, omega: f64, plane: Option<Plane>) -> ExcessReport {
    let plane = plane
        .or_else(|| best_fit_plane(mesh, x, omega))
        .unwrap_or_else(|| Plane::from_normal(*x, Vec3::z()));
    ExcessReport {
        center: *x,
        radius: omega,
        plane,
        tilt: tilt_excess(mesh, x, omega, &plane),
        height: height_excess(mesh, x, omega, &plane),
        density_ratio: density_ratio(mesh, x, omega),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodPointMap {
    pub good: Vec<bool>,
    /// `∫_{B_ρ(x_i)} |A|² dμ` per vertex.
    pub local_mass: Vec<f64>,
    pub bad_count: usize,
}

/// Flags vertex `i` good iff the curvature mass in `B_ρ(x_i)` is below
/// `eps0²`.
pub fn good_point_map(mesh: &TriMesh, eps0: f64, rho: f64) -> Result<GoodPointMap> {
    let curv = compute_curvature(mesh)?;
    let local_mass: Vec<f64> = (0..mesh.num_vertices())
        .into_par_iter()
        .map(|v| curv.curvature_mass_in_ball(mesh, &mesh.position(v), rho))
        .collect();
    let good: Vec<bool> = local_mass.iter().map(|m| *m < eps0 * eps0).collect();
    let bad_count = good.iter().filter(|g| !**g).count();
    Ok(GoodPointMap {
        good,
        local_mass,
        bad_count,
    })
}

/// Largest distance between two vertices.
pub fn diameter(mesh: &TriMesh) -> f64 {
    let p = mesh.positions();
    (0..p.len())
        .into_par_iter()
        .map(|i| p[i + 1..].iter().map(|q| (p[i] - q).norm()).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max)
}

/// `diam / √(area · W_Will)`, a dimensionless ratio bounded for every
/// closed surface.
pub fn diameter_check(mesh: &TriMesh) -> Result<f64> {
    let w = willmore_energy(mesh)?;
    Ok(diameter(mesh) / (mesh.area() * w).sqrt())
}

/// Per-vertex rows `x,y,z,local_A2,good,density_ratio`, density at radius
/// `rho`.
pub fn diagnostics_csv(mesh: &TriMesh, map: &GoodPointMap, rho: f64) -> String {
    let density: Vec<f64> = (0..mesh.num_vertices())
        .into_par_iter()
        .map(|v| density_ratio(mesh, &mesh.position(v), rho))
        .collect();
    let mut out = String::from("x,y,z,local_A2,good,density_ratio\n");
    for v in 0..mesh.num_vertices() {
        let p = mesh.position(v);
        out.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{},{:.17e}\n",
            p.x, p.y, p.z, map.local_mass[v], map.good[v], density[v]
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    fn unit_triangle() -> [Vec3; 3] {
        [Vec3::zeros(), Vec3::x(), Vec3::y()]
    }

    #[test]
    fn ball_containing_triangle_gives_full_area() {
        assert!((triangle_ball_area(unit_triangle(), &Vec3::new(0.3, 0.3, 0.0), 5.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn small_ball_inside_triangle_gives_disc() {
        let x = Vec3::new(0.25, 0.25, 0.05);
        let r2 = 0.1f64 * 0.1 - 0.05 * 0.05;
        assert!((triangle_ball_area(unit_triangle(), &x, 0.1) - PI * r2).abs() < 1e-15);
    }

    #[test]
    fn ball_at_right_angle_corner_gives_quarter_disc() {
        let a = triangle_ball_area(unit_triangle(), &Vec3::zeros(), 0.5);
        assert!((a - PI * 0.25 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn clipped_area_matches_monte_carlo_oracle() {
        use rand::{Rng, SeedableRng};
        let tri = [Vec3::new(-0.2, -0.1, 0.0), Vec3::new(1.1, 0.2, 0.1), Vec3::new(0.3, 0.9, -0.1)];
        let x = Vec3::new(0.5, 0.3, 0.2);
        let exact = triangle_ball_area(tri, &x, 0.6);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 400_000;
        let hits = (0..n)
            .filter(|_| {
                let (mut u, mut v): (f64, f64) = (rng.gen(), rng.gen());
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                let p = tri[0] + (tri[1] - tri[0]) * u + (tri[2] - tri[0]) * v;
                (p - x).norm() <= 0.6
            })
            .count();
        let full = 0.5 * (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).norm();
        let mc = full * hits as f64 / n as f64;
        assert!((exact - mc).abs() < 3e-3 * full, "{exact} vs {mc}");
    }

    #[test]
    fn far_point_has_zero_density() {
        let m = shapes::icosphere(2, 1.0);
        assert_eq!(density_ratio(&m, &Vec3::new(3.0, 0.0, 0.0), 0.5), 0.0);
    }

    #[test]
    fn diameter_of_cube() {
        assert!((diameter(&shapes::unit_cube()) - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn csv_has_one_row_per_vertex() {
        let m = shapes::icosphere(1, 1.0);
        let map = good_point_map(&m, 1.0, 0.3).unwrap();
        let csv = diagnostics_csv(&m, &map, 0.3);
        assert_eq!(csv.lines().count(), m.num_vertices() + 1);
    }
}
