//! Procedural closed meshes used by tests, benchmarks and the CLI examples.

use std::f64::consts::PI;

use crate::mesh::{TriMesh, Vec3};

pub fn tetrahedron() -> TriMesh {
    let p = vec![
        Vec3::new(1.0, 1.0, 1.0),
        Vec3::new(1.0, -1.0, -1.0),
        Vec3::new(-1.0, 1.0, -1.0),
        Vec3::new(-1.0, -1.0, 1.0),
    ];
    let faces = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    TriMesh::new(p, faces).expect("valid tetrahedron")
}

/// The unit cube `[0, 1]^3`, two triangles per side.
pub fn unit_cube() -> TriMesh {
    let p = (0..8)
        .map(|i| Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
        .collect();
    let faces = vec![
        [0, 2, 3],
        [0, 3, 1],
        [4, 5, 7],
        [4, 7, 6],
        [0, 1, 5],
        [0, 5, 4],
        [2, 6, 7],
        [2, 7, 3],
        [0, 4, 6],
        [0, 6, 2],
        [1, 3, 7],
        [1, 7, 5],
    ];
    TriMesh::new(p, faces).expect("valid cube")
}

pub fn icosahedron(radius: f64) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ];
    let p = raw
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize() * radius)
        .collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    TriMesh::new(p, faces).expect("valid icosahedron")
}

/// Subdivided icosahedron with vertices on the sphere of the given radius
/// centred at the origin. Level `l` has `10 * 4^l + 2` vertices.
pub fn icosphere(level: u32, radius: f64) -> TriMesh {
    let mut m = icosahedron(radius);
    for _ in 0..level {
        m = m.subdivided(|p| p.normalize() * radius);
    }
    m
}

/// Torus around the z axis with major radius `major`, tube radius `minor`,
/// `nu` segments around the axis and `nv` around the tube.
pub fn torus(major: f64, minor: f64, nu: usize, nv: usize) -> TriMesh {
    let (positions, faces) = torus_parts(major, minor, nu, nv, Vec3::zeros());
    TriMesh::new(positions, faces).expect("valid torus")
}

fn torus_parts(
    major: f64,
    minor: f64,
    nu: usize,
    nv: usize,
    center: Vec3,
) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let mut positions = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 2.0 * PI * i as f64 / nu as f64;
        for j in 0..nv {
            let v = 2.0 * PI * j as f64 / nv as f64;
            let rho = major + minor * v.cos();
            positions.push(center + Vec3::new(rho * u.cos(), rho * u.sin(), minor * v.sin()));
        }
    }
    let idx = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    (positions, faces)
}

/// Two tori joined by a short square tube: a closed genus-2 surface.
///
/// The second torus is the mirror image of the first across the plane
/// `x = major + minor + gap / 2`; the quad facing that plane is removed from
/// each and the two holes are bridged.
pub fn double_torus(major: f64, minor: f64, n: usize, gap: f64) -> TriMesh {
    assert!(n >= 4 && n % 2 == 0);
    let x_mid = major + minor + gap / 2.0;
    let (pa, fa) = torus_parts(major, minor, n, n, Vec3::zeros());
    let (pb, fb) = torus_parts(major, minor, n, n, Vec3::new(2.0 * x_mid, 0.0, 0.0));
    let idx = |i: usize, j: usize| (i % n) * n + (j % n);
    let off = pa.len();

    // quad (i=0, j=0) of the first torus faces +x; its mirror is quad (n/2 - 1, 0)
    let removed_a = [2 * idx(0, 0), 2 * idx(0, 0) + 1];
    let removed_b = [2 * idx(n / 2 - 1, 0), 2 * idx(n / 2 - 1, 0) + 1];
    let mirror = |v: usize| {
        let (i, j) = (v / n, v % n);
        off + idx(n / 2 + n - i, j)
    };

    let mut positions = pa;
    positions.extend(pb);
    let mut faces: Vec<[usize; 3]> = fa
        .iter()
        .enumerate()
        .filter(|(f, _)| !removed_a.contains(f))
        .map(|(_, f)| *f)
        .collect();
    faces.extend(
        fb.iter()
            .enumerate()
            .filter(|(f, _)| !removed_b.contains(f))
            .map(|(_, f)| f.map(|v| v + off)),
    );
    // kept-mesh hole edges p -> q of the first torus around the removed quad a, b, c, d
    let (a, b, c, d) = (idx(0, 0), idx(1, 0), idx(1, 1), idx(0, 1));
    for (p, q) in [(b, a), (c, b), (d, c), (a, d)] {
        faces.push([q, p, mirror(p)]);
        faces.push([q, mirror(p), mirror(q)]);
    }
    TriMesh::new(positions, faces).expect("valid double torus")
}

/// Surface of revolution about the z axis. `profile` runs from the south
/// pole `(0, z_min)` to the north pole `(0, z_max)`; interior points are
/// `(radius, z)` rings with `n_theta` vertices each.
pub fn revolution(profile: &[(f64, f64)], n_theta: usize) -> TriMesh {
    assert!(profile.len() >= 3);
    let rings = &profile[1..profile.len() - 1];
    let (_, z_south) = profile[0];
    let (_, z_north) = profile[profile.len() - 1];
    let mut positions = vec![Vec3::new(0.0, 0.0, z_south)];
    for &(rho, z) in rings {
        for i in 0..n_theta {
            let u = 2.0 * PI * i as f64 / n_theta as f64;
            positions.push(Vec3::new(rho * u.cos(), rho * u.sin(), z));
        }
    }
    let north = positions.len();
    positions.push(Vec3::new(0.0, 0.0, z_north));
    let idx = |k: usize, i: usize| 1 + k * n_theta + (i % n_theta);
    let mut faces = Vec::new();
    for i in 0..n_theta {
        faces.push([0, idx(0, i + 1), idx(0, i)]);
    }
    for k in 0..rings.len() - 1 {
        for i in 0..n_theta {
            let (a, b, c, d) = (idx(k, i), idx(k, i + 1), idx(k + 1, i + 1), idx(k + 1, i));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    let last = rings.len() - 1;
    for i in 0..n_theta {
        faces.push([north, idx(last, i), idx(last, i + 1)]);
    }
    TriMesh::new(positions, faces).expect("valid surface of revolution")
}

/// Cylinder of the given radius over `z ∈ [-half_height, half_height]`
/// with flat caps.
pub fn capped_cylinder(radius: f64, half_height: f64, n_theta: usize, n_z: usize) -> TriMesh {
    let mut profile = vec![(0.0, -half_height), (0.5 * radius, -half_height)];
    for k in 0..=n_z {
        let z = -half_height + 2.0 * half_height * k as f64 / n_z as f64;
        profile.push((radius, z));
    }
    profile.push((0.5 * radius, half_height));
    profile.push((0.0, half_height));
    revolution(&profile, n_theta)
}

/// Cylinder with hemispherical ends; `length` is the total tip-to-tip length.
pub fn capsule(length: f64, radius: f64, n_theta: usize) -> TriMesh {
    let half = length / 2.0 - radius;
    assert!(half > 0.0);
    let n_cap = (n_theta / 4).max(2);
    let mut profile = vec![(0.0, -half - radius)];
    for k in 1..=n_cap {
        let a = -PI / 2.0 + PI / 2.0 * k as f64 / n_cap as f64;
        profile.push((radius * a.cos(), -half + radius * a.sin()));
    }
    let spacing = 2.0 * PI * radius / n_theta as f64;
    let n_mid = ((2.0 * half / spacing).ceil() as usize).max(1);
    for k in 1..n_mid {
        profile.push((radius, -half + 2.0 * half * k as f64 / n_mid as f64));
    }
    for k in 0..n_cap {
        let a = PI / 2.0 * k as f64 / n_cap as f64;
        profile.push((radius * a.cos(), half + radius * a.sin()));
    }
    profile.push((0.0, half + radius));
    revolution(&profile, n_theta)
}

/// Closed slab whose top is the graph of `height` over the square
/// `[-half_width, half_width]^2` sampled on an `n × n` cell grid, with a
/// flat bottom at `z = -depth`.
pub fn slab(n: usize, half_width: f64, depth: f64, height: impl Fn(f64, f64) -> f64) -> TriMesh {
    let side = n + 1;
    let coord = |i: usize| -half_width + 2.0 * half_width * i as f64 / n as f64;
    let mut positions = Vec::with_capacity(2 * side * side);
    for j in 0..side {
        for i in 0..side {
            let (x, y) = (coord(i), coord(j));
            positions.push(Vec3::new(x, y, height(x, y)));
        }
    }
    let bottom = positions.len();
    for j in 0..side {
        for i in 0..side {
            positions.push(Vec3::new(coord(i), coord(j), -depth));
        }
    }
    let top_idx = |i: usize, j: usize| j * side + i;
    let bot_idx = |i: usize, j: usize| bottom + j * side + i;
    let mut faces = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (top_idx(i, j), top_idx(i + 1, j), top_idx(i + 1, j + 1), top_idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
            let (a, b, c, d) = (bot_idx(i, j), bot_idx(i + 1, j), bot_idx(i + 1, j + 1), bot_idx(i, j + 1));
            faces.push([a, c, b]);
            faces.push([a, d, c]);
        }
    }
    // boundary loop of the top grid, counterclockwise seen from above
    let mut ring = Vec::with_capacity(4 * n);
    ring.extend((0..n).map(|i| (i, 0)));
    ring.extend((0..n).map(|j| (n, j)));
    ring.extend((0..n).map(|i| (n - i, n)));
    ring.extend((0..n).map(|j| (0, n - j)));
    for k in 0..ring.len() {
        let (pi, pj) = ring[k];
        let (qi, qj) = ring[(k + 1) % ring.len()];
        let (pt, qt) = (top_idx(pi, pj), top_idx(qi, qj));
        let (pb, qb) = (bot_idx(pi, pj), bot_idx(qi, qj));
        faces.push([pb, qb, qt]);
        faces.push([pb, qt, pt]);
    }
    TriMesh::new(positions, faces).expect("valid slab")
}

/// Indices of the top-grid vertices of a [`slab`] mesh.
pub fn slab_top_vertices(n: usize) -> std::ops::Range<usize> {
    0..(n + 1) * (n + 1)
}
