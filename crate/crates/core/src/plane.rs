//! Oriented affine 2-planes in ℝ³.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::mesh::Vec3;

/// An affine plane with an orthonormal frame `(e1, e2, normal)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub origin: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
    pub normal: Vec3,
}

impl Plane {
    pub fn from_normal(origin: Vec3, normal: Vec3) -> Plane {
        let normal = normal.normalize();
        let helper = if normal.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let e1 = (helper - normal * normal.dot(&helper)).normalize();
        let e2 = normal.cross(&e1);
        Plane { origin, e1, e2, normal }
    }

    /// Weighted least-squares plane: through the weighted mean, normal
    /// along the eigenvector of the smallest covariance eigenvalue.
    /// Returns `None` for empty or zero-weight input.
    pub fn fit(points: &[(Vec3, f64)]) -> Option<Plane> {
        let total: f64 = points.iter().map(|(_, w)| w).sum();
        if points.is_empty() || total <= 0.0 {
            return None;
        }
        let mean = points.iter().map(|(p, w)| p * *w).sum::<Vec3>() / total;
        let mut cov = Matrix3::zeros();
        for (p, w) in points {
            let d = p - mean;
            cov += d * d.transpose() * *w;
        }
        let eig = SymmetricEigen::new(cov);
        let k = eig.eigenvalues.imin();
        Some(Plane::from_normal(mean, eig.eigenvectors.column(k).into_owned()))
    }

    /// The same plane with the normal flipped if it disagrees with `hint`.
    pub fn oriented_along(self, hint: &Vec3) -> Plane {
        if self.normal.dot(hint) < 0.0 {
            Plane {
                e2: self.e1,
                e1: self.e2,
                normal: -self.normal,
                ..self
            }
        } else {
            self
        }
    }

    pub fn with_origin(self, origin: Vec3) -> Plane {
        Plane { origin, ..self }
    }

    /// Orthogonal projection of `p` onto the plane, keeping the frame.
    pub fn project(&self, p: &Vec3) -> Vec3 {
        p - self.normal * self.normal.dot(&(p - self.origin))
    }

    /// In-plane coordinates and signed height of `p`.
    pub fn coords(&self, p: &Vec3) -> (f64, f64, f64) {
        let d = p - self.origin;
        (d.dot(&self.e1), d.dot(&self.e2), d.dot(&self.normal))
    }

    pub fn lift(&self, x: f64, y: f64, h: f64) -> Vec3 {
        self.origin + self.e1 * x + self.e2 * y + self.normal * h
    }

    /// Orthogonal projector onto the tangent directions.
    pub fn projector(&self) -> Matrix3<f64> {
        Matrix3::identity() - self.normal * self.normal.transpose()
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(&(p - self.origin)).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_is_right_handed() {
        for n in [Vec3::z(), Vec3::x(), Vec3::new(1.0, -2.0, 0.5)] {
            let p = Plane::from_normal(Vec3::zeros(), n);
            assert!((p.e1.cross(&p.e2) - p.normal).norm() < 1e-14);
            assert!(p.e1.dot(&p.e2).abs() < 1e-14);
            let f = p.oriented_along(&-n);
            assert!((f.e1.cross(&f.e2) - f.normal).norm() < 1e-14);
        }
    }

    #[test]
    fn fit_recovers_tilted_plane() {
        let n = Vec3::new(0.2, -0.3, 1.0).normalize();
        let p0 = Plane::from_normal(Vec3::new(1.0, 2.0, 3.0), n);
        let pts: Vec<(Vec3, f64)> = (0..50)
            .map(|k| {
                let (x, y) = ((k % 7) as f64 - 3.0, (k / 7) as f64 - 3.0);
                (p0.lift(x, y, 0.0), 1.0 + k as f64)
            })
            .collect();
        let fit = Plane::fit(&pts).unwrap().oriented_along(&n);
        assert!((fit.normal - n).norm() < 1e-12);
        assert!(fit.distance(&p0.origin) < 1e-12);
        let (x, y, h) = fit.coords(&fit.lift(0.3, -0.7, 0.25));
        assert!((x - 0.3).abs() < 1e-14 && (y + 0.7).abs() < 1e-14 && (h - 0.25).abs() < 1e-14);
    }
}
