//! Banded symmetric positive definite factorization.

use crate::error::{Error, Result};

/// Lower Cholesky factor of a symmetric band matrix, stored row by row as
/// `l[i * (b + 1) + (j + b - i)]` for `i - b <= j <= i`.
#[derive(Debug, Clone)]
pub(crate) struct BandedCholesky {
    n: usize,
    b: usize,
    l: Vec<f64>,
}

/// Symmetric band matrix assembled from lower-triangle entries.
#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    b: usize,
    a: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, b: usize) -> Self {
        BandMatrix {
            n,
            b,
            a: vec![0.0; n * (b + 1)],
        }
    }

    /// Adds `v` at `(i, j)`; entries above the diagonal are ignored since
    /// the matrix is symmetric.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if j > i {
            return;
        }
        assert!(i - j <= self.b, "entry outside band");
        self.a[i * (self.b + 1) + (j + self.b - i)] += v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if i - j > self.b {
            0.0
        } else {
            self.a[i * (self.b + 1) + (j + self.b - i)]
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.b);
            for j in lo..=i {
                let v = self.get(i, j);
                y[i] += v * x[j];
                if j != i {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    pub fn factor(&self) -> Result<BandedCholesky> {
        let (n, b) = (self.n, self.b);
        let w = b + 1;
        let mut l = vec![0.0; n * w];
        for i in 0..n {
            let lo = i.saturating_sub(b);
            for j in lo..=i {
                let mut s = self.a[i * w + (j + b - i)];
                let klo = lo.max(j.saturating_sub(b));
                for k in klo..j {
                    s -= l[i * w + (k + b - i)] * l[j * w + (k + b - j)];
                }
                if j == i {
                    if !(s > 0.0) {
                        return Err(Error::SolverFailure(s));
                    }
                    l[i * w + b] = s.sqrt();
                } else {
                    l[i * w + (j + b - i)] = s / l[j * w + b];
                }
            }
        }
        Ok(BandedCholesky { n, b, l })
    }
}

impl BandedCholesky {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, b) = (self.n, self.b);
        let w = b + 1;
        let mut y = rhs.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let mut s = y[i];
            for k in lo..i {
                s -= self.l[i * w + (k + b - i)] * y[k];
            }
            y[i] = s / self.l[i * w + b];
        }
        for i in (0..n).rev() {
            let hi = (i + b).min(n - 1);
            let mut s = y[i];
            for k in i + 1..=hi {
                s -= self.l[k * w + (i + b - k)] * y[k];
            }
            y[i] = s / self.l[i * w + b];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_poisson() {
        let n = 50;
        let mut a = BandMatrix::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let rhs = a.mul(&x);
        let sol = a.factor().unwrap().solve(&rhs);
        for (p, q) in sol.iter().zip(&x) {
            assert!((p - q).abs() < 1e-11);
        }
    }

    #[test]
    fn wide_band_matches_dense_oracle() {
        let n = 12;
        let b = 4;
        let mut a = BandMatrix::zeros(n, b);
        let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(b)..=i {
                let v = if i == j { 10.0 + i as f64 } else { 1.0 / (1.0 + (i + 2 * j) as f64) };
                a.add(i, j, v);
                dense[(i, j)] = v;
                dense[(j, i)] = v;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| i as f64 - 3.5).collect();
        let band = a.factor().unwrap().solve(&rhs);
        let oracle = dense.cholesky().unwrap().solve(&nalgebra::DVector::from_vec(rhs));
        for i in 0..n {
            assert!((band[i] - oracle[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let mut a = BandMatrix::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(1, 0, 2.0);
        assert!(matches!(a.factor(), Err(Error::SolverFailure(_))));
    }
}
