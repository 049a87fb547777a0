//! Square band matrices with equal lower and upper bandwidth, and the banded
//! Cholesky factorization used by every solver in the crate.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::fmt::Write as _;

/// Both triangles are stored so that symmetry of an assembled operator is an
/// observable property rather than an assumption of the storage.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kd: usize,
    // row-major, entry (i, j) at i * (2kd + 1) + (j + kd - i)
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kd: usize) -> Self {
        Self { n, kd, data: vec![0.0; n * (2 * kd + 1)] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0);
        (0..n).for_each(|i| m.add(i, i, 1.0));
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.kd
    }

    fn idx(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n || i.abs_diff(j) > self.kd {
            None
        } else {
            Some(i * (2 * self.kd + 1) + j + self.kd - i)
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.idx(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Accumulate into entry (i, j). Panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j).unwrap_or_else(|| {
            panic!("entry ({i}, {j}) outside band of width {} (n = {})", self.kd, self.n)
        });
        self.data[k] += v;
    }

    /// Rows with their in-band column range.
    fn cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kd)..(i + self.kd + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| self.cols(i).map(|j| self.get(i, j) * x[j]).sum()).collect()
    }

    /// xᵀ A y.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(self.matvec(y)).map(|(a, b)| a * b).sum()
    }

    pub fn quad(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    /// a·self + b·other, with the wider band of the two.
    pub fn combine(&self, a: f64, other: &BandMatrix, b: f64) -> BandMatrix {
        assert_eq!(self.n, other.n);
        let kd = self.kd.max(other.kd);
        let mut out = BandMatrix::zeros(self.n, kd);
        for i in 0..self.n {
            for j in out.cols(i) {
                let v = a * self.get(i, j) + b * other.get(i, j);
                if v != 0.0 {
                    out.add(i, j, v);
                }
            }
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.cols(i).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// max |A_ij - A_ji| / max |A_ij|.
    pub fn asymmetry(&self) -> f64 {
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..self.n {
            for j in self.cols(i) {
                diff = diff.max((self.get(i, j) - self.get(j, i)).abs());
                scale = scale.max(self.get(i, j).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            diff / scale
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Sum of off-diagonal magnitudes in each row.
    pub fn off_diagonal_row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.cols(i).filter(|&j| j != i).map(|j| self.get(i, j).abs()).sum())
            .collect()
    }

    /// Cholesky factor of the symmetric matrix (lower triangle is read).
    pub fn cholesky(&self) -> Result<BandCholesky> {
        let (n, kd) = (self.n, self.kd);
        // l[i][d] = L(i, i - d)
        let mut l = vec![0.0; n * (kd + 1)];
        for i in 0..n {
            let lo = i.saturating_sub(kd);
            for j in lo..=i {
                let mut s = self.get(i, j);
                let klo = lo.max(j.saturating_sub(kd));
                for k in klo..j {
                    s -= l[i * (kd + 1) + (i - k)] * l[j * (kd + 1) + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotPositiveDefinite { row: i, pivot: s });
                    }
                    l[i * (kd + 1)] = s.sqrt();
                } else {
                    l[i * (kd + 1) + (i - j)] = s / l[j * (kd + 1)];
                }
            }
        }
        Ok(BandCholesky { n, kd, l })
    }

    /// Text dump: a comment header followed by one `row col value` line per
    /// stored nonzero, zero-based indices, values in `{:.16e}`.
    pub fn to_triplets(&self, name: &str) -> String {
        let mut s = format!("# {name}: n = {}, half-bandwidth = {}\n# row col value\n", self.n, self.kd);
        for i in 0..self.n {
            for j in self.cols(i) {
                let v = self.get(i, j);
                if v != 0.0 {
                    let _ = writeln!(s, "{i} {j} {v:.16e}");
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    kd: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.l[i * (self.kd + 1) + (i - j)]
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, kd) = (self.n, self.kd);
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(kd)..i {
                s -= self.at(i, k) * y[k];
            }
            y[i] = s / self.at(i, i);
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + kd + 1).min(n) {
                s -= self.at(k, i) * y[k];
            }
            y[i] = s / self.at(i, i);
        }
        y
    }

    /// log det of the factored matrix.
    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| 2.0 * self.at(i, i).ln()).sum()
    }
}
