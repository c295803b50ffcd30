//! Row-major band storage with an LU solver for shifted M-matrices.

use crate::error::{Error, Result};

/// Square matrix whose nonzeros lie within `lower` sub- and `upper`
/// super-diagonals. Row `i` stores columns `i − lower ..= i + upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        Self {
            n,
            lower,
            upper,
            data: vec![0.0; n * (lower + upper + 1)],
        }
    }

    /// Builds from a dense row-major matrix, detecting the bandwidth.
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let (mut lower, mut upper) = (0, 0);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "matrix must be square");
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    if j < i {
                        lower = lower.max(i - j);
                    } else {
                        upper = upper.max(j - i);
                    }
                }
            }
        }
        let mut m = Self::zeros(n, lower, upper);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    m.set(i, j, v);
                }
            }
        }
        m
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> usize {
        self.lower
    }

    pub fn upper(&self) -> usize {
        self.upper
    }

    fn width(&self) -> usize {
        self.lower + self.upper + 1
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.lower >= i && j <= i + self.upper
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i >= self.n || j >= self.n || !self.in_band(i, j) {
            0.0
        } else {
            self.data[i * self.width() + j + self.lower - i]
        }
    }

    /// Panics if `(i, j)` is outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.n && j < self.n && self.in_band(i, j), "({i}, {j}) outside band");
        let w = self.width();
        self.data[i * w + j + self.lower - i] = v;
    }

    /// Column range stored for row `i`, clipped to the matrix.
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.lower)..(i + self.upper + 1).min(self.n)
    }

    /// Stored entries of row `i` over [`Self::row_range`].
    pub fn row(&self, i: usize) -> &[f64] {
        let r = self.row_range(i);
        let w = self.width();
        let start = i * w + r.start + self.lower - i;
        &self.data[start..start + r.len()]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let r = self.row_range(i);
        let w = self.width();
        let start = i * w + r.start + self.lower - i;
        &mut self.data[start..start + r.len()]
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let r = self.row_range(i);
            *yi = self.row(i).iter().zip(&x[r]).map(|(a, b)| a * b).sum();
        }
    }

    /// `xᵀ A`.
    pub fn vec_mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let r = self.row_range(i);
            for (yj, a) in y[r].iter_mut().zip(self.row(i)) {
                *yj += xi * a;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n, self.upper, self.lower);
        for i in 0..self.n {
            let r = self.row_range(i);
            for (j, &v) in r.zip(self.row(i)) {
                t.set(j, i, v);
            }
        }
        t
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&v| v >= 0.0)
    }

    /// LU factorization of `s·I − A` without pivoting. Valid whenever
    /// `s > ρ(A)` for nonnegative `A`, which makes the shifted matrix a
    /// nonsingular M-matrix.
    pub fn shifted_lu(&self, shift: f64) -> Result<ShiftedLu> {
        let n = self.n;
        let (kl, ku) = (self.lower, self.upper);
        let w = self.width();
        let mut lu = self.data.iter().map(|v| -v).collect::<Vec<f64>>();
        for i in 0..n {
            lu[i * w + kl] += shift;
        }
        for k in 0..n {
            let pivot = lu[k * w + kl];
            if !(pivot > 0.0) {
                return Err(Error::Format(format!(
                    "shifted matrix lost the M-matrix property at pivot {k} ({pivot:e})"
                )));
            }
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + ku).min(n - 1);
            for i in k + 1..=last_row {
                let ik = i * w + k + kl - i;
                let l = lu[ik] / pivot;
                lu[ik] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=last_col {
                    lu[i * w + j + kl - i] -= l * lu[k * w + j + kl - k];
                }
            }
        }
        Ok(ShiftedLu {
            n,
            lower: kl,
            upper: ku,
            lu,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ShiftedLu {
    n: usize,
    lower: usize,
    upper: usize,
    lu: Vec<f64>,
}

impl ShiftedLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.lower, self.upper);
        let w = kl + ku + 1;
        for i in 0..n {
            let mut s = b[i];
            for j in i.saturating_sub(kl)..i {
                s -= self.lu[i * w + j + kl - i] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..(i + ku + 1).min(n) {
                s -= self.lu[i * w + j + kl - i] * b[j];
            }
            b[i] = s / self.lu[i * w + kl];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> BandedMatrix {
        BandedMatrix::from_dense(&[
            vec![0.5, 0.2, 0.0, 0.0],
            vec![0.1, 0.4, 0.3, 0.0],
            vec![0.0, 0.2, 0.3, 0.1],
            vec![0.0, 0.0, 0.25, 0.5],
        ])
    }

    #[test]
    fn dense_round_trip_and_products() {
        let a = sample();
        assert_eq!((a.lower(), a.upper()), (1, 1));
        let d = a.to_dense();
        assert_eq!(BandedMatrix::from_dense(&d), a);
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = a.mul_vec(&x);
        for i in 0..4 {
            let expect: f64 = (0..4).map(|j| d[i][j] * x[j]).sum();
            assert!((y[i] - expect).abs() < 1e-15);
        }
        let yt = a.vec_mul(&x);
        let yt2 = a.transpose().mul_vec(&x);
        for i in 0..4 {
            assert!((yt[i] - yt2[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn shifted_solve_matches_definition() {
        let a = sample();
        let lu = a.shifted_lu(2.0).unwrap();
        let mut x = vec![1.0, -1.0, 0.5, 2.0];
        let b = x.clone();
        lu.solve_in_place(&mut x);
        let ax = a.mul_vec(&x);
        for i in 0..4 {
            assert!((2.0 * x[i] - ax[i] - b[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn shift_below_spectral_radius_is_rejected() {
        let a = BandedMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(a.shifted_lu(1.5).is_err());
    }
}
