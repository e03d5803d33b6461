use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::InferenceError;

/// Pivots at or below this fraction of the largest diagonal entry count as
/// zero.
pub const PIVOT_TOLERANCE: f64 = 1e-12;
/// Largest accepted condition estimate `(max L_ii / min L_ii)^2`.
pub const MAX_CONDITION: f64 = 1e12;

/// Symmetric matrix holding only its upper triangle, row by row, so
/// symmetry is exact by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    upper: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            upper: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    /// Built from `f(i, j)` evaluated for `i <= j` only.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// From full rows, which must be symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, InferenceError> {
        let dim = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(InferenceError::NotSymmetric);
            }
            for j in 0..i {
                if row[j] != rows[j][i] {
                    return Err(InferenceError::NotSymmetric);
                }
            }
        }
        Ok(Self::from_fn(dim, |i, j| rows[i][j]))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        debug_assert!(j < self.dim);
        i * (2 * self.dim + 1 - i) / 2 + j - i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.upper[self.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let idx = self.index(i, j);
        self.upper[idx] = v;
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// `v^T M v`
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        v.iter().zip(self.mul_vec(v)).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.get(i, i).abs())
            .fold(0.0, f64::max)
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SymMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Lower Cholesky factor `L` with `M = L L^T`, stored densely row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Fails when a pivot is not clearly positive relative to the largest
    /// diagonal entry.
    pub fn factor(m: &SymMatrix) -> Result<Self, InferenceError> {
        let n = m.dim();
        let scale = m.max_abs_diagonal();
        let floor = PIVOT_TOLERANCE * scale;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut pivot = m.get(j, j);
            for k in 0..j {
                pivot -= l[j * n + k] * l[j * n + k];
            }
            if !(pivot > floor) || scale == 0.0 {
                return Err(InferenceError::NotPositiveDefinite { index: j, pivot });
            }
            let ljj = pivot.sqrt();
            l[j * n + j] = ljj;
            for i in (j + 1)..n {
                let mut v = m.get(i, j);
                for k in 0..j {
                    v -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = v / ljj;
            }
        }
        Ok(Self { dim: n, l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn l(&self, i: usize, j: usize) -> f64 {
        self.l[i * self.dim + j]
    }

    /// `(max L_ii / min L_ii)^2`, a cheap lower bound on the 2-norm
    /// condition number of `M`.
    pub fn condition_estimate(&self) -> f64 {
        let diag = (0..self.dim).map(|i| self.l(i, i));
        let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
        if self.dim == 0 {
            1.0
        } else {
            (hi / lo).powi(2)
        }
    }

    /// `y` with `L y = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l(i, k) * y[k];
            }
            y[i] /= self.l(i, i);
        }
        y
    }

    /// `b^T M^{-1} b = |L^{-1} b|^2`.
    pub fn inverse_quadratic_form(&self, b: &[f64]) -> f64 {
        self.forward(b).iter().map(|v| v * v).sum()
    }

    pub fn inverse(&self) -> SymMatrix {
        let n = self.dim;
        // Columns of L^{-1}, then M^{-1} = L^{-T} L^{-1}.
        let mut linv = vec![0.0; n * n];
        for c in 0..n {
            let e: Vec<f64> = (0..n).map(|i| if i == c { 1.0 } else { 0.0 }).collect();
            for (i, v) in self.forward(&e).into_iter().enumerate() {
                linv[i * n + c] = v;
            }
        }
        SymMatrix::from_fn(n, |i, j| {
            (j.max(i)..n)
                .map(|k| linv[k * n + i] * linv[k * n + j])
                .sum()
        })
    }
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse(m: &SymMatrix) -> Result<SymMatrix, InferenceError> {
    Ok(Cholesky::factor(m)?.inverse())
}
