//! Small dense linear algebra used by the implicit solvers.
//!
//! Problem sizes are tiny (at most a few dozen unknowns), so everything is
//! row-major `Vec<f64>` storage and direct elimination.

use crate::error::{Error, Result};

/// Pivots below this magnitude (after row equilibration) are treated as zero.
pub const PIVOT_THRESHOLD: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ · y`
    pub fn transpose_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * yi;
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
///
/// Each row is first scaled by its largest absolute entry so the pivot test
/// is independent of the physical units of individual equations.
pub fn solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows;
    assert_eq!(a.cols, n, "solve needs a square matrix");
    assert_eq!(b.len(), n);
    let mut m = a.data.clone();
    let mut rhs = b.to_vec();

    for i in 0..n {
        let scale = m[i * n..(i + 1) * n]
            .iter()
            .fold(0.0_f64, |acc, x| acc.max(x.abs()));
        if scale == 0.0 || !scale.is_finite() {
            return Err(Error::SingularJacobian { pivot: 0.0 });
        }
        for v in &mut m[i * n..(i + 1) * n] {
            *v /= scale;
        }
        rhs[i] /= scale;
    }

    for col in 0..n {
        let (piv_row, piv_val) = (col..n)
            .map(|r| (r, m[r * n + col].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(piv_val >= PIVOT_THRESHOLD) {
            return Err(Error::SingularJacobian { pivot: piv_val.max(0.0) });
        }
        if piv_row != col {
            for j in 0..n {
                m.swap(col * n + j, piv_row * n + j);
            }
            rhs.swap(col, piv_row);
        }
        let p = m[col * n + col];
        for r in col + 1..n {
            let f = m[r * n + col] / p;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m[r * n + j] -= f * m[col * n + j];
            }
            rhs[r] -= f * rhs[col];
        }
    }

    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i * n + j] * x[j]).sum();
        x[i] = (rhs[i] - s) / m[i * n + i];
    }
    Ok(x)
}

/// Minimum-norm least-squares solution of `a x = b` (any shape, any rank).
pub fn lstsq_min_norm(a: &Matrix, b: &[f64]) -> Vec<f64> {
    if a.rows == 0 || a.cols == 0 {
        return vec![0.0; a.cols];
    }
    let svd = a.to_nalgebra().svd(true, true);
    let rhs = nalgebra::DVector::from_column_slice(b);
    let max_sv = svd.singular_values.iter().fold(0.0_f64, |m, s| m.max(*s));
    let eps = max_sv * 1e-12 * (a.rows.max(a.cols) as f64);
    match svd.solve(&rhs, eps.max(f64::MIN_POSITIVE)) {
        Ok(x) => x.iter().copied().collect(),
        Err(_) => vec![0.0; a.cols],
    }
}

/// Projects `v` onto the affine set `{w : a w + c = 0}` changing only the
/// components where `free[k]` is true, with minimal Euclidean correction.
/// Falls back to least squares when the system is rank deficient.
pub fn project_affine(a: &Matrix, c: &[f64], v: &[f64], free: &[bool]) -> Vec<f64> {
    assert_eq!(a.cols, v.len());
    assert_eq!(free.len(), v.len());
    if a.rows == 0 {
        return v.to_vec();
    }
    let violation: Vec<f64> = a.mul_vec(v).iter().zip(c).map(|(av, ci)| av + ci).collect();
    let mut masked = a.clone();
    for i in 0..a.rows {
        for (j, f) in free.iter().enumerate() {
            if !f {
                masked[(i, j)] = 0.0;
            }
        }
    }
    let delta = lstsq_min_norm(&masked, &violation);
    v.iter().zip(&delta).map(|(vi, d)| vi - d).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_with_pivoting() {
        let a = Matrix::from_rows(&[&[0.0, 2.0], &[3.0, 1.0]]);
        let x = solve(&a, &[4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(solve(&a, &[1.0, 1.0]), Err(Error::SingularJacobian { .. })));
    }

    #[test]
    fn projection_is_idempotent_and_respects_mask() {
        let a = Matrix::from_rows(&[&[1.0, 0.0, -0.5]]);
        let v = project_affine(&a, &[0.0], &[1.0, 7.0, 1.0], &[true, false, false]);
        assert!((v[0] - 0.5).abs() < 1e-14);
        assert_eq!(v[1], 7.0);
        assert_eq!(v[2], 1.0);
        let w = project_affine(&a, &[0.0], &v, &[true; 3]);
        assert!(norm_inf(&[w[0] - v[0], w[1] - v[1], w[2] - v[2]]) < 1e-14);
    }

    #[test]
    fn rank_deficient_projection_is_defined() {
        let a = Matrix::from_rows(&[&[0.0, 0.0]]);
        let v = project_affine(&a, &[0.0], &[1.0, 2.0], &[true, true]);
        assert_eq!(v, vec![1.0, 2.0]);
    }
}
