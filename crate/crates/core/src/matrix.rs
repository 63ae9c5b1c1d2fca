//! Dense matrices over a [`FieldSpec`], with exact Gaussian elimination.

use std::fmt;

use crate::error::{Error, Result};
use crate::field::{FieldElement, FieldSpec};

#[derive(Clone, PartialEq, Eq)]
pub struct Matrix {
    field: FieldSpec,
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

impl Matrix {
    /// Builds a matrix from row-major entries, validating each against the field.
    pub fn new(field: FieldSpec, rows: usize, cols: usize, data: Vec<u32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        for &v in &data {
            field.check(v)?;
        }
        Ok(Matrix {
            field,
            rows,
            cols,
            data,
        })
    }

    pub fn from_rows(field: FieldSpec, rows: &[Vec<u32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Matrix::new(field, rows.len(), cols, rows.concat())
    }

    pub fn zeros(field: FieldSpec, rows: usize, cols: usize) -> Self {
        Matrix {
            field,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(field: FieldSpec, n: usize) -> Self {
        let mut m = Matrix::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn field(&self) -> FieldSpec {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.data[r * self.cols + c]
    }

    pub fn element(&self, r: usize, c: usize) -> FieldElement {
        self.field
            .element(self.get(r, c))
            .expect("entries are validated on construction")
    }

    pub fn set(&mut self, r: usize, c: usize, v: u32) -> Result<()> {
        self.field.check(v)?;
        self.data[r * self.cols + c] = v;
        Ok(())
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<u32> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.field, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.get(r, c);
            }
        }
        t
    }

    /// Rows picked by index, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &r in idx {
            data.extend_from_slice(self.row(r));
        }
        Matrix {
            field: self.field,
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn select_cols(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.rows);
        for r in 0..self.rows {
            data.extend(idx.iter().map(|&c| self.get(r, c)));
        }
        Matrix {
            field: self.field,
            rows: self.rows,
            cols: idx.len(),
            data,
        }
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        self.same_field(other)?;
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "vstack of {} and {} columns",
                self.cols, other.cols
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix {
            field: self.field,
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    fn same_field(&self, other: &Matrix) -> Result<()> {
        if self.field != other.field {
            return Err(Error::FieldMismatch {
                left: self.field,
                right: other.field,
            });
        }
        Ok(())
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        self.same_field(other)?;
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let f = self.field;
        let mut out = Matrix::zeros(f, self.rows, other.cols);
        for r in 0..self.rows {
            for t in 0..self.cols {
                let a = self.get(r, t);
                if a == 0 {
                    continue;
                }
                for c in 0..other.cols {
                    let idx = r * other.cols + c;
                    out.data[idx] = f.add(out.data[idx], f.mul(a, other.get(t, c)));
                }
            }
        }
        Ok(out)
    }

    /// Row vector times matrix: `v · self`.
    pub fn left_mul_vec(&self, v: &[u32]) -> Result<Vec<u32>> {
        if v.len() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} times {}x{}",
                v.len(),
                self.rows,
                self.cols
            )));
        }
        let f = self.field;
        let mut out = vec![0; self.cols];
        for (r, &a) in v.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (c, o) in out.iter_mut().enumerate() {
                *o = f.add(*o, f.mul(a, self.get(r, c)));
            }
        }
        Ok(out)
    }

    /// Matrix times column vector: `self · v`.
    pub fn mul_vec(&self, v: &[u32]) -> Result<Vec<u32>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| self.field.dot(self.row(r), v))
            .collect())
    }

    /// Reduces `self` in place to reduced row echelon form, applying the same
    /// row operations to `aug` when given. Returns the pivot columns.
    fn row_reduce(&mut self, mut aug: Option<&mut Matrix>) -> Vec<usize> {
        let f = self.field;
        let mut pivots = Vec::new();
        let mut prow = 0;
        for col in 0..self.cols {
            if prow == self.rows {
                break;
            }
            let Some(sel) = (prow..self.rows).find(|&r| self.get(r, col) != 0) else {
                continue;
            };
            self.swap_rows(sel, prow);
            if let Some(a) = aug.as_deref_mut() {
                a.swap_rows(sel, prow);
            }
            let inv = f.inv(self.get(prow, col)).expect("pivot is nonzero");
            self.scale_row(prow, inv);
            if let Some(a) = aug.as_deref_mut() {
                a.scale_row(prow, inv);
            }
            for r in 0..self.rows {
                if r == prow {
                    continue;
                }
                let factor = self.get(r, col);
                if factor == 0 {
                    continue;
                }
                self.axpy_row(r, prow, f.neg(factor));
                if let Some(a) = aug.as_deref_mut() {
                    a.axpy_row(r, prow, f.neg(factor));
                }
            }
            pivots.push(col);
            prow += 1;
        }
        pivots
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    fn scale_row(&mut self, r: usize, s: u32) {
        let f = self.field;
        for v in &mut self.data[r * self.cols..(r + 1) * self.cols] {
            *v = f.mul(*v, s);
        }
    }

    /// row[dst] += s * row[src]
    fn axpy_row(&mut self, dst: usize, src: usize, s: u32) {
        let f = self.field;
        for c in 0..self.cols {
            let v = f.mul(s, self.data[src * self.cols + c]);
            let d = &mut self.data[dst * self.cols + c];
            *d = f.add(*d, v);
        }
    }

    pub fn rank(&self) -> usize {
        self.clone().row_reduce(None).len()
    }

    /// Pivot columns of the reduced row echelon form, in ascending order.
    pub fn pivot_columns(&self) -> Vec<usize> {
        self.clone().row_reduce(None)
    }

    /// Solves `self · x = rhs` for square invertible `self`.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix> {
        self.same_field(rhs)?;
        if !self.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "solve needs a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        if rhs.rows != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "rhs has {} rows, system has {}",
                rhs.rows, self.rows
            )));
        }
        let mut a = self.clone();
        let mut x = rhs.clone();
        if a.row_reduce(Some(&mut x)).len() < self.rows {
            return Err(Error::SingularMatrix);
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        self.solve(&Matrix::identity(self.field, self.rows))
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix<{}>{:?}", self.field, self.to_rows())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gf7() -> FieldSpec {
        FieldSpec::prime(7).unwrap()
    }

    fn m7(rows: &[Vec<u32>]) -> Matrix {
        Matrix::from_rows(gf7(), rows).unwrap()
    }

    #[test]
    fn small_product() {
        let a = m7(&[vec![1, 1], vec![1, 2]]);
        let b = m7(&[vec![1], vec![3]]);
        assert_eq!(a.mul(&b).unwrap(), m7(&[vec![4], vec![0]]));
    }

    #[test]
    fn identity_and_zero_products() {
        let a = m7(&[vec![2, 5, 1], vec![0, 3, 6]]);
        assert_eq!(Matrix::identity(gf7(), 2).mul(&a).unwrap(), a);
        assert_eq!(
            Matrix::zeros(gf7(), 4, 2).mul(&a).unwrap(),
            Matrix::zeros(gf7(), 4, 3)
        );
        assert!(matches!(a.mul(&a), Err(Error::DimensionMismatch(_))));
        let other = Matrix::identity(FieldSpec::gf256(), 3);
        assert!(matches!(a.mul(&other), Err(Error::FieldMismatch { .. })));
    }

    #[test]
    fn solve_and_inverse_edge_cases() {
        let id = Matrix::identity(gf7(), 3);
        let rhs = m7(&[vec![1, 2], vec![3, 4], vec![5, 6]]);
        assert_eq!(id.solve(&rhs).unwrap(), rhs);
        assert_eq!(id.inverse().unwrap(), id);
        assert_eq!(
            Matrix::zeros(gf7(), 3, 3).solve(&rhs),
            Err(Error::SingularMatrix)
        );
        let dup = m7(&[vec![1, 2, 3], vec![1, 2, 3], vec![0, 1, 1]]);
        assert_eq!(dup.inverse(), Err(Error::SingularMatrix));
    }

    #[test]
    fn ranks() {
        let f = gf7();
        // Vandermonde on points 1..4, width 4.
        let v = Matrix::from_rows(
            f,
            &(1..=4u32)
                .map(|x| (0..4).map(|e| f.pow(x, e)).collect())
                .collect::<Vec<_>>(),
        )
        .unwrap();
        assert_eq!(v.rank(), 4);
        let dup = m7(&[vec![1, 2, 3], vec![1, 2, 3], vec![0, 1, 1]]);
        assert_eq!(dup.rank(), 2);
        assert_eq!(Matrix::zeros(f, 3, 5).rank(), 0);
    }

    fn arb_square(q: u32, n: usize) -> impl Strategy<Value = Vec<u32>> {
        proptest::collection::vec(0..q, n * n)
    }

    proptest! {
        #[test]
        fn solve_roundtrip_gf7(a in arb_square(7, 4), x in proptest::collection::vec(0u32..7, 8)) {
            let f = gf7();
            let a = Matrix::new(f, 4, 4, a).unwrap();
            let x = Matrix::new(f, 4, 2, x).unwrap();
            let b = a.mul(&x).unwrap();
            match a.solve(&b) {
                Ok(sol) => prop_assert_eq!(sol, x),
                Err(e) => {
                    prop_assert_eq!(e, Error::SingularMatrix);
                    prop_assert!(a.rank() < 4);
                }
            }
        }

        #[test]
        fn inverse_roundtrip_gf256(a in arb_square(256, 5)) {
            let f = FieldSpec::gf256();
            let a = Matrix::new(f, 5, 5, a).unwrap();
            if let Ok(inv) = a.inverse() {
                prop_assert_eq!(a.mul(&inv).unwrap(), Matrix::identity(f, 5));
                prop_assert_eq!(inv.mul(&a).unwrap(), Matrix::identity(f, 5));
            } else {
                prop_assert!(a.rank() < 5);
            }
        }
    }
}
