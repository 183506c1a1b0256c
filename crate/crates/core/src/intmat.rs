//! Exact integer matrices: kernel lattices, unimodular completion, inverses.
//!
//! Everything here is exact; products are accumulated in `i128` and overflow
//! is reported rather than wrapped.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<i64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        if rows.iter().any(|x| x.len() != c) {
            return Err(Error::Validation("ragged integer matrix".into()));
        }
        Ok(IntMatrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: i64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[i64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = IntMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, got: other.rows });
        }
        let mut out = IntMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc: i128 = 0;
                for k in 0..self.cols {
                    acc += self.get(i, k) as i128 * other.get(k, j) as i128;
                }
                out.set(i, j, narrow(acc)?);
            }
        }
        Ok(out)
    }

    /// `M v` for an integer vector.
    pub fn apply(&self, v: &[i64]) -> Result<Vec<i64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, got: v.len() });
        }
        (0..self.rows)
            .map(|i| {
                let acc: i128 =
                    self.row(i).iter().zip(v).map(|(&a, &b)| a as i128 * b as i128).sum();
                narrow(acc)
            })
            .collect()
    }

    /// `M v` for a real vector.
    pub fn apply_f64(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, got: v.len() });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a as f64 * b).sum())
            .collect())
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> Result<i128> {
        if self.rows != self.cols {
            return Err(Error::DimensionMismatch { expected: self.rows, got: self.cols });
        }
        let n = self.rows;
        let mut a: Vec<i128> = self.data.iter().map(|&x| x as i128).collect();
        let mut sign = 1i128;
        let mut prev = 1i128;
        for k in 0..n {
            if a[k * n + k] == 0 {
                let pivot = (k + 1..n).find(|&i| a[i * n + k] != 0);
                match pivot {
                    Some(p) => {
                        for j in 0..n {
                            a.swap(k * n + j, p * n + j);
                        }
                        sign = -sign;
                    }
                    None => return Ok(0),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let num = a[i * n + j]
                        .checked_mul(a[k * n + k])
                        .and_then(|x| x.checked_sub(a[i * n + k].checked_mul(a[k * n + j])?))
                        .ok_or(Error::IntegerOverflow)?;
                    a[i * n + j] = num / prev;
                }
                a[i * n + k] = 0;
            }
            prev = a[k * n + k];
        }
        Ok(sign * a[(n - 1) * n + (n - 1)])
    }

    pub fn is_unimodular(&self) -> bool {
        matches!(self.det(), Ok(1) | Ok(-1))
    }

    /// Exact inverse of a unimodular matrix (adjugate route); the inverse of
    /// a `|det| = 1` integer matrix is again integer.
    pub fn inverse_unimodular(&self) -> Result<IntMatrix> {
        let d = self.det()?;
        if d != 1 && d != -1 {
            return Err(Error::Validation(format!("matrix is not unimodular (det = {d})")));
        }
        let n = self.rows;
        let mut inv = IntMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let minor = self.minor(j, i).det()?;
                let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
                inv.set(i, j, narrow(sign as i128 * minor * d)?);
            }
        }
        debug_assert_eq!(self.matmul(&inv).unwrap(), IntMatrix::identity(n));
        Ok(inv)
    }

    fn minor(&self, drop_row: usize, drop_col: usize) -> IntMatrix {
        let mut m = IntMatrix::zeros(self.rows - 1, self.cols - 1);
        let mut r = 0;
        for i in 0..self.rows {
            if i == drop_row {
                continue;
            }
            let mut c = 0;
            for j in 0..self.cols {
                if j == drop_col {
                    continue;
                }
                m.set(r, c, self.get(i, j));
                c += 1;
            }
            r += 1;
        }
        m
    }
}

fn narrow(x: i128) -> Result<i64> {
    i64::try_from(x).map_err(|_| Error::IntegerOverflow)
}

/// Tracks a product of elementary column operations `V` together with its
/// inverse `W = V^{-1}`.
struct ColumnOps {
    v: IntMatrix,
    w: IntMatrix,
}

impl ColumnOps {
    fn new(n: usize) -> Self {
        ColumnOps { v: IntMatrix::identity(n), w: IntMatrix::identity(n) }
    }

    fn swap(&mut self, a: usize, b: usize, target: &mut IntMatrix) {
        for i in 0..target.rows() {
            let (x, y) = (target.get(i, a), target.get(i, b));
            target.set(i, a, y);
            target.set(i, b, x);
        }
        for i in 0..self.v.rows() {
            let (x, y) = (self.v.get(i, a), self.v.get(i, b));
            self.v.set(i, a, y);
            self.v.set(i, b, x);
        }
        for j in 0..self.w.cols() {
            let (x, y) = (self.w.get(a, j), self.w.get(b, j));
            self.w.set(a, j, y);
            self.w.set(b, j, x);
        }
    }

    fn negate(&mut self, a: usize, target: &mut IntMatrix) {
        for i in 0..target.rows() {
            target.set(i, a, -target.get(i, a));
        }
        for i in 0..self.v.rows() {
            self.v.set(i, a, -self.v.get(i, a));
        }
        for j in 0..self.w.cols() {
            self.w.set(a, j, -self.w.get(a, j));
        }
    }

    /// col_b += q * col_a on the target and V; row_a -= q * row_b on W.
    fn addmul(&mut self, a: usize, b: usize, q: i64, target: &mut IntMatrix) -> Result<()> {
        for i in 0..target.rows() {
            let v = (target.get(i, b) as i128) + q as i128 * target.get(i, a) as i128;
            target.set(i, b, narrow(v)?);
        }
        for i in 0..self.v.rows() {
            let v = (self.v.get(i, b) as i128) + q as i128 * self.v.get(i, a) as i128;
            self.v.set(i, b, narrow(v)?);
        }
        for j in 0..self.w.cols() {
            let v = (self.w.get(a, j) as i128) - q as i128 * self.w.get(b, j) as i128;
            self.w.set(a, j, narrow(v)?);
        }
        Ok(())
    }
}

/// Basis of the saturated kernel lattice `{k : k . w = 0}` of a nonzero
/// integer vector, as rows. The basis is complete: every integer kernel
/// vector is an integer combination of the rows.
pub fn kernel_basis(w: &[i64]) -> Result<Vec<Vec<i64>>> {
    let n = w.len();
    if w.iter().all(|&x| x == 0) {
        return Err(Error::ZeroFrequency);
    }
    let mut target = IntMatrix::from_rows(vec![w.to_vec()])?;
    let mut ops = ColumnOps::new(n);

    // gcd elimination on the single row
    loop {
        let nonzero: Vec<usize> = (0..n).filter(|&j| target.get(0, j) != 0).collect();
        if nonzero.len() <= 1 {
            break;
        }
        let &p = nonzero.iter().min_by_key(|&&j| target.get(0, j).abs()).unwrap();
        let ap = target.get(0, p);
        let mut done = true;
        for &j in &nonzero {
            if j == p {
                continue;
            }
            let q = target.get(0, j) / ap;
            if q != 0 {
                ops.addmul(p, j, -q, &mut target)?;
            }
            if target.get(0, j) != 0 {
                done = false;
            }
        }
        if done {
            break;
        }
    }
    let p = (0..n).find(|&j| target.get(0, j) != 0).expect("nonzero vector has a pivot");
    if p != 0 {
        ops.swap(0, p, &mut target);
    }
    if target.get(0, 0) < 0 {
        ops.negate(0, &mut target);
    }

    // kernel = columns 1..n of V, sign-normalized rows
    let mut basis = Vec::with_capacity(n - 1);
    for j in 1..n {
        let mut row: Vec<i64> = (0..n).map(|i| ops.v.get(i, j)).collect();
        if let Some(first) = row.iter().find(|&&x| x != 0) {
            if *first < 0 {
                row.iter_mut().for_each(|x| *x = -*x);
            }
        }
        basis.push(row);
    }
    if basis.is_empty() {
        return Err(Error::NoResonance);
    }
    Ok(basis)
}

/// Complete a saturated `d x n` lattice basis to a unimodular `n x n` matrix
/// whose first `d` rows are the basis. Returns `(A, A^{-1})`.
pub fn unimodular_completion(basis: &IntMatrix) -> Result<(IntMatrix, IntMatrix)> {
    let d = basis.rows();
    let n = basis.cols();
    if d == 0 || d >= n {
        return Err(Error::Validation(format!("basis must have 1..n-1 rows, got {d} of {n}")));
    }
    let mut b = basis.clone();
    let mut ops = ColumnOps::new(n);

    for i in 0..d {
        // gcd-eliminate row i across columns i..n, pivot landing at column i
        loop {
            let nonzero: Vec<usize> = (i..n).filter(|&j| b.get(i, j) != 0).collect();
            if nonzero.is_empty() {
                return Err(Error::NotSaturated);
            }
            if nonzero.len() == 1 {
                let p = nonzero[0];
                if p != i {
                    ops.swap(i, p, &mut b);
                }
                break;
            }
            let &p = nonzero.iter().min_by_key(|&&j| b.get(i, j).abs()).unwrap();
            let ap = b.get(i, p);
            for &j in &nonzero {
                if j == p {
                    continue;
                }
                let q = b.get(i, j) / ap;
                if q != 0 {
                    ops.addmul(p, j, -q, &mut b)?;
                }
            }
        }
        if b.get(i, i) < 0 {
            ops.negate(i, &mut b);
        }
        if b.get(i, i) != 1 {
            // a saturated primitive basis reduces with unit pivots
            return Err(Error::NotSaturated);
        }
    }

    let mut a_rows = basis.to_rows();
    for i in d..n {
        a_rows.push(ops.w.row(i).to_vec());
    }
    let a = IntMatrix::from_rows(a_rows)?;
    let det = a.det()?;
    if det != 1 && det != -1 {
        return Err(Error::NotSaturated);
    }
    let a_inv = a.inverse_unimodular()?;
    Ok((a, a_inv))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_of_axis_vector() {
        let basis = kernel_basis(&[0, 1]).unwrap();
        assert_eq!(basis, vec![vec![1, 0]]);
    }

    #[test]
    fn kernel_of_ones() {
        let basis = kernel_basis(&[1, 1]).unwrap();
        assert_eq!(basis, vec![vec![1, -1]]);
    }

    #[test]
    fn kernel_membership_brute_force() {
        // every |k| <= 10 with k.(1,2,3) = 0 must be an integer combination
        let w = [1i64, 2, 3];
        let basis = kernel_basis(&w).unwrap();
        assert_eq!(basis.len(), 2);
        let b = IntMatrix::from_rows(basis.clone()).unwrap();
        for k1 in -10i64..=10 {
            for k2 in -10i64..=10 {
                for k3 in -10i64..=10 {
                    if k1 * w[0] + k2 * w[1] + k3 * w[2] != 0 {
                        continue;
                    }
                    // solve [k] = x * basis over the integers via the 2x2 system
                    // formed with two independent columns
                    let k = [k1, k2, k3];
                    assert!(
                        in_lattice(&b, &k),
                        "{k:?} not generated by {basis:?}"
                    );
                }
            }
        }
    }

    fn in_lattice(basis: &IntMatrix, k: &[i64]) -> bool {
        // brute-force small integer combinations
        for x in -40i64..=40 {
            for y in -40i64..=40 {
                let v: Vec<i64> = (0..3).map(|j| x * basis.get(0, j) + y * basis.get(1, j)).collect();
                if v == k {
                    return true;
                }
            }
        }
        false
    }

    #[test]
    fn completion_matches_worked_example() {
        let basis = IntMatrix::from_rows(vec![vec![1, -1]]).unwrap();
        let (a, a_inv) = unimodular_completion(&basis).unwrap();
        assert_eq!(a.to_rows(), vec![vec![1, -1], vec![0, 1]]);
        assert_eq!(a.det().unwrap().abs(), 1);
        assert_eq!(a.matmul(&a_inv).unwrap(), IntMatrix::identity(2));
    }

    #[test]
    fn completion_of_identity_block() {
        let basis = IntMatrix::from_rows(vec![vec![1, 0]]).unwrap();
        let (a, _) = unimodular_completion(&basis).unwrap();
        assert_eq!(a, IntMatrix::identity(2));
    }

    #[test]
    fn completion_for_three_dims() {
        let w = [1i64, 2, 3];
        let rows = kernel_basis(&w).unwrap();
        let basis = IntMatrix::from_rows(rows).unwrap();
        let (a, a_inv) = unimodular_completion(&basis).unwrap();
        assert_eq!(a.det().unwrap().abs(), 1);
        // first two rows annihilate w, third does not
        let aw = a.apply(&w).unwrap();
        assert_eq!(aw[0], 0);
        assert_eq!(aw[1], 0);
        assert_ne!(aw[2], 0);
        assert_eq!(a.matmul(&a_inv).unwrap(), IntMatrix::identity(3));
    }

    #[test]
    fn rejects_non_saturated_basis() {
        let basis = IntMatrix::from_rows(vec![vec![2, 0]]).unwrap();
        assert!(matches!(unimodular_completion(&basis), Err(Error::NotSaturated)));
    }

    #[test]
    fn det_and_inverse() {
        let m = IntMatrix::from_rows(vec![vec![2, 1], vec![1, 1]]).unwrap();
        assert_eq!(m.det().unwrap(), 1);
        let inv = m.inverse_unimodular().unwrap();
        assert_eq!(inv.to_rows(), vec![vec![1, -1], vec![-1, 2]]);
    }
}
