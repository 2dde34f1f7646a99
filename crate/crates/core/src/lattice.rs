//! Exact integer linear algebra.
//!
//! Everything here works over arbitrary-precision integers: Smith normal
//! forms with unimodular transforms, saturated kernel lattices in column
//! Hermite normal form, cokernel invariants and primitivity checks.

use std::fmt;
use std::ops::Mul;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::int_serde::JsonInt;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("shape mismatch: {op} of {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
    #[error("matrix is {0}x{1}, expected square")]
    NotSquare(usize, usize),
    #[error("row {row} has {found} entries, expected {expected}")]
    Ragged {
        row: usize,
        found: usize,
        expected: usize,
    },
}

/// Dense integer matrix, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = BigInt::one();
        }
        m
    }

    /// Builds a matrix from row-major data.
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn new(rows: usize, cols: usize, data: Vec<BigInt>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Self { rows, cols, data }
    }

    /// Convenience constructor from machine integers, row-major.
    pub fn from_i64(rows: usize, cols: usize, data: &[i64]) -> Self {
        Self::new(rows, cols, data.iter().map(|&x| BigInt::from(x)).collect())
    }

    pub fn diagonal(entries: &[i64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m.data[i * n + i] = BigInt::from(e);
        }
        m
    }

    /// Builds a matrix from a list of rows. An empty list gives a 0x0 matrix.
    pub fn from_rows(rows: Vec<Vec<BigInt>>) -> Result<Self, LatticeError> {
        let cols = rows.first().map_or(0, Vec::len);
        let n_rows = rows.len();
        let mut data = Vec::with_capacity(n_rows * cols);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != cols {
                return Err(LatticeError::Ragged {
                    row: i,
                    found: row.len(),
                    expected: cols,
                });
            }
            data.extend(row);
        }
        Ok(Self {
            rows: n_rows,
            cols,
            data,
        })
    }

    /// Builds a `len x columns.len()` matrix whose columns are the given vectors.
    pub fn from_columns(len: usize, columns: &[Vec<BigInt>]) -> Result<Self, LatticeError> {
        let mut m = Self::zeros(len, columns.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != len {
                return Err(LatticeError::Ragged {
                    row: j,
                    found: col.len(),
                    expected: len,
                });
            }
            for (i, x) in col.iter().enumerate() {
                m.data[i * m.cols + j] = x.clone();
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: BigInt) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j).clone();
            }
        }
        t
    }

    pub fn try_mul(&self, rhs: &IntMatrix) -> Result<IntMatrix, LatticeError> {
        if self.cols != rhs.rows {
            return Err(LatticeError::ShapeMismatch {
                op: "product",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = rhs.get(k, j);
                    if !b.is_zero() {
                        out.data[i * rhs.cols + j] += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[BigInt]) -> Result<Vec<BigInt>, LatticeError> {
        if v.len() != self.cols {
            return Err(LatticeError::ShapeMismatch {
                op: "apply",
                lhs: self.shape(),
                rhs: (v.len(), 1),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Horizontal concatenation `[self | rhs]`.
    pub fn hstack(&self, rhs: &IntMatrix) -> Result<IntMatrix, LatticeError> {
        if self.rows != rhs.rows {
            return Err(LatticeError::ShapeMismatch {
                op: "hstack",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let cols = self.cols + rhs.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(rhs.row(i));
        }
        Ok(Self {
            rows: self.rows,
            cols,
            data,
        })
    }

    /// The submatrix on the given row and column indices, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> IntMatrix {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            for &j in cols {
                data.push(self.get(i, j).clone());
            }
        }
        Self {
            rows: rows.len(),
            cols: cols.len(),
            data,
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> IntMatrix {
        let rows: Vec<usize> = (0..self.rows).collect();
        self.select(&rows, cols)
    }

    pub fn scale(&self, factor: &BigInt) -> IntMatrix {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    /// Exact determinant by fraction-free (Bareiss) elimination. The empty
    /// matrix has determinant 1.
    pub fn determinant(&self) -> Result<BigInt, LatticeError> {
        if !self.is_square() {
            return Err(LatticeError::NotSquare(self.rows, self.cols));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(BigInt::one());
        }
        let mut m = self.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if m.get(k, k).is_zero() {
                match (k + 1..n).find(|&i| !m.get(i, k).is_zero()) {
                    Some(i) => {
                        m.swap_rows(k, i);
                        sign = -sign;
                    }
                    None => return Ok(BigInt::zero()),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (m.get(i, j) * m.get(k, k) - m.get(i, k) * m.get(k, j)) / &prev;
                    m.set(i, j, v);
                }
            }
            prev = m.get(k, k).clone();
        }
        Ok(sign * m.get(n - 1, n - 1))
    }

    /// Rank over the rationals.
    pub fn rank(&self) -> usize {
        let mut m = self.clone();
        let mut rank = 0;
        for col in 0..m.cols {
            if rank == m.rows {
                break;
            }
            let Some(p) = (rank..m.rows).find(|&i| !m.get(i, col).is_zero()) else {
                continue;
            };
            m.swap_rows(rank, p);
            let pivot = m.get(rank, col).clone();
            for i in rank + 1..m.rows {
                let f = m.get(i, col).clone();
                if f.is_zero() {
                    continue;
                }
                for j in col..m.cols {
                    let v = m.get(i, j) * &pivot - &f * m.get(rank, j);
                    m.set(i, j, v);
                }
            }
            rank += 1;
        }
        rank
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row[target] += factor * row[src]
    fn add_row_multiple(&mut self, target: usize, src: usize, factor: &BigInt) {
        for j in 0..self.cols {
            let delta = factor * &self.data[src * self.cols + j];
            self.data[target * self.cols + j] += delta;
        }
    }

    /// col[target] += factor * col[src]
    fn add_col_multiple(&mut self, target: usize, src: usize, factor: &BigInt) {
        for i in 0..self.rows {
            let delta = factor * &self.data[i * self.cols + src];
            self.data[i * self.cols + target] += delta;
        }
    }

    fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            let idx = i * self.cols + j;
            self.data[idx] = -std::mem::take(&mut self.data[idx]);
        }
    }
}

impl Mul for &IntMatrix {
    type Output = IntMatrix;

    /// Panics on incompatible shapes; see [`IntMatrix::try_mul`].
    fn mul(self, rhs: &IntMatrix) -> IntMatrix {
        self.try_mul(rhs).expect("incompatible matrix shapes")
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IntMatrix{}x{}", self.rows, self.cols)?;
        f.debug_list()
            .entries((0..self.rows).map(|i| {
                self.row(i)
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(" ")
            }))
            .finish()
    }
}

impl Serialize for IntMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<JsonInt>> = (0..self.rows)
            .map(|i| self.row(i).iter().map(JsonInt::from).collect())
            .collect();
        rows.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for IntMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<JsonInt>> = Vec::deserialize(deserializer)?;
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().map(BigInt::from).collect())
            .collect();
        IntMatrix::from_rows(rows).map_err(D::Error::custom)
    }
}

/// `U * A * V = D` with `U`, `V` unimodular and `D` in Smith normal form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SmithForm {
    #[serde(rename = "U")]
    pub u: IntMatrix,
    #[serde(rename = "D")]
    pub d: IntMatrix,
    #[serde(rename = "V")]
    pub v: IntMatrix,
}

impl SmithForm {
    /// Nonzero diagonal entries of `D`, in order.
    pub fn divisors(&self) -> Vec<BigInt> {
        (0..self.d.rows().min(self.d.cols()))
            .map(|i| self.d.get(i, i).clone())
            .take_while(|x| !x.is_zero())
            .collect()
    }

    pub fn rank(&self) -> usize {
        self.divisors().len()
    }
}

/// Smith normal form with smallest-absolute-value pivoting.
pub fn smith_normal_form(a: &IntMatrix) -> SmithForm {
    let (rows, cols) = a.shape();
    let mut d = a.clone();
    let mut u = IntMatrix::identity(rows);
    let mut v = IntMatrix::identity(cols);

    for t in 0..rows.min(cols) {
        loop {
            let Some((pi, pj)) = smallest_nonzero(&d, t) else {
                return SmithForm { u, d, v };
            };
            d.swap_rows(t, pi);
            u.swap_rows(t, pi);
            d.swap_cols(t, pj);
            v.swap_cols(t, pj);

            let pivot = d.get(t, t).clone();
            let mut clean = true;
            for i in t + 1..rows {
                if d.get(i, t).is_zero() {
                    continue;
                }
                let q = -(d.get(i, t) / &pivot);
                d.add_row_multiple(i, t, &q);
                u.add_row_multiple(i, t, &q);
                clean &= d.get(i, t).is_zero();
            }
            for j in t + 1..cols {
                if d.get(t, j).is_zero() {
                    continue;
                }
                let q = -(d.get(t, j) / &pivot);
                d.add_col_multiple(j, t, &q);
                v.add_col_multiple(j, t, &q);
                clean &= d.get(t, j).is_zero();
            }
            if !clean {
                continue;
            }

            // The pivot must divide the whole trailing block; otherwise pull
            // the offending row in and reduce again with a smaller remainder.
            let offender = (t + 1..rows)
                .find(|&i| (t + 1..cols).any(|j| !d.get(i, j).is_multiple_of(&pivot)));
            match offender {
                Some(i) => {
                    let one = BigInt::one();
                    d.add_row_multiple(t, i, &one);
                    u.add_row_multiple(t, i, &one);
                }
                None => break,
            }
        }
        if d.get(t, t).is_negative() {
            d.negate_row(t);
            u.negate_row(t);
        }
    }
    SmithForm { u, d, v }
}

fn smallest_nonzero(m: &IntMatrix, t: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, BigInt)> = None;
    for i in t..m.rows() {
        for j in t..m.cols() {
            let x = m.get(i, j);
            if x.is_zero() {
                continue;
            }
            let a = x.abs();
            if best.as_ref().is_none_or(|(_, _, b)| a < *b) {
                best = Some((i, j, a));
            }
        }
    }
    best.map(|(i, j, _)| (i, j))
}

/// Column-style Hermite normal form of a full-column-rank matrix `m`.
///
/// Returns `m * G` for unimodular `G` such that column `j` has its first
/// nonzero entry (the pivot) in row `p_j`, with `p_0 < p_1 < ...`, pivots
/// positive, and entries left of each pivot reduced into `[0, pivot)`.
pub fn column_hermite_form(m: &IntMatrix) -> IntMatrix {
    // Row HNF of the transpose, then transpose back.
    let mut h = m.transpose();
    let (k, n) = h.shape();
    let mut pivot_row = 0;
    for col in 0..n {
        if pivot_row == k {
            break;
        }
        loop {
            let best = (pivot_row..k)
                .filter(|&i| !h.get(i, col).is_zero())
                .min_by(|&a, &b| h.get(a, col).abs().cmp(&h.get(b, col).abs()));
            let Some(p) = best else { break };
            h.swap_rows(pivot_row, p);
            let pivot = h.get(pivot_row, col).clone();
            let mut clean = true;
            for i in pivot_row + 1..k {
                if h.get(i, col).is_zero() {
                    continue;
                }
                let q = -h.get(i, col).div_floor(&pivot);
                h.add_row_multiple(i, pivot_row, &q);
                clean &= h.get(i, col).is_zero();
            }
            if clean {
                break;
            }
        }
        if h.get(pivot_row, col).is_zero() {
            continue;
        }
        if h.get(pivot_row, col).is_negative() {
            h.negate_row(pivot_row);
        }
        let pivot = h.get(pivot_row, col).clone();
        for i in 0..pivot_row {
            let q = -h.get(i, col).div_floor(&pivot);
            if !q.is_zero() {
                h.add_row_multiple(i, pivot_row, &q);
            }
        }
        pivot_row += 1;
    }
    h.transpose()
}

/// Basis of `{ x in Z^cols : A x = 0 }` as the columns of the returned
/// matrix, in column Hermite normal form. The basis is saturated, so it
/// always extends to a basis of `Z^cols`.
pub fn kernel_lattice(a: &IntMatrix) -> IntMatrix {
    let snf = smith_normal_form(a);
    let rank = snf.rank();
    let free: Vec<usize> = (rank..a.cols()).collect();
    column_hermite_form(&snf.v.select_columns(&free))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "order")]
pub enum Cardinality {
    Finite(#[serde(serialize_with = "crate::int_serde::bigint::serialize")] BigInt),
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CokernelInvariants {
    #[serde(serialize_with = "crate::int_serde::bigint_vec::serialize")]
    pub divisors: Vec<BigInt>,
    pub cardinality: Cardinality,
}

/// Elementary divisors and order of `Z^rows / A Z^cols`.
pub fn cokernel_invariants(a: &IntMatrix) -> CokernelInvariants {
    let divisors = smith_normal_form(a).divisors();
    let cardinality = if divisors.len() == a.rows() {
        Cardinality::Finite(divisors.iter().product())
    } else {
        Cardinality::Infinite
    };
    CokernelInvariants {
        divisors,
        cardinality,
    }
}

/// True iff the columns of `v` are independent and span a saturated
/// sublattice (all elementary divisors equal to one).
pub fn is_primitive_basis(v: &IntMatrix) -> bool {
    let divisors = smith_normal_form(v).divisors();
    divisors.len() == v.cols() && divisors.iter().all(One::is_one)
}
