//! Truncated spectral triples.
//!
//! Operators are assembled on finite sets of Fourier (or Hermite) modes and
//! stored sparsely. All of the operators built here are direct sums of
//! small blocks, so spectra are computed one connected component of the
//! sparsity graph at a time with dense solvers.
//!
//! Conventions:
//! - On the mode `e_{m,n}` of `L^2(T^2)`, `δ₁` acts by `2πm` and `δ₂` by `n`;
//!   the Dolbeault blocks are `δ₁ ± iδ₂`.
//! - The Dirac operator of `T^n` has symbol `Σ 2π l_j γ_j` with `γ_j`
//!   Jordan–Wigner Clifford generators.
//! - The covariant pair is `U e_{m,n} = e_{m+1,n}` and
//!   `V e_{m,n} = e^{2πiθm} e_{m,n+1}`, so that `VU = e^{2πiθ} UV`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_integer::Integer;
use serde::Serialize;
use thiserror::Error;

const TAU: f64 = std::f64::consts::TAU;

/// Largest connected block handed to a dense solver.
const MAX_DENSE_BLOCK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("cutoff must be at least 1")]
    InvalidCutoff,
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("operator has no modes")]
    EmptyOperator,
    #[error("operator is not graded or rectangular; no index is defined")]
    NotGraded,
    #[error("operators act on different mode spaces")]
    ShapeMismatch,
    #[error("invalid window [{lo}, {hi}]: need 0 < lo < hi, lo >= hi/4, hi <= {limit}")]
    InvalidWindow { lo: f64, hi: f64, limit: f64 },
    #[error("fewer than two distinct singular values in [{lo}, {hi}]")]
    EmptyWindow { lo: f64, hi: f64 },
    #[error("no product triple for d = {d}, n = {n}")]
    UnsupportedProduct { d: usize, n: usize },
    #[error("p = {p} and q = {q} must be coprime with q >= 1")]
    InvalidModule { p: i64, q: i64 },
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
}

/// Basis label: an internal (spinor / doubling / copy) component and the
/// integer mode coordinates.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Mode {
    pub component: usize,
    pub coords: Vec<i64>,
}

impl Mode {
    pub fn new(component: usize, coords: Vec<i64>) -> Self {
        Self { component, coords }
    }

    fn is_interior(&self, cutoff: usize) -> bool {
        let bound = cutoff as i64 - 1;
        self.coords.iter().all(|x| x.abs() <= bound)
    }
}

/// Sparse complex matrix; entries sorted by `(row, col)`, no duplicates and
/// no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl SparseMatrix {
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, Complex64)>,
    ) -> Self {
        let mut map: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
        for (i, j, v) in triplets {
            assert!(i < rows && j < cols, "entry ({i}, {j}) outside {rows}x{cols}");
            *map.entry((i, j)).or_default() += v;
        }
        let entries = map
            .into_iter()
            .filter(|(_, v)| *v != Complex64::new(0.0, 0.0))
            .map(|((i, j), v)| (i, j, v))
            .collect();
        Self { rows, cols, entries }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            entries: (0..n).map(|i| (i, i, Complex64::new(1.0, 0.0))).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries
            .binary_search_by(|&(r, c, _)| (r, c).cmp(&(i, j)))
            .map(|k| self.entries[k].2)
            .unwrap_or_default()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(
            self.cols,
            self.rows,
            self.entries.iter().map(|&(i, j, v)| (j, i, v.conj())),
        )
    }

    pub fn mul(&self, rhs: &SparseMatrix) -> Result<SparseMatrix, SpectralError> {
        if self.cols != rhs.rows {
            return Err(SpectralError::ShapeMismatch);
        }
        let mut by_row: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); rhs.rows];
        for &(k, j, v) in &rhs.entries {
            by_row[k].push((j, v));
        }
        let mut acc: HashMap<(usize, usize), Complex64> = HashMap::new();
        for &(i, k, a) in &self.entries {
            for &(j, b) in &by_row[k] {
                *acc.entry((i, j)).or_default() += a * b;
            }
        }
        Ok(Self::from_triplets(self.rows, rhs.cols, acc.into_iter().map(|((i, j), v)| (i, j, v))))
    }

    pub fn sub(&self, rhs: &SparseMatrix) -> Result<SparseMatrix, SpectralError> {
        if (self.rows, self.cols) != (rhs.rows, rhs.cols) {
            return Err(SpectralError::ShapeMismatch);
        }
        Ok(Self::from_triplets(
            self.rows,
            self.cols,
            self.entries
                .iter()
                .copied()
                .chain(rhs.entries.iter().map(|&(i, j, v)| (i, j, -v))),
        ))
    }

    /// Submatrix on the given (increasing) row and column indices.
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> SparseMatrix {
        let row_pos: HashMap<usize, usize> = rows.iter().enumerate().map(|(a, &b)| (b, a)).collect();
        let col_pos: HashMap<usize, usize> = cols.iter().enumerate().map(|(a, &b)| (b, a)).collect();
        Self::from_triplets(
            rows.len(),
            cols.len(),
            self.entries.iter().filter_map(|&(i, j, v)| {
                Some((*row_pos.get(&i)?, *col_pos.get(&j)?, v))
            }),
        )
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] = v;
        }
        m
    }

    pub fn is_hermitian(&self) -> bool {
        self.rows == self.cols && self.entries.iter().all(|&(i, j, v)| self.get(j, i) == v.conj())
    }

    /// Connected components of the bipartite row/column graph. Rows and
    /// columns with no entries are not reported.
    fn components(&self) -> Vec<Block> {
        let mut uf = UnionFind::new(self.rows + self.cols);
        for &(i, j, _) in &self.entries {
            uf.union(i, self.rows + j);
        }
        let mut blocks: BTreeMap<usize, Block> = BTreeMap::new();
        for (e, &(i, _, _)) in self.entries.iter().enumerate() {
            blocks.entry(uf.find(i)).or_default().entries.push(e);
        }
        for block in blocks.values_mut() {
            for &e in &block.entries {
                let (i, j, _) = self.entries[e];
                block.rows.push(i);
                block.cols.push(j);
            }
            block.rows.sort_unstable();
            block.rows.dedup();
            block.cols.sort_unstable();
            block.cols.dedup();
        }
        blocks.into_values().collect()
    }

    fn dense_block(&self, block: &Block) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(block.rows.len(), block.cols.len());
        for &e in &block.entries {
            let (i, j, v) = self.entries[e];
            let r = block.rows.binary_search(&i).expect("row in block");
            let c = block.cols.binary_search(&j).expect("col in block");
            m[(r, c)] = v;
        }
        m
    }

    /// All `min(rows, cols)` singular values, ascending.
    pub fn singular_values(&self) -> Result<Vec<f64>, SpectralError> {
        let mut values = Vec::with_capacity(self.rows.min(self.cols));
        for block in self.components() {
            if block.entries.len() == 1 {
                values.push(self.entries[block.entries[0]].2.norm());
                continue;
            }
            check_block_size(&block)?;
            let dense = self.dense_block(&block);
            values.extend(dense_singular_values(dense)?);
        }
        values.resize(self.rows.min(self.cols), 0.0);
        values.sort_by(f64::total_cmp);
        Ok(values)
    }

    /// Largest singular value (operator 2-norm).
    pub fn norm(&self) -> Result<f64, SpectralError> {
        Ok(self.singular_values()?.last().copied().unwrap_or(0.0))
    }

    /// Eigenvalues of a Hermitian matrix, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>, SpectralError> {
        if self.rows != self.cols {
            return Err(SpectralError::ShapeMismatch);
        }
        let n = self.rows;
        let mut uf = UnionFind::new(n);
        for &(i, j, _) in &self.entries {
            uf.union(i, j);
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            groups.entry(uf.find(i)).or_default().push(i);
        }
        let mut values = Vec::with_capacity(n);
        for idx in groups.into_values() {
            if idx.len() == 1 {
                values.push(self.get(idx[0], idx[0]).re);
                continue;
            }
            if idx.len() > MAX_DENSE_BLOCK {
                return Err(SpectralError::NumericalFailure(format!(
                    "connected block of size {} exceeds dense limit",
                    idx.len()
                )));
            }
            let dense = self.restrict(&idx, &idx).to_dense();
            let eig = nalgebra::SymmetricEigen::try_new(dense, f64::EPSILON, 100 * idx.len())
                .ok_or_else(|| SpectralError::NumericalFailure("eigensolve did not converge".into()))?;
            values.extend(eig.eigenvalues.iter().copied());
        }
        values.sort_by(f64::total_cmp);
        Ok(values)
    }

    /// Orthonormal basis of the numerical kernel: right singular vectors
    /// with singular value below `threshold`. Each vector is returned as
    /// `(column, coefficient)` pairs.
    fn kernel(&self, threshold: f64) -> Result<Vec<Vec<(usize, Complex64)>>, SpectralError> {
        let mut basis = Vec::new();
        let mut touched = vec![false; self.cols];
        for block in self.components() {
            for &j in &block.cols {
                touched[j] = true;
            }
            check_block_size(&block)?;
            let dense = self.dense_block(&block);
            let (r, c) = dense.shape();
            // Pad with zero rows so the SVD returns a full set of right
            // singular vectors; padding does not change the kernel.
            let padded = if r < c {
                let mut p = DMatrix::zeros(c, c);
                p.view_mut((0, 0), (r, c)).copy_from(&dense);
                p
            } else {
                dense
            };
            let svd = padded
                .try_svd(false, true, f64::EPSILON, 0)
                .ok_or_else(|| SpectralError::NumericalFailure("SVD did not converge".into()))?;
            let v_t = svd.v_t.expect("requested V^T");
            for (k, &s) in svd.singular_values.iter().enumerate() {
                if s < threshold {
                    basis.push(
                        block
                            .cols
                            .iter()
                            .enumerate()
                            .map(|(pos, &j)| (j, v_t[(k, pos)].conj()))
                            .collect(),
                    );
                }
            }
        }
        for (j, seen) in touched.into_iter().enumerate() {
            if !seen {
                basis.push(vec![(j, Complex64::new(1.0, 0.0))]);
            }
        }
        Ok(basis)
    }
}

#[derive(Debug, Default)]
struct Block {
    rows: Vec<usize>,
    cols: Vec<usize>,
    entries: Vec<usize>,
}

fn check_block_size(block: &Block) -> Result<(), SpectralError> {
    let size = block.rows.len().max(block.cols.len());
    if size > MAX_DENSE_BLOCK {
        Err(SpectralError::NumericalFailure(format!(
            "connected block of size {size} exceeds dense limit"
        )))
    } else {
        Ok(())
    }
}

fn dense_singular_values(m: DMatrix<Complex64>) -> Result<Vec<f64>, SpectralError> {
    let svd = m
        .try_svd(false, false, f64::EPSILON, 0)
        .ok_or_else(|| SpectralError::NumericalFailure("SVD did not converge".into()))?;
    Ok(svd.singular_values.iter().copied().collect())
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorForm {
    /// Square Hermitian operator, optionally graded.
    SelfAdjoint,
    /// Rectangular map from domain modes (columns) to codomain modes (rows):
    /// the off-diagonal part of a graded odd operator.
    Rectangular,
    /// Square operator representing an algebra element (not Hermitian).
    Algebra,
}

/// A truncated operator together with its mode labels and metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    name: String,
    params: BTreeMap<String, f64>,
    cutoff: usize,
    form: OperatorForm,
    row_modes: Vec<Mode>,
    col_modes: Vec<Mode>,
    grading: Option<Vec<i8>>,
    matrix: SparseMatrix,
}

fn check_labels(modes: &[Mode], cutoff: usize) -> Result<(), SpectralError> {
    let mut sorted: Vec<&Mode> = modes.iter().collect();
    sorted.sort();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(SpectralError::InvalidOperator("repeated mode label".into()));
    }
    if modes
        .iter()
        .any(|m| m.coords.iter().any(|x| x.unsigned_abs() > cutoff as u64))
    {
        return Err(SpectralError::InvalidOperator("mode label beyond cutoff".into()));
    }
    Ok(())
}

impl TruncatedOperator {
    /// A Hermitian operator on `modes`; if `grading` is given the operator
    /// must be odd for it.
    pub fn self_adjoint(
        name: impl Into<String>,
        cutoff: usize,
        modes: Vec<Mode>,
        grading: Option<Vec<i8>>,
        matrix: SparseMatrix,
    ) -> Result<Self, SpectralError> {
        check_labels(&modes, cutoff)?;
        if matrix.rows() != modes.len() || matrix.cols() != modes.len() {
            return Err(SpectralError::ShapeMismatch);
        }
        if !matrix.is_hermitian() {
            return Err(SpectralError::InvalidOperator("matrix is not Hermitian".into()));
        }
        if let Some(g) = &grading {
            if g.len() != modes.len() || g.iter().any(|&s| s != 1 && s != -1) {
                return Err(SpectralError::InvalidOperator("grading must be ±1 per mode".into()));
            }
            if matrix.entries().iter().any(|&(i, j, _)| g[i] == g[j]) {
                return Err(SpectralError::InvalidOperator("operator is not odd".into()));
            }
        }
        Ok(Self {
            name: name.into(),
            params: BTreeMap::new(),
            cutoff,
            form: OperatorForm::SelfAdjoint,
            col_modes: modes.clone(),
            row_modes: modes,
            grading,
            matrix,
        })
    }

    /// A map from `domain` modes to `codomain` modes.
    pub fn rectangular(
        name: impl Into<String>,
        cutoff: usize,
        codomain: Vec<Mode>,
        domain: Vec<Mode>,
        matrix: SparseMatrix,
    ) -> Result<Self, SpectralError> {
        check_labels(&codomain, cutoff)?;
        check_labels(&domain, cutoff)?;
        if matrix.rows() != codomain.len() || matrix.cols() != domain.len() {
            return Err(SpectralError::ShapeMismatch);
        }
        Ok(Self {
            name: name.into(),
            params: BTreeMap::new(),
            cutoff,
            form: OperatorForm::Rectangular,
            row_modes: codomain,
            col_modes: domain,
            grading: None,
            matrix,
        })
    }

    fn algebra(name: &str, cutoff: usize, modes: Vec<Mode>, matrix: SparseMatrix) -> Self {
        Self {
            name: name.into(),
            params: BTreeMap::new(),
            cutoff,
            form: OperatorForm::Algebra,
            col_modes: modes.clone(),
            row_modes: modes,
            grading: None,
            matrix,
        }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn form(&self) -> OperatorForm {
        self.form
    }

    /// Labels of the basis vectors of a square operator, or of the
    /// codomain of a rectangular one.
    pub fn mode_labels(&self) -> &[Mode] {
        &self.row_modes
    }

    pub fn domain_labels(&self) -> &[Mode] {
        &self.col_modes
    }

    pub fn grading(&self) -> Option<&[i8]> {
        self.grading.as_deref()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    /// True when no entry connects two modes of equal grading.
    pub fn is_odd(&self) -> bool {
        match &self.grading {
            Some(g) => self.matrix.entries().iter().all(|&(i, j, _)| g[i] != g[j]),
            None => false,
        }
    }

    /// The part `H⁺ -> H⁻` of a graded self-adjoint operator, or the
    /// operator itself if it is already rectangular.
    pub fn index_block(&self) -> Result<TruncatedOperator, SpectralError> {
        match (self.form, &self.grading) {
            (OperatorForm::Rectangular, _) => Ok(self.clone()),
            (OperatorForm::SelfAdjoint, Some(g)) => {
                let plus: Vec<usize> = (0..g.len()).filter(|&i| g[i] == 1).collect();
                let minus: Vec<usize> = (0..g.len()).filter(|&i| g[i] == -1).collect();
                let block = self.matrix.restrict(&minus, &plus);
                let mut op = TruncatedOperator::rectangular(
                    format!("{}+", self.name),
                    self.cutoff,
                    minus.iter().map(|&i| self.row_modes[i].clone()).collect(),
                    plus.iter().map(|&i| self.row_modes[i].clone()).collect(),
                    block,
                )?;
                op.params = self.params.clone();
                Ok(op)
            }
            _ => Err(SpectralError::NotGraded),
        }
    }

    pub fn singular_values(&self) -> Result<Vec<f64>, SpectralError> {
        self.matrix.singular_values()
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>, SpectralError> {
        if self.form != OperatorForm::SelfAdjoint {
            return Err(SpectralError::InvalidOperator("eigenvalues need a self-adjoint operator".into()));
        }
        self.matrix.hermitian_eigenvalues()
    }
}

/// Family of translation-invariant operators: one small symbol matrix per
/// mode, acting on an internal space of dimension `size`.
struct SymbolFamily {
    modes: Vec<Vec<i64>>,
    symbols: Vec<DMatrix<Complex64>>,
    size: usize,
    grading: Option<Vec<i8>>,
}

fn lattice_modes(dim: usize, cutoff: usize) -> Vec<Vec<i64>> {
    let n = cutoff as i64;
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (-n..=n).map(move |x| {
                    let mut v = prefix.clone();
                    v.push(x);
                    v
                })
            })
            .collect();
    }
    out
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Copies the upper triangle onto the lower one so the result is exactly
/// Hermitian.
fn hermitize(mut m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = c(m[(i, i)].re, 0.0);
        for j in i + 1..n {
            m[(j, i)] = m[(i, j)].conj();
        }
    }
    m
}

impl SymbolFamily {
    /// `δ` on `ℓ²(Z)`: multiplication by `k`.
    fn number(cutoff: usize) -> Self {
        let modes = lattice_modes(1, cutoff);
        let symbols = modes
            .iter()
            .map(|k| DMatrix::from_element(1, 1, c(k[0] as f64, 0.0)))
            .collect();
        Self {
            modes,
            symbols,
            size: 1,
            grading: None,
        }
    }

    /// `[[0, δ₁ - iδ₂], [δ₁ + iδ₂, 0]]` on `L²(T²) ⊕ L²(T²)`.
    fn dolbeault(cutoff: usize) -> Self {
        let modes = lattice_modes(2, cutoff);
        let symbols = modes
            .iter()
            .map(|mn| {
                let (m, n) = (mn[0] as f64, mn[1] as f64);
                let mut s = DMatrix::zeros(2, 2);
                s[(0, 1)] = c(TAU * m, -n);
                s[(1, 0)] = c(TAU * m, n);
                s
            })
            .collect();
        Self {
            modes,
            symbols,
            size: 2,
            grading: Some(vec![1, -1]),
        }
    }

    /// Dirac operator of `T^n`; graded by chirality when `n` is even.
    fn torus_dirac(n: usize, cutoff: usize) -> Self {
        let (gammas, chirality) = clifford_generators(n);
        let size = chirality.nrows();
        let modes = lattice_modes(n, cutoff);
        let symbols = modes
            .iter()
            .map(|l| {
                let mut s = DMatrix::zeros(size, size);
                for (g, &x) in gammas.iter().zip(l) {
                    s += g * c(TAU * x as f64, 0.0);
                }
                hermitize(s)
            })
            .collect();
        let grading = n.is_multiple_of(2).then(|| {
            (0..size)
                .map(|i| if chirality[(i, i)].re > 0.0 { 1 } else { -1 })
                .collect()
        });
        Self {
            modes,
            symbols,
            size,
            grading,
        }
    }

    fn grading_matrix(&self) -> Option<DMatrix<Complex64>> {
        self.grading.as_ref().map(|g| {
            DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                g.len(),
                g.iter().map(|&s| c(s as f64, 0.0)),
            ))
        })
    }

    /// External product of two families with the sign conventions of
    /// graded tensor products; two ungraded factors are doubled into
    /// `[[0, a⊗1 + i 1⊗b], [a⊗1 - i 1⊗b, 0]]`.
    fn product(a: &SymbolFamily, b: &SymbolFamily) -> SymbolFamily {
        let ia = DMatrix::<Complex64>::identity(a.size, a.size);
        let ib = DMatrix::<Complex64>::identity(b.size, b.size);
        let ga = a.grading_matrix();
        let gb = b.grading_matrix();
        let mut modes = Vec::with_capacity(a.modes.len() * b.modes.len());
        let mut symbols = Vec::with_capacity(modes.capacity());
        let doubled = ga.is_none() && gb.is_none();
        let size = if doubled { 2 * a.size * b.size } else { a.size * b.size };
        for (ma, sa) in a.modes.iter().zip(&a.symbols) {
            for (mb, sb) in b.modes.iter().zip(&b.symbols) {
                let mut mode = ma.clone();
                mode.extend_from_slice(mb);
                modes.push(mode);
                let symbol = match (&ga, &gb) {
                    (Some(ga), _) => sa.kronecker(&ib) + ga.kronecker(sb),
                    (None, Some(gb)) => sa.kronecker(gb) + ia.kronecker(sb),
                    (None, None) => {
                        let k = a.size * b.size;
                        let left = sa.kronecker(&ib);
                        let right = ia.kronecker(sb) * c(0.0, 1.0);
                        let mut s = DMatrix::zeros(2 * k, 2 * k);
                        s.view_mut((0, k), (k, k)).copy_from(&(&left + &right));
                        s.view_mut((k, 0), (k, k)).copy_from(&(&left - &right));
                        s
                    }
                };
                symbols.push(hermitize(symbol));
            }
        }
        let grading = match (&a.grading, &b.grading) {
            (Some(x), Some(y)) => Some(
                x.iter()
                    .flat_map(|&s| y.iter().map(move |&t| s * t))
                    .collect(),
            ),
            (None, None) => Some(
                std::iter::repeat_n(1, size / 2)
                    .chain(std::iter::repeat_n(-1, size / 2))
                    .collect(),
            ),
            _ => None,
        };
        SymbolFamily {
            modes,
            symbols,
            size,
            grading,
        }
    }

    /// Assembles the direct sum over modes; basis index is
    /// `component * modes + mode`, so labels are in lexicographic order.
    fn assemble(&self, name: &str, cutoff: usize) -> Result<TruncatedOperator, SpectralError> {
        let count = self.modes.len();
        let mut labels = Vec::with_capacity(count * self.size);
        for comp in 0..self.size {
            for m in &self.modes {
                labels.push(Mode::new(comp, m.clone()));
            }
        }
        let mut triplets = Vec::new();
        for (idx, s) in self.symbols.iter().enumerate() {
            for i in 0..self.size {
                for j in 0..self.size {
                    let v = s[(i, j)];
                    if v != c(0.0, 0.0) {
                        triplets.push((i * count + idx, j * count + idx, v));
                    }
                }
            }
        }
        let matrix = SparseMatrix::from_triplets(labels.len(), labels.len(), triplets);
        let grading = self.grading.as_ref().map(|g| {
            g.iter()
                .flat_map(|&s| std::iter::repeat_n(s, count))
                .collect()
        });
        TruncatedOperator::self_adjoint(name, cutoff, labels, grading, matrix)
    }
}

/// Hermitian generators `γ_1..γ_n` of the complex Clifford algebra and the
/// chirality operator on `(C²)^{⊗⌊n/2⌋}`. For odd `n` the last generator is
/// the chirality of the even part.
fn clifford_generators(n: usize) -> (Vec<DMatrix<Complex64>>, DMatrix<Complex64>) {
    let x = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
    let y = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]);
    let z = DMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
    let i2 = DMatrix::<Complex64>::identity(2, 2);
    let pairs = n / 2;
    let tensor = |factors: Vec<&DMatrix<Complex64>>| {
        factors
            .into_iter()
            .fold(DMatrix::<Complex64>::identity(1, 1), |acc, f| acc.kronecker(f))
    };
    let mut gammas = Vec::with_capacity(n);
    for j in 0..pairs {
        for p in [&x, &y] {
            let factors: Vec<&DMatrix<Complex64>> = (0..pairs)
                .map(|k| match k.cmp(&j) {
                    std::cmp::Ordering::Less => &z,
                    std::cmp::Ordering::Equal => p,
                    std::cmp::Ordering::Greater => &i2,
                })
                .collect();
            gammas.push(tensor(factors));
        }
    }
    let chirality = tensor((0..pairs).map(|_| &z).collect());
    if n % 2 == 1 {
        gammas.push(chirality.clone());
    }
    (gammas, chirality)
}

/// The (deformed) Dolbeault operator on the modes `|m|, |n| <= cutoff`.
/// It does not depend on `θ`; only the representation does.
pub fn build_dolbeault_torus(cutoff: usize) -> Result<TruncatedOperator, SpectralError> {
    if cutoff == 0 {
        return Err(SpectralError::InvalidCutoff);
    }
    SymbolFamily::dolbeault(cutoff).assemble("dolbeault", cutoff)
}

/// Number operator on `ℓ²(Z)` truncated to `|k| <= cutoff`.
pub fn number_operator(cutoff: usize) -> Result<TruncatedOperator, SpectralError> {
    if cutoff == 0 {
        return Err(SpectralError::InvalidCutoff);
    }
    SymbolFamily::number(cutoff).assemble("number", cutoff)
}

/// Dirac operator of `T^n` (Fourier modes `|l_j| <= cutoff`).
pub fn torus_dirac(n: usize, cutoff: usize) -> Result<TruncatedOperator, SpectralError> {
    if cutoff == 0 {
        return Err(SpectralError::InvalidCutoff);
    }
    SymbolFamily::torus_dirac(n, cutoff)
        .assemble("torus_dirac", cutoff)
        .map(|op| op.with_param("n", n as f64))
}

/// Unitaries `U` (multiplication by `e^{2πix}`) and `V` (the rotation
/// generator) of the covariant representation of `A_θ`, acting diagonally on
/// both copies of the Dolbeault Hilbert space and truncated to its modes.
pub fn representation_generators(
    theta: f64,
    cutoff: usize,
) -> Result<(TruncatedOperator, TruncatedOperator), SpectralError> {
    if cutoff == 0 {
        return Err(SpectralError::InvalidCutoff);
    }
    let modes = lattice_modes(2, cutoff);
    let count = modes.len();
    let index: HashMap<&[i64], usize> = modes.iter().enumerate().map(|(i, m)| (m.as_slice(), i)).collect();
    let labels: Vec<Mode> = (0..2)
        .flat_map(|comp| modes.iter().map(move |m| Mode::new(comp, m.clone())))
        .collect();
    let mut u = Vec::new();
    let mut v = Vec::new();
    for comp in 0..2 {
        for (src, mn) in modes.iter().enumerate() {
            let (m, n) = (mn[0], mn[1]);
            if let Some(&dst) = index.get([m + 1, n].as_slice()) {
                u.push((comp * count + dst, comp * count + src, c(1.0, 0.0)));
            }
            if let Some(&dst) = index.get([m, n + 1].as_slice()) {
                let phase = Complex64::from_polar(1.0, TAU * theta * m as f64);
                v.push((comp * count + dst, comp * count + src, phase));
            }
        }
    }
    let size = labels.len();
    let u = TruncatedOperator::algebra("U", cutoff, labels.clone(), SparseMatrix::from_triplets(size, size, u))
        .with_param("theta", theta);
    let v = TruncatedOperator::algebra("V", cutoff, labels, SparseMatrix::from_triplets(size, size, v))
        .with_param("theta", theta);
    Ok((u, v))
}

/// Spectral data of the rotation algebra `A_θ`: the Dolbeault operator and
/// the covariant pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrrationalRotation {
    pub theta: f64,
    pub cutoff: usize,
}

impl IrrationalRotation {
    pub fn dirac(&self) -> Result<TruncatedOperator, SpectralError> {
        build_dolbeault_torus(self.cutoff)
    }

    pub fn generators(&self) -> Result<(TruncatedOperator, TruncatedOperator), SpectralError> {
        representation_generators(self.theta, self.cutoff)
    }
}

/// `(r, s)` with `p s - q r = 1` and `0 <= s < q`.
pub fn complete_to_sl2(p: i64, q: i64) -> Result<(i64, i64), SpectralError> {
    if q < 1 || p.gcd(&q) != 1 {
        return Err(SpectralError::InvalidModule { p, q });
    }
    let s = p.extended_gcd(&q).x.rem_euclid(q);
    let r = (p * s - 1) / q;
    Ok((r, s))
}

/// `θ' = (pθ + q) / (rθ + s)`.
pub fn rotated_angle(p: i64, q: i64, theta: f64) -> Result<f64, SpectralError> {
    let (r, s) = complete_to_sl2(p, q)?;
    Ok((p as f64 * theta + q as f64) / (r as f64 * theta + s as f64))
}

/// Index model for the Dolbeault operator twisted by the module `E_{p,q}`:
/// `q` copies of the lowering operator `a e_k = √k e_{k-1}` from Hermite
/// modes `0..=cutoff` to `0..cutoff`.
pub fn heisenberg_model(
    p: i64,
    q: i64,
    cutoff: usize,
    theta: f64,
) -> Result<TruncatedOperator, SpectralError> {
    if cutoff == 0 {
        return Err(SpectralError::InvalidCutoff);
    }
    let (r, s) = complete_to_sl2(p, q)?;
    let copies = q as usize;
    let n = cutoff as i64;
    let domain: Vec<Mode> = (0..copies)
        .flat_map(|j| (0..=n).map(move |k| Mode::new(j, vec![k])))
        .collect();
    let codomain: Vec<Mode> = (0..copies)
        .flat_map(|j| (0..n).map(move |k| Mode::new(j, vec![k])))
        .collect();
    let per_dom = cutoff + 1;
    let per_cod = cutoff;
    let triplets = (0..copies).flat_map(|j| {
        (1..=cutoff).map(move |k| (j * per_cod + k - 1, j * per_dom + k, c((k as f64).sqrt(), 0.0)))
    });
    let matrix = SparseMatrix::from_triplets(codomain.len(), domain.len(), triplets);
    let theta_prime = (p as f64 * theta + q as f64) / (r as f64 * theta + s as f64);
    Ok(TruncatedOperator::rectangular("heisenberg", cutoff, codomain, domain, matrix)?
        .with_param("p", p as f64)
        .with_param("q", q as f64)
        .with_param("r", r as f64)
        .with_param("s", s as f64)
        .with_param("theta", theta)
        .with_param("theta_prime", theta_prime))
}

/// Dirac operator of `Z^d` acting by translations on `X = T^n`, as the
/// external product of the torus Dirac operator of `X` with the Dirac
/// operator of the group (`δ` on `ℓ²(Z)` for `d = 1`, the Dolbeault operator
/// for `d = 2`).
///
/// - `d = 1`, `n` odd: `[[0, D_X⊗1 + i(1⊗δ)], [D_X⊗1 - i(1⊗δ), 0]]`.
/// - `d = 1`, `n` even: `D_X⊗1 + γ_X⊗δ`, ungraded.
/// - `d = 2`, `n` odd: `[[0, ∂̄⊗1 + i(1⊗D_X)], [∂̄⊗1 - i(1⊗D_X), 0]]`.
/// - `d = 2`, `n` even: `∂̄⊗1 + γ⊗D_X`, graded by `γ⊗γ_X`.
pub fn build_schrodinger_product(
    n: usize,
    d: usize,
    cutoff: usize,
) -> Result<TruncatedOperator, SpectralError> {
    if cutoff == 0 {
        return Err(SpectralError::InvalidCutoff);
    }
    let fibre = SymbolFamily::torus_dirac(n, cutoff);
    let family = match d {
        1 => SymbolFamily::product(&fibre, &SymbolFamily::number(cutoff)),
        2 => {
            let mut dolbeault = SymbolFamily::dolbeault(cutoff);
            if n % 2 == 1 {
                // odd fibre: the displayed formula treats ∂̄ as a plain
                // self-adjoint operator and doubles
                dolbeault.grading = None;
            }
            SymbolFamily::product(&dolbeault, &fibre)
        }
        _ => return Err(SpectralError::UnsupportedProduct { d, n }),
    };
    Ok(family
        .assemble("schrodinger", cutoff)?
        .with_param("n", n as f64)
        .with_param("d", d as f64))
}

/// Fredholm index of the graded part: `dim ker - dim coker`, counting
/// singular values below `tol * σ_max` as zero.
pub fn numerical_index(op: &TruncatedOperator, tol: f64) -> Result<i64, SpectralError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(SpectralError::InvalidTolerance(tol));
    }
    let block = op.index_block()?;
    let m = block.matrix();
    if m.rows() == 0 && m.cols() == 0 {
        return Err(SpectralError::EmptyOperator);
    }
    let sv = m.singular_values()?;
    let sigma_max = sv.last().copied().unwrap_or(0.0);
    let threshold = tol * sigma_max;
    let rank = if sigma_max > 0.0 {
        sv.iter().filter(|&&s| s >= threshold).count()
    } else {
        0
    };
    let kernel = m.cols() - rank;
    let cokernel = m.rows() - rank;
    Ok(kernel as i64 - cokernel as i64)
}

/// Numerical kernel of the index block, each vector as `(mode, coefficient)`.
pub fn numerical_kernel(
    op: &TruncatedOperator,
    tol: f64,
) -> Result<Vec<Vec<(Mode, Complex64)>>, SpectralError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(SpectralError::InvalidTolerance(tol));
    }
    let block = op.index_block()?;
    let sigma_max = block.matrix().norm()?;
    let vectors = block.matrix().kernel(tol * sigma_max)?;
    Ok(vectors
        .into_iter()
        .map(|v| {
            v.into_iter()
                .map(|(j, z)| (block.domain_labels()[j].clone(), z))
                .collect()
        })
        .collect())
}

/// Operator norm of `[op, gen]` restricted to interior modes (all mode
/// coordinates at most `cutoff - 1` in absolute value).
pub fn commutator_norm(op: &TruncatedOperator, gen: &TruncatedOperator) -> Result<f64, SpectralError> {
    let square = |t: &TruncatedOperator| t.form != OperatorForm::Rectangular;
    if !square(op) || !square(gen) || op.row_modes != gen.row_modes {
        return Err(SpectralError::ShapeMismatch);
    }
    let a = op.matrix();
    let b = gen.matrix();
    let comm = a.mul(b)?.sub(&b.mul(a)?)?;
    let interior: Vec<usize> = op
        .row_modes
        .iter()
        .enumerate()
        .filter(|(_, m)| m.is_interior(op.cutoff))
        .map(|(i, _)| i)
        .collect();
    comm.restrict(&interior, &interior).norm()
}

/// Least-squares slope of `log N(λ)` against `log λ`, where `N(λ)` counts
/// singular values `<= λ`, over the singular values in `window`.
pub fn weyl_exponent(op: &TruncatedOperator, window: (f64, f64)) -> Result<f64, SpectralError> {
    let (lo, hi) = window;
    let limit = std::f64::consts::PI * op.cutoff as f64;
    if !(lo > 0.0 && lo < hi && lo >= hi / 4.0 && hi <= limit) {
        return Err(SpectralError::InvalidWindow { lo, hi, limit });
    }
    let sv = op.singular_values()?;
    let mut points: Vec<(f64, f64)> = Vec::new();
    for (i, &s) in sv.iter().enumerate() {
        if s < lo || s > hi {
            continue;
        }
        // count of values <= s is the index past the last equal value
        let last_equal = sv[i + 1..].first().is_none_or(|&next| next > s);
        if last_equal {
            points.push((s.ln(), ((i + 1) as f64).ln()));
        }
    }
    if points.len() < 2 {
        return Err(SpectralError::EmptyWindow { lo, hi });
    }
    Ok(least_squares_slope(&points))
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Summary of a spectral computation, in its JSON wire form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    #[serde(rename = "N")]
    pub cutoff: usize,
    pub index: Option<i64>,
    pub singular_values_head: Vec<f64>,
    pub weyl_slope: Option<f64>,
    pub commutator_norms: BTreeMap<String, f64>,
}

impl SpectralReport {
    /// Report skeleton with the `head` smallest singular values of `op`.
    pub fn for_operator(op: &TruncatedOperator, head: usize) -> Result<Self, SpectralError> {
        let sv = op.singular_values()?;
        Ok(Self {
            name: op.name().to_string(),
            params: op.params().clone(),
            cutoff: op.cutoff(),
            index: None,
            singular_values_head: sv.into_iter().take(head).collect(),
            weyl_slope: None,
            commutator_norms: BTreeMap::new(),
        })
    }
}
