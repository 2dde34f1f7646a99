//! Exterior-algebra model of `K_*(T^d)`.
//!
//! A class is a finite integer combination of basis classes `[k]`, one for
//! each subset `k` of `{1..d}`; `[k]` is the class of the standard coordinate
//! embedding of a `|k|`-torus in the coordinates listed in `k`. Products are
//! exterior products, linear maps of tori act through `Λ(A)`, and the
//! Fourier–Mukai transform is a signed permutation `[k] -> ±[k^⊥]`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::int_serde::JsonInt;
use crate::lattice::{is_primitive_basis, kernel_lattice, IntMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KTheoryError {
    #[error("ambient dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("map is {rows}x{cols} but the class lives on a {dim}-torus")]
    ShapeMismatch { rows: usize, cols: usize, dim: usize },
    #[error("subset {subset:?} is not a strictly increasing subset of 1..={dim}")]
    InvalidSubset { subset: Vec<usize>, dim: usize },
    #[error("subtorus basis is not primitive of full column rank")]
    NotPrimitive,
    #[error("subtorus basis has {rows} rows, expected ambient dimension {dim}")]
    BasisShape { rows: usize, dim: usize },
    #[error("orientation must be +1 or -1, got {0}")]
    InvalidOrientation(i64),
}

/// A subset of `{1..d}`, strictly increasing.
pub type Subset = Vec<usize>;

/// Parity of the degrees present in a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    /// Terms of both parities; representable, but not a class in a single
    /// `K_0` or `K_1`.
    Mixed,
}

/// An element of `Λ(Z^d) ≅ K_*(T^d)` in canonical sparse form.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct KClass {
    dim: usize,
    terms: BTreeMap<Subset, BigInt>,
}

fn check_subset(subset: &[usize], dim: usize) -> Result<(), KTheoryError> {
    let sorted = subset.windows(2).all(|w| w[0] < w[1]);
    let in_range = subset.iter().all(|&i| (1..=dim).contains(&i));
    if sorted && in_range {
        Ok(())
    } else {
        Err(KTheoryError::InvalidSubset {
            subset: subset.to_vec(),
            dim,
        })
    }
}

/// `{1..dim} \ subset`
pub fn complement(subset: &[usize], dim: usize) -> Subset {
    (1..=dim).filter(|i| !subset.contains(i)).collect()
}

/// Sign of the permutation sorting the concatenation `(k, l)` of two
/// disjoint increasing sequences.
fn shuffle_sign(k: &[usize], l: &[usize]) -> i32 {
    let inversions: usize = k.iter().map(|a| l.iter().filter(|b| *b < a).count()).sum();
    if inversions.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

impl KClass {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    /// The basis class `[k]`.
    pub fn basis(dim: usize, subset: &[usize]) -> Result<Self, KTheoryError> {
        check_subset(subset, dim)?;
        let mut terms = BTreeMap::new();
        terms.insert(subset.to_vec(), BigInt::one());
        Ok(Self { dim, terms })
    }

    /// Class of a point, `[∅]`.
    pub fn point(dim: usize) -> Self {
        Self::basis(dim, &[]).expect("empty subset is always valid")
    }

    /// Fundamental class `[{1..d}]` of the whole torus.
    pub fn top(dim: usize) -> Self {
        let all: Subset = (1..=dim).collect();
        Self::basis(dim, &all).expect("full subset is always valid")
    }

    /// Builds a class from `(subset, coefficient)` pairs. Repeated subsets
    /// are summed and zero coefficients dropped.
    pub fn from_terms<I>(dim: usize, terms: I) -> Result<Self, KTheoryError>
    where
        I: IntoIterator<Item = (Subset, BigInt)>,
    {
        let mut out = Self::zero(dim);
        for (subset, coeff) in terms {
            check_subset(&subset, dim)?;
            out.add_term(subset, coeff);
        }
        Ok(out)
    }

    /// The degree-one class `Σ v_i [{i}]` of a vector.
    pub fn vector(v: &[BigInt]) -> Self {
        let mut out = Self::zero(v.len());
        for (i, x) in v.iter().enumerate() {
            out.add_term(vec![i + 1], x.clone());
        }
        out
    }

    fn add_term(&mut self, subset: Subset, coeff: BigInt) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry(subset) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += coeff;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Subset, &BigInt)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, subset: &[usize]) -> BigInt {
        self.terms.get(subset).cloned().unwrap_or_default()
    }

    /// `Some(r)` when every term has degree `r`; `None` for mixed degrees or
    /// the zero class.
    pub fn degree(&self) -> Option<usize> {
        let mut degrees = self.terms.keys().map(Vec::len);
        let first = degrees.next()?;
        degrees.all(|r| r == first).then_some(first)
    }

    /// Parity of the class; the zero class counts as even.
    pub fn parity(&self) -> Parity {
        let odd = self.terms.keys().filter(|k| k.len() % 2 == 1).count();
        match odd {
            0 => Parity::Even,
            n if n == self.terms.len() => Parity::Odd,
            _ => Parity::Mixed,
        }
    }

    pub fn scale(&self, factor: &BigInt) -> Self {
        let mut out = Self::zero(self.dim);
        for (k, c) in &self.terms {
            out.add_term(k.clone(), c * factor);
        }
        out
    }

    fn check_same_dim(&self, other: &KClass) -> Result<(), KTheoryError> {
        if self.dim == other.dim {
            Ok(())
        } else {
            Err(KTheoryError::DimensionMismatch(self.dim, other.dim))
        }
    }

    pub fn try_add(&self, other: &KClass) -> Result<KClass, KTheoryError> {
        self.check_same_dim(other)?;
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(k.clone(), c.clone());
        }
        Ok(out)
    }
}

impl Add for &KClass {
    type Output = KClass;

    fn add(self, rhs: &KClass) -> KClass {
        self.try_add(rhs).expect("ambient dimensions differ")
    }
}

impl Neg for &KClass {
    type Output = KClass;

    fn neg(self) -> KClass {
        self.scale(&BigInt::from(-1))
    }
}

impl Sub for &KClass {
    type Output = KClass;

    fn sub(self, rhs: &KClass) -> KClass {
        self + &(-rhs)
    }
}

impl fmt::Debug for KClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KClass<{}>", self.dim)?;
        f.debug_map().entries(self.terms.iter().map(|(k, c)| (k, c.to_string()))).finish()
    }
}

impl fmt::Display for KClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, (k, c)) in self.terms.iter().enumerate() {
            let sign = if c.is_negative() { "-" } else if n > 0 { "+" } else { "" };
            if n > 0 {
                write!(f, " {sign} ")?;
            } else {
                write!(f, "{sign}")?;
            }
            let label: Vec<String> = k.iter().map(ToString::to_string).collect();
            if c.abs().is_one() {
                write!(f, "[{{{}}}]", label.join(","))?;
            } else {
                write!(f, "{}[{{{}}}]", c.abs(), label.join(","))?;
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    subset: Vec<usize>,
    coeff: JsonInt,
}

#[derive(Serialize, Deserialize)]
struct KClassJson {
    d: usize,
    terms: Vec<TermJson>,
}

impl KClass {
    /// Terms in the `[{"subset": [..], "coeff": c}]` wire form.
    pub fn terms_json(&self) -> Vec<(Subset, BigInt)> {
        self.terms.iter().map(|(k, c)| (k.clone(), c.clone())).collect()
    }
}

impl Serialize for KClass {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        KClassJson {
            d: self.dim,
            terms: self
                .terms
                .iter()
                .map(|(k, c)| TermJson {
                    subset: k.clone(),
                    coeff: JsonInt::from(c),
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for KClass {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = KClassJson::deserialize(deserializer)?;
        KClass::from_terms(raw.d, raw.terms.into_iter().map(|t| (t.subset, t.coeff.0)))
            .map_err(D::Error::custom)
    }
}

/// Exterior product, extended bilinearly from
/// `[k] ∧ [l] = sign(k, l) [k ∪ l]` for disjoint `k`, `l` and zero otherwise.
pub fn wedge(a: &KClass, b: &KClass) -> Result<KClass, KTheoryError> {
    a.check_same_dim(b)?;
    let mut out = KClass::zero(a.dim);
    for (k, ca) in &a.terms {
        for (l, cb) in &b.terms {
            if k.iter().any(|i| l.contains(i)) {
                continue;
            }
            let mut union: Subset = k.iter().chain(l).copied().collect();
            union.sort_unstable();
            let coeff = ca * cb * shuffle_sign(k, l);
            out.add_term(union, coeff);
        }
    }
    Ok(out)
}

/// How the sign of `[k] -> ±[k^⊥]` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignConvention {
    /// `(-1)^(d r + r(r-1)/2)` with `r = |k|`; depends on the degree only.
    #[default]
    Degree,
    /// The degree sign times the shuffle sign of `(k, k^⊥)`, i.e. the
    /// exponent gains the index-dependent term `Σ (k_i - i)`. Under this
    /// convention the transform is a Hodge star on `Λ(Z^d)`.
    Shuffle,
}

/// Sign attached to `[k] -> [k^⊥]` on a `dim`-torus.
pub fn fm_sign(subset: &[usize], dim: usize, convention: SignConvention) -> i32 {
    let r = subset.len();
    let exponent = dim * r + r * r.saturating_sub(1) / 2;
    let degree_sign = if exponent.is_multiple_of(2) { 1 } else { -1 };
    match convention {
        SignConvention::Degree => degree_sign,
        SignConvention::Shuffle => degree_sign * shuffle_sign(subset, &complement(subset, dim)),
    }
}

/// Fourier–Mukai (Dirac localization) transform
/// `[k] -> (-1)^(d r + r(r-1)/2) [k^⊥]`, `r = |k|`.
pub fn fm_transform(a: &KClass) -> KClass {
    fm_transform_with(a, SignConvention::Degree)
}

pub fn fm_transform_with(a: &KClass, convention: SignConvention) -> KClass {
    let mut out = KClass::zero(a.dim);
    for (k, c) in &a.terms {
        out.add_term(complement(k, a.dim), c * fm_sign(k, a.dim, convention));
    }
    out
}

/// Inverse of [`fm_transform`].
pub fn fm_inverse(a: &KClass) -> KClass {
    fm_inverse_with(a, SignConvention::Degree)
}

/// Inverts the signed permutation: the preimage of `[j]` is `[j^⊥]`, and the
/// sign is the forward sign of `j^⊥` (its own inverse, being ±1).
pub fn fm_inverse_with(a: &KClass, convention: SignConvention) -> KClass {
    let mut out = KClass::zero(a.dim);
    for (j, c) in &a.terms {
        let source = complement(j, a.dim);
        let sign = fm_sign(&source, a.dim, convention);
        out.add_term(source, c * sign);
    }
    out
}

/// `Λ(A)`: sends `[k]` to `A e_{k_1} ∧ ... ∧ A e_{k_r}` in `Λ(Z^rows)`.
pub fn pushforward(map: &IntMatrix, a: &KClass) -> Result<KClass, KTheoryError> {
    if map.cols() != a.dim {
        return Err(KTheoryError::ShapeMismatch {
            rows: map.rows(),
            cols: map.cols(),
            dim: a.dim,
        });
    }
    let target = map.rows();
    let images: Vec<KClass> = (0..map.cols())
        .map(|j| KClass::vector(&map.column(j)))
        .collect();
    let mut out = KClass::zero(target);
    for (k, c) in &a.terms {
        let mut image = KClass::point(target);
        for &i in k {
            image = wedge(&image, &images[i - 1])?;
        }
        out = out.try_add(&image.scale(c))?;
    }
    Ok(out)
}

/// Intersection pairing: the coefficient of the top class in `a ∧ b`.
pub fn pairing(a: &KClass, b: &KClass) -> Result<BigInt, KTheoryError> {
    let w = wedge(a, b)?;
    let top: Subset = (1..=a.dim).collect();
    Ok(w.coefficient(&top))
}

/// A rational linear subtorus of `T^d`, given by a primitive basis of its
/// lattice of periods and an orientation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subtorus {
    basis: IntMatrix,
    orientation: i8,
}

impl Subtorus {
    pub fn new(basis: IntMatrix, orientation: i64) -> Result<Self, KTheoryError> {
        if orientation != 1 && orientation != -1 {
            return Err(KTheoryError::InvalidOrientation(orientation));
        }
        if !is_primitive_basis(&basis) {
            return Err(KTheoryError::NotPrimitive);
        }
        Ok(Self {
            basis,
            orientation: orientation as i8,
        })
    }

    /// The subtorus spanned by the given columns, positively oriented.
    pub fn from_basis(basis: IntMatrix) -> Result<Self, KTheoryError> {
        Self::new(basis, 1)
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    pub fn basis(&self) -> &IntMatrix {
        &self.basis
    }

    pub fn orientation(&self) -> i8 {
        self.orientation
    }
}

#[derive(Serialize, Deserialize)]
struct SubtorusJson {
    d: usize,
    basis: IntMatrix,
    orientation: i64,
}

impl Serialize for Subtorus {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        SubtorusJson {
            d: self.ambient_dim(),
            basis: self.basis.clone(),
            orientation: self.orientation.into(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Subtorus {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = SubtorusJson::deserialize(deserializer)?;
        // A 0-dimensional subtorus arrives as d rows of empty lists, or as
        // an empty list outright.
        let basis = if raw.basis.rows() == 0 {
            IntMatrix::zeros(raw.d, 0)
        } else {
            raw.basis
        };
        if basis.rows() != raw.d {
            return Err(D::Error::custom(KTheoryError::BasisShape {
                rows: basis.rows(),
                dim: raw.d,
            }));
        }
        Subtorus::new(basis, raw.orientation).map_err(D::Error::custom)
    }
}

/// The class `[T] = ± Λ(basis)[{1..j}]`, homogeneous of degree `j`.
pub fn class_of_subtorus(t: &Subtorus) -> KClass {
    let top = KClass::top(t.dim());
    let class = pushforward(&t.basis, &top).expect("basis shape matches its own top class");
    class.scale(&BigInt::from(t.orientation))
}

/// The annihilator subtorus `T^⊥` in the dual torus: characters vanishing on
/// the lattice of `T`. Oriented so that `(oriented basis of T | oriented
/// basis of T^⊥)` has positive determinant.
pub fn perp_subtorus(t: &Subtorus) -> Subtorus {
    let w = kernel_lattice(&t.basis.transpose());
    let joined = t.basis.hstack(&w).expect("same number of rows");
    let det = joined.determinant().expect("complementary ranks make this square");
    debug_assert!(!det.is_zero());
    let orientation = if det.is_negative() {
        -t.orientation
    } else {
        t.orientation
    };
    Subtorus {
        basis: w,
        orientation,
    }
}
