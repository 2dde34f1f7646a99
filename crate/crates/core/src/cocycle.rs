//! Geometric cocycles for `Z^d` translation actions on `T^n`.
//!
//! The Borel space of such an action is the torus `T^{d+n}`, fibred over the
//! base `T^d` with fibre `T^n`. A cocycle here is a rational `d`-subtorus of
//! `T^{d+n}`, recorded by a primitive basis of its period lattice (the first
//! `d` coordinates are base directions) and a rational translate. Its
//! intersection index with a fibre is the degree of the base projection,
//! i.e. the determinant of the top `d x d` block of the basis.

use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::ktheory::{pushforward, KClass};
use crate::lattice::{is_primitive_basis, kernel_lattice, IntMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CocycleError {
    #[error("parametrization is {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    ParamShape {
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("parametrization columns are not a primitive basis of full rank")]
    NotPrimitive,
    #[error("offset has length {found}, expected {expected}")]
    OffsetLength { found: usize, expected: usize },
    #[error("base point has length {found}, expected {expected}")]
    BasePointLength { found: usize, expected: usize },
    #[error("equation blocks have incompatible shapes: A is {a:?}, U is {u:?}")]
    EquationShape { a: (usize, usize), u: (usize, usize) },
    #[error("fibre block U is singular")]
    SingularFibreBlock,
    #[error("equations have rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("base block is singular; the cocycle is not transverse to the fibres")]
    SingularBaseBlock,
    #[error("invalid rational {0:?}")]
    InvalidRational(String),
}

/// Parses `"p/q"` or `"p"`.
pub fn parse_rational(s: &str) -> Result<BigRational, CocycleError> {
    let t = s.trim();
    let bad = || CocycleError::InvalidRational(s.to_string());
    match t.split_once('/') {
        Some((p, q)) => {
            let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
            let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(p, q))
        }
        None => BigInt::from_str(t).map(BigRational::from_integer).map_err(|_| bad()),
    }
}

/// Always `"p/q"` in lowest terms with `q > 0`.
pub fn format_rational(x: &BigRational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeometricCocycle {
    base_dim: usize,
    fibre_dim: usize,
    param: IntMatrix,
    offset: Vec<BigRational>,
}

impl GeometricCocycle {
    pub fn new(
        base_dim: usize,
        fibre_dim: usize,
        param: IntMatrix,
        offset: Option<Vec<BigRational>>,
    ) -> Result<Self, CocycleError> {
        let total = base_dim + fibre_dim;
        if param.shape() != (total, base_dim) {
            return Err(CocycleError::ParamShape {
                rows: param.rows(),
                cols: param.cols(),
                expected_rows: total,
                expected_cols: base_dim,
            });
        }
        if !is_primitive_basis(&param) {
            return Err(CocycleError::NotPrimitive);
        }
        let offset = offset.unwrap_or_else(|| vec![BigRational::zero(); total]);
        if offset.len() != total {
            return Err(CocycleError::OffsetLength {
                found: offset.len(),
                expected: total,
            });
        }
        Ok(Self {
            base_dim,
            fibre_dim,
            param,
            offset,
        })
    }

    /// The closed loop of `T^2` through the origin with direction `(q, p)`:
    /// `q` turns around the base circle, `p` around the fibre.
    pub fn loop_cocycle(q: i64, p: i64) -> Result<Self, CocycleError> {
        Self::new(1, 1, IntMatrix::from_i64(2, 1, &[q, p]), None)
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn fibre_dim(&self) -> usize {
        self.fibre_dim
    }

    pub fn param(&self) -> &IntMatrix {
        &self.param
    }

    pub fn offset(&self) -> &[BigRational] {
        &self.offset
    }

    pub fn with_offset(mut self, offset: Vec<BigRational>) -> Result<Self, CocycleError> {
        if offset.len() != self.offset.len() {
            return Err(CocycleError::OffsetLength {
                found: offset.len(),
                expected: self.offset.len(),
            });
        }
        self.offset = offset;
        Ok(self)
    }

    /// Top `d x d` block: the base components of the period vectors.
    pub fn base_block(&self) -> IntMatrix {
        let idx: Vec<usize> = (0..self.base_dim).collect();
        self.param.select(&idx, &idx)
    }
}

#[derive(Serialize, Deserialize)]
struct CocycleJson {
    d: usize,
    n: usize,
    param: IntMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<Vec<String>>,
}

impl Serialize for GeometricCocycle {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        CocycleJson {
            d: self.base_dim,
            n: self.fibre_dim,
            param: self.param.clone(),
            offset: Some(self.offset.iter().map(format_rational).collect()),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GeometricCocycle {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = CocycleJson::deserialize(deserializer)?;
        let offset = raw
            .offset
            .map(|v| v.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>, _>>())
            .transpose()
            .map_err(D::Error::custom)?;
        // d = 0 arrives as a list of empty rows or an empty list.
        let param = if raw.param.rows() == 0 {
            IntMatrix::zeros(raw.d + raw.n, 0)
        } else {
            raw.param
        };
        GeometricCocycle::new(raw.d, raw.n, param, offset).map_err(D::Error::custom)
    }
}

/// The cocycle cut out by `A x + U t = 0`, `x` in the base `T^d`, `t` in the
/// fibre `T^n`. `A` is `n x d`, `U` is `n x n` and must be invertible over Q.
pub fn equations_to_parametrization(
    a: &IntMatrix,
    u: &IntMatrix,
) -> Result<GeometricCocycle, CocycleError> {
    let n = u.rows();
    if !u.is_square() || a.rows() != n {
        return Err(CocycleError::EquationShape {
            a: a.shape(),
            u: u.shape(),
        });
    }
    let d = a.cols();
    if u.determinant().expect("checked square").is_zero() {
        return Err(CocycleError::SingularFibreBlock);
    }
    let system = a.hstack(u).expect("row counts checked");
    let rank = system.rank();
    if rank != n {
        return Err(CocycleError::RankDeficient { rank, expected: n });
    }
    let param = kernel_lattice(&system);
    GeometricCocycle::new(d, n, param, None)
}

/// Signed count of intersections with a fibre: `det` of the base block,
/// zero when the cocycle is not transverse.
pub fn intersection_index(c: &GeometricCocycle) -> BigInt {
    c.base_block().determinant().expect("base block is square")
}

/// The analytic index of the cocycle's K-theory class against the Dirac
/// class, evaluated through the intersection index formula.
pub fn dirac_index(c: &GeometricCocycle) -> BigInt {
    intersection_index(c)
}

/// Brute-force count of the points where the cocycle meets the fibre over
/// `base_point`.
///
/// Solves `B x + offset_base ≡ base_point (mod Z^d)` for `x ∈ [0,1)^d` by
/// enumerating every integer vector in the bounding box of the
/// parallelepiped `B [0,1]^d` and testing membership with exact rationals.
pub fn intersection_index_oracle(
    c: &GeometricCocycle,
    base_point: &[BigRational],
) -> Result<u64, CocycleError> {
    let d = c.base_dim;
    if base_point.len() != d {
        return Err(CocycleError::BasePointLength {
            found: base_point.len(),
            expected: d,
        });
    }
    let b = c.base_block();
    let inverse = rational_inverse(&b).ok_or(CocycleError::SingularBaseBlock)?;
    let target: Vec<BigRational> = base_point
        .iter()
        .zip(&c.offset)
        .map(|(p, o)| p - o)
        .collect();

    // y = B x ranges over B [0,1)^d; y must lie in target + Z^d.
    let mut lo = Vec::with_capacity(d);
    let mut hi = Vec::with_capacity(d);
    for (i, t) in target.iter().enumerate() {
        let (mut neg, mut pos) = (BigInt::zero(), BigInt::zero());
        for j in 0..d {
            let x = b.get(i, j);
            if x.is_negative() {
                neg += x;
            } else {
                pos += x;
            }
        }
        lo.push((BigRational::from_integer(neg) - t).ceil().to_integer());
        hi.push((BigRational::from_integer(pos) - t).floor().to_integer());
    }

    let mut count = 0u64;
    let mut z = lo.clone();
    if lo.iter().zip(&hi).any(|(l, h)| l > h) {
        return Ok(0);
    }
    loop {
        let y: Vec<BigRational> = target
            .iter()
            .zip(&z)
            .map(|(t, zi)| t + BigRational::from_integer(zi.clone()))
            .collect();
        let inside = inverse.iter().all(|row| {
            let x: BigRational = row.iter().zip(&y).map(|(a, b)| a * b).sum();
            !x.is_negative() && x < BigRational::from_integer(1.into())
        });
        if inside {
            count += 1;
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == d {
                return Ok(count);
            }
            if z[i] < hi[i] {
                z[i] += 1;
                break;
            }
            z[i] = lo[i].clone();
            i += 1;
        }
    }
}

/// Gauss–Jordan inverse over Q; `None` when singular.
fn rational_inverse(m: &IntMatrix) -> Option<Vec<Vec<BigRational>>> {
    let n = m.rows();
    let one = BigRational::from_integer(1.into());
    let mut a: Vec<Vec<BigRational>> = (0..n)
        .map(|i| {
            let mut row: Vec<BigRational> = m
                .row(i)
                .iter()
                .map(|x| BigRational::from_integer(x.clone()))
                .collect();
            row.extend((0..n).map(|j| if i == j { one.clone() } else { BigRational::zero() }));
            row
        })
        .collect();
    for col in 0..n {
        let p = (col..n).find(|&i| !a[i][col].is_zero())?;
        a.swap(col, p);
        let pivot = a[col][col].clone();
        for x in a[col].iter_mut() {
            *x /= &pivot;
        }
        let pivot_row = a[col].clone();
        for (i, row) in a.iter_mut().enumerate() {
            if i == col || row[col].is_zero() {
                continue;
            }
            let f = row[col].clone();
            for (x, p) in row.iter_mut().zip(&pivot_row) {
                *x -= &f * p;
            }
        }
    }
    Some(a.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Pushforward of the fundamental class of the cocycle torus into
/// `Λ(Z^{d+n})`; the coefficients are the Plücker coordinates of `param`.
pub fn cocycle_class(c: &GeometricCocycle) -> KClass {
    pushforward(&c.param, &KClass::top(c.base_dim)).expect("param has d columns")
}

/// Class of a fibre `T^n ⊂ T^{d+n}`: `[{d+1, ..., d+n}]`.
pub fn fibre_class(d: usize, n: usize) -> KClass {
    let subset: Vec<usize> = (d + 1..=d + n).collect();
    KClass::basis(d + n, &subset).expect("fibre coordinates are in range")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "order")]
pub enum TorsionOrder {
    Finite(u64),
    Infinite,
}

/// Order of a class that is `χ`-torsion and non-torsion when `χ = 0`.
pub fn euler_torsion_order(chi: i64) -> TorsionOrder {
    match chi.unsigned_abs() {
        0 => TorsionOrder::Infinite,
        n => TorsionOrder::Finite(n),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ktheory::pairing;

    fn e(dim: usize, k: &[usize]) -> KClass {
        KClass::basis(dim, k).unwrap()
    }

    fn rat(s: &str) -> BigRational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn equations_diag_2_3() {
        let c = equations_to_parametrization(&IntMatrix::identity(2), &IntMatrix::diagonal(&[2, 3]))
            .unwrap();
        assert_eq!(
            c.param(),
            &IntMatrix::from_i64(4, 2, &[2, 0, 0, 3, -1, 0, 0, -1])
        );
        assert_eq!(intersection_index(&c), 6.into());
        assert_eq!(dirac_index(&c), 6.into());
    }

    #[test]
    fn equations_trivial_fibre_equations() {
        let c = equations_to_parametrization(&IntMatrix::zeros(2, 2), &IntMatrix::identity(2)).unwrap();
        assert_eq!(c.param(), &IntMatrix::from_i64(4, 2, &[1, 0, 0, 1, 0, 0, 0, 0]));
        assert_eq!(intersection_index(&c), 1.into());
    }

    #[test]
    fn equations_identity() {
        let c = equations_to_parametrization(&IntMatrix::identity(2), &IntMatrix::identity(2)).unwrap();
        assert_eq!(c.param(), &IntMatrix::from_i64(4, 2, &[1, 0, 0, 1, -1, 0, 0, -1]));
        // 2x2 minors of the columns (1,0,-1,0), (0,1,0,-1)
        let expected = KClass::from_terms(
            4,
            vec![
                (vec![1, 2], 1.into()),
                (vec![1, 4], (-1).into()),
                (vec![2, 3], 1.into()),
                (vec![3, 4], 1.into()),
            ],
        )
        .unwrap();
        assert_eq!(cocycle_class(&c), expected);
    }

    #[test]
    fn equations_errors() {
        let singular = IntMatrix::from_i64(2, 2, &[1, 2, 2, 4]);
        assert_eq!(
            equations_to_parametrization(&IntMatrix::identity(2), &singular),
            Err(CocycleError::SingularFibreBlock)
        );
        assert!(matches!(
            equations_to_parametrization(&IntMatrix::identity(3), &IntMatrix::identity(2)),
            Err(CocycleError::EquationShape { .. })
        ));
    }

    #[test]
    fn loop_indices() {
        assert_eq!(intersection_index(&GeometricCocycle::loop_cocycle(3, 2).unwrap()), 3.into());
        assert_eq!(intersection_index(&GeometricCocycle::loop_cocycle(0, 1).unwrap()), 0.into());
        assert_eq!(dirac_index(&GeometricCocycle::loop_cocycle(0, 1).unwrap()), 0.into());
        assert!(GeometricCocycle::loop_cocycle(2, 4).is_err());
        let c = GeometricCocycle::loop_cocycle(5, -3).unwrap();
        assert_eq!(cocycle_class(&c), &e(2, &[1]).scale(&5.into()) + &e(2, &[2]).scale(&(-3).into()));
    }

    #[test]
    fn oracle_examples() {
        let one_d = GeometricCocycle::new(1, 1, IntMatrix::from_i64(2, 1, &[3, 1]), None).unwrap();
        assert_eq!(intersection_index_oracle(&one_d, &[rat("1/7")]).unwrap(), 3);
        assert_eq!(intersection_index_oracle(&one_d, &[rat("0")]).unwrap(), 3);

        let id = GeometricCocycle::new(2, 0, IntMatrix::identity(2), None).unwrap();
        assert_eq!(intersection_index_oracle(&id, &[rat("1/2"), rat("-3/5")]).unwrap(), 1);

        let c = equations_to_parametrization(&IntMatrix::identity(2), &IntMatrix::diagonal(&[2, 3]))
            .unwrap();
        assert_eq!(intersection_index_oracle(&c, &[rat("1/3"), rat("2/9")]).unwrap(), 6);

        let fibre_loop = GeometricCocycle::loop_cocycle(0, 1).unwrap();
        assert_eq!(
            intersection_index_oracle(&fibre_loop, &[rat("0")]),
            Err(CocycleError::SingularBaseBlock)
        );
        assert!(matches!(
            intersection_index_oracle(&id, &[rat("0")]),
            Err(CocycleError::BasePointLength { .. })
        ));
    }

    #[test]
    fn fibre_classes() {
        assert_eq!(fibre_class(1, 1), e(2, &[2]));
        assert_eq!(fibre_class(2, 0), e(2, &[]));
        assert_eq!(fibre_class(2, 2), e(4, &[3, 4]));
    }

    #[test]
    fn pairing_with_fibre_matches_index() {
        for (q, p) in [(3, 2), (-4, 1), (0, 1), (7, -5)] {
            let c = GeometricCocycle::loop_cocycle(q, p).unwrap();
            assert_eq!(
                pairing(&cocycle_class(&c), &fibre_class(1, 1)).unwrap(),
                intersection_index(&c)
            );
        }
    }

    #[test]
    fn torsion_orders() {
        assert_eq!(euler_torsion_order(-2), TorsionOrder::Finite(2));
        assert_eq!(euler_torsion_order(0), TorsionOrder::Infinite);
        assert_eq!(euler_torsion_order(1), TorsionOrder::Finite(1));
        assert_eq!(
            serde_json::to_string(&euler_torsion_order(-4)).unwrap(),
            r#"{"kind":"finite","order":4}"#
        );
        assert_eq!(
            serde_json::to_string(&euler_torsion_order(0)).unwrap(),
            r#"{"kind":"infinite"}"#
        );
    }

    #[test]
    fn rationals() {
        assert_eq!(format_rational(&rat("2/4")), "1/2");
        assert_eq!(format_rational(&rat("-3")), "-3/1");
        assert_eq!(format_rational(&rat("3/-6")), "-1/2");
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn json_round_trip() {
        let s = r#"{"d":1,"n":1,"param":[[3],[2]],"offset":["1/2","0/1"]}"#;
        let c: GeometricCocycle = serde_json::from_str(s).unwrap();
        assert_eq!(c.offset()[0], rat("1/2"));
        let out = serde_json::to_string(&c).unwrap();
        assert_eq!(out, s);
        assert!(serde_json::from_str::<GeometricCocycle>(r#"{"d":1,"n":1,"param":[[2],[4]]}"#).is_err());
    }
}
