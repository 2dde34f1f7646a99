//! Random generators shared by the integration suites.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use torus_dirac::cocycle::GeometricCocycle;
use torus_dirac::lattice::IntMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Applies `row_i += mult * row_j` for each op (skipping `i == j`) and then
/// negates the rows flagged in `flips`.
pub fn unimodular_from_ops(dim: usize, ops: &[(usize, usize, i64)], flips: &[bool]) -> IntMatrix {
    let mut m = IntMatrix::identity(dim);
    for &(i, j, mult) in ops {
        let (i, j) = (i % dim, j % dim);
        if i == j {
            continue;
        }
        for col in 0..dim {
            let v = m.get(i, col) + m.get(j, col) * mult;
            m.set(i, col, v);
        }
    }
    for (i, &flip) in flips.iter().enumerate().take(dim) {
        if flip {
            for col in 0..dim {
                let v = -m.get(i, col);
                m.set(i, col, v);
            }
        }
    }
    m
}

pub fn random_unimodular(rng: &mut ChaCha8Rng, dim: usize) -> IntMatrix {
    if dim == 0 {
        return IntMatrix::identity(0);
    }
    let steps = rng.gen_range(0..=3 * dim);
    let ops: Vec<(usize, usize, i64)> = (0..steps)
        .map(|_| (rng.gen_range(0..dim), rng.gen_range(0..dim), rng.gen_range(-2..=2)))
        .collect();
    let flips: Vec<bool> = (0..dim).map(|_| rng.gen_bool(0.5)).collect();
    unimodular_from_ops(dim, &ops, &flips)
}

/// First `k` columns of a random unimodular matrix.
pub fn random_primitive_basis(rng: &mut ChaCha8Rng, dim: usize, k: usize) -> IntMatrix {
    let g = random_unimodular(rng, dim);
    g.select_columns(&(0..k).collect::<Vec<_>>())
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: i64) -> IntMatrix {
    let data: Vec<i64> = (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect();
    IntMatrix::from_i64(rows, cols, &data)
}

pub fn random_nonsingular(rng: &mut ChaCha8Rng, dim: usize, bound: i64) -> IntMatrix {
    loop {
        let m = random_matrix(rng, dim, dim, bound);
        if !m.determinant().unwrap().is_zero() {
            return m;
        }
    }
}

pub fn random_rational(rng: &mut ChaCha8Rng) -> BigRational {
    let den: i64 = rng.gen_range(1..=12);
    let num: i64 = rng.gen_range(-3 * den..=3 * den);
    BigRational::new(num.into(), den.into())
}

/// A cocycle with nonsingular base block of determinant at most
/// `max_det` in absolute value, and a random rational offset.
pub fn random_transverse_cocycle(
    rng: &mut ChaCha8Rng,
    d: usize,
    n: usize,
    max_det: i64,
) -> GeometricCocycle {
    loop {
        let g = random_unimodular(rng, d + n);
        let param = g.select_columns(&(0..d).collect::<Vec<_>>());
        let c = GeometricCocycle::new(d, n, param, None).unwrap();
        let det = c.base_block().determinant().unwrap();
        if det.is_zero() || det.abs() > BigInt::from(max_det) {
            continue;
        }
        let offset = (0..d + n).map(|_| random_rational(rng)).collect();
        return c.with_offset(offset).unwrap();
    }
}

pub fn sign(x: &BigInt) -> i32 {
    if x.is_zero() {
        0
    } else if x > &BigInt::zero() {
        1
    } else {
        -1
    }
}

/// Determinant by permutation expansion; independent of elimination.
pub fn leibniz_det(m: &IntMatrix) -> BigInt {
    let n = m.rows();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = BigInt::zero();
    permutations(&mut perm, 0, &mut |p| {
        let mut inversions = 0;
        for i in 0..n {
            for j in i + 1..n {
                if p[i] > p[j] {
                    inversions += 1;
                }
            }
        }
        let mut term = BigInt::one();
        for (i, &j) in p.iter().enumerate() {
            term *= m.get(i, j);
        }
        if inversions % 2 == 1 {
            term = -term;
        }
        total += term;
    });
    total
}

fn permutations(p: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permutations(p, k + 1, f);
        p.swap(k, i);
    }
}

/// All increasing `k`-subsets of `0..n`.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}
