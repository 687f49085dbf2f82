use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{inner, isometry_residual, vec_norm, CMatrix, C64};
use crate::error::{Error, Result};

/// Fixed stream for the columns added by [`complete_to_unitary`].
const COMPLETION_SEED: u64 = 0x6b72_6175_7363_6f70;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a tuple of tags into an independent stream seed.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

fn complex_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix of i.i.d. standard complex normal entries.
pub fn ginibre<R: rand::Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng))
}

/// Removes the components of `v` along each (orthonormal) vector in `basis`.
/// Two passes keep the result orthogonal to working precision.
fn orthogonalize(v: &mut [C64], basis: &[Vec<C64>]) {
    for _ in 0..2 {
        for b in basis {
            let proj = inner(b, v);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= proj * y;
            }
        }
    }
}

fn columns_to_matrix(cols: &[Vec<C64>]) -> CMatrix {
    let rows = cols[0].len();
    CMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

/// Haar-random unitary: Gram–Schmidt of a Ginibre matrix. Gram–Schmidt
/// leaves a positive real diagonal in the triangular factor, which is the
/// phase convention that makes the distribution Haar.
pub fn random_unitary(d: usize, seed: u64) -> CMatrix {
    assert!(d >= 1, "dimension must be positive");
    let mut rng = rng_from_seed(seed);
    let g = ginibre(d, d, &mut rng);
    let mut q: Vec<Vec<C64>> = Vec::with_capacity(d);
    for j in 0..d {
        let mut v = g.col(j);
        orthogonalize(&mut v, &q);
        let n = vec_norm(&v);
        v.iter_mut().for_each(|x| *x /= n);
        q.push(v);
    }
    columns_to_matrix(&q)
}

/// Random mixed state `G·G†/Tr(G·G†)` with `G` Ginibre.
pub fn random_density(d: usize, seed: u64) -> CMatrix {
    assert!(d >= 1, "dimension must be positive");
    let g = ginibre(d, d, &mut rng_from_seed(seed));
    let w = &g * &g.adjoint();
    let tr = w.trace().re;
    let mut rho = w.scale(C64::new(1.0 / tr, 0.0));
    // exact Hermiticity on the diagonal
    for i in 0..d {
        rho[(i, i)] = C64::new(rho[(i, i)].re, 0.0);
    }
    rho
}

/// Random Hermitian matrix `(G + G†)/2`.
pub fn random_hermitian(d: usize, seed: u64) -> CMatrix {
    let g = ginibre(d, d, &mut rng_from_seed(seed));
    CMatrix::from_fn(d, d, |i, j| 0.5 * (g[(i, j)] + g[(j, i)].conj()))
}

/// Random unit vector.
pub fn random_state(d: usize, seed: u64) -> Vec<C64> {
    let mut rng = rng_from_seed(seed);
    let mut v: Vec<C64> = (0..d).map(|_| complex_normal(&mut rng)).collect();
    let n = vec_norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// Extends a matrix with orthonormal columns to a square unitary.
///
/// The first `iso.cols()` columns of the result are exactly those of `iso`;
/// the rest come from a fixed seeded stream, so the completion is
/// deterministic.
pub fn complete_to_unitary(iso: &CMatrix) -> Result<CMatrix> {
    let (n, m) = (iso.rows(), iso.cols());
    if m > n {
        return Err(Error::DimensionMismatch(format!(
            "isometry has more columns ({m}) than rows ({n})"
        )));
    }
    let residual = isometry_residual(iso);
    if residual > 1e-10 {
        return Err(Error::NotIsometry { residual });
    }
    let mut cols: Vec<Vec<C64>> = (0..m).map(|j| iso.col(j)).collect();
    let mut rng = rng_from_seed(derive_seed(COMPLETION_SEED, &[n as u64, m as u64]));
    while cols.len() < n {
        let mut v: Vec<C64> = (0..n).map(|_| complex_normal(&mut rng)).collect();
        let before = vec_norm(&v);
        orthogonalize(&mut v, &cols);
        let after = vec_norm(&v);
        if after < 1e-6 * before {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= after);
        cols.push(v);
    }
    Ok(columns_to_matrix(&cols))
}
