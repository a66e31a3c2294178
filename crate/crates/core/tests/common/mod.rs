//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use iqscore::{EmbeddingSet, LabeledEmbeddingSet};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_set(seed: u64, n: usize, d: usize) -> EmbeddingSet {
    let mut r = rng(seed);
    let data = (0..n * d)
        .map(|_| r.sample::<f32, _>(StandardNormal))
        .collect();
    EmbeddingSet::new(n, d, data).unwrap()
}

pub fn unit_set(seed: u64, n: usize, d: usize) -> EmbeddingSet {
    iqscore::l2_normalize_rows(&gaussian_set(seed, n, d)).unwrap()
}

/// Small integers, so scaling by powers of ten stays exact in f32.
pub fn integer_set(seed: u64, n: usize, d: usize) -> EmbeddingSet {
    let mut r = rng(seed);
    let data = (0..n * d)
        .map(|_| r.random_range(-9i32..=9) as f32)
        .collect();
    EmbeddingSet::new(n, d, data).unwrap()
}

pub fn labeled(set: EmbeddingSet, identities: u64) -> LabeledEmbeddingSet {
    let labels = (0..set.n() as u64).map(|i| i % identities).collect();
    LabeledEmbeddingSet::new(set, labels).unwrap()
}

/// Haar-distributed orthogonal matrix from the QR of a Gaussian matrix.
pub fn random_orthogonal(seed: u64, d: usize) -> DMatrix<f64> {
    let mut r = rng(seed);
    let g = DMatrix::from_fn(d, d, |_, _| r.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (q, rr) = (qr.q(), qr.r());
    let signs = DMatrix::from_diagonal(&rr.diagonal().map(|v| v.signum()));
    q * signs
}

pub fn rotate(set: &EmbeddingSet, q: &DMatrix<f64>) -> EmbeddingSet {
    let (n, d) = (set.n(), set.d());
    let mut data = Vec::with_capacity(n * d);
    for row in set.rows() {
        for j in 0..d {
            let v: f64 = (0..d).map(|a| row[a] as f64 * q[(a, j)]).sum();
            data.push(v as f32);
        }
    }
    EmbeddingSet::new(n, d, data).unwrap()
}

/// Row-major covariance `(1/n) X~^T X~` by the textbook two-pass formula.
pub fn naive_covariance(set: &EmbeddingSet) -> Vec<f64> {
    let (n, d) = (set.n(), set.d());
    let mean: Vec<f64> = (0..d)
        .map(|j| set.rows().map(|r| r[j] as f64).sum::<f64>() / n as f64)
        .collect();
    let mut c = vec![0.0; d * d];
    for row in set.rows() {
        for a in 0..d {
            for b in 0..d {
                c[a * d + b] += (row[a] as f64 - mean[a]) * (row[b] as f64 - mean[b]);
            }
        }
    }
    c.iter_mut().for_each(|v| *v /= n as f64);
    c
}

/// Monic characteristic polynomial coefficients, highest degree first, for a
/// symmetric matrix of dimension 1 to 3 (principal-minor expansion).
pub fn char_poly(m: &[f64], dim: usize) -> Vec<f64> {
    let a = |i: usize, j: usize| m[i * dim + j];
    match dim {
        1 => vec![1.0, -a(0, 0)],
        2 => vec![
            1.0,
            -(a(0, 0) + a(1, 1)),
            a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0),
        ],
        3 => {
            let tr = a(0, 0) + a(1, 1) + a(2, 2);
            let minors = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0) + a(0, 0) * a(2, 2)
                - a(0, 2) * a(2, 0)
                + a(1, 1) * a(2, 2)
                - a(1, 2) * a(2, 1);
            let det = a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1))
                - a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0))
                + a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
            vec![1.0, -tr, minors, -det]
        }
        _ => panic!("char_poly supports dimensions 1 to 3"),
    }
}

fn eval(p: &[f64], x: f64) -> f64 {
    p.iter().fold(0.0, |acc, &c| acc * x + c)
}

fn derivative(p: &[f64]) -> Vec<f64> {
    let deg = p.len() - 1;
    p[..deg]
        .iter()
        .enumerate()
        .map(|(i, c)| c * (deg - i) as f64)
        .collect()
}

/// Real roots of a polynomial whose roots are all real, ascending. Critical
/// points split the line into monotone pieces, each bisected.
pub fn real_roots(p: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    if p.len() == 2 {
        return vec![-p[1] / p[0]];
    }
    let mut cuts = vec![lo];
    cuts.extend(
        real_roots(&derivative(p), lo, hi)
            .into_iter()
            .map(|c| c.clamp(lo, hi)),
    );
    cuts.push(hi);
    cuts.windows(2)
        .map(|w| {
            let (mut a, mut b) = (w[0], w[1]);
            let (fa, fb) = (eval(p, a), eval(p, b));
            if fa.signum() == fb.signum() {
                // double root touching zero at a critical point
                return if fa.abs() < fb.abs() { a } else { b };
            }
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                if eval(p, mid).signum() == fa.signum() {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// Eigenvalues of a symmetric matrix (dim <= 3), descending.
pub fn oracle_eigenvalues(m: &[f64], dim: usize) -> Vec<f64> {
    let bound = (0..dim)
        .map(|i| (0..dim).map(|j| m[i * dim + j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    let mut roots = real_roots(&char_poly(m, dim), -bound, bound);
    roots.sort_by(|a, b| b.total_cmp(a));
    roots
}
