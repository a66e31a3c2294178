//! Covariance spectrum, entropy effective rank and RankMe.

use std::fmt::Write as _;

use nalgebra::linalg::{SymmetricEigen, SymmetricTridiagonal};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{IqError, Result};
use crate::kernel;

/// Eigenvalues below this fraction of the largest are set to exactly 0.
pub const EIGEN_CLIP_RELATIVE: f64 = 1e-12;
pub const DEFAULT_RANKME_EPSILON: f64 = 1e-7;
pub const DEFAULT_LOG_FLOOR: f64 = 1e-15;
pub const CEV_THRESHOLDS: [f64; 3] = [0.90, 0.95, 0.99];
const QL_MAX_SWEEPS_PER_VALUE: usize = 60;

/// Row-major `n x d` matrix with the column means removed.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
    mean: Vec<f64>,
}

impl CenteredMatrix {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }
}

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    /// Builds from row-major data, symmetrized as `(A + A^T) / 2`.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim || dim == 0 {
            return Err(IqError::Shape(format!(
                "{} values for a {dim} x {dim} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(IqError::Config("matrix has non-finite entries".to_string()));
        }
        let mut m = Self { dim, data };
        for i in 0..dim {
            for j in i + 1..dim {
                let avg = 0.5 * (m.get(i, j) + m.get(j, i));
                m.data[i * dim + j] = avg;
                m.data[j * dim + i] = avg;
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }
    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }
}

/// `C = (1/n) E~^T E~`, `d x d`.
pub type CovarianceMatrix = SymmetricMatrix;

pub fn center_rows(set: &EmbeddingSet) -> CenteredMatrix {
    let (n, d) = (set.n(), set.d());
    let mut mean = vec![0.0f64; d];
    for row in set.rows() {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v as f64;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let data = set
        .rows()
        .flat_map(|row| row.iter().zip(&mean).map(|(&v, m)| v as f64 - m))
        .collect();
    CenteredMatrix { n, d, data, mean }
}

/// Entry `(a, b)` is the dot product of columns `a` and `b` over rows in
/// order, so the result does not depend on the worker count.
pub fn covariance(c: &CenteredMatrix) -> CovarianceMatrix {
    let (n, d) = (c.n, c.d);
    let mut cols = vec![0.0f64; n * d];
    for i in 0..n {
        for a in 0..d {
            cols[a * n + i] = c.data[i * d + a];
        }
    }
    pairwise_products(&cols, d, n, 1.0 / n as f64)
}

/// `G = (1/n) E~ E~^T`, `n x n`; same nonzero spectrum as the covariance.
pub fn gram(c: &CenteredMatrix) -> SymmetricMatrix {
    pairwise_products(&c.data, c.n, c.d, 1.0 / c.n as f64)
}

/// Symmetric matrix of scaled dot products between `count` vectors of length
/// `len` stored contiguously.
fn pairwise_products(vectors: &[f64], count: usize, len: usize, scale: f64) -> SymmetricMatrix {
    let mut out = vec![0.0f64; count * count];
    out.par_chunks_mut(count).enumerate().for_each(|(a, row)| {
        let va = &vectors[a * len..(a + 1) * len];
        for (b, slot) in row.iter_mut().enumerate().skip(a) {
            *slot = kernel::dot_f64(va, &vectors[b * len..(b + 1) * len]) * scale;
        }
    });
    for a in 0..count {
        for b in 0..a {
            out[a * count + b] = out[b * count + a];
        }
    }
    SymmetricMatrix {
        dim: count,
        data: out,
    }
}

/// All eigenvalues, descending, with values under `1e-12 * max` clipped to 0.
pub fn sym_eigenvalues(m: &SymmetricMatrix) -> Result<Vec<f64>> {
    let dim = m.dim;
    let (diag, off) = SymmetricTridiagonal::new(m.to_nalgebra()).unpack_tridiagonal();
    let mut d: Vec<f64> = diag.iter().copied().collect();
    let mut e: Vec<f64> = off.iter().copied().collect();
    e.push(0.0);
    tridiagonal_ql(&mut d, &mut e, QL_MAX_SWEEPS_PER_VALUE * dim.max(1))?;
    d.sort_by(|a, b| b.total_cmp(a));
    clip_spectrum(&mut d);
    Ok(d)
}

fn clip_spectrum(values: &mut [f64]) {
    let max = values.iter().copied().fold(0.0f64, f64::max);
    let floor = EIGEN_CLIP_RELATIVE * max;
    for v in values.iter_mut() {
        if *v < floor || max <= 0.0 {
            *v = 0.0;
        }
    }
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
/// `e[i]` couples `d[i]` and `d[i + 1]`; `e` has the same length as `d`.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], max_iter: usize) -> Result<()> {
    let n = d.len();
    let mut total = 0usize;
    for l in 0..n {
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            total += 1;
            if total > max_iter {
                return Err(IqError::ConvergenceFailure(max_iter));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Eigenpairs through nalgebra's full decomposition; returns the largest
/// scaled residual `||Cv - lv|| / (1 + |l|)`.
pub fn max_eigen_residual(m: &SymmetricMatrix) -> Result<f64> {
    let a = m.to_nalgebra();
    let eig = SymmetricEigen::try_new(a.clone(), f64::EPSILON, 0)
        .ok_or(IqError::ConvergenceFailure(0))?;
    let mut worst = 0.0f64;
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let r = (&a * v - v * lambda).norm() / (1.0 + lambda.abs());
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Which matrix the spectrum was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumPath {
    Covariance,
    Gram,
}

/// The `d` covariance eigenvalues of the centered set, descending. When
/// `n < d` they come from the smaller Gram matrix, padded with zeros.
pub fn covariance_spectrum(set: &EmbeddingSet) -> Result<(Vec<f64>, SpectrumPath)> {
    let centered = center_rows(set);
    if set.n() < set.d() {
        let mut values = sym_eigenvalues(&gram(&centered))?;
        values.resize(set.d(), 0.0);
        Ok((values, SpectrumPath::Gram))
    } else {
        Ok((
            sym_eigenvalues(&covariance(&centered))?,
            SpectrumPath::Covariance,
        ))
    }
}

/// Normalized spectral mass `p_l = l_l / sum(l)`.
pub fn spectral_weights(eigenvalues: &[f64]) -> Result<Vec<f64>> {
    if eigenvalues.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(IqError::Config(
            "eigenvalues must be finite and non-negative".to_string(),
        ));
    }
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return Err(IqError::AllZeroSpectrum);
    }
    Ok(eigenvalues.iter().map(|v| v / total).collect())
}

/// Shannon entropy (nats) of a probability vector, with `0 ln 0 = 0`.
fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
}

/// `exp` of the spectral entropy.
pub fn effective_rank(eigenvalues: &[f64]) -> Result<f64> {
    Ok(entropy(&spectral_weights(eigenvalues)?).exp())
}

/// `ln(r_ent) / ln(min(n, d))`, clamped to [0, 1]. Also reports whether the
/// clamp changed the value.
pub fn normalized_effective_rank_checked(r_ent: f64, n: usize, d: usize) -> Result<(f64, bool)> {
    let q = n.min(d);
    if q < 2 {
        return Err(IqError::DegenerateCap(q));
    }
    if !r_ent.is_finite() || r_ent <= 0.0 {
        return Err(IqError::Config(format!(
            "effective rank must be positive, got {r_ent}"
        )));
    }
    let raw = r_ent.ln() / (q as f64).ln();
    let clamped = raw.clamp(0.0, 1.0);
    Ok((clamped, clamped != raw))
}

pub fn normalized_effective_rank(r_ent: f64, n: usize, d: usize) -> Result<f64> {
    normalized_effective_rank_checked(r_ent, n, d).map(|(v, _)| v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankMeConfig {
    pub epsilon: f64,
    pub centered: bool,
}

impl Default for RankMeConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_RANKME_EPSILON,
            centered: false,
        }
    }
}

/// Singular values of the raw (or centered) embedding matrix, descending,
/// `min(n, d)` of them. Taken as square roots of the smaller Gram spectrum.
pub fn singular_values(set: &EmbeddingSet, centered: bool) -> Result<Vec<f64>> {
    let (n, d) = (set.n(), set.d());
    let rows: Vec<f64> = if centered {
        center_rows(set).data
    } else {
        set.data().iter().map(|&v| v as f64).collect()
    };
    let m = if n <= d {
        pairwise_products(&rows, n, d, 1.0)
    } else {
        let mut cols = vec![0.0f64; n * d];
        for i in 0..n {
            for a in 0..d {
                cols[a * n + i] = rows[i * d + a];
            }
        }
        pairwise_products(&cols, d, n, 1.0)
    };
    Ok(sym_eigenvalues(&m)?.into_iter().map(f64::sqrt).collect())
}

/// RankMe: exp-entropy of the L1-normalized singular values, each shifted
/// by `epsilon`.
pub fn rankme_score(set: &EmbeddingSet, cfg: &RankMeConfig) -> Result<f64> {
    if set.n() < 2 {
        return Err(IqError::EmptyPool(set.n()));
    }
    let sigma = singular_values(set, cfg.centered)?;
    let total: f64 = sigma.iter().sum();
    if total <= 0.0 {
        return Err(IqError::AllZeroSpectrum);
    }
    let p: Vec<f64> = sigma.iter().map(|s| s / total + cfg.epsilon).collect();
    Ok(entropy(&p).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentsToThreshold {
    pub threshold: f64,
    pub components: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainedVariance {
    pub cev: Vec<f64>,
    pub components_to: Vec<ComponentsToThreshold>,
}

pub fn cumulative_explained_variance(eigenvalues: &[f64]) -> Result<ExplainedVariance> {
    let total: f64 = spectral_weights(eigenvalues).map(|_| eigenvalues.iter().sum())?;
    let mut acc = 0.0f64;
    let cev: Vec<f64> = eigenvalues
        .iter()
        .map(|v| {
            acc += v;
            acc / total
        })
        .collect();
    let components_to = CEV_THRESHOLDS
        .iter()
        .map(|&threshold| ComponentsToThreshold {
            threshold,
            components: cev
                .iter()
                .position(|&c| c >= threshold - 1e-12)
                .map_or(cev.len(), |p| p + 1),
        })
        .collect();
    Ok(ExplainedVariance { cev, components_to })
}

pub fn log_spectrum(eigenvalues: &[f64], floor: f64) -> Vec<f64> {
    eigenvalues.iter().map(|&v| v.max(floor).ln()).collect()
}

/// Two-column `index,value` CSV.
pub fn series_csv(values: &[f64]) -> String {
    let mut out = String::from("index,value\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{i},{v}");
    }
    out
}

/// Everything derived from the covariance spectrum of one subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub eigenvalues: Vec<f64>,
    pub weights_p: Vec<f64>,
    pub r_ent: f64,
    pub r_norm: f64,
    pub r_norm_clamped: bool,
    pub q_cap: usize,
    pub cev: Vec<f64>,
    pub components_to: Vec<ComponentsToThreshold>,
    pub path: SpectrumPath,
    pub clip_relative: f64,
}

pub fn spectrum_summary(set: &EmbeddingSet) -> Result<SpectrumSummary> {
    let (eigenvalues, path) = covariance_spectrum(set)?;
    let weights_p = spectral_weights(&eigenvalues)?;
    let r_ent = entropy(&weights_p).exp();
    let (r_norm, r_norm_clamped) = normalized_effective_rank_checked(r_ent, set.n(), set.d())?;
    let ExplainedVariance { cev, components_to } = cumulative_explained_variance(&eigenvalues)?;
    Ok(SpectrumSummary {
        q_cap: set.n().min(set.d()),
        eigenvalues,
        weights_p,
        r_ent,
        r_norm,
        r_norm_clamped,
        cev,
        components_to,
        path,
        clip_relative: EIGEN_CLIP_RELATIVE,
    })
}
