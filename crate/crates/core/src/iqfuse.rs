//! IQ fusion and the rank-agreement validation suite.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{IqError, Result};

pub const DEFAULT_ALPHA: f64 = 0.2;
pub const DEFAULT_BETA: f64 = 0.8;
const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Convex fusion weights for (consistency, normalized effective rank).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for FusionWeights {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
        }
    }
}

impl FusionWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let w = Self { alpha, beta };
        w.validate()?;
        Ok(w)
    }

    /// `alpha = 1 - beta`.
    pub fn from_beta(beta: f64) -> Result<Self> {
        Self::new(1.0 - beta, beta)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha >= 0.0
            && self.beta >= 0.0
            && ((self.alpha + self.beta) - 1.0).abs() <= SIMPLEX_TOLERANCE;
        if ok {
            Ok(())
        } else {
            Err(IqError::WeightError {
                alpha: self.alpha,
                beta: self.beta,
            })
        }
    }
}

/// `alpha * mean_consis + beta * er_norm`.
pub fn iq_score(mean_consis: f64, er_norm: f64, alpha: f64, beta: f64) -> Result<f64> {
    FusionWeights::new(alpha, beta)?;
    for (name, v) in [
        ("mean consistency", mean_consis),
        ("normalized rank", er_norm),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(IqError::Config(format!(
                "{name} must lie in [0, 1], got {v}"
            )));
        }
    }
    Ok(alpha * mean_consis + beta * er_norm)
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(IqError::LengthMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(IqError::Config(
            "correlation needs at least 2 points".to_string(),
        ));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(IqError::Config(
            "correlation inputs must be finite".to_string(),
        ));
    }
    Ok(())
}

/// Product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(IqError::ZeroVariance("x"));
    }
    if syy == 0.0 {
        return Err(IqError::ZeroVariance("y"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their rank range.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Kendall tau-b: `(C - D) / sqrt((C + D + T_x)(C + D + T_y))`, where `T_x`
/// counts pairs tied only in `x` and `T_y` pairs tied only in `y`.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let (mut concordant, mut discordant, mut tx, mut ty) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let sx = x[i].total_cmp(&x[j]) as i8;
            let sy = y[i].total_cmp(&y[j]) as i8;
            match (sx, sy) {
                (0, 0) => {}
                (0, _) => tx += 1,
                (_, 0) => ty += 1,
                _ if sx == sy => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let base = concordant + discordant;
    // pairs not tied in x are C + D + T_y
    if base + ty == 0 {
        return Err(IqError::ZeroVariance("x"));
    }
    if base + tx == 0 {
        return Err(IqError::ZeroVariance("y"));
    }
    let denom = (((base + tx) as f64) * ((base + ty) as f64)).sqrt();
    Ok((concordant as f64 - discordant as f64) / denom)
}

/// Intrinsic signals and downstream accuracy for a set of dataset settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingsSeries {
    pub names: Vec<String>,
    pub accuracy: Vec<f64>,
    pub consis: Vec<f64>,
    pub er_norm: Vec<f64>,
    pub rankme: Option<Vec<f64>>,
}

impl SettingsSeries {
    pub fn new(
        names: Vec<String>,
        accuracy: Vec<f64>,
        consis: Vec<f64>,
        er_norm: Vec<f64>,
        rankme: Option<Vec<f64>>,
    ) -> Result<Self> {
        let s = Self {
            names,
            accuracy,
            consis,
            er_norm,
            rankme,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.names.len();
        if n < 2 {
            return Err(IqError::format("series", "need at least 2 settings"));
        }
        let mut columns = vec![&self.accuracy, &self.consis, &self.er_norm];
        if let Some(r) = &self.rankme {
            columns.push(r);
        }
        for c in columns {
            if c.len() != n {
                return Err(IqError::format("series", "columns have unequal lengths"));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(IqError::format("series", "non-finite value"));
            }
        }
        let mut seen = HashSet::new();
        for name in &self.names {
            if !seen.insert(name) {
                return Err(IqError::format(
                    "series",
                    format!("duplicate setting name '{name}'"),
                ));
            }
        }
        Ok(())
    }

    /// Reads `name,accuracy,consis,er_norm[,rankme]` CSV with a header row.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| IqError::format("line 1", e.to_string()))?
            .clone();
        let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
        let need = |name: &'static str| {
            col(name).ok_or_else(|| IqError::format("line 1", format!("missing column '{name}'")))
        };
        let (ni, ai, ci, ei) = (
            need("name")?,
            need("accuracy")?,
            need("consis")?,
            need("er_norm")?,
        );
        let ri = col("rankme");

        let (mut names, mut acc, mut consis, mut er) = (vec![], vec![], vec![], vec![]);
        let mut rankme = ri.map(|_| Vec::new());
        for (line, rec) in reader.records().enumerate() {
            let location = format!("line {}", line + 2);
            let rec = rec.map_err(|e| IqError::format(location.clone(), e.to_string()))?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| {
                        IqError::format(location.clone(), format!("column {i} is not numeric"))
                    })
            };
            names.push(rec.get(ni).unwrap_or_default().to_string());
            acc.push(num(ai)?);
            consis.push(num(ci)?);
            er.push(num(ei)?);
            if let (Some(i), Some(r)) = (ri, rankme.as_mut()) {
                r.push(num(i)?);
            }
        }
        Self::new(names, acc, consis, er, rankme)
    }

    /// IQ of every setting under the given weights.
    pub fn iq(&self, weights: FusionWeights) -> Result<Vec<f64>> {
        self.consis
            .iter()
            .zip(&self.er_norm)
            .map(|(&c, &r)| iq_score(c, r, weights.alpha, weights.beta))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSweepRow {
    pub beta: f64,
    pub spearman: f64,
    pub pearson: f64,
}

/// `0.00, 0.05, ..., 1.00`.
pub fn default_beta_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

/// Correlation of IQ with accuracy for each `beta` (with `alpha = 1 - beta`).
pub fn beta_sweep(series: &SettingsSeries, grid: &[f64]) -> Result<Vec<BetaSweepRow>> {
    series.validate()?;
    grid.iter()
        .map(|&beta| {
            if !(0.0..=1.0).contains(&beta) {
                return Err(IqError::Config(format!("beta {beta} outside [0, 1]")));
            }
            let iq = series.iq(FusionWeights::from_beta(beta)?)?;
            Ok(BetaSweepRow {
                beta,
                spearman: spearman(&iq, &series.accuracy)?,
                pearson: pearson(&iq, &series.accuracy)?,
            })
        })
        .collect()
}

pub fn beta_sweep_csv(rows: &[BetaSweepRow]) -> String {
    let mut out = String::from("beta,spearman,pearson\n");
    for r in rows {
        let _ = writeln!(out, "{:.2},{:.6},{:.6}", r.beta, r.spearman, r.pearson);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementRow {
    pub metric: String,
    pub spearman: f64,
    pub pearson: f64,
    pub kendall_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub schema_version: u32,
    pub settings: Vec<String>,
    pub weights: FusionWeights,
    pub rows: Vec<AgreementRow>,
}

impl AgreementReport {
    pub fn row(&self, metric: &str) -> Option<&AgreementRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,spearman,pearson,kendall_tau\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6}",
                r.metric, r.spearman, r.pearson, r.kendall_tau
            );
        }
        out
    }
}

fn agreement_row(metric: &str, scores: &[f64], accuracy: &[f64]) -> Result<AgreementRow> {
    Ok(AgreementRow {
        metric: metric.to_string(),
        spearman: spearman(scores, accuracy)?,
        pearson: pearson(scores, accuracy)?,
        kendall_tau: kendall_tau_b(scores, accuracy)?,
    })
}

/// Spearman, Pearson and Kendall tau-b of each intrinsic signal against
/// accuracy: RankMe (when present), ER-only, Consis-only and IQ.
pub fn rank_agreement_report(series: &SettingsSeries) -> Result<AgreementReport> {
    rank_agreement_report_with(series, FusionWeights::default())
}

pub fn rank_agreement_report_with(
    series: &SettingsSeries,
    weights: FusionWeights,
) -> Result<AgreementReport> {
    series.validate()?;
    let acc = &series.accuracy;
    let mut rows = Vec::new();
    if let Some(r) = &series.rankme {
        rows.push(agreement_row("RankMe", r, acc)?);
    }
    rows.push(agreement_row("ER-only", &series.er_norm, acc)?);
    rows.push(agreement_row("Consis-only", &series.consis, acc)?);
    rows.push(agreement_row("IQ", &series.iq(weights)?, acc)?);
    Ok(AgreementReport {
        schema_version: crate::dataio::SCHEMA_VERSION,
        settings: series.names.clone(),
        weights,
        rows,
    })
}
