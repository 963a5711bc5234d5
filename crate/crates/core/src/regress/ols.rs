use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::design::RowKey;
use super::SeType;
use crate::error::{Error, Result};

/// Relative pivot size below which a column counts as collinear.
const RANK_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    pub y: Vec<f64>,
    /// `n × k`, one column per entry of `columns`.
    pub x: DMatrix<f64>,
    pub columns: Vec<String>,
    /// Row identities; may be empty for designs not built from a corpus.
    pub rows: Vec<RowKey>,
    /// Cluster label per row, required for clustered errors.
    pub clusters: Option<Vec<u32>>,
    /// Group effects swept out by a within transformation.
    pub absorbed: usize,
    /// Reference level per categorical block, e.g. `year -> 2000`.
    pub reference_levels: BTreeMap<String, String>,
    /// Rows discarded because the dependent variable was undefined.
    pub dropped_undefined: usize,
}

impl DesignMatrix {
    pub fn from_columns(y: Vec<f64>, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let n = y.len();
        if let Some((name, _)) = columns.iter().find(|(_, c)| c.len() != n) {
            return Err(Error::Invalid(format!("column {name} length differs from y ({n})")));
        }
        let k = columns.len();
        let x = DMatrix::from_fn(n, k, |i, j| columns[j].1[i]);
        Ok(DesignMatrix {
            y,
            x,
            columns: columns.into_iter().map(|(n, _)| n).collect(),
            rows: Vec::new(),
            clusters: None,
            absorbed: 0,
            reference_levels: BTreeMap::new(),
            dropped_undefined: 0,
        })
    }

    pub fn with_clusters(mut self, clusters: Vec<u32>) -> Self {
        self.clusters = Some(clusters);
        self
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub columns: Vec<String>,
    pub coefficients: Vec<f64>,
    pub se: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    pub n: usize,
    pub n_clusters: Option<usize>,
    pub r_squared: f64,
    /// `"centered"` for pooled fits, `"within"` after demeaning.
    pub r_squared_convention: &'static str,
    /// `n − K_eff`, with absorbed effects counted in `K_eff`.
    pub dof_residual: f64,
    /// Degrees of freedom of the t distribution behind `p`.
    pub dof_p: f64,
    pub k_eff: usize,
    pub se_type: SeType,
    #[serde(skip)]
    pub residuals: Vec<f64>,
    /// `(XᵀX)⁻¹`, kept for variance recomputation and checks.
    #[serde(skip)]
    pub bread: DMatrix<f64>,
}

impl FitResult {
    /// `(estimate, se, p)` of a named term.
    pub fn term(&self, name: &str) -> Option<(f64, f64, f64)> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some((self.coefficients[j], self.se[j], self.p[j]))
    }
}

/// Least squares by Householder QR.
pub fn fit(design: &DesignMatrix, se_type: SeType) -> Result<FitResult> {
    let n = design.n();
    let k = design.columns.len();
    let k_eff = k + design.absorbed;
    if k == 0 || n <= k_eff {
        return Err(Error::TooFewObservations { n, k: k_eff });
    }
    let x = &design.x;

    let qr = x.clone().qr();
    let r = qr.r();
    let collinear: Vec<String> = (0..k)
        .filter(|&j| {
            let norm = x.column(j).norm();
            norm == 0.0 || r[(j, j)].abs() <= RANK_TOL * norm
        })
        .map(|j| design.columns[j].clone())
        .collect();
    if !collinear.is_empty() {
        return Err(Error::RankDeficient(collinear));
    }

    let mut qty = DVector::from_column_slice(&design.y);
    qr.q_tr_mul(&mut qty);
    let beta = r
        .solve_upper_triangular(&qty.rows(0, k).into_owned())
        .ok_or_else(|| Error::RankDeficient(design.columns.clone()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::RankDeficient(design.columns.clone()))?;
    let bread = &r_inv * r_inv.transpose();

    let fitted = x * &beta;
    let residuals: Vec<f64> = design.y.iter().zip(fitted.iter()).map(|(y, f)| y - f).collect();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let y_mean = design.y.iter().sum::<f64>() / n as f64;
    let sst: f64 = design.y.iter().map(|y| (y - y_mean).powi(2)).sum();
    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { f64::NAN };

    let nf = n as f64;
    let dof_residual = (n - k_eff) as f64;
    let (se, n_clusters, dof_p) = match se_type {
        SeType::Classical => {
            let sigma2 = ssr / dof_residual;
            let se = (0..k).map(|j| (sigma2 * bread[(j, j)]).max(0.0).sqrt()).collect();
            (se, None, dof_residual)
        }
        SeType::Hc1 => {
            let groups: Vec<u32> = (0..n as u32).collect();
            let c = nf / dof_residual;
            (sandwich_diagonal(&bread, x, &residuals, &groups, c), None, dof_residual)
        }
        SeType::ClusterAuthor => {
            let groups = design
                .clusters
                .as_ref()
                .ok_or_else(|| Error::Invalid("clustered errors need cluster labels".into()))?;
            let g = count_distinct(groups);
            if g < 2 {
                return Err(Error::TooFewClusters(g));
            }
            let gf = g as f64;
            let c = (gf / (gf - 1.0)) * ((nf - 1.0) / dof_residual);
            (sandwich_diagonal(&bread, x, &residuals, groups, c), Some(g), gf - 1.0)
        }
    };

    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let t: Vec<f64> = coefficients.iter().zip(&se).map(|(b, s)| b / s).collect();
    let p = t.iter().map(|&t| two_sided_p(t, dof_p)).collect();
    Ok(FitResult {
        columns: design.columns.clone(),
        coefficients,
        se,
        t,
        p,
        n,
        n_clusters,
        r_squared,
        r_squared_convention: if design.absorbed > 0 { "within" } else { "centered" },
        dof_residual,
        dof_p,
        k_eff,
        se_type,
        residuals,
        bread,
    })
}

fn count_distinct(labels: &[u32]) -> usize {
    let mut v = labels.to_vec();
    v.sort_unstable();
    v.dedup();
    v.len()
}

fn two_sided_p(t: f64, dof: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    let dist = StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// Standard errors from `c · A (Σ_g s_g s_gᵀ) A` with `s_g = Σ_{i∈g} x_i e_i`.
///
/// Groups are visited in ascending label order and rows in their original
/// order, so the result is reproducible bit for bit.
pub(crate) fn sandwich_diagonal(bread: &DMatrix<f64>, x: &DMatrix<f64>, e: &[f64], groups: &[u32], c: f64) -> Vec<f64> {
    let n = e.len();
    let k = x.ncols();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| groups[i]);

    let mut meat = vec![0.0; k * k];
    let mut s = vec![0.0; k];
    let mut i = 0;
    while i < n {
        let g = groups[order[i]];
        s.fill(0.0);
        while i < n && groups[order[i]] == g {
            let row = order[i];
            for (j, sj) in s.iter_mut().enumerate() {
                *sj += x[(row, j)] * e[row];
            }
            i += 1;
        }
        for j in 0..k {
            for l in 0..k {
                meat[j * k + l] += s[j] * s[l];
            }
        }
    }

    (0..k)
        .map(|d| {
            let mut v = 0.0;
            for j in 0..k {
                let mut t = 0.0;
                for m in 0..k {
                    t += bread[(d, m)] * meat[m * k + j];
                }
                v += t * bread[(j, d)];
            }
            (c * v).max(0.0).sqrt()
        })
        .collect()
}

/// Group means removed by [`within_transform`], for recovering fixed effects.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupMeans {
    /// Group labels, ascending.
    pub groups: Vec<u32>,
    pub counts: Vec<usize>,
    pub y: Vec<f64>,
    /// Per group, the mean of every retained column.
    pub x: Vec<Vec<f64>>,
    pub columns: Vec<String>,
}

/// Subtracts group means from `y` and every column, dropping the intercept
/// and any column left identically zero.
pub fn within_transform(design: &DesignMatrix, groups: &[u32]) -> Result<(DesignMatrix, GroupMeans)> {
    let n = design.n();
    if groups.len() != n {
        return Err(Error::Invalid(format!(
            "{} group labels for {n} rows",
            groups.len()
        )));
    }
    let mut labels = groups.to_vec();
    labels.sort_unstable();
    labels.dedup();
    let slot: Vec<usize> = groups
        .iter()
        .map(|g| labels.binary_search(g).expect("label collected"))
        .collect();
    let mut counts = vec![0usize; labels.len()];
    for &s in &slot {
        counts[s] += 1;
    }
    if let Some(i) = counts.iter().position(|&c| c < 2) {
        return Err(Error::Invalid(format!(
            "group {} has a single row; within estimation needs at least two",
            labels[i]
        )));
    }

    let group_means = |v: &[f64]| -> Vec<f64> {
        let mut sums = vec![0.0; labels.len()];
        for (i, &s) in slot.iter().enumerate() {
            sums[s] += v[i];
        }
        sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect()
    };

    let y_means = group_means(&design.y);
    let y: Vec<f64> = design.y.iter().zip(&slot).map(|(v, &s)| v - y_means[s]).collect();

    let mut kept: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    for (j, name) in design.columns.iter().enumerate() {
        if name == "intercept" {
            continue;
        }
        let col: Vec<f64> = design.x.column(j).iter().copied().collect();
        let means = group_means(&col);
        let demeaned: Vec<f64> = col.iter().zip(&slot).map(|(v, &s)| v - means[s]).collect();
        let scale = col.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let spread = demeaned.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if spread <= 1e-12 * scale.max(1.0) {
            log::warn!("column {name} is constant within every group and was dropped");
            continue;
        }
        kept.push((name.clone(), demeaned, means));
    }

    let columns: Vec<String> = kept.iter().map(|(n, _, _)| n.clone()).collect();
    let x_means = (0..labels.len())
        .map(|g| kept.iter().map(|(_, _, m)| m[g]).collect())
        .collect();
    let k = kept.len();
    let x = DMatrix::from_fn(n, k, |i, j| kept[j].1[i]);
    let out = DesignMatrix {
        y,
        x,
        columns: columns.clone(),
        rows: design.rows.clone(),
        clusters: Some(groups.to_vec()),
        absorbed: labels.len(),
        reference_levels: design.reference_levels.clone(),
        dropped_undefined: design.dropped_undefined,
    };
    let means = GroupMeans {
        groups: labels,
        counts,
        y: y_means,
        x: x_means,
        columns,
    };
    Ok((out, means))
}

/// `α̂_g = ȳ_g − x̄_g β̂` for every group of a within fit.
pub fn recover_author_effects(fit: &FitResult, means: &GroupMeans) -> Result<Vec<(u32, f64)>> {
    if fit.columns != means.columns {
        return Err(Error::Invalid(
            "fit columns do not match the stored group means".into(),
        ));
    }
    Ok(means
        .groups
        .iter()
        .enumerate()
        .map(|(g, &label)| {
            let xb: f64 = means.x[g]
                .iter()
                .zip(&fit.coefficients)
                .map(|(x, b)| x * b)
                .sum();
            (label, means.y[g] - xb)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub term: String,
    pub estimate: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p: f64,
}

/// Estimates with `(1 − alpha)` confidence intervals from the fit's t distribution.
pub fn summarize_fit(fit: &FitResult, alpha: f64) -> Vec<ReportRow> {
    let q = StudentsT::new(0.0, 1.0, fit.dof_p)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - alpha / 2.0);
    fit.columns
        .iter()
        .enumerate()
        .map(|(j, term)| {
            let (b, se) = (fit.coefficients[j], fit.se[j]);
            ReportRow {
                term: term.clone(),
                estimate: b,
                se,
                ci_low: b - q * se,
                ci_high: b + q * se,
                p: fit.p[j],
            }
        })
        .collect()
}
