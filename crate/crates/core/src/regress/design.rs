use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ols::DesignMatrix;
use super::{Covariate, ModelSpec, TeamSizeCoding, TEAM_SIZE};
use crate::corpus::{AuthorIdx, Corpus, PaperIdx};
use crate::disruption::{citation_count, ScoreMatrix};
use crate::error::{Error, Result};

/// A paper row, or an author–paper row of the fixed-effects panel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowKey {
    pub paper: PaperIdx,
    pub author: Option<AuthorIdx>,
}

/// Builds the regression design for `spec` on `rows`.
///
/// Rows whose disruption score is undefined are dropped and counted. The
/// response is z-scored with the sample SD over the remaining rows. Every
/// design carries an intercept; the within transformation removes it.
pub fn build_design(corpus: &Corpus, scores: &ScoreMatrix, rows: &[RowKey], spec: &ModelSpec) -> Result<DesignMatrix> {
    let vi = scores
        .variant_index(&spec.dv)
        .ok_or_else(|| Error::Invalid(format!("score matrix has no {}", spec.dv)))?;

    let mut keys = Vec::with_capacity(rows.len());
    let mut raw = Vec::with_capacity(rows.len());
    for &r in rows {
        if let Some(v) = scores.value(r.paper, vi) {
            keys.push(r);
            raw.push(v);
        }
    }
    let dropped = rows.len() - keys.len();
    let y = standardize(&raw)?;

    let n = keys.len();
    let papers: Vec<PaperIdx> = keys.iter().map(|r| r.paper).collect();
    let mut columns: Vec<(String, Vec<f64>)> = vec![("intercept".into(), vec![1.0; n])];
    let mut references = BTreeMap::new();

    let team: Vec<u32> = papers.iter().map(|&p| corpus.paper(p).team_size).collect();
    match spec.team_size_coding {
        TeamSizeCoding::Continuous => {
            columns.push((TEAM_SIZE.into(), team.iter().map(|&t| f64::from(t)).collect()));
        }
        TeamSizeCoding::Dummies => {
            let (reference, dummies) = dummies("team_size", &team, |levels| levels.first().copied());
            if let Some(r) = reference {
                references.insert("team_size".into(), r.to_string());
            }
            columns.extend(dummies);
        }
    }

    if spec.has(Covariate::YearDummies) {
        let years: Vec<i32> = papers.iter().map(|&p| corpus.paper(p).year).collect();
        let (reference, cols) = dummies("year", &years, |levels| levels.first().copied());
        if let Some(r) = reference {
            references.insert("year".into(), r.to_string());
        }
        columns.extend(cols);
    }

    if spec.has(Covariate::FieldDummies) {
        let fields: Vec<&str> = papers.iter().map(|&p| corpus.paper(p).field.as_str()).collect();
        let (reference, cols) = dummies("field", &fields, |levels| {
            levels
                .iter()
                .find(|l| **l == "Biology")
                .or_else(|| levels.first())
                .copied()
        });
        if let Some(r) = reference {
            references.insert("field".into(), r.to_string());
        }
        columns.extend(cols);
    }

    if spec.has(Covariate::LogCites) {
        let counts = papers
            .iter()
            .map(|&p| citation_count(corpus, p, spec.dv.window) as f64);
        columns.extend(log_pair("log_cites", corpus, &papers, counts)?);
    }
    if spec.has(Covariate::LogRefs) {
        let counts = papers.iter().map(|&p| f64::from(corpus.total_references(p)));
        columns.extend(log_pair("log_refs", corpus, &papers, counts)?);
    }

    let mut design = DesignMatrix::from_columns(y, columns)?;
    if keys.iter().all(|r| r.author.is_some()) && !keys.is_empty() {
        design.clusters = Some(
            keys.iter()
                .map(|r| r.author.expect("checked").get() as u32)
                .collect(),
        );
    }
    design.rows = keys;
    design.reference_levels = references;
    design.dropped_undefined = dropped;
    Ok(design)
}

/// z-scores with the sample (n − 1) standard deviation.
fn standardize(v: &[f64]) -> Result<Vec<f64>> {
    let n = v.len();
    if n < 2 {
        return Err(Error::ZeroVariance);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let sd = var.sqrt();
    Ok(v.iter().map(|x| (x - mean) / sd).collect())
}

/// `ln(count)` and its square; every count must be positive.
fn log_pair(
    name: &str,
    corpus: &Corpus,
    papers: &[PaperIdx],
    counts: impl Iterator<Item = f64>,
) -> Result<Vec<(String, Vec<f64>)>> {
    let mut logs = Vec::with_capacity(papers.len());
    for (c, &p) in counts.zip(papers) {
        if c <= 0.0 {
            return Err(Error::Invalid(format!(
                "{name}: paper {} has a non-positive count",
                corpus.paper(p).id
            )));
        }
        logs.push(c.ln());
    }
    let squares = logs.iter().map(|l| l * l).collect();
    Ok(vec![(name.to_string(), logs), (format!("{name}_sq"), squares)])
}

/// Indicator columns for every level except the reference. Levels seen in
/// fewer than two rows are folded into the reference.
fn dummies<T: Ord + Copy + ToString>(
    prefix: &str,
    values: &[T],
    pick_reference: impl Fn(&[T]) -> Option<T>,
) -> (Option<T>, Vec<(String, Vec<f64>)>) {
    let mut counts: BTreeMap<T, usize> = BTreeMap::new();
    for &v in values {
        *counts.entry(v).or_default() += 1;
    }
    let levels: Vec<T> = counts.keys().copied().collect();
    let Some(reference) = pick_reference(&levels) else {
        return (None, Vec::new());
    };
    let mut cols = Vec::new();
    for (&level, &count) in &counts {
        if level == reference {
            continue;
        }
        if count < 2 {
            log::warn!(
                "{prefix} level {} has {count} row(s); merged into reference {}",
                level.to_string(),
                reference.to_string()
            );
            continue;
        }
        let col = values.iter().map(|&v| if v == level { 1.0 } else { 0.0 }).collect();
        cols.push((format!("{prefix}_{}", level.to_string()), col));
    }
    (Some(reference), cols)
}
