use serde::Serialize;

use super::{Corpus, SampleView};
use crate::disruption::{citation_count, NrMode, ScoreMatrix, WindowSpec};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariableStats {
    pub name: String,
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldShare {
    pub field: String,
    pub count: usize,
    pub percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatsTable {
    pub rows: Vec<VariableStats>,
    pub fields: Vec<FieldShare>,
}

/// Summary statistics over the sample.
///
/// Variable names: `team_size`, `year`, `references` (total, linked and
/// unlinked), `citations[@window]` (horizon by default) and
/// `DI<b>[@window][/legacy]`. A disruption variable without a window takes
/// the first matching variant in `scores`; papers whose score is undefined
/// are left out of that row.
pub fn descriptive_stats(
    corpus: &Corpus,
    sample: &SampleView,
    scores: Option<&ScoreMatrix>,
    variables: &[&str],
    scale_di_by_100: bool,
) -> Result<StatsTable> {
    let mut rows = Vec::with_capacity(variables.len());
    for &name in variables {
        let values = variable_values(corpus, sample, scores, name, scale_di_by_100)?;
        rows.push(summarize(name, &values));
    }
    let total = sample.len();
    let fields = corpus
        .field_counts(sample.papers())
        .into_iter()
        .map(|(field, count)| FieldShare {
            field: field.to_string(),
            count,
            percent: if total == 0 {
                0.0
            } else {
                100.0 * count as f64 / total as f64
            },
        })
        .collect();
    Ok(StatsTable { rows, fields })
}

fn variable_values(
    corpus: &Corpus,
    sample: &SampleView,
    scores: Option<&ScoreMatrix>,
    name: &str,
    scale_di_by_100: bool,
) -> Result<Vec<f64>> {
    let papers = sample.papers();
    let unknown = || Error::Invalid(format!("unknown variable {name:?}"));
    match name {
        "team_size" => return Ok(papers.iter().map(|&p| f64::from(corpus.paper(p).team_size)).collect()),
        "year" => return Ok(papers.iter().map(|&p| f64::from(corpus.paper(p).year)).collect()),
        "references" => return Ok(papers.iter().map(|&p| f64::from(corpus.total_references(p))).collect()),
        _ => {}
    }
    if let Some(rest) = name.strip_prefix("citations") {
        let window = match rest.strip_prefix('@') {
            Some(w) => WindowSpec::parse_with_horizon(w, corpus.horizon())?,
            None if rest.is_empty() => WindowSpec::Horizon(corpus.horizon()),
            None => return Err(unknown()),
        };
        return Ok(papers
            .iter()
            .map(|&p| citation_count(corpus, p, window) as f64)
            .collect());
    }
    let rest = name.strip_prefix("DI").ok_or_else(unknown)?;
    let (rest, mode) = match rest.strip_suffix("/legacy") {
        Some(r) => (r, NrMode::Legacy),
        None => (rest.strip_suffix("/consistent").unwrap_or(rest), NrMode::Consistent),
    };
    let (b, window) = match rest.split_once('@') {
        Some((b, w)) => (b, Some(WindowSpec::parse_with_horizon(w, corpus.horizon())?)),
        None => (rest, None),
    };
    let threshold: u32 = b.parse().map_err(|_| unknown())?;
    let scores = scores.ok_or_else(|| Error::Invalid(format!("variable {name:?} needs a score matrix")))?;
    let vi = scores
        .variants()
        .iter()
        .position(|v| {
            v.threshold == threshold && v.nr_mode == mode && window.is_none_or(|w| w == v.window)
        })
        .ok_or_else(|| Error::Invalid(format!("no scores for {name:?}")))?;
    let scale = if scale_di_by_100 { 100.0 } else { 1.0 };
    Ok(papers
        .iter()
        .filter_map(|&p| scores.value(p, vi))
        .map(|v| v * scale)
        .collect())
}

fn summarize(name: &str, values: &[f64]) -> VariableStats {
    let n = values.len();
    if n == 0 {
        return VariableStats {
            name: name.to_string(),
            n,
            min: f64::NAN,
            max: f64::NAN,
            mean: f64::NAN,
            sd: f64::NAN,
        };
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    VariableStats {
        name: name.to_string(),
        n,
        min,
        max,
        mean,
        sd,
    }
}
