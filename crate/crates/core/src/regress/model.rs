use serde::Serialize;

use super::design::{build_design, RowKey};
use super::ols::{fit, within_transform, FitResult, GroupMeans};
use super::{Estimator, ModelSpec, TEAM_SIZE};
use crate::corpus::{apply_filters_to, build_panel, Corpus, FilterSpec, PaperIdx};
use crate::disruption::ScoreMatrix;
use crate::error::{Error, Result};

/// A fitted model together with the row accounting that produced it.
#[derive(Clone, Debug, Serialize)]
pub struct ModelFit {
    pub fit: FitResult,
    /// Papers entering estimation.
    pub papers: usize,
    pub excluded_outliers: usize,
    pub dropped_undefined: usize,
    /// Author–paper rows; equals `papers` for pooled models.
    pub rows: usize,
    pub authors: Option<usize>,
    #[serde(skip)]
    pub group_means: Option<GroupMeans>,
}

impl ModelFit {
    /// `(estimate, se, p)` of the continuous team-size term.
    pub fn team_size(&self) -> Result<(f64, f64, f64)> {
        self.fit
            .term(TEAM_SIZE)
            .ok_or_else(|| Error::Invalid("model has no continuous team-size term".into()))
    }
}

/// Runs one model on the base sample `papers`.
///
/// Order of operations: outlier exclusion, removal of papers with an
/// undefined score, then (for fixed effects) the author panel rebuilt on
/// what is left with the per-author minimum applied again.
pub fn fit_model(corpus: &Corpus, scores: &ScoreMatrix, papers: &[PaperIdx], spec: &ModelSpec) -> Result<ModelFit> {
    spec.validate()?;
    let vi = scores
        .variant_index(&spec.dv)
        .ok_or_else(|| Error::Invalid(format!("score matrix has no {}", spec.dv)))?;

    let mut sample: Vec<PaperIdx> = papers.to_vec();
    sample.sort_unstable();
    sample.dedup();

    let mut excluded_outliers = 0;
    if let Some(rule) = spec.outliers {
        let filter = FilterSpec {
            outlier_max_refs: rule.max_refs,
            outlier_max_cites: rule.max_cites,
            ..FilterSpec::none()
        };
        let kept = apply_filters_to(corpus, &sample, &filter, Some(rule.window))?;
        excluded_outliers = sample.len() - kept.len();
        sample = kept.papers().to_vec();
    }

    let before = sample.len();
    sample.retain(|&p| scores.value(p, vi).is_some());
    let dropped_undefined = before - sample.len();

    match spec.estimator {
        Estimator::Pooled => {
            let rows: Vec<RowKey> = sample.iter().map(|&p| RowKey { paper: p, author: None }).collect();
            let design = build_design(corpus, scores, &rows, spec)?;
            let fit = fit(&design, spec.se_type)?;
            Ok(ModelFit {
                fit,
                papers: sample.len(),
                excluded_outliers,
                dropped_undefined,
                rows: rows.len(),
                authors: None,
                group_means: None,
            })
        }
        Estimator::AuthorFixedEffects => {
            let panel = build_panel(corpus, &sample, spec.min_papers_per_author);
            let rows: Vec<RowKey> = panel
                .rows
                .iter()
                .map(|&(a, p)| RowKey {
                    paper: p,
                    author: Some(a),
                })
                .collect();
            let mut in_panel: Vec<PaperIdx> = panel.rows.iter().map(|&(_, p)| p).collect();
            in_panel.sort_unstable();
            in_panel.dedup();
            let design = build_design(corpus, scores, &rows, spec)?;
            let groups = design
                .clusters
                .clone()
                .ok_or_else(|| Error::Invalid("fixed-effects panel is empty".into()))?;
            let (within, means) = within_transform(&design, &groups)?;
            let fit = fit(&within, spec.se_type)?;
            Ok(ModelFit {
                fit,
                papers: in_panel.len(),
                excluded_outliers,
                dropped_undefined,
                rows: rows.len(),
                authors: Some(panel.num_authors()),
                group_means: Some(means),
            })
        }
    }
}
