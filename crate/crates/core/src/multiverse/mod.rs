//! Factorial model universes: enumeration, execution, and the robustness
//! statistics computed over the resulting estimates.

mod export;
mod stats;
mod universe;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{apply_filters, Corpus, FilterSpec, PaperIdx, SampleView};
use crate::disruption::{batch_scores, ScoreMatrix};
use crate::error::Result;
use crate::regress::fit_model;

pub use export::{export_results, load_results, ExportedFiles};
pub use stats::{
    author_effect_percentiles, extremes, influence, influence_all, kernel_density, model_sd, percentile,
    sign_stability, Extreme, InfluenceStat, MultiverseSummary, SignTable,
};
pub use universe::{Cell, Dimension, OutlierLimits, SeChoice, UniverseSpec, DIMENSIONS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Ok {
        estimate: f64,
        se: f64,
        p: f64,
        n: usize,
    },
    Failed {
        reason: String,
    },
    /// The cell's settings contradict each other; never run.
    Infeasible {
        reason: String,
    },
}

impl Outcome {
    pub fn ok(&self) -> Option<(f64, f64, f64)> {
        match *self {
            Outcome::Ok { estimate, se, p, .. } => Some((estimate, se, p)),
            _ => None,
        }
    }

    pub fn estimate(&self) -> Option<f64> {
        self.ok().map(|(b, _, _)| b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelEstimate {
    pub model_id: usize,
    /// Option index per dimension.
    pub options: Vec<usize>,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedEstimate {
    pub name: String,
    pub settings: BTreeMap<String, String>,
    pub outcome: Outcome,
}

/// Team-size coefficients for every model of a universe, in canonical order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateSet {
    pub universe: String,
    pub dimensions: Vec<Dimension>,
    pub models: Vec<ModelEstimate>,
    pub named: Vec<NamedEstimate>,
    pub benchmark: Option<String>,
    pub alpha: f64,
}

impl EstimateSet {
    pub fn k(&self) -> usize {
        self.models.len()
    }

    pub fn ok_estimates(&self) -> impl Iterator<Item = (&ModelEstimate, (f64, f64, f64))> {
        self.models.iter().filter_map(|m| m.outcome.ok().map(|o| (m, o)))
    }

    pub fn benchmark_estimate(&self) -> Option<f64> {
        let name = self.benchmark.as_ref()?;
        self.named
            .iter()
            .find(|n| &n.name == name)
            .and_then(|n| n.outcome.estimate())
    }

    pub fn labels(&self, m: &ModelEstimate) -> Vec<&str> {
        self.dimensions
            .iter()
            .zip(&m.options)
            .map(|(d, &o)| d.options[o].as_str())
            .collect()
    }

    /// Builds a set from raw estimates, e.g. for planted test universes.
    pub fn from_outcomes(universe: &UniverseSpec, outcomes: Vec<Outcome>) -> Self {
        let cells = universe.enumerate(0);
        assert_eq!(cells.len(), outcomes.len(), "one outcome per cell");
        EstimateSet {
            universe: universe.name.clone(),
            dimensions: universe.dimensions.clone(),
            models: cells
                .into_iter()
                .zip(outcomes)
                .map(|(c, outcome)| ModelEstimate {
                    model_id: c.model_id,
                    options: c.options,
                    outcome,
                })
                .collect(),
            named: Vec::new(),
            benchmark: None,
            alpha: universe.alpha,
        }
    }
}

/// Fits every cell and named model on the papers of the score matrix.
///
/// Models run in parallel on the current rayon pool; results are collected
/// in canonical order, so the output does not depend on scheduling.
pub fn run_universe(corpus: &Corpus, scores: &ScoreMatrix, universe: &UniverseSpec) -> EstimateSet {
    let horizon = corpus.horizon();
    let base: &[PaperIdx] = scores.papers();
    let run = |model: &crate::regress::ModelSpec| -> Outcome {
        match fit_model(corpus, scores, base, model).and_then(|f| {
            let n = f.fit.n;
            f.team_size().map(|(b, se, p)| (b, se, p, n))
        }) {
            Ok((estimate, se, p, n)) if estimate.is_finite() && se.is_finite() && p.is_finite() => {
                Outcome::Ok { estimate, se, p, n }
            }
            Ok(_) => Outcome::Failed {
                reason: "non-finite estimate".into(),
            },
            Err(e) => Outcome::Failed {
                reason: e.to_string(),
            },
        }
    };

    let cells = universe.enumerate(horizon);
    let models: Vec<ModelEstimate> = cells
        .into_par_iter()
        .map(|cell| {
            let outcome = match &cell.model {
                Ok(m) => run(m),
                Err(reason) => Outcome::Infeasible {
                    reason: reason.clone(),
                },
            };
            ModelEstimate {
                model_id: cell.model_id,
                options: cell.options,
                outcome,
            }
        })
        .collect();

    let named: Vec<NamedEstimate> = universe
        .named_models
        .par_iter()
        .map(|(name, settings)| {
            let outcome = match universe.resolve(settings, horizon) {
                Ok(m) => run(&m),
                Err(e) => Outcome::Infeasible {
                    reason: e.to_string(),
                },
            };
            NamedEstimate {
                name: name.clone(),
                settings: settings.clone(),
                outcome,
            }
        })
        .collect();

    EstimateSet {
        universe: universe.name.clone(),
        dimensions: universe.dimensions.clone(),
        models,
        named,
        benchmark: universe.benchmark.clone(),
        alpha: universe.alpha,
    }
}

/// Applies the sample filters and scores every DI variant the universe
/// needs. When citedness is required without explicit windows, a paper
/// must be cited in every window the universe uses, so that log citation
/// controls are defined in all models.
pub fn prepare_scores(corpus: &Corpus, universe: &UniverseSpec, filter: &FilterSpec) -> Result<(SampleView, ScoreMatrix)> {
    universe.validate()?;
    let horizon = corpus.horizon();
    let mut filter = filter.clone();
    if filter.require_cited && filter.cited_windows.is_empty() {
        filter.cited_windows = universe.required_windows(horizon);
    }
    let sample = apply_filters(corpus, &filter, None)?;
    let variants = universe.required_variants(horizon);
    let scores = batch_scores(corpus, sample.papers(), &variants);
    Ok((sample, scores))
}

/// Filters, scores and fits a whole universe.
pub fn run_pipeline(corpus: &Corpus, universe: &UniverseSpec, filter: &FilterSpec) -> Result<EstimateSet> {
    let (_, scores) = prepare_scores(corpus, universe, filter)?;
    Ok(run_universe(corpus, &scores, universe))
}
