use serde::{Deserialize, Serialize};

use super::{generate, GroundTruth, SynthSpec};
use crate::corpus::{apply_filters, Corpus, FilterSpec};
use crate::disruption::{batch_scores, NrMode, Variant, WindowSpec};
use crate::error::{Error, Result};
use crate::multiverse::{model_sd, run_pipeline, UniverseSpec};
use crate::regress::{fit_model, Covariate, Estimator, ModelSpec};

/// The two fixed-effects regressions compared by [`bias_probe`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub filter: FilterSpec,
    /// No controls for publication year or citation volume.
    pub uncontrolled: ModelSpec,
    /// Year dummies plus log citation and reference counts.
    pub controlled: ModelSpec,
    /// Standardized slope implied by the planted effect, when known.
    /// Zero is assumed for `δ = 0`.
    pub target_slope: Option<f64>,
}

impl ProbeSpec {
    /// DI1 over the corpus horizon for papers published in `cohort`.
    pub fn standard(horizon: i32, cohort: (i32, i32)) -> Self {
        let dv = Variant::new(1, WindowSpec::Horizon(horizon), NrMode::Consistent);
        let uncontrolled = ModelSpec::new(dv, Estimator::AuthorFixedEffects);
        let controlled = uncontrolled.clone().with_covariates(&[
            Covariate::YearDummies,
            Covariate::LogCites,
            Covariate::LogRefs,
        ]);
        ProbeSpec {
            filter: FilterSpec {
                year_range: Some(cohort),
                ..FilterSpec::default()
            },
            uncontrolled,
            controlled,
            target_slope: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeEstimate {
    pub estimate: f64,
    pub se: f64,
    pub p: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub planted_delta: f64,
    pub target_slope: Option<f64>,
    pub uncontrolled: ProbeEstimate,
    pub controlled: ProbeEstimate,
    /// Whether the controlled estimate lies closer to the target.
    pub controlled_closer: Option<bool>,
}

/// Fits the uncontrolled and the controlled specification on one corpus and
/// compares both with the planted effect.
pub fn bias_probe(corpus: &Corpus, truth: &GroundTruth, probe: &ProbeSpec) -> Result<ProbeReport> {
    let mut filter = probe.filter.clone();
    let windows = [probe.uncontrolled.dv.window, probe.controlled.dv.window];
    if filter.require_cited && filter.cited_windows.is_empty() {
        filter.cited_windows = windows.to_vec();
    }
    let sample = apply_filters(corpus, &filter, None)?;
    let mut variants = vec![probe.uncontrolled.dv];
    if probe.controlled.dv != probe.uncontrolled.dv {
        variants.push(probe.controlled.dv);
    }
    let scores = batch_scores(corpus, sample.papers(), &variants);
    let run = |m: &ModelSpec| -> Result<ProbeEstimate> {
        let f = fit_model(corpus, &scores, sample.papers(), m)?;
        let (estimate, se, p) = f.team_size()?;
        Ok(ProbeEstimate {
            estimate,
            se,
            p,
            n: f.fit.n,
        })
    };
    let uncontrolled = run(&probe.uncontrolled)?;
    let controlled = run(&probe.controlled)?;
    let target_slope = probe
        .target_slope
        .or((truth.planted_delta == 0.0).then_some(0.0));
    let controlled_closer =
        target_slope.map(|t| (controlled.estimate - t).abs() < (uncontrolled.estimate - t).abs());
    Ok(ProbeReport {
        planted_delta: truth.planted_delta,
        target_slope,
        uncontrolled,
        controlled,
        controlled_closer,
    })
}

/// Universe means `b̄` over independent corpora, one per seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub planted_delta: f64,
    pub seeds: Vec<u64>,
    pub means: Vec<f64>,
}

impl MonteCarlo {
    pub fn mean(&self) -> f64 {
        self.means.iter().sum::<f64>() / self.means.len() as f64
    }

    /// Sample variance of the per-corpus means.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let n = self.means.len() as f64;
        self.means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    }

    pub fn std_error(&self) -> f64 {
        (self.variance() / self.means.len() as f64).sqrt()
    }
}

/// Generates one corpus per seed and records the universe mean of each.
pub fn monte_carlo(
    spec: &SynthSpec,
    seeds: &[u64],
    universe: &UniverseSpec,
    filter: &FilterSpec,
) -> Result<MonteCarlo> {
    let mut means = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let (corpus, _) = generate(&SynthSpec {
            seed,
            ..spec.clone()
        })?;
        let set = run_pipeline(&corpus, universe, filter)?;
        means.push(model_sd(&set)?.mean);
    }
    Ok(MonteCarlo {
        planted_delta: spec.planted_delta,
        seeds: seeds.to_vec(),
        means,
    })
}

/// Secant search for the `planted_delta` whose Monte Carlo universe mean
/// hits `target`, starting from `0` and `spec.planted_delta` (which must
/// differ from zero). Stops once the mean is within `tol` of the target.
pub fn calibrate_delta(
    spec: &SynthSpec,
    target: f64,
    tol: f64,
    seeds: &[u64],
    universe: &UniverseSpec,
    filter: &FilterSpec,
) -> Result<MonteCarlo> {
    let at = |delta: f64| {
        monte_carlo(
            &SynthSpec {
                planted_delta: delta,
                ..spec.clone()
            },
            seeds,
            universe,
            filter,
        )
    };
    let mut lo = at(0.0)?;
    let mut hi = at(spec.planted_delta)?;
    for _ in 0..8 {
        if (hi.mean() - target).abs() <= tol {
            return Ok(hi);
        }
        let slope = (hi.mean() - lo.mean()) / (hi.planted_delta - lo.planted_delta);
        if !slope.is_finite() || slope == 0.0 {
            break;
        }
        let next = hi.planted_delta + (target - hi.mean()) / slope;
        lo = hi;
        hi = at(next)?;
    }
    if (hi.mean() - target).abs() <= tol {
        Ok(hi)
    } else {
        Err(Error::Invalid(format!(
            "calibration did not reach {target} within {tol}; last delta {} gave {}",
            hi.planted_delta,
            hi.mean()
        )))
    }
}
