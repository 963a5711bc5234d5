use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EstimateSet, ModelEstimate};
use crate::error::{Error, Result};

/// Four-way split of the successful models by sign and significance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignTable {
    pub negative_significant: usize,
    pub negative_not_significant: usize,
    pub positive_significant: usize,
    pub positive_not_significant: usize,
}

impl SignTable {
    pub fn total(&self) -> usize {
        self.negative_significant
            + self.negative_not_significant
            + self.positive_significant
            + self.positive_not_significant
    }

    pub fn fraction_negative_significant(&self) -> f64 {
        self.negative_significant as f64 / self.total() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiverseSummary {
    pub k: usize,
    pub k_ok: usize,
    pub mean: f64,
    /// Population variance of the estimates.
    pub v_m: f64,
    pub model_sd: f64,
    pub signs: SignTable,
    pub fraction_negative_significant: f64,
    pub alpha: f64,
}

/// Mean, model variance (population denominator) and sign stability.
pub fn model_sd(set: &EstimateSet) -> Result<MultiverseSummary> {
    let b: Vec<f64> = set.ok_estimates().map(|(_, (b, _, _))| b).collect();
    if b.is_empty() {
        return Err(Error::NoEstimates);
    }
    let k_ok = b.len() as f64;
    let mean = b.iter().sum::<f64>() / k_ok;
    let v_m = b.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / k_ok;
    let signs = sign_stability(set, set.alpha);
    Ok(MultiverseSummary {
        k: set.k(),
        k_ok: b.len(),
        mean,
        v_m,
        model_sd: v_m.sqrt(),
        fraction_negative_significant: signs.fraction_negative_significant(),
        signs,
        alpha: set.alpha,
    })
}

/// A model is significant when `p < alpha`; zero counts as positive.
pub fn sign_stability(set: &EstimateSet, alpha: f64) -> SignTable {
    let mut t = SignTable::default();
    for (_, (b, _, p)) in set.ok_estimates() {
        let sig = p < alpha;
        match (b < 0.0, sig) {
            (true, true) => t.negative_significant += 1,
            (true, false) => t.negative_not_significant += 1,
            (false, true) => t.positive_significant += 1,
            (false, false) => t.positive_not_significant += 1,
        }
    }
    t
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceStat {
    pub dimension: String,
    pub option: String,
    pub reference: String,
    /// Mean of `b(option) − b(reference)` over matched pairs; `None`
    /// when no pair has two successful fits.
    pub delta: Option<f64>,
    pub n_pairs: usize,
    pub percent_of_benchmark: Option<f64>,
}

/// Marginal effect of every option of `dimension` against its reference,
/// averaged over all combinations of the other dimensions.
pub fn influence(set: &EstimateSet, dimension: &str) -> Result<Vec<InfluenceStat>> {
    let d = set
        .dimensions
        .iter()
        .position(|x| x.name == dimension)
        .ok_or_else(|| Error::Invalid(format!("no dimension {dimension:?} in the estimate set")))?;
    let dim = &set.dimensions[d];
    let r = dim.reference_index();
    let by_options: BTreeMap<&[usize], &ModelEstimate> =
        set.models.iter().map(|m| (m.options.as_slice(), m)).collect();

    let mut missing = Vec::new();
    let mut out = Vec::with_capacity(dim.options.len());
    for (v, option) in dim.options.iter().enumerate() {
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for m in set.models.iter().filter(|m| m.options[d] == v) {
            let mut key = m.options.clone();
            key[d] = r;
            let Some(base) = by_options.get(key.as_slice()) else {
                missing.push(set.labels_of(&key).join("/"));
                continue;
            };
            if let (Some(b), Some(b0)) = (m.outcome.estimate(), base.outcome.estimate()) {
                sum += b - b0;
                pairs += 1;
            }
        }
        let delta = (pairs > 0).then(|| sum / pairs as f64);
        let percent_of_benchmark = set
            .benchmark_estimate()
            .filter(|b| *b != 0.0)
            .zip(delta)
            .map(|(b, d)| 100.0 * d / b.abs());
        out.push(InfluenceStat {
            dimension: dim.name.clone(),
            option: option.clone(),
            reference: dim.reference.clone(),
            delta,
            n_pairs: pairs,
            percent_of_benchmark,
        });
    }
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(Error::NonFactorial(missing));
    }
    Ok(out)
}

/// Influence for every dimension with more than one option, reference rows omitted.
pub fn influence_all(set: &EstimateSet) -> Result<Vec<InfluenceStat>> {
    let mut out = Vec::new();
    for dim in set.dimensions.iter().filter(|d| d.options.len() > 1) {
        out.extend(
            influence(set, &dim.name)?
                .into_iter()
                .filter(|s| s.option != s.reference),
        );
    }
    Ok(out)
}

impl EstimateSet {
    fn labels_of(&self, options: &[usize]) -> Vec<String> {
        self.dimensions
            .iter()
            .zip(options)
            .map(|(d, &o)| format!("{}={}", d.name, d.options[o]))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extreme {
    pub model_id: usize,
    pub labels: Vec<String>,
    pub estimate: f64,
    pub se: f64,
    pub p: f64,
}

/// Smallest and largest estimates; ties go to the earlier model.
pub fn extremes(set: &EstimateSet) -> Result<(Extreme, Extreme)> {
    let mut lo: Option<(&ModelEstimate, (f64, f64, f64))> = None;
    let mut hi: Option<(&ModelEstimate, (f64, f64, f64))> = None;
    for (m, o) in set.ok_estimates() {
        if lo.is_none_or(|(_, l)| o.0 < l.0) {
            lo = Some((m, o));
        }
        if hi.is_none_or(|(_, h)| o.0 > h.0) {
            hi = Some((m, o));
        }
    }
    let row = |(m, (b, se, p)): (&ModelEstimate, (f64, f64, f64))| Extreme {
        model_id: m.model_id,
        labels: set.labels(m).into_iter().map(String::from).collect(),
        estimate: b,
        se,
        p,
    };
    match (lo, hi) {
        (Some(l), Some(h)) => Ok((row(l), row(h))),
        _ => Err(Error::NoEstimates),
    }
}

/// Linear interpolation between order statistics: position `(n − 1)·q/100`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q / 100.0;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `P_high − P_low` of estimated author effects.
pub fn author_effect_percentiles(effects: &[f64], p_high: f64, p_low: f64) -> Result<f64> {
    if effects.len() < 10 {
        return Err(Error::TooFewValues {
            need: 10,
            found: effects.len(),
        });
    }
    if !(0.0..=100.0).contains(&p_high) || !(0.0..=100.0).contains(&p_low) {
        return Err(Error::Invalid("percentiles must lie in [0, 100]".into()));
    }
    let mut v = effects.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(percentile(&v, p_high) - percentile(&v, p_low))
}

/// Gaussian kernel density on an evenly spaced grid, bandwidth by
/// Silverman's rule `0.9 · min(sd, IQR/1.34) · n^(−1/5)`.
///
/// Returns `None` when the bandwidth is zero, e.g. for a constant sample.
pub fn kernel_density(values: &[f64], points: usize) -> Option<(f64, Vec<(f64, f64)>)> {
    let n = values.len();
    if n < 2 || points < 2 {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mean = v.iter().sum::<f64>() / nf;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    let iqr = percentile(&v, 75.0) - percentile(&v, 25.0);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * nf.powf(-0.2);
    if !(h > 0.0) {
        return None;
    }
    let lo = v[0] - 3.0 * h;
    let hi = v[n - 1] + 3.0 * h;
    let step = (hi - lo) / (points - 1) as f64;
    let norm = 1.0 / (nf * h * (2.0 * std::f64::consts::PI).sqrt());
    let grid = (0..points)
        .map(|i| {
            let x = lo + step * i as f64;
            let d: f64 = v.iter().map(|&xi| (-0.5 * ((x - xi) / h).powi(2)).exp()).sum();
            (x, d * norm)
        })
        .collect();
    Some((h, grid))
}
