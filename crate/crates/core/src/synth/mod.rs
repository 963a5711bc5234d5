//! Synthetic growing citation networks with citation inflation, drifting
//! team sizes and a planted team-size effect on coupling.
//!
//! Each year adds `round(N0 (1+g)^Δy)` papers. A paper draws a team size,
//! its authors (new, or returning authors still within their career
//! window), and a reference budget `L ~ Poisson(μ0 (1+r)^Δy)`. References
//! are filled by picking a primary target from earlier years with weight
//! `(citations + a0) · exp(−λ · age)`, then copying each of the target's
//! own references with the target's propensity `p_f`, until the budget is
//! spent. The propensity is
//!
//! `p_f = clamp(p0 + δ (team_f − 1) + mean author effect + noise, 0, 1)`,
//!
//! so `δ > 0` makes large-team papers more consolidating (their citers
//! cite their references too).

mod probe;

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Paper};
use crate::error::{Error, Result};

pub use probe::{bias_probe, calibrate_delta, monte_carlo, MonteCarlo, ProbeEstimate, ProbeReport, ProbeSpec};

/// Bumped whenever the generator's output for a given spec changes.
pub const GENERATOR_VERSION: &str = "synth-1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub seed: u64,
    /// Inclusive publication years of generated papers.
    pub years: (i32, i32),
    /// Reference-free papers dated the year before `years.0`, so the first
    /// cohort has something to cite.
    pub seed_papers: usize,
    pub papers_year0: usize,
    /// Annual growth of the number of papers.
    pub paper_growth: f64,
    pub refs_mean_year0: f64,
    /// Annual growth of the mean reference-list length.
    pub refs_growth: f64,
    pub refs_max: u32,
    /// Relative weights of team sizes 1, 2, ...
    pub team_size_weights: Vec<f64>,
    /// Per-year log tilt towards larger teams: weight of size `k` in year
    /// `y` is `w_k · exp(drift · Δy · (k − 1))`.
    pub team_size_drift: f64,
    /// Baseline probability of copying a cited paper's reference.
    pub base_propensity: f64,
    /// Shift of the copy probability per additional team member.
    pub planted_delta: f64,
    pub author_effect_sd: f64,
    pub paper_noise_sd: f64,
    /// Probability that an author slot is filled by a newcomer.
    pub new_author_prob: f64,
    /// Years after their first paper during which authors can return.
    pub career_years: u32,
    pub recency_decay: f64,
    pub attachment_offset: f64,
    pub field: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            years: (1998, 2023),
            seed_papers: 400,
            papers_year0: 200,
            paper_growth: 0.05,
            refs_mean_year0: 20.0,
            refs_growth: 0.0,
            refs_max: 150,
            team_size_weights: vec![
                0.16, 0.22, 0.19, 0.14, 0.1, 0.07, 0.04, 0.03, 0.02, 0.01, 0.005, 0.004, 0.003, 0.002,
                0.001,
            ],
            team_size_drift: 0.0,
            base_propensity: 0.05,
            planted_delta: 0.0,
            author_effect_sd: 0.05,
            paper_noise_sd: 0.05,
            new_author_prob: 0.6,
            career_years: 8,
            recency_decay: 0.5,
            attachment_offset: 5.0,
            field: "Biology".into(),
        }
    }
}

impl SynthSpec {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::schema(path.display().to_string(), e.to_string()))
    }

    fn span(&self) -> u32 {
        (self.years.1 - self.years.0) as u32
    }

    pub fn papers_in_year(&self, dy: u32) -> usize {
        (self.papers_year0 as f64 * (1.0 + self.paper_growth).powi(dy as i32)).round() as usize
    }

    pub fn refs_mean(&self, dy: u32) -> f64 {
        self.refs_mean_year0 * (1.0 + self.refs_growth).powi(dy as i32)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.years.1 - self.years.0 < 2 {
            return bad(format!("year span {:?} must cover at least three years", self.years));
        }
        if self.paper_growth < 0.0 || self.refs_growth < 0.0 {
            return bad("growth rates must be non-negative".into());
        }
        if self.team_size_weights.is_empty()
            || self.team_size_weights.iter().any(|w| !(*w >= 0.0))
            || self.team_size_weights.iter().sum::<f64>() <= 0.0
        {
            return bad("team size weights must be non-negative with a positive sum".into());
        }
        for (name, p) in [
            ("base_propensity", self.base_propensity),
            ("new_author_prob", self.new_author_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if self.new_author_prob == 0.0 {
            return bad("new_author_prob must be positive so the first papers have authors".into());
        }
        if self.author_effect_sd < 0.0 || self.paper_noise_sd < 0.0 || self.recency_decay < 0.0 {
            return bad("standard deviations and decay must be non-negative".into());
        }
        if self.attachment_offset <= 0.0 {
            return bad("attachment_offset must be positive".into());
        }
        if self.papers_year0 == 0 {
            return bad("papers_year0 must be positive".into());
        }
        // Every year must be able to meet its mean reference demand from
        // what was published before it.
        let mut prior = self.seed_papers;
        for dy in 0..=self.span() {
            let demand = self.refs_mean(dy).min(f64::from(self.refs_max));
            if demand > prior as f64 {
                return bad(format!(
                    "infeasible reference demand in {}: mean {demand:.1} references but only {prior} earlier papers",
                    self.years.0 + dy as i32
                ));
            }
            prior += self.papers_in_year(dy);
        }
        Ok(())
    }
}

/// Latent quantities behind a generated corpus. Never read by the analysis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub generator_version: String,
    pub planted_delta: f64,
    pub spec: SynthSpec,
    pub mechanism: Vec<String>,
    /// Share of papers whose propensity was clamped to `[0, 1]`.
    pub clamp_rate: f64,
    pub author_effects: Vec<(String, f64)>,
    pub paper_propensity: Vec<(String, f64)>,
}

impl GroundTruth {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

fn mechanism_notes() -> Vec<String> {
    [
        "paper count in year y: round(papers_year0 * (1 + paper_growth)^(y - y0))",
        "team size: categorical over 1..=K with weight w_k * exp(team_size_drift * (y - y0) * (k - 1))",
        "authors: each slot is a newcomer with probability new_author_prob, otherwise a uniformly drawn author whose first paper is at most career_years old",
        "author effect: a_i ~ Normal(0, author_effect_sd), fixed per author",
        "reference budget: Poisson(refs_mean_year0 * (1 + refs_growth)^(y - y0)), at least 1, at most refs_max",
        "primary targets: papers of earlier years, weight (citations so far + attachment_offset) * exp(-recency_decay * age)",
        "copying: after a primary target f, each reference of f is added with probability p_f while budget remains",
        "p_f = clamp(base_propensity + planted_delta * (team_f - 1) + mean author effect + Normal(0, paper_noise_sd), 0, 1)",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

/// Generates a corpus and its ground truth. Identical specs give identical output.
pub fn generate(spec: &SynthSpec) -> Result<(Corpus, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let author_dist = Normal::new(0.0, spec.author_effect_sd).map_err(|e| Error::Invalid(e.to_string()))?;
    let noise_dist = Normal::new(0.0, spec.paper_noise_sd).map_err(|e| Error::Invalid(e.to_string()))?;

    let mut years: Vec<i32> = Vec::new();
    let mut team: Vec<u32> = Vec::new();
    let mut propensity: Vec<f64> = Vec::new();
    let mut refs: Vec<Vec<u32>> = Vec::new();
    let mut cites: Vec<u32> = Vec::new();
    let mut authorships: Vec<(usize, usize)> = Vec::new();
    let mut author_effect: Vec<f64> = Vec::new();
    let mut author_start: Vec<i32> = Vec::new();
    let mut clamped = 0usize;

    for _ in 0..spec.seed_papers {
        years.push(spec.years.0 - 1);
        team.push(1);
        propensity.push(spec.base_propensity);
        refs.push(Vec::new());
        cites.push(0);
    }
    let seed_count = spec.seed_papers;

    for dy in 0..=spec.span() {
        let year = spec.years.0 + dy as i32;
        let prior = years.len();

        let weights: Vec<f64> = (0..prior)
            .map(|j| {
                let age = f64::from(year - years[j]);
                (f64::from(cites[j]) + spec.attachment_offset) * (-spec.recency_decay * age).exp()
            })
            .collect();
        let targets = WeightedIndex::new(&weights).map_err(|e| Error::Invalid(e.to_string()))?;
        let team_weights: Vec<f64> = spec
            .team_size_weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * (spec.team_size_drift * f64::from(dy) * k as f64).exp())
            .collect();
        let team_dist = WeightedIndex::new(&team_weights).map_err(|e| Error::Invalid(e.to_string()))?;
        let refs_dist = Poisson::new(spec.refs_mean(dy)).map_err(|e| Error::Invalid(e.to_string()))?;

        let active_from = author_start.partition_point(|&s| s < year - spec.career_years as i32);
        let mut new_refs: Vec<Vec<u32>> = Vec::new();
        for _ in 0..spec.papers_in_year(dy) {
            let idx = years.len();
            let size = team_dist.sample(&mut rng) as u32 + 1;

            let mut members: Vec<usize> = Vec::with_capacity(size as usize);
            while members.len() < size as usize {
                let returning = author_start.len() - active_from;
                let a = if returning == 0 || rng.random_bool(spec.new_author_prob) {
                    author_effect.push(author_dist.sample(&mut rng));
                    author_start.push(year);
                    author_effect.len() - 1
                } else {
                    active_from + rng.random_range(0..returning)
                };
                if !members.contains(&a) {
                    members.push(a);
                }
            }
            let mean_effect = members.iter().map(|&a| author_effect[a]).sum::<f64>() / members.len() as f64;
            let raw = spec.base_propensity
                + spec.planted_delta * f64::from(size - 1)
                + mean_effect
                + noise_dist.sample(&mut rng);
            if !(0.0..=1.0).contains(&raw) {
                clamped += 1;
            }
            for &a in &members {
                authorships.push((idx, a));
            }

            let budget = (refs_dist.sample(&mut rng) as usize)
                .clamp(1, spec.refs_max as usize)
                .min(prior);
            let mut list: Vec<u32> = Vec::with_capacity(budget);
            while list.len() < budget {
                let f = targets.sample(&mut rng) as u32;
                if list.contains(&f) {
                    continue;
                }
                list.push(f);
                let p_f = propensity[f as usize];
                for &r in &refs[f as usize] {
                    if list.len() >= budget {
                        break;
                    }
                    if !list.contains(&r) && rng.random_bool(p_f) {
                        list.push(r);
                    }
                }
            }

            years.push(year);
            team.push(size);
            propensity.push(raw.clamp(0.0, 1.0));
            cites.push(0);
            new_refs.push(list);
        }
        for list in &new_refs {
            for &r in list {
                cites[r as usize] += 1;
            }
        }
        refs.extend(new_refs);
    }

    let n = years.len();
    let paper_id = |i: usize| format!("P{:06}", i + 1);
    let author_id = |a: usize| format!("A{:06}", a + 1);

    let papers: Vec<Paper> = (0..n)
        .map(|i| Paper {
            id: paper_id(i),
            year: years[i],
            field: spec.field.clone(),
            team_size: team[i],
            n_refs_unlinked: 0,
        })
        .collect();
    let citations: Vec<(usize, usize)> = refs
        .iter()
        .enumerate()
        .flat_map(|(i, l)| l.iter().map(move |&r| (i, r as usize)))
        .collect();
    // Seed papers have no listed authors; give each a unique one so every
    // paper satisfies the team-size invariant against its authorships.
    let mut auth: Vec<(usize, String)> = (0..seed_count).map(|i| (i, format!("S{:06}", i + 1))).collect();
    auth.extend(authorships.iter().map(|&(p, a)| (p, author_id(a))));
    let (corpus, _) = Corpus::build(papers, citations, auth)?;

    let generated = n - seed_count;
    let truth = GroundTruth {
        generator_version: GENERATOR_VERSION.into(),
        planted_delta: spec.planted_delta,
        spec: spec.clone(),
        mechanism: mechanism_notes(),
        clamp_rate: if generated == 0 {
            0.0
        } else {
            clamped as f64 / generated as f64
        },
        author_effects: author_effect
            .iter()
            .enumerate()
            .map(|(a, &e)| (author_id(a), e))
            .collect(),
        paper_propensity: (seed_count..n).map(|i| (paper_id(i), propensity[i])).collect(),
    };
    Ok((corpus, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthSpec {
        SynthSpec {
            seed,
            years: (2000, 2005),
            seed_papers: 100,
            papers_year0: 50,
            refs_mean_year0: 8.0,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let (a, ta) = generate(&small(3)).unwrap();
        let (b, tb) = generate(&small(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let (c, _) = generate(&small(4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn growth_follows_rounding_rule() {
        let spec = SynthSpec {
            papers_year0: 1000,
            ..SynthSpec::default()
        };
        assert_eq!(spec.papers_in_year(0), 1000);
        assert_eq!(spec.papers_in_year(10), (1000.0 * 1.05f64.powi(10)).round() as usize);
        assert_eq!(spec.papers_in_year(10), 1629);
    }

    #[test]
    fn infeasible_demand_rejected() {
        let spec = SynthSpec {
            seed_papers: 5,
            refs_mean_year0: 30.0,
            ..small(1)
        };
        let err = generate(&spec).unwrap_err();
        assert!(err.to_string().contains("infeasible reference demand"));
    }

    #[test]
    fn references_point_backwards_in_time() {
        let (c, _) = generate(&small(9)).unwrap();
        for p in c.indices() {
            for &r in c.references(p) {
                assert!(c.paper(r).year < c.paper(p).year);
            }
            assert_eq!(c.authors_of(p).len() as u32, c.paper(p).team_size);
        }
    }

    #[test]
    fn truth_lists_every_generated_paper() {
        let spec = small(2);
        let (c, t) = generate(&spec).unwrap();
        assert_eq!(t.paper_propensity.len(), c.len() - spec.seed_papers);
        assert_eq!(t.generator_version, GENERATOR_VERSION);
        assert!(t.paper_propensity.iter().all(|(_, p)| (0.0..=1.0).contains(p)));
    }
}
