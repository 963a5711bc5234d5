//! Bibliographic coupling profiles and the disruption-index family.
//!
//! For a focal paper `f` with references `refs(f)`, every later paper `q`
//! that cites `f` or any member of `refs(f)` is a candidate with coupling
//! strength `s(q) = |refs(q) ∩ refs(f)|`. Given a threshold `b`:
//!
//! - `N_F` counts citers of `f` with `s(q) < b`,
//! - `N_B` counts citers of `f` with `s(q) ≥ b`,
//! - `N_R` counts non-citers with `s(q) ≥ r_min`,
//!
//! and `DI_b = (N_F − N_B) / (N_F + N_B + N_R)`. Under [`NrMode::Consistent`]
//! `r_min = b`; under [`NrMode::Legacy`] `r_min = 1`.
//!
//! Only the citer's publication year is window-filtered; reference lists
//! are always taken whole.

mod matrix;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{Corpus, PaperIdx};
use crate::error::{Error, Result};

pub use matrix::{ScoreEntry, ScoreMatrix, ScoreStatus};

/// Which citing papers count, by publication year relative to the focal paper.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WindowSpec {
    /// `year(f) ≤ year(q) ≤ year(f) + t`.
    Years(u32),
    /// `year(f) ≤ year(q) ≤ Y`.
    Horizon(i32),
}

impl WindowSpec {
    pub fn admits(self, focal_year: i32, citer_year: i32) -> bool {
        if citer_year < focal_year {
            return false;
        }
        match self {
            WindowSpec::Years(t) => i64::from(citer_year) - i64::from(focal_year) <= i64::from(t),
            WindowSpec::Horizon(y) => citer_year <= y,
        }
    }

    /// Parses a window, resolving a bare `horizon` to `default_horizon`.
    pub fn parse_with_horizon(s: &str, default_horizon: i32) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("horizon") {
            return Ok(WindowSpec::Horizon(default_horizon));
        }
        s.parse()
    }
}

impl fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindowSpec::Years(t) => write!(f, "{t}"),
            WindowSpec::Horizon(y) => write!(f, "horizon:{y}"),
        }
    }
}

impl FromStr for WindowSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(y) = s.strip_prefix("horizon:") {
            return y
                .parse()
                .map(WindowSpec::Horizon)
                .map_err(|_| Error::Invalid(format!("bad horizon year in window {s:?}")));
        }
        let digits = s.strip_suffix('y').unwrap_or(s);
        digits
            .parse()
            .map(WindowSpec::Years)
            .map_err(|_| Error::Invalid(format!("bad citation window {s:?}")))
    }
}

impl Serialize for WindowSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for WindowSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Threshold convention for `N_R`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NrMode {
    /// `N_R` uses the same coupling threshold as `N_B`.
    #[default]
    Consistent,
    /// `N_R` counts any coupled non-citer.
    Legacy,
}

impl NrMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NrMode::Consistent => "consistent",
            NrMode::Legacy => "legacy",
        }
    }

    fn r_min(self, threshold: u32) -> u32 {
        match self {
            NrMode::Consistent => threshold,
            NrMode::Legacy => 1,
        }
    }
}

impl fmt::Display for NrMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NrMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "consistent" => Ok(NrMode::Consistent),
            "legacy" => Ok(NrMode::Legacy),
            other => Err(Error::Invalid(format!("unknown N_R mode {other:?}"))),
        }
    }
}

/// One disruption-index definition: threshold, window and `N_R` convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Variant {
    pub threshold: u32,
    pub window: WindowSpec,
    pub nr_mode: NrMode,
}

impl Variant {
    pub fn new(threshold: u32, window: WindowSpec, nr_mode: NrMode) -> Self {
        Variant {
            threshold,
            window,
            nr_mode,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DI{}@{}/{}", self.threshold, self.window, self.nr_mode)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProfileEntry {
    pub paper: PaperIdx,
    pub cites_focal: bool,
    pub coupling: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CouplingProfile {
    pub focal: PaperIdx,
    pub window: WindowSpec,
    /// Candidates in id order, focal excluded.
    pub entries: Vec<ProfileEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisruptionScore {
    pub focal: PaperIdx,
    pub threshold: u32,
    pub window: WindowSpec,
    pub nr_mode: NrMode,
    pub n_f: u32,
    pub n_b: u32,
    pub n_r: u32,
    pub value: f64,
}

/// Candidate of the unwindowed profile, with its year for later filtering.
#[derive(Clone, Copy, Debug)]
struct Candidate {
    paper: PaperIdx,
    year: i32,
    cites_focal: bool,
    coupling: u32,
}

/// Reusable per-thread buffers for profile construction.
struct Scratch {
    coupling: Vec<u32>,
    cites: Vec<bool>,
    touched: Vec<PaperIdx>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            coupling: vec![0; n],
            cites: vec![false; n],
            touched: Vec::new(),
        }
    }
}

/// All candidates published no earlier than the focal paper, in id order.
fn candidates(corpus: &Corpus, focal: PaperIdx, scratch: &mut Scratch) -> Vec<Candidate> {
    let focal_year = corpus.paper(focal).year;
    let touch = |q: PaperIdx, scratch: &mut Scratch| {
        let i = q.get();
        if scratch.coupling[i] == 0 && !scratch.cites[i] {
            scratch.touched.push(q);
        }
    };
    for &r in corpus.references(focal) {
        for &q in corpus.citers(r) {
            if q == focal || corpus.paper(q).year < focal_year {
                continue;
            }
            touch(q, scratch);
            scratch.coupling[q.get()] += 1;
        }
    }
    for &q in corpus.citers(focal) {
        if corpus.paper(q).year < focal_year {
            continue;
        }
        touch(q, scratch);
        scratch.cites[q.get()] = true;
    }
    scratch.touched.sort_unstable();
    let out = scratch
        .touched
        .iter()
        .map(|&q| Candidate {
            paper: q,
            year: corpus.paper(q).year,
            cites_focal: scratch.cites[q.get()],
            coupling: scratch.coupling[q.get()],
        })
        .collect();
    for &q in &scratch.touched {
        scratch.coupling[q.get()] = 0;
        scratch.cites[q.get()] = false;
    }
    scratch.touched.clear();
    out
}

pub fn coupling_profile(corpus: &Corpus, focal: PaperIdx, window: WindowSpec) -> Result<CouplingProfile> {
    if corpus.references(focal).is_empty() {
        return Err(Error::ZeroReferenceFocal(corpus.paper(focal).id.clone()));
    }
    let focal_year = corpus.paper(focal).year;
    let mut scratch = Scratch::new(corpus.len());
    let entries = candidates(corpus, focal, &mut scratch)
        .into_iter()
        .filter(|c| window.admits(focal_year, c.year))
        .map(|c| ProfileEntry {
            paper: c.paper,
            cites_focal: c.cites_focal,
            coupling: c.coupling,
        })
        .collect();
    Ok(CouplingProfile {
        focal,
        window,
        entries,
    })
}

/// `(N_F, N_B, N_R)` over `(cites_focal, coupling)` pairs.
fn count<I: IntoIterator<Item = (bool, u32)>>(entries: I, threshold: u32, nr_mode: NrMode) -> (u32, u32, u32) {
    let r_min = nr_mode.r_min(threshold);
    let (mut n_f, mut n_b, mut n_r) = (0, 0, 0);
    for (cites, s) in entries {
        if cites {
            if s >= threshold {
                n_b += 1;
            } else {
                n_f += 1;
            }
        } else if s >= r_min {
            n_r += 1;
        }
    }
    (n_f, n_b, n_r)
}

/// `(N_F − N_B) / (N_F + N_B + N_R)`, or `None` when the denominator is zero.
pub fn index_value(n_f: u32, n_b: u32, n_r: u32) -> Option<f64> {
    let denom = u64::from(n_f) + u64::from(n_b) + u64::from(n_r);
    if denom == 0 {
        return None;
    }
    Some((f64::from(n_f) - f64::from(n_b)) / denom as f64)
}

pub fn disruption_score(
    corpus: &Corpus,
    profile: &CouplingProfile,
    threshold: u32,
    nr_mode: NrMode,
) -> Result<DisruptionScore> {
    if threshold == 0 {
        return Err(Error::Invalid("coupling threshold must be at least 1".into()));
    }
    let (n_f, n_b, n_r) = count(
        profile.entries.iter().map(|e| (e.cites_focal, e.coupling)),
        threshold,
        nr_mode,
    );
    let value = index_value(n_f, n_b, n_r)
        .ok_or_else(|| Error::UndefinedScore(corpus.paper(profile.focal).id.clone()))?;
    Ok(DisruptionScore {
        focal: profile.focal,
        threshold,
        window: profile.window,
        nr_mode,
        n_f,
        n_b,
        n_r,
        value,
    })
}

/// Distinct citing papers of `focal` inside `window`.
pub fn citation_count(corpus: &Corpus, focal: PaperIdx, window: WindowSpec) -> usize {
    let y = corpus.paper(focal).year;
    corpus
        .citers(focal)
        .iter()
        .filter(|&&q| window.admits(y, corpus.paper(q).year))
        .count()
}

/// Scores every paper in `papers` under every variant.
///
/// One unwindowed profile is built per paper and shared by all windows and
/// thresholds. Failures are stored per cell; the batch never aborts.
pub fn batch_scores(corpus: &Corpus, papers: &[PaperIdx], variants: &[Variant]) -> ScoreMatrix {
    let mut papers = papers.to_vec();
    papers.sort_unstable();
    papers.dedup();
    let mut windows: Vec<WindowSpec> = variants.iter().map(|v| v.window).collect();
    windows.sort_unstable();
    windows.dedup();

    let rows: Vec<Vec<ScoreEntry>> = papers
        .par_iter()
        .map_init(
            || Scratch::new(corpus.len()),
            |scratch, &p| {
                if corpus.references(p).is_empty() {
                    return vec![ScoreEntry::zero_reference(); variants.len()];
                }
                let focal_year = corpus.paper(p).year;
                let all = candidates(corpus, p, scratch);
                let per_window: Vec<Vec<(bool, u32)>> = windows
                    .iter()
                    .map(|w| {
                        all.iter()
                            .filter(|c| w.admits(focal_year, c.year))
                            .map(|c| (c.cites_focal, c.coupling))
                            .collect()
                    })
                    .collect();
                variants
                    .iter()
                    .map(|v| {
                        let wi = windows.binary_search(&v.window).expect("window collected");
                        let (n_f, n_b, n_r) =
                            count(per_window[wi].iter().copied(), v.threshold.max(1), v.nr_mode);
                        ScoreEntry::from_counts(n_f, n_b, n_r)
                    })
                    .collect()
            },
        )
        .collect();

    ScoreMatrix::from_rows(papers, variants.to_vec(), rows)
}
