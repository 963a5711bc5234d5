use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Corpus, PaperIdx};
use crate::disruption::{citation_count, WindowSpec};
use crate::error::{Error, Result};

/// Sample selection rules. Every rule can be switched off independently.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSpec {
    /// Inclusive publication-year interval of the analysed cohort.
    pub year_range: Option<(i32, i32)>,
    /// Keep only papers whose references all resolve inside the corpus.
    pub require_fully_linked: bool,
    pub min_refs: u32,
    /// Count unlinked references towards `min_refs` (linked only by default).
    pub count_unlinked_refs: bool,
    pub require_cited: bool,
    /// A paper must be cited at least once in each of these windows; the
    /// corpus horizon when empty.
    pub cited_windows: Vec<WindowSpec>,
    /// Papers with more total references than this are outliers.
    pub outlier_max_refs: Option<u32>,
    /// Papers with more citations (in the outlier window) than this are outliers.
    pub outlier_max_cites: Option<u32>,
    /// A paper is kept when at least one of its authors has this many papers
    /// in the sample. Zero disables the rule.
    pub min_papers_per_author: u32,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            year_range: None,
            require_fully_linked: true,
            min_refs: 10,
            count_unlinked_refs: false,
            require_cited: true,
            cited_windows: Vec::new(),
            outlier_max_refs: None,
            outlier_max_cites: None,
            min_papers_per_author: 2,
        }
    }
}

impl FilterSpec {
    /// A spec that keeps everything.
    pub fn none() -> Self {
        FilterSpec {
            year_range: None,
            require_fully_linked: false,
            min_refs: 0,
            count_unlinked_refs: false,
            require_cited: false,
            cited_windows: Vec::new(),
            outlier_max_refs: None,
            outlier_max_cites: None,
            min_papers_per_author: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((lo, hi)) = self.year_range {
            if lo > hi {
                return Err(Error::Invalid(format!("empty year range {lo}..={hi}")));
            }
        }
        Ok(())
    }

    fn has_outlier_rule(&self) -> bool {
        self.outlier_max_refs.is_some() || self.outlier_max_cites.is_some()
    }
}

/// Filters in the order they are applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterStage {
    YearRange,
    FullyLinked,
    MinRefs,
    Cited,
    Outliers,
    MinPapersPerAuthor,
}

impl FilterStage {
    pub const ORDER: [FilterStage; 6] = [
        FilterStage::YearRange,
        FilterStage::FullyLinked,
        FilterStage::MinRefs,
        FilterStage::Cited,
        FilterStage::Outliers,
        FilterStage::MinPapersPerAuthor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterStage::YearRange => "year_range",
            FilterStage::FullyLinked => "fully_linked",
            FilterStage::MinRefs => "min_refs",
            FilterStage::Cited => "cited",
            FilterStage::Outliers => "outliers",
            FilterStage::MinPapersPerAuthor => "min_papers_per_author",
        }
    }
}

impl fmt::Display for FilterStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub initial: usize,
    /// Papers removed by each enabled filter, in application order.
    pub removed: Vec<(FilterStage, usize)>,
    /// Set when no paper survived.
    pub empty: bool,
}

impl Provenance {
    pub fn removed_by(&self, stage: FilterStage) -> usize {
        self.removed
            .iter()
            .find(|(s, _)| *s == stage)
            .map(|(_, n)| *n)
            .unwrap_or(0)
    }

    pub fn total_removed(&self) -> usize {
        self.removed.iter().map(|(_, n)| n).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleView {
    papers: Vec<PaperIdx>,
    pub provenance: Provenance,
}

impl SampleView {
    /// Every paper of the corpus, unfiltered.
    pub fn all(corpus: &Corpus) -> Self {
        Self::from_papers(corpus.indices().collect())
    }

    pub fn from_papers(mut papers: Vec<PaperIdx>) -> Self {
        papers.sort_unstable();
        papers.dedup();
        SampleView {
            provenance: Provenance {
                initial: papers.len(),
                removed: Vec::new(),
                empty: papers.is_empty(),
            },
            papers,
        }
    }

    /// Retained papers in canonical (id) order.
    pub fn papers(&self) -> &[PaperIdx] {
        &self.papers
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn contains(&self, p: PaperIdx) -> bool {
        self.papers.binary_search(&p).is_ok()
    }

    pub fn write_csv(&self, corpus: &Corpus, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["paper_id"])?;
        for &p in &self.papers {
            w.write_record([corpus.paper(p).id.as_str()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(corpus: &Corpus, path: &Path) -> Result<Self> {
        let name = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::Reader::from_reader(file);
        let header = r.headers().map_err(|e| Error::schema(&name, e.to_string()))?;
        if header.get(0) != Some("paper_id") {
            return Err(Error::schema(&name, "expected a paper_id column"));
        }
        let mut papers = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::schema(&name, e.to_string()))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let id = rec.get(0).unwrap_or("");
            let idx = corpus.find(id).ok_or_else(|| {
                Error::malformed(&name, line, format!("paper {id:?} is not in the corpus"))
            })?;
            papers.push(idx);
        }
        Ok(Self::from_papers(papers))
    }
}

/// Applies `spec` to every paper of the corpus.
///
/// `window_for_cites` is the window in which outlier citation counts are
/// taken; it is required when `outlier_max_cites` is set.
pub fn apply_filters(
    corpus: &Corpus,
    spec: &FilterSpec,
    window_for_cites: Option<WindowSpec>,
) -> Result<SampleView> {
    let all: Vec<PaperIdx> = corpus.indices().collect();
    apply_filters_to(corpus, &all, spec, window_for_cites)
}

/// Applies `spec` starting from an existing set of papers.
pub fn apply_filters_to(
    corpus: &Corpus,
    start: &[PaperIdx],
    spec: &FilterSpec,
    window_for_cites: Option<WindowSpec>,
) -> Result<SampleView> {
    spec.validate()?;
    if spec.outlier_max_cites.is_some() && window_for_cites.is_none() {
        return Err(Error::Invalid(
            "outlier_max_cites needs a citation window".into(),
        ));
    }
    let mut current: Vec<PaperIdx> = start.to_vec();
    current.sort_unstable();
    current.dedup();
    let mut provenance = Provenance {
        initial: current.len(),
        ..Default::default()
    };
    let horizon = WindowSpec::Horizon(corpus.horizon());

    let mut stage = |name: FilterStage, current: &mut Vec<PaperIdx>, keep: &dyn Fn(PaperIdx) -> bool| {
        let before = current.len();
        current.retain(|&p| keep(p));
        provenance.removed.push((name, before - current.len()));
    };

    if let Some((lo, hi)) = spec.year_range {
        stage(FilterStage::YearRange, &mut current, &|p| {
            let y = corpus.paper(p).year;
            lo <= y && y <= hi
        });
    }
    if spec.require_fully_linked {
        stage(FilterStage::FullyLinked, &mut current, &|p| {
            corpus.paper(p).n_refs_unlinked == 0
        });
    }
    if spec.min_refs > 0 {
        stage(FilterStage::MinRefs, &mut current, &|p| {
            let n = if spec.count_unlinked_refs {
                corpus.total_references(p)
            } else {
                corpus.references(p).len() as u32
            };
            n >= spec.min_refs
        });
    }
    if spec.require_cited {
        let windows = if spec.cited_windows.is_empty() {
            vec![horizon]
        } else {
            spec.cited_windows.clone()
        };
        stage(FilterStage::Cited, &mut current, &|p| {
            windows.iter().all(|&w| citation_count(corpus, p, w) > 0)
        });
    }
    if spec.has_outlier_rule() {
        stage(FilterStage::Outliers, &mut current, &|p| {
            let too_many_refs = spec
                .outlier_max_refs
                .is_some_and(|m| corpus.total_references(p) > m);
            let too_many_cites = match (spec.outlier_max_cites, window_for_cites) {
                (Some(m), Some(w)) => citation_count(corpus, p, w) > m as usize,
                _ => false,
            };
            !(too_many_refs || too_many_cites)
        });
    }
    if spec.min_papers_per_author > 0 {
        let qualifying = qualifying_authors(corpus, &current, spec.min_papers_per_author);
        stage(FilterStage::MinPapersPerAuthor, &mut current, &|p| {
            corpus
                .authors_of(p)
                .iter()
                .any(|a| qualifying[a.get()])
        });
    }

    provenance.empty = current.is_empty();
    Ok(SampleView {
        papers: current,
        provenance,
    })
}

/// Marks authors with at least `min` papers among `papers`.
pub(crate) fn qualifying_authors(corpus: &Corpus, papers: &[PaperIdx], min: u32) -> Vec<bool> {
    let mut counts = vec![0u32; corpus.num_authors()];
    for &p in papers {
        for a in corpus.authors_of(p) {
            counts[a.get()] += 1;
        }
    }
    counts.into_iter().map(|c| c >= min).collect()
}
