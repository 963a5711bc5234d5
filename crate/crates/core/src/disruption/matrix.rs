use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{index_value, NrMode, Variant, WindowSpec};
use crate::corpus::{Corpus, PaperIdx};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoreStatus {
    Ok,
    /// `N_F + N_B + N_R = 0`.
    Undefined,
    /// The focal paper has no linked references.
    ZeroReference,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub n_f: u32,
    pub n_b: u32,
    pub n_r: u32,
    pub status: ScoreStatus,
}

impl ScoreEntry {
    pub fn from_counts(n_f: u32, n_b: u32, n_r: u32) -> Self {
        let status = if index_value(n_f, n_b, n_r).is_some() {
            ScoreStatus::Ok
        } else {
            ScoreStatus::Undefined
        };
        ScoreEntry {
            n_f,
            n_b,
            n_r,
            status,
        }
    }

    pub fn zero_reference() -> Self {
        ScoreEntry {
            n_f: 0,
            n_b: 0,
            n_r: 0,
            status: ScoreStatus::ZeroReference,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self.status {
            ScoreStatus::Ok => index_value(self.n_f, self.n_b, self.n_r),
            _ => None,
        }
    }
}

/// Scores keyed by (paper, variant). Papers are sorted; variants keep the
/// order they were requested in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    papers: Vec<PaperIdx>,
    variants: Vec<Variant>,
    entries: Vec<ScoreEntry>,
    /// Multiplier applied by [`ScoreMatrix::value`]; files hold raw scores.
    #[serde(default = "unit_scale")]
    scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl ScoreMatrix {
    pub(super) fn from_rows(papers: Vec<PaperIdx>, variants: Vec<Variant>, rows: Vec<Vec<ScoreEntry>>) -> Self {
        let entries = rows.into_iter().flatten().collect();
        ScoreMatrix {
            papers,
            variants,
            entries,
            scale: 1.0,
        }
    }

    /// Reports every score multiplied by `factor`, e.g. 100 for per-hundred tables.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.scale = factor;
        self
    }

    pub fn papers(&self) -> &[PaperIdx] {
        &self.papers
    }

    pub fn variants(&self) -> &[Variant] {
        &self.variants
    }

    pub fn entry(&self, paper_row: usize, variant: usize) -> &ScoreEntry {
        &self.entries[paper_row * self.variants.len() + variant]
    }

    pub fn paper_row(&self, paper: PaperIdx) -> Option<usize> {
        self.papers.binary_search(&paper).ok()
    }

    pub fn variant_index(&self, variant: &Variant) -> Option<usize> {
        self.variants.iter().position(|v| v == variant)
    }

    /// Score of `paper` under `variant`; `None` when absent or not defined.
    pub fn value(&self, paper: PaperIdx, variant: usize) -> Option<f64> {
        let row = self.paper_row(paper)?;
        self.entry(row, variant).value().map(|v| v * self.scale)
    }

    pub fn count_status(&self, variant: usize, status: ScoreStatus) -> usize {
        (0..self.papers.len())
            .filter(|&r| self.entry(r, variant).status == status)
            .count()
    }

    /// Writes `paper_id,b,window,nr_mode,n_f,n_b,n_r,score`, one row per
    /// (paper, variant).
    pub fn write_csv(&self, corpus: &Corpus, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        w.write_record(["paper_id", "b", "window", "nr_mode", "n_f", "n_b", "n_r", "score"])?;
        for (row, &p) in self.papers.iter().enumerate() {
            for (vi, v) in self.variants.iter().enumerate() {
                let e = self.entry(row, vi);
                let (counts, score) = match e.status {
                    ScoreStatus::Ok => (
                        [e.n_f.to_string(), e.n_b.to_string(), e.n_r.to_string()],
                        e.value().expect("ok entry has value").to_string(),
                    ),
                    ScoreStatus::Undefined => (
                        [e.n_f.to_string(), e.n_b.to_string(), e.n_r.to_string()],
                        "undefined".to_string(),
                    ),
                    ScoreStatus::ZeroReference => (Default::default(), "zero_reference".to_string()),
                };
                w.write_record([
                    corpus.paper(p).id.as_str(),
                    &v.threshold.to_string(),
                    &v.window.to_string(),
                    v.nr_mode.as_str(),
                    &counts[0],
                    &counts[1],
                    &counts[2],
                    &score,
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reads a file written by [`ScoreMatrix::write_csv`]. Every paper must
    /// carry every variant.
    pub fn read_csv(corpus: &Corpus, path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
            ));
        }
        let file = path.display().to_string();
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
        let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
        let expected = ["paper_id", "b", "window", "nr_mode", "n_f", "n_b", "n_r", "score"];
        if header != expected {
            return Err(Error::schema(
                &file,
                format!("expected header {}", expected.join(",")),
            ));
        }
        let mut variants: Vec<Variant> = Vec::new();
        let mut cells: BTreeMap<(PaperIdx, usize), ScoreEntry> = BTreeMap::new();
        for (i, rec) in r.records().enumerate() {
            let line = (i + 2) as u64;
            let rec = rec?;
            let bad = |m: String| Error::malformed(&file, line, m);
            let id = &rec[0];
            let paper = corpus
                .find(id)
                .ok_or_else(|| bad(format!("paper {id:?} not in corpus")))?;
            let threshold: u32 = rec[1].parse().map_err(|_| bad(format!("bad threshold {:?}", &rec[1])))?;
            let window: WindowSpec = rec[2].parse().map_err(|e: Error| bad(e.to_string()))?;
            let nr_mode: NrMode = rec[3].parse().map_err(|e: Error| bad(e.to_string()))?;
            let v = Variant::new(threshold, window, nr_mode);
            let vi = match variants.iter().position(|x| *x == v) {
                Some(i) => i,
                None => {
                    variants.push(v);
                    variants.len() - 1
                }
            };
            let entry = if &rec[7] == "zero_reference" {
                ScoreEntry::zero_reference()
            } else {
                let n = |k: usize| -> Result<u32> {
                    rec[k].parse().map_err(|_| bad(format!("bad count {:?}", &rec[k])))
                };
                let e = ScoreEntry::from_counts(n(4)?, n(5)?, n(6)?);
                let consistent = match &rec[7] {
                    "undefined" => e.status == ScoreStatus::Undefined,
                    s => s.parse::<f64>().ok() == e.value(),
                };
                if !consistent {
                    return Err(bad(format!("score {:?} disagrees with counts", &rec[7])));
                }
                e
            };
            if cells.insert((paper, vi), entry).is_some() {
                return Err(bad(format!("duplicate row for {id} {v}")));
            }
        }
        let mut papers: Vec<PaperIdx> = cells.keys().map(|(p, _)| *p).collect();
        papers.dedup();
        if cells.len() != papers.len() * variants.len() {
            return Err(Error::schema(&file, "score matrix is not complete"));
        }
        let entries = cells.into_values().collect();
        Ok(ScoreMatrix {
            papers,
            variants,
            entries,
            scale: 1.0,
        })
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Serialization(format!("{other:?}")),
    }
}
