//! Immutable citation corpus, sample filters and the author–paper panel.
//!
//! Papers are stored sorted by id, so a [`PaperIdx`] order is also the
//! canonical id order. Citations and authorships are kept as compressed
//! adjacency lists in both directions.

mod filter;
mod load;
mod panel;
mod stats;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use filter::{apply_filters, apply_filters_to, FilterSpec, FilterStage, Provenance, SampleView};
pub use load::{load_corpus, CorpusPaths, LoadOptions, LoadReport};
pub use panel::{build_panel, AuthorPaperPanel};
pub use stats::{descriptive_stats, FieldShare, StatsTable, VariableStats};

/// Dense index of a paper inside a [`Corpus`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(transparent)]
pub struct PaperIdx(u32);

impl PaperIdx {
    pub fn new(i: usize) -> Self {
        PaperIdx(u32::try_from(i).expect("paper index exceeds u32"))
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }
}

/// Dense index of an author inside a [`Corpus`]; order follows author id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(transparent)]
pub struct AuthorIdx(u32);

impl AuthorIdx {
    pub fn new(i: usize) -> Self {
        AuthorIdx(u32::try_from(i).expect("author index exceeds u32"))
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paper {
    pub id: String,
    pub year: i32,
    pub field: String,
    pub team_size: u32,
    /// Cited references that do not resolve to a paper in the corpus.
    pub n_refs_unlinked: u32,
}

/// Compressed sparse rows: `targets[offsets[i]..offsets[i + 1]]` are the
/// neighbours of node `i`, sorted ascending and free of duplicates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct Adjacency<T> {
    offsets: Vec<u32>,
    targets: Vec<T>,
}

impl<T: Copy + Ord> Adjacency<T> {
    /// `edges` must be sorted by (source, target) and deduplicated.
    fn from_sorted(n: usize, edges: impl IntoIterator<Item = (usize, T)>) -> Self {
        let mut offsets = vec![0u32; n + 1];
        let mut targets = Vec::new();
        for (src, dst) in edges {
            offsets[src + 1] += 1;
            targets.push(dst);
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        Adjacency { offsets, targets }
    }

    fn row(&self, i: usize) -> &[T] {
        &self.targets[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    fn len(&self) -> usize {
        self.targets.len()
    }
}

/// Counts of edges discarded while building a corpus.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    pub self_citations: usize,
    pub duplicate_citations: usize,
    pub duplicate_authorships: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    papers: Vec<Paper>,
    authors: Vec<String>,
    references: Adjacency<PaperIdx>,
    citers: Adjacency<PaperIdx>,
    paper_authors: Adjacency<AuthorIdx>,
    author_papers: Adjacency<PaperIdx>,
}

impl Corpus {
    /// Builds a canonical corpus.
    ///
    /// `citations` and `authorships` refer to positions in `papers` as given;
    /// papers are re-sorted by id and every index is remapped. Self-citations
    /// and duplicate edges are dropped and counted.
    pub fn build(
        mut papers: Vec<Paper>,
        citations: Vec<(usize, usize)>,
        authorships: Vec<(usize, String)>,
    ) -> Result<(Self, BuildReport)> {
        let n = papers.len();
        for p in &papers {
            if p.team_size == 0 {
                return Err(Error::Invalid(format!("paper {} has team_size 0", p.id)));
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| papers[a].id.cmp(&papers[b].id));
        for w in order.windows(2) {
            if papers[w[0]].id == papers[w[1]].id {
                return Err(Error::Invalid(format!(
                    "duplicate paper id {}",
                    papers[w[0]].id
                )));
            }
        }
        let mut remap = vec![0usize; n];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let mut slots: Vec<Option<Paper>> = papers.drain(..).map(Some).collect();
        let papers: Vec<Paper> = order
            .iter()
            .map(|&old| slots[old].take().expect("each paper moved once"))
            .collect();

        let mut report = BuildReport::default();
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(citations.len());
        for (citing, cited) in citations {
            if citing >= n || cited >= n {
                return Err(Error::Invalid("citation refers to unknown paper".into()));
            }
            if citing == cited {
                report.self_citations += 1;
                continue;
            }
            edges.push((remap[citing], remap[cited]));
        }
        edges.sort_unstable();
        let before = edges.len();
        edges.dedup();
        report.duplicate_citations = before - edges.len();

        let references = Adjacency::from_sorted(
            n,
            edges.iter().map(|&(s, t)| (s, PaperIdx::new(t))),
        );
        let mut reversed: Vec<(usize, usize)> = edges.iter().map(|&(s, t)| (t, s)).collect();
        reversed.sort_unstable();
        let citers = Adjacency::from_sorted(
            n,
            reversed.into_iter().map(|(s, t)| (s, PaperIdx::new(t))),
        );

        let mut authors: Vec<String> = authorships.iter().map(|(_, a)| a.clone()).collect();
        authors.sort_unstable();
        authors.dedup();
        let mut pa: Vec<(usize, usize)> = Vec::with_capacity(authorships.len());
        for (paper, author) in &authorships {
            if *paper >= n {
                return Err(Error::Invalid("authorship refers to unknown paper".into()));
            }
            let a = authors
                .binary_search(author)
                .expect("author collected above");
            pa.push((remap[*paper], a));
        }
        pa.sort_unstable();
        let before = pa.len();
        pa.dedup();
        report.duplicate_authorships = before - pa.len();
        let paper_authors =
            Adjacency::from_sorted(n, pa.iter().map(|&(p, a)| (p, AuthorIdx::new(a))));
        let mut ap: Vec<(usize, usize)> = pa.iter().map(|&(p, a)| (a, p)).collect();
        ap.sort_unstable();
        let author_papers = Adjacency::from_sorted(
            authors.len(),
            ap.into_iter().map(|(a, p)| (a, PaperIdx::new(p))),
        );

        Ok((
            Corpus {
                papers,
                authors,
                references,
                citers,
                paper_authors,
                author_papers,
            },
            report,
        ))
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn papers(&self) -> &[Paper] {
        &self.papers
    }

    pub fn paper(&self, idx: PaperIdx) -> &Paper {
        &self.papers[idx.get()]
    }

    pub fn indices(&self) -> impl Iterator<Item = PaperIdx> + '_ {
        (0..self.papers.len()).map(PaperIdx::new)
    }

    pub fn find(&self, id: &str) -> Option<PaperIdx> {
        self.papers
            .binary_search_by(|p| p.id.as_str().cmp(id))
            .ok()
            .map(PaperIdx::new)
    }

    pub fn num_citations(&self) -> usize {
        self.references.len()
    }

    /// Linked references of `idx`, ascending.
    pub fn references(&self, idx: PaperIdx) -> &[PaperIdx] {
        self.references.row(idx.get())
    }

    /// Papers citing `idx`, ascending.
    pub fn citers(&self, idx: PaperIdx) -> &[PaperIdx] {
        self.citers.row(idx.get())
    }

    /// Linked plus unlinked references.
    pub fn total_references(&self, idx: PaperIdx) -> u32 {
        self.references(idx).len() as u32 + self.paper(idx).n_refs_unlinked
    }

    pub fn authors_of(&self, idx: PaperIdx) -> &[AuthorIdx] {
        self.paper_authors.row(idx.get())
    }

    pub fn papers_of(&self, author: AuthorIdx) -> &[PaperIdx] {
        self.author_papers.row(author.get())
    }

    pub fn num_authors(&self) -> usize {
        self.authors.len()
    }

    pub fn num_authorships(&self) -> usize {
        self.paper_authors.len()
    }

    pub fn author_id(&self, author: AuthorIdx) -> &str {
        &self.authors[author.get()]
    }

    pub fn year_range(&self) -> Option<(i32, i32)> {
        let min = self.papers.iter().map(|p| p.year).min()?;
        let max = self.papers.iter().map(|p| p.year).max()?;
        Some((min, max))
    }

    /// Latest publication year in the corpus; the default citation horizon.
    pub fn horizon(&self) -> i32 {
        self.year_range().map(|(_, max)| max).unwrap_or(0)
    }

    /// Papers per field, in field-name order.
    pub fn field_counts(&self, papers: &[PaperIdx]) -> BTreeMap<&str, usize> {
        let mut out = BTreeMap::new();
        for &p in papers {
            *out.entry(self.paper(p).field.as_str()).or_insert(0) += 1;
        }
        out
    }

    /// Writes `papers.csv`, `citations.csv` and `authorships.csv` into `dir`
    /// in canonical order. Reloading them yields an identical corpus.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let open = |name: &str| -> Result<csv::Writer<std::fs::File>> {
            let path = dir.join(name);
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            Ok(csv::Writer::from_writer(file))
        };

        let mut w = open("papers.csv")?;
        w.write_record(["id", "year", "field", "team_size", "n_refs_unlinked"])?;
        for p in &self.papers {
            w.write_record([
                p.id.as_str(),
                &p.year.to_string(),
                p.field.as_str(),
                &p.team_size.to_string(),
                &p.n_refs_unlinked.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(dir.join("papers.csv"), e))?;

        let mut w = open("citations.csv")?;
        w.write_record(["citing_id", "cited_id"])?;
        for (i, p) in self.papers.iter().enumerate() {
            for r in self.references.row(i) {
                w.write_record([p.id.as_str(), self.paper(*r).id.as_str()])?;
            }
        }
        w.flush().map_err(|e| Error::io(dir.join("citations.csv"), e))?;

        let mut w = open("authorships.csv")?;
        w.write_record(["paper_id", "author_id"])?;
        for (i, p) in self.papers.iter().enumerate() {
            for a in self.paper_authors.row(i) {
                w.write_record([p.id.as_str(), self.author_id(*a)])?;
            }
        }
        w.flush().map_err(|e| Error::io(dir.join("authorships.csv"), e))?;
        Ok(())
    }

    pub fn save_binary(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        bincode::serialize_into(&mut w, &(crate::SCHEMA_VERSION, self))
            .map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn load_binary(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let (version, corpus): (u32, Corpus) =
            bincode::deserialize_from(std::io::BufReader::new(file))
                .map_err(|e| Error::schema(path.display().to_string(), e.to_string()))?;
        if version != crate::SCHEMA_VERSION {
            return Err(Error::schema(
                path.display().to_string(),
                format!("corpus schema {version}, expected {}", crate::SCHEMA_VERSION),
            ));
        }
        Ok(corpus)
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_sorts_and_indexes() {
        let c = fixtures::corpus(
            &[("c", 2001), ("a", 2000), ("b", 1999)],
            &[("c", "a"), ("a", "b"), ("c", "b")],
        );
        let ids: Vec<_> = c.papers().iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        let a = c.find("a").unwrap();
        let b = c.find("b").unwrap();
        let cc = c.find("c").unwrap();
        assert_eq!(c.references(cc), &[a, b]);
        assert_eq!(c.citers(b), &[a, cc]);
        assert_eq!(c.num_citations(), 3);
    }

    #[test]
    fn self_and_duplicate_edges_dropped() {
        let papers = vec![fixtures::paper("a", 2000), fixtures::paper("b", 2000)];
        let (c, report) =
            Corpus::build(papers, vec![(0, 1), (0, 1), (1, 1)], Vec::new()).unwrap();
        assert_eq!(c.num_citations(), 1);
        assert_eq!(report.self_citations, 1);
        assert_eq!(report.duplicate_citations, 1);
    }

    #[test]
    fn duplicate_id_rejected() {
        let papers = vec![fixtures::paper("a", 2000), fixtures::paper("a", 2001)];
        assert!(Corpus::build(papers, vec![], vec![]).is_err());
    }

    #[test]
    fn binary_round_trip() {
        let c = fixtures::g1();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.bin");
        c.save_binary(&path).unwrap();
        assert_eq!(Corpus::load_binary(&path).unwrap(), c);
    }
}
