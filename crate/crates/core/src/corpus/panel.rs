use serde::{Deserialize, Serialize};

use super::filter::qualifying_authors;
use super::{AuthorIdx, Corpus, PaperIdx};

/// Author–paper rows for fixed-effects estimation. A paper appears once for
/// every qualifying author.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorPaperPanel {
    /// Sorted by (author, paper).
    pub rows: Vec<(AuthorIdx, PaperIdx)>,
    /// Rows per retained author, sorted by author.
    pub author_counts: Vec<(AuthorIdx, usize)>,
}

impl AuthorPaperPanel {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn num_authors(&self) -> usize {
        self.author_counts.len()
    }
}

/// Builds the panel over `papers`; authors with fewer than
/// `min_papers_per_author` papers there are dropped with their rows.
pub fn build_panel(corpus: &Corpus, papers: &[PaperIdx], min_papers_per_author: u32) -> AuthorPaperPanel {
    let keep = qualifying_authors(corpus, papers, min_papers_per_author.max(1));
    let mut rows: Vec<(AuthorIdx, PaperIdx)> = papers
        .iter()
        .flat_map(|&p| {
            corpus
                .authors_of(p)
                .iter()
                .filter(|a| keep[a.get()])
                .map(move |&a| (a, p))
        })
        .collect();
    rows.sort_unstable();
    rows.dedup();
    let mut author_counts: Vec<(AuthorIdx, usize)> = Vec::new();
    for &(a, _) in &rows {
        match author_counts.last_mut() {
            Some((last, n)) if *last == a => *n += 1,
            _ => author_counts.push((a, 1)),
        }
    }
    AuthorPaperPanel {
        rows,
        author_counts,
    }
}
