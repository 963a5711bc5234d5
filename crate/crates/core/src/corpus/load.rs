use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{BuildReport, Corpus, Paper};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct CorpusPaths {
    pub papers: PathBuf,
    pub citations: PathBuf,
    pub authorships: PathBuf,
    pub field_map: Option<PathBuf>,
}

impl CorpusPaths {
    /// The three standard file names inside `dir`, without a field map.
    pub fn in_dir(dir: &Path) -> Self {
        CorpusPaths {
            papers: dir.join("papers.csv"),
            citations: dir.join("citations.csv"),
            authorships: dir.join("authorships.csv"),
            field_map: None,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Field delimiter; detected from the header line when `None`.
    pub delimiter: Option<u8>,
    /// Last year covered by the citation data. Papers published later are
    /// rejected.
    pub horizon: Option<i32>,
}

/// Validation summary printed by `specverse ingest`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct LoadReport {
    pub papers: usize,
    pub citations: usize,
    pub authorships: usize,
    pub authors: usize,
    pub unresolved_cited: usize,
    pub self_citations: usize,
    pub duplicate_citations: usize,
    pub duplicate_authorships: usize,
    pub skipped_authorships: usize,
    pub unmapped_categories: BTreeMap<String, usize>,
    pub team_size_from_authorships: bool,
}

impl fmt::Display for LoadReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "loaded {} papers, {} citations, {} authorships ({} authors)",
            self.papers, self.citations, self.authorships, self.authors
        )?;
        if self.team_size_from_authorships {
            writeln!(f, "  team_size derived from authorships")?;
        }
        let counts = [
            ("unresolved cited ids (counted as unlinked)", self.unresolved_cited),
            ("self-citations dropped", self.self_citations),
            ("duplicate citations dropped", self.duplicate_citations),
            ("duplicate authorships dropped", self.duplicate_authorships),
            ("authorships for unknown papers skipped", self.skipped_authorships),
        ];
        for (label, n) in counts {
            if n > 0 {
                writeln!(f, "  {label}: {n}")?;
            }
        }
        for (cat, n) in &self.unmapped_categories {
            writeln!(f, "  category {cat:?} not in field map, recoded to Other: {n}")?;
        }
        Ok(())
    }
}

struct Table {
    name: String,
    header: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path, delimiter: Option<u8>) -> Result<Self> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let first = text.lines().next().unwrap_or("");
        let delim = delimiter.unwrap_or(if first.contains('\t') { b'\t' } else { b',' });
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delim)
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| Error::schema(&name, e.to_string()))?
            .iter()
            .map(|h| h.trim_start_matches('\u{feff}').to_ascii_lowercase())
            .collect();
        if header.iter().all(|h| h.is_empty()) {
            return Err(Error::schema(&name, "missing header row"));
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                Error::malformed(&name, line, e.to_string())
            })?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            rows.push((line, rec));
        }
        Ok(Table { name, header, rows })
    }

    fn column(&self, names: &[&str]) -> Option<usize> {
        names
            .iter()
            .find_map(|n| self.header.iter().position(|h| h == n))
    }

    fn require(&self, names: &[&str]) -> Result<usize> {
        self.column(names).ok_or_else(|| {
            Error::schema(&self.name, format!("missing column {}", names.join("|")))
        })
    }
}

fn parse_field<T: std::str::FromStr>(
    table: &Table,
    line: u64,
    rec: &csv::StringRecord,
    col: usize,
    what: &str,
) -> Result<T> {
    let raw = rec.get(col).unwrap_or("");
    raw.parse().map_err(|_| {
        Error::malformed(&table.name, line, format!("invalid {what} {raw:?}"))
    })
}

/// Loads and validates the delimited corpus files.
pub fn load_corpus(paths: &CorpusPaths, opts: &LoadOptions) -> Result<(Corpus, LoadReport)> {
    let mut report = LoadReport::default();

    let field_map = match &paths.field_map {
        Some(p) => Some(read_field_map(p, opts.delimiter)?),
        None => None,
    };

    let table = Table::read(&paths.papers, opts.delimiter)?;
    let c_id = table.require(&["id", "paper_id"])?;
    let c_year = table.require(&["year"])?;
    let c_field = table.require(&["field", "category", "field_or_category"])?;
    let c_team = table.column(&["team_size"]);
    let c_unlinked = table.column(&["n_refs_unlinked"]);
    report.team_size_from_authorships = c_team.is_none();

    let mut papers = Vec::with_capacity(table.rows.len());
    let mut lines = Vec::with_capacity(table.rows.len());
    let mut by_id: HashMap<String, usize> = HashMap::with_capacity(table.rows.len());
    for (line, rec) in &table.rows {
        let id = rec.get(c_id).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(Error::malformed(&table.name, *line, "empty paper id"));
        }
        let year: i32 = parse_field(&table, *line, rec, c_year, "year")?;
        if let Some(h) = opts.horizon {
            if year > h {
                return Err(Error::malformed(
                    &table.name,
                    *line,
                    format!("paper {id} published in {year}, after the citation horizon {h}"),
                ));
            }
        }
        let raw_field = rec.get(c_field).unwrap_or("").to_string();
        let field = match &field_map {
            Some(map) => match map.get(&raw_field) {
                Some(major) => major.clone(),
                None => {
                    *report.unmapped_categories.entry(raw_field).or_insert(0) += 1;
                    "Other".to_string()
                }
            },
            None => raw_field,
        };
        let team_size = match c_team {
            Some(c) => {
                let t: u32 = parse_field(&table, *line, rec, c, "team_size")?;
                if t == 0 {
                    return Err(Error::malformed(
                        &table.name,
                        *line,
                        format!("paper {id} has team_size 0"),
                    ));
                }
                t
            }
            None => 0,
        };
        let n_refs_unlinked = match c_unlinked {
            Some(c) if !rec.get(c).unwrap_or("").is_empty() => {
                parse_field(&table, *line, rec, c, "n_refs_unlinked")?
            }
            _ => 0,
        };
        if by_id.insert(id.clone(), papers.len()).is_some() {
            return Err(Error::malformed(
                &table.name,
                *line,
                format!("duplicate paper id {id}"),
            ));
        }
        papers.push(Paper {
            id,
            year,
            field,
            team_size,
            n_refs_unlinked,
        });
        lines.push(*line);
    }

    let cites = Table::read(&paths.citations, opts.delimiter)?;
    let c_citing = cites.require(&["citing_id", "citing"])?;
    let c_cited = cites.require(&["cited_id", "cited"])?;
    let mut edges = Vec::with_capacity(cites.rows.len());
    for (line, rec) in &cites.rows {
        let citing = rec.get(c_citing).unwrap_or("");
        let cited = rec.get(c_cited).unwrap_or("");
        let Some(&src) = by_id.get(citing) else {
            return Err(Error::malformed(
                &cites.name,
                *line,
                format!("citing id {citing:?} is not in the papers file"),
            ));
        };
        match by_id.get(cited) {
            Some(&dst) => edges.push((src, dst)),
            None => {
                report.unresolved_cited += 1;
                if c_unlinked.is_none() {
                    papers[src].n_refs_unlinked += 1;
                }
            }
        }
    }

    let auths = Table::read(&paths.authorships, opts.delimiter)?;
    let c_paper = auths.require(&["paper_id", "paper"])?;
    let c_author = auths.require(&["author_id", "author"])?;
    let mut authorships = Vec::with_capacity(auths.rows.len());
    for (line, rec) in &auths.rows {
        let paper = rec.get(c_paper).unwrap_or("");
        let author = rec.get(c_author).unwrap_or("");
        if author.is_empty() {
            return Err(Error::malformed(&auths.name, *line, "empty author id"));
        }
        match by_id.get(paper) {
            Some(&p) => authorships.push((p, author.to_string())),
            None => report.skipped_authorships += 1,
        }
    }

    if c_team.is_none() {
        let mut seen: Vec<(usize, &str)> =
            authorships.iter().map(|(p, a)| (*p, a.as_str())).collect();
        seen.sort_unstable();
        seen.dedup();
        for (p, _) in seen {
            papers[p].team_size += 1;
        }
        if let Some(pos) = papers.iter().position(|p| p.team_size == 0) {
            return Err(Error::malformed(
                &table.name,
                lines[pos],
                format!("paper {} has no authorships to derive team_size from", papers[pos].id),
            ));
        }
    }

    let (corpus, build): (Corpus, BuildReport) = Corpus::build(papers, edges, authorships)?;
    report.papers = corpus.len();
    report.citations = corpus.num_citations();
    report.authorships = corpus.num_authorships();
    report.authors = corpus.num_authors();
    report.self_citations = build.self_citations;
    report.duplicate_citations = build.duplicate_citations;
    report.duplicate_authorships = build.duplicate_authorships;
    Ok((corpus, report))
}

fn read_field_map(path: &Path, delimiter: Option<u8>) -> Result<HashMap<String, String>> {
    let table = Table::read(path, delimiter)?;
    let c_cat = table.require(&["category"])?;
    let c_major = table.require(&["major_field", "field"])?;
    let mut map = HashMap::new();
    for (line, rec) in &table.rows {
        let cat = rec.get(c_cat).unwrap_or("").to_string();
        let major = rec.get(c_major).unwrap_or("").to_string();
        if major.is_empty() {
            return Err(Error::malformed(&table.name, *line, "empty major field"));
        }
        if map.insert(cat.clone(), major).is_some() {
            return Err(Error::malformed(
                &table.name,
                *line,
                format!("category {cat:?} mapped twice"),
            ));
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    fn paths(dir: &Path, papers: &str, cites: &str, auths: &str) -> CorpusPaths {
        CorpusPaths {
            papers: write(dir, "papers.csv", papers),
            citations: write(dir, "citations.csv", cites),
            authorships: write(dir, "authorships.csv", auths),
            field_map: None,
        }
    }

    #[test]
    fn three_paper_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let p = paths(
            dir.path(),
            "id,year,field,team_size\nFP,2000,Bio,2\ncit,2001,Bio,1\nref,1999,Bio,3\n",
            "citing_id,cited_id\nFP,ref\ncit,FP\n",
            "paper_id,author_id\n",
        );
        let (c, report) = load_corpus(&p, &LoadOptions::default()).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.num_citations(), 2);
        let fp = c.find("FP").unwrap();
        assert_eq!(c.citers(fp), &[c.find("cit").unwrap()]);
        assert_eq!(report.unresolved_cited, 0);
    }

    #[test]
    fn zero_team_size_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let p = paths(
            dir.path(),
            "id,year,field,team_size\nA,2000,Bio,1\nB,2000,Bio,0\n",
            "citing_id,cited_id\n",
            "paper_id,author_id\n",
        );
        let err = load_corpus(&p, &LoadOptions::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":3:"), "{msg}");
        assert!(msg.contains("team_size 0"), "{msg}");
    }

    #[test]
    fn unresolved_cited_counts_as_unlinked() {
        let dir = tempfile::tempdir().unwrap();
        let p = paths(
            dir.path(),
            "id,year,field,team_size\nA,2000,Bio,1\nB,1999,Bio,1\n",
            "citing_id,cited_id\nA,B\nA,X9\n",
            "paper_id,author_id\n",
        );
        let (c, report) = load_corpus(&p, &LoadOptions::default()).unwrap();
        let a = c.find("A").unwrap();
        assert_eq!(c.paper(a).n_refs_unlinked, 1);
        assert_eq!(c.references(a).len(), 1);
        assert_eq!(c.num_citations(), 1);
        assert_eq!(report.unresolved_cited, 1);
    }

    #[test]
    fn explicit_unlinked_column_wins() {
        let dir = tempfile::tempdir().unwrap();
        let p = paths(
            dir.path(),
            "id,year,field,team_size,n_refs_unlinked\nA,2000,Bio,1,4\n",
            "citing_id,cited_id\nA,X9\n",
            "paper_id,author_id\n",
        );
        let (c, _) = load_corpus(&p, &LoadOptions::default()).unwrap();
        assert_eq!(c.papers()[0].n_refs_unlinked, 4);
    }

    #[test]
    fn unknown_citing_id_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = paths(
            dir.path(),
            "id,year,field,team_size\nA,2000,Bio,1\n",
            "citing_id,cited_id\nZ,A\n",
            "paper_id,author_id\n",
        );
        let err = load_corpus(&p, &LoadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("citations.csv:2"), "{err}");
    }

    #[test]
    fn duplicate_paper_id_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = paths(
            dir.path(),
            "id,year,field,team_size\nA,2000,Bio,1\nA,2001,Bio,1\n",
            "citing_id,cited_id\n",
            "paper_id,author_id\n",
        );
        assert!(matches!(
            load_corpus(&p, &LoadOptions::default()),
            Err(Error::MalformedRow { line: 3, .. })
        ));
    }

    #[test]
    fn team_size_from_authorships_and_tabs() {
        let dir = tempfile::tempdir().unwrap();
        let p = paths(
            dir.path(),
            "id\tyear\tfield\nA\t2000\tcat1\nB\t2001\tcat2\n",
            "citing_id\tcited_id\nB\tA\n",
            "paper_id\tauthor_id\nA\tx\nA\ty\nB\tx\n",
        );
        let mut p = p;
        p.field_map = Some(write(dir.path(), "map.csv", "category,major_field\ncat1,Biology\n"));
        let (c, report) = load_corpus(&p, &LoadOptions::default()).unwrap();
        assert_eq!(c.paper(c.find("A").unwrap()).team_size, 2);
        assert_eq!(c.paper(c.find("B").unwrap()).team_size, 1);
        assert_eq!(c.paper(c.find("A").unwrap()).field, "Biology");
        assert_eq!(c.paper(c.find("B").unwrap()).field, "Other");
        assert_eq!(report.unmapped_categories.get("cat2"), Some(&1));
    }

    #[test]
    fn papers_after_horizon_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = paths(
            dir.path(),
            "id,year,field,team_size\nA,2030,Bio,1\n",
            "citing_id,cited_id\n",
            "paper_id,author_id\n",
        );
        let opts = LoadOptions {
            horizon: Some(2023),
            ..Default::default()
        };
        assert!(load_corpus(&p, &opts).is_err());
    }

    #[test]
    fn csv_export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = paths(
            dir.path(),
            "id,year,field,team_size\nA,2000,Bio,2\nB,2001,Med,1\nC,2002,Bio,1\n",
            "citing_id,cited_id\nB,A\nC,A\nC,B\nC,missing\n",
            "paper_id,author_id\nA,x\nA,y\nB,x\nC,z\n",
        );
        let (c, _) = load_corpus(&p, &LoadOptions::default()).unwrap();
        let out = dir.path().join("export");
        c.write_csv(&out).unwrap();
        let (again, _) = load_corpus(&CorpusPaths::in_dir(&out), &LoadOptions::default()).unwrap();
        assert_eq!(again, c);
    }
}
