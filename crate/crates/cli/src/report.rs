//! Aligned text tables and delimited files summarising an [`EstimateSet`].

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use specverse_core::multiverse::{extremes, influence_all, model_sd, EstimateSet, InfluenceStat};
use specverse_core::{Error, Result};

/// A table with a title, header and string cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Printed under the table.
    pub note: Option<String>,
}

impl Table {
    fn new(title: &str, header: &[&str]) -> Self {
        Table {
            title: title.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            note: None,
        }
    }

    /// Columns padded to their widest cell; the first column is left aligned.
    pub fn render(&self) -> String {
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String]| -> String {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, &w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            parts.join("  ").trim_end().to_string()
        };
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.title);
        let _ = writeln!(out, "{}", line(&self.header));
        let total: usize = widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1);
        let _ = writeln!(out, "{}", "-".repeat(total));
        for row in &self.rows {
            let _ = writeln!(out, "{}", line(row));
        }
        if let Some(note) = &self.note {
            let _ = writeln!(out, "{note}");
        }
        out
    }
}

/// Machine-readable values behind the report tables, at full precision.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub tables: Vec<Table>,
    /// File name and rows (header first) of each delimited output.
    pub files: Vec<(String, Vec<Vec<String>>)>,
}

fn r4(x: f64) -> String {
    format!("{x:.4}")
}

fn pct(x: f64) -> String {
    format!("{:.0}%", 100.0 * x)
}

fn p_value(p: f64) -> String {
    if p < 0.001 {
        "< 0.001".into()
    } else {
        format!("{p:.3}")
    }
}

/// Builds the robustness, sign stability, influence and extremes tables.
pub fn build_report(set: &EstimateSet) -> Result<Report> {
    let summary = model_sd(set)?;
    let mut tables = Vec::new();
    let mut files = Vec::new();

    let mut t = Table::new("Model robustness", &["Model space", "Mean (b)", "Model SD", "Sign stability"]);
    t.rows.push(vec![
        summary.k.to_string(),
        r4(summary.mean),
        r4(summary.model_sd),
        pct(summary.fraction_negative_significant),
    ]);
    let failed = summary.k - summary.k_ok;
    t.note = Some(format!(
        "Sign stability is the share of negative estimates with p < {}.{}",
        summary.alpha,
        if failed > 0 {
            format!(" {failed} failed models are excluded.")
        } else {
            String::new()
        }
    ));
    tables.push(t);
    files.push((
        "report_robustness.csv".to_string(),
        vec![
            ["universe", "k", "k_ok", "mean", "v_m", "model_sd", "sign_stability", "alpha"]
                .map(String::from)
                .to_vec(),
            vec![
                set.universe.clone(),
                summary.k.to_string(),
                summary.k_ok.to_string(),
                summary.mean.to_string(),
                summary.v_m.to_string(),
                summary.model_sd.to_string(),
                summary.fraction_negative_significant.to_string(),
                summary.alpha.to_string(),
            ],
        ],
    ));

    let s = summary.signs;
    let mut t = Table::new("Sign stability", &["Significant", "Negative", "Positive", "Total"]);
    let row = |label: &str, neg: usize, pos: usize| {
        vec![label.to_string(), neg.to_string(), pos.to_string(), (neg + pos).to_string()]
    };
    t.rows.push(row("No", s.negative_not_significant, s.positive_not_significant));
    t.rows.push(row("Yes", s.negative_significant, s.positive_significant));
    t.rows.push(row(
        "Total",
        s.negative_significant + s.negative_not_significant,
        s.positive_significant + s.positive_not_significant,
    ));
    let sign_rows: Vec<Vec<String>> = t.rows.clone();
    tables.push(t);
    let mut rows = vec![["significant", "negative", "positive", "total"].map(String::from).to_vec()];
    rows.extend(sign_rows);
    files.push(("report_signs.csv".to_string(), rows));

    let influences = influence_all(set)?;
    let benchmark = set.benchmark_estimate();
    let mut t = Table::new("Influence", &["Dimension", "Option", "Marginal effect", "Percent of benchmark"]);
    t.note = Some(match (&set.benchmark, benchmark) {
        (Some(name), Some(b)) => format!("Benchmark: model {name} estimates {}", r4(b)),
        (Some(name), None) => format!("Benchmark: model {name} has no estimate"),
        _ => "No benchmark".to_string(),
    });
    let mut rows = vec![["dimension", "option", "reference", "delta", "n_pairs", "percent_of_benchmark"]
        .map(String::from)
        .to_vec()];
    let mut last_dim = String::new();
    for s in &influences {
        if s.dimension != last_dim {
            t.rows.push(vec![s.dimension.clone(), String::new(), String::new(), String::new()]);
            t.rows.push(vec![String::new(), s.reference.clone(), "Reference".into(), String::new()]);
            last_dim = s.dimension.clone();
        }
        t.rows.push(influence_row(s));
        rows.push(vec![
            s.dimension.clone(),
            s.option.clone(),
            s.reference.clone(),
            s.delta.map(|v| v.to_string()).unwrap_or_default(),
            s.n_pairs.to_string(),
            s.percent_of_benchmark.map(|v| v.to_string()).unwrap_or_default(),
        ]);
    }
    tables.push(t);
    files.push(("report_influence.csv".to_string(), rows));

    let (lo, hi) = extremes(set)?;
    let mut header: Vec<&str> = set.dimensions.iter().map(|d| d.name.as_str()).collect();
    let mut t_header = vec!["Extreme"];
    t_header.extend(header.iter().copied());
    t_header.extend(["Estimate", "SE", "p"]);
    let mut t = Table::new("Minimum and maximum estimates", &t_header);
    let mut rows = Vec::new();
    header.insert(0, "extreme");
    header.insert(1, "model_id");
    header.extend(["estimate", "se", "p"]);
    rows.push(header.iter().map(|s| s.to_string()).collect());
    for (label, e) in [("min", &lo), ("max", &hi)] {
        let mut row = vec![label.to_string()];
        row.extend(e.labels.iter().cloned());
        row.extend([r4(e.estimate), format!("{:.5}", e.se), p_value(e.p)]);
        t.rows.push(row);
        let mut row = vec![label.to_string(), e.model_id.to_string()];
        row.extend(e.labels.iter().cloned());
        row.extend([e.estimate.to_string(), e.se.to_string(), e.p.to_string()]);
        rows.push(row);
    }
    tables.push(t);
    files.push(("report_extremes.csv".to_string(), rows));

    Ok(Report { tables, files })
}

fn influence_row(s: &InfluenceStat) -> Vec<String> {
    let na = || "n/a".to_string();
    vec![
        String::new(),
        s.option.clone(),
        s.delta.map(r4).unwrap_or_else(na),
        s.percent_of_benchmark.map(|v| format!("{v:.0}%")).unwrap_or_else(na),
    ]
}

impl Report {
    pub fn render(&self) -> String {
        self.tables.iter().map(Table::render).collect::<Vec<_>>().join("\n")
    }

    /// Writes `report.txt` and the delimited files into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        let path = dir.join("report.txt");
        fs::write(&path, self.render()).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        for (name, rows) in &self.files {
            let path = dir.join(name);
            let mut w = csv::Writer::from_path(&path).map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(&path, io),
                other => Error::Serialization(format!("{other:?}")),
            })?;
            for row in rows {
                w.write_record(row)?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}
