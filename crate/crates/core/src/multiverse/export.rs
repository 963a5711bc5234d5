use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::stats::{extremes, influence_all, kernel_density, model_sd, Extreme, InfluenceStat, MultiverseSummary};
use super::{Dimension, EstimateSet, ModelEstimate, NamedEstimate, Outcome};
use crate::error::{Error, Result};

const ESTIMATES: &str = "estimates.csv";
const SUMMARY: &str = "summary.json";
const CURVE: &str = "curve.csv";
const INFLUENCE: &str = "influence.csv";
const DENSITY: &str = "density.csv";

/// Grid size of the exported density curve.
const DENSITY_POINTS: usize = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SummaryFile {
    schema_version: u32,
    universe: String,
    alpha: f64,
    benchmark: Option<String>,
    benchmark_estimate: Option<f64>,
    dimensions: Vec<Dimension>,
    named_models: Vec<NamedEstimate>,
    summary: Option<MultiverseSummary>,
    influence: Vec<InfluenceStat>,
    minimum: Option<Extreme>,
    maximum: Option<Extreme>,
    density_bandwidth: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExportedFiles {
    pub written: Vec<PathBuf>,
    /// Set when the density file was skipped, with the reason.
    pub density_skipped: Option<String>,
}

/// Writes `estimates.csv`, `summary.json`, `curve.csv`, `influence.csv` and,
/// when the estimates are not degenerate, `density.csv`.
pub fn export_results(set: &EstimateSet, out_dir: &Path) -> Result<ExportedFiles> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut files = ExportedFiles::default();

    let summary = match model_sd(set) {
        Ok(s) => Some(s),
        Err(Error::NoEstimates) => None,
        Err(e) => return Err(e),
    };
    let influences = influence_all(set)?;
    let ext = extremes(set).ok();

    let path = out_dir.join(ESTIMATES);
    write_estimates(set, &path)?;
    files.written.push(path);

    let path = out_dir.join(CURVE);
    let mut w = writer(&path)?;
    w.write_record(["rank", "model_id", "estimate", "se", "p", "significant"])?;
    let mut ok: Vec<(&ModelEstimate, (f64, f64, f64))> = set.ok_estimates().collect();
    ok.sort_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.model_id.cmp(&b.0.model_id)));
    for (rank, (m, (b, se, p))) in ok.iter().enumerate() {
        w.write_record([
            (rank + 1).to_string(),
            m.model_id.to_string(),
            b.to_string(),
            se.to_string(),
            p.to_string(),
            (*p < set.alpha).to_string(),
        ])?;
    }
    finish(w, &path)?;
    files.written.push(path);

    let path = out_dir.join(INFLUENCE);
    let mut w = writer(&path)?;
    w.write_record(["dimension", "option", "reference", "delta", "n_pairs", "percent_of_benchmark"])?;
    for s in &influences {
        w.write_record([
            s.dimension.clone(),
            s.option.clone(),
            s.reference.clone(),
            s.delta.map(|v| v.to_string()).unwrap_or_default(),
            s.n_pairs.to_string(),
            s.percent_of_benchmark.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    finish(w, &path)?;
    files.written.push(path);

    let estimates: Vec<f64> = ok.iter().map(|(_, (b, _, _))| *b).collect();
    let density = kernel_density(&estimates, DENSITY_POINTS);
    let path = out_dir.join(DENSITY);
    match &density {
        Some((_, grid)) => {
            let mut w = writer(&path)?;
            w.write_record(["x", "density"])?;
            for (x, d) in grid {
                w.write_record([x.to_string(), d.to_string()])?;
            }
            finish(w, &path)?;
            files.written.push(path);
        }
        None => {
            let reason = "estimates are degenerate; density export skipped".to_string();
            log::warn!("{reason}");
            if path.exists() {
                fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
            files.density_skipped = Some(reason);
        }
    }

    let (minimum, maximum) = match ext {
        Some((lo, hi)) => (Some(lo), Some(hi)),
        None => (None, None),
    };
    let doc = SummaryFile {
        schema_version: crate::SCHEMA_VERSION,
        universe: set.universe.clone(),
        alpha: set.alpha,
        benchmark: set.benchmark.clone(),
        benchmark_estimate: set.benchmark_estimate(),
        dimensions: set.dimensions.clone(),
        named_models: set.named.clone(),
        summary,
        influence: influences,
        minimum,
        maximum,
        density_bandwidth: density.map(|(h, _)| h),
    };
    let path = out_dir.join(SUMMARY);
    let text = serde_json::to_string_pretty(&doc)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    files.written.push(path);
    Ok(files)
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_estimates(set: &EstimateSet, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["model_id".to_string()];
    header.extend(set.dimensions.iter().map(|d| d.name.clone()));
    header.extend(["estimate", "se", "p", "n", "status"].map(String::from));
    w.write_record(&header)?;
    for m in &set.models {
        let mut row = vec![m.model_id.to_string()];
        row.extend(set.labels(m).into_iter().map(String::from));
        match &m.outcome {
            Outcome::Ok { estimate, se, p, n } => {
                row.extend([estimate.to_string(), se.to_string(), p.to_string(), n.to_string()]);
                row.push("ok".into());
            }
            Outcome::Failed { reason } => {
                row.extend(std::iter::repeat_n(String::new(), 4));
                row.push(format!("failed: {reason}"));
            }
            Outcome::Infeasible { reason } => {
                row.extend(std::iter::repeat_n(String::new(), 4));
                row.push(format!("infeasible: {reason}"));
            }
        }
        w.write_record(&row)?;
    }
    finish(w, path)
}

/// Reloads an estimate set from `estimates.csv` and `summary.json`.
pub fn load_results(dir: &Path) -> Result<EstimateSet> {
    let summary_path = dir.join(SUMMARY);
    let text = fs::read_to_string(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
    let doc: SummaryFile = serde_json::from_str(&text)
        .map_err(|e| Error::schema(summary_path.display().to_string(), e.to_string()))?;

    let path = dir.join(ESTIMATES);
    let file = path.display().to_string();
    let f = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut r = csv::Reader::from_reader(f);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let d = doc.dimensions.len();
    let expected_tail = ["estimate", "se", "p", "n", "status"];
    let ok_header = header.len() == d + 6
        && header[0] == "model_id"
        && header[1..=d]
            .iter()
            .zip(&doc.dimensions)
            .all(|(h, dim)| *h == dim.name)
        && header[d + 1..].iter().zip(expected_tail).all(|(h, e)| h == e);
    if !ok_header {
        return Err(Error::schema(&file, "estimates header does not match summary dimensions"));
    }

    let mut models = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = (i + 2) as u64;
        let bad = |m: String| Error::malformed(&file, line, m);
        let model_id: usize = rec[0].parse().map_err(|_| bad(format!("bad model id {:?}", &rec[0])))?;
        let mut options = Vec::with_capacity(d);
        for (j, dim) in doc.dimensions.iter().enumerate() {
            let label = &rec[j + 1];
            let o = dim
                .options
                .iter()
                .position(|x| x == label)
                .ok_or_else(|| bad(format!("{label:?} is not an option of {}", dim.name)))?;
            options.push(o);
        }
        let status = &rec[d + 5];
        let outcome = if status == "ok" {
            let f = |k: usize| -> Result<f64> {
                rec[d + k].parse().map_err(|_| bad(format!("bad number {:?}", &rec[d + k])))
            };
            Outcome::Ok {
                estimate: f(1)?,
                se: f(2)?,
                p: f(3)?,
                n: rec[d + 4].parse().map_err(|_| bad(format!("bad n {:?}", &rec[d + 4])))?,
            }
        } else if let Some(reason) = status.strip_prefix("failed: ") {
            Outcome::Failed {
                reason: reason.to_string(),
            }
        } else if let Some(reason) = status.strip_prefix("infeasible: ") {
            Outcome::Infeasible {
                reason: reason.to_string(),
            }
        } else {
            return Err(bad(format!("unknown status {status:?}")));
        };
        models.push(ModelEstimate {
            model_id,
            options,
            outcome,
        });
    }
    Ok(EstimateSet {
        universe: doc.universe,
        dimensions: doc.dimensions,
        models,
        named: doc.named_models,
        benchmark: doc.benchmark,
        alpha: doc.alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiverse::UniverseSpec;

    fn three() -> EstimateSet {
        let u = UniverseSpec::from_json(
            r#"{"dimensions": [{"name": "index", "options": ["DI1", "DI2", "DI3"], "reference": "DI1"}]}"#,
            "t",
        )
        .unwrap();
        let o = |b: f64| Outcome::Ok {
            estimate: b,
            se: 0.01,
            p: 0.2,
            n: 10,
        };
        EstimateSet::from_outcomes(&u, vec![o(0.3), o(-0.1), o(0.1 + 0.2)])
    }

    #[test]
    fn three_models_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let set = three();
        export_results(&set, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join(ESTIMATES)).unwrap();
        assert_eq!(text.lines().count(), 4);
        let curve = fs::read_to_string(dir.path().join(CURVE)).unwrap();
        let ids: Vec<&str> = curve.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
        assert_eq!(ids, vec!["2", "1", "3"]);
        assert_eq!(load_results(dir.path()).unwrap(), set);
    }

    #[test]
    fn degenerate_density_is_skipped() {
        let u = UniverseSpec::from_json(
            r#"{"dimensions": [{"name": "index", "options": ["DI1", "DI2"], "reference": "DI1"}]}"#,
            "t",
        )
        .unwrap();
        let o = Outcome::Ok {
            estimate: 0.0,
            se: 1.0,
            p: 1.0,
            n: 3,
        };
        let set = EstimateSet::from_outcomes(&u, vec![o.clone(), o]);
        let dir = tempfile::tempdir().unwrap();
        let files = export_results(&set, dir.path()).unwrap();
        assert!(files.density_skipped.is_some());
        assert!(!dir.path().join(DENSITY).exists());
    }

    #[test]
    fn failed_rows_survive_reload() {
        let mut set = three();
        set.models[1].outcome = Outcome::Failed {
            reason: "design matrix is rank deficient; collinear columns: a, b".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        export_results(&set, dir.path()).unwrap();
        assert_eq!(load_results(dir.path()).unwrap(), set);
    }
}
