//! Command-line front end: `ingest`, `disrupt`, `multiverse`, `synth`,
//! `report` and `selftest`.

pub mod report;

use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use specverse_core::corpus::{apply_filters, load_corpus, Corpus, CorpusPaths, FilterSpec, LoadOptions, SampleView};
use specverse_core::disruption::{batch_scores, NrMode, ScoreMatrix, Variant, WindowSpec};
use specverse_core::multiverse::{export_results, load_results, model_sd, run_universe, UniverseSpec};
use specverse_core::synth::{generate, SynthSpec, GENERATOR_VERSION};
use specverse_core::{selftest, SCHEMA_VERSION};

pub static VERSION: LazyLock<String> = LazyLock::new(|| {
    format!(
        "{} (schema {SCHEMA_VERSION}, generator {GENERATOR_VERSION})",
        env!("CARGO_PKG_VERSION")
    )
});

#[derive(Debug, Parser)]
#[command(name = "specverse", about = "Disruption indices and multiverse regression over citation networks")]
pub struct Cli {
    /// Worker threads for scoring and model fits.
    #[arg(long, global = true, env = "SPECVERSE_WORKERS", value_parser = clap::value_parser!(u16).range(1..))]
    pub workers: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate delimited corpus files and save a binary corpus.
    Ingest(IngestArgs),
    /// Score disruption-index variants for a sample of papers.
    Disrupt(DisruptArgs),
    /// Fit every model of a universe and export the estimates.
    Multiverse(MultiverseArgs),
    /// Generate a synthetic corpus with known ground truth.
    Synth(SynthArgs),
    /// Summarise exported multiverse results.
    Report(ReportArgs),
    /// Compare the fast paths against the slow oracles.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub papers: PathBuf,
    #[arg(long)]
    pub citations: PathBuf,
    #[arg(long)]
    pub authorships: PathBuf,
    #[arg(long)]
    pub field_map: Option<PathBuf>,
    /// Field delimiter; detected from the header when omitted.
    #[arg(long)]
    pub delimiter: Option<char>,
    /// Last year covered by the citation data.
    #[arg(long)]
    pub horizon: Option<i32>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DisruptArgs {
    /// Binary corpus from `ingest`, or a directory holding the three CSV files.
    #[arg(long)]
    pub corpus: PathBuf,
    /// File with a `paper_id` column restricting the scored papers.
    #[arg(long, conflicts_with = "filter")]
    pub sample: Option<PathBuf>,
    /// Sample filters: `default`, `none` or a JSON file.
    #[arg(long)]
    pub filter: Option<String>,
    /// Also score every variant this universe needs (`table4`, `table7` or a JSON file).
    #[arg(long)]
    pub universe: Option<String>,
    /// Coupling thresholds, as `1..5` or `1,2,3`.
    #[arg(long)]
    pub thresholds: Option<String>,
    /// Citation windows, as `5,10,15,horizon` or `horizon:2023`.
    #[arg(long)]
    pub windows: Option<String>,
    /// `consistent`, `legacy` or `both`.
    #[arg(long)]
    pub nr_mode: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the scored paper ids here.
    #[arg(long)]
    pub sample_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MultiverseArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub scores: PathBuf,
    /// `table4`, `table7` or a JSON universe file.
    #[arg(long)]
    pub universe: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON generator settings; built-in defaults when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Overrides the seed of the settings file.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory written by `multiverse`.
    #[arg(long)]
    pub results: PathBuf,
    /// Also write `report.txt` and delimited tables here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] specverse_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0} oracle suite(s) failed")]
    SelftestFailed(usize),
    #[error("worker pool: {0}")]
    Pool(String),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.category(),
            CliError::Usage(_) => "usage",
            CliError::SelftestFailed(_) => "selftest",
            CliError::Pool(_) => "internal",
        }
    }

    /// 2 usage, 3 missing file, 4 schema, 5 data or estimation, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            "usage" => 2,
            "missing_file" => 3,
            "schema" => 4,
            "invalid_input" | "undefined_score" | "estimation" | "statistics" => 5,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Runs one parsed command on a pool sized by `--workers`.
pub fn run(cli: Cli) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        builder = builder.num_threads(n.into());
    }
    let pool = builder.build().map_err(|e| CliError::Pool(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Disrupt(a) => disrupt(a),
        Command::Multiverse(a) => multiverse(a),
        Command::Synth(a) => synth(a),
        Command::Report(a) => report_cmd(a),
        Command::Selftest(a) => selftest_cmd(a),
    })
}

fn ingest(a: IngestArgs) -> CliResult<()> {
    let delimiter = match a.delimiter {
        Some(c) if c.is_ascii() => Some(c as u8),
        Some(c) => return Err(CliError::Usage(format!("delimiter {c:?} is not ASCII"))),
        None => None,
    };
    let paths = CorpusPaths {
        papers: a.papers,
        citations: a.citations,
        authorships: a.authorships,
        field_map: a.field_map,
    };
    let (corpus, report) = load_corpus(&paths, &LoadOptions { delimiter, horizon: a.horizon })?;
    eprint!("{report}");
    corpus.save_binary(&a.out)?;
    Ok(())
}

/// Loads a binary corpus or the CSV files of a directory.
pub fn load_corpus_arg(path: &Path) -> CliResult<Corpus> {
    if path.is_dir() {
        let (corpus, report) = load_corpus(&CorpusPaths::in_dir(path), &LoadOptions::default())?;
        log::info!("{}", report.to_string().trim_end());
        Ok(corpus)
    } else {
        Ok(Corpus::load_binary(path)?)
    }
}

/// `table4` and `table7` name the shipped universes; anything else is a path.
pub fn load_universe(arg: &str) -> CliResult<UniverseSpec> {
    Ok(match arg {
        "table4" => UniverseSpec::table4(),
        "table7" => UniverseSpec::table7(),
        path => UniverseSpec::from_path(Path::new(path))?,
    })
}

fn load_filter(arg: &str) -> CliResult<FilterSpec> {
    let spec = match arg {
        "default" => FilterSpec::default(),
        "none" => FilterSpec::none(),
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| specverse_core::Error::io(path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| specverse_core::Error::schema(path, e.to_string()))?
        }
    };
    spec.validate()?;
    Ok(spec)
}

/// Parses `1..5` (inclusive) or a comma-separated list.
pub fn parse_thresholds(s: &str) -> CliResult<Vec<u32>> {
    let bad = || CliError::Usage(format!("bad thresholds {s:?}"));
    let out: Vec<u32> = if let Some((lo, hi)) = s.split_once("..") {
        let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u32 = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        (lo..=hi).collect()
    } else {
        s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect::<CliResult<_>>()?
    };
    if out.is_empty() || out.contains(&0) {
        return Err(bad());
    }
    Ok(out)
}

fn parse_nr_modes(s: &str) -> CliResult<Vec<NrMode>> {
    match s {
        "both" => Ok(vec![NrMode::Consistent, NrMode::Legacy]),
        other => Ok(vec![other.parse()?]),
    }
}

fn disrupt(a: DisruptArgs) -> CliResult<()> {
    let corpus = load_corpus_arg(&a.corpus)?;
    let horizon = corpus.horizon();
    let universe = a.universe.as_deref().map(load_universe).transpose()?;

    let mut variants: Vec<Variant> = Vec::new();
    let explicit = a.thresholds.is_some() || a.windows.is_some() || a.nr_mode.is_some();
    if explicit || universe.is_none() {
        let thresholds = parse_thresholds(a.thresholds.as_deref().unwrap_or("1..5"))?;
        let windows = a
            .windows
            .as_deref()
            .unwrap_or("5,10,15,horizon")
            .split(',')
            .map(|w| WindowSpec::parse_with_horizon(w, horizon))
            .collect::<specverse_core::Result<Vec<_>>>()?;
        let modes = parse_nr_modes(a.nr_mode.as_deref().unwrap_or("consistent"))?;
        for &m in &modes {
            for &w in &windows {
                for &b in &thresholds {
                    variants.push(Variant::new(b, w, m));
                }
            }
        }
    }
    if let Some(u) = &universe {
        variants.extend(u.required_variants(horizon));
    }
    let mut seen = std::collections::BTreeSet::new();
    variants.retain(|v| seen.insert(*v));

    let sample = if let Some(path) = &a.sample {
        SampleView::read_csv(&corpus, path)?
    } else if let Some(arg) = &a.filter {
        let mut filter = load_filter(arg)?;
        if filter.require_cited && filter.cited_windows.is_empty() {
            if let Some(u) = &universe {
                filter.cited_windows = u.required_windows(horizon);
            }
        }
        let view = apply_filters(&corpus, &filter, None)?;
        log::info!("{:?}", view.provenance);
        view
    } else {
        SampleView::all(&corpus)
    };
    if let Some(path) = &a.sample_out {
        sample.write_csv(&corpus, path)?;
    }

    let scores = batch_scores(&corpus, sample.papers(), &variants);
    scores.write_csv(&corpus, &a.out)?;
    eprintln!(
        "scored {} papers on {} variants -> {}",
        sample.len(),
        variants.len(),
        a.out.display()
    );
    Ok(())
}

fn multiverse(a: MultiverseArgs) -> CliResult<()> {
    let corpus = load_corpus_arg(&a.corpus)?;
    let universe = load_universe(&a.universe)?;
    let scores = ScoreMatrix::read_csv(&corpus, &a.scores)?;
    let set = run_universe(&corpus, &scores, &universe);
    let files = export_results(&set, &a.out)?;
    let ok = set.ok_estimates().count();
    eprintln!("{} models, {ok} estimated -> {}", set.k(), a.out.display());
    if let Some(reason) = files.density_skipped {
        eprintln!("{reason}");
    }
    Ok(())
}

fn synth(a: SynthArgs) -> CliResult<()> {
    let mut spec = match &a.spec {
        Some(path) => SynthSpec::from_path(path)?,
        None => SynthSpec::default(),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let (corpus, truth) = generate(&spec)?;
    corpus.write_csv(&a.out)?;
    truth.write(&a.out.join("truth.json"))?;
    eprintln!(
        "generated {} papers, {} citations -> {}",
        corpus.len(),
        corpus.num_citations(),
        a.out.display()
    );
    Ok(())
}

fn report_cmd(a: ReportArgs) -> CliResult<()> {
    let set = load_results(&a.results)?;
    // Fail early with a data error when nothing was estimated.
    model_sd(&set)?;
    let report = report::build_report(&set)?;
    print!("{}", report.render());
    if let Some(dir) = &a.out {
        report.write(dir)?;
    }
    Ok(())
}

fn selftest_cmd(a: SelftestArgs) -> CliResult<()> {
    let outcomes = selftest::run_all(a.seed);
    let mut failed = 0;
    for o in &outcomes {
        let status = if o.passed() { "PASS" } else { "FAIL" };
        println!("{status} {} ({} cases, {} mismatches)", o.name, o.cases, o.failed);
        for f in &o.failures {
            println!("    {f}");
        }
        if !o.passed() {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(CliError::SelftestFailed(failed));
    }
    Ok(())
}
