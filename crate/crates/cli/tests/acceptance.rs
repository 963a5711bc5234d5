//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed.

use std::collections::BTreeMap;
use std::error::Error;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use specverse_cli::report::build_report;
use specverse_core::corpus::{apply_filters, Corpus, FilterSpec, Paper};
use specverse_core::disruption::{batch_scores, coupling_profile, disruption_score, NrMode, Variant, WindowSpec};
use specverse_core::multiverse::{
    author_effect_percentiles, export_results, influence, load_results, model_sd, prepare_scores, run_pipeline,
    run_universe, sign_stability, EstimateSet, Outcome, UniverseSpec,
};
use specverse_core::selftest;
use specverse_core::synth::{bias_probe, calibrate_delta, generate, monte_carlo, ProbeSpec, SynthSpec};

type Check = Result<(bool, String), Box<dyn Error>>;
type Criterion = (u32, &'static str, fn() -> Check);

/// Publication years of the analysed cohort in the synthetic runs.
const COHORT: (i32, i32) = (2003, 2008);
/// Wider cohort for the inflation probe, so that drift and inflation span
/// enough years to bias the uncontrolled slope.
const PROBE_COHORT: (i32, i32) = (2000, 2012);
const TEST_SEEDS: std::ops::RangeInclusive<u64> = 1..=20;

fn cohort_filter() -> FilterSpec {
    FilterSpec {
        year_range: Some(COHORT),
        ..FilterSpec::default()
    }
}

fn negative_significant(b: f64, p: f64) -> bool {
    b < 0.0 && p < 0.05
}

fn c1_cardinality() -> Check {
    let start = Instant::now();
    let t4 = UniverseSpec::table4().enumerate(2023).len();
    let t7 = UniverseSpec::table7().enumerate(2023).len();
    let took = start.elapsed();
    Ok((
        t4 == 320 && t7 == 60 && took < Duration::from_secs(1),
        format!("table4 {t4}, table7 {t7}, {took:.2?}"),
    ))
}

fn g1() -> Corpus {
    let papers = [
        ("FP", 2000),
        ("R1", 1995),
        ("R2", 1995),
        ("R3", 1995),
        ("A", 2001),
        ("B", 2001),
        ("C", 2001),
        ("D", 2001),
        ("E", 2001),
    ];
    let edges = [
        ("FP", "R1"),
        ("FP", "R2"),
        ("FP", "R3"),
        ("A", "FP"),
        ("B", "FP"),
        ("B", "R1"),
        ("C", "FP"),
        ("C", "R1"),
        ("C", "R2"),
        ("D", "R1"),
        ("E", "R2"),
        ("E", "R3"),
    ];
    let pos = |id: &str| papers.iter().position(|p| p.0 == id).unwrap();
    let list = papers
        .iter()
        .map(|&(id, year)| Paper {
            id: id.into(),
            year,
            field: "Biology".into(),
            team_size: 1,
            n_refs_unlinked: 0,
        })
        .collect();
    let edges = edges.iter().map(|&(a, b)| (pos(a), pos(b))).collect();
    Corpus::build(list, edges, Vec::new()).unwrap().0
}

fn c2_disruption_oracle() -> Check {
    let start = Instant::now();
    let suite = selftest::disruption_suite(1_000, 2024);
    let c = g1();
    let prof = coupling_profile(&c, c.find("FP").unwrap(), WindowSpec::Horizon(2023))?;
    let got = [
        disruption_score(&c, &prof, 1, NrMode::Consistent)?.value,
        disruption_score(&c, &prof, 1, NrMode::Legacy)?.value,
        disruption_score(&c, &prof, 2, NrMode::Consistent)?.value,
        disruption_score(&c, &prof, 3, NrMode::Consistent)?.value,
    ];
    let took = start.elapsed();
    let g1_ok = got == [-0.2, -0.2, 0.25, 1.0];
    Ok((
        suite.passed() && g1_ok && took < Duration::from_secs(30),
        format!(
            "{} comparisons, {} mismatches; G1 {got:?}; {took:.2?}",
            suite.cases, suite.failed
        ),
    ))
}

fn c3_regression_oracles() -> Check {
    let start = Instant::now();
    let suites = [
        selftest::ols_suite(100, 11),
        selftest::lsdv_suite(100, 12),
        selftest::sandwich_suite(100, 13),
    ];
    let took = start.elapsed();
    let detail: Vec<String> = suites
        .iter()
        .map(|s| format!("{} {}/{}", s.name, s.cases - s.failed, s.cases))
        .collect();
    Ok((
        suites.iter().all(|s| s.passed()) && took < Duration::from_secs(60),
        format!("{}; {took:.2?}", detail.join(", ")),
    ))
}

fn ok(b: f64, p: f64) -> Outcome {
    Outcome::Ok {
        estimate: b,
        se: 0.1,
        p,
        n: 100,
    }
}

fn c4_hand_cases() -> Check {
    let three = UniverseSpec::from_json(
        r#"{"dimensions": [{"name": "index", "options": ["DI1", "DI2", "DI3"], "reference": "DI1"}]}"#,
        "three",
    )?;
    let set = EstimateSet::from_outcomes(&three, vec![ok(-1.0, 0.01), ok(0.0, 1.0), ok(1.0, 0.01)]);
    let sd = model_sd(&set)?.model_sd;
    let sd_ok = sd == (2.0f64 / 3.0).sqrt();
    let signs = sign_stability(&set, 0.05);
    let stab = signs.fraction_negative_significant();
    let stab_ok = stab == 1.0 / 3.0;

    // b = 0.5 + index effect + window effect; outliers is inert.
    let u = UniverseSpec::from_json(
        r#"{"dimensions": [
            {"name": "index", "options": ["DI1", "DI2", "DI3"], "reference": "DI1"},
            {"name": "window", "options": ["5", "10", "15"], "reference": "5"},
            {"name": "outliers", "options": ["included", "excluded"], "reference": "included"}
        ]}"#,
        "additive",
    )?;
    let index_fx = [0.0, -0.013, 0.027];
    let window_fx = [0.0, 0.004, -0.0091];
    let cells = u.enumerate(2023);
    let outcomes = cells
        .iter()
        .map(|c| ok(0.5 + index_fx[c.options[0]] + window_fx[c.options[1]], 0.5))
        .collect();
    let set = EstimateSet::from_outcomes(&u, outcomes);
    let mut worst: f64 = 0.0;
    for (d, planted) in [(0, &index_fx), (1, &window_fx)] {
        let dim = &u.dimensions[d];
        for s in influence(&set, &dim.name)? {
            let o = dim.options.iter().position(|x| *x == s.option).unwrap();
            worst = worst.max((s.delta.unwrap_or(f64::NAN) - planted[o]).abs());
        }
    }
    let inert = influence(&set, "outliers")?;
    let inert_ok = inert.iter().all(|s| s.delta == Some(0.0));
    Ok((
        sd_ok && stab_ok && worst <= 1e-10 && inert_ok,
        format!("model_sd {sd}, sign stability {stab}, worst planted error {worst:.1e}, inert {inert_ok}"),
    ))
}

fn rounded(set: &EstimateSet) -> String {
    set.models
        .iter()
        .map(|m| match m.outcome {
            Outcome::Ok { estimate, se, p, n } => format!("{} {estimate:.9e} {se:.9e} {p:.9e} {n}\n", m.model_id),
            ref other => format!("{} {other:?}\n", m.model_id),
        })
        .collect()
}

fn c5_scale_invariance() -> Check {
    let (corpus, _) = generate(&SynthSpec {
        seed: 5,
        ..SynthSpec::default()
    })?;
    let universe = UniverseSpec::table7();
    let (_, scores) = prepare_scores(&corpus, &universe, &cohort_filter())?;
    let raw = run_universe(&corpus, &scores, &universe);
    let scaled = run_universe(&corpus, &scores.scaled(100.0), &universe);
    let (a, b) = (rounded(&raw), rounded(&scaled));
    let differing = a.lines().zip(b.lines()).filter(|(x, y)| x != y).count();
    let k_ok = raw.ok_estimates().count();
    Ok((
        a == b && k_ok == 60,
        format!("{k_ok} fitted models, {differing} differ after rounding to 10 significant digits"),
    ))
}

fn c6_null_calibration() -> Check {
    let universe = UniverseSpec::table7();
    let mut below = 0;
    let mut fractions = Vec::new();
    for seed in TEST_SEEDS {
        let (corpus, _) = generate(&SynthSpec {
            seed,
            ..SynthSpec::default()
        })?;
        let set = run_pipeline(&corpus, &universe, &cohort_filter())?;
        let f = model_sd(&set)?.fraction_negative_significant;
        if f < 0.2 {
            below += 1;
        }
        fractions.push(format!("{f:.2}"));
    }
    Ok((
        below >= 18,
        format!("{below}/20 seeds below 20% negative-significant [{}]", fractions.join(" ")),
    ))
}

fn c7_inflation_bias() -> Check {
    let mut unc = 0;
    let mut ctl = 0;
    for seed in TEST_SEEDS {
        let (corpus, truth) = generate(&SynthSpec {
            seed,
            refs_growth: 0.05,
            team_size_drift: 0.05,
            ..SynthSpec::default()
        })?;
        let probe = ProbeSpec::standard(corpus.horizon(), PROBE_COHORT);
        let r = bias_probe(&corpus, &truth, &probe)?;
        unc += usize::from(negative_significant(r.uncontrolled.estimate, r.uncontrolled.p));
        ctl += usize::from(negative_significant(r.controlled.estimate, r.controlled.p));
    }
    Ok((
        unc >= 16 && ctl <= 4,
        format!("uncontrolled negative-significant {unc}/20, controlled {ctl}/20"),
    ))
}

fn c8_planted_recovery() -> Check {
    let universe = UniverseSpec::table7();
    let filter = cohort_filter();
    let start = SynthSpec {
        planted_delta: 0.004,
        ..SynthSpec::default()
    };
    // Ten corpora of about 10^4 papers each, disjoint from the test seeds.
    let oracle_seeds: Vec<u64> = (6001..=6010).collect();
    let oracle = calibrate_delta(&start, -0.02, 0.001, &oracle_seeds, &universe, &filter)?;
    let spec = SynthSpec {
        planted_delta: oracle.planted_delta,
        ..SynthSpec::default()
    };
    let papers: usize = oracle_seeds
        .iter()
        .map(|&s| generate(&SynthSpec { seed: s, ..spec.clone() }).map(|(c, _)| c.len()))
        .sum::<specverse_core::Result<usize>>()?;
    let test_seeds: Vec<u64> = TEST_SEEDS.collect();
    let test = monte_carlo(&spec, &test_seeds, &universe, &filter)?;
    let half_width = 1.96 * (oracle.variance() / oracle.means.len() as f64 + test.variance() / test.means.len() as f64).sqrt();
    let gap = test.mean() - oracle.mean();
    Ok((
        gap.abs() <= half_width,
        format!(
            "delta {:.5}; oracle mean {:.4} over {papers} papers; test mean {:.4}; gap {gap:.4}, 95% half-width {half_width:.4}",
            oracle.planted_delta,
            oracle.mean(),
            test.mean()
        ),
    ))
}

fn c9_percentiles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let normal = Normal::new(0.0, 0.3)?;
    let effects: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
    let gap = author_effect_percentiles(&effects, 90.0, 50.0)?;
    Ok(((gap - 0.384).abs() <= 0.02, format!("P90 - P50 = {gap:.4}")))
}

fn specverse(args: &[&str]) -> Result<(), Box<dyn Error>> {
    let out = Command::new(env!("CARGO_BIN_EXE_specverse")).args(args).output()?;
    if !out.status.success() {
        return Err(format!(
            "specverse {} failed: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr)
        )
        .into());
    }
    Ok(())
}

fn pipeline(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, Box<dyn Error>> {
    let p = |name: &str| dir.join(name).display().to_string();
    specverse(&["synth", "--seed", "42", "--out", &p("corpus")])?;
    specverse(&[
        "disrupt",
        "--corpus",
        &p("corpus"),
        "--filter",
        "default",
        "--universe",
        "table7",
        "--out",
        &p("scores.csv"),
        "--sample-out",
        &p("sample.csv"),
    ])?;
    specverse(&[
        "multiverse",
        "--corpus",
        &p("corpus"),
        "--scores",
        &p("scores.csv"),
        "--universe",
        "table7",
        "--out",
        &p("results"),
    ])?;
    specverse(&["report", "--results", &p("results"), "--out", &p("report")])?;
    let mut files = BTreeMap::new();
    for entry in walk(dir)? {
        let rel = entry.strip_prefix(dir)?.display().to_string();
        files.insert(rel, std::fs::read(&entry)?);
    }
    Ok(files)
}

fn walk(dir: &Path) -> std::io::Result<Vec<std::path::PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            out.extend(walk(&path)?);
        } else {
            out.push(path);
        }
    }
    Ok(out)
}

fn c10_determinism() -> Check {
    let a = tempfile::tempdir()?;
    let b = tempfile::tempdir()?;
    let fa = pipeline(a.path())?;
    let fb = pipeline(b.path())?;
    let differing: Vec<&String> = fa.keys().filter(|k| fa.get(*k) != fb.get(*k)).collect();
    Ok((
        fa.len() == fb.len() && differing.is_empty(),
        format!("{} files compared, differing {differing:?}", fa.len()),
    ))
}

fn c11_performance() -> Check {
    let start = Instant::now();
    // 384 papers in the first year growing 5% a year over 26 years, plus the
    // seed papers, gives about 20,000 papers.
    let (corpus, _) = generate(&SynthSpec {
        seed: 11,
        papers_year0: 384,
        ..SynthSpec::default()
    })?;
    let universe = UniverseSpec::table7();
    let horizon = corpus.horizon();
    let filter = FilterSpec {
        cited_windows: universe.required_windows(horizon),
        ..FilterSpec::default()
    };
    let sample = apply_filters(&corpus, &filter, None)?;
    let mut variants = Vec::new();
    for w in [WindowSpec::Years(10), WindowSpec::Years(15), WindowSpec::Horizon(horizon)] {
        for b in 1..=5 {
            variants.push(Variant::new(b, w, NrMode::Consistent));
        }
    }
    let scores = batch_scores(&corpus, sample.papers(), &variants);
    let set = run_universe(&corpus, &scores, &universe);
    let took = start.elapsed();
    let k_ok = set.ok_estimates().count();
    Ok((
        took < Duration::from_secs(300) && k_ok == 60,
        format!(
            "{} papers, {} in sample, {} variants, {k_ok}/60 fitted in {took:.1?} on {} threads",
            corpus.len(),
            sample.len(),
            variants.len(),
            rayon_threads()
        ),
    ))
}

fn rayon_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn c12_provenance() -> Check {
    let s = selftest::provenance_suite();
    Ok((s.passed(), format!("{} checks, failures {:?}", s.cases, s.failures)))
}

fn random_set(rng: &mut ChaCha8Rng, universe: &UniverseSpec) -> EstimateSet {
    let outcomes = universe
        .enumerate(2023)
        .iter()
        .map(|_| match rng.random_range(0..10) {
            0 => Outcome::Failed {
                reason: "design matrix is rank deficient; collinear columns: a, b".into(),
            },
            1 => Outcome::Infeasible {
                reason: "pooled model with author clustering".into(),
            },
            _ => Outcome::Ok {
                estimate: rng.random_range(-0.05..0.05),
                se: rng.random_range(0.001..0.02),
                p: rng.random(),
                n: rng.random_range(10..100_000),
            },
        })
        .collect();
    EstimateSet::from_outcomes(universe, outcomes)
}

fn c13_output_format() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut reloaded = 0;
    let mut rendered = 0;
    let mut sets = Vec::new();
    for u in [UniverseSpec::table4(), UniverseSpec::table7()] {
        for _ in 0..25 {
            sets.push(random_set(&mut rng, &u));
        }
    }
    let total = sets.len();
    for set in &sets {
        let dir = tempfile::tempdir()?;
        export_results(set, dir.path())?;
        if &load_results(dir.path())? == set {
            reloaded += 1;
        }
        let text = build_report(set)?.render();
        if ["Mean (b)", "Model SD", "Sign stability"].iter().all(|h| text.contains(h)) {
            rendered += 1;
        }
    }
    Ok((
        reloaded == total && rendered == total,
        format!("{reloaded}/{total} reloaded losslessly, {rendered}/{total} summaries rendered"),
    ))
}

fn main() {
    let criteria: [Criterion; 13] = [
        (1, "universe cardinality", c1_cardinality),
        (2, "disruption oracle equivalence", c2_disruption_oracle),
        (3, "regression oracles", c3_regression_oracles),
        (4, "multiverse hand cases", c4_hand_cases),
        (5, "standardization invariance", c5_scale_invariance),
        (6, "synthetic null calibration", c6_null_calibration),
        (7, "inflation bias", c7_inflation_bias),
        (8, "planted effect recovery", c8_planted_recovery),
        (9, "author effect percentiles", c9_percentiles),
        (10, "determinism", c10_determinism),
        (11, "performance floor", c11_performance),
        (12, "filter provenance", c12_provenance),
        (13, "output format", c13_output_format),
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for (id, name, check) in criteria {
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let status = if pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {status} {name}: {detail} ({:.1?})",
            start.elapsed()
        );
        if !pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
