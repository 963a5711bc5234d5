//! Randomized comparisons of the fast paths against [`crate::oracle`].
//!
//! Shared by the `selftest` command and the test suites. Every suite is
//! seeded, so a failure can be replayed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::corpus::{apply_filters, Corpus, FilterSpec, FilterStage, Paper};
use crate::disruption::{batch_scores, NrMode, ScoreStatus, Variant, WindowSpec};
use crate::error::Error;
use crate::oracle::{lsdv, ols_normal_equations, oracle_disruption, sandwich_se};
use crate::regress::{fit, within_transform, DesignMatrix, SeType};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub cases: usize,
    /// First few mismatches, for the report.
    pub failures: Vec<String>,
    pub failed: usize,
}

impl SuiteOutcome {
    fn new(name: &'static str) -> Self {
        SuiteOutcome {
            name,
            cases: 0,
            failures: Vec::new(),
            failed: 0,
        }
    }

    fn fail(&mut self, msg: String) {
        self.failed += 1;
        if self.failures.len() < 5 {
            self.failures.push(msg);
        }
    }

    pub fn passed(&self) -> bool {
        self.failed == 0 && self.cases > 0
    }
}

/// A random citation graph of `n` papers over 2000..=2010.
///
/// Papers cite only papers from the same or earlier years. Roughly one in
/// eight papers has no references, to exercise the zero-reference path.
pub fn random_corpus(rng: &mut impl Rng, n: usize) -> Corpus {
    let papers: Vec<Paper> = (0..n)
        .map(|i| Paper {
            id: format!("p{i:03}"),
            year: rng.random_range(2000..=2010),
            field: "Biology".into(),
            team_size: rng.random_range(1..=4),
            n_refs_unlinked: 0,
        })
        .collect();
    let density: f64 = rng.random_range(0.05..0.4);
    let mut edges = Vec::new();
    for i in 0..n {
        if rng.random_bool(0.125) {
            continue;
        }
        for j in 0..n {
            if i != j && papers[j].year <= papers[i].year && rng.random_bool(density) {
                edges.push((i, j));
            }
        }
    }
    Corpus::build(papers, edges, Vec::new()).expect("valid random corpus").0
}

/// Fast batch scores against the brute-force oracle, exact on counts and
/// values, for thresholds 1 to 5, both `N_R` modes and windows 0, 1, 5 and
/// the horizon.
pub fn disruption_suite(graphs: usize, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("disruption oracle");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for g in 0..graphs {
        let n = rng.random_range(2..=50);
        let corpus = random_corpus(&mut rng, n);
        let windows = [
            WindowSpec::Years(0),
            WindowSpec::Years(1),
            WindowSpec::Years(5),
            WindowSpec::Horizon(corpus.horizon()),
        ];
        let mut variants = Vec::new();
        for b in 1..=5 {
            for w in windows {
                for m in [NrMode::Consistent, NrMode::Legacy] {
                    variants.push(Variant::new(b, w, m));
                }
            }
        }
        let papers: Vec<_> = corpus.indices().collect();
        let scores = batch_scores(&corpus, &papers, &variants);
        for (row, &p) in scores.papers().iter().enumerate() {
            for (vi, v) in variants.iter().enumerate() {
                out.cases += 1;
                let fast = scores.entry(row, vi);
                let slow = oracle_disruption(&corpus, p, v.threshold, v.window, v.nr_mode);
                let agree = match (&slow, fast.status) {
                    (Ok(s), ScoreStatus::Ok) => {
                        (s.n_f, s.n_b, s.n_r) == (fast.n_f, fast.n_b, fast.n_r)
                            && fast.value().map(f64::to_bits) == Some(s.value.to_bits())
                    }
                    (Err(Error::UndefinedScore(_)), ScoreStatus::Undefined) => true,
                    (Err(Error::ZeroReferenceFocal(_)), ScoreStatus::ZeroReference) => true,
                    _ => false,
                };
                if !agree {
                    out.fail(format!(
                        "graph {g}, paper {}, {v}: fast {fast:?}, oracle {slow:?}",
                        corpus.paper(p).id
                    ));
                }
            }
        }
    }
    out
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn rows_of(x: &DesignMatrix) -> Vec<Vec<f64>> {
    (0..x.n())
        .map(|i| x.x.row(i).iter().copied().collect())
        .collect()
}

/// QR least squares against the normal equations, to `1e-8` relative to the
/// largest coefficient.
pub fn ols_suite(systems: usize, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("ols vs normal equations");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in 0..systems {
        let n = rng.random_range(20..=200);
        let k = rng.random_range(1..=6);
        let beta: Vec<f64> = (0..=k).map(|_| 3.0 * normal(&mut rng)).collect();
        let mut cols: Vec<(String, Vec<f64>)> = vec![("intercept".into(), vec![1.0; n])];
        for j in 0..k {
            cols.push((format!("x{j}"), (0..n).map(|_| normal(&mut rng)).collect()));
        }
        let y: Vec<f64> = (0..n)
            .map(|i| cols.iter().zip(&beta).map(|((_, c), b)| c[i] * b).sum::<f64>() + normal(&mut rng))
            .collect();
        let design = DesignMatrix::from_columns(y.clone(), cols).expect("consistent columns");
        out.cases += 1;
        let fast = match fit(&design, SeType::Classical) {
            Ok(f) => f.coefficients,
            Err(e) => {
                out.fail(format!("system {s}: fit failed: {e}"));
                continue;
            }
        };
        let slow = ols_normal_equations(&rows_of(&design), &y).expect("well conditioned");
        let scale = slow.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let worst = fast
            .iter()
            .zip(&slow)
            .map(|(a, b)| (a - b).abs() / scale)
            .fold(0.0, f64::max);
        if !(worst <= 1e-8) {
            out.fail(format!("system {s}: relative difference {worst:e}"));
        }
    }
    out
}

/// A random author panel in which papers appear once per listed author.
struct Panel {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    groups: Vec<u32>,
}

fn random_panel(rng: &mut impl Rng, k: usize) -> Panel {
    let authors = rng.random_range(3..=15u32);
    let papers = rng.random_range(15..=60);
    let effects: Vec<f64> = (0..authors).map(|_| 2.0 * normal(rng)).collect();
    let beta: Vec<f64> = (0..k).map(|_| normal(rng)).collect();
    let mut panel = Panel {
        x: Vec::new(),
        y: Vec::new(),
        groups: Vec::new(),
    };
    for _ in 0..papers {
        let team = rng.random_range(1..=3.min(authors as usize));
        let mut members: Vec<u32> = Vec::new();
        while members.len() < team {
            let a = rng.random_range(0..authors);
            if !members.contains(&a) {
                members.push(a);
            }
        }
        let xs: Vec<f64> = (0..k).map(|_| normal(rng)).collect();
        let noise = normal(rng);
        // The same paper enters once per author, with identical x and noise.
        for &a in &members {
            panel.x.push(xs.clone());
            panel.y.push(xs.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>() + effects[a as usize] + noise);
            panel.groups.push(a);
        }
    }
    // Keep authors with at least two rows.
    let mut counts = vec![0usize; authors as usize];
    for &g in &panel.groups {
        counts[g as usize] += 1;
    }
    let keep: Vec<bool> = panel.groups.iter().map(|&g| counts[g as usize] >= 2).collect();
    retain_flagged(&mut panel.x, &keep);
    retain_flagged(&mut panel.y, &keep);
    retain_flagged(&mut panel.groups, &keep);
    panel
}

fn retain_flagged<T>(v: &mut Vec<T>, keep: &[bool]) {
    let mut it = keep.iter();
    v.retain(|_| *it.next().expect("one flag per row"));
}

fn panel_design(p: &Panel, k: usize) -> DesignMatrix {
    let mut cols: Vec<(String, Vec<f64>)> = vec![("intercept".into(), vec![1.0; p.y.len()])];
    for j in 0..k {
        cols.push((format!("x{j}"), p.x.iter().map(|r| r[j]).collect()));
    }
    DesignMatrix::from_columns(p.y.clone(), cols).expect("consistent columns")
}

/// Within-transformed slopes against explicit-dummy least squares, to
/// `1e-6` relative, on panels with papers duplicated across authors.
pub fn lsdv_suite(panels: usize, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("within vs LSDV");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut made = 0;
    while made < panels {
        let k = rng.random_range(1..=3);
        let p = random_panel(&mut rng, k);
        let distinct = {
            let mut g = p.groups.clone();
            g.sort_unstable();
            g.dedup();
            g.len()
        };
        if distinct < 2 || p.y.len() < distinct + k + 2 {
            continue;
        }
        made += 1;
        out.cases += 1;
        let design = panel_design(&p, k);
        let fast = within_transform(&design, &p.groups).and_then(|(w, _)| fit(&w, SeType::ClusterAuthor));
        let fast = match fast {
            Ok(f) => f.coefficients,
            Err(e) => {
                out.fail(format!("panel {made}: within fit failed: {e}"));
                continue;
            }
        };
        let (slow, _) = match lsdv(&p.x, &p.y, &p.groups) {
            Ok(r) => r,
            Err(e) => {
                out.fail(format!("panel {made}: LSDV failed: {e}"));
                continue;
            }
        };
        let scale = slow.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let worst = fast
            .iter()
            .zip(&slow)
            .map(|(a, b)| (a - b).abs() / scale)
            .fold(0.0, f64::max);
        if fast.len() != slow.len() || !(worst <= 1e-6) {
            out.fail(format!("panel {made}: relative difference {worst:e}"));
        }
    }
    out
}

/// Clustered standard errors of the fit against the independently coded
/// sandwich formula, bit for bit.
pub fn sandwich_suite(cases: usize, seed: u64) -> SuiteOutcome {
    let mut out = SuiteOutcome::new("cluster sandwich");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut made = 0;
    while made < cases {
        let k = rng.random_range(1..=3);
        let p = random_panel(&mut rng, k);
        let design = panel_design(&p, k).with_clusters(p.groups.clone());
        let Ok(f) = fit(&design, SeType::ClusterAuthor) else {
            continue;
        };
        made += 1;
        out.cases += 1;
        let kk = f.columns.len();
        let bread: Vec<Vec<f64>> = (0..kk).map(|i| (0..kk).map(|j| f.bread[(i, j)]).collect()).collect();
        let slow = sandwich_se(&rows_of(&design), &f.residuals, &p.groups, &bread, f.k_eff);
        let same = slow.len() == f.se.len() && slow.iter().zip(&f.se).all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            out.fail(format!("case {made}: fit {:?} vs sandwich {slow:?}", f.se));
        }
    }
    out
}

/// Every suite at the sizes used by `selftest`.
pub fn run_all(seed: u64) -> Vec<SuiteOutcome> {
    vec![
        disruption_suite(1_000, seed),
        ols_suite(100, seed.wrapping_add(1)),
        lsdv_suite(100, seed.wrapping_add(2)),
        sandwich_suite(100, seed.wrapping_add(3)),
        provenance_suite(),
    ]
}

/// A hand-built 100-paper corpus with known violations per filter stage.
pub struct ProvenanceFixture {
    pub corpus: Corpus,
    pub filter: FilterSpec,
    pub cites_window: WindowSpec,
    /// Papers each stage must remove, in application order.
    pub expected: Vec<(FilterStage, usize)>,
    pub expected_kept: usize,
}

/// Twenty base papers from 1990 without references and eighty papers from
/// 2000 that cite them:
///
/// - F0..F4 have unresolved references (fully linked);
/// - F5..F9 cite only five base papers, and the base papers cite nothing (min refs);
/// - F10..F14 are never cited (cited);
/// - F15..F17 have 13 references, F18 and F19 four citations (outliers at 12 / 3);
/// - F70..F79 are the only in-sample paper of their author (min papers per author).
pub fn provenance_fixture() -> ProvenanceFixture {
    let mut papers = Vec::new();
    let mut authorships = Vec::new();
    let mut edges = Vec::new();
    for i in 0..20 {
        papers.push(Paper {
            id: format!("B{i:02}"),
            year: 1990,
            field: "Biology".into(),
            team_size: 1,
            n_refs_unlinked: 0,
        });
        authorships.push((i, "base".to_string()));
    }
    let f = |i: usize| 20 + i;
    for i in 0..80 {
        papers.push(Paper {
            id: format!("F{i:02}"),
            year: 2000,
            field: "Biology".into(),
            team_size: if i == 0 { 2 } else { 1 },
            n_refs_unlinked: if i < 5 { 2 } else { 0 },
        });
        let base_refs = if (5..10).contains(&i) { 5 } else { 10 };
        edges.extend((0..base_refs).map(|b| (f(i), b)));
        let author = match i {
            20..=69 => format!("pair{}", (i - 20) / 2),
            70..=79 => format!("solo{}", i - 70),
            _ => format!("other{i}"),
        };
        authorships.push((f(i), author));
    }
    // A removed paper by a solo author must not count towards the author rule.
    authorships.push((f(0), "solo0".to_string()));
    // F15..F79 each receive one citation along a cycle.
    for i in 15..79 {
        edges.push((f(i + 1), f(i)));
    }
    edges.push((f(15), f(79)));
    for i in 15..18 {
        edges.extend([(f(i), 10), (f(i), 11)]);
    }
    for citer in 0..3 {
        edges.extend([(f(citer), f(18)), (f(citer), f(19))]);
    }
    let (corpus, _) = Corpus::build(papers, edges, authorships).expect("valid fixture");
    ProvenanceFixture {
        corpus,
        filter: FilterSpec {
            outlier_max_refs: Some(12),
            outlier_max_cites: Some(3),
            ..FilterSpec::default()
        },
        cites_window: WindowSpec::Horizon(2000),
        expected: vec![
            (FilterStage::FullyLinked, 5),
            (FilterStage::MinRefs, 25),
            (FilterStage::Cited, 5),
            (FilterStage::Outliers, 5),
            (FilterStage::MinPapersPerAuthor, 10),
        ],
        expected_kept: 50,
    }
}

/// Runs the provenance fixture through the filters.
pub fn provenance_suite() -> SuiteOutcome {
    let mut out = SuiteOutcome::new("filter provenance");
    let fx = provenance_fixture();
    out.cases = fx.expected.len() + 1;
    match apply_filters(&fx.corpus, &fx.filter, Some(fx.cites_window)) {
        Ok(view) => {
            for &(stage, n) in &fx.expected {
                let got = view.provenance.removed_by(stage);
                if got != n {
                    out.fail(format!("{stage}: removed {got}, expected {n}"));
                }
            }
            if view.len() != fx.expected_kept {
                out.fail(format!("kept {}, expected {}", view.len(), fx.expected_kept));
            }
        }
        Err(e) => out.fail(format!("filters failed: {e}")),
    }
    out
}
