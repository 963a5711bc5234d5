use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use specverse_core::multiverse::{
    author_effect_percentiles, influence, model_sd, percentile, EstimateSet, Outcome, UniverseSpec,
};

fn ok(b: f64) -> Outcome {
    Outcome::Ok {
        estimate: b,
        se: 0.01,
        p: 0.5,
        n: 100,
    }
}

fn one_dim(values: &[f64]) -> EstimateSet {
    let opts: Vec<String> = (1..=values.len()).map(|i| format!("\"DI{i}\"")).collect();
    let u = UniverseSpec::from_json(
        &format!(r#"{{"dimensions": [{{"name": "index", "options": [{}], "reference": "DI1"}}]}}"#, opts.join(",")),
        "t",
    )
    .unwrap();
    EstimateSet::from_outcomes(&u, values.iter().map(|&b| ok(b)).collect())
}

const POOL: [(&str, &[&str]); 4] = [
    ("index", &["DI1", "DI2", "DI3"]),
    ("window", &["5", "10", "15"]),
    ("citation_counts", &["excluded", "included"]),
    ("outliers", &["included", "excluded"]),
];

/// A full factorial with `sizes[d]` options of the d-th pooled dimension and
/// `b = base + Σ_d effect[d][option_d]`.
fn additive(sizes: &[usize], effects: &[Vec<f64>], base: f64) -> EstimateSet {
    let dims: Vec<String> = sizes
        .iter()
        .enumerate()
        .map(|(d, &k)| {
            let (name, options) = POOL[d];
            let opts: Vec<String> = options[..k].iter().map(|o| format!("\"{o}\"")).collect();
            format!(r#"{{"name": "{name}", "options": [{}], "reference": "{}"}}"#, opts.join(","), options[0])
        })
        .collect();
    let u = UniverseSpec::from_json(&format!(r#"{{"dimensions": [{}]}}"#, dims.join(",")), "t").unwrap();
    let outcomes = u
        .enumerate(0)
        .iter()
        .map(|c| ok(base + c.options.iter().enumerate().map(|(d, &o)| effects[d][o]).sum::<f64>()))
        .collect();
    EstimateSet::from_outcomes(&u, outcomes)
}

proptest! {
    #[test]
    fn model_sd_ignores_order_and_shift(v in prop::collection::vec(-1.0f64..1.0, 2..30), shift in -5.0f64..5.0) {
        let a = model_sd(&one_dim(&v)).unwrap();
        let mut r = v.clone();
        r.reverse();
        let b = model_sd(&one_dim(&r)).unwrap();
        let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
        let c = model_sd(&one_dim(&shifted)).unwrap();
        prop_assert!((a.v_m - b.v_m).abs() <= 1e-12);
        prop_assert!((a.v_m - c.v_m).abs() <= 1e-9);
        prop_assert!((c.mean - a.mean - shift).abs() <= 1e-9);
    }

    #[test]
    fn influence_recovers_planted_additive_effects(
        sizes in prop::collection::vec(2usize..4, 1..5),
        seed in any::<u64>(),
    ) {
        let sizes: Vec<usize> = sizes.iter().enumerate().map(|(d, &k)| k.min(POOL[d].1.len())).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let effects: Vec<Vec<f64>> = sizes
            .iter()
            .map(|&k| {
                let mut e: Vec<f64> = (0..k).map(|_| rng.random_range(-0.1..0.1)).collect();
                e[0] = 0.0;
                e
            })
            .collect();
        let set = additive(&sizes, &effects, -0.02);
        for (d, e) in effects.iter().enumerate() {
            let stats = influence(&set, POOL[d].0).unwrap();
            for (o, s) in stats.iter().enumerate() {
                prop_assert!((s.delta.unwrap() - e[o]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn percentile_is_monotone_and_bounded(mut v in prop::collection::vec(-10.0f64..10.0, 1..50), q1 in 0.0f64..100.0, q2 in 0.0f64..100.0) {
        v.sort_by(f64::total_cmp);
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        let a = percentile(&v, lo);
        let b = percentile(&v, hi);
        prop_assert!(a <= b + 1e-12);
        prop_assert!(v[0] <= a && b <= v[v.len() - 1]);
    }
}

#[test]
fn inert_dimension_has_zero_influence() {
    let set = additive(&[2, 3], &[vec![0.0, 0.05], vec![0.0, 0.0, 0.0]], 0.1);
    for s in influence(&set, "window").unwrap() {
        assert!(s.delta.unwrap().abs() <= 1e-12);
    }
}

#[test]
fn normal_author_effects_gap() {
    // For N(0, 0.3), P90 − P50 = 0.3 · 1.2815516 = 0.38447.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let dist = Normal::new(0.0, 0.3).unwrap();
    let effects: Vec<f64> = (0..10_000).map(|_| rng.sample(dist)).collect();
    let gap = author_effect_percentiles(&effects, 90.0, 50.0).unwrap();
    assert!((gap - 0.384).abs() <= 0.02, "gap {gap}");
}

#[test]
fn bundled_universes_have_expected_sizes() {
    assert_eq!(UniverseSpec::table4().enumerate(2023).len(), 320);
    assert_eq!(UniverseSpec::table7().enumerate(2023).len(), 60);
}
