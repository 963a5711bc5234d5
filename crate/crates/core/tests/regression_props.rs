use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use specverse_core::regress::{fit, summarize_fit, within_transform, DesignMatrix, SeType};

type Columns = Vec<(String, Vec<f64>)>;

fn random_design(seed: u64, n: usize, k: usize) -> (Vec<f64>, Columns, Vec<u32>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<(String, Vec<f64>)> = vec![("intercept".into(), vec![1.0; n])];
    for j in 0..k {
        cols.push((format!("x{j}"), (0..n).map(|_| rng.sample(StandardNormal)).collect()));
    }
    let y = (0..n)
        .map(|i| cols.iter().map(|(_, c)| c[i]).sum::<f64>() + rng.sample::<f64, _>(StandardNormal))
        .collect();
    let clusters = (0..n).map(|i| (i % 7) as u32).collect();
    (y, cols, clusters)
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol * scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn duplicating_every_row_keeps_coefficients(seed in any::<u64>(), n in 15usize..60, k in 1usize..4) {
        let (y, cols, cl) = random_design(seed, n, k);
        let once = fit(&DesignMatrix::from_columns(y.clone(), cols.clone()).unwrap().with_clusters(cl.clone()), SeType::ClusterAuthor).unwrap();
        let twice_cols = cols.into_iter().map(|(name, c)| (name, [c.clone(), c].concat())).collect();
        let twice = fit(
            &DesignMatrix::from_columns([y.clone(), y].concat(), twice_cols).unwrap().with_clusters([cl.clone(), cl].concat()),
            SeType::ClusterAuthor,
        ).unwrap();
        prop_assert!(close(&once.coefficients, &twice.coefficients, 1e-9));
    }

    #[test]
    fn row_order_does_not_matter(seed in any::<u64>(), n in 15usize..60, k in 1usize..4) {
        let (y, cols, cl) = random_design(seed, n, k);
        let a = fit(&DesignMatrix::from_columns(y.clone(), cols.clone()).unwrap().with_clusters(cl.clone()), SeType::ClusterAuthor).unwrap();
        let rev = |v: &Vec<f64>| v.iter().rev().copied().collect::<Vec<f64>>();
        let b = fit(
            &DesignMatrix::from_columns(rev(&y), cols.iter().map(|(n, c)| (n.clone(), rev(c))).collect()).unwrap()
                .with_clusters(cl.iter().rev().copied().collect()),
            SeType::ClusterAuthor,
        ).unwrap();
        prop_assert!(close(&a.coefficients, &b.coefficients, 1e-10));
        prop_assert!(close(&a.se, &b.se, 1e-8));
    }

    #[test]
    fn scaling_y_scales_coefficients_and_keeps_t(seed in any::<u64>(), n in 15usize..60, s in 0.01f64..100.0) {
        let (y, cols, _) = random_design(seed, n, 2);
        let a = fit(&DesignMatrix::from_columns(y.clone(), cols.clone()).unwrap(), SeType::Hc1).unwrap();
        let b = fit(&DesignMatrix::from_columns(y.iter().map(|v| v * s).collect(), cols).unwrap(), SeType::Hc1).unwrap();
        let scaled: Vec<f64> = a.coefficients.iter().map(|v| v * s).collect();
        prop_assert!(close(&b.coefficients, &scaled, 1e-9));
        prop_assert!(close(&b.t, &a.t, 1e-7));
    }

    #[test]
    fn confidence_interval_contains_estimate(seed in any::<u64>(), n in 15usize..60) {
        let (y, cols, cl) = random_design(seed, n, 2);
        let f = fit(&DesignMatrix::from_columns(y, cols).unwrap().with_clusters(cl), SeType::ClusterAuthor).unwrap();
        for r in summarize_fit(&f, 0.05) {
            prop_assert!(r.ci_low <= r.estimate && r.estimate <= r.ci_high);
            prop_assert!((0.0..=1.0).contains(&r.p));
        }
    }

    #[test]
    fn within_is_invariant_to_adding_group_constants(seed in any::<u64>(), n in 20usize..60) {
        let (y, cols, cl) = random_design(seed, n, 2);
        let base = DesignMatrix::from_columns(y.clone(), cols.clone()).unwrap();
        let shifted_y: Vec<f64> = y.iter().zip(&cl).map(|(v, g)| v + 10.0 * f64::from(*g)).collect();
        let shifted = DesignMatrix::from_columns(shifted_y, cols).unwrap();
        let (w1, _) = within_transform(&base, &cl).unwrap();
        let (w2, _) = within_transform(&shifted, &cl).unwrap();
        let a = fit(&w1, SeType::ClusterAuthor).unwrap();
        let b = fit(&w2, SeType::ClusterAuthor).unwrap();
        prop_assert!(close(&a.coefficients, &b.coefficients, 1e-9));
    }
}

/// With independent homoskedastic errors, clustering should cost little:
/// the average clustered SE stays within 25% of the classical one.
#[test]
fn clustered_close_to_classical_without_cluster_correlation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ratio = 0.0;
    let reps = 200;
    for _ in 0..reps {
        let n = 200;
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + rng.sample::<f64, _>(StandardNormal)).collect();
        let clusters: Vec<u32> = (0..n).map(|i| (i / 5) as u32).collect();
        let d = DesignMatrix::from_columns(y, vec![("intercept".into(), vec![1.0; n]), ("x".into(), x)])
            .unwrap()
            .with_clusters(clusters);
        let cl = fit(&d, SeType::ClusterAuthor).unwrap();
        let cs = fit(&d, SeType::Classical).unwrap();
        ratio += cl.se[1] / cs.se[1];
    }
    ratio /= reps as f64;
    assert!((ratio - 1.0).abs() < 0.25, "mean ratio {ratio}");
}

#[test]
fn five_clusters_use_t4_quantiles() {
    let (y, cols, _) = random_design(3, 40, 1);
    let cl: Vec<u32> = (0..40).map(|i| (i % 5) as u32).collect();
    let f = fit(&DesignMatrix::from_columns(y, cols).unwrap().with_clusters(cl), SeType::ClusterAuthor).unwrap();
    assert_eq!(f.dof_p, 4.0);
    let row = &summarize_fit(&f, 0.05)[1];
    // t(4) 97.5% quantile is 2.776445...
    let half = (row.ci_high - row.ci_low) / 2.0;
    assert!((half / f.se[1] - 2.776_445_105).abs() < 1e-6);
}
