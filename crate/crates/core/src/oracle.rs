//! Slow, direct re-derivations of the fast paths, for tests and `selftest`.
//!
//! Nothing here is used by the analysis pipeline.

use std::collections::BTreeMap;

use crate::corpus::{Corpus, PaperIdx};
use crate::disruption::{index_value, DisruptionScore, NrMode, WindowSpec};
use crate::error::{Error, Result};

/// Largest corpus [`oracle_disruption`] accepts.
pub const ORACLE_MAX_PAPERS: usize = 10_000;

/// The disruption score by enumerating every paper against the flat edge
/// list, without adjacency lookups.
pub fn oracle_disruption(
    corpus: &Corpus,
    focal: PaperIdx,
    threshold: u32,
    window: WindowSpec,
    nr_mode: NrMode,
) -> Result<DisruptionScore> {
    if corpus.len() > ORACLE_MAX_PAPERS {
        return Err(Error::Invalid(format!(
            "oracle limited to {ORACLE_MAX_PAPERS} papers, corpus has {}",
            corpus.len()
        )));
    }
    if threshold == 0 {
        return Err(Error::Invalid("coupling threshold must be at least 1".into()));
    }
    let mut edges: Vec<(PaperIdx, PaperIdx)> = Vec::new();
    for p in corpus.indices() {
        for &r in corpus.references(p) {
            edges.push((p, r));
        }
    }
    let focal_refs: Vec<PaperIdx> = edges
        .iter()
        .filter(|(c, _)| *c == focal)
        .map(|&(_, r)| r)
        .collect();
    if focal_refs.is_empty() {
        return Err(Error::ZeroReferenceFocal(corpus.paper(focal).id.clone()));
    }
    let r_min = match nr_mode {
        NrMode::Consistent => threshold,
        NrMode::Legacy => 1,
    };
    let focal_year = corpus.paper(focal).year;
    let (mut n_f, mut n_b, mut n_r) = (0u32, 0u32, 0u32);
    for q in corpus.indices() {
        if q == focal || !window.admits(focal_year, corpus.paper(q).year) {
            continue;
        }
        let cites = edges.iter().any(|&(c, r)| c == q && r == focal);
        let mut s = 0u32;
        for &(c, r) in &edges {
            if c == q && focal_refs.contains(&r) {
                s += 1;
            }
        }
        if cites {
            if s >= threshold {
                n_b += 1;
            } else {
                n_f += 1;
            }
        } else if s >= r_min {
            n_r += 1;
        }
    }
    let value = index_value(n_f, n_b, n_r)
        .ok_or_else(|| Error::UndefinedScore(corpus.paper(focal).id.clone()))?;
    Ok(DisruptionScore {
        focal,
        threshold,
        window,
        nr_mode,
        n_f,
        n_b,
        n_r,
        value,
    })
}

/// Solves the square system `a z = b` by Gaussian elimination with partial
/// pivoting.
#[allow(clippy::needless_range_loop)]
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let k = b.len();
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::RankDeficient(vec![format!("column {col}")]));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for i in col + 1..k {
            let f = a[i][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for j in col..k {
                a[i][j] -= f * a[col][j];
            }
            b[i] -= f * b[col];
        }
    }
    let mut z = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| a[i][j] * z[j]).sum();
        z[i] = (b[i] - s) / a[i][i];
    }
    Ok(z)
}

/// `(XᵀX)⁻¹ Xᵀ y` via the normal equations. `x` is row-major.
pub fn ols_normal_equations(x: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let k = x.first().map_or(0, Vec::len);
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..k {
            xty[i] += row[i] * yi;
            for j in 0..k {
                xtx[i][j] += row[i] * row[j];
            }
        }
    }
    gauss_solve(xtx, xty)
}

/// Least squares with one explicit dummy per group and no intercept.
///
/// Returns the slopes on `x` and the dummy coefficient of every group.
pub fn lsdv(x: &[Vec<f64>], y: &[f64], groups: &[u32]) -> Result<(Vec<f64>, BTreeMap<u32, f64>)> {
    let labels: Vec<u32> = {
        let mut v = groups.to_vec();
        v.sort_unstable();
        v.dedup();
        v
    };
    let rows: Vec<Vec<f64>> = x
        .iter()
        .zip(groups)
        .map(|(row, g)| {
            let mut r: Vec<f64> = labels.iter().map(|l| if l == g { 1.0 } else { 0.0 }).collect();
            r.extend_from_slice(row);
            r
        })
        .collect();
    let z = ols_normal_equations(&rows, y)?;
    let effects = labels.iter().copied().zip(z.iter().copied()).collect();
    Ok((z[labels.len()..].to_vec(), effects))
}

/// Cluster-robust standard errors straight from the sandwich formula,
/// `c (XᵀX)⁻¹ [Σ_g (X_gᵀ e_g)(X_gᵀ e_g)ᵀ] (XᵀX)⁻¹` with
/// `c = G/(G−1) · (N−1)/(N−K_eff)`.
///
/// `bread` is `(XᵀX)⁻¹` as produced by the fit under test.
pub fn sandwich_se(x: &[Vec<f64>], e: &[f64], clusters: &[u32], bread: &[Vec<f64>], k_eff: usize) -> Vec<f64> {
    let k = bread.len();
    let mut members: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &g) in clusters.iter().enumerate() {
        members.entry(g).or_default().push(i);
    }
    let mut meat = vec![vec![0.0; k]; k];
    for rows in members.values() {
        let mut score = vec![0.0; k];
        for &i in rows {
            for j in 0..k {
                score[j] += x[i][j] * e[i];
            }
        }
        for a in 0..k {
            for b in 0..k {
                meat[a][b] += score[a] * score[b];
            }
        }
    }
    let matmul = |l: &[Vec<f64>], r: &[Vec<f64>]| -> Vec<Vec<f64>> {
        (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| {
                        let mut s = 0.0;
                        for m in 0..k {
                            s += l[i][m] * r[m][j];
                        }
                        s
                    })
                    .collect()
            })
            .collect()
    };
    let v = matmul(&matmul(bread, &meat), bread);
    let g = members.len() as f64;
    let n = e.len() as f64;
    let c = (g / (g - 1.0)) * ((n - 1.0) / (n - k_eff as f64));
    (0..k).map(|j| (c * v[j][j]).max(0.0).sqrt()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::g1;

    #[test]
    fn oracle_matches_g1_hand_values() {
        let c = g1();
        let fp = c.find("FP").unwrap();
        let h = WindowSpec::Horizon(2023);
        let s = |b, m| oracle_disruption(&c, fp, b, h, m).unwrap().value;
        assert_eq!(s(1, NrMode::Consistent), -0.2);
        assert_eq!(s(1, NrMode::Legacy), -0.2);
        assert_eq!(s(2, NrMode::Consistent), 0.25);
        assert_eq!(s(3, NrMode::Consistent), 1.0);
    }

    #[test]
    fn normal_equations_exact_line() {
        let x = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]];
        let b = ols_normal_equations(&x, &[1.0, 2.0, 3.0]).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-12 && (b[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sandwich_by_hand_on_four_rows() {
        // X = [1 0; 1 1; 1 2; 1 3], own clusters. XᵀX = [4 6; 6 14],
        // inverse = [0.7 -0.3; -0.3 0.2].
        let x = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 3.0]];
        let e = [0.5, -1.0, 1.0, -0.5];
        let bread = vec![vec![0.7, -0.3], vec![-0.3, 0.2]];
        let se = sandwich_se(&x, &e, &[0, 1, 2, 3], &bread, 2);
        // meat = Σ e_i² x_i x_iᵀ = [2.5 3.75; 3.75 7.25]; c = 4/3 · 3/2 = 2.
        let m = [[2.5, 3.75], [3.75, 7.25]];
        let a = [[0.7, -0.3], [-0.3, 0.2]];
        let mut v = [[0.0f64; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..2 {
                    for q in 0..2 {
                        v[i][j] += a[i][p] * m[p][q] * a[q][j];
                    }
                }
            }
        }
        assert!((se[0] - (2.0 * v[0][0]).sqrt()).abs() < 1e-12);
        assert!((se[1] - (2.0 * v[1][1]).sqrt()).abs() < 1e-12);
    }
}
