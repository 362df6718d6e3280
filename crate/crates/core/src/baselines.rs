//! Comparison estimators: plug-in inference from Pearson or normal-score
//! correlation matrices, and the pseudo-score one-step correction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::edge::{theta_hat, EdgeInference, Warnings};
use crate::error::{Error, Result};
use crate::lasso::{gamma_pair_pipeline, refit_nodes, AllNodesFit, GammaPair, LassoConfig};
use crate::matrix::{CorrelationMatrix, SquareMatrix};
use crate::normal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Pearson,
    Nonparanormal,
    PseudoScore,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::Pearson => "pearson",
            BaselineKind::Nonparanormal => "nonparanormal",
            BaselineKind::PseudoScore => "pseudo_score",
        })
    }
}

impl FromStr for BaselineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pearson" => Ok(BaselineKind::Pearson),
            "nonparanormal" | "npn" => Ok(BaselineKind::Nonparanormal),
            "pseudo_score" | "pseudo-score" => Ok(BaselineKind::PseudoScore),
            other => Err(Error::Config(format!("unknown baseline {other:?}"))),
        }
    }
}

/// Sample correlation of centered columns; the diagonal is exactly one.
pub fn pearson_matrix(x: &DataMatrix) -> Result<CorrelationMatrix> {
    let (n, p) = (x.nrows(), x.ncols());
    if n < 2 {
        return Err(Error::TooFewSamples { required: 2, found: n });
    }
    let mut centered = x.columns();
    let mut norms = Vec::with_capacity(p);
    for (j, col) in centered.iter_mut().enumerate() {
        let mean = col.iter().sum::<f64>() / n as f64;
        col.iter_mut().for_each(|v| *v -= mean);
        let ss: f64 = col.iter().map(|v| v * v).sum();
        if !(ss > 0.0) {
            return Err(Error::ConstantColumn(j));
        }
        norms.push(ss.sqrt());
    }
    let mut m = SquareMatrix::identity(p);
    for a in 0..p {
        for b in a + 1..p {
            let dot: f64 = centered[a].iter().zip(&centered[b]).map(|(u, v)| u * v).sum();
            let r = (dot / (norms[a] * norms[b])).clamp(-1.0, 1.0);
            m.set(a, b, r);
            m.set(b, a, r);
        }
    }
    CorrelationMatrix::new(m)
}

/// Winsorization level `1 / (4 n^{1/4} sqrt(pi ln n))`.
pub fn npn_delta(n: usize) -> f64 {
    let n = n as f64;
    1.0 / (4.0 * n.powf(0.25) * (std::f64::consts::PI * n.ln()).sqrt())
}

/// Normal scores `Phi^{-1}(clip(F_hat(x), delta, 1 - delta))` of one column,
/// where `F_hat(x)` is the fraction of observations strictly below `x`.
pub fn normal_scores(col: &[f64]) -> Vec<f64> {
    let n = col.len();
    let delta = npn_delta(n);
    let mut sorted = col.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    col.iter()
        .map(|&v| {
            let below = sorted.partition_point(|&s| s < v);
            let f = (below as f64 / n as f64).clamp(delta, 1.0 - delta);
            normal::quantile(f)
        })
        .collect()
}

/// Pearson correlation of the per-column normal scores.
pub fn npn_matrix(x: &DataMatrix) -> Result<CorrelationMatrix> {
    if x.nrows() < 8 {
        return Err(Error::TooFewSamples { required: 8, found: x.nrows() });
    }
    let scores: Vec<Vec<f64>> = x.columns().iter().map(|c| normal_scores(c)).collect();
    pearson_matrix(&DataMatrix::from_columns(&scores)?)
}

/// `sqrt(Omega_aa Omega_bb + Omega_ab^2)`, the scale of a Gaussian plug-in.
fn plugin_scale(aa: f64, bb: f64, ab: f64) -> f64 {
    (aa * bb + ab * ab).max(0.0).sqrt()
}

/// Plug-in inference from given regression vectors.
pub fn plugin_edge_from_gamma(
    sigma: &SquareMatrix,
    gamma: &GammaPair,
    n: usize,
    alpha: f64,
) -> Result<EdgeInference> {
    let theta = theta_hat(sigma, &gamma.index, &gamma.gamma_a, &gamma.gamma_b)?;
    let inv = theta.inverse()?;
    let s = plugin_scale(inv.aa, inv.bb, inv.ab);
    EdgeInference::assemble(theta, s, n, alpha, Warnings::from_gamma(gamma))
}

/// The regression and point estimate shared with the rank-based estimator,
/// with the Gaussian plug-in scale in place of the U-statistic variance.
pub fn plugin_edge(
    sigma: &SquareMatrix,
    n: usize,
    a: usize,
    b: usize,
    cfg: &LassoConfig,
    alpha: f64,
) -> Result<EdgeInference> {
    let gamma = gamma_pair_pipeline(sigma, a, b, cfg)?;
    plugin_edge_from_gamma(sigma, &gamma, n, alpha)
}

/// Precision estimate built row by row from Lasso-with-refit regressions,
/// then symmetrized by averaging.
///
/// Row `j` uses the refit `gamma_j` on the Lasso support `S`:
/// `Omega_jj = 1 / (1 - Sigma_{j S} gamma_j)` and `Omega_{j S} = -Omega_jj gamma_j`.
pub fn precision_rows_lasso_refit(sigma: &SquareMatrix, fits: &AllNodesFit) -> Result<SquareMatrix> {
    let p = sigma.dim();
    let mut rows = SquareMatrix::zeros(p);
    for j in 0..p {
        let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
        let nodes: Vec<usize> = fits
            .coef(j)
            .iter()
            .zip(&others)
            .filter(|(c, _)| c.abs() > crate::lasso::SUPPORT_TOL)
            .map(|(_, &k)| k)
            .collect();
        let (gamma, _) = refit_nodes(sigma, &nodes, j)?;
        let explained: f64 = nodes.iter().zip(&gamma).map(|(&k, g)| sigma.get(j, k) * g).sum();
        let resid = 1.0 - explained;
        if !(resid > 0.0) {
            return Err(Error::NonPositiveDiagonal { index: j, value: resid });
        }
        let d = 1.0 / resid;
        rows.set(j, j, d);
        for (&k, g) in nodes.iter().zip(&gamma) {
            rows.set(j, k, -d * g);
        }
    }
    let mut out = rows.clone();
    for i in 0..p {
        for k in i + 1..p {
            let v = 0.5 * (rows.get(i, k) + rows.get(k, i));
            out.set(i, k, v);
            out.set(k, i, v);
        }
    }
    Ok(out)
}

/// `[W_ab ((W S)_ab + (S W)_ab) - (W S W)_ab] / [(W S)_ab + (S W)_ab - 1]`
/// for `W = Omega_hat` and `S = Sigma_hat`.
pub fn pseudo_score_edge(sigma: &SquareMatrix, omega: &SquareMatrix, a: usize, b: usize) -> Result<f64> {
    let p = sigma.dim();
    if omega.dim() != p {
        return Err(Error::DimensionMismatch { expected: p, found: omega.dim() });
    }
    for idx in [a, b] {
        if idx >= p {
            return Err(Error::IndexOutOfRange { index: idx, p });
        }
    }
    let ws: f64 = (0..p).map(|k| omega.get(a, k) * sigma.get(k, b)).sum();
    let sw: f64 = (0..p).map(|k| sigma.get(a, k) * omega.get(k, b)).sum();
    let col_b: Vec<f64> = (0..p).map(|k| omega.get(k, b)).collect();
    let wsw = sigma.bilinear(omega.row(a), &col_b);
    let den = ws + sw - 1.0;
    if !(den.abs() > 1e-10) {
        return Err(Error::DegenerateDenominator(den));
    }
    Ok((omega.get(a, b) * (ws + sw) - wsw) / den)
}

/// Pseudo-score point estimate with the plug-in scale evaluated at `Omega_hat`.
///
/// The scale is a stand-in, not a derived variance for this estimator, and
/// results carry [`Warnings::SURROGATE_VARIANCE`].
pub fn pseudo_score_inference(
    sigma: &SquareMatrix,
    omega: &SquareMatrix,
    n: usize,
    a: usize,
    b: usize,
    alpha: f64,
) -> Result<EdgeInference> {
    let est = pseudo_score_edge(sigma, omega, a, b)?;
    let s = plugin_scale(omega.get(a, a), omega.get(b, b), omega.get(a, b));
    EdgeInference::from_estimate(a, b, n, est, s, alpha, Warnings::SURROGATE_VARIANCE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edge::RankContext;
    use crate::lasso::all_nodes_gamma;
    use crate::matrix::invert_spd;
    use crate::synth::{apply_marginals, build_precision, sample_gaussian, GraphSpec, MarginalSet};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pearson_simple() {
        let c: Vec<f64> = (0..10).map(|i| (i as f64).sqrt()).collect();
        let neg: Vec<f64> = c.iter().map(|v| -v).collect();
        let x = DataMatrix::from_columns(&[c.clone(), c, neg]).unwrap();
        let r = pearson_matrix(&x).unwrap();
        assert_eq!(r.get(0, 1), 1.0);
        assert_eq!(r.get(0, 2), -1.0);
        let k = DataMatrix::from_columns(&[vec![1.0; 5], vec![1.0, 2.0, 3.0, 4.0, 5.0]]).unwrap();
        assert!(matches!(pearson_matrix(&k), Err(Error::ConstantColumn(0))));
    }

    #[test]
    fn delta_value() {
        let expected = 1.0 / (4.0 * 400f64.powf(0.25) * (std::f64::consts::PI * 400f64.ln()).sqrt());
        assert_eq!(npn_delta(400), expected);
        assert!((npn_delta(400) - 0.012885).abs() < 1e-6);
    }

    #[test]
    fn scores_are_winsorized() {
        let col: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64).collect();
        let d = npn_delta(50);
        let (lo, hi) = (normal::quantile(d), normal::quantile(1.0 - d));
        let s = normal_scores(&col);
        assert!(s.iter().all(|&v| v >= lo && v <= hi));
        // the minimum has F_hat = 0 and is clipped up to delta
        assert_eq!(s.iter().cloned().fold(f64::INFINITY, f64::min), lo);
    }

    #[test]
    fn npn_is_rank_invariant() {
        let m = build_precision(&GraphSpec::grid(3, 0.2)).unwrap();
        let x = sample_gaussian(200, &m.sigma, 4).unwrap();
        let y = apply_marginals(&x, &MarginalSet::standard());
        assert_eq!(npn_matrix(&x).unwrap(), npn_matrix(&y).unwrap());
    }

    #[test]
    fn plugin_identity() {
        let e = plugin_edge(&SquareMatrix::identity(5), 100, 0, 1, &LassoConfig::new(0.1), 0.05)
            .unwrap();
        assert_eq!(e.omega_ab, 0.0);
        assert_eq!(e.s_ab, 1.0);
    }

    #[test]
    fn plugin_population_grid() {
        let m = build_precision(&GraphSpec::grid(4, 0.24)).unwrap();
        let (a, b) = (5, 6);
        let idx = crate::matrix::PairIndex::new(16, a, b).unwrap();
        let (ga, gb) = crate::matrix::true_gamma(&m.sigma, a, b).unwrap();
        let g = GammaPair::from_vectors(idx, ga, gb).unwrap();
        let e = plugin_edge_from_gamma(&m.sigma, &g, 400, 0.05).unwrap();
        assert!((e.omega_ab - m.omega.get(a, b)).abs() < 1e-8);
    }

    #[test]
    fn plugin_shares_point_estimate_with_rank_path() {
        let m = build_precision(&GraphSpec::grid(4, 0.24)).unwrap();
        let x = sample_gaussian(150, &m.sigma, 9).unwrap();
        let ctx = RankContext::new(&x).unwrap();
        let cfg = LassoConfig::with_default_lambda(150, 16);
        let g = gamma_pair_pipeline(ctx.sigma_hat(), 5, 6, &cfg).unwrap();
        let rank = ctx.edge_from_gamma(&g, 0.05).unwrap();
        let plug = plugin_edge_from_gamma(ctx.sigma_hat(), &g, 150, 0.05).unwrap();
        assert_eq!(rank.omega_ab, plug.omega_ab);
        assert_ne!(rank.s_ab, plug.s_ab);
    }

    fn random_correlation(p: usize, rng: &mut ChaCha8Rng) -> SquareMatrix {
        let b = SquareMatrix::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
        let mut s = b.matmul(&b.transpose()).unwrap();
        (0..p).for_each(|i| s.set(i, i, s.get(i, i) + 0.5));
        crate::matrix::normalize_to_correlation(&s).unwrap().into_inner()
    }

    #[test]
    fn pseudo_score_identities() {
        let id = SquareMatrix::identity(4);
        assert_eq!(pseudo_score_edge(&id, &id, 0, 1).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_correlation(5, &mut rng);
        let w = invert_spd(&s).unwrap();
        let ps = pseudo_score_edge(&s, &w, 1, 3).unwrap();
        assert!((ps - w.get(1, 3)).abs() < 1e-10);
    }

    #[test]
    fn pseudo_score_under_perturbation() {
        let m = build_precision(&GraphSpec::grid(3, 0.24)).unwrap();
        let (a, b) = (0, 1);
        let (truth, s_ab) = (m.omega.get(a, b), m.sigma.get(a, b));
        let eps = 0.01;
        // symmetric error on the target entry: expanding W S W with W = Omega + eps E
        // gives truth + (2 eps - eps^2 (2 - Sigma_ab)) / (1 - 2 eps)
        let mut w = m.omega.clone();
        w.set(a, b, truth + eps);
        w.set(b, a, truth + eps);
        let expected = truth + (2.0 * eps - eps * eps * (2.0 - s_ab)) / (1.0 - 2.0 * eps);
        assert!((pseudo_score_edge(&m.sigma, &w, a, b).unwrap() - expected).abs() < 1e-12);

        // errors away from the target entry cancel to first order
        let mut w = m.omega.clone();
        w.set(a, 4, w.get(a, 4) + eps);
        w.set(4, a, w.get(4, a) + eps);
        w.set(b, b, w.get(b, b) + eps);
        let err = (pseudo_score_edge(&m.sigma, &w, a, b).unwrap() - truth).abs();
        assert!(err < 10.0 * eps * eps, "{err}");
    }

    #[test]
    fn degenerate_denominator() {
        let s = SquareMatrix::identity(3);
        let mut w = SquareMatrix::identity(3);
        w.set(0, 1, 0.5);
        w.set(1, 0, 0.5);
        // (WS)_01 + (SW)_01 - 1 = 0
        assert!(matches!(pseudo_score_edge(&s, &w, 0, 1), Err(Error::DegenerateDenominator(_))));
    }

    #[test]
    fn lasso_refit_rows_on_population_matrix() {
        let m = build_precision(&GraphSpec::chain(8, 0.4)).unwrap();
        let fits = all_nodes_gamma(&m.sigma, &LassoConfig::new(1e-4)).unwrap();
        let w = precision_rows_lasso_refit(&m.sigma, &fits).unwrap();
        assert!(w.max_abs_diff(&m.omega) < 1e-6);
        assert!(w.is_symmetric());
    }

    proptest! {
        #[test]
        fn correlation_outputs_are_valid(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cols: Vec<Vec<f64>> = (0..4).map(|_| (0..30).map(|_| rng.random::<f64>()).collect()).collect();
            let x = DataMatrix::from_columns(&cols).unwrap();
            for r in [pearson_matrix(&x).unwrap(), npn_matrix(&x).unwrap()] {
                let eig = r.to_dmatrix().symmetric_eigenvalues();
                prop_assert!(eig.iter().all(|&e| e > -1e-10));
                prop_assert!(r.is_symmetric());
            }
        }
    }
}
