//! Runs a set of estimators on one data set, sharing the per-data work.

use rayon::prelude::*;

use crate::baselines::{
    npn_matrix, pearson_matrix, plugin_edge, plugin_edge_from_gamma, precision_rows_lasso_refit,
    pseudo_score_inference,
};
use crate::data::DataMatrix;
use crate::edge::{EdgeInference, RankContext};
use crate::error::Result;
use crate::lasso::{all_nodes_gamma, AllNodesFit, LassoConfig};
use crate::matrix::{CorrelationMatrix, SquareMatrix};

use super::config::Estimator;

/// Per-data-set state of one estimator.
enum Prepared<'a> {
    Rocket(RankContext<'a>),
    Plugin(CorrelationMatrix),
    PseudoScore { sigma: SquareMatrix, omega: SquareMatrix },
}

fn prepare<'a>(
    x: &'a DataMatrix,
    est: Estimator,
    ranks: &Option<std::result::Result<RankContext<'a>, crate::Error>>,
    cfg: &LassoConfig,
) -> Result<Prepared<'a>> {
    let ranks = || ranks.clone().expect("rank context requested");
    Ok(match est {
        Estimator::Rocket => Prepared::Rocket(ranks()?),
        Estimator::Pearson => Prepared::Plugin(pearson_matrix(x)?),
        Estimator::Npn => Prepared::Plugin(npn_matrix(x)?),
        Estimator::PseudoScore => {
            let ctx = ranks()?;
            let sigma = ctx.sigma_hat().clone();
            let fits = all_nodes_gamma(&sigma, cfg)?;
            let omega = precision_rows_lasso_refit(&sigma, &fits)?;
            Prepared::PseudoScore { sigma, omega }
        }
    })
}

fn needs_ranks(estimators: &[Estimator]) -> bool {
    estimators.iter().any(|e| matches!(e, Estimator::Rocket | Estimator::PseudoScore))
}

impl Prepared<'_> {
    fn edge(&self, a: usize, b: usize, n: usize, cfg: &LassoConfig, alpha: f64) -> Result<EdgeInference> {
        match self {
            Prepared::Rocket(ctx) => ctx.edge(a, b, cfg, alpha),
            Prepared::Plugin(sigma) => plugin_edge(sigma, n, a, b, cfg, alpha),
            Prepared::PseudoScore { sigma, omega } => {
                pseudo_score_inference(sigma, omega, n, a, b, alpha)
            }
        }
    }

    fn edge_reusing(
        &self,
        fits: &AllNodesFit,
        a: usize,
        b: usize,
        n: usize,
        alpha: f64,
    ) -> Result<EdgeInference> {
        match self {
            Prepared::Rocket(ctx) => {
                let (gamma, _) = fits.gamma_pair(ctx.sigma_hat(), a, b)?;
                ctx.edge_from_gamma(&gamma, alpha)
            }
            Prepared::Plugin(sigma) => {
                let (gamma, _) = fits.gamma_pair(sigma, a, b)?;
                plugin_edge_from_gamma(sigma, &gamma, n, alpha)
            }
            Prepared::PseudoScore { sigma, omega } => {
                pseudo_score_inference(sigma, omega, n, a, b, alpha)
            }
        }
    }

    fn sigma(&self) -> &SquareMatrix {
        match self {
            Prepared::Rocket(ctx) => ctx.sigma_hat(),
            Prepared::Plugin(sigma) => sigma,
            Prepared::PseudoScore { sigma, .. } => sigma,
        }
    }
}

/// `out[e][t]` is the result of estimator `estimators[e]` on `targets[t]`.
/// A failure while preparing an estimator is reported for each of its targets.
pub fn evaluate_targets(
    x: &DataMatrix,
    estimators: &[Estimator],
    targets: &[(usize, usize)],
    cfg: &LassoConfig,
    alpha: f64,
) -> Vec<Vec<Result<EdgeInference>>> {
    let ranks = needs_ranks(estimators).then(|| RankContext::new(x));
    let n = x.nrows();
    estimators
        .iter()
        .map(|&est| match prepare(x, est, &ranks, cfg) {
            Ok(prep) => targets.iter().map(|&(a, b)| prep.edge(a, b, n, cfg, alpha)).collect(),
            Err(e) => targets.iter().map(|_| Err(e.clone())).collect(),
        })
        .collect()
}

/// All `C(p, 2)` pairs `(a < b)` in lexicographic order.
pub fn all_pairs(p: usize) -> Vec<(usize, usize)> {
    (0..p).flat_map(|a| (a + 1..p).map(move |b| (a, b))).collect()
}

/// One estimator on every node pair, in [`all_pairs`] order. The penalized
/// node-wise fits are computed once and reused across pairs where allowed.
pub fn evaluate_all_pairs(
    x: &DataMatrix,
    est: Estimator,
    cfg: &LassoConfig,
    alpha: f64,
) -> Result<Vec<Result<EdgeInference>>> {
    let ranks = needs_ranks(&[est]).then(|| RankContext::new(x));
    let prep = prepare(x, est, &ranks, cfg)?;
    let fits = match est {
        Estimator::PseudoScore => None,
        _ => Some(all_nodes_gamma(prep.sigma(), cfg)?),
    };
    let n = x.nrows();
    Ok(all_pairs(x.ncols())
        .into_par_iter()
        .map(|(a, b)| match &fits {
            Some(f) => prep.edge_reusing(f, a, b, n, alpha),
            None => prep.edge(a, b, n, cfg, alpha),
        })
        .collect())
}
