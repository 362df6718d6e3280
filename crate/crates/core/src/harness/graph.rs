//! Whole-graph estimation: every pair's p-value, thresholded into edge sets.

use serde::Serialize;

use crate::data::DataMatrix;
use crate::edge::Warnings;
use crate::error::{Error, Result};
use crate::lasso::LassoConfig;

use super::config::Estimator;
use super::estimators::{all_pairs, evaluate_all_pairs};
use super::FORMAT_VERSION;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairResult {
    pub a: usize,
    pub b: usize,
    pub omega_hat: f64,
    pub s_ab: f64,
    pub z: f64,
    pub p_value: f64,
    pub warnings: Warnings,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphEstimate {
    pub format_version: u32,
    pub p: usize,
    pub n: usize,
    pub pairs: Vec<PairResult>,
    pub thresholds: Vec<f64>,
    /// `edges[k]` lists the pairs with `p_value < thresholds[k]`.
    pub edges: Vec<Vec<(usize, usize)>>,
}

impl GraphEstimate {
    pub fn edges_below(&self, threshold: f64) -> Vec<(usize, usize)> {
        self.pairs
            .iter()
            .filter(|r| r.p_value < threshold)
            .map(|r| (r.a, r.b))
            .collect()
    }

    pub fn failures(&self) -> usize {
        self.pairs.iter().filter(|r| r.error.is_some()).count()
    }
}

/// Rank-based inference on all `C(p, 2)` pairs. Kendall's tau and the
/// node-wise Lasso fits are computed once; failed pairs are kept with their
/// error and never enter an edge set.
pub fn estimate_graph(x: &DataMatrix, thresholds: &[f64], cfg: &LassoConfig) -> Result<GraphEstimate> {
    if x.ncols() < 3 {
        return Err(Error::TooFewVariables { required: 3, found: x.ncols() });
    }
    if let Some(t) = thresholds.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(Error::InvalidParameter(format!("threshold {t} must lie in (0, 1)")));
    }
    let results = evaluate_all_pairs(x, Estimator::Rocket, cfg, 0.05)?;
    let pairs: Vec<PairResult> = all_pairs(x.ncols())
        .into_iter()
        .zip(results)
        .map(|((a, b), r)| match r {
            Ok(e) => PairResult {
                a,
                b,
                omega_hat: e.omega_ab,
                s_ab: e.s_ab,
                z: e.z,
                p_value: e.p_value,
                warnings: e.warnings,
                error: None,
            },
            Err(e) => PairResult {
                a,
                b,
                omega_hat: f64::NAN,
                s_ab: f64::NAN,
                z: f64::NAN,
                p_value: f64::NAN,
                warnings: Warnings::empty(),
                error: Some(e.to_string()),
            },
        })
        .collect();
    let mut g = GraphEstimate {
        format_version: FORMAT_VERSION,
        p: x.ncols(),
        n: x.nrows(),
        pairs,
        thresholds: thresholds.to_vec(),
        edges: Vec::new(),
    };
    g.edges = thresholds.iter().map(|&t| g.edges_below(t)).collect();
    Ok(g)
}
