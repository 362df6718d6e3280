//! Variance check on disjoint subsamples: for each pair, the statistics
//! `z_l = sqrt(n_sub) Omega_hat_l / S_l` over `L` disjoint blocks should have
//! sample variance near 1, and about 90% of them should fall within
//! `1.6449 sqrt(1 - 1/L)` of their mean.

use serde::Serialize;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::lasso::LassoConfig;
use crate::synth::build_precision;

use super::config::{Estimator, ExperimentConfig, SubsampleSettings};
use super::estimators::{all_pairs, evaluate_all_pairs};
use super::{with_pool, FORMAT_VERSION};

/// Two-sided 90% normal critical value.
pub const BAND_Z: f64 = 1.6449;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairVariance {
    pub estimator: Estimator,
    pub a: usize,
    pub b: usize,
    /// Subsamples with a numeric statistic.
    pub used: usize,
    pub mean_z: f64,
    pub sample_var: f64,
    /// Fraction of the used statistics inside the band.
    pub band_proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsampleSummary {
    pub estimator: Estimator,
    pub pairs: usize,
    /// Pairs whose sample variance is defined.
    pub pairs_used: usize,
    pub mean_sample_var: f64,
    pub mean_band_proportion: f64,
    pub failed_fits: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsampleReport {
    pub format_version: u32,
    pub subsamples: usize,
    pub n_sub: usize,
    pub p: usize,
    pub pairs: Vec<PairVariance>,
    pub summaries: Vec<SubsampleSummary>,
    pub runtime_seconds: f64,
}

impl SubsampleReport {
    pub fn summary(&self, est: Estimator) -> Option<&SubsampleSummary> {
        self.summaries.iter().find(|s| s.estimator == est)
    }
}

fn pair_stats(est: Estimator, a: usize, b: usize, z: &[f64], l: usize) -> PairVariance {
    let ok: Vec<f64> = z.iter().copied().filter(|v| v.is_finite()).collect();
    let m = ok.len() as f64;
    let mean = ok.iter().sum::<f64>() / m;
    let var = if ok.len() > 1 {
        ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        f64::NAN
    };
    let half = BAND_Z * (1.0 - 1.0 / l as f64).sqrt();
    let inside = ok.iter().filter(|v| (*v - mean).abs() <= half).count();
    PairVariance {
        estimator: est,
        a,
        b,
        used: ok.len(),
        mean_z: mean,
        sample_var: var,
        band_proportion: inside as f64 / m,
    }
}

/// Splits the first `L * n_sub` rows of `x` into consecutive blocks and runs
/// each estimator on every pair of every block.
pub fn run_subsample_protocol(
    x: &DataMatrix,
    settings: SubsampleSettings,
    estimators: &[Estimator],
    lasso: &LassoConfig,
    alpha: f64,
    threads: Option<usize>,
) -> Result<SubsampleReport> {
    let SubsampleSettings { subsamples: l, n_sub } = settings;
    if l < 2 || n_sub < 3 {
        return Err(Error::Config("subsample protocol needs L >= 2 and n_sub >= 3".into()));
    }
    let required = l * n_sub;
    if required > x.nrows() {
        return Err(Error::InsufficientRows { required, available: x.nrows() });
    }
    let start = std::time::Instant::now();
    let p = x.ncols();
    let pairs = all_pairs(p);

    let (blocks, _) = with_pool(threads, || {
        (0..l)
            .map(|k| {
                let rows: Vec<usize> = (k * n_sub..(k + 1) * n_sub).collect();
                let xb = x.select_rows(&rows);
                estimators
                    .iter()
                    .map(|&est| {
                        let z: Vec<f64> = match evaluate_all_pairs(&xb, est, lasso, alpha) {
                            Ok(res) => res
                                .into_iter()
                                .map(|r| r.map(|e| e.z).unwrap_or(f64::NAN))
                                .collect(),
                            Err(_) => vec![f64::NAN; pairs.len()],
                        };
                        z
                    })
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    })?;

    let mut out = Vec::new();
    let mut summaries = Vec::new();
    for (e, &est) in estimators.iter().enumerate() {
        let mut rows = Vec::with_capacity(pairs.len());
        let mut failed = 0;
        for (k, &(a, b)) in pairs.iter().enumerate() {
            let z: Vec<f64> = blocks.iter().map(|blk| blk[e][k]).collect();
            failed += z.iter().filter(|v| !v.is_finite()).count();
            rows.push(pair_stats(est, a, b, &z, l));
        }
        let with_var: Vec<&PairVariance> = rows.iter().filter(|r| r.sample_var.is_finite()).collect();
        let m = with_var.len() as f64;
        summaries.push(SubsampleSummary {
            estimator: est,
            pairs: rows.len(),
            pairs_used: with_var.len(),
            mean_sample_var: with_var.iter().map(|r| r.sample_var).sum::<f64>() / m,
            mean_band_proportion: with_var.iter().map(|r| r.band_proportion).sum::<f64>() / m,
            failed_fits: failed,
        });
        out.extend(rows);
    }
    Ok(SubsampleReport {
        format_version: FORMAT_VERSION,
        subsamples: l,
        n_sub,
        p,
        pairs: out,
        summaries,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// The protocol on data drawn from the configured scenario, using the seed of
/// replication 0 and the penalty for `n_sub`.
pub fn run_subsample_synthetic(cfg: &ExperimentConfig) -> Result<SubsampleReport> {
    cfg.validate()?;
    let settings = cfg
        .subsample
        .ok_or_else(|| Error::Config("missing [subsample] settings".into()))?;
    let model = build_precision(&cfg.scenario.graph)?;
    let x = cfg
        .scenario
        .sample(&model, settings.subsamples * settings.n_sub, cfg.replication_seed(0))?;
    let lasso = cfg.lasso_for(settings.n_sub);
    run_subsample_protocol(&x, settings, &cfg.estimators, &lasso, cfg.alpha, cfg.threads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::presets;

    #[test]
    fn band_statistics() {
        let z = [0.0, 2.0, -2.0, 0.5];
        let s = pair_stats(Estimator::Rocket, 0, 1, &z, 4);
        assert_eq!(s.used, 4);
        assert!((s.mean_z - 0.125).abs() < 1e-15);
        let var = [0.125f64, 1.875, 2.125, 0.375].iter().map(|d| d * d).sum::<f64>() / 3.0;
        assert!((s.sample_var - var).abs() < 1e-12);
        // half-width 1.6449 * sqrt(3/4) = 1.4245
        assert_eq!(s.band_proportion, 0.5);
    }

    #[test]
    fn minimal_two_blocks() {
        let mut cfg = presets::subsample();
        cfg.subsample = Some(SubsampleSettings { subsamples: 2, n_sub: 30 });
        let r = run_subsample_synthetic(&cfg).unwrap();
        assert_eq!(r.pairs.len(), 190);
        let s = r.summary(Estimator::Rocket).unwrap();
        assert!(s.mean_sample_var.is_finite());
        assert!(r.pairs.iter().all(|p| p.used <= 2));
    }

    #[test]
    fn insufficient_rows() {
        let x = DataMatrix::zeros(10, 4);
        let err = run_subsample_protocol(
            &x,
            SubsampleSettings { subsamples: 3, n_sub: 4 },
            &[Estimator::Rocket],
            &LassoConfig::new(0.1),
            0.05,
            None,
        );
        assert!(matches!(err, Err(Error::InsufficientRows { required: 12, available: 10 })));
    }
}
