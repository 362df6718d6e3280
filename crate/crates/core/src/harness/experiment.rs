//! Monte Carlo experiments: coverage, Q-Q data and power curves.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::edge::{EdgeInference, Warnings};
use crate::error::{Error, Result};
use crate::normal;
use crate::synth::{build_precision, GraphSpec};

use super::config::{Estimator, ExperimentConfig};
use super::estimators::evaluate_targets;
use super::{with_pool, FORMAT_VERSION};

/// A target edge with its population value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Target {
    pub label: String,
    pub a: usize,
    pub b: usize,
    pub truth: f64,
}

/// One estimator on one edge in one replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub replication: usize,
    pub seed: u64,
    pub estimator: Estimator,
    pub edge: String,
    pub a: usize,
    pub b: usize,
    pub truth: f64,
    pub omega_hat: f64,
    pub s_ab: f64,
    pub z: f64,
    pub p_value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub width: f64,
    pub covered: bool,
    pub rejected: bool,
    pub warnings: Warnings,
    pub error: Option<String>,
}

impl Record {
    fn new(rep: usize, seed: u64, est: Estimator, t: &Target, r: Result<EdgeInference>) -> Self {
        let mut rec = Record {
            replication: rep,
            seed,
            estimator: est,
            edge: t.label.clone(),
            a: t.a,
            b: t.b,
            truth: t.truth,
            omega_hat: f64::NAN,
            s_ab: f64::NAN,
            z: f64::NAN,
            p_value: f64::NAN,
            ci_lo: f64::NAN,
            ci_hi: f64::NAN,
            width: f64::NAN,
            covered: false,
            rejected: false,
            warnings: Warnings::empty(),
            error: None,
        };
        match r {
            Ok(e) => {
                rec.omega_hat = e.omega_ab;
                rec.s_ab = e.s_ab;
                rec.z = e.z;
                rec.p_value = e.p_value;
                rec.ci_lo = e.ci_lo;
                rec.ci_hi = e.ci_hi;
                rec.width = e.width();
                rec.covered = e.covers(t.truth);
                rec.rejected = e.p_value < e.alpha;
                rec.warnings = e.warnings;
            }
            Err(e) => rec.error = Some(e.to_string()),
        }
        rec
    }

    /// Whether the record enters aggregates.
    pub fn is_numeric(&self) -> bool {
        self.error.is_none() && self.omega_hat.is_finite() && self.s_ab.is_finite() && self.s_ab > 0.0
    }

    /// `sqrt(n) (Omega_hat - truth) / S`, given the sample size.
    pub fn studentized_error(&self, n: usize) -> f64 {
        (n as f64).sqrt() * (self.omega_hat - self.truth) / self.s_ab
    }
}

/// Summary over the replications of one (estimator, edge) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub estimator: Estimator,
    pub edge: String,
    pub a: usize,
    pub b: usize,
    pub truth: f64,
    pub replications: usize,
    /// Records that entered the summary.
    pub used: usize,
    pub excluded: usize,
    pub covered: usize,
    /// `covered / used`.
    pub coverage: f64,
    pub mean_width: f64,
    pub rejections: usize,
    /// `rejections / used`.
    pub rejection_rate: f64,
    pub mean_studentized: f64,
    pub var_studentized: f64,
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let m = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / m;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        f64::NAN
    };
    (mean, var)
}

fn aggregate(est: Estimator, t: &Target, cell: &[&Record], n: usize) -> Aggregate {
    let used: Vec<&&Record> = cell.iter().filter(|r| r.is_numeric()).collect();
    let covered = used.iter().filter(|r| r.covered).count();
    let rejections = used.iter().filter(|r| r.rejected).count();
    let widths: Vec<f64> = used.iter().map(|r| r.width).collect();
    let zs: Vec<f64> = used.iter().map(|r| r.studentized_error(n)).collect();
    let (mean_z, var_z) = mean_var(&zs);
    let k = used.len() as f64;
    Aggregate {
        estimator: est,
        edge: t.label.clone(),
        a: t.a,
        b: t.b,
        truth: t.truth,
        replications: cell.len(),
        used: used.len(),
        excluded: cell.len() - used.len(),
        covered,
        coverage: covered as f64 / k,
        mean_width: mean_var(&widths).0,
        rejections,
        rejection_rate: rejections as f64 / k,
        mean_studentized: mean_z,
        var_studentized: var_z,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub format_version: u32,
    pub kind: String,
    pub config: ExperimentConfig,
    pub targets: Vec<Target>,
    pub records: Vec<Record>,
    pub aggregates: Vec<Aggregate>,
    pub threads: usize,
    pub runtime_seconds: f64,
}

impl ExperimentReport {
    pub fn aggregate(&self, est: Estimator, edge: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|g| g.estimator == est && g.edge == edge)
    }

    pub fn records_for<'a>(&'a self, est: Estimator, edge: &'a str) -> impl Iterator<Item = &'a Record> + 'a {
        self.records.iter().filter(move |r| r.estimator == est && r.edge == edge)
    }

    pub fn excluded(&self) -> usize {
        self.aggregates.iter().map(|g| g.excluded).sum()
    }
}

/// Resolves the configured edges against the population precision.
pub fn targets(cfg: &ExperimentConfig) -> Result<Vec<Target>> {
    let model = build_precision(&cfg.scenario.graph)?;
    Ok(cfg
        .resolved_edges()?
        .into_iter()
        .map(|(label, a, b)| Target { label, a, b, truth: model.omega.get(a, b) })
        .collect())
}

/// Replications run in parallel; records are ordered by replication, then
/// estimator, then edge, whatever the thread count.
pub fn run_coverage(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if cfg.edges.is_empty() {
        return Err(Error::Config("no target edges".into()));
    }
    let start = Instant::now();
    let model = build_precision(&cfg.scenario.graph)?;
    let targets = targets(cfg)?;
    let pairs: Vec<(usize, usize)> = targets.iter().map(|t| (t.a, t.b)).collect();
    let lasso = cfg.lasso_for(cfg.n);
    lasso.validate()?;

    let (per_rep, threads) = with_pool(cfg.threads, || {
        (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let seed = cfg.replication_seed(rep);
                let x = cfg.scenario.sample(&model, cfg.n, seed)?;
                let out = evaluate_targets(&x, &cfg.estimators, &pairs, &lasso, cfg.alpha);
                let mut recs = Vec::with_capacity(cfg.estimators.len() * targets.len());
                for (&est, row) in cfg.estimators.iter().zip(out) {
                    for (t, r) in targets.iter().zip(row) {
                        recs.push(Record::new(rep, seed, est, t, r));
                    }
                }
                Ok(recs)
            })
            .collect::<Result<Vec<Vec<Record>>>>()
    })?;
    let records: Vec<Record> = per_rep?.into_iter().flatten().collect();

    let mut aggregates = Vec::new();
    for &est in &cfg.estimators {
        for t in &targets {
            let cell: Vec<&Record> =
                records.iter().filter(|r| r.estimator == est && r.edge == t.label).collect();
            aggregates.push(aggregate(est, t, &cell, cfg.n));
        }
    }
    Ok(ExperimentReport {
        format_version: FORMAT_VERSION,
        kind: "coverage".into(),
        config: cfg.clone(),
        targets,
        records,
        aggregates,
        threads,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// One row of plot-ready Q-Q data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QqRow {
    pub estimator: Estimator,
    pub edge: String,
    /// 1-based rank within the sorted numeric sample; 0 for excluded records.
    pub rank: usize,
    pub studentized: f64,
    pub normal_quantile: f64,
}

/// Sorted studentized errors `sqrt(n)(Omega_hat - Omega)/S` against the normal
/// quantiles `Phi^{-1}((i - 1/2)/m)`, one row per record. Excluded records
/// follow the sorted block with NaN values.
pub fn qq_table(report: &ExperimentReport) -> Vec<QqRow> {
    let n = report.config.n;
    let mut rows = Vec::with_capacity(report.records.len());
    for &est in &report.config.estimators {
        for t in &report.targets {
            let cell: Vec<&Record> = report.records_for(est, &t.label).collect();
            let mut z: Vec<f64> =
                cell.iter().filter(|r| r.is_numeric()).map(|r| r.studentized_error(n)).collect();
            z.sort_by(f64::total_cmp);
            let m = z.len();
            for (i, &v) in z.iter().enumerate() {
                rows.push(QqRow {
                    estimator: est,
                    edge: t.label.clone(),
                    rank: i + 1,
                    studentized: v,
                    normal_quantile: normal::quantile((i as f64 + 0.5) / m as f64),
                });
            }
            for _ in m..cell.len() {
                rows.push(QqRow {
                    estimator: est,
                    edge: t.label.clone(),
                    rank: 0,
                    studentized: f64::NAN,
                    normal_quantile: f64::NAN,
                });
            }
        }
    }
    rows
}

pub fn run_qq(cfg: &ExperimentConfig) -> Result<(ExperimentReport, Vec<QqRow>)> {
    let mut report = run_coverage(cfg)?;
    report.kind = "qq".into();
    let rows = qq_table(&report);
    Ok((report, rows))
}

/// Kolmogorov-Smirnov distance between a sample and the standard normal.
pub fn ks_distance_normal(sample: &[f64]) -> f64 {
    let mut z: Vec<f64> = sample.to_vec();
    z.sort_by(f64::total_cmp);
    let m = z.len() as f64;
    z.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = normal::cdf(v);
            (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerRow {
    pub rho: f64,
    pub estimator: Estimator,
    pub truth: f64,
    pub replications: usize,
    pub used: usize,
    pub rejections: usize,
    pub power: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerReport {
    pub format_version: u32,
    pub rows: Vec<PowerRow>,
    /// One coverage report per value of `rho`, in grid order.
    pub runs: Vec<ExperimentReport>,
    pub runtime_seconds: f64,
}

/// Rejection rates of `H0: Omega_ab = 0` over the `rho` grid of a pair design.
/// Every grid point reuses the base seed, so the curves share random numbers.
pub fn run_power(cfg: &ExperimentConfig) -> Result<PowerReport> {
    let GraphSpec::Pair { p, .. } = cfg.scenario.graph else {
        return Err(Error::Config("power curves need a pair graph".into()));
    };
    if cfg.rho_grid.is_empty() {
        return Err(Error::Config("rho_grid is empty".into()));
    }
    if cfg.edges.len() != 1 {
        return Err(Error::Config("power curves take exactly one target edge".into()));
    }
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for &rho in &cfg.rho_grid {
        if !(rho.abs() < 1.0) {
            return Err(Error::Config(format!("rho = {rho} must lie in (-1, 1)")));
        }
        let mut c = cfg.clone();
        c.scenario.graph = GraphSpec::pair(p, rho);
        c.rho_grid.clear();
        let mut report = run_coverage(&c)?;
        report.kind = "power".into();
        for g in &report.aggregates {
            rows.push(PowerRow {
                rho,
                estimator: g.estimator,
                truth: g.truth,
                replications: g.replications,
                used: g.used,
                rejections: g.rejections,
                power: g.rejection_rate,
            });
        }
        runs.push(report);
    }
    Ok(PowerReport { format_version: FORMAT_VERSION, rows, runs, runtime_seconds: start.elapsed().as_secs_f64() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{presets, EdgeSpec, NodeRef, Scenario};
    use crate::synth::RadiusLaw;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            Scenario::new(GraphSpec::grid(4, 0.24), RadiusLaw::Gaussian),
            120,
            6,
        );
        c.edges = vec![
            EdgeSpec::new("edge", NodeRef::Grid([2, 2]), NodeRef::Grid([2, 3])),
            EdgeSpec::new("far", NodeRef::Grid([1, 1]), NodeRef::Grid([4, 4])),
        ];
        c.estimators = Estimator::ALL.to_vec();
        c.base_seed = 11;
        c
    }

    #[test]
    fn coverage_bookkeeping() {
        let cfg = small();
        let r = run_coverage(&cfg).unwrap();
        assert_eq!(r.records.len(), 6 * 4 * 2);
        assert_eq!(r.aggregates.len(), 8);
        for (i, rec) in r.records.iter().enumerate() {
            assert_eq!(rec.replication, i / 8);
            assert_eq!(rec.seed, cfg.replication_seed(rec.replication));
        }
        for g in &r.aggregates {
            let cell: Vec<&Record> = r.records_for(g.estimator, &g.edge).collect();
            let used: Vec<&&Record> = cell.iter().filter(|r| r.is_numeric()).collect();
            assert_eq!(g.used + g.excluded, cfg.replications);
            assert_eq!(g.coverage, used.iter().filter(|r| r.covered).count() as f64 / g.used as f64);
            let w = used.iter().map(|r| r.ci_hi - r.ci_lo).sum::<f64>() / used.len() as f64;
            assert!((g.mean_width - w).abs() < 1e-12);
        }
        assert_eq!(r.targets[1].truth, 0.0);
        assert!(r.targets[0].truth > 0.0);
    }

    #[test]
    fn reproducible_and_thread_invariant() {
        let mut cfg = small();
        cfg.threads = Some(1);
        let one = run_coverage(&cfg).unwrap();
        cfg.threads = Some(3);
        let three = run_coverage(&cfg).unwrap();
        assert_eq!(format!("{:?}", one.records), format!("{:?}", three.records));
    }

    #[test]
    fn qq_rows_per_record() {
        let mut cfg = small();
        cfg.edges.truncate(1);
        let (report, rows) = run_qq(&cfg).unwrap();
        assert_eq!(rows.len(), cfg.replications * cfg.estimators.len());
        assert_eq!(report.kind, "qq");
        for est in &cfg.estimators {
            let z: Vec<f64> = rows.iter().filter(|r| r.estimator == *est && r.rank > 0).map(|r| r.studentized).collect();
            assert!(z.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn ks_distance_examples() {
        assert!((ks_distance_normal(&[0.0]) - 0.5).abs() < 1e-12);
        let grid: Vec<f64> = (0..999).map(|i| normal::quantile((i as f64 + 0.5) / 999.0)).collect();
        assert!(ks_distance_normal(&grid) < 0.001);
    }

    #[test]
    fn power_requires_pair_design() {
        let mut cfg = presets::power();
        cfg.replications = 2;
        cfg.rho_grid = vec![0.0, 0.6];
        cfg.scenario.graph = GraphSpec::pair(10, 0.0);
        cfg.n = 150;
        let r = run_power(&cfg).unwrap();
        assert_eq!(r.rows.len(), 2 * cfg.estimators.len());
        assert_eq!(r.rows[0].truth, 0.0);
        assert!(r.rows.last().unwrap().truth < 0.0);
        let mut bad = cfg.clone();
        bad.scenario.graph = GraphSpec::grid(3, 0.2);
        assert!(matches!(run_power(&bad), Err(Error::Config(_))));
        bad = cfg;
        bad.rho_grid = vec![1.0];
        assert!(run_power(&bad).is_err());
    }
}
