//! Command-line interface behind the `rocket` binary.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{format_f64, DataMatrix};
use crate::edge::EdgeInference;
use crate::error::{Error, Result};
use crate::harness::config::{presets, ExperimentConfig, SubsampleSettings};
use crate::harness::estimators::evaluate_targets;
use crate::harness::output::{
    write_csv, write_csv_file, write_edge_list, write_json_file, PowerRecord,
};
use crate::harness::{
    estimate_graph, run_coverage, run_power, run_qq, run_subsample_protocol,
    run_subsample_synthetic, with_pool, Estimator,
};
use crate::lasso::{default_lambda, LassoConfig};
use crate::synth::{
    build_precision, empirical_tail_dependence, ContaminationSpec, GraphSpec, MarginalSet, RadiusLaw,
};

#[derive(Debug, Parser)]
#[command(name = "rocket", version, about = "Rank-based confidence intervals for latent precision entries")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo experiments on synthetic data.
    #[command(subcommand)]
    Simulate(Simulate),
    /// Inference on a CSV data set.
    #[command(subcommand)]
    Estimate(Estimate),
    /// Draw a synthetic data set and write it as CSV.
    Sample(SampleArgs),
    /// Empirical tail dependence of two columns over a grid of levels.
    Tail(TailArgs),
}

#[derive(Debug, Subcommand)]
pub enum Simulate {
    /// Interval coverage and width per estimator and edge.
    Coverage(SimArgs),
    /// Sorted studentized errors with matched normal quantiles.
    Qq(SimArgs),
    /// Rejection rates over a grid of `rho` for a pair design.
    Power(SimArgs),
    /// Sample variances of `z` over disjoint subsamples.
    Subsample(SubsampleArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioFlags {
    /// TOML experiment file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `grid:<side>:<omega>`, `grid:<rows>x<cols>:<omega>`, `chain:<p>:<rho>` or `pair:<p>:<rho>`.
    #[arg(long)]
    pub graph: Option<GraphSpec>,
    /// `gaussian`, `abs_t:<d>`, `mvt:<d>` or `fixed:<scale>`.
    #[arg(long)]
    pub radius: Option<RadiusLaw>,
    /// Apply the standard cycle of monotone marginal transforms.
    #[arg(long)]
    pub marginals: bool,
    /// `<mechanism>:<rate>` with mechanism `random_row`, `deterministic_row` or `element`.
    #[arg(long)]
    pub contamination: Option<ContaminationSpec>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[command(flatten)]
    pub scenario: ScenarioFlags,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Comma-separated subset of rocket, pearson, npn, pseudo_score.
    #[arg(long, value_delimiter = ',')]
    pub estimators: Option<Vec<Estimator>>,
    /// Comma-separated `rho` values (power only).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub rho: Option<Vec<f64>>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Large-scale settings (30 x 30 grids, p = 1000, 1000 replications); hours of runtime.
    #[arg(long)]
    pub full: bool,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SubsampleArgs {
    #[command(flatten)]
    pub scenario: ScenarioFlags,
    #[arg(long)]
    pub seed: u64,
    /// Use these rows instead of synthetic data.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Number of disjoint subsamples `L`.
    #[arg(long)]
    pub subsamples: Option<usize>,
    #[arg(long)]
    pub n_sub: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub estimators: Option<Vec<Estimator>>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Estimate {
    /// Interval and test for one pair.
    Edge(EdgeArgs),
    /// p-values for every pair and thresholded edge sets.
    Graph(GraphArgs),
}

#[derive(Debug, Args)]
pub struct EdgeArgs {
    /// CSV with a header row and one column per variable.
    #[arg(long)]
    pub data: PathBuf,
    /// 0-based column index.
    #[arg(long)]
    pub a: usize,
    #[arg(long)]
    pub b: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_delimiter = ',', default_value = "rocket")]
    pub estimators: Vec<Estimator>,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Comma-separated p-value thresholds.
    #[arg(long, value_delimiter = ',', default_value = "0.001,0.0001")]
    pub threshold: Vec<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(flatten)]
    pub scenario: ScenarioFlags,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TailArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub a: usize,
    #[arg(long)]
    pub b: usize,
    /// Comma-separated quantile levels; indicators mark values at or above the level's quantile.
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.8,0.9,0.95,0.98,0.99")]
    pub levels: Vec<f64>,
}

/// Starts from the file (or `base`) and applies the scenario flags.
fn load_config(flags: &ScenarioFlags, base: ExperimentConfig) -> Result<ExperimentConfig> {
    let mut cfg = match &flags.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => base,
    };
    if let Some(g) = flags.graph {
        if flags.config.is_none() || cfg.edges.iter().any(|e| e.resolve(&g).is_err()) {
            cfg.edges = presets::default_edges(&g);
        }
        cfg.scenario.graph = g;
    }
    if let Some(r) = flags.radius {
        cfg.scenario.radius = r;
    }
    if flags.marginals {
        cfg.scenario.marginals = Some(MarginalSet::standard());
    }
    if let Some(c) = flags.contamination {
        cfg.scenario.contamination = Some(c);
    }
    Ok(cfg)
}

fn apply_sim_flags(args: &SimArgs, mut cfg: ExperimentConfig) -> Result<ExperimentConfig> {
    if args.full {
        cfg = cfg.full_scale();
    }
    cfg.base_seed = args.seed;
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(r) = args.reps {
        cfg.replications = r;
    }
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    if args.lambda.is_some() {
        cfg.lambda = args.lambda;
    }
    if let Some(e) = &args.estimators {
        cfg.estimators = e.clone();
    }
    if let Some(r) = &args.rho {
        cfg.rho_grid = r.clone();
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare_out(dir: &Path, cfg: Option<&ExperimentConfig>) -> Result<()> {
    fs::create_dir_all(dir)?;
    if let Some(cfg) = cfg {
        fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    }
    Ok(())
}

fn default_for(cmd: &Simulate) -> ExperimentConfig {
    match cmd {
        Simulate::Coverage(_) => presets::coverage(),
        Simulate::Qq(_) => presets::qq(),
        Simulate::Power(_) => presets::power(),
        Simulate::Subsample(_) => presets::subsample(),
    }
}

fn simulate(cmd: Simulate) -> Result<()> {
    let base = default_for(&cmd);
    match cmd {
        Simulate::Coverage(args) => {
            let cfg = apply_sim_flags(&args, load_config(&args.scenario, base)?)?;
            prepare_out(&args.out, Some(&cfg))?;
            let r = run_coverage(&cfg)?;
            write_csv_file(args.out.join("records.csv"), &r.records)?;
            write_csv_file(args.out.join("summary.csv"), &r.aggregates)?;
            write_json_file(args.out.join("report.json"), &r)?;
            write_csv(std::io::stdout().lock(), &r.aggregates)
        }
        Simulate::Qq(args) => {
            let cfg = apply_sim_flags(&args, load_config(&args.scenario, base)?)?;
            prepare_out(&args.out, Some(&cfg))?;
            let (r, rows) = run_qq(&cfg)?;
            write_csv_file(args.out.join("qq.csv"), &rows)?;
            write_csv_file(args.out.join("records.csv"), &r.records)?;
            write_csv_file(args.out.join("summary.csv"), &r.aggregates)?;
            write_json_file(args.out.join("report.json"), &r)?;
            write_csv(std::io::stdout().lock(), &r.aggregates)
        }
        Simulate::Power(args) => {
            let cfg = apply_sim_flags(&args, load_config(&args.scenario, base)?)?;
            prepare_out(&args.out, Some(&cfg))?;
            let r = run_power(&cfg)?;
            write_csv_file(args.out.join("power.csv"), &r.rows)?;
            let rows: Vec<PowerRecord> = r
                .runs
                .iter()
                .zip(&cfg.rho_grid)
                .flat_map(|(run, &rho)| run.records.iter().map(move |rec| PowerRecord { rho, record: rec }))
                .collect();
            write_csv_file(args.out.join("records.csv"), &rows)?;
            write_json_file(args.out.join("report.json"), &r)?;
            write_csv(std::io::stdout().lock(), &r.rows)
        }
        Simulate::Subsample(args) => {
            let mut cfg = load_config(&args.scenario, base)?;
            cfg.base_seed = args.seed;
            let mut s = cfg.subsample.unwrap_or(SubsampleSettings { subsamples: 25, n_sub: 50 });
            if let Some(l) = args.subsamples {
                s.subsamples = l;
            }
            if let Some(m) = args.n_sub {
                s.n_sub = m;
            }
            cfg.subsample = Some(s);
            cfg.n = s.n_sub;
            if let Some(a) = args.alpha {
                cfg.alpha = a;
            }
            if args.lambda.is_some() {
                cfg.lambda = args.lambda;
            }
            if let Some(e) = &args.estimators {
                cfg.estimators = e.clone();
            }
            if args.threads.is_some() {
                cfg.threads = args.threads;
            }
            cfg.validate()?;
            prepare_out(&args.out, Some(&cfg))?;
            let r = match &args.data {
                Some(path) => {
                    let x = DataMatrix::from_csv_file(path)?;
                    let lambda = cfg.lambda.unwrap_or_else(|| default_lambda(s.n_sub, x.ncols()));
                    run_subsample_protocol(&x, s, &cfg.estimators, &LassoConfig::new(lambda), cfg.alpha, cfg.threads)?
                }
                None => run_subsample_synthetic(&cfg)?,
            };
            write_csv_file(args.out.join("subsample_pairs.csv"), &r.pairs)?;
            write_csv_file(args.out.join("subsample_summary.csv"), &r.summaries)?;
            write_json_file(args.out.join("report.json"), &r)?;
            write_csv(std::io::stdout().lock(), &r.summaries)
        }
    }
}

fn lasso_for(lambda: Option<f64>, x: &DataMatrix) -> LassoConfig {
    LassoConfig::new(lambda.unwrap_or_else(|| default_lambda(x.nrows(), x.ncols())))
}

fn print_edges(results: &[(Estimator, EdgeInference)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(std::io::stdout().lock());
    out.write_record(["estimator", "a", "b", "omega_hat", "s_ab", "z", "p_value", "ci_lo", "ci_hi", "warnings"])?;
    for (est, e) in results {
        out.write_record([
            est.to_string(),
            e.a.to_string(),
            e.b.to_string(),
            format_f64(e.omega_ab),
            format_f64(e.s_ab),
            format_f64(e.z),
            format_f64(e.p_value),
            format_f64(e.ci_lo),
            format_f64(e.ci_hi),
            e.warnings.labels(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn estimate(cmd: Estimate) -> Result<()> {
    match cmd {
        Estimate::Edge(args) => {
            let x = DataMatrix::from_csv_file(&args.data)?;
            for idx in [args.a, args.b] {
                if idx >= x.ncols() {
                    return Err(Error::IndexOutOfRange { index: idx, p: x.ncols() });
                }
            }
            let cfg = lasso_for(args.lambda, &x);
            let out = evaluate_targets(&x, &args.estimators, &[(args.a, args.b)], &cfg, args.alpha);
            let mut results = Vec::new();
            for (est, mut row) in args.estimators.iter().zip(out) {
                results.push((*est, row.remove(0)?));
            }
            print_edges(&results)
        }
        Estimate::Graph(args) => {
            let x = DataMatrix::from_csv_file(&args.data)?;
            let cfg = lasso_for(args.lambda, &x);
            let (g, _) = with_pool(args.threads, || estimate_graph(&x, &args.threshold, &cfg))?;
            let g = g?;
            prepare_out(&args.out, None)?;
            write_csv_file(args.out.join("pairs.csv"), &g.pairs)?;
            write_edge_list(fs::File::create(args.out.join("edges.csv"))?, &g)?;
            write_json_file(args.out.join("report.json"), &g)?;
            for (t, e) in g.thresholds.iter().zip(&g.edges) {
                println!("threshold {}: {} edges of {} pairs", format_f64(*t), e.len(), g.pairs.len());
            }
            Ok(())
        }
    }
}

fn sample(args: SampleArgs) -> Result<()> {
    let mut cfg = load_config(&args.scenario, presets::coverage())?;
    cfg.edges.clear();
    if let Some(n) = args.n {
        cfg.n = n;
    }
    cfg.validate()?;
    let model = build_precision(&cfg.scenario.graph)?;
    let x = cfg.scenario.sample(&model, cfg.n, args.seed)?;
    x.to_csv_file(&args.out)
}

fn tail(args: TailArgs) -> Result<()> {
    let x = DataMatrix::from_csv_file(&args.data)?;
    let mut out = csv::Writer::from_writer(std::io::stdout().lock());
    out.write_record(["level", "tail_dependence"])?;
    for &lv in &args.levels {
        let t = empirical_tail_dependence(&x, args.a, args.b, lv)?;
        out.write_record([format_f64(lv), format_f64(t)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(s) => simulate(s),
        Command::Estimate(e) => estimate(e),
        Command::Sample(s) => sample(s),
        Command::Tail(t) => tail(t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_tree_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn seed_is_required_for_simulate() {
        assert!(Cli::try_parse_from(["rocket", "simulate", "coverage"]).is_err());
        let cli = Cli::try_parse_from([
            "rocket", "simulate", "power", "--seed", "3", "--rho", "-0.2,0,0.4", "--estimators",
            "rocket,npn",
        ])
        .unwrap();
        let Command::Simulate(Simulate::Power(a)) = cli.command else { panic!() };
        assert_eq!(a.rho.unwrap(), vec![-0.2, 0.0, 0.4]);
        assert_eq!(a.estimators.unwrap(), vec![Estimator::Rocket, Estimator::Npn]);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        let mut file_cfg = presets::coverage();
        file_cfg.n = 123;
        file_cfg.replications = 7;
        fs::write(&path, file_cfg.to_toml().unwrap()).unwrap();
        let cli = Cli::try_parse_from([
            "rocket", "simulate", "coverage", "--config", path.to_str().unwrap(), "--seed", "9",
            "--reps", "3", "--radius", "gaussian",
        ])
        .unwrap();
        let Command::Simulate(Simulate::Coverage(a)) = cli.command else { panic!() };
        let cfg = apply_sim_flags(&a, load_config(&a.scenario, presets::qq()).unwrap()).unwrap();
        assert_eq!(cfg.n, 123);
        assert_eq!(cfg.replications, 3);
        assert_eq!(cfg.base_seed, 9);
        assert_eq!(cfg.scenario.radius, RadiusLaw::Gaussian);
    }
}
