//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit status
//! if any criterion fails.

use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rocket_ci::baselines::pseudo_score_edge;
use rocket_ci::edge::theta_hat;
use rocket_ci::harness::config::{presets, EdgeSpec, NodeRef, Scenario};
use rocket_ci::harness::{
    ks_distance_normal, run_coverage, run_power, run_subsample_synthetic, Estimator,
    ExperimentConfig,
};
use rocket_ci::matrix::{
    invert_spd, normalize_to_correlation, omega_entry_from_theta, sparse_spectral_norm_exhaustive,
    true_gamma, true_theta_block, PairIndex,
};
use rocket_ci::rank::kendall_tau_naive;
use rocket_ci::synth::{build_precision, sample_elliptical, sample_gaussian, GraphSpec, RadiusLaw};
use rocket_ci::{kendall_tau_pair, CorrelationMatrix, SquareMatrix};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(limit_secs: u64, t: Duration) -> bool {
    t < Duration::from_secs(limit_secs)
}

fn sample_mean_var(v: &[f64]) -> (f64, f64) {
    let m = v.len() as f64;
    let mean = v.iter().sum::<f64>() / m;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var)
}

fn random_correlation(dim: usize, rng: &mut ChaCha8Rng) -> CorrelationMatrix {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let spd = &g * g.transpose() + DMatrix::identity(dim, dim) * (0.3 * dim as f64);
    normalize_to_correlation(&SquareMatrix::from_dmatrix(&spd)).unwrap()
}

fn c1_kendall_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    for _ in 0..500 {
        let n = rng.random_range(2..=300);
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if kendall_tau_pair(&x, &y).unwrap().to_bits() != kendall_tau_naive(&x, &y).unwrap().to_bits() {
            mismatches += 1;
        }
    }
    let t = start.elapsed();
    outcome(mismatches == 0 && within(5, t), format!("{mismatches} mismatches of 500, {t:.2?}"))
}

fn c2_sine_identity() -> Outcome {
    let start = Instant::now();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let sigma = CorrelationMatrix::new(SquareMatrix::from_rows(&[vec![1.0, r], vec![r, 1.0]]).unwrap()).unwrap();
    let x = sample_gaussian(20_000, &sigma, 2).unwrap();
    let tau = kendall_tau_pair(&x.column(0), &x.column(1)).unwrap();
    let s = (std::f64::consts::FRAC_PI_2 * tau).sin();
    let t = start.elapsed();
    let pass = (tau - 0.5).abs() <= 0.02 && (s - 0.7071).abs() <= 0.02 && within(10, t);
    outcome(pass, format!("tau {tau:.4}, sin {s:.4}, {t:.2?}"))
}

fn c3_structure_constants() -> Outcome {
    let start = Instant::now();
    let grid = GraphSpec::grid(30, 0.24);
    let g = build_precision(&grid).unwrap();
    let w = g.omega.get(grid.grid_node(2, 2).unwrap(), grid.grid_node(2, 3).unwrap());
    let c = build_precision(&GraphSpec::chain(1000, 0.5)).unwrap();
    let v = c.omega.get(9, 10);
    let t = start.elapsed();
    let pass = (w - 0.37).abs() <= 0.01 && (v - 10.38).abs() <= 0.05 && within(30, t);
    outcome(pass, format!("grid {w:.4}, chain {v:.4}, {t:.2?}"))
}

fn sine(m: &SquareMatrix) -> SquareMatrix {
    let p = m.dim();
    let mut out = SquareMatrix::zeros(p);
    for i in 0..p {
        for j in 0..p {
            out.set(i, j, (std::f64::consts::FRAC_PI_2 * m.get(i, j)).sin());
        }
    }
    out
}

fn random_tau(p: usize, rng: &mut ChaCha8Rng) -> SquareMatrix {
    let mut t = SquareMatrix::identity(p);
    for i in 0..p {
        for j in i + 1..p {
            let v = rng.random_range(-1.0..=1.0);
            t.set(i, j, v);
            t.set(j, i, v);
        }
    }
    t
}

fn c4_lemma_suites() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_47 = f64::INFINITY;
    let mut worst_49 = f64::INFINITY;
    for _ in 0..1000 {
        let p = rng.random_range(2..=8);
        let k = rng.random_range(1..=3.min(p));
        let t = random_tau(p, &mut rng);
        let scale: f64 = [1.0, 0.3, 0.05][rng.random_range(0..3)];
        let mut th = t.clone();
        for i in 0..p {
            for j in i + 1..p {
                let v = (t.get(i, j) + scale * rng.random_range(-1.0..=1.0)).clamp(-1.0, 1.0);
                th.set(i, j, v);
                th.set(j, i, v);
            }
        }
        let mut dt = SquareMatrix::zeros(p);
        let mut ds = SquareMatrix::zeros(p);
        let (st, sth) = (sine(&t), sine(&th));
        let mut inf = 0.0_f64;
        for i in 0..p {
            for j in 0..p {
                dt.set(i, j, th.get(i, j) - t.get(i, j));
                ds.set(i, j, sth.get(i, j) - st.get(i, j));
                inf = inf.max(dt.get(i, j).abs());
            }
        }
        let lhs = sparse_spectral_norm_exhaustive(&ds, k).unwrap();
        let pi = std::f64::consts::PI;
        let rhs = pi * pi / 8.0 * k as f64 * inf * inf + 2.0 * pi * sparse_spectral_norm_exhaustive(&dt, k).unwrap();
        worst_47 = worst_47.min(rhs - lhs);

        let m = SquareMatrix::from_dmatrix(&DMatrix::from_fn(p, p, |_, _| rng.random_range(-2.0..2.0)));
        let u: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let v: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let l2 = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
        let l1 = |x: &[f64]| x.iter().map(|a| a.abs()).sum::<f64>();
        let lhs = m.bilinear(&u, &v).abs();
        let sk = (k as f64).sqrt();
        let rhs = (l2(&u) + l1(&u) / sk) * (l2(&v) + l1(&v) / sk) * sparse_spectral_norm_exhaustive(&m, k).unwrap();
        worst_49 = worst_49.min(rhs - lhs);
    }
    let t = start.elapsed();
    let pass = worst_47 >= -1e-10 && worst_49 >= -1e-10 && within(60, t);
    outcome(pass, format!("min slack {worst_47:.3e} (sine bound), {worst_49:.3e} (bilinear bound), {t:.2?}"))
}

fn c5_sign_law() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sigma = random_correlation(4, &mut rng);
    let draws = 100_000;
    let x = sample_elliptical(2 * draws, &sigma, RadiusLaw::AbsT(3.0), 51).unwrap();
    let z = sample_gaussian(draws, &sigma, 52).unwrap();
    let sgn = |v: f64| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 };
    let mut worst = 0.0_f64;
    for a in 0..4 {
        for b in a + 1..4 {
            let mut ex = 0.0_f64;
            let mut ez = 0.0_f64;
            for i in 0..draws {
                let (r, s) = (x.row(2 * i), x.row(2 * i + 1));
                ex += sgn(r[a] - s[a]) * sgn(r[b] - s[b]);
                let zr = z.row(i);
                ez += sgn(zr[a]) * sgn(zr[b]);
            }
            worst = worst.max((ex - ez).abs() / draws as f64);
        }
    }
    let t = start.elapsed();
    outcome(worst <= 0.02 && within(60, t), format!("max gap {worst:.4} over 6 pairs, {t:.2?}"))
}

fn c6_oracle_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let p = rng.random_range(3..=12);
        let sigma = random_correlation(p, &mut rng);
        let a = rng.random_range(0..p);
        let b = (a + rng.random_range(1..p)) % p;
        let (ga, gb) = true_gamma(&sigma, a, b).unwrap();
        let index = PairIndex::new(p, a, b).unwrap();
        let th = theta_hat(&sigma, &index, &ga, &gb).unwrap();
        let truth = true_theta_block(&sigma, a, b).unwrap();
        let omega = invert_spd(&sigma).unwrap();
        let (w, _) = omega_entry_from_theta(&th).unwrap();
        worst = worst
            .max((th.aa - truth.aa).abs())
            .max((th.ab - truth.ab).abs())
            .max((th.bb - truth.bb).abs())
            .max((w - omega.get(a, b)).abs());
    }
    outcome(worst <= 1e-10, format!("max error {worst:.3e} over 100 instances"))
}

fn gaussian_grid_run() -> rocket_ci::harness::ExperimentReport {
    let mut cfg = ExperimentConfig::new(Scenario::new(GraphSpec::grid(10, 0.24), RadiusLaw::Gaussian), 400, 500);
    cfg.edges = vec![
        EdgeSpec::new("edge", NodeRef::Grid([2, 2]), NodeRef::Grid([2, 3])),
        EdgeSpec::new("null", NodeRef::Grid([2, 2]), NodeRef::Grid([10, 10])),
    ];
    cfg.base_seed = 7;
    run_coverage(&cfg).unwrap()
}

fn c7_gaussian_coverage(r: &rocket_ci::harness::ExperimentReport) -> Outcome {
    let g = r.aggregate(Estimator::Rocket, "edge").unwrap();
    let pass = (0.93..=0.98).contains(&g.coverage) && g.mean_width <= 0.6;
    outcome(
        pass,
        format!(
            "coverage {:.1}%, mean width {:.3}, excluded {}, {:.1}s",
            100.0 * g.coverage,
            g.mean_width,
            g.excluded,
            r.runtime_seconds
        ),
    )
}

fn c8_robustness() -> Outcome {
    let mut cfg = presets::coverage();
    cfg.edges.truncate(1);
    cfg.estimators = vec![Estimator::Rocket, Estimator::Pearson];
    cfg.base_seed = 8;
    let r = run_coverage(&cfg).unwrap();
    let rocket = r.aggregate(Estimator::Rocket, "edge").unwrap().coverage;
    let pearson = r.aggregate(Estimator::Pearson, "edge").unwrap().coverage;
    let pass = rocket >= 0.90 && pearson <= rocket - 0.15 && r.runtime_seconds < 900.0;
    outcome(
        pass,
        format!("rocket {:.1}%, pearson {:.1}%, {:.1}s", 100.0 * rocket, 100.0 * pearson, r.runtime_seconds),
    )
}

fn c9_normality(r: &rocket_ci::harness::ExperimentReport) -> Outcome {
    let z: Vec<f64> = r
        .records_for(Estimator::Rocket, "null")
        .filter(|x| x.is_numeric())
        .map(|x| x.studentized_error(r.config.n))
        .collect();
    let (mean, var) = sample_mean_var(&z);
    let ks = ks_distance_normal(&z);
    let pass = z.len() == 500 && mean.abs() <= 0.15 && (0.8..=1.25).contains(&var) && ks <= 0.08;
    outcome(pass, format!("{} values, mean {mean:+.3}, variance {var:.3}, KS {ks:.4}", z.len()))
}

fn c10_size_power() -> Outcome {
    let mut cfg = presets::power();
    cfg.estimators = vec![Estimator::Rocket];
    cfg.rho_grid = vec![0.0, 0.5];
    cfg.base_seed = 10;
    let r = run_power(&cfg).unwrap();
    let size = r.rows[0].power;
    let power = r.rows[1].power;
    let pass = (size - 0.05).abs() <= 0.03 && power >= 0.9;
    outcome(pass, format!("rejection at rho=0 {size:.3}, at rho=0.5 {power:.3}, {:.1}s", r.runtime_seconds))
}

fn c11_pseudo_score_fixed_point() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let p = rng.random_range(3..=15);
        let sigma = random_correlation(p, &mut rng);
        let omega = invert_spd(&sigma).unwrap();
        let a = rng.random_range(0..p);
        let b = (a + rng.random_range(1..p)) % p;
        let est = pseudo_score_edge(&sigma, &omega, a, b).unwrap();
        worst = worst.max((est - omega.get(a, b)).abs());
    }
    outcome(worst <= 1e-10, format!("max error {worst:.3e} over 100 instances"))
}

fn c12_subsample() -> Outcome {
    let mut cfg = presets::subsample();
    cfg.base_seed = 12;
    let r = run_subsample_synthetic(&cfg).unwrap();
    let s = r.summary(Estimator::Rocket).unwrap();
    let pass = (0.85..=1.15).contains(&s.mean_sample_var) && (0.85..=0.95).contains(&s.mean_band_proportion);
    outcome(
        pass,
        format!(
            "mean sample variance {:.3}, band proportion {:.1}%, {} pairs",
            s.mean_sample_var,
            100.0 * s.mean_band_proportion,
            s.pairs_used
        ),
    )
}

fn run_cli(args: &[&str], threads: &str, out: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let status = Command::new(env!("CARGO_BIN_EXE_rocket"))
        .args(args)
        .args(["--threads", threads, "--out"])
        .arg(out)
        .env_remove("ROCKET_THREADS")
        .stdout(std::process::Stdio::null())
        .status()
        .unwrap();
    assert!(status.success(), "{args:?} failed");
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn c13_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 4] = [
        &["simulate", "coverage", "--seed", "13", "--reps", "8", "--graph", "grid:5:0.24", "--estimators", "rocket,pearson,npn,pseudo_score"],
        &["simulate", "qq", "--seed", "13", "--reps", "6", "--graph", "grid:5:0.24", "--radius", "abs_t:5"],
        &["simulate", "power", "--seed", "13", "--reps", "5", "--graph", "pair:15:0", "--rho", "0,0.3"],
        &["simulate", "subsample", "--seed", "13", "--subsamples", "4", "--n-sub", "40"],
    ];
    let mut compared = 0;
    let mut differing = Vec::new();
    for (i, args) in runs.iter().enumerate() {
        let one = run_cli(args, "1", &dir.path().join(format!("{i}-1")));
        let many = run_cli(args, "4", &dir.path().join(format!("{i}-4")));
        if one.len() != many.len() || one.is_empty() {
            differing.push(format!("{} file sets", args[1]));
        }
        for ((name, a), (_, b)) in one.iter().zip(&many) {
            compared += 1;
            if a != b {
                differing.push(format!("{}/{name}", args[1]));
            }
        }
    }
    outcome(differing.is_empty(), format!("{compared} CSV files compared for 1 vs 4 threads, differing: {differing:?}"))
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |id: u32, name: &'static str, o: Outcome| {
        println!("criterion {id:>2} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };
    record(1, "Kendall fast path equals brute force", c1_kendall_oracle());
    record(2, "Kendall tau and sine transform at n = 20000", c2_sine_identity());
    record(3, "structure constants", c3_structure_constants());
    record(4, "deterministic norm inequalities", c4_lemma_suites());
    record(5, "sign vectors match the Gaussian law", c5_sign_law());
    record(6, "population inputs reproduce Theta and Omega", c6_oracle_exactness());
    let gaussian = gaussian_grid_run();
    record(7, "Gaussian grid coverage", c7_gaussian_coverage(&gaussian));
    record(8, "heavy-tailed robustness versus Pearson", c8_robustness());
    record(9, "null-edge studentized normality", c9_normality(&gaussian));
    record(10, "size and power", c10_size_power());
    record(11, "pseudo-score fixed point", c11_pseudo_score_fixed_point());
    record(12, "disjoint-subsample variance", c12_subsample());
    record(13, "thread-count determinism of CSV output", c13_determinism());
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
