//! Initial regression vectors: an l1-penalized quadratic program solved by
//! coordinate descent, least-squares refitting on the joint support, and
//! the all-nodes cache that lets many pairs share one fit per node.
//!
//! The quadratic `A` is a principal block of `Sigma_hat`, which is not
//! necessarily positive semidefinite, so the program may be nonconvex.
//! Each coordinate step still minimizes a strictly convex scalar problem
//! (the diagonal is one), which keeps the objective non-increasing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{PairIndex, SquareMatrix, SymFactor};

/// Coefficients with magnitude at or below this are outside the support.
pub const SUPPORT_TOL: f64 = 1e-10;
/// Diagonal ridge used when a refit system is ill-conditioned.
pub const REFIT_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoConfig {
    pub lambda: f64,
    /// l1-ball radius; exceeding it is an error rather than a projection.
    pub radius: f64,
    /// Convergence threshold on the largest coordinate change in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl LassoConfig {
    pub fn new(lambda: f64) -> Self {
        Self { lambda, radius: 1e6, tol: 1e-7, max_sweeps: 10_000 }
    }

    pub fn with_default_lambda(n: usize, p: usize) -> Self {
        Self::new(default_lambda(n, p))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !(self.radius > 0.0) || !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lasso config needs lambda >= 0, radius > 0, tol > 0 (got {self:?})"
            )));
        }
        Ok(())
    }
}

/// `2.1 * sqrt(ln(p) / n)`.
pub fn default_lambda(n: usize, p: usize) -> f64 {
    2.1 * ((p as f64).ln() / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coef: Vec<f64>,
    pub sweeps: usize,
    /// False when `max_sweeps` ran out first; `coef` is still the last iterate.
    pub converged: bool,
    pub objective: f64,
}

impl LassoFit {
    pub fn support(&self) -> Vec<usize> {
        support_of(&self.coef)
    }
}

fn support_of(v: &[f64]) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, x)| x.abs() > SUPPORT_TOL)
        .map(|(j, _)| j)
        .collect()
}

#[inline]
fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// The principal submatrix `M[idx, idx]`, read in place.
#[derive(Clone, Copy)]
struct Gram<'a> {
    m: &'a SquareMatrix,
    idx: &'a [usize],
}

impl Gram<'_> {
    fn len(&self) -> usize {
        self.idx.len()
    }

    fn diag(&self, j: usize) -> f64 {
        self.m.get(self.idx[j], self.idx[j])
    }
}

fn objective(gamma: &[f64], z: &[f64], r: &[f64], lambda: f64) -> f64 {
    // with r = z - A gamma:  1/2 g'Ag - g'z = -1/2 g'(z + r)
    let mut quad = 0.0;
    let mut l1 = 0.0;
    for j in 0..gamma.len() {
        quad += gamma[j] * (z[j] + r[j]);
        l1 += gamma[j].abs();
    }
    -0.5 * quad + lambda * l1
}

fn coordinate_descent(
    a: Gram<'_>,
    z: &[f64],
    cfg: &LassoConfig,
    init: Option<&[f64]>,
) -> Result<LassoFit> {
    cfg.validate()?;
    let m = a.len();
    if z.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: z.len() });
    }
    for j in 0..m {
        let d = a.diag(j);
        if !(d > 1e-8) {
            return Err(Error::NonUnitDiagonal { index: j, value: d });
        }
    }
    let mut gamma = match init {
        Some(g) if g.len() != m => {
            return Err(Error::DimensionMismatch { expected: m, found: g.len() })
        }
        Some(g) => g.to_vec(),
        None => vec![0.0; m],
    };
    let mut r = z.to_vec();
    for (j, &g) in gamma.iter().enumerate() {
        if g != 0.0 {
            let row = a.m.row(a.idx[j]);
            for (k, rk) in r.iter_mut().enumerate() {
                *rk -= row[a.idx[k]] * g;
            }
        }
    }

    let mut obj = objective(&gamma, z, &r, cfg.lambda);
    let mut sweeps = 0;
    let mut converged = m == 0;
    while !converged && sweeps < cfg.max_sweeps {
        sweeps += 1;
        let mut max_change = 0.0_f64;
        for j in 0..m {
            let ajj = a.diag(j);
            let old = gamma[j];
            let rho = r[j] + ajj * old;
            let new = soft_threshold(rho, cfg.lambda) / ajj;
            let delta = new - old;
            if delta != 0.0 {
                gamma[j] = new;
                let row = a.m.row(a.idx[j]);
                for (k, rk) in r.iter_mut().enumerate() {
                    *rk -= row[a.idx[k]] * delta;
                }
                max_change = max_change.max(delta.abs());
            }
        }
        let l1: f64 = gamma.iter().map(|g| g.abs()).sum();
        if l1 > cfg.radius {
            return Err(Error::RadiusExceeded { norm: l1, radius: cfg.radius });
        }
        let next = objective(&gamma, z, &r, cfg.lambda);
        debug_assert!(
            next <= obj + 1e-9 * (1.0 + obj.abs()),
            "objective increased from {obj} to {next}"
        );
        obj = next;
        converged = max_change < cfg.tol;
    }
    Ok(LassoFit { coef: gamma, sweeps, converged, objective: obj })
}

/// A local minimizer of `1/2 g'Ag - g'z + lambda ||g||_1` by cyclic
/// coordinate descent in ascending index order, started at `init` or zero.
pub fn lasso_local_min(
    a: &SquareMatrix,
    z: &[f64],
    cfg: &LassoConfig,
    init: Option<&[f64]>,
) -> Result<LassoFit> {
    let idx: Vec<usize> = (0..a.dim()).collect();
    coordinate_descent(Gram { m: a, idx: &idx }, z, cfg, init)
}

/// Lasso of node `c` on the nodes `rows` using the blocks of `sigma`.
pub fn lasso_on_nodes(
    sigma: &SquareMatrix,
    rows: &[usize],
    c: usize,
    cfg: &LassoConfig,
) -> Result<LassoFit> {
    let z: Vec<f64> = rows.iter().map(|&j| sigma.get(j, c)).collect();
    coordinate_descent(Gram { m: sigma, idx: rows }, &z, cfg, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refit {
    /// Coefficients over the full index set, zero off the support.
    pub coef: Vec<f64>,
    pub ridge_used: bool,
}

/// Unpenalized least squares `Sigma_J x = Sigma_{J c}` over the node set
/// `nodes`; returns the solution and whether the ridge fallback was used.
pub fn refit_nodes(sigma: &SquareMatrix, nodes: &[usize], c: usize) -> Result<(Vec<f64>, bool)> {
    if nodes.is_empty() {
        return Ok((Vec::new(), false));
    }
    let rhs: Vec<f64> = nodes.iter().map(|&j| sigma.get(j, c)).collect();
    let block = sigma.submatrix(nodes, nodes);
    match SymFactor::new(block.clone()) {
        Ok(f) => Ok((f.solve(&rhs)?, false)),
        Err(Error::IllConditioned { .. }) => {
            let mut ridged = block;
            for k in 0..nodes.len() {
                ridged[(k, k)] += REFIT_RIDGE;
            }
            Ok((SymFactor::with_limit(ridged, f64::INFINITY)?.solve(&rhs)?, true))
        }
        Err(e) => Err(e),
    }
}

/// [`refit_nodes`] embedded into the index set of `idx`; `support` lists
/// positions within `idx.rest`.
pub fn refit_on_support(
    sigma: &SquareMatrix,
    idx: &PairIndex,
    support: &[usize],
    c: usize,
) -> Result<Refit> {
    let mut coef = vec![0.0; idx.rest.len()];
    let nodes: Vec<usize> = support.iter().map(|&k| idx.rest[k]).collect();
    let (x, ridge_used) = refit_nodes(sigma, &nodes, c)?;
    for (&k, v) in support.iter().zip(x) {
        coef[k] = v;
    }
    Ok(Refit { coef, ridge_used })
}

/// The estimated regression vectors for one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaPair {
    pub index: PairIndex,
    pub gamma_a: Vec<f64>,
    pub gamma_b: Vec<f64>,
    /// Penalized solutions before refitting.
    pub lasso_a: Vec<f64>,
    pub lasso_b: Vec<f64>,
    /// Joint support as positions within `index.rest`.
    pub support: Vec<usize>,
    pub refit: bool,
    pub lambda: f64,
    pub ridge_used: bool,
    pub converged: bool,
}

impl GammaPair {
    /// Joint support as node labels.
    pub fn support_nodes(&self) -> Vec<usize> {
        self.support.iter().map(|&k| self.index.rest[k]).collect()
    }

    /// Wraps given vectors (for example the population `gamma`) without any fitting.
    pub fn from_vectors(index: PairIndex, gamma_a: Vec<f64>, gamma_b: Vec<f64>) -> Result<Self> {
        let m = index.rest.len();
        for v in [&gamma_a, &gamma_b] {
            if v.len() != m {
                return Err(Error::DimensionMismatch { expected: m, found: v.len() });
            }
        }
        let mut support = support_of(&gamma_a);
        support.extend(support_of(&gamma_b));
        support.sort_unstable();
        support.dedup();
        Ok(Self {
            index,
            lasso_a: gamma_a.clone(),
            lasso_b: gamma_b.clone(),
            gamma_a,
            gamma_b,
            support,
            refit: false,
            lambda: 0.0,
            ridge_used: false,
            converged: true,
        })
    }
}

fn refit_pair(
    sigma: &SquareMatrix,
    index: PairIndex,
    fit_a: LassoFit,
    fit_b: LassoFit,
    lambda: f64,
) -> Result<GammaPair> {
    let mut support = fit_a.support();
    support.extend(fit_b.support());
    support.sort_unstable();
    support.dedup();
    let ra = refit_on_support(sigma, &index, &support, index.a)?;
    let rb = refit_on_support(sigma, &index, &support, index.b)?;
    Ok(GammaPair {
        gamma_a: ra.coef,
        gamma_b: rb.coef,
        converged: fit_a.converged && fit_b.converged,
        lasso_a: fit_a.coef,
        lasso_b: fit_b.coef,
        support,
        refit: true,
        lambda,
        ridge_used: ra.ridge_used || rb.ridge_used,
        index,
    })
}

/// Lasso for `c = a, b` on `(Sigma_I, Sigma_{I c})`, then refit both on the
/// union of the two supports.
pub fn gamma_pair_pipeline(
    sigma: &SquareMatrix,
    a: usize,
    b: usize,
    cfg: &LassoConfig,
) -> Result<GammaPair> {
    let index = PairIndex::new(sigma.dim(), a, b)?;
    let fit_a = lasso_on_nodes(sigma, &index.rest, a, cfg)?;
    let fit_b = lasso_on_nodes(sigma, &index.rest, b, cfg)?;
    refit_pair(sigma, index, fit_a, fit_b, cfg.lambda)
}

/// One Lasso fit per node on all remaining nodes.
#[derive(Debug, Clone)]
pub struct AllNodesFit {
    p: usize,
    /// `fits[a]` is indexed by `[p] \ {a}` in ascending order.
    fits: Vec<LassoFit>,
    cfg: LassoConfig,
}

/// How a pair's penalized fits were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReuseInfo {
    pub reused_a: bool,
    pub reused_b: bool,
}

pub fn all_nodes_gamma(sigma: &SquareMatrix, cfg: &LassoConfig) -> Result<AllNodesFit> {
    let p = sigma.dim();
    if p < 3 {
        return Err(Error::TooFewVariables { required: 3, found: p });
    }
    let fits = (0..p)
        .into_par_iter()
        .map(|a| {
            let rows: Vec<usize> = (0..p).filter(|&j| j != a).collect();
            lasso_on_nodes(sigma, &rows, a, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AllNodesFit { p, fits, cfg: *cfg })
}

impl AllNodesFit {
    pub fn p(&self) -> usize {
        self.p
    }

    /// Coefficients of node `a` regressed on `[p] \ {a}`.
    pub fn coef(&self, a: usize) -> &[f64] {
        &self.fits[a].coef
    }

    /// Coefficient of node `b` in the regression of node `a`.
    pub fn coef_of(&self, a: usize, b: usize) -> f64 {
        let pos = if b < a { b } else { b - 1 };
        self.fits[a].coef[pos]
    }

    /// True when node `b` is not selected for node `a`, so the cached fit is
    /// already a solution of the regression of `a` on `[p] \ {a, b}`.
    pub fn reusable(&self, a: usize, b: usize) -> bool {
        a != b && self.coef_of(a, b).abs() <= SUPPORT_TOL
    }

    /// Cached fit of `a` with the entry for `b` dropped, indexed like `PairIndex::rest`.
    pub fn restricted(&self, a: usize, b: usize) -> LassoFit {
        let fit = &self.fits[a];
        let drop = if b < a { b } else { b - 1 };
        let coef = fit
            .coef
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != drop)
            .map(|(_, &v)| v)
            .collect();
        LassoFit { coef, ..fit.clone() }
    }

    /// The refitted pair, reusing cached fits where allowed and solving the
    /// pair-specific Lasso otherwise.
    pub fn gamma_pair(
        &self,
        sigma: &SquareMatrix,
        a: usize,
        b: usize,
    ) -> Result<(GammaPair, ReuseInfo)> {
        let index = PairIndex::new(self.p, a, b)?;
        let mut info = ReuseInfo::default();
        let fit = |c: usize, d: usize, flag: &mut bool| -> Result<LassoFit> {
            if self.reusable(c, d) {
                *flag = true;
                Ok(self.restricted(c, d))
            } else {
                lasso_on_nodes(sigma, &index.rest, c, &self.cfg)
            }
        };
        let fit_a = fit(a, b, &mut info.reused_a)?;
        let fit_b = fit(b, a, &mut info.reused_b)?;
        Ok((refit_pair(sigma, index, fit_a, fit_b, self.cfg.lambda)?, info))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::true_gamma;
    use crate::synth::{build_precision, GraphSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(dim: usize, rng: &mut ChaCha8Rng) -> SquareMatrix {
        let b = SquareMatrix::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        let mut m = b.matmul(&b.transpose()).unwrap();
        for i in 0..dim {
            m.set(i, i, m.get(i, i) + 0.5);
        }
        // rescale to unit diagonal
        let d: Vec<f64> = (0..dim).map(|i| m.get(i, i).sqrt()).collect();
        SquareMatrix::from_fn(dim, |i, j| if i == j { 1.0 } else { m.get(i, j) / (d[i] * d[j]) })
    }

    fn kkt_violation(a: &SquareMatrix, z: &[f64], g: &[f64], lambda: f64) -> f64 {
        let ag = a.mul_vec(g).unwrap();
        let mut worst = 0.0_f64;
        for j in 0..g.len() {
            let grad = ag[j] - z[j];
            let v = if g[j] == 0.0 {
                (grad.abs() - lambda).max(0.0)
            } else {
                (grad + lambda * g[j].signum()).abs()
            };
            worst = worst.max(v);
        }
        worst
    }

    #[test]
    fn lambda_values() {
        assert!((default_lambda(400, 900) - 2.1 * (900f64.ln() / 400.0).sqrt()).abs() < 1e-15);
        assert!((default_lambda(400, 900) - 0.2739).abs() < 5e-5);
        let e = std::f64::consts::E;
        assert!((2.1 * (e.ln() / 400.0).sqrt() - 0.105).abs() < 1e-12);
        let ratio = default_lambda(100, 50) / default_lambda(200, 50);
        assert!((ratio - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn identity_is_soft_threshold() {
        let z = [0.5, -0.05, -2.0, 0.1];
        let fit = lasso_local_min(&SquareMatrix::identity(4), &z, &LassoConfig::new(0.1), None)
            .unwrap();
        assert_eq!(fit.coef, vec![0.5 - 0.1, 0.0, -2.0 + 0.1, 0.0]);
        // the second sweep confirms convergence
        assert!(fit.converged && fit.sweeps <= 2);
    }

    #[test]
    fn full_shrinkage() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_spd(5, &mut rng);
        let z = [0.3, -0.2, 0.1, 0.0, 0.25];
        let fit = lasso_local_min(&a, &z, &LassoConfig::new(0.3), None).unwrap();
        assert!(fit.coef.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn kkt_and_monotone_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let dim = rng.random_range(2..=8);
            let a = random_spd(dim, &mut rng);
            let z: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let cfg = LassoConfig::new(0.1);
            let fit = lasso_local_min(&a, &z, &cfg, None).unwrap();
            assert!(fit.converged);
            assert!(kkt_violation(&a, &z, &fit.coef, 0.1) < 1e-6);
        }
    }

    #[test]
    fn rejects_bad_diagonal() {
        let a = SquareMatrix::diag(&[1.0, 0.0]);
        assert!(matches!(
            lasso_local_min(&a, &[1.0, 1.0], &LassoConfig::new(0.1), None),
            Err(Error::NonUnitDiagonal { index: 1, .. })
        ));
    }

    #[test]
    fn indefinite_can_blow_past_radius() {
        // ridge of negative curvature along (1, -1)
        let a = SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let mut cfg = LassoConfig::new(0.0);
        cfg.radius = 1e3;
        let r = lasso_local_min(&a, &[1.0, -1.0], &cfg, None);
        assert!(matches!(r, Err(Error::RadiusExceeded { .. })), "{r:?}");
    }

    #[test]
    fn refit_cases() {
        let idx = PairIndex::new(5, 0, 1).unwrap();
        let s = SquareMatrix::identity(5);
        assert_eq!(refit_on_support(&s, &idx, &[], 0).unwrap().coef, vec![0.0; 3]);
        assert_eq!(refit_on_support(&s, &idx, &[0, 2], 0).unwrap().coef, vec![0.0; 3]);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sigma = random_spd(6, &mut rng);
        let idx = PairIndex::new(6, 2, 4).unwrap();
        let (ga, gb) = true_gamma(&sigma, 2, 4).unwrap();
        let all: Vec<usize> = (0..4).collect();
        let ra = refit_on_support(&sigma, &idx, &all, 2).unwrap();
        let rb = refit_on_support(&sigma, &idx, &all, 4).unwrap();
        for (x, y) in ra.coef.iter().zip(&ga).chain(rb.coef.iter().zip(&gb)) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn refit_falls_back_to_ridge() {
        let mut s = SquareMatrix::identity(4);
        // nodes 2 and 3 are identical, so the 2x2 refit block is singular
        s.set(2, 3, 1.0);
        s.set(3, 2, 1.0);
        s.set(0, 2, 0.5);
        s.set(2, 0, 0.5);
        s.set(0, 3, 0.5);
        s.set(3, 0, 0.5);
        let idx = PairIndex::new(4, 0, 1).unwrap();
        let r = refit_on_support(&s, &idx, &[0, 1], 0).unwrap();
        assert!(r.ridge_used);
        assert!(r.coef.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn identity_pattern_gives_empty_support() {
        let g = gamma_pair_pipeline(&SquareMatrix::identity(6), 1, 3, &LassoConfig::new(0.1))
            .unwrap();
        assert!(g.support.is_empty());
        assert!(g.gamma_a.iter().chain(&g.gamma_b).all(|&v| v == 0.0));
        assert!(g.refit);
    }

    #[test]
    fn chain_population_recovers_neighbourhood() {
        let model = build_precision(&GraphSpec::chain(20, 0.5)).unwrap();
        let sigma = &*model.sigma;
        let (a, b) = (5, 12);
        let g = gamma_pair_pipeline(sigma, a, b, &LassoConfig::new(0.05)).unwrap();
        let nodes = g.support_nodes();
        for j in [a - 1, a + 1, b - 1, b + 1] {
            assert!(nodes.contains(&j), "missing {j} from {nodes:?}");
        }
        let (ta, tb) = true_gamma(sigma, a, b).unwrap();
        let dist = |x: &[f64], y: &[f64]| {
            x.iter().zip(y).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt()
        };
        assert!(dist(&g.gamma_a, &ta) < 0.1);
        assert!(dist(&g.gamma_b, &tb) < 0.1);
        // refit is no farther from the truth than the penalized fit
        assert!(dist(&g.gamma_a, &ta) <= dist(&g.lasso_a, &ta) + 1e-12);
        assert!(dist(&g.gamma_b, &tb) <= dist(&g.lasso_b, &tb) + 1e-12);
    }

    #[test]
    fn all_nodes_reuse() {
        let id = all_nodes_gamma(&SquareMatrix::identity(5), &LassoConfig::new(0.1)).unwrap();
        for a in 0..5 {
            assert!(id.coef(a).iter().all(|&v| v == 0.0));
            for b in 0..5 {
                assert_eq!(id.reusable(a, b), a != b);
            }
        }

        let model = build_precision(&GraphSpec::chain(12, 0.5)).unwrap();
        let sigma = &*model.sigma;
        let cfg = LassoConfig::new(0.05);
        let all = all_nodes_gamma(sigma, &cfg).unwrap();
        let mut reused = 0;
        for a in 0..12usize {
            for b in 0..12 {
                if a == b {
                    continue;
                }
                if a.abs_diff(b) > 1 {
                    assert!(all.reusable(a, b), "({a},{b})");
                }
                if all.reusable(a, b) {
                    reused += 1;
                    let idx = PairIndex::new(12, a, b).unwrap();
                    let fresh = lasso_on_nodes(sigma, &idx.rest, a, &cfg).unwrap();
                    let cached = all.restricted(a, b);
                    for (x, y) in fresh.coef.iter().zip(&cached.coef) {
                        assert!((x - y).abs() < 1e-8, "({a},{b})");
                    }
                }
            }
        }
        assert!(reused > 0);
        let (gp, info) = all.gamma_pair(sigma, 2, 7).unwrap();
        assert!(info.reused_a && info.reused_b);
        let direct = gamma_pair_pipeline(sigma, 2, 7, &cfg).unwrap();
        for (x, y) in gp.gamma_a.iter().zip(&direct.gamma_a) {
            assert!((x - y).abs() < 1e-8);
        }
    }
}
