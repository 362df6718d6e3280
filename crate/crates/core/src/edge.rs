//! The edge estimator: `Theta_hat` from the estimated regression vectors,
//! `Omega_hat_ab = -Theta_ab / det(Theta)`, the U-statistic variance
//! estimate `S_ab`, confidence intervals and two-sided p-values.

use bitflags::bitflags;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::lasso::{gamma_pair_pipeline, GammaPair, LassoConfig};
use crate::matrix::{omega_entry_from_theta, PairIndex, SquareMatrix, ThetaBlock};
use crate::normal;
use crate::rank::{cosine_weight_matrix, dense_ranks, CorrelationEstimate};

bitflags! {
    /// Recoverable conditions attached to a result.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
    pub struct Warnings: u32 {
        /// A Lasso fit stopped at `max_sweeps`.
        const NOT_CONVERGED = 1;
        /// A refit system was ill-conditioned and solved with a ridge.
        const RIDGE_REFIT = 1 << 1;
        /// `S_ab = 0`; z and p are undefined and the interval collapses.
        const ZERO_VARIANCE = 1 << 2;
        /// `det(Theta_hat) < 0`, possible when `Sigma_hat` is indefinite.
        const NEGATIVE_DETERMINANT = 1 << 3;
        /// The variance is a surrogate rather than a derived estimate.
        const SURROGATE_VARIANCE = 1 << 4;
    }
}

impl Warnings {
    pub fn from_gamma(g: &GammaPair) -> Self {
        let mut w = Warnings::empty();
        w.set(Warnings::NOT_CONVERGED, !g.converged);
        w.set(Warnings::RIDGE_REFIT, g.ridge_used);
        w
    }

    /// `|`-separated flag names, empty when clear.
    pub fn labels(&self) -> String {
        self.iter_names().map(|(name, _)| name.to_ascii_lowercase()).collect::<Vec<_>>().join("|")
    }
}

/// `u = e_a - gamma_a` and `v = e_b - gamma_b` embedded into `R^p`, with
/// `Theta_ab = u' Sigma v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UvVectors {
    pub a: usize,
    pub b: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Nonzero coordinates of `u` (always containing `a`), ascending.
    pub u_support: Vec<usize>,
    pub v_support: Vec<usize>,
}

impl UvVectors {
    pub fn new(index: &PairIndex, gamma_a: &[f64], gamma_b: &[f64]) -> Result<Self> {
        let m = index.rest.len();
        for g in [gamma_a, gamma_b] {
            if g.len() != m {
                return Err(Error::DimensionMismatch { expected: m, found: g.len() });
            }
        }
        let p = index.p();
        let (a, b) = (index.a, index.b);
        let embed = |anchor: usize, g: &[f64]| {
            let mut w = vec![0.0; p];
            w[anchor] = 1.0;
            for (k, &j) in index.rest.iter().enumerate() {
                w[j] = -g[k];
            }
            let support: Vec<usize> = (0..p).filter(|&j| w[j] != 0.0).collect();
            (w, support)
        };
        let (u, u_support) = embed(a, gamma_a);
        let (v, v_support) = embed(b, gamma_b);
        Ok(Self { a, b, u, v, u_support, v_support })
    }

    pub fn from_gamma(g: &GammaPair) -> Result<Self> {
        Self::new(&g.index, &g.gamma_a, &g.gamma_b)
    }
}

/// `Sigma_{ab,ab} - G' Sigma_{I,ab} - Sigma_{I,ab}' G + G' Sigma_I G` with
/// `G = (gamma_a, gamma_b)`.
///
/// Sums run over the nonzero coordinates of the gammas only. The single
/// stored off-diagonal entry makes the block symmetric by construction.
pub fn theta_hat(
    sigma: &SquareMatrix,
    index: &PairIndex,
    gamma_a: &[f64],
    gamma_b: &[f64],
) -> Result<ThetaBlock> {
    let m = index.rest.len();
    if sigma.dim() != index.p() {
        return Err(Error::DimensionMismatch { expected: index.p(), found: sigma.dim() });
    }
    for g in [gamma_a, gamma_b] {
        if g.len() != m {
            return Err(Error::DimensionMismatch { expected: m, found: g.len() });
        }
    }
    let (a, b) = (index.a, index.b);
    let nz = |g: &[f64]| -> Vec<(usize, f64)> {
        g.iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, &v)| (index.rest[k], v))
            .collect()
    };
    let (sa, sb) = (nz(gamma_a), nz(gamma_b));
    // g' Sigma_{I c}
    let cross = |g: &[(usize, f64)], c: usize| g.iter().map(|&(j, w)| w * sigma.get(j, c)).sum::<f64>();
    // g' Sigma_I h
    let quad = |g: &[(usize, f64)], h: &[(usize, f64)]| {
        g.iter()
            .map(|&(j, wj)| wj * h.iter().map(|&(k, wk)| sigma.get(j, k) * wk).sum::<f64>())
            .sum::<f64>()
    };
    Ok(ThetaBlock {
        a,
        b,
        aa: sigma.get(a, a) - 2.0 * cross(&sa, a) + quad(&sa, &sa),
        ab: sigma.get(a, b) - cross(&sa, b) - cross(&sb, a) + quad(&sa, &sb),
        bb: sigma.get(b, b) - 2.0 * cross(&sb, b) + quad(&sb, &sb),
    })
}

/// The same block through dense quadratic forms `u' Sigma v`.
pub fn theta_hat_uv(sigma: &SquareMatrix, uv: &UvVectors) -> ThetaBlock {
    ThetaBlock {
        a: uv.a,
        b: uv.b,
        aa: sigma.bilinear(&uv.u, &uv.u),
        ab: sigma.bilinear(&uv.u, &uv.v),
        bb: sigma.bilinear(&uv.v, &uv.v),
    }
}

/// `s' (u v' o C) s`, summed over the supports of `u` and `v` only.
pub fn g_kernel_value(s: &[f64], uv: &UvVectors, c: &SquareMatrix) -> f64 {
    let mut total = 0.0;
    for &j in &uv.u_support {
        if s[j] == 0.0 {
            continue;
        }
        let row = c.row(j);
        let inner: f64 = uv.v_support.iter().map(|&k| row[k] * uv.v[k] * s[k]).sum();
        total += s[j] * uv.u[j] * inner;
    }
    total
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Kernel restricted to the union `U` of the two supports, with signs taken
/// from integer ranks so that only the ordering of each column matters.
struct KernelPlan {
    /// `ranks[i * w + q]` is the rank of observation `i` in column `U[q]`.
    ranks: Vec<i64>,
    width: usize,
    /// Positions in `U` of the supports of `u` and `v`.
    u_pos: Vec<usize>,
    v_pos: Vec<usize>,
    /// `weights[r * |v| + t] = u_j C_jk v_k` for `j = u_pos[r]`, `k = v_pos[t]`.
    weights: Vec<f64>,
}

impl KernelPlan {
    fn new(x: &DataMatrix, uv: &UvVectors, c: &SquareMatrix) -> Self {
        let mut union: Vec<usize> = uv.u_support.iter().chain(&uv.v_support).copied().collect();
        union.sort_unstable();
        union.dedup();
        let width = union.len();
        let n = x.nrows();
        let mut ranks = vec![0i64; n * width];
        for (q, &j) in union.iter().enumerate() {
            for (i, r) in dense_ranks(&x.column(j)).into_iter().enumerate() {
                ranks[i * width + q] = r as i64;
            }
        }
        let pos = |j: usize| union.binary_search(&j).expect("support is inside the union");
        let u_pos: Vec<usize> = uv.u_support.iter().map(|&j| pos(j)).collect();
        let v_pos: Vec<usize> = uv.v_support.iter().map(|&k| pos(k)).collect();
        let mut weights = Vec::with_capacity(u_pos.len() * v_pos.len());
        for &j in &uv.u_support {
            for &k in &uv.v_support {
                weights.push(uv.u[j] * c.get(j, k) * uv.v[k]);
            }
        }
        Self { ranks, width, u_pos, v_pos, weights }
    }

    #[inline]
    fn kernel(&self, i: usize, i2: usize, sign: &mut [f64]) -> f64 {
        let (ri, rj) = (
            &self.ranks[i * self.width..(i + 1) * self.width],
            &self.ranks[i2 * self.width..(i2 + 1) * self.width],
        );
        for q in 0..self.width {
            sign[q] = (ri[q] - rj[q]).signum() as f64;
        }
        let nv = self.v_pos.len();
        let mut total = 0.0;
        for (r, &pj) in self.u_pos.iter().enumerate() {
            let sj = sign[pj];
            if sj == 0.0 {
                continue;
            }
            let w = &self.weights[r * nv..(r + 1) * nv];
            let inner: f64 = w.iter().zip(&self.v_pos).map(|(wk, &pk)| wk * sign[pk]).sum();
            total += sj * inner;
        }
        total
    }
}

/// `(pi / |det Theta|) * sqrt(mean_i (hbar_i - mean(g))^2)` where `hbar_i`
/// averages the kernel over all partners of observation `i`.
///
/// Pairs are visited in a fixed order and accumulated with compensated
/// sums, so the value does not depend on scheduling.
pub fn s_ab_variance(
    x: &DataMatrix,
    uv: &UvVectors,
    cos_weights: &SquareMatrix,
    theta: &ThetaBlock,
) -> Result<f64> {
    let n = x.nrows();
    if n < 3 {
        return Err(Error::TooFewSamples { required: 3, found: n });
    }
    let det = theta.det();
    if det.abs() < crate::matrix::SINGULAR_THETA_TOL {
        return Err(Error::SingularTheta { det });
    }
    let plan = KernelPlan::new(x, uv, cos_weights);
    let mut h = vec![CompensatedSum::default(); n];
    let mut sign = vec![0.0; plan.width];
    for i in 0..n {
        for i2 in i + 1..n {
            let g = plan.kernel(i, i2, &mut sign);
            h[i].add(g);
            h[i2].add(g);
        }
    }
    let hbar: Vec<f64> = h.iter().map(|s| s.value() / (n - 1) as f64).collect();
    // sum_{i<i'} g = (1/2) sum_i h_i, so mean(g) is the average of hbar
    let mut total = CompensatedSum::default();
    hbar.iter().for_each(|&v| total.add(v));
    let mean = total.value() / n as f64;
    let mut ss = CompensatedSum::default();
    hbar.iter().for_each(|&v| ss.add((v - mean) * (v - mean)));
    Ok(std::f64::consts::PI / det.abs() * (ss.value() / n as f64).sqrt())
}

/// `Omega_hat +- z_{alpha/2} S / sqrt(n)`.
pub fn confidence_interval(omega: f64, s: f64, n: usize, alpha: f64) -> (f64, f64) {
    let half = normal::two_sided_critical(alpha) * s / (n as f64).sqrt();
    (omega - half, omega + half)
}

/// `z = sqrt(n) Omega_hat / S` and `p = 2 - 2 Phi(|z|)`.
pub fn z_and_pvalue(omega: f64, s: f64, n: usize) -> Result<(f64, f64)> {
    if !(s > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let z = (n as f64).sqrt() * omega / s;
    // 2 - 2 Phi(|z|) written through the upper tail to keep precision
    Ok((z, 2.0 * normal::sf(z.abs())))
}

/// Everything computed for one node pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeInference {
    pub a: usize,
    pub b: usize,
    pub n: usize,
    /// The estimated block, absent for estimators that do not form one.
    pub theta: Option<ThetaBlock>,
    pub det: f64,
    pub omega_ab: f64,
    /// Standard error scale: the interval is `omega_ab +- z * s_ab / sqrt(n)`.
    pub s_ab: f64,
    pub z: f64,
    pub p_value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub alpha: f64,
    pub warnings: Warnings,
}

impl EdgeInference {
    /// Point estimate `-Theta_ab / det(Theta)` with scale `s_ab`.
    pub fn assemble(
        theta: ThetaBlock,
        s_ab: f64,
        n: usize,
        alpha: f64,
        mut warnings: Warnings,
    ) -> Result<Self> {
        let (omega_ab, det) = omega_entry_from_theta(&theta)?;
        if det < 0.0 {
            warnings |= Warnings::NEGATIVE_DETERMINANT;
        }
        let mut e = Self::from_estimate(theta.a, theta.b, n, omega_ab, s_ab, alpha, warnings)?;
        e.theta = Some(theta);
        e.det = det;
        Ok(e)
    }

    /// Interval and test for a point estimate that did not come from a `Theta` block.
    pub fn from_estimate(
        a: usize,
        b: usize,
        n: usize,
        omega_ab: f64,
        s_ab: f64,
        alpha: f64,
        mut warnings: Warnings,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1)")));
        }
        let (ci_lo, ci_hi) = confidence_interval(omega_ab, s_ab, n, alpha);
        let (z, p_value) = match z_and_pvalue(omega_ab, s_ab, n) {
            Ok(zp) => zp,
            Err(Error::ZeroVariance) => {
                warnings |= Warnings::ZERO_VARIANCE;
                (f64::NAN, f64::NAN)
            }
            Err(e) => return Err(e),
        };
        Ok(Self {
            a,
            b,
            n,
            theta: None,
            det: f64::NAN,
            omega_ab,
            s_ab,
            z,
            p_value,
            ci_lo,
            ci_hi,
            alpha,
            warnings,
        })
    }

    pub fn width(&self) -> f64 {
        self.ci_hi - self.ci_lo
    }

    pub fn covers(&self, truth: f64) -> bool {
        self.ci_lo <= truth && truth <= self.ci_hi
    }

    /// False when the estimate or its scale cannot enter aggregates.
    pub fn is_numeric(&self) -> bool {
        self.omega_ab.is_finite() && self.s_ab.is_finite() && self.s_ab > 0.0
    }

    /// `sqrt(n) (Omega_hat - truth) / S`.
    pub fn studentized_error(&self, truth: f64) -> f64 {
        (self.n as f64).sqrt() * (self.omega_ab - truth) / self.s_ab
    }
}

/// Rank statistics of one data set, computed once and shared by every pair.
#[derive(Debug, Clone)]
pub struct RankContext<'a> {
    pub x: &'a DataMatrix,
    pub estimate: CorrelationEstimate,
    pub cos_weights: SquareMatrix,
}

impl<'a> RankContext<'a> {
    pub fn new(x: &'a DataMatrix) -> Result<Self> {
        let estimate = CorrelationEstimate::from_data(x)?;
        Ok(Self::with_estimate(x, estimate))
    }

    pub fn with_estimate(x: &'a DataMatrix, estimate: CorrelationEstimate) -> Self {
        let cos_weights = cosine_weight_matrix(&estimate.kendall);
        Self { x, estimate, cos_weights }
    }

    pub fn sigma_hat(&self) -> &SquareMatrix {
        self.estimate.sigma_hat.matrix()
    }

    /// Fits the regression vectors for `(a, b)` and runs inference.
    pub fn edge(&self, a: usize, b: usize, cfg: &LassoConfig, alpha: f64) -> Result<EdgeInference> {
        let gamma = gamma_pair_pipeline(self.sigma_hat(), a, b, cfg)?;
        self.edge_from_gamma(&gamma, alpha)
    }

    /// Inference for given regression vectors (estimated or population).
    pub fn edge_from_gamma(&self, gamma: &GammaPair, alpha: f64) -> Result<EdgeInference> {
        let theta = theta_hat(self.sigma_hat(), &gamma.index, &gamma.gamma_a, &gamma.gamma_b)?;
        let uv = UvVectors::from_gamma(gamma)?;
        let s = s_ab_variance(self.x, &uv, &self.cos_weights, &theta)?;
        EdgeInference::assemble(theta, s, self.x.nrows(), alpha, Warnings::from_gamma(gamma))
    }
}

/// End-to-end inference for `Omega_ab` from raw data.
pub fn rocket_edge(
    x: &DataMatrix,
    a: usize,
    b: usize,
    cfg: &LassoConfig,
    alpha: f64,
) -> Result<EdgeInference> {
    if x.ncols() < 3 {
        return Err(Error::TooFewVariables { required: 3, found: x.ncols() });
    }
    if x.nrows() < 3 {
        return Err(Error::TooFewSamples { required: 3, found: x.nrows() });
    }
    RankContext::new(x)?.edge(a, b, cfg, alpha)
}
