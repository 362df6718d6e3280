//! Synthetic designs: structured precision matrices, elliptical and
//! transelliptical sampling, marginal transforms, contamination, and the
//! empirical tail-dependence coefficient.
//!
//! Every sampler takes an explicit `u64` seed and draws from a `ChaCha8Rng`,
//! so a `(spec, seed)` pair always produces the same bits. Independent
//! streams for replications are derived with [`derive_seed`].

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::matrix::{
    cholesky_lower, invert_spd, normalize_to_correlation, CorrelationMatrix, SquareMatrix,
};
use crate::normal;

/// Graph structure of the latent model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphSpec {
    /// Four-nearest-neighbour lattice on a `rows x cols` grid; `Omega0` has
    /// unit diagonal and `omega` on each lattice edge.
    Grid { rows: usize, cols: usize, omega: f64 },
    /// Path graph: `Omega0` tridiagonal with off-diagonal `rho`.
    Chain { p: usize, rho: f64 },
    /// `Sigma = I + E` with `E_12 = E_21 = rho` (nodes 0 and 1).
    Pair { p: usize, rho: f64 },
}

impl GraphSpec {
    pub fn grid(side: usize, omega: f64) -> Self {
        GraphSpec::Grid { rows: side, cols: side, omega }
    }

    pub fn chain(p: usize, rho: f64) -> Self {
        GraphSpec::Chain { p, rho }
    }

    pub fn pair(p: usize, rho: f64) -> Self {
        GraphSpec::Pair { p, rho }
    }

    pub fn p(&self) -> usize {
        match *self {
            GraphSpec::Grid { rows, cols, .. } => rows * cols,
            GraphSpec::Chain { p, .. } | GraphSpec::Pair { p, .. } => p,
        }
    }

    /// Zero-based node index of the 1-based grid coordinate `(row, col)`.
    pub fn grid_node(&self, row: usize, col: usize) -> Result<usize> {
        match *self {
            GraphSpec::Grid { rows, cols, .. } => {
                if row == 0 || col == 0 || row > rows || col > cols {
                    return Err(Error::InvalidParameter(format!(
                        "grid coordinate ({row},{col}) outside {rows}x{cols}"
                    )));
                }
                Ok((row - 1) * cols + (col - 1))
            }
            _ => Err(Error::InvalidParameter("grid coordinates need a grid spec".into())),
        }
    }

    fn validate(&self) -> Result<()> {
        let (p, w) = match *self {
            GraphSpec::Grid { omega, .. } => (self.p(), omega),
            GraphSpec::Chain { p, rho } | GraphSpec::Pair { p, rho } => (p, rho),
        };
        if p < 2 {
            return Err(Error::TooFewVariables { required: 2, found: p });
        }
        if !w.is_finite() {
            return Err(Error::InvalidParameter("graph parameter must be finite".into()));
        }
        Ok(())
    }

    /// `Omega0` for grid and chain specs; `Sigma` itself for pair specs.
    fn base_matrix(&self) -> SquareMatrix {
        let p = self.p();
        let mut m = SquareMatrix::identity(p);
        match *self {
            GraphSpec::Grid { rows, cols, omega } => {
                for r in 0..rows {
                    for c in 0..cols {
                        let j = r * cols + c;
                        if c + 1 < cols {
                            m.set(j, j + 1, omega);
                            m.set(j + 1, j, omega);
                        }
                        if r + 1 < rows {
                            m.set(j, j + cols, omega);
                            m.set(j + cols, j, omega);
                        }
                    }
                }
            }
            GraphSpec::Chain { rho, .. } => {
                for j in 0..p - 1 {
                    m.set(j, j + 1, rho);
                    m.set(j + 1, j, rho);
                }
            }
            GraphSpec::Pair { rho, .. } => {
                m.set(0, 1, rho);
                m.set(1, 0, rho);
            }
        }
        m
    }
}

/// Population quantities of a design.
#[derive(Debug, Clone)]
pub struct PrecisionModel {
    pub spec: GraphSpec,
    /// Raw precision before normalization (equal to `omega` for pair specs).
    pub omega0: SquareMatrix,
    pub sigma: CorrelationMatrix,
    /// `Sigma^{-1}`.
    pub omega: SquareMatrix,
}

impl PrecisionModel {
    pub fn p(&self) -> usize {
        self.sigma.dim()
    }
}

/// Builds `Omega0`, normalizes `Sigma0 = Omega0^{-1}` to a correlation matrix
/// `Sigma`, and returns `Omega = Sigma^{-1}`.
///
/// With `D = diag(Sigma0)`, `Sigma = D^{-1/2} Sigma0 D^{-1/2}`, so
/// `Omega = D^{1/2} Omega0 D^{1/2}` is formed directly instead of inverting
/// a second time.
pub fn build_precision(spec: &GraphSpec) -> Result<PrecisionModel> {
    spec.validate()?;
    let base = spec.base_matrix();
    if let GraphSpec::Pair { .. } = spec {
        let omega = invert_spd(&base)?;
        let sigma = CorrelationMatrix::new(base)?;
        return Ok(PrecisionModel { spec: *spec, omega0: omega.clone(), sigma, omega });
    }
    let sigma0 = invert_spd(&base)?;
    let scale: Vec<f64> = (0..sigma0.dim()).map(|i| sigma0.get(i, i).sqrt()).collect();
    let sigma = normalize_to_correlation(&sigma0)?;
    let omega = SquareMatrix::from_fn(base.dim(), |i, j| base.get(i, j) * scale[i] * scale[j]);
    Ok(PrecisionModel { spec: *spec, omega0: base, sigma, omega })
}

/// Law of the radius `xi` in `X = xi * A * U`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusLaw {
    /// `xi ~ chi_p`, which makes `X` Gaussian.
    Gaussian,
    /// `xi = |t_d|`.
    AbsT(f64),
    /// `xi = chi_p * sqrt(d) / chi_d`, the radius of the multivariate `t_d`.
    MultivariateT(f64),
    /// Constant radius.
    Fixed(f64),
}

impl Default for RadiusLaw {
    fn default() -> Self {
        RadiusLaw::AbsT(5.0)
    }
}

impl RadiusLaw {
    fn validate(&self) -> Result<()> {
        match *self {
            RadiusLaw::Gaussian => Ok(()),
            RadiusLaw::AbsT(d) | RadiusLaw::MultivariateT(d) | RadiusLaw::Fixed(d) => {
                if d > 0.0 && d.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("radius parameter {d} must be positive")))
                }
            }
        }
    }

    fn draw<R: Rng>(&self, p: usize, rng: &mut R) -> f64 {
        loop {
            let xi = match *self {
                RadiusLaw::Gaussian => chi(p as f64, rng),
                RadiusLaw::AbsT(d) => student_t(d, rng).abs(),
                RadiusLaw::MultivariateT(d) => chi(p as f64, rng) * d.sqrt() / chi(d, rng),
                RadiusLaw::Fixed(s) => s,
            };
            if xi > 0.0 && xi.is_finite() {
                return xi;
            }
        }
    }
}

impl fmt::Display for RadiusLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RadiusLaw::Gaussian => write!(f, "gaussian"),
            RadiusLaw::AbsT(d) => write!(f, "abs_t:{d}"),
            RadiusLaw::MultivariateT(d) => write!(f, "mvt:{d}"),
            RadiusLaw::Fixed(s) => write!(f, "fixed:{s}"),
        }
    }
}

impl FromStr for GraphSpec {
    type Err = Error;

    /// Accepts `grid:<side>:<omega>`, `grid:<rows>x<cols>:<omega>`,
    /// `chain:<p>:<rho>` and `pair:<p>:<rho>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("bad graph spec {s:?}"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let [kind, size, value] = parts[..] else {
            return Err(bad());
        };
        let value: f64 = value.parse().map_err(|_| bad())?;
        let int = |t: &str| t.parse::<usize>().map_err(|_| bad());
        let spec = match kind.to_ascii_lowercase().as_str() {
            "grid" => match size.split_once('x') {
                Some((r, c)) => GraphSpec::Grid { rows: int(r)?, cols: int(c)?, omega: value },
                None => GraphSpec::grid(int(size)?, value),
            },
            "chain" => GraphSpec::chain(int(size)?, value),
            "pair" => GraphSpec::pair(int(size)?, value),
            _ => return Err(bad()),
        };
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }
}

impl FromStr for RadiusLaw {
    type Err = Error;

    /// Accepts `gaussian`, `abs_t:<d>`, `mvt:<d>` and `fixed:<scale>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k.to_string(), Some(a.to_string())),
            None => (s.clone(), None),
        };
        let num = || -> Result<f64> {
            arg.as_deref()
                .ok_or_else(|| Error::Config(format!("radius law {s:?} needs a parameter")))?
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad radius parameter in {s:?}")))
        };
        let law = match kind.as_str() {
            "gaussian" | "chi" => RadiusLaw::Gaussian,
            "abs_t" => RadiusLaw::AbsT(num()?),
            "mvt" => RadiusLaw::MultivariateT(num()?),
            "fixed" => RadiusLaw::Fixed(num()?),
            _ => return Err(Error::Config(format!("unknown radius law {s:?}"))),
        };
        law.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(law)
    }
}

impl Serialize for RadiusLaw {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for RadiusLaw {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn chi<R: Rng>(k: f64, rng: &mut R) -> f64 {
    ChiSquared::new(k).expect("positive degrees of freedom").sample(rng).sqrt()
}

/// Student `t_d` as `Z / sqrt(V / d)` with `V ~ chi^2_d`.
pub fn student_t<R: Rng>(d: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    let v = ChiSquared::new(d).expect("positive degrees of freedom").sample(rng);
    z / (v / d).sqrt()
}

fn unit_vector<R: Rng>(p: usize, rng: &mut R, buf: &mut [f64]) {
    loop {
        let mut norm2 = 0.0;
        for x in buf.iter_mut() {
            *x = StandardNormal.sample(rng);
            norm2 += *x * *x;
        }
        if norm2 > 0.0 {
            let inv = 1.0 / norm2.sqrt();
            buf.iter_mut().for_each(|x| *x *= inv);
            debug_assert_eq!(buf.len(), p);
            return;
        }
    }
}

fn lower_mul(l: &SquareMatrix, u: &[f64], scale: f64, out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let row = &l.row(i)[..=i];
        *o = scale * row.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `n` rows of `xi * L * U` with `L` the lower Cholesky factor of `Sigma`.
pub fn sample_elliptical(
    n: usize,
    sigma: &CorrelationMatrix,
    radius: RadiusLaw,
    seed: u64,
) -> Result<DataMatrix> {
    radius.validate()?;
    let p = sigma.dim();
    let l = cholesky_lower(sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DataMatrix::zeros(n, p);
    let mut u = vec![0.0; p];
    for i in 0..n {
        unit_vector(p, &mut rng, &mut u);
        let xi = radius.draw(p, &mut rng);
        lower_mul(&l, &u, xi, x.row_mut(i));
    }
    Ok(x)
}

/// `n` rows of `N(0, Sigma)` drawn as `L * Z`.
pub fn sample_gaussian(n: usize, sigma: &CorrelationMatrix, seed: u64) -> Result<DataMatrix> {
    let p = sigma.dim();
    let l = cholesky_lower(sigma)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DataMatrix::zeros(n, p);
    let mut z = vec![0.0; p];
    for i in 0..n {
        z.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
        lower_mul(&l, &z, 1.0, x.row_mut(i));
    }
    Ok(x)
}

/// A strictly increasing map of the real line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marginal {
    Identity,
    /// `sign(x) sqrt(|x|)`
    SignedSqrt,
    Cube,
    NormalCdf,
    Exp,
}

impl Marginal {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Marginal::Identity => x,
            Marginal::SignedSqrt => x.signum() * x.abs().sqrt(),
            Marginal::Cube => x * x * x,
            Marginal::NormalCdf => normal::cdf(x),
            Marginal::Exp => x.exp(),
        }
    }
}

/// Transforms assigned cyclically: column `j` (0-based) gets `cycle[j % len]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarginalSet {
    pub cycle: Vec<Marginal>,
}

impl MarginalSet {
    /// `x, sign(x)sqrt|x|, x^3, Phi(x), exp(x)`, repeating.
    pub fn standard() -> Self {
        use Marginal::*;
        Self { cycle: vec![Identity, SignedSqrt, Cube, NormalCdf, Exp] }
    }

    pub fn identity() -> Self {
        Self { cycle: vec![Marginal::Identity] }
    }

    pub fn for_column(&self, j: usize) -> Marginal {
        self.cycle[j % self.cycle.len()]
    }
}

pub fn apply_marginals(x: &DataMatrix, m: &MarginalSet) -> DataMatrix {
    if m.cycle.is_empty() {
        return x.clone();
    }
    x.map_columns(|j, v| m.for_column(j).apply(v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    /// Whole rows replaced by i.i.d. `t_{1.5}` entries.
    RandomRow,
    /// Whole rows replaced by `(+5, -5, +5, ...)`.
    DeterministicRow,
    /// Single cells replaced by `N(3, 3)` or `N(-3, 3)` draws (variance 3).
    Element,
}

impl FromStr for Mechanism {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "random_row" => Ok(Mechanism::RandomRow),
            "deterministic_row" => Ok(Mechanism::DeterministicRow),
            "element" => Ok(Mechanism::Element),
            other => Err(Error::Config(format!("unknown contamination mechanism {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    pub mechanism: Mechanism,
    pub rate: f64,
    #[serde(default)]
    pub seed: u64,
}

impl FromStr for ContaminationSpec {
    type Err = Error;

    /// `<mechanism>:<rate>`, e.g. `element:0.05`; the seed defaults to 0.
    fn from_str(s: &str) -> Result<Self> {
        let (m, r) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("contamination {s:?} must be <mechanism>:<rate>")))?;
        let rate: f64 = r.trim().parse().map_err(|_| Error::Config(format!("bad rate in {s:?}")))?;
        if !(rate > 0.0 && rate < 1.0) {
            return Err(Error::Config(format!("contamination rate {rate} must lie in (0, 1)")));
        }
        Ok(Self::new(m.parse()?, rate, 0))
    }
}

impl ContaminationSpec {
    pub fn new(mechanism: Mechanism, rate: f64, seed: u64) -> Self {
        Self { mechanism, rate, seed }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// `floor(total * rate)`, nudged so that products such as `10 * 0.2` that
/// land a rounding error below an integer are not truncated.
fn corrupted_count(total: usize, rate: f64) -> usize {
    let raw = total as f64 * rate;
    let k = (raw * (1.0 + 1e-12)).floor() as usize;
    k.min(total)
}

/// Applies one of the contamination mechanisms; corrupted rows or cells are
/// chosen uniformly without replacement.
pub fn contaminate(x: &DataMatrix, spec: &ContaminationSpec) -> Result<DataMatrix> {
    if !(spec.rate > 0.0 && spec.rate < 1.0) {
        return Err(Error::RateOutOfRange(spec.rate));
    }
    let (n, p) = (x.nrows(), x.ncols());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = x.clone();
    match spec.mechanism {
        Mechanism::RandomRow | Mechanism::DeterministicRow => {
            let k = corrupted_count(n, spec.rate);
            let mut rows = index::sample(&mut rng, n, k).into_vec();
            rows.sort_unstable();
            for i in rows {
                for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                    *v = match spec.mechanism {
                        Mechanism::RandomRow => student_t(1.5, &mut rng),
                        _ if j % 2 == 0 => 5.0,
                        _ => -5.0,
                    };
                }
            }
        }
        Mechanism::Element => {
            let k = corrupted_count(n * p, spec.rate);
            let mut cells = index::sample(&mut rng, n * p, k).into_vec();
            cells.sort_unstable();
            let sd = 3.0_f64.sqrt();
            for c in cells {
                let mean = if rng.random_bool(0.5) { 3.0 } else { -3.0 };
                let z: f64 = StandardNormal.sample(&mut rng);
                out.set(c / p, c % p, mean + sd * z);
            }
        }
    }
    Ok(out)
}

/// Correlation of the exceedance indicators `1{X_a >= q_a}` and
/// `1{X_b >= q_b}`, where `q` is the `ceil(n * alpha)`-th order statistic of
/// the column.
pub fn empirical_tail_dependence(x: &DataMatrix, a: usize, b: usize, alpha: f64) -> Result<f64> {
    let (n, p) = (x.nrows(), x.ncols());
    if n < 10 {
        return Err(Error::TooFewSamples { required: 10, found: n });
    }
    for idx in [a, b] {
        if idx >= p {
            return Err(Error::IndexOutOfRange { index: idx, p });
        }
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    let indicator = |j: usize| -> Result<Vec<f64>> {
        let col = x.column(j);
        let mut sorted = col.clone();
        sorted.sort_unstable_by(f64::total_cmp);
        let k = ((n as f64 * alpha).ceil() as usize).clamp(1, n);
        let q = sorted[k - 1];
        let ind: Vec<f64> = col.iter().map(|&v| if v >= q { 1.0 } else { 0.0 }).collect();
        if ind.iter().all(|&v| v == ind[0]) {
            return Err(Error::DegenerateIndicator { column: j });
        }
        Ok(ind)
    };
    let (ia, ib) = (indicator(a)?, indicator(b)?);
    Ok(pearson(&ia, &ib))
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    sxy / (sxx * syy).sqrt()
}

/// SplitMix64 finalizer.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `index` under `base`; distinct indices give unrelated streams.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix(splitmix(base) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}
