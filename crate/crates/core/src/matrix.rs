//! Dense symmetric-matrix utilities and population-level quantities.
//!
//! Everything here works on small to moderate dense matrices (a few thousand
//! rows at most). Factorizations are delegated to `nalgebra`; the types in this
//! module only carry the invariants the estimators rely on (unit diagonals,
//! symmetry, the labelled 2x2 block).

use std::ops::Deref;

use itertools::Itertools;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Solves refuse matrices whose estimated condition number exceeds this.
pub const CONDITION_LIMIT: f64 = 1e12;
/// `|det(theta)|` below this is treated as singular.
pub const SINGULAR_THETA_TOL: f64 = 1e-12;
/// Largest dimension accepted by [`sparse_spectral_norm_exhaustive`].
pub const EXHAUSTIVE_MAX_DIM: usize = 16;

/// Dense square matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: data.len() });
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { dim, data })
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.dim + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &SquareMatrix) -> Result<SquareMatrix> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let n = self.dim;
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            let row = self.row(i);
            let dst = &mut out.data[i * n..(i + 1) * n];
            for (k, &aik) in row.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                for (d, &bkj) in dst.iter_mut().zip(other.row(k)) {
                    *d += aik * bkj;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        Ok((0..self.dim).map(|i| dot(self.row(i), x)).collect())
    }

    /// `u' M v`.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        (0..self.dim)
            .filter(|&i| u[i] != 0.0)
            .map(|i| u[i] * dot(self.row(i), v))
            .sum()
    }

    /// Submatrix with rows `rows` and columns `cols`, in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.get(rows[i], cols[j]))
    }

    pub fn principal(&self, idx: &[usize]) -> SquareMatrix {
        SquareMatrix::from_fn(idx.len(), |i, j| self.get(idx[i], idx[j]))
    }

    pub fn max_abs_diff(&self, other: &SquareMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Symmetric up to `1e-12 * max(1, |m_ij|)`.
    pub fn is_symmetric(&self) -> bool {
        let n = self.dim;
        (0..n).all(|i| {
            (i + 1..n).all(|j| {
                let (x, y) = (self.get(i, j), self.get(j, i));
                (x - y).abs() <= 1e-12 * x.abs().max(1.0)
            })
        })
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "matrix must be square");
        Self::from_fn(m.nrows(), |i, j| m[(i, j)])
    }

    /// Copies the upper triangle onto the lower one.
    pub fn symmetrize_upper(&mut self) {
        for i in 0..self.dim {
            for j in 0..i {
                let v = self.get(j, i);
                self.set(i, j, v);
            }
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A symmetric matrix with exactly unit diagonal and entries in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix(SquareMatrix);

impl CorrelationMatrix {
    pub fn new(m: SquareMatrix) -> Result<Self> {
        for i in 0..m.dim() {
            if m.get(i, i) != 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "correlation matrix diagonal ({i},{i}) is {}",
                    m.get(i, i)
                )));
            }
        }
        if !m.is_finite() || !m.is_symmetric() || m.max_abs() > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(
                "correlation matrix must be finite, symmetric, with entries in [-1, 1]".into(),
            ));
        }
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Self {
        Self(SquareMatrix::identity(dim))
    }

    pub fn into_inner(self) -> SquareMatrix {
        self.0
    }
}

impl Deref for CorrelationMatrix {
    type Target = SquareMatrix;
    fn deref(&self) -> &SquareMatrix {
        &self.0
    }
}

impl AsRef<SquareMatrix> for CorrelationMatrix {
    fn as_ref(&self) -> &SquareMatrix {
        &self.0
    }
}

impl AsRef<SquareMatrix> for SquareMatrix {
    fn as_ref(&self) -> &SquareMatrix {
        self
    }
}

/// The symmetric 2x2 block indexed by the node labels `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaBlock {
    pub a: usize,
    pub b: usize,
    pub aa: f64,
    pub ab: f64,
    pub bb: f64,
}

impl ThetaBlock {
    pub fn det(&self) -> f64 {
        self.aa * self.bb - self.ab * self.ab
    }

    /// Entry by node label; panics on labels other than `a`/`b`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match (i == self.a, j == self.a) {
            (true, true) => self.aa,
            (false, false) if i == self.b && j == self.b => self.bb,
            _ if (i == self.a || i == self.b) && (j == self.a || j == self.b) => self.ab,
            _ => panic!("({i},{j}) is not in the {{{},{}}} block", self.a, self.b),
        }
    }

    /// The inverse block, i.e. `Omega_{ab,ab}` when this is `Theta`.
    pub fn inverse(&self) -> Result<ThetaBlock> {
        let det = self.det();
        if det.abs() < SINGULAR_THETA_TOL {
            return Err(Error::SingularTheta { det });
        }
        Ok(ThetaBlock {
            a: self.a,
            b: self.b,
            aa: self.bb / det,
            ab: -self.ab / det,
            bb: self.aa / det,
        })
    }
}

/// Rescales a positive-diagonal symmetric matrix to unit diagonal.
pub fn normalize_to_correlation(m: &SquareMatrix) -> Result<CorrelationMatrix> {
    let n = m.dim();
    let mut scale = Vec::with_capacity(n);
    for i in 0..n {
        let d = m.get(i, i);
        if !(d > 0.0) {
            return Err(Error::NonPositiveDiagonal { index: i, value: d });
        }
        scale.push(d.sqrt());
    }
    let mut out = SquareMatrix::from_fn(n, |i, j| {
        if i == j {
            1.0
        } else {
            (m.get(i, j) / (scale[i] * scale[j])).clamp(-1.0, 1.0)
        }
    });
    out.symmetrize_upper();
    Ok(CorrelationMatrix(out))
}

/// LU factorization of a symmetric matrix, guarded by a condition estimate.
///
/// The condition number is `max |eig| / min |eig|` from the symmetric
/// eigenvalues, which handles indefinite inputs as well as definite ones.
pub struct SymFactor {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    dim: usize,
    condition: f64,
}

impl SymFactor {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        Self::with_limit(a, CONDITION_LIMIT)
    }

    pub fn with_limit(a: DMatrix<f64>, limit: f64) -> Result<Self> {
        let dim = a.nrows();
        if a.ncols() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: a.ncols() });
        }
        let condition = symmetric_condition(&a);
        if !(condition <= limit) {
            return Err(Error::IllConditioned { condition });
        }
        Ok(Self { lu: a.lu(), dim, condition })
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: b.len() });
        }
        let rhs = nalgebra::DVector::from_column_slice(b);
        self.lu
            .solve(&rhs)
            .map(|x| x.iter().copied().collect())
            .ok_or(Error::IllConditioned { condition: f64::INFINITY })
    }
}

fn symmetric_condition(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    let eig = a.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &e| {
        (lo.min(e.abs()), hi.max(e.abs()))
    });
    if lo == 0.0 || !lo.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Solves `A x = b` for symmetric `A`.
pub fn solve_sym(a: &SquareMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.len() });
    }
    SymFactor::new(a.to_dmatrix())?.solve(b)
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn invert_spd(a: &SquareMatrix) -> Result<SquareMatrix> {
    let chol = a.to_dmatrix().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let mut inv = SquareMatrix::from_dmatrix(&chol.inverse());
    // average the two triangles so the result is exactly symmetric
    let n = inv.dim();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (inv.get(i, j) + inv.get(j, i));
            inv.set(i, j, v);
            inv.set(j, i, v);
        }
    }
    Ok(inv)
}

/// Lower Cholesky factor, row-major.
pub fn cholesky_lower(a: &SquareMatrix) -> Result<SquareMatrix> {
    let chol = a.to_dmatrix().cholesky().ok_or(Error::CholeskyFailure)?;
    Ok(SquareMatrix::from_dmatrix(&chol.l()))
}

/// The index set `[p] \ {a, b}` in ascending order together with the pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairIndex {
    pub a: usize,
    pub b: usize,
    pub rest: Vec<usize>,
}

impl PairIndex {
    pub fn new(p: usize, a: usize, b: usize) -> Result<Self> {
        for idx in [a, b] {
            if idx >= p {
                return Err(Error::IndexOutOfRange { index: idx, p });
            }
        }
        if a == b {
            return Err(Error::SameNode(a));
        }
        let rest = (0..p).filter(|&j| j != a && j != b).collect();
        Ok(Self { a, b, rest })
    }

    pub fn p(&self) -> usize {
        self.rest.len() + 2
    }

    /// Position of node `j` inside `rest`, if present.
    pub fn position(&self, j: usize) -> Option<usize> {
        self.rest.binary_search(&j).ok()
    }
}

/// Population regression vectors `gamma_c = Sigma_I^{-1} Sigma_{I c}`, `c = a, b`.
pub fn true_gamma(
    sigma: &SquareMatrix,
    a: usize,
    b: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let idx = PairIndex::new(sigma.dim(), a, b)?;
    if idx.rest.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    let factor = SymFactor::new(sigma.submatrix(&idx.rest, &idx.rest))?;
    let rhs_a: Vec<f64> = idx.rest.iter().map(|&j| sigma.get(j, a)).collect();
    let rhs_b: Vec<f64> = idx.rest.iter().map(|&j| sigma.get(j, b)).collect();
    Ok((factor.solve(&rhs_a)?, factor.solve(&rhs_b)?))
}

/// Schur complement `Sigma_{ab,ab} - Sigma_{ab,I} Sigma_I^{-1} Sigma_{I,ab}`.
pub fn true_theta_block(sigma: &SquareMatrix, a: usize, b: usize) -> Result<ThetaBlock> {
    let idx = PairIndex::new(sigma.dim(), a, b)?;
    let (ga, gb) = true_gamma(sigma, a, b)?;
    let col = |c: usize| -> Vec<f64> { idx.rest.iter().map(|&j| sigma.get(j, c)).collect() };
    let (sa, sb) = (col(a), col(b));
    Ok(ThetaBlock {
        a,
        b,
        aa: sigma.get(a, a) - dot(&sa, &ga),
        ab: sigma.get(a, b) - dot(&sa, &gb),
        bb: sigma.get(b, b) - dot(&sb, &gb),
    })
}

/// `Omega_ab = -Theta_ab / det(Theta)`, returned with the determinant.
pub fn omega_entry_from_theta(theta: &ThetaBlock) -> Result<(f64, f64)> {
    let det = theta.det();
    if det.abs() < SINGULAR_THETA_TOL {
        return Err(Error::SingularTheta { det });
    }
    Ok((-theta.ab / det, det))
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// `max_{u,v in S_k} u' M v` by enumerating every pair of supports.
///
/// The leading singular value of a submatrix never decreases when rows or
/// columns are added, so only supports of size exactly `min(k, dim)` are
/// visited. Intended as a test oracle; the cost is `C(dim, k)^2` SVDs.
pub fn sparse_spectral_norm_exhaustive(m: &SquareMatrix, k: usize) -> Result<f64> {
    let n = m.dim();
    if n > EXHAUSTIVE_MAX_DIM {
        return Err(Error::DimensionTooLarge { dim: n, max: EXHAUSTIVE_MAX_DIM });
    }
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("k = {k} must lie in 1..={n}")));
    }
    let supports: Vec<Vec<usize>> = (0..n).combinations(k).collect();
    let mut best = 0.0_f64;
    for rows in &supports {
        for cols in &supports {
            best = best.max(operator_norm(&m.submatrix(rows, cols)));
        }
    }
    Ok(best)
}
