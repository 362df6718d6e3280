//! Kendall's tau and the trigonometric maps from rank correlations to latent
//! correlations.
//!
//! Tied pairs contribute `sign(0) = 0` and the denominator is always
//! `C(n, 2)`, so the statistic is the plain U-statistic with no tie
//! correction. Tie-free column pairs use an `O(n log n)` inversion count;
//! any pair with ties goes through the direct `O(n^2)` sum. Both routes
//! produce the same integer numerator and therefore the same `f64`.

use std::cmp::Ordering;
use std::f64::consts::FRAC_PI_2;
use std::ops::Deref;

use rayon::prelude::*;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;

/// Matrix of pairwise Kendall's tau coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct KendallMatrix {
    matrix: SquareMatrix,
    n: usize,
}

impl KendallMatrix {
    /// Wraps a precomputed matrix; entries must lie in `[-1, 1]`.
    pub fn from_matrix(matrix: SquareMatrix, n: usize) -> Result<Self> {
        if !matrix.is_symmetric() || matrix.max_abs() > 1.0 {
            return Err(Error::InvalidParameter(
                "Kendall matrix must be symmetric with entries in [-1, 1]".into(),
            ));
        }
        Ok(Self { matrix, n })
    }

    pub fn sample_size(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.matrix
    }
}

impl Deref for KendallMatrix {
    type Target = SquareMatrix;
    fn deref(&self) -> &SquareMatrix {
        &self.matrix
    }
}

/// `sin(pi/2 * T)`: unit diagonal, possibly indefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaHat(SquareMatrix);

impl SigmaHat {
    pub fn matrix(&self) -> &SquareMatrix {
        &self.0
    }

    pub fn into_inner(self) -> SquareMatrix {
        self.0
    }
}

impl Deref for SigmaHat {
    type Target = SquareMatrix;
    fn deref(&self) -> &SquareMatrix {
        &self.0
    }
}

impl AsRef<SquareMatrix> for SigmaHat {
    fn as_ref(&self) -> &SquareMatrix {
        &self.0
    }
}

/// The Kendall matrix together with its sine transform.
#[derive(Debug, Clone)]
pub struct CorrelationEstimate {
    pub kendall: KendallMatrix,
    pub sigma_hat: SigmaHat,
}

impl CorrelationEstimate {
    pub fn from_data(x: &DataMatrix) -> Result<Self> {
        let kendall = kendall_tau_matrix(x)?;
        let sigma_hat = sine_transform(&kendall);
        Ok(Self { kendall, sigma_hat })
    }
}

#[inline]
fn sign(x: f64) -> i64 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

#[inline]
fn pair_count(n: usize) -> i64 {
    (n as i64) * (n as i64 - 1) / 2
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::TooFewSamples { required: 2, found: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Data("Kendall's tau requires finite inputs".into()));
    }
    Ok(())
}

/// Numerator `sum_{i<i'} sign(x_i - x_i') sign(y_i - y_i')` by direct summation.
pub fn kendall_numerator_naive(x: &[f64], y: &[f64]) -> i64 {
    let n = x.len();
    let mut s = 0;
    for i in 0..n {
        for j in i + 1..n {
            s += sign(x[i] - x[j]) * sign(y[i] - y[j]);
        }
    }
    s
}

/// The direct `O(n^2)` estimator; also serves as the oracle for the fast path.
pub fn kendall_tau_naive(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok(kendall_numerator_naive(x, y) as f64 / pair_count(x.len()) as f64)
}

fn has_ties(values: &[f64]) -> bool {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v.windows(2).any(|w| w[0] == w[1])
}

/// Sorts `seq` and returns the number of inversions (pairs `i < j` with `seq[i] > seq[j]`).
fn count_inversions<T: Copy + PartialOrd>(seq: &mut [T], scratch: &mut Vec<T>) -> u64 {
    let n = seq.len();
    if n < 2 {
        return 0;
    }
    scratch.clear();
    scratch.extend_from_slice(seq);
    let mut inversions = 0u64;
    let mut width = 1;
    // bottom-up merge sort, alternating between `seq` and `scratch`
    let (mut src, mut dst): (&mut [T], &mut [T]) = (seq, scratch.as_mut_slice());
    let mut in_seq = true;
    while width < n {
        let mut start = 0;
        while start < n {
            let mid = (start + width).min(n);
            let end = (start + 2 * width).min(n);
            let (mut i, mut j, mut k) = (start, mid, start);
            while i < mid && j < end {
                // branchless: the comparison outcome is unpredictable on random input
                let right = src[j] < src[i];
                dst[k] = if right { src[j] } else { src[i] };
                inversions += (right as u64) * (mid - i) as u64;
                j += right as usize;
                i += !right as usize;
                k += 1;
            }
            dst[k..k + (mid - i)].copy_from_slice(&src[i..mid]);
            k += mid - i;
            dst[k..k + (end - j)].copy_from_slice(&src[j..end]);
            start = end;
        }
        std::mem::swap(&mut src, &mut dst);
        in_seq = !in_seq;
        width *= 2;
    }
    if !in_seq {
        dst.copy_from_slice(src);
    }
    inversions
}

/// Kendall's tau of two samples.
pub fn kendall_tau_pair(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len();
    if has_ties(x) || has_ties(y) {
        return Ok(kendall_numerator_naive(x, y) as f64 / pair_count(n) as f64);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut seq: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let discordant = count_inversions(&mut seq, &mut Vec::with_capacity(n)) as i64;
    Ok((pair_count(n) - 2 * discordant) as f64 / pair_count(n) as f64)
}

/// Per-column ranks used by the matrix routine.
struct ColumnRanks {
    order: Vec<usize>,
    ranks: Vec<u32>,
    tied: bool,
}

impl ColumnRanks {
    fn new(col: &[f64]) -> Self {
        let n = col.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_unstable_by(|&i, &j| col[i].total_cmp(&col[j]).then(i.cmp(&j)));
        let mut ranks = vec![0u32; n];
        let mut tied = false;
        let mut r = 0u32;
        for k in 0..n {
            if k > 0 {
                match col[order[k - 1]].partial_cmp(&col[order[k]]) {
                    Some(Ordering::Equal) => tied = true,
                    _ => r += 1,
                }
            }
            ranks[order[k]] = r;
        }
        Self { order, ranks, tied }
    }
}

/// Dense ranks of a column: equal values share a rank, so
/// `sign(r_i - r_j) = sign(x_i - x_j)` for every pair.
pub(crate) fn dense_ranks(col: &[f64]) -> Vec<u32> {
    ColumnRanks::new(col).ranks
}

/// Full Kendall matrix; column pairs are evaluated in parallel and each entry
/// is computed independently, so the result does not depend on the schedule.
pub fn kendall_tau_matrix(x: &DataMatrix) -> Result<KendallMatrix> {
    let (n, p) = (x.nrows(), x.ncols());
    if n < 2 {
        return Err(Error::TooFewSamples { required: 2, found: n });
    }
    if p < 2 {
        return Err(Error::TooFewVariables { required: 2, found: p });
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("Kendall's tau requires finite inputs".into()));
    }
    let cols = x.columns();
    let ranks: Vec<ColumnRanks> = cols.par_iter().map(|c| ColumnRanks::new(c)).collect();
    let total = pair_count(n);

    let rows: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(n), Vec::with_capacity(n)),
            |(seq, scratch), a| {
                let mut out = Vec::with_capacity(p - a - 1);
                for b in a + 1..p {
                    let num = if ranks[a].tied || ranks[b].tied {
                        kendall_numerator_naive(&cols[a], &cols[b])
                    } else {
                        seq.clear();
                        seq.extend(ranks[a].order.iter().map(|&i| ranks[b].ranks[i]));
                        total - 2 * count_inversions(seq.as_mut_slice(), scratch) as i64
                    };
                    out.push(num as f64 / total as f64);
                }
                out
            },
        )
        .collect();

    let mut m = SquareMatrix::identity(p);
    for (a, row) in rows.iter().enumerate() {
        for (off, &t) in row.iter().enumerate() {
            let b = a + 1 + off;
            m.set(a, b, t);
            m.set(b, a, t);
        }
    }
    Ok(KendallMatrix { matrix: m, n })
}

/// `Sigma_hat_ab = sin(pi/2 * T_ab)` with the diagonal pinned to one.
pub fn sine_transform(t: &KendallMatrix) -> SigmaHat {
    let p = t.dim();
    SigmaHat(SquareMatrix::from_fn(p, |i, j| {
        if i == j {
            1.0
        } else {
            (FRAC_PI_2 * t.get(i, j)).sin()
        }
    }))
}

/// Entrywise `cos(pi/2 * T_ab)`; the diagonal is `cos(pi/2) = 0`.
pub fn cosine_weight_matrix(t: &KendallMatrix) -> SquareMatrix {
    let p = t.dim();
    SquareMatrix::from_fn(p, |i, j| if i == j { 0.0 } else { (FRAC_PI_2 * t.get(i, j)).cos() })
}
