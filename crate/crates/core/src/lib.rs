//! Rank-based inference for single entries of a latent precision matrix.

pub mod baselines;
pub mod cli;
pub mod data;
pub mod edge;
pub mod lasso;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod normal;
pub mod rank;
pub mod synth;

pub use data::DataMatrix;
pub use error::{Error, Result};
pub use matrix::{CorrelationMatrix, PairIndex, SquareMatrix};
pub use rank::{kendall_tau_matrix, kendall_tau_pair, sine_transform, CorrelationEstimate};
