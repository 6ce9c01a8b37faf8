//! Large-`p` limits of `(A^{p/2} B^p A^{p/2})^{1/p}` and related operator-mean
//! quantities for positive semidefinite matrices.

pub mod error;
pub mod antisym;
pub mod antitrotter;
pub mod cli;
pub mod ext;
pub mod grassmann;
pub mod logval;
pub mod majorize;
pub mod matnum;
pub mod means;
pub mod oracle;

pub use error::{Error, Result};
pub use logval::LogValue;
pub use matnum::{HermitianMatrix, PsdMatrix};
