//! Matrix-factorization recommenders with characterized social
//! regularization: data ingestion, objective terms, SGD training, baselines,
//! and leave-one-out top-K evaluation.

pub mod baselines;
pub mod data;
pub mod error;
pub mod eval;
pub mod gradient;
pub mod model;
pub mod persist;
pub mod train;

pub use error::{Error, Result};
