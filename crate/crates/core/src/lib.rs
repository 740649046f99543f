//! Attentive relation networks for risk classification of short texts.
//!
//! A BiLSTM encodes each document; two risk indicators (per-token lexicon
//! sentiment and an LDA topic mixture) are related to every hidden state by a
//! small MLP, attention-pooled, fused and classified. Everything numeric,
//! from the differentiation engine to the Gibbs sampler, lives in this crate.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below name the common instantiations.

pub mod autodiff;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod indicators;
pub mod model;
pub mod relation;
mod scalar;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Scalar;

pub type Matrix64 = autodiff::Matrix<f64>;
pub type Matrix32 = autodiff::Matrix<f32>;
pub type Graph64 = autodiff::Graph<f64>;
pub type ParamStore64 = autodiff::ParamStore<f64>;
pub type RnModel64 = model::RnModel<f64>;
pub type RnModel32 = model::RnModel<f32>;
