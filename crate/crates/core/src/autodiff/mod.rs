//! Reverse-mode automatic differentiation over dense matrices.
//!
//! Only the operators the classifier needs are provided. Broadcasting is
//! limited to adding a row vector to every row of a matrix ([`Graph::add_row`])
//! and scaling rows by a column ([`Graph::row_scale`]); any other shape
//! combination is a dimension error.

mod check;
mod graph;
mod matrix;
mod params;

pub use check::{grad_check, GradCheckReport};
pub use graph::{row_softmax, sigmoid, Graph, Node, NodeId, Op, LOG_CLAMP};
pub use matrix::Matrix;
pub use params::{clip_global_norm, global_norm, AdamConfig, Param, ParamStore};
