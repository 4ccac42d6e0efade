//! Minimal reverse-mode differentiation over dense `f64` arrays.

pub mod checkpoint;
pub mod gradcheck;
mod graph;
mod optim;
mod params;
mod tensor;

pub use graph::{Graph, Var};
pub use optim::Adam;
pub use params::{ParamId, ParamStore};
pub use tensor::Tensor;
