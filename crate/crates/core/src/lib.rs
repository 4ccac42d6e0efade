//! Sequence representation learning for off-policy actor-critic agents.
//!
//! An encoder maps stacked observations to a latent state. Besides the soft
//! actor-critic losses it is shaped by three auxiliary objectives: predicting
//! the Fourier amplitude/phase of action and reward sequences, and a
//! multi-step latent forward model trained against a slowly moving target
//! encoder.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod buffer;
pub mod dsr;
pub mod dtft;
pub mod envs;
pub mod error;
pub mod nn;
pub mod probe;
pub mod rng;
pub mod sac;
pub mod trainer;

pub use error::{Error, Result};
