//! Sequence-representation auxiliary objective: DTFT-feature prediction of
//! action and reward windows, and latent overshooting with an adaptive KL
//! weight, all trained through a shared encoder.

mod adaptive;
pub mod elbo;
mod encoder;
mod gaussian;
mod heads;
mod losses;

pub use adaptive::{delta_from_rho, rho, AdaptiveFactor, DIFF_FLOOR};
pub use encoder::{encode_sequence, Encoder, Which};
pub use gaussian::{kl_diag_gauss, kl_diag_gauss_values, GaussianDiag, LOGVAR_MAX, LOGVAR_MIN};
pub use heads::{overshoot_rollout, DsrHeads, HeadShape, LatentDynamics, TransitionModel};
pub use losses::{
    dtft_distance, forward_loss, inverse_loss, reward_loss, total_aux_loss, window, AuxInputs,
    AuxLosses, AuxToggles, ForwardLoss,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Activation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DsrConfig {
    pub latent_dim: usize,
    /// Window length `T`; sampled sequences hold `T + 1` steps.
    pub seq_len: usize,
    /// Frequencies on the DTFT grid.
    pub grid_points: usize,
    pub encoder_hidden: Vec<usize>,
    pub encoder_output: Activation,
    pub head_hidden: Vec<usize>,
    /// Scale `c` of the adaptive factor.
    pub c: f64,
    /// Clip width `ε` of the adaptive factor.
    pub epsilon: f64,
    /// EMA rate of the target encoder.
    pub tau_encoder: f64,
    pub lr: f64,
}

impl Default for DsrConfig {
    fn default() -> Self {
        Self {
            latent_dim: 50,
            seq_len: 3,
            grid_points: crate::dtft::DEFAULT_GRID_POINTS,
            encoder_hidden: vec![256],
            encoder_output: Activation::Tanh,
            head_hidden: vec![256, 256],
            c: 1e-3,
            epsilon: 0.2,
            tau_encoder: 0.05,
            lr: 5e-4,
        }
    }
}

impl DsrConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, msg: String| {
            Err(Error::Config {
                field: format!("dsr.{field}"),
                msg,
            })
        };
        for (name, v) in [("latent_dim", self.latent_dim), ("seq_len", self.seq_len)] {
            if v == 0 {
                return fail(name, "must be positive".into());
            }
        }
        if self.grid_points < 2 {
            return fail(
                "grid_points",
                format!("need at least 2, got {}", self.grid_points),
            );
        }
        if self.encoder_hidden.contains(&0) {
            return fail("encoder_hidden", "widths must be positive".into());
        }
        if self.head_hidden.contains(&0) {
            return fail("head_hidden", "widths must be positive".into());
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return fail("c", format!("must be positive, got {}", self.c));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return fail(
                "epsilon",
                format!("must lie in (0, 1), got {}", self.epsilon),
            );
        }
        if !(self.tau_encoder > 0.0 && self.tau_encoder <= 1.0) {
            return fail(
                "tau_encoder",
                format!("must lie in (0, 1], got {}", self.tau_encoder),
            );
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail("lr", format!("must be positive, got {}", self.lr));
        }
        Ok(())
    }
}
