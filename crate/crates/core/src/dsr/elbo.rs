//! One-dimensional linear-Gaussian latent model with closed-form evidence:
//! `z ~ N(m₀, v₀)`, `x | z ~ N(a·z, r)`.

use std::f64::consts::PI;

use super::gaussian::kl_diag_gauss_values;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearGaussian {
    pub prior_mean: f64,
    pub prior_var: f64,
    pub gain: f64,
    pub noise_var: f64,
}

/// Mean and variance of a scalar Gaussian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normal1 {
    pub mean: f64,
    pub var: f64,
}

fn kl(p: Normal1, q: Normal1) -> Result<f64> {
    kl_diag_gauss_values(&[p.mean], &[p.var.ln()], &[q.mean], &[q.var.ln()])
}

impl LinearGaussian {
    pub fn new(prior_mean: f64, prior_var: f64, gain: f64, noise_var: f64) -> Result<Self> {
        if !(prior_var > 0.0 && noise_var > 0.0) {
            return Err(Error::InvalidArgument("variances must be positive".into()));
        }
        Ok(Self {
            prior_mean,
            prior_var,
            gain,
            noise_var,
        })
    }

    fn prior(&self) -> Normal1 {
        Normal1 {
            mean: self.prior_mean,
            var: self.prior_var,
        }
    }

    /// `log p(x)`, with `x ~ N(a·m₀, a²·v₀ + r)` marginally.
    pub fn log_evidence(&self, x: f64) -> f64 {
        let var = self.gain * self.gain * self.prior_var + self.noise_var;
        let d = x - self.gain * self.prior_mean;
        -0.5 * ((2.0 * PI * var).ln() + d * d / var)
    }

    /// Exact posterior `p(z | x)`.
    pub fn posterior(&self, x: f64) -> Normal1 {
        let precision = 1.0 / self.prior_var + self.gain * self.gain / self.noise_var;
        let var = 1.0 / precision;
        Normal1 {
            mean: var * (self.prior_mean / self.prior_var + self.gain * x / self.noise_var),
            var,
        }
    }

    /// `E_q[log p(x | z)] − KL[q ‖ p(z)]`.
    pub fn elbo(&self, x: f64, q: Normal1) -> Result<f64> {
        let d = x - self.gain * q.mean;
        let expected_ll = -0.5
            * ((2.0 * PI * self.noise_var).ln()
                + (d * d + self.gain * self.gain * q.var) / self.noise_var);
        Ok(expected_ll - kl(q, self.prior())?)
    }

    /// `KL[q ‖ p(z | x)]`
    pub fn posterior_gap(&self, x: f64, q: Normal1) -> Result<f64> {
        kl(q, self.posterior(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> LinearGaussian {
        LinearGaussian::new(0.3, 1.7, -0.8, 0.4).unwrap()
    }

    #[test]
    fn evidence_splits_into_elbo_and_gap() {
        let m = model();
        for (x, qm, qv) in [(0.5, 0.0, 1.0), (-2.0, 1.3, 0.05), (3.1, -0.7, 2.5)] {
            let q = Normal1 { mean: qm, var: qv };
            let lhs = m.log_evidence(x);
            let rhs = m.elbo(x, q).unwrap() + m.posterior_gap(x, q).unwrap();
            assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn posterior_attains_the_evidence() {
        let m = model();
        let x = 1.1;
        let post = m.posterior(x);
        assert!((m.elbo(x, post).unwrap() - m.log_evidence(x)).abs() < 1e-12);
        for dm in [-0.1, 0.05, 0.3] {
            for sv in [0.5, 0.9, 1.5] {
                let q = Normal1 {
                    mean: post.mean + dm,
                    var: post.var * sv,
                };
                assert!(m.elbo(x, q).unwrap() < m.log_evidence(x));
            }
        }
    }

    #[test]
    fn evidence_matches_quadrature() {
        // ∫ N(z; m₀, v₀) N(x; a z, r) dz by the trapezoid rule
        let m = model();
        let x = -0.4;
        let (lo, hi, n) = (-15.0, 15.0, 200_000);
        let h = (hi - lo) / n as f64;
        let dens = |z: f64| {
            let p = (-(z - m.prior_mean).powi(2) / (2.0 * m.prior_var)).exp()
                / (2.0 * PI * m.prior_var).sqrt();
            let l = (-(x - m.gain * z).powi(2) / (2.0 * m.noise_var)).exp()
                / (2.0 * PI * m.noise_var).sqrt();
            p * l
        };
        let mut s = 0.5 * (dens(lo) + dens(hi));
        for i in 1..n {
            s += dens(lo + i as f64 * h);
        }
        assert!(((s * h).ln() - m.log_evidence(x)).abs() < 1e-9);
    }
}
