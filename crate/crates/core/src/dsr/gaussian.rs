use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};

pub const LOGVAR_MIN: f64 = -6.0;
pub const LOGVAR_MAX: f64 = 2.0;

/// Diagonal Gaussian over rows of a `[batch, dim]` array.
#[derive(Clone, Copy, Debug)]
pub struct GaussianDiag {
    pub mean: Var,
    pub logvar: Var,
}

impl GaussianDiag {
    pub fn new(g: &Graph, mean: Var, logvar: Var) -> Result<Self> {
        if g.shape(mean) != g.shape(logvar) {
            return Err(Error::shape("gaussian", g.shape(mean), g.shape(logvar)));
        }
        Ok(Self { mean, logvar })
    }

    /// Unit variance around `mean`.
    pub fn unit(g: &mut Graph, mean: Var) -> Self {
        let logvar = g.constant(Tensor::zeros(g.shape(mean)));
        Self { mean, logvar }
    }

    /// Reparameterized draw `mean + exp(logvar / 2) · eps`.
    pub fn sample(&self, g: &mut Graph, eps: &Tensor) -> Result<Var> {
        let e = g.constant(eps.clone());
        let half = g.mul_scalar(self.logvar, 0.5)?;
        let std = g.exp(half)?;
        let noise = g.mul(std, e)?;
        g.add(self.mean, noise)
    }
}

/// `KL[p ‖ q]` summed over dimensions and averaged over the batch.
pub fn kl_diag_gauss(g: &mut Graph, p: &GaussianDiag, q: &GaussianDiag) -> Result<Var> {
    let ps = g.shape(p.mean).to_vec();
    if g.shape(q.mean) != ps.as_slice() {
        return Err(Error::shape("kl_diag_gauss", &ps, g.shape(q.mean)));
    }
    // ½ Σ [lv_q − lv_p + (e^{lv_p} + (μ_p − μ_q)²) e^{−lv_q} − 1]
    let var_p = g.exp(p.logvar)?;
    let diff = g.sub(p.mean, q.mean)?;
    let diff2 = g.square(diff)?;
    let num = g.add(var_p, diff2)?;
    let neg_lvq = g.neg(q.logvar)?;
    let inv_var_q = g.exp(neg_lvq)?;
    let ratio = g.mul(num, inv_var_q)?;
    let lv = g.sub(q.logvar, p.logvar)?;
    let inner = g.add(lv, ratio)?;
    let inner = g.add_scalar(inner, -1.0)?;
    let per_row = if ps.len() >= 2 {
        let s = g.sum_axis(inner, ps.len() - 1)?;
        g.mean(s)?
    } else {
        g.sum(inner)?
    };
    g.mul_scalar(per_row, 0.5)
}

/// KL between two single diagonal Gaussians given as plain vectors.
pub fn kl_diag_gauss_values(
    p_mean: &[f64],
    p_logvar: &[f64],
    q_mean: &[f64],
    q_logvar: &[f64],
) -> Result<f64> {
    let n = p_mean.len();
    for (name, v) in [
        ("p_logvar", p_logvar),
        ("q_mean", q_mean),
        ("q_logvar", q_logvar),
    ] {
        if v.len() != n {
            return Err(Error::InvalidArgument(format!(
                "{name} has {} entries, p_mean has {n}",
                v.len()
            )));
        }
    }
    let mut g = Graph::new();
    let mut row = |v: &[f64]| g.constant(Tensor::matrix(1, n, v.to_vec()).expect("row shape"));
    let p = GaussianDiag {
        mean: row(p_mean),
        logvar: row(p_logvar),
    };
    let q = GaussianDiag {
        mean: row(q_mean),
        logvar: row(q_logvar),
    };
    let kl = kl_diag_gauss(&mut g, &p, &q)?;
    g.value(kl).item()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_is_zero() {
        let kl =
            kl_diag_gauss_values(&[0.3, -1.0], &[0.2, -0.5], &[0.3, -1.0], &[0.2, -0.5]).unwrap();
        assert_eq!(kl, 0.0);
    }

    #[test]
    fn shifted_mean() {
        let kl = kl_diag_gauss_values(&[0.0], &[0.0], &[1.0], &[0.0]).unwrap();
        assert!((kl - 0.5).abs() < 1e-15);
    }

    #[test]
    fn wider_p() {
        let kl = kl_diag_gauss_values(&[0.0], &[4f64.ln()], &[0.0], &[0.0]).unwrap();
        let want = 0.5 * (4.0 - 1.0 - 4f64.ln());
        assert!((kl - want).abs() < 1e-15);
        assert!((kl - 0.80685).abs() < 1e-5);
    }

    #[test]
    fn dim_mismatch_rejected() {
        assert!(kl_diag_gauss_values(&[0.0], &[0.0], &[0.0, 1.0], &[0.0, 0.0]).is_err());
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(&[2, 3]));
        let b = g.constant(Tensor::zeros(&[2, 4]));
        let p = GaussianDiag::unit(&mut g, a);
        let q = GaussianDiag::unit(&mut g, b);
        assert!(kl_diag_gauss(&mut g, &p, &q).is_err());
    }

    #[test]
    fn averages_over_batch() {
        let mut g = Graph::new();
        let pm = g.constant(Tensor::matrix(2, 1, vec![0.0, 0.0]).unwrap());
        let qm = g.constant(Tensor::matrix(2, 1, vec![1.0, 2.0]).unwrap());
        let p = GaussianDiag::unit(&mut g, pm);
        let q = GaussianDiag::unit(&mut g, qm);
        let kl = kl_diag_gauss(&mut g, &p, &q).unwrap();
        // (0.5 + 2.0) / 2
        assert!((g.value(kl).item().unwrap() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn sample_uses_standard_deviation() {
        let mut g = Graph::new();
        let m = g.constant(Tensor::matrix(1, 2, vec![1.0, -1.0]).unwrap());
        let lv = g.constant(Tensor::matrix(1, 2, vec![4f64.ln(), 0.0]).unwrap());
        let d = GaussianDiag::new(&g, m, lv).unwrap();
        let s = d
            .sample(&mut g, &Tensor::matrix(1, 2, vec![0.5, 2.0]).unwrap())
            .unwrap();
        let v = g.value(s).data();
        assert!((v[0] - 2.0).abs() < 1e-15 && (v[1] - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn kl_is_non_negative(
            pm in prop::collection::vec(-3.0f64..3.0, 4),
            pl in prop::collection::vec(-6.0f64..2.0, 4),
            qm in prop::collection::vec(-3.0f64..3.0, 4),
            ql in prop::collection::vec(-6.0f64..2.0, 4),
        ) {
            let kl = kl_diag_gauss_values(&pm, &pl, &qm, &ql).unwrap();
            prop_assert!(kl >= -1e-12);
            prop_assert!(kl_diag_gauss_values(&pm, &pl, &pm, &pl).unwrap().abs() < 1e-9);
        }
    }
}
