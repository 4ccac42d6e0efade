use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::rng::{self, combine};

/// Steps run from a zero state before an episode starts, so the distractor
/// begins close to its stationary distribution.
const BURN_IN: usize = 50;

/// Haar-distributed orthogonal matrix (row-major, `n × n`).
pub fn random_orthogonal(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = q[(i, j)];
        }
    }
    out
}

/// Largest eigenvalue modulus of a square row-major matrix.
pub fn spectral_radius(a: &[f64], n: usize) -> f64 {
    let m = DMatrix::from_row_slice(n, n, a);
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Vector AR(1) process `d ← A·d + σ·ε` standing in for a background video.
///
/// `A` is a random rotation-and-decay operator built from 2×2 blocks
/// `r·R(θ)` conjugated by a random orthogonal basis, so its spectral radius is
/// the largest block radius.
#[derive(Clone, Debug)]
pub struct DistractorProcess {
    pub state: Vec<f64>,
    pub mix: Vec<f64>,
    pub noise_scale: f64,
    pub scene_seed: u64,
    noise: rng::Rng,
}

impl DistractorProcess {
    pub fn new(
        dim: usize,
        noise_scale: f64,
        radius: [f64; 2],
        scene_seed: u64,
        episode_seed: u64,
    ) -> Self {
        let mut scene_rng = rng::stream(scene_seed, "distractor-dynamics");
        let mix = Self::dynamics(dim, radius, &mut scene_rng);
        let noise = rng::stream(combine(scene_seed, episode_seed), "distractor-noise");
        let mut p = Self {
            state: vec![0.0; dim],
            mix,
            noise_scale,
            scene_seed,
            noise,
        };
        for _ in 0..BURN_IN {
            p.advance();
        }
        p
    }

    fn dynamics(dim: usize, [lo, hi]: [f64; 2], rng: &mut impl Rng) -> Vec<f64> {
        let mut block = vec![0.0; dim * dim];
        let radius = Uniform::new_inclusive(lo, hi).expect("radius range");
        let angle = Uniform::new_inclusive(0.0, std::f64::consts::PI).expect("angle range");
        let mut i = 0;
        while i + 1 < dim {
            let r: f64 = radius.sample(rng);
            let th: f64 = angle.sample(rng);
            let (s, c) = th.sin_cos();
            block[i * dim + i] = r * c;
            block[i * dim + i + 1] = -r * s;
            block[(i + 1) * dim + i] = r * s;
            block[(i + 1) * dim + i + 1] = r * c;
            i += 2;
        }
        if i < dim {
            block[i * dim + i] = radius.sample(rng);
        }
        let q = random_orthogonal(dim, rng);
        // A = Q·B·Qᵀ
        let qm = DMatrix::from_row_slice(dim, dim, &q);
        let bm = DMatrix::from_row_slice(dim, dim, &block);
        let a = &qm * bm * qm.transpose();
        let mut out = vec![0.0; dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                out[r * dim + c] = a[(r, c)];
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.state.len()
    }

    pub fn advance(&mut self) {
        let n = self.state.len();
        let mut next = vec![0.0; n];
        for (r, out) in next.iter_mut().enumerate() {
            let row = &self.mix[r * n..(r + 1) * n];
            let eps: f64 = self.noise.sample(StandardNormal);
            *out = row.iter().zip(&self.state).map(|(a, d)| a * d).sum::<f64>()
                + self.noise_scale * eps;
        }
        self.state = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_matrix_is_orthogonal() {
        let mut r = rng::stream(3, "t");
        let n = 7;
        let q = random_orthogonal(n, &mut r);
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = (0..n).map(|k| q[k * n + i] * q[k * n + j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dynamics_are_stable_for_every_scene() {
        for scene in 0..40 {
            for dim in [1, 5, 16] {
                let p = DistractorProcess::new(dim, 0.3, [0.5, 0.9], scene, 0);
                let rho = spectral_radius(&p.mix, dim);
                assert!(rho <= 0.9 + 1e-9, "scene {scene}: {rho}");
            }
        }
    }

    #[test]
    fn same_scene_same_dynamics_and_noise() {
        let mut a = DistractorProcess::new(16, 0.3, [0.5, 0.9], 11, 4);
        let mut b = DistractorProcess::new(16, 0.3, [0.5, 0.9], 11, 4);
        assert_eq!(a.mix, b.mix);
        for _ in 0..20 {
            a.advance();
            b.advance();
            assert_eq!(a.state, b.state);
        }
        let c = DistractorProcess::new(16, 0.3, [0.5, 0.9], 12, 4);
        assert_ne!(a.mix, c.mix);
    }
}
