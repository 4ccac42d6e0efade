//! Amplitude and phase of the discrete-time Fourier transform of short real
//! sequences, evaluated on an evenly spaced frequency grid over `[-π, π]`.
//!
//! Sequences are indexed from `n = 0` inside the window, so identical
//! behaviour at different absolute times yields identical targets. Each
//! column of a `T × dims` sequence is transformed independently.

use std::f64::consts::PI;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const DEFAULT_GRID_POINTS: usize = 20;

/// Real or imaginary parts below this fraction of `Σ|x_n|` are treated as
/// exact zeros, so bins where the transform is real up to rounding (e.g. at
/// `ω = ±π`) get a well-defined phase.
const ZERO_SNAP: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct OmegaGrid {
    omegas: Vec<f64>,
}

impl OmegaGrid {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!(
                "frequency grid needs at least 2 points, got {k}"
            )));
        }
        let step = 2.0 * PI / (k - 1) as f64;
        let mut omegas: Vec<f64> = (0..k).map(|j| -PI + j as f64 * step).collect();
        omegas[k - 1] = PI;
        Ok(Self { omegas })
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
}

impl Default for OmegaGrid {
    fn default() -> Self {
        Self::new(DEFAULT_GRID_POINTS).expect("default grid")
    }
}

/// Amplitude and phase, each `dims × k` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DtftFeatures {
    pub dims: usize,
    pub k: usize,
    pub amplitude: Vec<f64>,
    pub phase: Vec<f64>,
}

impl DtftFeatures {
    pub fn amplitude_at(&self, dim: usize, j: usize) -> f64 {
        self.amplitude[dim * self.k + j]
    }

    pub fn phase_at(&self, dim: usize, j: usize) -> f64 {
        self.phase[dim * self.k + j]
    }
}

fn validate(seq: &[f64], t: usize, dims: usize) -> Result<()> {
    if t == 0 || dims == 0 {
        return Err(Error::InvalidArgument(format!(
            "DTFT of an empty sequence ({t} × {dims})"
        )));
    }
    if seq.len() != t * dims {
        return Err(Error::shape("dtft", &[seq.len()], &[t, dims]));
    }
    if let Some(x) = seq.iter().find(|x| !x.is_finite()) {
        return Err(Error::domain("dtft", format!("non-finite input {x}")));
    }
    Ok(())
}

/// Converts a complex value into (amplitude, phase) with phase in `(-π, π]`.
fn polar(mut re: f64, mut im: f64, scale: f64) -> (f64, f64) {
    let tol = ZERO_SNAP * scale;
    if re.abs() <= tol {
        re = 0.0;
    }
    if im.abs() <= tol {
        im = 0.0;
    }
    let amp = re.hypot(im);
    let mut phase = if re == 0.0 && im == 0.0 {
        0.0
    } else {
        im.atan2(re)
    };
    if phase <= -PI {
        phase = PI;
    }
    (amp, phase + 0.0)
}

/// Transforms a `t × dims` row-major sequence.
///
/// `F_j(ω) = Σ_{n<t} seq[n][j]·e^{−i n ω}`; amplitude `|F|`, phase
/// `atan2(Im F, Re F)` with `atan2(0, 0) = 0`.
pub fn dtft_features(seq: &[f64], t: usize, dims: usize, grid: &OmegaGrid) -> Result<DtftFeatures> {
    validate(seq, t, dims)?;
    let k = grid.len();
    // Basis tables: cos(nω) and sin(nω), t × k.
    let mut cos = vec![0.0; t * k];
    let mut sin = vec![0.0; t * k];
    for n in 0..t {
        for (j, &w) in grid.omegas().iter().enumerate() {
            let (s, c) = (n as f64 * w).sin_cos();
            cos[n * k + j] = c;
            sin[n * k + j] = s;
        }
    }
    let mut amplitude = vec![0.0; dims * k];
    let mut phase = vec![0.0; dims * k];
    for d in 0..dims {
        let scale: f64 = (0..t).map(|n| seq[n * dims + d].abs()).sum();
        for j in 0..k {
            let mut re = 0.0;
            let mut im = 0.0;
            for n in 0..t {
                let x = seq[n * dims + d];
                re += x * cos[n * k + j];
                im -= x * sin[n * k + j];
            }
            let (a, p) = polar(re, im, scale);
            amplitude[d * k + j] = a;
            phase[d * k + j] = p;
        }
    }
    Ok(DtftFeatures {
        dims,
        k,
        amplitude,
        phase,
    })
}

/// Batched features for a `[batch, t, dims]` tensor (or `[batch, t]` for a
/// scalar sequence). Returns `(amplitude, phase)`, each `[batch, dims·k]`.
pub fn dtft_batch(seqs: &Tensor, grid: &OmegaGrid) -> Result<(Tensor, Tensor)> {
    let shape = seqs.shape();
    let (b, t, dims) = match *shape {
        [b, t] => (b, t, 1),
        [b, t, d] => (b, t, d),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "dtft_batch expects [batch, T(, dims)], got {shape:?}"
            )))
        }
    };
    let k = grid.len();
    let mut amp = Vec::with_capacity(b * dims * k);
    let mut pha = Vec::with_capacity(b * dims * k);
    for i in 0..b {
        let f = dtft_features(
            &seqs.data()[i * t * dims..(i + 1) * t * dims],
            t,
            dims,
            grid,
        )?;
        amp.extend(f.amplitude);
        pha.extend(f.phase);
    }
    Ok((
        Tensor::matrix(b, dims * k, amp)?,
        Tensor::matrix(b, dims * k, pha)?,
    ))
}

/// Independent evaluation of the same transform: accumulates `x_n · zⁿ` with
/// `z = e^{−iω}` advanced by repeated complex multiplication. Test use only.
pub fn naive_dtft_oracle(
    seq: &[f64],
    t: usize,
    dims: usize,
    grid: &OmegaGrid,
) -> Result<DtftFeatures> {
    validate(seq, t, dims)?;
    let k = grid.len();
    let mut amplitude = Vec::with_capacity(dims * k);
    let mut phase = Vec::with_capacity(dims * k);
    for d in 0..dims {
        let scale: f64 = (0..t).map(|n| seq[n * dims + d].abs()).sum();
        for &w in grid.omegas() {
            let step = (w.cos(), -w.sin());
            let mut z = (1.0f64, 0.0f64);
            let mut acc = (0.0f64, 0.0f64);
            for n in 0..t {
                let x = seq[n * dims + d];
                acc.0 += x * z.0;
                acc.1 += x * z.1;
                z = (z.0 * step.0 - z.1 * step.1, z.0 * step.1 + z.1 * step.0);
            }
            let (a, p) = polar(acc.0, acc.1, scale);
            amplitude.push(a);
            phase.push(p);
        }
    }
    Ok(DtftFeatures {
        dims,
        k,
        amplitude,
        phase,
    })
}
