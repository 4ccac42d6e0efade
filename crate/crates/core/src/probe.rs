//! Representation diagnostics: linear state probes, matched-pair distance
//! ratios, latent export and a 2-D PCA projection.

use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::IndexedRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, ParamStore, Tensor};
use crate::envs::{DistractingPointMass, EnvSpec, FrameStack};
use crate::error::{Error, Result};
use crate::nn::Mode;
use crate::rng;
use crate::sac::Agent;

/// Regularizer used when the probe design is rank deficient.
pub const RIDGE_LAMBDA: f64 = 1e-6;

/// Steps of random play per probe episode.
const PROBE_EPISODE_STEPS: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeFit {
    /// One coefficient of determination per target column.
    pub r2: Vec<f64>,
    pub ridge_fallback: bool,
}

impl ProbeFit {
    pub fn mean_r2(&self) -> f64 {
        self.r2.iter().sum::<f64>() / self.r2.len().max(1) as f64
    }
}

fn to_matrix(t: &Tensor) -> Result<DMatrix<f64>> {
    if t.ndim() != 2 {
        return Err(Error::InvalidArgument(format!(
            "expected a matrix, got shape {:?}",
            t.shape()
        )));
    }
    Ok(DMatrix::from_row_slice(
        t.shape()[0],
        t.shape()[1],
        t.data(),
    ))
}

/// Ordinary least squares with intercept, one fit per target column.
/// `R² = 1 − SS_res / SS_tot`, taken as 0 for a constant column.
pub fn linear_probe(latents: &Tensor, targets: &Tensor) -> Result<ProbeFit> {
    let x = to_matrix(latents)?;
    let y = to_matrix(targets)?;
    let (n, d) = x.shape();
    if y.nrows() != n {
        return Err(Error::shape(
            "linear_probe",
            latents.shape(),
            targets.shape(),
        ));
    }
    if n <= d + 1 {
        return Err(Error::InvalidArgument(format!(
            "linear probe needs more than {} samples, got {n}",
            d + 1
        )));
    }
    // Centering absorbs the intercept and keeps the normal equations well scaled.
    let xm = x.row_mean();
    let ym = y.row_mean();
    let mut xc = x.clone();
    for mut row in xc.row_iter_mut() {
        row -= &xm;
    }
    let mut yc = y.clone();
    for mut row in yc.row_iter_mut() {
        row -= &ym;
    }
    let gram = xc.transpose() * &xc;
    let rhs = xc.transpose() * &yc;
    let eig = SymmetricEigen::new(gram.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let ridge = !(max > 0.0 && min > 1e-12 * max);
    let beta = if ridge {
        let reg = &gram + DMatrix::identity(d, d) * RIDGE_LAMBDA * max.max(1.0);
        reg.cholesky()
            .ok_or_else(|| Error::Domain {
                op: "linear_probe",
                msg: "ridge system is not positive definite".into(),
            })?
            .solve(&rhs)
    } else {
        gram.cholesky()
            .ok_or_else(|| Error::Domain {
                op: "linear_probe",
                msg: "normal equations are singular".into(),
            })?
            .solve(&rhs)
    };
    let resid = &yc - &xc * beta;
    let r2 = (0..y.ncols())
        .map(|j| {
            let ss_tot = yc.column(j).norm_squared();
            if ss_tot == 0.0 {
                0.0
            } else {
                1.0 - resid.column(j).norm_squared() / ss_tot
            }
        })
        .collect();
    Ok(ProbeFit {
        r2,
        ridge_fallback: ridge,
    })
}

/// Stacked observations from random play with the matching true states.
#[derive(Clone, Debug)]
pub struct ProbeSamples {
    /// `[n, stacked_obs]`
    pub obs: Tensor,
    /// `[n, 2·pos_dim]`, positions then velocities.
    pub states: Tensor,
    pub scenes: Vec<u64>,
}

fn uniform_action(spec: &EnvSpec, r: &mut impl Rng) -> Vec<f64> {
    let b = spec.action_bound;
    (0..spec.act_dim())
        .map(|_| r.random_range(-b..=b))
        .collect()
}

/// `n` samples from short random-action episodes on `scenes`.
pub fn collect_samples(
    spec: &EnvSpec,
    scenes: &[u64],
    n: usize,
    seed: u64,
) -> Result<ProbeSamples> {
    if scenes.is_empty() {
        return Err(Error::InvalidArgument("no scenes to sample from".into()));
    }
    let mut env = DistractingPointMass::new(spec.clone())?;
    let mut r = rng::stream(seed, "probe-samples");
    let mut obs = Vec::with_capacity(n * spec.stacked_obs_dim());
    let mut states = Vec::with_capacity(n * 2 * spec.pos_dim);
    let mut scene_log = Vec::with_capacity(n);
    let mut stack = FrameStack::default();
    let steps = PROBE_EPISODE_STEPS.min(spec.episode_length);
    while scene_log.len() < n {
        let scene = *scenes.choose(&mut r).expect("non-empty");
        stack.reset(&env.reset(scene, r.next_u64())?);
        for _ in 0..steps {
            if scene_log.len() == n {
                break;
            }
            let out = env.step(&uniform_action(spec, &mut r))?;
            stack.push(&out.obs);
            obs.extend(stack.stacked());
            states.extend(env.true_state().features());
            scene_log.push(scene);
        }
    }
    Ok(ProbeSamples {
        obs: Tensor::new(vec![n, spec.stacked_obs_dim()], obs)?,
        states: Tensor::new(vec![n, 2 * spec.pos_dim], states)?,
        scenes: scene_log,
    })
}

fn row_distance(a: &Tensor, i: usize, b: &Tensor, j: usize) -> f64 {
    a.row(i)
        .iter()
        .zip(b.row(j))
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Mean latent distance between observations sharing a true state but seen
/// under different distractor scenes, divided by the mean distance between
/// unrelated observations.
pub fn distance_ratio<E>(encode: E, spec: &EnvSpec, pairs: usize, seed: u64) -> Result<f64>
where
    E: Fn(&Tensor) -> Result<Tensor>,
{
    if pairs < 2 {
        return Err(Error::InvalidArgument(format!(
            "distance ratio needs at least 2 pairs, got {pairs}"
        )));
    }
    let mut scenes = spec.eval_scenes.clone();
    if scenes.len() < 2 {
        scenes.extend(&spec.train_scenes);
    }
    if scenes.len() < 2 {
        return Err(Error::InvalidArgument("need two distinct scenes".into()));
    }
    let mut r = rng::stream(seed, "distance-ratio");
    let mut env_a = DistractingPointMass::new(spec.clone())?;
    let mut env_b = DistractingPointMass::new(spec.clone())?;
    let dim = spec.stacked_obs_dim();
    let mut obs_a = Vec::with_capacity(pairs * dim);
    let mut obs_b = Vec::with_capacity(pairs * dim);
    let max_steps = PROBE_EPISODE_STEPS.min(spec.episode_length);
    for _ in 0..pairs {
        let picked: Vec<u64> = scenes.choose_multiple(&mut r, 2).copied().collect();
        let episode = r.next_u64();
        let (mut sa, mut sb) = (FrameStack::default(), FrameStack::default());
        sa.reset(&env_a.reset(picked[0], episode)?);
        sb.reset(&env_b.reset(picked[1], episode)?);
        for _ in 0..r.random_range(1..=max_steps) {
            let act = uniform_action(spec, &mut r);
            sa.push(&env_a.step(&act)?.obs);
            sb.push(&env_b.step(&act)?.obs);
        }
        obs_a.extend(sa.stacked());
        obs_b.extend(sb.stacked());
    }
    let za = encode(&Tensor::new(vec![pairs, dim], obs_a)?)?;
    let zb = encode(&Tensor::new(vec![pairs, dim], obs_b)?)?;
    let offset = r.random_range(1..pairs);
    let (mut matched, mut random) = (0.0, 0.0);
    for i in 0..pairs {
        matched += row_distance(&za, i, &zb, i);
        random += row_distance(&za, i, &zb, (i + offset) % pairs);
    }
    if random == 0.0 {
        return Err(Error::Domain {
            op: "distance_ratio",
            msg: "encoder maps every observation to one point".into(),
        });
    }
    Ok(matched / random)
}

#[derive(Clone, Debug)]
pub struct Pca {
    /// `[n, 2]`
    pub projection: Tensor,
    /// Principal directions, largest variance first.
    pub components: [Vec<f64>; 2],
    pub explained_ratio: [f64; 2],
}

/// Projection onto the top two principal components. Each component is
/// signed so that its largest-magnitude loading is positive.
pub fn pca_2d(latents: &Tensor) -> Result<Pca> {
    let x = to_matrix(latents)?;
    let (n, d) = x.shape();
    if n < 2 || d < 2 {
        return Err(Error::InvalidArgument(format!(
            "PCA needs at least 2 samples and 2 dims, got {n}x{d}"
        )));
    }
    let mean = x.row_mean();
    let mut xc = x;
    for mut row in xc.row_iter_mut() {
        row -= &mean;
    }
    let cov = xc.transpose() * &xc / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let pick = |k: usize| -> (DVector<f64>, f64) {
        let mut v = eig.eigenvectors.column(order[k]).into_owned();
        let lead = v
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0);
        if lead < 0.0 {
            v = -v;
        }
        let ratio = if total > 0.0 {
            eig.eigenvalues[order[k]].max(0.0) / total
        } else {
            0.0
        };
        (v, ratio)
    };
    let (v0, r0) = pick(0);
    let (v1, r1) = pick(1);
    let p0 = &xc * &v0;
    let p1 = &xc * &v1;
    let data = (0..n).flat_map(|i| [p0[i], p1[i]]).collect();
    Ok(Pca {
        projection: Tensor::new(vec![n, 2], data)?,
        components: [v0.iter().copied().collect(), v1.iter().copied().collect()],
        explained_ratio: [r0, r1],
    })
}

/// Min of the twin critics at the policy mean action, one per latent row.
pub fn value_estimates(agent: &Agent, store: &ParamStore, latents: &Tensor) -> Result<Vec<f64>> {
    let actions = agent.actor.mean_action(store, latents)?;
    let mut g = Graph::new();
    let z = g.constant(latents.clone());
    let a = g.constant(actions);
    let (q1, q2) = agent.critics.both(&mut g, store, z, a, Mode::Frozen)?;
    Ok(g.value(q1)
        .data()
        .iter()
        .zip(g.value(q2).data())
        .map(|(a, b)| a.min(*b))
        .collect())
}

/// Writes `n` latents from random play on the evaluation scenes as CSV:
/// `latent_*`, `pos_*`, `vel_*`, `scene`, `value`.
pub fn export_latents(
    agent: &Agent,
    store: &ParamStore,
    spec: &EnvSpec,
    n: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let latent = agent.encoder.latent_dim();
    let mut header: Vec<String> = (0..latent).map(|i| format!("latent_{i}")).collect();
    header.extend((0..spec.pos_dim).map(|i| format!("pos_{i}")));
    header.extend((0..spec.pos_dim).map(|i| format!("vel_{i}")));
    header.push("scene".into());
    header.push("value".into());

    let mut w = csv::Writer::from_path(out).map_err(csv_error)?;
    w.write_record(&header).map_err(csv_error)?;
    if n > 0 {
        let samples = collect_samples(spec, &spec.eval_scenes, n, seed)?;
        let z = agent.encode(store, &samples.obs)?;
        let values = value_estimates(agent, store, &z)?;
        for (i, (scene, value)) in samples.scenes.iter().zip(&values).enumerate() {
            let mut row: Vec<String> = z.row(i).iter().map(f64::to_string).collect();
            row.extend(samples.states.row(i).iter().map(f64::to_string));
            row.push(scene.to_string());
            row.push(value.to_string());
            w.write_record(&row).map_err(csv_error)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("csv: {other:?}")),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub r_squared: Vec<f64>,
    pub mean_r_squared: f64,
    pub distance_ratio: f64,
    pub n_samples: usize,
    pub checkpoint: String,
    pub ridge_fallback: bool,
}

/// Linear probe on the evaluation scenes plus the distance ratio.
pub fn probe_report(
    agent: &Agent,
    store: &ParamStore,
    spec: &EnvSpec,
    n: usize,
    pairs: usize,
    seed: u64,
    checkpoint: &str,
) -> Result<ProbeReport> {
    let samples = collect_samples(spec, &spec.eval_scenes, n, seed)?;
    let z = agent.encode(store, &samples.obs)?;
    let fit = linear_probe(&z, &samples.states)?;
    let ratio = distance_ratio(|o| agent.encode(store, o), spec, pairs, seed)?;
    Ok(ProbeReport {
        mean_r_squared: fit.mean_r2(),
        r_squared: fit.r2,
        distance_ratio: ratio,
        n_samples: n,
        checkpoint: checkpoint.to_string(),
        ridge_fallback: fit.ridge_fallback,
    })
}
