use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::autodiff::{checkpoint, Tensor};
use crate::buffer::{ReplayBuffer, Transition};
use crate::envs::{DistractingPointMass, FrameStack};
use crate::error::{Error, Result};
use crate::probe::{collect_samples, linear_probe, ProbeSamples};
use crate::rng;

use super::config::RunConfig;
use super::eval::{evaluate, MeanPolicy};
use super::learner::{streams, Learner, UpdateRngs};
use super::metrics::{Accumulator, MetricsRecord, MetricsWriter, StepLosses};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const CHECKPOINT_DIR: &str = "checkpoint";
pub const CONFIG_FILE: &str = "config.toml";
pub const RUN_FILE: &str = "run.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunInfo {
    pub seed: u64,
    pub step: u64,
    pub gradient_steps: u64,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub records: Vec<MetricsRecord>,
    pub learner: Learner,
    pub buffer: ReplayBuffer,
    pub info: RunInfo,
}

impl RunOutcome {
    pub fn final_record(&self) -> &MetricsRecord {
        self.records
            .last()
            .expect("a run always logs its last step")
    }
}

/// Trains one seed. With `out`, writes `metrics.jsonl` and a checkpoint
/// below it.
pub fn run(cfg: &RunConfig, seed: u64, out: Option<&Path>) -> Result<RunOutcome> {
    run_observed(cfg, seed, out, |_| {})
}

/// [`run`], calling `observe` after every gradient step.
pub fn run_observed<F>(
    cfg: &RunConfig,
    seed: u64,
    out: Option<&Path>,
    mut observe: F,
) -> Result<RunOutcome>
where
    F: FnMut(&StepLosses),
{
    cfg.validate()?;
    let spec = &cfg.env;
    let sched = &cfg.schedule;
    let mut learner = Learner::new(cfg, seed)?;
    let mut buffer = ReplayBuffer::new(sched.buffer_capacity)?;
    let mut env = DistractingPointMass::new(spec.clone())?;
    let mut explore = rng::stream(seed, streams::EXPLORE);
    let mut policy_rng = rng::stream(seed, streams::POLICY);
    let mut episode_rng = rng::stream(seed, streams::EPISODES);
    let mut update_rngs = UpdateRngs::new(seed);

    let mut writer = match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            Some(MetricsWriter::create(&dir.join(METRICS_FILE))?)
        }
        None => None,
    };
    let probe = if cfg.logging.probe_samples > 0 {
        Some(collect_samples(
            spec,
            &spec.eval_scenes,
            cfg.logging.probe_samples,
            rng::derive_seed(seed, streams::PROBE),
        )?)
    } else {
        None
    };
    let started = Instant::now();
    let mut records = Vec::new();
    let mut acc = Accumulator::default();
    let mut emit = |learner: &Learner,
                    acc: &mut Accumulator,
                    step: u64,
                    episodes: u64,
                    gradient_steps: u64,
                    with_eval: bool|
     -> Result<()> {
        let mut rec = MetricsRecord {
            step,
            episodes,
            gradient_steps,
            ..MetricsRecord::default()
        };
        acc.drain_into(&mut rec);
        if with_eval {
            let policy = MeanPolicy {
                agent: &learner.agent,
                store: &learner.store,
            };
            let e = evaluate(&policy, spec, &spec.eval_scenes, sched.eval_episodes, seed)?;
            rec.eval_return_mean = Some(e.mean);
            rec.eval_return_std = Some(e.std);
            if let Some(p) = &probe {
                rec.probe_r2 = Some(probe_r2(learner, p)?);
            }
        }
        if cfg.logging.wall_clock {
            rec.wall_clock = Some(started.elapsed().as_secs_f64());
        }
        if let Some(w) = writer.as_mut() {
            w.write(&rec)?;
        }
        records.push(rec);
        Ok(())
    };

    let mut stack = FrameStack::default();
    let mut start_episode =
        |env: &mut DistractingPointMass, stack: &mut FrameStack| -> Result<()> {
            let scene = *spec
                .train_scenes
                .choose(&mut episode_rng)
                .expect("validated");
            stack.reset(&env.reset(scene, episode_rng.next_u64())?);
            Ok(())
        };
    start_episode(&mut env, &mut stack)?;

    let (mut episode_id, mut episodes_done, mut phase_episodes) = (0u64, 0u64, 0usize);
    let mut gradient_steps = 0u64;
    let mut episode_return = 0.0;
    let bound = spec.action_bound;
    emit(&learner, &mut acc, 0, 0, 0, true)?;
    for step in 1..=sched.total_steps {
        let obs = stack.stacked();
        let action: Vec<f64> = if step <= sched.exploration_steps {
            (0..spec.act_dim())
                .map(|_| explore.random_range(-bound..=bound))
                .collect()
        } else {
            learner
                .agent
                .act_sample(&learner.store, &obs, &mut policy_rng)?
        };
        let outcome = env.step(&action)?;
        episode_return += outcome.reward;
        stack.push(&outcome.obs);
        buffer.push(
            Transition {
                obs,
                action,
                reward: outcome.reward,
                next_obs: stack.stacked(),
                done: outcome.done,
                // episodes end on the time limit only
                terminal: false,
            },
            episode_id,
        );
        if outcome.done {
            acc.add_return(episode_return);
            episode_return = 0.0;
            episodes_done += 1;
            phase_episodes += 1;
            episode_id += 1;
            start_episode(&mut env, &mut stack)?;
        }

        let updates = if sched.two_phase {
            if outcome.done && phase_episodes >= sched.collect_episodes {
                phase_episodes = 0;
                sched.gradient_steps
            } else {
                0
            }
        } else if step % cfg.agent.update_every == 0 {
            1
        } else {
            0
        };
        if step > sched.exploration_steps && buffer.len() >= learner.batch_size() {
            for _ in 0..updates {
                let l = learner.gradient_step(&buffer, &mut update_rngs)?;
                observe(&l);
                acc.add_step(&l);
                gradient_steps += 1;
            }
        }

        let is_eval = step % sched.eval_interval == 0 || step == sched.total_steps;
        if is_eval || step % sched.log_interval == 0 {
            emit(
                &learner,
                &mut acc,
                step as u64,
                episodes_done,
                gradient_steps,
                is_eval,
            )?;
        }
    }

    let info = RunInfo {
        seed,
        step: sched.total_steps as u64,
        gradient_steps,
    };
    if let Some(dir) = out {
        save_checkpoint(&learner, cfg, info, &dir.join(CHECKPOINT_DIR))?;
    }
    Ok(RunOutcome {
        records,
        learner,
        buffer,
        info,
    })
}

/// Mean linear-probe R² of the learner's latents on fixed samples.
pub fn probe_r2(learner: &Learner, samples: &ProbeSamples) -> Result<f64> {
    let z: Tensor = learner.agent.encode(&learner.store, &samples.obs)?;
    Ok(linear_probe(&z, &samples.states)?.mean_r2())
}

/// Parameters, the effective run configuration and the run position.
pub fn save_checkpoint(
    learner: &Learner,
    cfg: &RunConfig,
    info: RunInfo,
    dir: &Path,
) -> Result<()> {
    checkpoint::save(&learner.store, dir)?;
    fs::write(dir.join(CONFIG_FILE), cfg.to_toml()?)?;
    fs::write(dir.join(RUN_FILE), serde_json::to_string_pretty(&info)?)?;
    Ok(())
}

/// A checkpoint rebuilt into a live learner.
#[derive(Debug)]
pub struct SavedRun {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub info: RunInfo,
    pub learner: Learner,
}

impl SavedRun {
    /// Accepts a checkpoint directory or a run directory containing one.
    pub fn load(path: &Path) -> Result<Self> {
        let dir = if path.join(CHECKPOINT_DIR).is_dir() {
            path.join(CHECKPOINT_DIR)
        } else {
            path.to_path_buf()
        };
        if !dir.join(RUN_FILE).is_file() {
            return Err(Error::Checkpoint {
                path: dir,
                msg: format!("missing {RUN_FILE}"),
            });
        }
        let config = RunConfig::load(&dir.join(CONFIG_FILE))?;
        let info: RunInfo = serde_json::from_str(&fs::read_to_string(dir.join(RUN_FILE))?)?;
        let mut learner = Learner::new(&config, info.seed)?;
        checkpoint::load_into(&mut learner.store, &dir)?;
        Ok(Self {
            dir,
            config,
            info,
            learner,
        })
    }

    pub fn policy(&self) -> MeanPolicy<'_> {
        MeanPolicy {
            agent: &self.learner.agent,
            store: &self.learner.store,
        }
    }
}
