#![allow(dead_code)]

use std::path::PathBuf;

use dsr_core::autodiff::ParamStore;
use dsr_core::buffer::{ReplayBuffer, Transition};
use dsr_core::envs::{DistractingPointMass, FrameStack};
use dsr_core::rng;
use dsr_core::sac::{Agent, EncoderSpec};
use dsr_core::trainer::RunConfig;
use rand::seq::IndexedRandom;
use rand::{Rng, RngCore};

pub fn shipped_config(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    RunConfig::load(&path).unwrap()
}

/// A run short enough to repeat many times in one test.
pub fn tiny() -> RunConfig {
    RunConfig::from_toml(
        r#"
        [env]
        episode_length = 40
        distractor_dim = 4
        eval_scenes = [1000, 1001]
        [dsr]
        latent_dim = 6
        encoder_hidden = [16]
        head_hidden = [16]
        grid_points = 6
        [agent]
        hidden = [16]
        batch_size = 16
        [schedule]
        total_steps = 400
        exploration_steps = 100
        eval_interval = 200
        eval_episodes = 2
        log_interval = 100
        "#,
    )
    .unwrap()
}

/// `(critic, actor, alpha)` after every gradient step of a SAC loop written
/// directly against [`Agent`], with no auxiliary machinery at all.
pub fn plain_sac_losses(cfg: &RunConfig, seed: u64) -> Vec<(f64, f64, f64)> {
    let spec = &cfg.env;
    let sched = &cfg.schedule;
    let mut store = ParamStore::new();
    let enc = EncoderSpec {
        input: spec.stacked_obs_dim(),
        hidden: cfg.dsr.encoder_hidden.clone(),
        latent: cfg.dsr.latent_dim,
        output: cfg.dsr.encoder_output,
        tau: cfg.dsr.tau_encoder,
    };
    let mut agent = Agent::new(
        &mut store,
        seed,
        &enc,
        spec.act_dim(),
        spec.action_bound,
        cfg.agent.clone(),
    )
    .unwrap();
    let mut env = DistractingPointMass::new(spec.clone()).unwrap();
    let mut buffer = ReplayBuffer::new(sched.buffer_capacity).unwrap();
    let mut explore = rng::stream(seed, "explore");
    let mut policy = rng::stream(seed, "policy");
    let mut episodes = rng::stream(seed, "episodes");
    let mut replay = rng::stream(seed, "replay");
    let mut sac = rng::stream(seed, "sac-update");

    let mut stack = FrameStack::default();
    let mut reset = |env: &mut DistractingPointMass, stack: &mut FrameStack| {
        let scene = *spec.train_scenes.choose(&mut episodes).unwrap();
        stack.reset(&env.reset(scene, episodes.next_u64()).unwrap());
    };
    reset(&mut env, &mut stack);
    let mut episode = 0u64;
    let mut out = Vec::new();
    for step in 1..=sched.total_steps {
        let obs = stack.stacked();
        let action = if step <= sched.exploration_steps {
            let b = spec.action_bound;
            (0..spec.act_dim())
                .map(|_| explore.random_range(-b..=b))
                .collect()
        } else {
            agent.act_sample(&store, &obs, &mut policy).unwrap()
        };
        let o = env.step(&action).unwrap();
        stack.push(&o.obs);
        buffer.push(
            Transition {
                obs,
                action,
                reward: o.reward,
                next_obs: stack.stacked(),
                done: o.done,
                terminal: false,
            },
            episode,
        );
        if o.done {
            episode += 1;
            reset(&mut env, &mut stack);
        }
        if step > sched.exploration_steps
            && step % cfg.agent.update_every == 0
            && buffer.len() >= cfg.agent.batch_size
        {
            let batch = buffer
                .sample_transitions(cfg.agent.batch_size, &mut replay)
                .unwrap();
            let c = agent.update_critic(&mut store, &batch, &mut sac).unwrap();
            let a = agent.update_actor(&mut store, &batch, &mut sac).unwrap();
            agent.update_targets(&mut store).unwrap();
            out.push((c.loss, a.loss, a.alpha));
        }
    }
    out
}
