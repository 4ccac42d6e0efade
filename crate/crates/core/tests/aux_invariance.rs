//! With an encoder that reads only the task state, the action and reward
//! prediction losses and the overshooting KL cannot tell distractor scenes
//! apart.

use dsr_core::autodiff::{Graph, ParamStore, Tensor};
use dsr_core::buffer::{ReplayBuffer, Transition};
use dsr_core::dsr::{total_aux_loss, AuxInputs, DsrHeads, Encoder, HeadShape};
use dsr_core::dtft::OmegaGrid;
use dsr_core::envs::{DistractingPointMass, EnvSpec, FrameStack, STACK_FRAMES};
use dsr_core::nn::Activation;
use dsr_core::rng;

const STATE: usize = 4;
const SEQ_LEN: usize = 3;

fn spec() -> EnvSpec {
    EnvSpec {
        episode_length: 25,
        distractor_dim: 6,
        ..EnvSpec::default()
    }
}

/// Linear encoder returning the demixed `[pos, vel]` of the newest frame.
fn oracle_encoder(store: &mut ParamStore, name: &str, env: &DistractingPointMass) -> Encoder {
    let n = env.spec().obs_dim();
    let input = STACK_FRAMES * n;
    let mut r = rng::stream(0, "unused");
    let enc = Encoder::new(store, &mut r, name, input, &[], STATE, Activation::Identity).unwrap();
    let mixer = env.mixer();
    let mut w = vec![0.0; input * STATE];
    for row in 0..n {
        for j in 0..STATE {
            w[((STACK_FRAMES - 1) * n + row) * STATE + j] = mixer[row * n + j];
        }
    }
    let layer = &enc.mlp().layers()[0];
    store
        .set_value(layer.weight, Tensor::matrix(input, STATE, w).unwrap())
        .unwrap();
    store
        .set_value(layer.bias, Tensor::vector(vec![0.0; STATE]))
        .unwrap();
    enc
}

fn fill(scene: u64) -> (ReplayBuffer, DistractingPointMass) {
    let mut env = DistractingPointMass::new(spec()).unwrap();
    let mut buf = ReplayBuffer::new(10_000).unwrap();
    let mut stack = FrameStack::default();
    for ep in 0..6u64 {
        stack.reset(&env.reset(scene, 100 + ep).unwrap());
        let mut t = 0usize;
        loop {
            let obs = stack.stacked();
            let x = (ep * 31 + t as u64) as f64;
            let action = vec![(0.9 * x).sin(), (0.4 * x).cos()];
            let out = env.step(&action).unwrap();
            stack.push(&out.obs);
            buf.push(
                Transition {
                    obs,
                    action,
                    reward: out.reward,
                    next_obs: stack.stacked(),
                    done: out.done,
                    terminal: false,
                },
                ep,
            );
            t += 1;
            if out.done {
                break;
            }
        }
    }
    (buf, env)
}

/// `[d_im, d_rm, kl]` on scene data, with the oracle or a random encoder.
fn losses(scene: u64, oracle: bool) -> [f64; 3] {
    let grid = OmegaGrid::new(8).unwrap();
    let (buf, env) = fill(scene);
    let mut store = ParamStore::new();
    let (enc, tgt) = if oracle {
        (
            oracle_encoder(&mut store, "enc", &env),
            oracle_encoder(&mut store, "enc_tgt", &env),
        )
    } else {
        let input = STACK_FRAMES * env.spec().obs_dim();
        let mut r = rng::stream(1, "random-encoder");
        let mut make = |name| {
            Encoder::new(
                &mut store,
                &mut r,
                name,
                input,
                &[16],
                STATE,
                Activation::Tanh,
            )
            .unwrap()
        };
        (make("enc"), make("enc_tgt"))
    };
    let shape = HeadShape {
        latent: STATE,
        act: 2,
        obs: STACK_FRAMES * env.spec().obs_dim(),
        seq_len: SEQ_LEN,
        grid_points: grid.len(),
        hidden: &[16],
    };
    let mut r = rng::stream(5, "heads");
    let heads = DsrHeads {
        reward: Some(DsrHeads::reward_head(&mut store, &mut r, shape).unwrap()),
        inverse: Some(DsrHeads::inverse_head(&mut store, &mut r, shape).unwrap()),
        transition: Some(DsrHeads::transition_model(&mut store, &mut r, shape).unwrap()),
        decoder: Some(DsrHeads::decoder(&mut store, &mut r, shape).unwrap()),
    };
    let seq = buf
        .sample_sequences(32, SEQ_LEN, &mut rng::stream(9, "windows"))
        .unwrap();
    let eps = Tensor::full(&[32, STATE], 0.25);
    let inputs = AuxInputs {
        encoder: &enc,
        target_encoder: &tgt,
        heads: &heads,
        grid: &grid,
        delta: 1.0,
        eps: &eps,
    };
    let mut g = Graph::new();
    let l = total_aux_loss(&mut g, &store, &inputs, &seq).unwrap();
    let get = |v| g.value(v).item().unwrap();
    [
        get(l.inverse.unwrap()),
        get(l.reward.unwrap()),
        get(l.forward.unwrap().kl),
    ]
}

#[test]
fn oracle_encoder_losses_do_not_depend_on_the_scene() {
    let (a, b) = (losses(0, true), losses(1, true));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{x} vs {y}");
    }
}

#[test]
fn encoder_reading_the_distractor_sees_the_scene() {
    let (a, b) = (losses(0, false), losses(1, false));
    assert!(
        a.iter().zip(&b).all(|(x, y)| (x - y).abs() > 1e-6),
        "{a:?} vs {b:?}"
    );
}
