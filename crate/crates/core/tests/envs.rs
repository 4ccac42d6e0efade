use dsr_core::envs::{demix, DistractingPointMass, EnvSpec, RewardKind};

fn env() -> DistractingPointMass {
    DistractingPointMass::new(EnvSpec::default()).unwrap()
}

#[test]
fn five_steps_match_scalar_integration() {
    let spec = EnvSpec::default();
    let mut e = env();
    e.reset(0, 42).unwrap();
    let start = e.true_state();
    let action = [0.6, -0.3];
    let (mut px, mut py) = (start.pos[0], start.pos[1]);
    let (mut vx, mut vy) = (start.vel[0], start.vel[1]);
    for _ in 0..5 {
        let out = e.step(&action).unwrap();
        px += vx * spec.dt;
        py += vy * spec.dt;
        vx = (1.0 - spec.friction) * vx + 0.6 * spec.dt;
        vy = (1.0 - spec.friction) * vy - 0.3 * spec.dt;
        let s = e.true_state();
        assert!((s.pos[0] - px).abs() < 1e-12 && (s.pos[1] - py).abs() < 1e-12);
        assert!((s.vel[0] - vx).abs() < 1e-12 && (s.vel[1] - vy).abs() < 1e-12);
        let dist = ((px - 0.5).powi(2) + (py + 0.5).powi(2)).sqrt();
        assert!((out.reward + dist).abs() < 1e-12);
        let back = demix(e.mixer(), &out.obs);
        for (a, b) in back[..4].iter().zip(s.features()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn resets_stay_finite_and_within_bounds() {
    let spec = EnvSpec::default();
    let mut e = env();
    let scenes: Vec<u64> = spec
        .train_scenes
        .iter()
        .chain(&spec.eval_scenes)
        .copied()
        .collect();
    for i in 0..1000u64 {
        let scene = scenes[i as usize % scenes.len()];
        let obs = e.reset(scene, i).unwrap();
        assert!(obs.iter().all(|v| v.is_finite()));
        // orthogonal mixing preserves the norm of [pos, vel, distractor]
        let x = e.latent_vector();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!((norm(&obs) - norm(&x)).abs() < 1e-9);
        let back = demix(e.mixer(), &obs);
        for k in 0..spec.pos_dim {
            assert!(back[k].abs() <= spec.pos_bound + 1e-9);
            assert!(back[spec.pos_dim + k].abs() <= spec.init_vel + 1e-9);
        }
    }
}

#[test]
fn scene_changes_leave_rewards_and_dones_bit_identical() {
    for reward in [RewardKind::Dense, RewardKind::Sparse] {
        let spec = EnvSpec {
            reward,
            episode_length: 60,
            ..EnvSpec::default()
        };
        let mut a = DistractingPointMass::new(spec.clone()).unwrap();
        let mut b = DistractingPointMass::new(spec).unwrap();
        a.reset(0, 9).unwrap();
        b.reset(1017, 9).unwrap();
        let mut t = 0.0f64;
        loop {
            let act = [t.sin(), (0.7 * t).cos()];
            let (oa, ob) = (a.step(&act).unwrap(), b.step(&act).unwrap());
            assert_eq!(oa.reward.to_bits(), ob.reward.to_bits());
            assert_eq!(oa.done, ob.done);
            assert_eq!(a.true_state(), b.true_state());
            assert_ne!(a.distractor_state(), b.distractor_state());
            if oa.done {
                break;
            }
            t += 0.3;
        }
        assert_eq!(a.elapsed(), 60);
    }
}

#[test]
fn done_exactly_at_episode_length() {
    let mut e = env();
    e.reset(1, 3).unwrap();
    for t in 1..=200 {
        let out = e.step(&[0.1, 0.1]).unwrap();
        assert_eq!(out.done, t == 200);
    }
}
