mod common;

use std::fs;
use std::process::Command;

use dsr_core::autodiff::Tensor;
use dsr_core::probe::export_latents;
use dsr_core::trainer::{evaluate, read_metrics, run, SavedRun, METRICS_FILE};

use common::tiny;

#[test]
fn no_gradient_steps_while_exploring() {
    let mut cfg = tiny();
    cfg.schedule.exploration_steps = cfg.schedule.total_steps;
    let out = run(&cfg, 0, None).unwrap();
    assert_eq!(out.info.gradient_steps, 0);
    assert!(out
        .records
        .iter()
        .all(|r| r.critic.is_none() && r.delta.is_none()));
}

#[test]
fn records_land_on_log_and_eval_steps() {
    let cfg = tiny();
    let out = run(&cfg, 1, None).unwrap();
    let steps: Vec<u64> = out.records.iter().map(|r| r.step).collect();
    assert_eq!(steps, [0, 100, 200, 300, 400]);
    for r in &out.records {
        assert_eq!(r.eval_return_mean.is_some(), r.step % 200 == 0);
    }
    // interleaved schedule: one update every second step after exploration
    assert_eq!(out.info.gradient_steps, 150);
    assert_eq!(out.final_record().episodes, 10);
}

#[test]
fn two_phase_schedule_updates_after_each_episode_group() {
    let mut cfg = tiny();
    cfg.schedule.two_phase = true;
    cfg.schedule.collect_episodes = 2;
    cfg.schedule.gradient_steps = 7;
    let out = run(&cfg, 0, None).unwrap();
    // episodes end at steps 40, 80, ...; groups of two close at 80, 160, ...
    // and only those after exploration (step > 100) trigger updates
    assert_eq!(out.info.gradient_steps, 7 * 4);
}

#[test]
fn checkpoint_reloads_the_trained_learner() {
    let cfg = tiny();
    let dir = tempfile::tempdir().unwrap();
    let out = run(&cfg, 4, Some(dir.path())).unwrap();
    let saved = SavedRun::load(dir.path()).unwrap();
    assert_eq!(saved.info, out.info);
    assert_eq!(saved.config, cfg);
    let obs = Tensor::full(&[2, cfg.env.stacked_obs_dim()], 0.3);
    let l = &out.learner;
    assert_eq!(
        saved
            .learner
            .agent
            .encode(&saved.learner.store, &obs)
            .unwrap(),
        l.agent.encode(&l.store, &obs).unwrap()
    );
    let e = evaluate(
        &saved.policy(),
        &cfg.env,
        &cfg.env.eval_scenes,
        cfg.schedule.eval_episodes,
        4,
    )
    .unwrap();
    assert_eq!(Some(e.mean), out.final_record().eval_return_mean);
    let logged = read_metrics(&dir.path().join(METRICS_FILE)).unwrap();
    assert_eq!(logged, out.records);
}

#[test]
fn latent_export_rows_and_reproducibility() {
    let cfg = tiny();
    let out = run(&cfg, 2, None).unwrap();
    let (agent, store) = (&out.learner.agent, &out.learner.store);
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = ["a.csv", "b.csv", "empty.csv"]
        .iter()
        .map(|n| dir.path().join(n))
        .collect();
    export_latents(agent, store, &cfg.env, 120, 3, &paths[0]).unwrap();
    export_latents(agent, store, &cfg.env, 120, 3, &paths[1]).unwrap();
    export_latents(agent, store, &cfg.env, 0, 3, &paths[2]).unwrap();
    let a = fs::read(&paths[0]).unwrap();
    assert_eq!(a, fs::read(&paths[1]).unwrap());
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 6 + 4 + 2);
    assert_eq!(header[0], "latent_0");
    assert_eq!(&header[10..], ["scene", "value"]);
    assert_eq!(lines.count(), 120);
    let empty = fs::read_to_string(&paths[2]).unwrap();
    assert_eq!(empty.lines().count(), 1);
}

#[test]
fn cli_trains_evaluates_and_probes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("tiny.toml");
    fs::write(&cfg_path, tiny().to_toml().unwrap()).unwrap();
    let bin = env!("CARGO_BIN_EXE_dsr");
    let run_dir = dir.path().join("run");
    let ok = |args: &[&str]| {
        let o = Command::new(bin).args(args).output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    let p = |p: &std::path::Path| p.to_str().unwrap().to_owned();
    let train = ok(&[
        "train",
        "--config",
        &p(&cfg_path),
        "--seed",
        "5",
        "--out",
        &p(&run_dir),
        "--ablate",
        "rm",
    ]);
    let last: serde_json::Value = serde_json::from_str(train.trim()).unwrap();
    assert_eq!(last["step"], 400);
    assert!(last["d_rm"].is_null() && last["d_im"].is_number());

    let eval = ok(&[
        "eval",
        "--checkpoint",
        &p(&run_dir),
        "--episodes",
        "2",
        "--seed",
        "5",
    ]);
    let eval: serde_json::Value = serde_json::from_str(eval.trim()).unwrap();
    assert_eq!(eval["mean"], last["eval_return_mean"]);

    let csv = dir.path().join("z.csv");
    let probe = ok(&[
        "probe",
        "--checkpoint",
        &p(&run_dir),
        "--out",
        &p(&csv),
        "--samples",
        "200",
        "--pairs",
        "50",
    ]);
    let report: serde_json::Value = serde_json::from_str(&probe).unwrap();
    assert_eq!(report["r_squared"].as_array().unwrap().len(), 4);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 201);

    let o = Command::new(bin)
        .args(["eval", "--checkpoint", &p(&run_dir), "--scenes", "0"])
        .output()
        .unwrap();
    assert!(!o.status.success());
    let o = Command::new(bin)
        .args(["train", "--out", &p(&run_dir), "--ablate", "xyz"])
        .output()
        .unwrap();
    assert!(!o.status.success());
}
