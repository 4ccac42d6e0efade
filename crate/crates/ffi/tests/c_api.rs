use std::ffi::{c_char, CString};
use std::ptr;

use dsr_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0u8; 512];
    let n = unsafe { dsr_last_error(buf.as_mut_ptr().cast::<c_char>(), buf.len()) };
    buf.truncate(n.min(511));
    String::from_utf8(buf).unwrap()
}

fn new_env(config: Option<&str>) -> *mut DsrEnv {
    let text = config.map(|c| CString::new(c).unwrap());
    let mut env = ptr::null_mut();
    let status =
        unsafe { dsr_env_new(text.as_ref().map_or(ptr::null(), |c| c.as_ptr()), &mut env) };
    assert_eq!(status, DsrStatus::Ok, "{}", last_error());
    env
}

#[test]
fn env_round_trip_through_the_c_api() {
    let env = new_env(None);
    let (mut obs_dim, mut act_dim) = (0usize, 0usize);
    unsafe {
        assert_eq!(dsr_env_dims(env, &mut obs_dim, &mut act_dim), DsrStatus::Ok);
        assert_eq!((obs_dim, act_dim), (20, 2));
        let mut obs = vec![0.0; obs_dim];
        assert_eq!(
            dsr_env_reset(env, 0, 5, obs.as_mut_ptr(), obs.len()),
            DsrStatus::Ok
        );
        let mut state = [0.0; 4];
        assert_eq!(
            dsr_env_true_state(env, state.as_mut_ptr(), 4),
            DsrStatus::Ok
        );
        let action = [0.0, 0.0];
        let (mut reward, mut done) = (0.0, false);
        let mut steps = 0;
        while !done {
            let s = dsr_env_step(
                env,
                action.as_ptr(),
                2,
                obs.as_mut_ptr(),
                obs.len(),
                &mut reward,
                &mut done,
            );
            assert_eq!(s, DsrStatus::Ok);
            assert!(reward <= 0.0);
            steps += 1;
        }
        assert_eq!(steps, 200);
        let s = dsr_env_step(
            env,
            action.as_ptr(),
            2,
            obs.as_mut_ptr(),
            obs.len(),
            &mut reward,
            &mut done,
        );
        assert_eq!(s, DsrStatus::Env);
        assert!(last_error().contains("after episode end"));
        let mut stacked = vec![0.0; 3 * obs_dim];
        assert_eq!(
            dsr_env_stacked_obs(env, stacked.as_mut_ptr(), stacked.len()),
            DsrStatus::Ok
        );
        assert_eq!(&stacked[2 * obs_dim..], obs.as_slice());
        dsr_env_free(env);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let env = new_env(Some("[env]\ndistractor_dim = 4\n"));
    unsafe {
        let mut obs = vec![0.0; 8];
        assert_eq!(
            dsr_env_reset(env, 999, 0, obs.as_mut_ptr(), 8),
            DsrStatus::Env
        );
        assert!(last_error().contains("999"));
        assert_eq!(
            dsr_env_reset(env, 0, 0, obs.as_mut_ptr(), 3),
            DsrStatus::BadLength
        );
        assert_eq!(
            dsr_env_reset(env, 0, 0, ptr::null_mut(), 8),
            DsrStatus::NullPointer
        );
        assert_eq!(
            dsr_env_reset(ptr::null_mut(), 0, 0, obs.as_mut_ptr(), 8),
            DsrStatus::NullPointer
        );
        dsr_env_free(env);
        dsr_env_free(ptr::null_mut());

        let bad = CString::new("[env]\npos_dim = 0\n").unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(dsr_env_new(bad.as_ptr(), &mut out), DsrStatus::Config);
        assert!(last_error().contains("env.pos_dim"));
        assert!(out.is_null());
    }
}

#[test]
fn error_buffer_truncates_and_reports_length() {
    let env = new_env(None);
    unsafe {
        let mut obs = [0.0; 20];
        dsr_env_reset(env, 12345, 0, obs.as_mut_ptr(), 20);
        let full = dsr_last_error(ptr::null_mut(), 0);
        assert!(full > 8);
        let mut small = [1 as c_char; 5];
        assert_eq!(dsr_last_error(small.as_mut_ptr(), 5), full);
        assert_eq!(small[4], 0);
        dsr_env_free(env);
    }
}

#[test]
fn train_then_load_policy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CString::new(
        "[env]\nepisode_length = 20\ndistractor_dim = 2\neval_scenes = [7]\n\
         [dsr]\nlatent_dim = 4\nencoder_hidden = [8]\nhead_hidden = [8]\n\
         [agent]\nhidden = [8]\nbatch_size = 8\n\
         [schedule]\ntotal_steps = 60\nexploration_steps = 20\neval_interval = 60\neval_episodes = 1\n",
    )
    .unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut final_eval = 0.0;
    unsafe {
        let s = dsr_train(cfg.as_ptr(), 3, out.as_ptr(), &mut final_eval);
        assert_eq!(s, DsrStatus::Ok, "{}", last_error());
        assert!(final_eval.is_finite());

        let mut policy = ptr::null_mut();
        assert_eq!(
            dsr_policy_load(out.as_ptr(), &mut policy),
            DsrStatus::Ok,
            "{}",
            last_error()
        );
        let (mut s_dim, mut a_dim, mut l_dim) = (0, 0, 0);
        assert_eq!(
            dsr_policy_dims(policy, &mut s_dim, &mut a_dim, &mut l_dim),
            DsrStatus::Ok
        );
        assert_eq!((s_dim, a_dim, l_dim), (3 * 6, 2, 4));
        let obs = vec![0.1; s_dim];
        let mut act = [0.0; 2];
        assert_eq!(
            dsr_policy_act(policy, obs.as_ptr(), s_dim, act.as_mut_ptr(), 2),
            DsrStatus::Ok
        );
        assert!(act.iter().all(|a| a.abs() <= 1.0));
        let mut z = [0.0; 4];
        assert_eq!(
            dsr_policy_encode(policy, obs.as_ptr(), s_dim, z.as_mut_ptr(), 4),
            DsrStatus::Ok
        );
        let (mut mean, mut std) = (0.0, 0.0);
        assert_eq!(
            dsr_policy_evaluate(policy, 1, 3, &mut mean, &mut std),
            DsrStatus::Ok
        );
        assert_eq!(mean, final_eval);
        assert_eq!(
            dsr_policy_act(policy, obs.as_ptr(), 2, act.as_mut_ptr(), 2),
            DsrStatus::BadLength
        );
        dsr_policy_free(policy);

        let missing = CString::new(dir.path().join("nope").to_str().unwrap()).unwrap();
        let mut p2 = ptr::null_mut();
        assert_eq!(
            dsr_policy_load(missing.as_ptr(), &mut p2),
            DsrStatus::Checkpoint
        );
    }
}

#[test]
fn header_declares_the_api() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/dsr.h")).unwrap();
    for name in [
        "dsr_last_error",
        "dsr_env_new",
        "dsr_env_step",
        "dsr_policy_load",
        "dsr_policy_act",
        "dsr_train",
        "DSR_STATUS_BAD_LENGTH",
        "typedef struct DsrEnv DsrEnv",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}
