//! C ABI over `dsr_core`: environments, trained policies and training runs.
//!
//! Every function returns a [`DsrStatus`]. On failure a message is kept per
//! thread and can be copied out with [`dsr_last_error`]. Handles are opaque
//! and must be released with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dsr_core::envs::{DistractingPointMass, FrameStack};
use dsr_core::trainer::{evaluate, run, Policy, RunConfig, SavedRun};
use dsr_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DsrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A caller buffer has the wrong length.
    BadLength = 3,
    Config = 4,
    Env = 5,
    Io = 6,
    Checkpoint = 7,
    Numeric = 8,
    /// A Rust panic was caught at the boundary.
    Internal = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> DsrStatus {
    match e {
        Error::Config { .. } | Error::TomlDe(_) | Error::TomlSer(_) => DsrStatus::Config,
        Error::Env(_) => DsrStatus::Env,
        Error::Io(_) | Error::Json(_) => DsrStatus::Io,
        Error::Checkpoint { .. } => DsrStatus::Checkpoint,
        Error::Shape { .. } | Error::Domain { .. } => DsrStatus::Numeric,
        Error::InvalidArgument(_) | Error::Buffer(_) => DsrStatus::InvalidArgument,
    }
}

struct Fail(DsrStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DsrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            DsrStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DsrStatus::Internal
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(DsrStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(DsrStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn read_slice<'a>(
    p: *const f64,
    len: usize,
    want: usize,
    what: &str,
) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    if len != want {
        return Err(Fail(
            DsrStatus::BadLength,
            format!("{what} has length {len}, expected {want}"),
        ));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_slice(p: *mut f64, len: usize, src: &[f64], what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    if len != src.len() {
        return Err(Fail(
            DsrStatus::BadLength,
            format!("{what} has length {len}, expected {}", src.len()),
        ));
    }
    std::slice::from_raw_parts_mut(p, len).copy_from_slice(src);
    Ok(())
}

unsafe fn write_out<T>(p: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

unsafe fn config_from(toml: *const c_char) -> Result<RunConfig, Fail> {
    if toml.is_null() {
        Ok(RunConfig::default())
    } else {
        Ok(RunConfig::from_toml(read_str(toml, "config")?)?)
    }
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `len` bytes, into `buf`. Returns the full message length in
/// bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dsr_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Point-mass environment with its frame stack.
pub struct DsrEnv {
    env: DistractingPointMass,
    stack: FrameStack,
}

/// Creates an environment from the `[env]` section of a TOML run
/// configuration, or from the defaults when `config_toml` is null.
///
/// # Safety
/// `config_toml` must be null or a NUL-terminated string; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn dsr_env_new(
    config_toml: *const c_char,
    out: *mut *mut DsrEnv,
) -> DsrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = config_from(config_toml)?;
        let env = DistractingPointMass::new(cfg.env)?;
        let handle = Box::new(DsrEnv {
            env,
            stack: FrameStack::default(),
        });
        out.write(Box::into_raw(handle));
        Ok(())
    })
}

/// # Safety
/// `env` must be null or a handle from [`dsr_env_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dsr_env_free(env: *mut DsrEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Single-frame observation and action sizes.
///
/// # Safety
/// `env` must be a live handle; `obs_dim` and `act_dim` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsr_env_dims(
    env: *const DsrEnv,
    obs_dim: *mut usize,
    act_dim: *mut usize,
) -> DsrStatus {
    guard(|| {
        let e = env.as_ref().ok_or_else(|| null("env"))?;
        write_out(obs_dim, e.env.spec().obs_dim(), "obs_dim")?;
        write_out(act_dim, e.env.spec().act_dim(), "act_dim")
    })
}

/// Starts an episode and writes the first observation (`obs_dim` values).
///
/// # Safety
/// `env` must be a live handle and `obs` must hold `obs_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dsr_env_reset(
    env: *mut DsrEnv,
    scene_seed: u64,
    episode_seed: u64,
    obs: *mut f64,
    obs_len: usize,
) -> DsrStatus {
    guard(|| {
        let e = env.as_mut().ok_or_else(|| null("env"))?;
        if obs.is_null() {
            return Err(null("obs"));
        }
        let first = e.env.reset(scene_seed, episode_seed)?;
        e.stack.reset(&first);
        write_slice(obs, obs_len, &first, "obs")
    })
}

/// Advances one step. Out-of-range actions are clamped.
///
/// # Safety
/// `env` must be a live handle, `action` must hold `action_len` doubles,
/// `obs` must hold `obs_len` doubles and `reward`, `done` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsr_env_step(
    env: *mut DsrEnv,
    action: *const f64,
    action_len: usize,
    obs: *mut f64,
    obs_len: usize,
    reward: *mut f64,
    done: *mut bool,
) -> DsrStatus {
    guard(|| {
        let e = env.as_mut().ok_or_else(|| null("env"))?;
        let a = read_slice(action, action_len, e.env.spec().act_dim(), "action")?;
        if obs.is_null() || reward.is_null() || done.is_null() {
            return Err(null("output"));
        }
        if obs_len != e.env.spec().obs_dim() {
            return Err(Fail(
                DsrStatus::BadLength,
                format!(
                    "obs has length {obs_len}, expected {}",
                    e.env.spec().obs_dim()
                ),
            ));
        }
        let s = e.env.step(a)?;
        e.stack.push(&s.obs);
        write_slice(obs, obs_len, &s.obs, "obs")?;
        reward.write(s.reward);
        done.write(s.done);
        Ok(())
    })
}

/// The last three observations concatenated, oldest first: the input a
/// policy expects.
///
/// # Safety
/// `env` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dsr_env_stacked_obs(
    env: *const DsrEnv,
    out: *mut f64,
    len: usize,
) -> DsrStatus {
    guard(|| {
        let e = env.as_ref().ok_or_else(|| null("env"))?;
        if e.env.distractor_state().is_none() {
            return Err(Fail(
                DsrStatus::Env,
                "environment has not been reset".into(),
            ));
        }
        write_slice(out, len, &e.stack.stacked(), "out")
    })
}

/// Task position and velocity, `2 · pos_dim` values.
///
/// # Safety
/// `env` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dsr_env_true_state(
    env: *const DsrEnv,
    out: *mut f64,
    len: usize,
) -> DsrStatus {
    guard(|| {
        let e = env.as_ref().ok_or_else(|| null("env"))?;
        write_slice(out, len, &e.env.true_state().features(), "out")
    })
}

/// Deterministic policy restored from a checkpoint.
pub struct DsrPolicy {
    saved: SavedRun,
}

/// Loads a checkpoint directory (or a run directory containing one).
///
/// # Safety
/// `checkpoint_dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsr_policy_load(
    checkpoint_dir: *const c_char,
    out: *mut *mut DsrPolicy,
) -> DsrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let dir = read_str(checkpoint_dir, "checkpoint_dir")?;
        let saved = SavedRun::load(Path::new(dir))?;
        out.write(Box::into_raw(Box::new(DsrPolicy { saved })));
        Ok(())
    })
}

/// # Safety
/// `policy` must be null or a handle from [`dsr_policy_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dsr_policy_free(policy: *mut DsrPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Stacked-observation, action and latent sizes.
///
/// # Safety
/// `policy` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsr_policy_dims(
    policy: *const DsrPolicy,
    stacked_obs_dim: *mut usize,
    act_dim: *mut usize,
    latent_dim: *mut usize,
) -> DsrStatus {
    guard(|| {
        let p = policy.as_ref().ok_or_else(|| null("policy"))?;
        let cfg = &p.saved.config;
        write_out(
            stacked_obs_dim,
            cfg.env.stacked_obs_dim(),
            "stacked_obs_dim",
        )?;
        write_out(act_dim, cfg.env.act_dim(), "act_dim")?;
        write_out(latent_dim, cfg.dsr.latent_dim, "latent_dim")
    })
}

/// Mean action for one stacked observation.
///
/// # Safety
/// `policy` must be a live handle, `obs` must hold `obs_len` doubles and
/// `action` must hold `action_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dsr_policy_act(
    policy: *const DsrPolicy,
    obs: *const f64,
    obs_len: usize,
    action: *mut f64,
    action_len: usize,
) -> DsrStatus {
    guard(|| {
        let p = policy.as_ref().ok_or_else(|| null("policy"))?;
        let o = read_slice(obs, obs_len, p.saved.config.env.stacked_obs_dim(), "obs")?;
        let a = p.saved.policy().act(o)?;
        write_slice(action, action_len, &a, "action")
    })
}

/// Encoder latent for one stacked observation.
///
/// # Safety
/// As for [`dsr_policy_act`], with `latent` holding `latent_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dsr_policy_encode(
    policy: *const DsrPolicy,
    obs: *const f64,
    obs_len: usize,
    latent: *mut f64,
    latent_len: usize,
) -> DsrStatus {
    guard(|| {
        let p = policy.as_ref().ok_or_else(|| null("policy"))?;
        let o = read_slice(obs, obs_len, p.saved.config.env.stacked_obs_dim(), "obs")?;
        let l = &p.saved.learner;
        let z = l.agent.encode(
            &l.store,
            &dsr_core::autodiff::Tensor::matrix(1, o.len(), o.to_vec())?,
        )?;
        write_slice(latent, latent_len, z.data(), "latent")
    })
}

/// Mean and standard deviation of the return over `episodes` episodes on
/// the checkpoint's evaluation scenes.
///
/// # Safety
/// `policy` must be a live handle; `mean` and `std` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dsr_policy_evaluate(
    policy: *const DsrPolicy,
    episodes: usize,
    seed: u64,
    mean: *mut f64,
    std: *mut f64,
) -> DsrStatus {
    guard(|| {
        let p = policy.as_ref().ok_or_else(|| null("policy"))?;
        if mean.is_null() || std.is_null() {
            return Err(null("output"));
        }
        let spec = &p.saved.config.env;
        let s = evaluate(&p.saved.policy(), spec, &spec.eval_scenes, episodes, seed)?;
        mean.write(s.mean);
        std.write(s.std);
        Ok(())
    })
}

/// Runs one training seed, writing metrics and a checkpoint into `out_dir`.
/// `final_eval_mean` (nullable) receives the last evaluation return.
///
/// # Safety
/// `config_toml` must be null or NUL-terminated; `out_dir` must be
/// NUL-terminated; `final_eval_mean` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn dsr_train(
    config_toml: *const c_char,
    seed: u64,
    out_dir: *const c_char,
    final_eval_mean: *mut f64,
) -> DsrStatus {
    guard(|| {
        let cfg = config_from(config_toml)?;
        let dir = read_str(out_dir, "out_dir")?;
        let outcome = run(&cfg, seed, Some(Path::new(dir)))?;
        if !final_eval_mean.is_null() {
            let m = outcome.final_record().eval_return_mean.unwrap_or(f64::NAN);
            final_eval_mean.write(m);
        }
        Ok(())
    })
}
