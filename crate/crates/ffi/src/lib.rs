//! C ABI over the biped environment and trained policies.
//!
//! Handles are opaque pointers created by `*_new`/`*_load` and released with
//! the matching `*_free`. Every fallible call returns a [`BipedStatus`]; on
//! failure `biped_last_error` describes the most recent error on the calling
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use biped_core::config::Config;
use biped_core::contact::TerrainField;
use biped_core::env::{BipedEnv as CoreEnv, CurriculumPhase, Observation, OBS_DIM};
use biped_core::learn::{Checkpoint, Policy};
use biped_core::sim::build_planar_biped;
use biped_core::Error;
use rand::SeedableRng;

/// Result codes of every fallible call.
#[repr(C)]
#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BipedStatus {
    BIPED_OK = 0,
    BIPED_NULL_POINTER = 1,
    BIPED_INVALID_ARGUMENT = 2,
    BIPED_CONFIG_ERROR = 3,
    BIPED_CHECKPOINT_ERROR = 4,
    BIPED_DIVERGED = 5,
    BIPED_IO_ERROR = 6,
    BIPED_INTERNAL_ERROR = 7,
}

use BipedStatus::*;

/// Opaque simulation environment.
pub struct BipedEnv {
    inner: CoreEnv,
}

/// Opaque deterministic policy loaded from a checkpoint.
pub struct BipedPolicy {
    inner: Policy,
}

/// Per-step outputs besides the observation.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BipedStepResult {
    pub reward: f64,
    /// 1 when the episode ended (fall, divergence or time limit).
    pub done: i32,
    /// 1 when the episode ended by failure rather than the time limit.
    pub terminated: i32,
    /// Phase used during the step.
    pub phi: u32,
    /// Step-averaged vertical foot forces, N.
    pub grf_right: f64,
    pub grf_left: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> BipedStatus {
    match e {
        Error::Config(_) | Error::Toml(_) => BIPED_CONFIG_ERROR,
        Error::Contract(_) => BIPED_INVALID_ARGUMENT,
        Error::Checkpoint(_) => BIPED_CHECKPOINT_ERROR,
        Error::Diverged(_) | Error::TrainingDiverged(_) => BIPED_DIVERGED,
        Error::Io(_) | Error::Csv(_) => BIPED_IO_ERROR,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (BipedStatus, String)>) -> BipedStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BIPED_OK,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            BIPED_INTERNAL_ERROR
        }
    }
}

fn core(e: Error) -> (BipedStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (BipedStatus, String) {
    (BIPED_NULL_POINTER, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (BipedStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (BIPED_INVALID_ARGUMENT, format!("{what} is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, want: usize, what: &str) -> Result<&'a [f64], (BipedStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    if len != want {
        return Err((
            BIPED_INVALID_ARGUMENT,
            format!("{what} has length {len}, expected {want}"),
        ));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(
    p: *mut f64,
    len: usize,
    want: usize,
    what: &str,
) -> Result<&'a mut [f64], (BipedStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    if len != want {
        return Err((
            BIPED_INVALID_ARGUMENT,
            format!("{what} has length {len}, expected {want}"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Message of the last failed call on this thread (empty if none). The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn biped_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Length of the observation vector.
#[no_mangle]
pub extern "C" fn biped_obs_dim() -> usize {
    OBS_DIM
}

/// Creates an environment.
///
/// `config_toml` may be null for the default configuration. `randomized`
/// selects the randomized curriculum phase (compliance, terrain and dynamics
/// randomization) instead of flat rigid ground; `terrain_peak` is the obstacle
/// height in metres used in that phase.
///
/// # Safety
/// `config_toml` must be null or a NUL-terminated string; `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn biped_env_new(
    config_toml: *const c_char,
    randomized: i32,
    terrain_peak: f64,
    seed: u64,
    out: *mut *mut BipedEnv,
) -> BipedStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = if config_toml.is_null() {
            Config::default()
        } else {
            Config::from_toml_str(c_str(config_toml, "config_toml")?).map_err(core)?
        };
        if terrain_peak.is_nan() || terrain_peak < 0.0 {
            return Err((BIPED_INVALID_ARGUMENT, "terrain_peak must be >= 0".into()));
        }
        let mut env_cfg = config.env.clone();
        env_cfg.phase = if randomized != 0 {
            CurriculumPhase::Randomized
        } else {
            CurriculumPhase::Flat
        };
        let model = build_planar_biped(&config.model).map_err(core)?;
        let terrain = TerrainField::generate(
            &env_cfg.terrain,
            &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed),
            terrain_peak,
        );
        let inner = CoreEnv::new(env_cfg, model, terrain, seed).map_err(core)?;
        *out = Box::into_raw(Box::new(BipedEnv { inner }));
        Ok(())
    })
}

/// Releases an environment; null is ignored.
///
/// # Safety
/// `env` must be null or a handle from `biped_env_new` not freed before.
#[no_mangle]
pub unsafe extern "C" fn biped_env_free(env: *mut BipedEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Action length expected by `biped_env_step` (6, or 7 with clock control).
///
/// # Safety
/// `env` must be null or a live handle; null yields 0.
#[no_mangle]
pub unsafe extern "C" fn biped_env_action_dim(env: *const BipedEnv) -> usize {
    env.as_ref().map_or(0, |e| e.inner.action_dim())
}

/// Starts a new episode and writes the first observation.
///
/// # Safety
/// `env` must be a live handle and `obs_out` must hold `obs_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn biped_env_reset(env: *mut BipedEnv, obs_out: *mut f64, obs_len: usize) -> BipedStatus {
    guard(|| {
        let env = env.as_mut().ok_or_else(|| null("env"))?;
        let out = slice_mut(obs_out, obs_len, OBS_DIM, "obs_out")?;
        out.copy_from_slice(env.inner.reset().as_slice());
        Ok(())
    })
}

/// Advances one control step (25 physics substeps).
///
/// # Safety
/// `env` must be a live handle, `action` must hold `action_len` doubles,
/// `obs_out` `obs_len` doubles, and `result` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn biped_env_step(
    env: *mut BipedEnv,
    action: *const f64,
    action_len: usize,
    obs_out: *mut f64,
    obs_len: usize,
    result: *mut BipedStepResult,
) -> BipedStatus {
    guard(|| {
        let env = env.as_mut().ok_or_else(|| null("env"))?;
        let a = slice(action, action_len, env.inner.action_dim(), "action")?;
        let obs = slice_mut(obs_out, obs_len, OBS_DIM, "obs_out")?;
        let step = env.inner.step(a).map_err(core)?;
        obs.copy_from_slice(step.obs.as_slice());
        if let Some(r) = result.as_mut() {
            *r = BipedStepResult {
                reward: step.reward,
                done: i32::from(step.done),
                terminated: i32::from(step.info.termination.is_some()),
                phi: step.info.phi,
                grf_right: step.info.grf[0],
                grf_left: step.info.grf[1],
            };
        }
        Ok(())
    })
}

/// Loads a checkpoint as a deterministic policy.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn biped_policy_load(path: *const c_char, out: *mut *mut BipedPolicy) -> BipedStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let p = c_str(path, "path")?;
        let ck = Checkpoint::load(Path::new(p)).map_err(core)?;
        *out = Box::into_raw(Box::new(BipedPolicy { inner: ck.policy() }));
        Ok(())
    })
}

/// Releases a policy; null is ignored.
///
/// # Safety
/// `policy` must be null or a handle from `biped_policy_load` not freed before.
#[no_mangle]
pub unsafe extern "C" fn biped_policy_free(policy: *mut BipedPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Number of actions the policy produces; 0 for null.
///
/// # Safety
/// `policy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn biped_policy_action_dim(policy: *const BipedPolicy) -> usize {
    policy.as_ref().map_or(0, |p| p.inner.action_dim())
}

/// Mean action for one observation.
///
/// # Safety
/// `policy` must be a live handle; `obs` must hold `obs_len` doubles and
/// `action_out` `action_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn biped_policy_act(
    policy: *const BipedPolicy,
    obs: *const f64,
    obs_len: usize,
    action_out: *mut f64,
    action_len: usize,
) -> BipedStatus {
    guard(|| {
        let policy = policy.as_ref().ok_or_else(|| null("policy"))?;
        let o = slice(obs, obs_len, OBS_DIM, "obs")?;
        let out = slice_mut(action_out, action_len, policy.inner.action_dim(), "action_out")?;
        let mut arr = [0.0; OBS_DIM];
        arr.copy_from_slice(o);
        let a = policy.inner.act(&Observation(arr)).map_err(core)?;
        out.copy_from_slice(&a);
        Ok(())
    })
}
