use std::ffi::{CStr, CString};
use std::ptr;

use biped_core::config::Config;
use biped_core::env::{CurriculumPhase, OBS_DIM};
use biped_core::learn::{ActorCritic, Checkpoint, RunningNorm};
use biped_ffi::*;
use rand::SeedableRng;

fn last_error() -> String {
    unsafe { CStr::from_ptr(biped_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn new_env(seed: u64) -> *mut BipedEnv {
    let mut env = ptr::null_mut();
    let s = unsafe { biped_env_new(ptr::null(), 0, 0.0, seed, &mut env) };
    assert_eq!(s, BipedStatus::BIPED_OK);
    assert!(!env.is_null());
    env
}

fn rollout(seed: u64, steps: usize) -> Vec<(f64, [f64; 2])> {
    let env = new_env(seed);
    let mut obs = [0.0; OBS_DIM];
    let mut out = Vec::new();
    unsafe {
        assert_eq!(biped_env_reset(env, obs.as_mut_ptr(), OBS_DIM), BipedStatus::BIPED_OK);
        let action = [0.1, -0.2, 0.0, 0.3, 0.0, -0.1];
        let mut r = BipedStepResult::default();
        for _ in 0..steps {
            let s = biped_env_step(env, action.as_ptr(), 6, obs.as_mut_ptr(), OBS_DIM, &mut r);
            assert_eq!(s, BipedStatus::BIPED_OK);
            out.push((r.reward, [r.grf_right, r.grf_left]));
            if r.done != 0 {
                break;
            }
        }
        biped_env_free(env);
    }
    out
}

#[test]
fn dims_are_reported() {
    assert_eq!(biped_obs_dim(), OBS_DIM);
    let env = new_env(1);
    unsafe {
        assert_eq!(biped_env_action_dim(env), 6);
        assert_eq!(biped_env_action_dim(ptr::null()), 0);
        biped_env_free(env);
    }
}

#[test]
fn step_is_deterministic_per_seed() {
    let a = rollout(7, 40);
    let b = rollout(7, 40);
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn bad_arguments_return_codes() {
    let env = new_env(2);
    let mut obs = [0.0; OBS_DIM];
    unsafe {
        assert_eq!(
            biped_env_reset(env, obs.as_mut_ptr(), 3),
            BipedStatus::BIPED_INVALID_ARGUMENT
        );
        assert!(last_error().contains("obs_out"));
        assert_eq!(
            biped_env_reset(ptr::null_mut(), obs.as_mut_ptr(), OBS_DIM),
            BipedStatus::BIPED_NULL_POINTER
        );
        let short = [0.0; 5];
        let s = biped_env_step(env, short.as_ptr(), 5, obs.as_mut_ptr(), OBS_DIM, ptr::null_mut());
        assert_eq!(s, BipedStatus::BIPED_INVALID_ARGUMENT);
        let nan = [f64::NAN; 6];
        let s = biped_env_step(env, nan.as_ptr(), 6, obs.as_mut_ptr(), OBS_DIM, ptr::null_mut());
        assert_eq!(s, BipedStatus::BIPED_INVALID_ARGUMENT);
        biped_env_free(env);
        biped_env_free(ptr::null_mut());
    }
}

#[test]
fn bad_config_is_a_config_error() {
    let toml = CString::new("[env]\nsubsteps = 0\n").unwrap();
    let mut env = ptr::null_mut();
    let s = unsafe { biped_env_new(toml.as_ptr(), 0, 0.0, 1, &mut env) };
    assert_eq!(s, BipedStatus::BIPED_CONFIG_ERROR);
    assert!(env.is_null());
    assert!(!last_error().is_empty());
    let toml = CString::new("[nope]\n").unwrap();
    let s = unsafe { biped_env_new(toml.as_ptr(), 0, 0.0, 1, &mut env) };
    assert_eq!(s, BipedStatus::BIPED_CONFIG_ERROR);
}

#[test]
fn policy_round_trip_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.ckpt");
    let config = Config::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let model = ActorCritic::<f32>::new(OBS_DIM, 6, &[16, 16], -1.0, &mut rng).unwrap();
    let ck = Checkpoint::new(
        model,
        RunningNorm::new(OBS_DIM),
        false,
        CurriculumPhase::Flat,
        0,
        0,
        3,
        &config,
    );
    ck.save(&path).unwrap();
    let expected = ck.policy().act(&biped_core::env::Observation([0.1; OBS_DIM])).unwrap();

    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut policy = ptr::null_mut();
    unsafe {
        assert_eq!(biped_policy_load(cpath.as_ptr(), &mut policy), BipedStatus::BIPED_OK);
        assert_eq!(biped_policy_action_dim(policy), 6);
        let obs = [0.1; OBS_DIM];
        let mut act = [0.0; 6];
        assert_eq!(
            biped_policy_act(policy, obs.as_ptr(), OBS_DIM, act.as_mut_ptr(), 6),
            BipedStatus::BIPED_OK
        );
        assert_eq!(act.to_vec(), expected);
        assert_eq!(
            biped_policy_act(policy, obs.as_ptr(), OBS_DIM, act.as_mut_ptr(), 7),
            BipedStatus::BIPED_INVALID_ARGUMENT
        );
        biped_policy_free(policy);
    }
}

#[test]
fn corrupt_checkpoint_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ckpt");
    std::fs::write(&path, b"not a checkpoint").unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut policy = ptr::null_mut();
    let s = unsafe { biped_policy_load(cpath.as_ptr(), &mut policy) };
    assert_eq!(s, BipedStatus::BIPED_CHECKPOINT_ERROR);
    assert!(policy.is_null());
    let missing = CString::new(dir.path().join("missing").to_str().unwrap()).unwrap();
    let s = unsafe { biped_policy_load(missing.as_ptr(), &mut policy) };
    assert_ne!(s, BipedStatus::BIPED_OK);
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/biped.h")).unwrap();
    for name in [
        "biped_last_error",
        "biped_obs_dim",
        "biped_env_new",
        "biped_env_free",
        "biped_env_action_dim",
        "biped_env_reset",
        "biped_env_step",
        "biped_policy_load",
        "biped_policy_free",
        "biped_policy_action_dim",
        "biped_policy_act",
        "typedef struct BipedEnv BipedEnv",
        "BIPED_CHECKPOINT_ERROR = 4",
    ] {
        assert!(h.contains(name), "header lacks {name}");
    }
}

// Compiles a small C client against the header when a C compiler is present.
#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    std::fs::write(
        &src,
        r#"#include "biped.h"
int run(void) {
    BipedEnv *env = 0;
    double obs[26];
    BipedStepResult r;
    double a[6] = {0};
    if (biped_env_new(0, 0, 0.0, 1, &env) != BIPED_OK) return 1;
    biped_env_reset(env, obs, biped_obs_dim());
    biped_env_step(env, a, 6, obs, 26, &r);
    biped_env_free(env);
    return r.done;
}
"#,
    )
    .unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if std::process::Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc);
        }
    }
    Err(())
}
