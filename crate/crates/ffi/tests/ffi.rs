use std::ffi::{c_char, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use hmamp::config::ExperimentConfig;
use hmamp::policy::{Policy, PolicyConfig};
use hmamp::sim::SimConfig;
use hmamp_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { hmamp_last_error(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n.min(511)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn run_episode(env: *mut HmampEnv, seed: u64, action: [f64; 3]) -> (Vec<f64>, HmampStep, usize) {
    let mut obs = [0.0; HMAMP_OBS_DIM];
    let mut trace = Vec::new();
    let mut step = HmampStep {
        termination: HmampTermination::Running,
        contact: 0,
        force_x: 0.0,
        force_y: 0.0,
        force_norm: 0.0,
    };
    let mut n = 0;
    unsafe {
        assert_eq!(hmamp_env_reset(env, seed, obs.as_mut_ptr()), HmampStatus::Ok);
        while step.termination == HmampTermination::Running {
            assert_eq!(hmamp_env_step(env, action.as_ptr(), obs.as_mut_ptr(), &mut step), HmampStatus::Ok);
            trace.extend_from_slice(&obs);
            n += 1;
        }
    }
    (trace, step, n)
}

#[test]
fn environment_round_trip_is_deterministic() {
    let home = SimConfig::default().home_pose;
    let mut env = ptr::null_mut();
    unsafe { assert_eq!(hmamp_env_new(3, &mut env), HmampStatus::Ok) };
    let (a, last, n) = run_episode(env, 11, home);
    let (b, _, _) = run_episode(env, 11, home);
    assert_eq!(a, b);
    assert_eq!(last.termination, HmampTermination::Timeout);
    assert_eq!(n, SimConfig::default().max_steps);
    let mut obs = [0.0; HMAMP_OBS_DIM];
    let mut step = last;
    let status = unsafe { hmamp_env_step(env, home.as_ptr(), obs.as_mut_ptr(), &mut step) };
    assert_eq!(status, HmampStatus::Contract);
    assert!(last_error().contains("terminated"));
    let mut kp = [0.0; 4];
    unsafe {
        assert_eq!(hmamp_env_keypoints(env, kp.as_mut_ptr()), HmampStatus::Ok);
        hmamp_env_free(env);
    }
    assert!(kp.iter().all(|v| v.is_finite()));
}

#[test]
fn null_and_bad_arguments_are_reported() {
    unsafe {
        assert_eq!(hmamp_env_new(0, ptr::null_mut()), HmampStatus::NullPointer);
        assert_eq!(hmamp_env_reset(ptr::null_mut(), 0, ptr::null_mut()), HmampStatus::NullPointer);
        let mut out = 0.0;
        assert_eq!(hmamp_frechet_distance([0.0].as_ptr(), 0, [0.0, 0.0].as_ptr(), 1, &mut out), HmampStatus::InvalidArgument);
        let bad = CString::new("[training]\ngamma = 2.0\n").unwrap();
        let mut env = ptr::null_mut();
        assert_eq!(hmamp_env_from_config(bad.as_ptr(), 0, &mut env), HmampStatus::Config);
        assert!(env.is_null());
        let missing = CString::new("/nonexistent/policy.ckpt").unwrap();
        let mut p = ptr::null_mut();
        assert_eq!(hmamp_policy_load(missing.as_ptr(), &mut p), HmampStatus::Io);
        hmamp_env_free(ptr::null_mut());
        hmamp_policy_free(ptr::null_mut());
    }
}

#[test]
fn rewards_and_metrics_match_the_library() {
    assert_eq!(hmamp_style_reward(-1.0), 0.0);
    assert_eq!(hmamp_style_reward(0.5), 0.9375);
    assert!((hmamp_goal_reward(0, 0.0, 1.0, 0.0, 0.0, 0.0) - (1.0 - 1f64.tanh())).abs() < 1e-15);
    let w = hmamp::rewards::RewardWeights::default();
    assert_eq!(hmamp_goal_reward(1, 50.0, 0.0, 0.0, 0.0, 0.0), 0.5 * w.omega_f + 1.0);
    assert_eq!(hmamp_total_reward(1.0, 1.0), 1.0);
    let a = [0.0, 0.0, 1.0, 0.0];
    let b = [0.0, 1.0, 1.0, 1.0];
    let mut d = 0.0;
    unsafe { assert_eq!(hmamp_frechet_distance(a.as_ptr(), 2, b.as_ptr(), 2, &mut d), HmampStatus::Ok) };
    assert_eq!(d, 1.0);
}

#[test]
fn policy_checkpoint_acts_like_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let sim = SimConfig::default();
    let policy = Policy::new(&[16, 8], &PolicyConfig::default(), &sim, 5).unwrap();
    let path = dir.path().join("policy.ckpt");
    policy.to_checkpoint(5, 0).save(&path).unwrap();
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut handle = ptr::null_mut();
    unsafe { assert_eq!(hmamp_policy_load(cpath.as_ptr(), &mut handle), HmampStatus::Ok) };
    let (_, obs) = hmamp::sim::reset(&sim, 2).unwrap();
    let v = obs.to_vec();
    let mut act = [0.0; 3];
    unsafe {
        assert_eq!(hmamp_policy_act(handle, v.as_ptr(), act.as_mut_ptr()), HmampStatus::Ok);
        hmamp_policy_free(handle);
    }
    assert_eq!(act, policy.act_deterministic(&obs).unwrap());
    let cfg = CString::new(ExperimentConfig::default().to_toml().unwrap()).unwrap();
    let mut env = ptr::null_mut();
    unsafe {
        assert_eq!(hmamp_env_from_config(cfg.as_ptr(), 1, &mut env), HmampStatus::Ok);
        hmamp_env_free(env);
    }
}

fn target_dir() -> PathBuf {
    // tests/ffi-<hash> lives in target/<profile>/deps.
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libhmamp_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.is_file() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with(&format!("{} ", SimConfig::default().max_steps)), "{text}");
}
