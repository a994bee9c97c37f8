//! C interface: environment stepping, policy inference, rewards and metrics
//! behind opaque handles and integer status codes.
//!
//! Every fallible function returns an [`HmampStatus`]; on failure the
//! message is available from [`hmamp_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::os::raw::c_int;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use hmamp::config::ExperimentConfig;
use hmamp::metrics::frechet_distance;
use hmamp::nn::Checkpoint;
use hmamp::policy::Policy;
use hmamp::rewards::{goal_reward, style_reward, total_reward, RewardWeights};
use hmamp::sim::{ContactEvent, Env, Observation, SimConfig, Termination, Vec2, NUM_JOINTS};
use hmamp::Error;

/// Length of the flat observation vector.
pub const HMAMP_OBS_DIM: usize = 14;
/// Number of arm joints (action length).
pub const HMAMP_NUM_JOINTS: usize = 3;

const _: () = assert!(HMAMP_OBS_DIM == Observation::DIM && HMAMP_NUM_JOINTS == NUM_JOINTS);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HmampStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Contract = 4,
    Io = 5,
    Checkpoint = 6,
    Planning = 7,
    UndefinedMetric = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HmampTermination {
    Running = 0,
    TaskDone = 1,
    Collision = 2,
    Timeout = 3,
}

impl From<Termination> for HmampTermination {
    fn from(t: Termination) -> Self {
        match t {
            Termination::Running => HmampTermination::Running,
            Termination::TaskDone => HmampTermination::TaskDone,
            Termination::Collision => HmampTermination::Collision,
            Termination::Timeout => HmampTermination::Timeout,
        }
    }
}

/// Result of one control step.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct HmampStep {
    pub termination: HmampTermination,
    /// Nonzero when the hammer struck the nail this step.
    pub contact: c_int,
    pub force_x: f64,
    pub force_y: f64,
    pub force_norm: f64,
}

/// Opaque environment handle.
pub struct HmampEnv {
    env: Env,
}

/// Opaque policy handle.
pub struct HmampPolicy {
    policy: Policy,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> HmampStatus {
    match e {
        Error::Config(_) | Error::MissingDataset(_) => HmampStatus::Config,
        Error::Dimension { .. } | Error::NonScalarOutput(_) | Error::Empty(_) => HmampStatus::InvalidArgument,
        Error::Contract(_) => HmampStatus::Contract,
        Error::Io(_) | Error::Csv(_) | Error::Parse { .. } => HmampStatus::Io,
        Error::Checkpoint(_) => HmampStatus::Checkpoint,
        Error::Planning(_) | Error::Retarget { .. } => HmampStatus::Planning,
        Error::UndefinedMetric(_) => HmampStatus::UndefinedMetric,
    }
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), (HmampStatus, String)>) -> HmampStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HmampStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            HmampStatus::Panic
        }
    }
}

fn lib<T>(r: hmamp::Result<T>) -> Result<T, (HmampStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (HmampStatus, String) {
    (HmampStatus::NullPointer, format!("{name} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, (HmampStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (HmampStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn write_obs(obs: &Observation, out: *mut f64) {
    let v = obs.to_vec();
    ptr::copy_nonoverlapping(v.as_ptr(), out, HMAMP_OBS_DIM);
}

/// Copies the last error message (NUL-terminated, truncated to `len`) into
/// `buf` and returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn hmamp_last_error(buf: *mut c_char, len: usize) -> usize {
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

/// Creates an environment with the default configuration, reset with `seed`.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn hmamp_env_new(seed: u64, out: *mut *mut HmampEnv) -> HmampStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let env = lib(Env::new(SimConfig::default(), seed))?;
        *out = Box::into_raw(Box::new(HmampEnv { env }));
        Ok(())
    })
}

/// Creates an environment from the `[env]` section of an experiment
/// configuration document.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn hmamp_env_from_config(
    config_toml: *const c_char,
    seed: u64,
    out: *mut *mut HmampEnv,
) -> HmampStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = c_str(config_toml, "config_toml")?;
        let cfg = lib(ExperimentConfig::from_toml(text))?;
        let env = lib(Env::new(cfg.env, seed))?;
        *out = Box::into_raw(Box::new(HmampEnv { env }));
        Ok(())
    })
}

/// # Safety
/// `env` must be null or a handle from `hmamp_env_new`, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn hmamp_env_free(env: *mut HmampEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Starts a new episode and writes the first observation.
///
/// # Safety
/// `env` must be a live handle; `obs_out` valid for `HMAMP_OBS_DIM` doubles.
#[no_mangle]
pub unsafe extern "C" fn hmamp_env_reset(env: *mut HmampEnv, seed: u64, obs_out: *mut f64) -> HmampStatus {
    guard(|| {
        let env = env.as_mut().ok_or_else(|| null("env"))?;
        if obs_out.is_null() {
            return Err(null("obs_out"));
        }
        let obs = lib(env.env.reset(seed))?;
        write_obs(&obs, obs_out);
        Ok(())
    })
}

/// Advances one control step toward the PD joint targets in `action`.
///
/// # Safety
/// `env` must be a live handle; `action` valid for `HMAMP_NUM_JOINTS`
/// doubles; `obs_out` for `HMAMP_OBS_DIM`; `step_out` for one `HmampStep`.
#[no_mangle]
pub unsafe extern "C" fn hmamp_env_step(
    env: *mut HmampEnv,
    action: *const f64,
    obs_out: *mut f64,
    step_out: *mut HmampStep,
) -> HmampStatus {
    guard(|| {
        let env = env.as_mut().ok_or_else(|| null("env"))?;
        if action.is_null() || obs_out.is_null() || step_out.is_null() {
            return Err(null("action, obs_out or step_out"));
        }
        let mut a = [0.0; NUM_JOINTS];
        ptr::copy_nonoverlapping(action, a.as_mut_ptr(), NUM_JOINTS);
        if a.iter().any(|v| !v.is_finite()) {
            return Err((HmampStatus::InvalidArgument, "action must be finite".into()));
        }
        let out = lib(env.env.step(&a))?;
        write_obs(&out.observation, obs_out);
        let f = out.contact.map_or(Vec2::zeros(), |c| c.force_vec);
        *step_out = HmampStep {
            termination: out.termination.into(),
            contact: out.contact.is_some() as c_int,
            force_x: f.x,
            force_y: f.y,
            force_norm: f.norm(),
        };
        Ok(())
    })
}

/// Writes the hammer-head (`x_f`) and nail-head (`x_c`) positions as
/// `[x_f.x, x_f.y, x_c.x, x_c.y]`.
///
/// # Safety
/// `env` must be a live handle; `out` valid for 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn hmamp_env_keypoints(env: *const HmampEnv, out: *mut f64) -> HmampStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let k = env.env.keypoints();
        let v = [k.x_f.x, k.x_f.y, k.x_c.x, k.x_c.y];
        ptr::copy_nonoverlapping(v.as_ptr(), out, 4);
        Ok(())
    })
}

/// Loads a policy checkpoint for the default environment geometry.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn hmamp_policy_load(path: *const c_char, out: *mut *mut HmampPolicy) -> HmampStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = c_str(path, "path")?;
        let ckpt = lib(Checkpoint::load(Path::new(path)))?;
        let policy = lib(Policy::from_checkpoint(&ckpt, &SimConfig::default()))?;
        *out = Box::into_raw(Box::new(HmampPolicy { policy }));
        Ok(())
    })
}

/// # Safety
/// `policy` must be null or a handle from `hmamp_policy_load`, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn hmamp_policy_free(policy: *mut HmampPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Deterministic PD joint targets for an observation.
///
/// # Safety
/// `policy` must be a live handle; `obs` valid for `HMAMP_OBS_DIM` doubles;
/// `action_out` for `HMAMP_NUM_JOINTS`.
#[no_mangle]
pub unsafe extern "C" fn hmamp_policy_act(
    policy: *const HmampPolicy,
    obs: *const f64,
    action_out: *mut f64,
) -> HmampStatus {
    guard(|| {
        let policy = policy.as_ref().ok_or_else(|| null("policy"))?;
        if obs.is_null() || action_out.is_null() {
            return Err(null("obs or action_out"));
        }
        let v = std::slice::from_raw_parts(obs, HMAMP_OBS_DIM);
        let o = Observation {
            hammer_pos: Vec2::new(v[0], v[1]),
            nail_pos: Vec2::new(v[2], v[3]),
            q: [v[4], v[5], v[6]],
            qdot: [v[7], v[8], v[9]],
            ee_orientation: v[10],
            prev_action: [v[11], v[12], v[13]],
        };
        let a = lib(policy.policy.act_deterministic(&o))?;
        ptr::copy_nonoverlapping(a.as_ptr(), action_out, NUM_JOINTS);
        Ok(())
    })
}

/// Style reward of a discriminator score under the default weights.
#[no_mangle]
pub extern "C" fn hmamp_style_reward(d: f64) -> f64 {
    style_reward(d, &RewardWeights::default())
}

/// Goal reward under the default weights; `contact = 0` ignores `force_norm`.
#[no_mangle]
pub extern "C" fn hmamp_goal_reward(contact: c_int, force_norm: f64, xf_x: f64, xf_y: f64, xc_x: f64, xc_y: f64) -> f64 {
    let event = (contact != 0).then(|| ContactEvent {
        force_vec: Vec2::new(0.0, -force_norm),
        force_norm,
        step_index: 0,
    });
    goal_reward(event.as_ref(), Vec2::new(xf_x, xf_y), Vec2::new(xc_x, xc_y), &RewardWeights::default())
}

/// Combined reward under the default weights.
#[no_mangle]
pub extern "C" fn hmamp_total_reward(r_g: f64, r_s: f64) -> f64 {
    total_reward(r_g, r_s, &RewardWeights::default())
}

/// Discrete Fréchet distance between two paths given as interleaved
/// `x, y` pairs (`na` and `nb` points).
///
/// # Safety
/// `a` must be valid for `2·na` doubles, `b` for `2·nb`, `out` for one.
#[no_mangle]
pub unsafe extern "C" fn hmamp_frechet_distance(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    out: *mut f64,
) -> HmampStatus {
    guard(|| {
        if a.is_null() || b.is_null() || out.is_null() {
            return Err(null("a, b or out"));
        }
        let to_points = |p: *const f64, n: usize| -> Vec<Vec2> {
            std::slice::from_raw_parts(p, 2 * n)
                .chunks_exact(2)
                .map(|c| Vec2::new(c[0], c[1]))
                .collect()
        };
        *out = lib(frechet_distance(&to_points(a, na), &to_points(b, nb)))?;
        Ok(())
    })
}
