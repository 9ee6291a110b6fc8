//! C ABI over `aac-core`.
//!
//! Every fallible function returns an [`AacStatus`]; on failure a message is
//! available from [`aac_last_error_message`] on the same thread. Objects are
//! opaque handles created by `*_new`/`*_load` and released by the matching
//! `*_free`. Array arguments are `(pointer, length)` pairs of `double`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use aac_core::adviser::{AdviserGains, AdviserState};
use aac_core::envs::{make_env, EnvConfig, EnvKind, GoalEnv};
use aac_core::nn::checkpoint::read_agent;
use aac_core::rl::{FrozenPolicy, Policy};
use aac_core::stability::{characteristic_roots, contraction_analysis, max_real_part, routh_classify, Classification};
use aac_core::AacError;
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AacStatus {
    Ok = 0,
    NullPointer = 1,
    DimensionMismatch = 2,
    NonFinite = 3,
    InvalidArgument = 4,
    Io = 5,
    Checkpoint = 6,
    Panic = 7,
    Internal = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AacClassification {
    Stable = 0,
    Marginal = 1,
    Unstable = 2,
}

impl From<Classification> for AacClassification {
    fn from(c: Classification) -> Self {
        match c {
            Classification::Stable => AacClassification::Stable,
            Classification::Marginal => AacClassification::Marginal,
            Classification::Unstable => AacClassification::Unstable,
        }
    }
}

/// Step flag bits written by [`aac_env_step`].
pub const AAC_FLAG_TERMINATED: u32 = 1;
pub const AAC_FLAG_TRUNCATED: u32 = 2;
pub const AAC_FLAG_SUCCESS: u32 = 4;

pub struct AacAdviser {
    state: AdviserState,
}

pub struct AacEnv {
    env: Box<dyn GoalEnv>,
}

pub struct AacPolicy {
    policy: FrozenPolicy,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = msg.replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(clean).unwrap_or_default());
}

fn status_of(err: &AacError) -> AacStatus {
    match err {
        AacError::DimensionMismatch { .. } | AacError::NotSquare { .. } => AacStatus::DimensionMismatch,
        AacError::NonFinite(_) => AacStatus::NonFinite,
        AacError::InvalidConfig { .. } | AacError::NotStable(_) => AacStatus::InvalidArgument,
        AacError::Io(_) => AacStatus::Io,
        AacError::Checkpoint(_) | AacError::Schema(_) => AacStatus::Checkpoint,
    }
}

struct Fail(AacStatus, String);

impl From<AacError> for Fail {
    fn from(e: AacError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AacStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            AacStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("panic inside aac");
            AacStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(AacStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(AacStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next `aac_*` call on this thread.
#[no_mangle]
pub extern "C" fn aac_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Create a PID adviser for goals of length `goal_dim`. Pass `INFINITY` as
/// `integral_clamp` for no clamp.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn aac_adviser_new(
    kp: f64,
    ki: f64,
    kd: f64,
    goal_dim: usize,
    dt: f64,
    integral_clamp: f64,
    out: *mut *mut AacAdviser,
) -> AacStatus {
    guard(|| {
        let out = handle_mut(out, "out")?;
        *out = ptr::null_mut();
        let state = AdviserState::new(AdviserGains::new(kp, ki, kd)?, goal_dim, dt, integral_clamp)?;
        *out = Box::into_raw(Box::new(AacAdviser { state }));
        Ok(())
    })
}

/// # Safety
/// `adviser` must come from [`aac_adviser_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn aac_adviser_free(adviser: *mut AacAdviser) {
    if !adviser.is_null() {
        drop(Box::from_raw(adviser));
    }
}

/// Clear the integral and derivative memory.
///
/// # Safety
/// `adviser` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn aac_adviser_reset(adviser: *mut AacAdviser) -> AacStatus {
    guard(|| {
        let a = handle_mut(adviser, "adviser")?;
        a.state = a.state.reset();
        Ok(())
    })
}

/// Advance the adviser by one step on error `e` and write the synthetic error.
///
/// # Safety
/// `e` and `eps_out` must each point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn aac_adviser_fake_error(
    adviser: *mut AacAdviser,
    e: *const f64,
    len: usize,
    eps_out: *mut f64,
) -> AacStatus {
    guard(|| {
        let a = handle_mut(adviser, "adviser")?;
        let e = slice(e, len, "e")?;
        let out = slice_mut(eps_out, len, "eps_out")?;
        let (eps, next) = a.state.fake_error(e)?;
        out.copy_from_slice(&eps);
        a.state = next;
        Ok(())
    })
}

/// Create an environment by name (`point_mass`, `planar_arm`, `quad_vel`,
/// `line1d`) with default physics.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aac_env_new(name: *const c_char, max_steps: usize, out: *mut *mut AacEnv) -> AacStatus {
    guard(|| {
        let out = handle_mut(out, "out")?;
        *out = ptr::null_mut();
        let kind: EnvKind = text(name, "name")?.parse()?;
        let mut config = EnvConfig::new(kind);
        config.max_steps = max_steps;
        let env = make_env(&config)?;
        *out = Box::into_raw(Box::new(AacEnv { env }));
        Ok(())
    })
}

/// # Safety
/// `env` must come from [`aac_env_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn aac_env_free(env: *mut AacEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// # Safety
/// `env` must be live; each output pointer must be writable.
#[no_mangle]
pub unsafe extern "C" fn aac_env_dims(
    env: *const AacEnv,
    obs_dim: *mut usize,
    goal_dim: *mut usize,
    action_dim: *mut usize,
) -> AacStatus {
    guard(|| {
        let e = &handle(env, "env")?.env;
        *handle_mut(obs_dim, "obs_dim")? = e.obs_dim();
        *handle_mut(goal_dim, "goal_dim")? = e.goal_dim();
        *handle_mut(action_dim, "action_dim")? = e.action_dim();
        Ok(())
    })
}

/// Reset with `seed`, writing the observation (`obs_dim`), desired goal and
/// achieved goal (`goal_dim` each).
///
/// # Safety
/// Output buffers must hold the sizes reported by [`aac_env_dims`].
#[no_mangle]
pub unsafe extern "C" fn aac_env_reset(
    env: *mut AacEnv,
    seed: u64,
    obs: *mut f64,
    desired: *mut f64,
    achieved: *mut f64,
) -> AacStatus {
    guard(|| {
        let e = &mut handle_mut(env, "env")?.env;
        let (n, g) = (e.obs_dim(), e.goal_dim());
        let (o, d, a) = (slice_mut(obs, n, "obs")?, slice_mut(desired, g, "desired")?, slice_mut(achieved, g, "achieved")?);
        let r = e.reset(seed);
        o.copy_from_slice(&r.observation);
        d.copy_from_slice(&r.desired_goal);
        a.copy_from_slice(&r.achieved_goal);
        Ok(())
    })
}

/// Apply `action` for one step. `flags` receives a bit set of
/// `AAC_FLAG_TERMINATED`, `AAC_FLAG_TRUNCATED` and `AAC_FLAG_SUCCESS`.
///
/// # Safety
/// `action` must point to `action_len` doubles; outputs as for [`aac_env_reset`].
#[no_mangle]
pub unsafe extern "C" fn aac_env_step(
    env: *mut AacEnv,
    action: *const f64,
    action_len: usize,
    obs: *mut f64,
    desired: *mut f64,
    achieved: *mut f64,
    reward: *mut f64,
    flags: *mut u32,
) -> AacStatus {
    guard(|| {
        let e = &mut handle_mut(env, "env")?.env;
        let (n, g) = (e.obs_dim(), e.goal_dim());
        let act = slice(action, action_len, "action")?;
        let (o, d, a) = (slice_mut(obs, n, "obs")?, slice_mut(desired, g, "desired")?, slice_mut(achieved, g, "achieved")?);
        let reward = handle_mut(reward, "reward")?;
        let flags = handle_mut(flags, "flags")?;
        let r = e.step(act)?;
        o.copy_from_slice(&r.obs.observation);
        d.copy_from_slice(&r.obs.desired_goal);
        a.copy_from_slice(&r.obs.achieved_goal);
        *reward = r.reward;
        *flags = (u32::from(r.terminated) * AAC_FLAG_TERMINATED)
            | (u32::from(r.truncated) * AAC_FLAG_TRUNCATED)
            | (u32::from(r.success) * AAC_FLAG_SUCCESS);
        Ok(())
    })
}

/// Load the policy network from an agent checkpoint, scaled to `env`'s
/// action box. The policy acts deterministically (squashed mean).
///
/// # Safety
/// `path` must be a NUL-terminated string; `env` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aac_policy_load(path: *const c_char, env: *const AacEnv, out: *mut *mut AacPolicy) -> AacStatus {
    guard(|| {
        let out = handle_mut(out, "out")?;
        *out = ptr::null_mut();
        let e = &handle(env, "env")?.env;
        let path = text(path, "path")?;
        let file = std::fs::File::open(path).map_err(AacError::from)?;
        let (mut nets, _) = read_agent(&mut std::io::BufReader::new(file))?;
        let network = nets.remove(0);
        let expected_in = e.obs_dim() + 2 * e.goal_dim();
        if network.input_dim() != expected_in || network.output_dim() != 2 * e.action_dim() {
            return Err(Fail(
                AacStatus::DimensionMismatch,
                format!(
                    "policy maps {} -> {}, environment needs {} -> {}",
                    network.input_dim(),
                    network.output_dim(),
                    expected_in,
                    2 * e.action_dim()
                ),
            ));
        }
        let low = e.action_low();
        let high = e.action_high();
        let policy = FrozenPolicy {
            network,
            action_center: low.iter().zip(high).map(|(l, h)| 0.5 * (l + h)).collect(),
            action_half: low.iter().zip(high).map(|(l, h)| 0.5 * (h - l)).collect(),
        };
        *out = Box::into_raw(Box::new(AacPolicy { policy }));
        Ok(())
    })
}

/// # Safety
/// `policy` must come from [`aac_policy_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn aac_policy_free(policy: *mut AacPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// # Safety
/// `policy` must be live; `s_e` must point to `len` doubles and `action_out`
/// to `action_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn aac_policy_act(
    policy: *mut AacPolicy,
    s_e: *const f64,
    len: usize,
    action_out: *mut f64,
    action_len: usize,
) -> AacStatus {
    guard(|| {
        let p = &mut handle_mut(policy, "policy")?.policy;
        let input = slice(s_e, len, "s_e")?;
        let out = slice_mut(action_out, action_len, "action_out")?;
        let action = p.act(input, true)?;
        if action.len() != action_len {
            return Err(AacError::DimensionMismatch {
                what: "action_out",
                expected: action.len(),
                got: action_len,
            }
            .into());
        }
        out.copy_from_slice(&action);
        Ok(())
    })
}

/// Routh classification of `s^3 + kd'·s^2 + kp'·s + ki`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aac_routh_classify(kp_eff: f64, kd_eff: f64, ki: f64, out: *mut AacClassification) -> AacStatus {
    guard(|| {
        let out = handle_mut(out, "out")?;
        if !(kp_eff.is_finite() && kd_eff.is_finite() && ki.is_finite()) {
            return Err(AacError::NonFinite("gains").into());
        }
        *out = routh_classify(kp_eff, kd_eff, ki).classification.into();
        Ok(())
    })
}

/// Largest real part among the roots of the same cubic.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aac_max_root_real_part(kp_eff: f64, kd_eff: f64, ki: f64, out: *mut f64) -> AacStatus {
    guard(|| {
        let out = handle_mut(out, "out")?;
        if !(kp_eff.is_finite() && kd_eff.is_finite() && ki.is_finite()) {
            return Err(AacError::NonFinite("gains").into());
        }
        *out = max_real_part(&characteristic_roots(kp_eff, kd_eff, ki));
        Ok(())
    })
}

/// Iterate `e ← (I - B)·e` for an `n × n` row-major `B`. Writes `ρ(I - B)` and
/// the `iterations + 1` error norms starting with `‖e0‖`.
///
/// # Safety
/// `b` must point to `n*n` doubles, `e0` to `n`, `norms_out` to
/// `iterations + 1`; `spectral_radius` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aac_contraction(
    b: *const f64,
    n: usize,
    e0: *const f64,
    iterations: usize,
    spectral_radius: *mut f64,
    norms_out: *mut f64,
) -> AacStatus {
    guard(|| {
        let bm = slice(b, n * n, "b")?;
        let e0 = slice(e0, n, "e0")?;
        let rho = handle_mut(spectral_radius, "spectral_radius")?;
        let norms = slice_mut(norms_out, iterations + 1, "norms_out")?;
        if bm.iter().chain(e0).any(|v| !v.is_finite()) {
            return Err(AacError::NonFinite("matrix or initial error").into());
        }
        let report = contraction_analysis(&DMatrix::from_row_slice(n, n, bm), e0, iterations)?;
        *rho = report.spectral_radius;
        norms.copy_from_slice(&report.error_norm_sequence);
        Ok(())
    })
}
