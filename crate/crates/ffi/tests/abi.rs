use std::ffi::{CStr, CString};
use std::ptr;

use aac_core::adviser::{AdviserGains, AdviserState};
use aac_core::envs::{make_env, EnvConfig, EnvKind};
use aac_core::rl::{FrozenPolicy, Policy, SacAgent, SacConfig};
use aac_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(aac_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn adviser_matches_core() {
    let mut h = ptr::null_mut();
    let st = unsafe { aac_adviser_new(1.3, 0.1, 0.1, 2, 0.05, f64::INFINITY, &mut h) };
    assert_eq!(st, AacStatus::Ok);
    let mut core = AdviserState::new(AdviserGains::new(1.3, 0.1, 0.1).unwrap(), 2, 0.05, f64::INFINITY).unwrap();
    let errors = [[0.5, -0.25], [0.4, -0.1], [0.1, 0.3]];
    for e in &errors {
        let mut eps = [0.0; 2];
        assert_eq!(unsafe { aac_adviser_fake_error(h, e.as_ptr(), 2, eps.as_mut_ptr()) }, AacStatus::Ok);
        let (want, next) = core.fake_error(e).unwrap();
        core = next;
        assert_eq!(eps.as_slice(), want.as_slice());
    }
    assert_eq!(unsafe { aac_adviser_reset(h) }, AacStatus::Ok);
    let mut eps = [0.0; 2];
    unsafe { aac_adviser_fake_error(h, errors[0].as_ptr(), 2, eps.as_mut_ptr()) };
    let fresh = core.reset().fake_error(&errors[0]).unwrap().0;
    assert_eq!(eps.as_slice(), fresh.as_slice());
    unsafe { aac_adviser_free(h) };
}

#[test]
fn adviser_errors_are_reported() {
    let mut h = ptr::null_mut();
    let st = unsafe { aac_adviser_new(f64::NAN, 0.0, 0.0, 1, 0.1, 1.0, &mut h) };
    assert_eq!(st, AacStatus::InvalidArgument);
    assert!(h.is_null());
    assert!(!last_error().is_empty());

    unsafe { aac_adviser_new(1.0, 0.0, 0.0, 2, 0.1, 1.0, &mut h) };
    let e = [1.0];
    let mut out = [0.0];
    assert_eq!(
        unsafe { aac_adviser_fake_error(h, e.as_ptr(), 1, out.as_mut_ptr()) },
        AacStatus::DimensionMismatch
    );
    let bad = [f64::INFINITY, 0.0];
    let mut out2 = [0.0; 2];
    assert_eq!(
        unsafe { aac_adviser_fake_error(h, bad.as_ptr(), 2, out2.as_mut_ptr()) },
        AacStatus::NonFinite
    );
    assert_eq!(
        unsafe { aac_adviser_fake_error(h, ptr::null(), 2, out2.as_mut_ptr()) },
        AacStatus::NullPointer
    );
    assert_eq!(unsafe { aac_adviser_reset(ptr::null_mut()) }, AacStatus::NullPointer);
    unsafe { aac_adviser_free(h) };
    unsafe { aac_adviser_free(ptr::null_mut()) };
}

#[test]
fn identity_adviser_negates_error() {
    let mut h = ptr::null_mut();
    unsafe { aac_adviser_new(1.0, 0.0, 0.0, 3, 0.1, f64::INFINITY, &mut h) };
    let e = [0.3, -0.0, 7.5];
    let mut eps = [0.0; 3];
    unsafe { aac_adviser_fake_error(h, e.as_ptr(), 3, eps.as_mut_ptr()) };
    for (a, b) in eps.iter().zip(&e) {
        assert_eq!(a.to_bits(), (-b).to_bits());
    }
    unsafe { aac_adviser_free(h) };
}

#[test]
fn env_round_trip_matches_core() {
    let name = CString::new("point_mass").unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { aac_env_new(name.as_ptr(), 20, &mut h) }, AacStatus::Ok);
    let (mut n, mut g, mut a) = (0, 0, 0);
    unsafe { aac_env_dims(h, &mut n, &mut g, &mut a) };
    let mut config = EnvConfig::new(EnvKind::PointMass);
    config.max_steps = 20;
    let mut core = make_env(&config).unwrap();
    assert_eq!((n, g, a), (core.obs_dim(), core.goal_dim(), core.action_dim()));

    let (mut obs, mut des, mut ach) = (vec![0.0; n], vec![0.0; g], vec![0.0; g]);
    unsafe { aac_env_reset(h, 9, obs.as_mut_ptr(), des.as_mut_ptr(), ach.as_mut_ptr()) };
    let r = core.reset(9);
    assert_eq!(obs.as_slice(), r.observation.as_slice());
    assert_eq!(des.as_slice(), r.desired_goal.as_slice());

    let action = vec![0.3; a];
    let mut steps = 0;
    loop {
        let (mut reward, mut flags) = (0.0, 0u32);
        let st = unsafe {
            aac_env_step(
                h,
                action.as_ptr(),
                a,
                obs.as_mut_ptr(),
                des.as_mut_ptr(),
                ach.as_mut_ptr(),
                &mut reward,
                &mut flags,
            )
        };
        assert_eq!(st, AacStatus::Ok);
        let want = core.step(&action).unwrap();
        steps += 1;
        assert_eq!(obs.as_slice(), want.obs.observation.as_slice());
        assert_eq!(ach.as_slice(), want.obs.achieved_goal.as_slice());
        assert_eq!(reward, want.reward);
        assert_eq!(flags & AAC_FLAG_TERMINATED != 0, want.terminated);
        assert_eq!(flags & AAC_FLAG_TRUNCATED != 0, want.truncated);
        assert_eq!(flags & AAC_FLAG_SUCCESS != 0, want.success);
        if want.terminated || want.truncated {
            break;
        }
    }
    assert!(steps <= 20);
    unsafe { aac_env_free(h) };
}

#[test]
fn env_rejects_bad_input() {
    let bogus = CString::new("cartpole").unwrap();
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { aac_env_new(bogus.as_ptr(), 10, &mut h) }, AacStatus::InvalidArgument);
    assert!(h.is_null());
    assert_eq!(unsafe { aac_env_new(ptr::null(), 10, &mut h) }, AacStatus::NullPointer);

    let name = CString::new("line1d").unwrap();
    unsafe { aac_env_new(name.as_ptr(), 10, &mut h) };
    let (mut n, mut g, mut a) = (0, 0, 0);
    unsafe { aac_env_dims(h, &mut n, &mut g, &mut a) };
    let (mut obs, mut des, mut ach) = (vec![0.0; n], vec![0.0; g], vec![0.0; g]);
    unsafe { aac_env_reset(h, 1, obs.as_mut_ptr(), des.as_mut_ptr(), ach.as_mut_ptr()) };
    let wide = vec![0.0; a + 1];
    let (mut reward, mut flags) = (0.0, 0u32);
    let st = unsafe {
        aac_env_step(
            h,
            wide.as_ptr(),
            a + 1,
            obs.as_mut_ptr(),
            des.as_mut_ptr(),
            ach.as_mut_ptr(),
            &mut reward,
            &mut flags,
        )
    };
    assert_eq!(st, AacStatus::DimensionMismatch);
    unsafe { aac_env_free(h) };
}

#[test]
fn policy_loaded_from_checkpoint_matches_core() {
    let mut config = EnvConfig::new(EnvKind::Line1d);
    config.max_steps = 10;
    let core_env = make_env(&config).unwrap();
    let input = core_env.obs_dim() + 2 * core_env.goal_dim();
    let sac = SacConfig {
        hidden_width: 16,
        ..SacConfig::default()
    };
    let agent = SacAgent::new(sac, input, core_env.action_low(), core_env.action_high(), 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("agent.bin");
    agent.save(&mut std::fs::File::create(&path).unwrap()).unwrap();

    let name = CString::new("line1d").unwrap();
    let mut env = ptr::null_mut();
    unsafe { aac_env_new(name.as_ptr(), 10, &mut env) };
    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut pol = ptr::null_mut();
    assert_eq!(unsafe { aac_policy_load(cpath.as_ptr(), env, &mut pol) }, AacStatus::Ok);

    let mut frozen = FrozenPolicy::from_agent(&agent);
    let s_e: Vec<f64> = (0..input).map(|i| 0.1 * i as f64 - 0.2).collect();
    let mut out = vec![0.0; core_env.action_dim()];
    let st = unsafe { aac_policy_act(pol, s_e.as_ptr(), input, out.as_mut_ptr(), out.len()) };
    assert_eq!(st, AacStatus::Ok);
    assert_eq!(out, frozen.act(&s_e, true).unwrap());

    let st = unsafe { aac_policy_act(pol, s_e.as_ptr(), input - 1, out.as_mut_ptr(), out.len()) };
    assert_eq!(st, AacStatus::DimensionMismatch);
    unsafe { aac_policy_free(pol) };

    let other = CString::new("point_mass").unwrap();
    let mut env2 = ptr::null_mut();
    unsafe { aac_env_new(other.as_ptr(), 10, &mut env2) };
    let mut pol2 = ptr::null_mut();
    assert_eq!(
        unsafe { aac_policy_load(cpath.as_ptr(), env2, &mut pol2) },
        AacStatus::DimensionMismatch
    );
    assert!(pol2.is_null());

    let missing = CString::new(dir.path().join("nope.bin").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { aac_policy_load(missing.as_ptr(), env, &mut pol2) }, AacStatus::Io);

    let garbage = dir.path().join("garbage.bin");
    std::fs::write(&garbage, b"not a checkpoint").unwrap();
    let cg = CString::new(garbage.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { aac_policy_load(cg.as_ptr(), env, &mut pol2) }, AacStatus::Checkpoint);

    unsafe {
        aac_env_free(env);
        aac_env_free(env2);
    }
}

#[test]
fn routh_and_roots() {
    let cases = [
        ((2.0, 2.0, 1.0), AacClassification::Stable),
        ((1.0, 1.0, 1.0), AacClassification::Marginal),
        ((1.0, 0.5, 3.0), AacClassification::Unstable),
    ];
    for ((kp, kd, ki), want) in cases {
        let mut c = AacClassification::Marginal;
        assert_eq!(unsafe { aac_routh_classify(kp, kd, ki, &mut c) }, AacStatus::Ok);
        assert_eq!(c, want);
        let mut re = f64::NAN;
        unsafe { aac_max_root_real_part(kp, kd, ki, &mut re) };
        match want {
            AacClassification::Stable => assert!(re < -1e-6),
            AacClassification::Marginal => assert!(re.abs() < 1e-6),
            AacClassification::Unstable => assert!(re > 1e-6),
        }
    }
    let mut c = AacClassification::Stable;
    assert_eq!(unsafe { aac_routh_classify(f64::NAN, 1.0, 1.0, &mut c) }, AacStatus::NonFinite);
    assert_eq!(unsafe { aac_routh_classify(1.0, 1.0, 1.0, ptr::null_mut()) }, AacStatus::NullPointer);
}

#[test]
fn contraction_of_diagonal_matrix() {
    let b = [0.5, 0.0, 0.0, 0.75];
    let e0 = [1.0, 1.0];
    let mut rho = 0.0;
    let mut norms = [0.0; 4];
    let st = unsafe { aac_contraction(b.as_ptr(), 2, e0.as_ptr(), 3, &mut rho, norms.as_mut_ptr()) };
    assert_eq!(st, AacStatus::Ok);
    assert!((rho - 0.5).abs() < 1e-12);
    for (k, n) in norms.iter().enumerate() {
        let want = (0.5f64.powi(2 * k as i32) + 0.25f64.powi(2 * k as i32)).sqrt();
        assert!((n - want).abs() < 1e-12, "{k}: {n} vs {want}");
    }
    assert_eq!(
        unsafe { aac_contraction(ptr::null(), 2, e0.as_ptr(), 3, &mut rho, norms.as_mut_ptr()) },
        AacStatus::NullPointer
    );
}

#[test]
fn header_is_generated() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/aac.h")).unwrap();
    for sym in [
        "aac_last_error_message",
        "aac_adviser_new",
        "aac_adviser_fake_error",
        "aac_env_step",
        "aac_policy_load",
        "aac_policy_act",
        "aac_routh_classify",
        "aac_contraction",
        "AAC_STATUS_DIMENSION_MISMATCH",
        "typedef struct AacEnv AacEnv;",
    ] {
        assert!(header.contains(sym), "{sym} missing from header");
    }
}
