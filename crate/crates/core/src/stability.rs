//! Stability analysis for the per-dimension error loop.
//!
//! Each goal dimension is modelled as `ë = a0·e + a1·ė + ε + d` with the PID
//! adviser closing the loop through `ε`. Folding the plant into the gains
//! (`kp' = kp - a0`, `kd' = kd - a1`) gives the characteristic polynomial
//! `s³ + kd'·s² + kp'·s + ki`, classified here with a Routh table and
//! cross-checked against companion-matrix eigenvalues.
//!
//! The contraction part iterates `e ← (I - B)·e` for an input matrix `B`.

use std::fmt;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::adviser::AdviserGains;
use crate::error::{check_dim, AacError, Result};
use crate::ode::rk4_step_n;

/// Width of the band around zero treated as a Routh boundary entry.
pub const ROUTH_TOLERANCE: f64 = 1e-12;
/// State magnitude at which a simulation is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;
/// Integration step for analysis runs.
pub const ANALYSIS_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    Stable,
    Marginal,
    Unstable,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Stable => "stable",
            Classification::Marginal => "marginal",
            Classification::Unstable => "unstable",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityVerdict {
    pub classification: Classification,
    pub routh_first_column: [f64; 4],
}

/// Routh first column `[1, kd', (kp'·kd' - ki)/kd', ki]`.
///
/// A zero `kd'` pivot is replaced by `+ROUTH_TOLERANCE` (epsilon method) so the
/// sign of the third entry is still meaningful.
pub fn routh_classify(kp_eff: f64, kd_eff: f64, ki: f64) -> StabilityVerdict {
    let pivot = if kd_eff.abs() <= ROUTH_TOLERANCE {
        ROUTH_TOLERANCE
    } else {
        kd_eff
    };
    let column = [1.0, kd_eff, (kp_eff * pivot - ki) / pivot, ki];

    let classification = if column.iter().any(|&c| c < -ROUTH_TOLERANCE) {
        Classification::Unstable
    } else if column.iter().any(|&c| c.abs() <= ROUTH_TOLERANCE) {
        Classification::Marginal
    } else {
        Classification::Stable
    };
    StabilityVerdict {
        classification,
        routh_first_column: column,
    }
}

const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues via a bounded real Schur decomposition. Defective matrices
/// such as nilpotent Jordan blocks stall the unshifted iteration, so a few
/// identity shifts are tried before giving up.
pub fn eigenvalues(m: &DMatrix<f64>) -> Option<Vec<Complex<f64>>> {
    if m.is_empty() {
        return Some(Vec::new());
    }
    if m.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let n = m.nrows();
    let scale = m.amax().max(1.0);
    [0.0, 1.0, -0.5]
        .into_iter()
        .find_map(|shift: f64| {
            let shifted = m + DMatrix::identity(n, n) * (shift * scale);
            shifted
                .try_schur(f64::EPSILON, SCHUR_MAX_ITER)
                .map(|schur| schur.complex_eigenvalues().iter().map(|z| z - shift * scale).collect())
        })
}

/// Roots of `s³ + kd'·s² + kp'·s + ki` as eigenvalues of the companion matrix.
/// All three are NaN if the eigen-solver fails.
pub fn characteristic_roots(kp_eff: f64, kd_eff: f64, ki: f64) -> [Complex<f64>; 3] {
    #[rustfmt::skip]
    let companion = DMatrix::from_row_slice(3, 3, &[
        -kd_eff, -kp_eff, -ki,
        1.0,     0.0,     0.0,
        0.0,     1.0,     0.0,
    ]);
    match eigenvalues(&companion) {
        Some(ev) => [ev[0], ev[1], ev[2]],
        None => [Complex::new(f64::NAN, f64::NAN); 3],
    }
}

/// Largest real part; NaN if any root is NaN.
pub fn max_real_part(roots: &[Complex<f64>]) -> f64 {
    roots.iter().map(|r| r.re).fold(f64::NEG_INFINITY, |a, b| {
        if a.is_nan() || b.is_nan() {
            f64::NAN
        } else {
            a.max(b)
        }
    })
}

/// Eigenvalues of the open-loop plant matrix under both readings of its
/// first row: `[[1, 0], [a0, a1]]` as printed and the integrator-chain form
/// `[[0, 1], [a0, a1]]` that the simulator uses.
pub fn plant_matrix_readings(a0: f64, a1: f64) -> ([Complex<f64>; 2], [Complex<f64>; 2]) {
    let pair = |m: [f64; 4]| match eigenvalues(&DMatrix::from_row_slice(2, 2, &m)) {
        Some(ev) => [ev[0], ev[1]],
        None => [Complex::new(f64::NAN, f64::NAN); 2],
    };
    (pair([1.0, 0.0, a0, a1]), pair([0.0, 1.0, a0, a1]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorDynamicsModel {
    pub a0: f64,
    pub a1: f64,
    pub gains: AdviserGains,
    pub disturbance: f64,
    pub dt: f64,
    pub horizon: f64,
    /// `(∫e, e, ė)` at `t = 0`.
    pub initial: [f64; 3],
}

impl ErrorDynamicsModel {
    /// Model whose effective gains are given directly (plant folded in via
    /// `a0 = -kp'`, `a1 = -kd'`). `ki` must be non-negative.
    pub fn from_effective(kp_eff: f64, kd_eff: f64, ki: f64) -> Result<Self> {
        Ok(Self {
            a0: -kp_eff,
            a1: -kd_eff,
            gains: AdviserGains::new(0.0, ki, 0.0)?,
            disturbance: 0.0,
            dt: ANALYSIS_DT,
            horizon: 50.0,
            initial: [0.0, 1.0, 0.0],
        })
    }

    pub fn kp_eff(&self) -> f64 {
        self.gains.kp - self.a0
    }

    pub fn kd_eff(&self) -> f64 {
        self.gains.kd - self.a1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(AacError::InvalidConfig {
                key: "dt".into(),
                reason: format!("must be positive, got {}", self.dt),
            });
        }
        if !(self.horizon.is_finite() && self.horizon >= self.dt) {
            return Err(AacError::InvalidConfig {
                key: "horizon".into(),
                reason: format!("must be at least dt, got {}", self.horizon),
            });
        }
        self.gains.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub integral: f64,
    pub error: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub diverged: bool,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectoryPoint {
        self.points.last().expect("trajectory always holds the initial point")
    }

    /// Peak `|e|` over the fraction window `[from, to)` of the samples.
    pub fn peak_abs_error(&self, from: f64, to: f64) -> f64 {
        let n = self.points.len();
        let (a, b) = ((from * n as f64) as usize, (to * n as f64) as usize);
        self.points[a..b.min(n)]
            .iter()
            .map(|p| p.error.abs())
            .fold(0.0, f64::max)
    }
}

/// Integrates the closed loop `d(∫e) = e`, `d(e) = ė`,
/// `d(ė) = a0·e + a1·ė + ε + d` with `ε = -(kp·e + ki·∫e + kd·ė)` using RK4.
pub fn simulate_error_dynamics(model: &ErrorDynamicsModel) -> Result<Trajectory> {
    model.validate()?;
    let ErrorDynamicsModel {
        a0,
        a1,
        gains,
        disturbance,
        dt,
        horizon,
        initial,
    } = *model;
    let field = move |_t: f64, x: &[f64; 3]| {
        let eps = -(gains.kp * x[1] + gains.ki * x[0] + gains.kd * x[2]);
        [x[1], x[2], a0 * x[1] + a1 * x[2] + eps + disturbance]
    };

    let steps = (horizon / dt).round() as usize;
    let mut points = Vec::with_capacity(steps + 1);
    let mut x = initial;
    let point = |k: usize, x: &[f64; 3]| TrajectoryPoint {
        t: k as f64 * dt,
        integral: x[0],
        error: x[1],
        rate: x[2],
    };
    points.push(point(0, &x));
    let mut diverged = false;
    for k in 0..steps {
        rk4_step_n(&mut x, k as f64 * dt, dt, field);
        points.push(point(k + 1, &x));
        if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT) {
            diverged = true;
            break;
        }
    }
    Ok(Trajectory { points, diverged })
}

/// Long-run error under a constant disturbance `d0`, measured as the mean of
/// `e` over the last 10% of a horizon sized from the slowest pole.
///
/// Accepts Routh-stable gains, and pure PD loops (`ki == 0` with `kp', kd' > 0`)
/// whose only boundary pole is the unused integrator.
pub fn closed_loop_steady_state(kp_eff: f64, kd_eff: f64, ki: f64, d0: f64) -> Result<f64> {
    let verdict = routh_classify(kp_eff, kd_eff, ki);
    let pure_pd = ki == 0.0 && kp_eff > 0.0 && kd_eff > 0.0;
    if verdict.classification != Classification::Stable && !pure_pd {
        return Err(AacError::NotStable(format!(
            "kp'={kp_eff}, kd'={kd_eff}, ki={ki} classified {}",
            verdict.classification
        )));
    }
    let roots = characteristic_roots(kp_eff, kd_eff, ki);
    let slowest = roots
        .iter()
        .filter(|r| !(pure_pd && r.norm() < 1e-9))
        .map(|r| -r.re)
        .fold(f64::INFINITY, f64::min);
    let horizon = (40.0 / slowest).clamp(50.0, 5000.0);

    let mut model = ErrorDynamicsModel::from_effective(kp_eff, kd_eff, ki)?;
    model.disturbance = d0;
    model.horizon = horizon;
    model.initial = [0.0; 3];
    let traj = simulate_error_dynamics(&model)?;
    if traj.diverged {
        return Err(AacError::NotStable("simulation diverged".into()));
    }
    let n = traj.points.len();
    let tail = &traj.points[n - n / 10..];
    Ok(tail.iter().map(|p| p.error).sum::<f64>() / tail.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub b_matrix: DMatrix<f64>,
    /// `ρ(I - B)`.
    pub spectral_radius: f64,
    /// `‖I - B‖₂`, reported alongside the radius.
    pub spectral_norm: f64,
    /// `‖e_0‖, ‖e_1‖, …, ‖e_iterations‖`.
    pub error_norm_sequence: Vec<f64>,
}

impl ContractionReport {
    /// Whether the norms decrease strictly until they fall below
    /// `zero_tol · ‖e_0‖`.
    pub fn strictly_decreasing(&self, zero_tol: f64) -> bool {
        let floor = zero_tol * self.error_norm_sequence.first().copied().unwrap_or(0.0);
        for w in self.error_norm_sequence.windows(2) {
            if w[0] <= floor {
                return true;
            }
            if w[1] >= w[0] {
                return false;
            }
        }
        true
    }
}

pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(AacError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let ev = eigenvalues(m).ok_or(AacError::NonFinite("matrix eigenvalues"))?;
    Ok(ev.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

pub fn contraction_analysis(b: &DMatrix<f64>, e0: &[f64], iterations: usize) -> Result<ContractionReport> {
    if !b.is_square() {
        return Err(AacError::NotSquare {
            rows: b.nrows(),
            cols: b.ncols(),
        });
    }
    check_dim("initial error", b.nrows(), e0.len())?;
    let n = b.nrows();
    let m = DMatrix::<f64>::identity(n, n) - b;
    let spectral_radius = spectral_radius(&m)?;
    let spectral_norm = if n == 0 { 0.0 } else { m.clone().svd(false, false).singular_values.max() };

    let mut e = nalgebra::DVector::from_column_slice(e0);
    let mut norms = Vec::with_capacity(iterations + 1);
    norms.push(e.norm());
    for _ in 0..iterations {
        e = &m * e;
        norms.push(e.norm());
    }
    Ok(ContractionReport {
        b_matrix: b.clone(),
        spectral_radius,
        spectral_norm,
        error_norm_sequence: norms,
    })
}

/// Named cases for the asymptotic / marginal / unstable trichotomy, as
/// effective gains `(kp', kd', ki)`.
pub const TRICHOTOMY_CASES: [(&str, [f64; 3]); 3] = [
    ("asymptotic", [2.0, 2.0, 1.0]),
    ("marginal", [1.0, 1.0, 1.0]),
    ("unstable", [1.0, 0.5, 3.0]),
];

#[cfg(test)]
mod tests {
    use super::*;

    fn class(kp: f64, kd: f64, ki: f64) -> Classification {
        routh_classify(kp, kd, ki).classification
    }

    #[test]
    fn routh_examples() {
        assert_eq!(class(3.0, 2.0, 1.0), Classification::Stable);
        assert_eq!(class(1.0, 1.0, 2.0), Classification::Unstable);
        assert_eq!(class(1.0, 1.0, 1.0), Classification::Marginal);
        let v = routh_classify(3.0, 2.0, 1.0);
        assert_eq!(v.routh_first_column, [1.0, 2.0, 2.5, 1.0]);
    }

    #[test]
    fn defective_matrices_terminate() {
        let roots = characteristic_roots(0.0, 0.0, 0.0);
        assert!(roots.iter().all(|r| r.norm() < 1e-6), "{roots:?}");
        let roots = characteristic_roots(0.0, 2.0, 0.0);
        assert!((max_real_part(&roots)).abs() < 1e-6);
        let jordan = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert!(spectral_radius(&jordan).unwrap() < 1e-4);
        assert_eq!(spectral_radius(&DMatrix::zeros(4, 4)).unwrap(), 0.0);
        let r = contraction_analysis(&DMatrix::identity(3, 3), &[1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(r.error_norm_sequence[1..], [0.0, 0.0]);
        assert!(spectral_radius(&DMatrix::from_element(2, 2, f64::NAN)).is_err());
        assert!(max_real_part(&characteristic_roots(f64::NAN, 1.0, 1.0)).is_nan());
    }

    #[test]
    fn routh_boundary_cases() {
        // s(s² + s + 1)
        assert_eq!(class(1.0, 1.0, 0.0), Classification::Marginal);
        // s(s² - s + 1)
        assert_eq!(class(1.0, -1.0, 0.0), Classification::Unstable);
        // s³ + s + 1 has a root with positive real part
        assert_eq!(class(1.0, 0.0, 1.0), Classification::Unstable);
        // s(s² + 1)
        assert_eq!(class(1.0, 0.0, 0.0), Classification::Marginal);
        assert_eq!(class(-1.0, 0.0, 0.0), Classification::Unstable);
    }

    #[test]
    fn companion_roots_examples() {
        let r = characteristic_roots(3.0, 2.0, 1.0);
        assert!(r.iter().all(|z| z.re < 0.0));
        let r = characteristic_roots(1.0, 1.0, 0.0);
        assert!(r.iter().any(|z| z.norm() < 1e-12));
        let r = characteristic_roots(1.0, 1.0, 2.0);
        assert!(r.iter().any(|z| z.re > 0.0));
        // (s + 1)(s² + s + 1) = s³ + 2s² + 2s + 1
        let r = characteristic_roots(2.0, 2.0, 1.0);
        assert!(r.iter().any(|z| (z.re + 1.0).abs() < 1e-9 && z.im.abs() < 1e-9));
        assert!((max_real_part(&r) + 0.5).abs() < 1e-9);
    }

    #[test]
    fn stable_integral_loop_rejects_disturbance() {
        let mut m = ErrorDynamicsModel {
            a0: 0.0,
            a1: 0.0,
            gains: AdviserGains::new(2.0, 1.0, 2.0).unwrap(),
            disturbance: 0.5,
            dt: ANALYSIS_DT,
            horizon: 50.0,
            initial: [0.0, 1.0, 0.0],
        };
        assert_eq!(class(m.kp_eff(), m.kd_eff(), m.gains.ki), Classification::Stable);
        let t = simulate_error_dynamics(&m).unwrap();
        assert!(!t.diverged);
        assert!((t.last().t - 50.0).abs() < 1e-9);
        assert!(t.last().error.abs() < 1e-3);
        m.horizon = 0.0;
        assert!(simulate_error_dynamics(&m).is_err());
    }

    #[test]
    fn marginal_loop_sustains_oscillation() {
        let m = ErrorDynamicsModel::from_effective(1.0, 1.0, 1.0).unwrap();
        let t = simulate_error_dynamics(&m).unwrap();
        assert!(!t.diverged);
        let late = t.peak_abs_error(0.8, 1.0);
        let before = t.peak_abs_error(0.6, 0.8);
        assert!(late > 0.1);
        assert!((late - before).abs() / before < 0.05, "{late} vs {before}");
    }

    #[test]
    fn unstable_loop_flags_divergence() {
        let mut m = ErrorDynamicsModel::from_effective(1.0, 1.0, 2.0).unwrap();
        m.horizon = 200.0;
        assert!(simulate_error_dynamics(&m).unwrap().diverged);
        let (_, g) = TRICHOTOMY_CASES[2];
        let m = ErrorDynamicsModel::from_effective(g[0], g[1], g[2]).unwrap();
        assert!(simulate_error_dynamics(&m).unwrap().diverged);
    }

    #[test]
    fn steady_state_examples() {
        assert!(closed_loop_steady_state(3.0, 2.0, 1.0, 0.5).unwrap().abs() < 1e-3);
        assert_eq!(closed_loop_steady_state(3.0, 2.0, 1.0, 0.0).unwrap(), 0.0);
        let pd = closed_loop_steady_state(2.0, 1.5, 0.0, 0.5).unwrap();
        assert!((pd - 0.25).abs() < 1e-3, "{pd}");
        assert!(closed_loop_steady_state(1.0, 1.0, 2.0, 0.5).is_err());
        assert!(closed_loop_steady_state(1.0, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn pd_offset_approaches_balance_as_ki_vanishes() {
        let d0 = 0.5;
        let kp = 2.0;
        let pd = closed_loop_steady_state(kp, 2.0, 0.0, d0).unwrap();
        assert!((pd - d0 / kp).abs() < 1e-3);
        // With a vanishing ki the loop sits near the PD offset on ordinary horizons.
        let mut m = ErrorDynamicsModel::from_effective(kp, 2.0, 1e-4).unwrap();
        m.disturbance = d0;
        m.initial = [0.0; 3];
        let e50 = simulate_error_dynamics(&m).unwrap().last().error;
        assert!((e50 - d0 / kp).abs() < 2e-3, "{e50}");
    }

    #[test]
    fn contraction_examples() {
        let r = contraction_analysis(&DMatrix::identity(3, 3), &[1.0, 2.0, 2.0], 4).unwrap();
        assert_eq!(r.spectral_radius, 0.0);
        assert_eq!(r.error_norm_sequence, vec![3.0, 0.0, 0.0, 0.0, 0.0]);

        let b = DMatrix::identity(2, 2) * 0.5;
        let r = contraction_analysis(&b, &[0.6, 0.8], 4).unwrap();
        assert!((r.spectral_radius - 0.5).abs() < 1e-12);
        let expect = [1.0, 0.5, 0.25, 0.125, 0.0625];
        for (a, b) in r.error_norm_sequence.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }

        let b = DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.0, 0.8]);
        let r = contraction_analysis(&b, &[1.0, 1.0], 20).unwrap();
        assert!((r.spectral_radius - 0.2).abs() < 1e-12);
        assert!(r.strictly_decreasing(1e-12));
    }

    #[test]
    fn contraction_rejects_bad_shapes() {
        let b = DMatrix::from_row_slice(2, 3, &[0.0; 6]);
        assert!(matches!(
            contraction_analysis(&b, &[1.0, 1.0], 3),
            Err(AacError::NotSquare { rows: 2, cols: 3 })
        ));
        assert!(contraction_analysis(&DMatrix::identity(2, 2), &[1.0], 3).is_err());
    }

    #[test]
    fn plant_readings_differ() {
        let (printed, canonical) = plant_matrix_readings(-2.0, -3.0);
        // printed [[1,0],[a0,a1]] is lower triangular: eigenvalues 1 and a1
        let mut re: Vec<f64> = printed.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 3.0).abs() < 1e-12 && (re[1] - 1.0).abs() < 1e-12);
        // canonical: s² + 3s + 2 = (s+1)(s+2)
        let mut re: Vec<f64> = canonical.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert!((re[0] + 2.0).abs() < 1e-9 && (re[1] + 1.0).abs() < 1e-9);
    }
}
