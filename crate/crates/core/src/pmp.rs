//! Maximum-principle structure for the navigation problem: the bang-bang
//! control law on the unit control square, the boundary measure-multiplier
//! rule, the state/adjoint right-hand side, and diagnostics (Hamiltonian
//! maximum, recovered cost multiplier, non-triviality margin, singular-arc
//! risk).
//!
//! Switching functions are `psi1 - mu` and `psi2`. In the interior the
//! multiplier `mu` is constant and each control component is the sign of
//! its switching function; on a boundary arc `|x1| = bound` the feedback
//! `u1 = -v1` holds the constraint and `mu = psi1`. With that substitution
//! the `psi1` terms of the adjoint equation cancel, so on the boundary
//! `dpsi1 = -psi2 dv2/dx1` and `dpsi2 = -psi2 dv2/dx2`.

use crate::flowfield::{FieldError, FlowField};
use std::ops::Add;

/// Which lateral constraint boundary a state sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `x1 = +bound`
    Right,
    /// `x1 = -bound`
    Left,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Right => 1.0,
            Side::Left => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::Right => "B+",
            Side::Left => "B-",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Interior,
    OnBoundary(Side),
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Interior => "I",
            Mode::OnBoundary(side) => side.label(),
        }
    }
}

/// Augmented integration state: position, adjoint, measure multiplier and
/// arc mode.
///
/// In `Interior` mode `mu` is constant along the arc (the integrator never
/// updates it); in `OnBoundary` mode `x1` is pinned to the side and `mu` is
/// refreshed to `psi1` after every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtState {
    pub t: f64,
    pub x: [f64; 2],
    pub psi: [f64; 2],
    pub mu: f64,
    pub mode: Mode,
}

impl ExtState {
    /// Effective multiplier value: the stored constant in the interior,
    /// `psi1` on the boundary.
    pub fn mu_effective(&self) -> f64 {
        match self.mode {
            Mode::Interior => self.mu,
            Mode::OnBoundary(_) => self.psi[0],
        }
    }

    /// Switching function for the first control component.
    pub fn switching_u1(&self) -> f64 {
        self.psi[0] - self.mu_effective()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.x.iter().all(|v| v.is_finite())
            && self.psi.iter().all(|v| v.is_finite())
            && self.mu.is_finite()
    }
}

/// Control chosen by the maximum condition, with singular-band flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlDecision {
    pub u: [f64; 2],
    pub singular_u1: bool,
    pub singular_u2: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PmpError {
    #[error("boundary arc infeasible at t={t}: |v1|={v1_abs} >= 1 on side {side:?}")]
    BoundaryInfeasible { t: f64, side: Side, v1_abs: f64 },
    #[error("operation requires {expected} mode")]
    WrongMode { expected: &'static str },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Contact rate of the state constraint: `Gamma = u1 + v1(t, x)`. A
/// boundary arc holds `Gamma = 0`.
pub fn gamma(f: &FlowField, t: f64, x: [f64; 2], u1: f64) -> Result<f64, FieldError> {
    Ok(u1 + f.velocity(t, x)?[0])
}

fn sign_banded(z: f64, eps: f64) -> (f64, bool) {
    if z.abs() <= eps {
        (0.0, true)
    } else if z > 0.0 {
        (1.0, false)
    } else {
        (-1.0, false)
    }
}

/// Control from the maximum condition at the given state.
///
/// Interior: `u_i = sgn` of the switching functions, with `sgn(z) = 0` and
/// a singular flag when `|z| <= eps_sing`. On a boundary arc: `u1 = -v1`
/// (requires `|v1| < 1`, otherwise the arc cannot be held and the error
/// signals a forced departure), `u2` as in the interior.
pub fn control_law(
    s: &ExtState,
    f: &FlowField,
    eps_sing: f64,
) -> Result<ControlDecision, PmpError> {
    let (u2, singular_u2) = sign_banded(s.psi[1], eps_sing);
    match s.mode {
        Mode::Interior => {
            let (u1, singular_u1) = sign_banded(s.psi[0] - s.mu, eps_sing);
            Ok(ControlDecision {
                u: [u1, u2],
                singular_u1,
                singular_u2,
            })
        }
        Mode::OnBoundary(side) => {
            let v1 = f.velocity(s.t, s.x)?[0];
            if v1.abs() >= 1.0 {
                return Err(PmpError::BoundaryInfeasible {
                    t: s.t,
                    side,
                    v1_abs: v1.abs(),
                });
            }
            Ok(ControlDecision {
                u: [-v1, u2],
                singular_u1: false,
                singular_u2,
            })
        }
    }
}

/// Boundary value of the measure multiplier: `mu = psi1`.
pub fn boundary_mu(s: &ExtState) -> Result<f64, PmpError> {
    match s.mode {
        Mode::OnBoundary(_) => Ok(s.psi[0]),
        Mode::Interior => Err(PmpError::WrongMode {
            expected: "boundary",
        }),
    }
}

/// State and adjoint rates for a given control:
/// `dx = u + v`, `dpsi_j = -(psi1 dv1/dx_j + psi2 dv2/dx_j) + mu dv1/dx_j`,
/// with `mu` the stored constant in the interior and `psi1` on the
/// boundary. On a boundary arc `dx1 = 0` identically (the feedback makes
/// the contact rate vanish; zeroing it removes roundoff drift).
pub fn rhs(s: &ExtState, f: &FlowField, u: [f64; 2]) -> Result<([f64; 2], [f64; 2]), PmpError> {
    let v = f.velocity(s.t, s.x)?;
    let jac = f.jacobian(s.t, s.x)?;
    let mu = s.mu_effective();
    let mut dx = [u[0] + v[0], u[1] + v[1]];
    if let Mode::OnBoundary(_) = s.mode {
        dx[0] = 0.0;
    }
    let mut dpsi = [0.0; 2];
    for j in 0..2 {
        dpsi[j] = -(s.psi[0] * jac[0][j] + s.psi[1] * jac[1][j]) + mu * jac[0][j];
    }
    Ok((dx, dpsi))
}

/// Pointwise maximum of the Hamiltonian over the control square (without
/// the constant cost multiplier):
/// `M = |psi1 - mu| + |psi2| + (psi1 - mu) v1 + psi2 v2`.
pub fn pontryagin_max(s: &ExtState, f: &FlowField) -> Result<f64, PmpError> {
    let v = f.velocity(s.t, s.x)?;
    let sigma = s.switching_u1();
    Ok(sigma.abs() + s.psi[1].abs() + sigma * v[0] + s.psi[1] * v[1])
}

/// Cost multiplier recovered from the free-final-time condition
/// `h(T) = 0`: with the shooting normalization `|psi(0)| = 1` the scale is
/// fixed, so `lambda` equals the Hamiltonian maximum at the final state.
pub fn recover_lambda(samples: &[ExtState], f: &FlowField) -> Result<f64, PmpError> {
    let last = samples.last().ok_or(PmpError::WrongMode {
        expected: "non-empty trajectory",
    })?;
    pontryagin_max(last, f)
}

/// Minimum of `|psi1 - mu| + |psi2|` over the stored samples. The
/// non-degeneracy consequence of the maximum principle requires this to
/// stay positive; candidates below `1e-6` are flagged degenerate.
pub fn nontriviality_margin(samples: &[ExtState]) -> f64 {
    samples
        .iter()
        .map(|s| s.switching_u1().abs() + s.psi[1].abs())
        .fold(f64::INFINITY, f64::min)
}

/// Threshold below which the non-triviality margin marks a candidate
/// degenerate.
pub const DEGENERACY_TOL: f64 = 1e-6;

/// Time intervals over which a singular-arc safeguard fails.
///
/// `s1_risk`: both `|psi1 - mu|` and `|dv2/dx1|` below `eps_sing` (the
/// first control component is undetermined and the safeguard derivative
/// vanishes). `s2_risk`: both `|psi2|` and `|dv1/dx2|` below `eps_sing`.
/// Isolated flagged samples contribute zero measure; only sustained runs
/// accumulate. Informational: the safeguards fail at isolated points for
/// all the built-in fields.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SingularReport {
    pub s1_risk: Vec<(f64, f64)>,
    pub s2_risk: Vec<(f64, f64)>,
    pub total_risk_measure: f64,
}

pub fn singular_diagnostics(
    samples: &[ExtState],
    f: &FlowField,
    eps_sing: f64,
) -> Result<SingularReport, PmpError> {
    let mut s1_flags = Vec::with_capacity(samples.len());
    let mut s2_flags = Vec::with_capacity(samples.len());
    for s in samples {
        let jac = f.jacobian(s.t, s.x)?;
        s1_flags.push(s.switching_u1().abs() < eps_sing && jac[1][0].abs() < eps_sing);
        s2_flags.push(s.psi[1].abs() < eps_sing && jac[0][1].abs() < eps_sing);
    }
    let s1_risk = flag_runs(samples, &s1_flags);
    let s2_risk = flag_runs(samples, &s2_flags);
    let total_risk_measure = s1_risk
        .iter()
        .chain(s2_risk.iter())
        .map(|(a, b)| b - a)
        .fold(0.0, f64::add);
    Ok(SingularReport {
        s1_risk,
        s2_risk,
        total_risk_measure,
    })
}

fn flag_runs(samples: &[ExtState], flags: &[bool]) -> Vec<(f64, f64)> {
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &flag) in flags.iter().enumerate() {
        match (flag, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((samples[s].t, samples[i - 1].t));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((samples[s].t, samples[flags.len() - 1].t));
    }
    runs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interior(x: [f64; 2], psi: [f64; 2], mu: f64) -> ExtState {
        ExtState {
            t: 0.0,
            x,
            psi,
            mu,
            mode: Mode::Interior,
        }
    }

    fn on_boundary(side: Side, x2: f64, psi: [f64; 2]) -> ExtState {
        ExtState {
            t: 0.0,
            x: [side.sign(), x2],
            psi,
            mu: psi[0],
            mode: Mode::OnBoundary(side),
        }
    }

    #[test]
    fn gamma_values() {
        let zero = FlowField::zero();
        assert_eq!(gamma(&zero, 0.0, [0.0, 0.0], 1.0).unwrap(), 1.0);

        let steady = FlowField::builtin("steady_parabolic").unwrap();
        // Boundary feedback u1 = -v1 makes the contact rate vanish.
        assert_eq!(gamma(&steady, 0.0, [1.0, 0.0], -0.25).unwrap(), 0.0);

        let tidal = FlowField::builtin("tidal_parabolic").unwrap();
        assert!((gamma(&tidal, 1.0, [0.0, 0.0], 0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn control_law_interior() {
        let zero = FlowField::zero();
        let s = interior([0.0, 0.0], [0.5, -0.2], 0.0);
        let u = control_law(&s, &zero, 1e-6).unwrap();
        assert_eq!(u.u, [1.0, -1.0]);
        assert!(!u.singular_u1 && !u.singular_u2);
    }

    #[test]
    fn control_law_boundary_feedback() {
        let steady = FlowField::builtin("steady_parabolic").unwrap();
        let s = on_boundary(Side::Right, 0.0, [0.1, 0.3]);
        let u = control_law(&s, &steady, 1e-6).unwrap();
        assert_eq!(u.u, [-0.25, 1.0]);
        assert!(!u.singular_u1);
    }

    #[test]
    fn control_law_singular_band() {
        let zero = FlowField::zero();
        let s = interior([0.0, 0.0], [1e-12, -1.0], 0.0);
        let u = control_law(&s, &zero, 1e-9).unwrap();
        assert_eq!(u.u, [0.0, -1.0]);
        assert!(u.singular_u1);
        assert!(!u.singular_u2);
    }

    #[test]
    fn control_law_boundary_infeasible() {
        let tidal = FlowField::builtin("tidal_parabolic").unwrap();
        // At t=1, v1(1, x1=1) = 1.25 >= 1: the boundary cannot be held.
        let mut s = on_boundary(Side::Right, 0.0, [0.0, 1.0]);
        s.t = 1.0;
        assert!(matches!(
            control_law(&s, &tidal, 1e-6),
            Err(PmpError::BoundaryInfeasible { .. })
        ));
    }

    #[test]
    fn boundary_mu_is_psi1() {
        assert_eq!(
            boundary_mu(&on_boundary(Side::Right, 0.0, [0.7, -0.1])).unwrap(),
            0.7
        );
        assert_eq!(
            boundary_mu(&on_boundary(Side::Left, 0.0, [0.0, 1.0])).unwrap(),
            0.0
        );
        assert_eq!(
            boundary_mu(&on_boundary(Side::Right, 0.0, [-0.3, 0.2])).unwrap(),
            -0.3
        );
        assert!(boundary_mu(&interior([0.0; 2], [1.0, 0.0], 0.0)).is_err());
    }

    #[test]
    fn rhs_zero_field() {
        let zero = FlowField::zero();
        let s = interior([0.0, 0.0], [0.3, -0.8], 0.0);
        let (dx, dpsi) = rhs(&s, &zero, [-1.0, -1.0]).unwrap();
        assert_eq!(dx, [-1.0, -1.0]);
        assert_eq!(dpsi, [0.0, 0.0]);
    }

    #[test]
    fn rhs_steady_interior() {
        // Hand-substitution of the Jacobian rows ((0.25, 0), (-2, 0)) at
        // x = (1, 0) with psi = (1, 0), mu = 0, u = (1, -1).
        let steady = FlowField::builtin("steady_parabolic").unwrap();
        let s = interior([1.0, 0.0], [1.0, 0.0], 0.0);
        let (dx, dpsi) = rhs(&s, &steady, [1.0, -1.0]).unwrap();
        assert_eq!(dx, [1.25, -2.0]);
        assert_eq!(dpsi, [-0.25, 0.0]);
    }

    #[test]
    fn rhs_boundary_psi1_terms_cancel() {
        // On the boundary mu = psi1, so dpsi reduces to
        // (-psi2 dv2/dx1, -psi2 dv2/dx2) independently of psi1.
        let steady = FlowField::builtin("steady_parabolic").unwrap();
        for &(psi1, psi2) in &[(0.9, 0.4), (-0.2, 1.0), (0.0, -0.6)] {
            let s = on_boundary(Side::Right, -2.0, [psi1, psi2]);
            let u = control_law(&s, &steady, 1e-6).unwrap();
            let (dx, dpsi) = rhs(&s, &steady, u.u).unwrap();
            assert_eq!(dx[0], 0.0);
            assert!((dpsi[0] - 2.0 * psi2).abs() < 1e-12, "dpsi1 = 2 psi2");
            assert!(dpsi[1].abs() < 1e-12, "dpsi2 = 0");
        }
    }

    #[test]
    fn rhs_boundary_reduction_all_builtins() {
        for b in crate::flowfield::Builtin::all() {
            let f = FlowField::from_builtin(b);
            for &side in &[Side::Right, Side::Left] {
                for &(psi1, psi2) in &[(0.8, -0.5), (-0.1, 0.7)] {
                    let mut s = on_boundary(side, -3.0, [psi1, psi2]);
                    s.t = 0.3; // |v1| < 1 for every builtin at t=0.3
                    let u = control_law(&s, &f, 1e-6).unwrap();
                    let (_, dpsi) = rhs(&s, &f, u.u).unwrap();
                    let jac = f.jacobian(s.t, s.x).unwrap();
                    let expect = [-psi2 * jac[1][0], -psi2 * jac[1][1]];
                    assert!((dpsi[0] - expect[0]).abs() < 1e-12);
                    assert!((dpsi[1] - expect[1]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pontryagin_max_values() {
        let zero = FlowField::zero();
        for theta in [0.0_f64, 0.7, 2.9, 4.4] {
            let s = interior([0.2, -0.3], [theta.cos(), theta.sin()], 0.0);
            let m = pontryagin_max(&s, &zero).unwrap();
            assert!((m - (theta.cos().abs() + theta.sin().abs())).abs() < 1e-15);
        }

        let s = interior([0.5, 0.5], [0.0, 0.0], 0.0);
        assert_eq!(
            pontryagin_max(&s, &FlowField::builtin("shear_tidal").unwrap()).unwrap(),
            0.0
        );

        let steady = FlowField::builtin("steady_parabolic").unwrap();
        let s = interior([1.0, 0.0], [1.0, 0.0], 0.0);
        assert!((pontryagin_max(&s, &steady).unwrap() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn lambda_and_margin_zero_field() {
        // Under the zero field psi is constant along a shot, so the
        // recovered multiplier is |cos theta| + |sin theta|.
        let zero = FlowField::zero();
        let theta = 5.0 * std::f64::consts::PI / 4.0;
        let psi = [theta.cos(), theta.sin()];
        let samples: Vec<ExtState> = (0..100)
            .map(|i| {
                let t = 0.7 * i as f64 / 99.0;
                let mut s = interior([-t, -t], psi, 0.0);
                s.t = t;
                s
            })
            .collect();
        let lambda = recover_lambda(&samples, &zero).unwrap();
        assert!((lambda - (psi[0].abs() + psi[1].abs())).abs() < 1e-12);
        let margin = nontriviality_margin(&samples);
        assert!((margin - (psi[0].abs() + psi[1].abs())).abs() < 1e-12);

        let const_psi = vec![interior([0.0, 0.0], [0.6, -0.8], 0.0); 10];
        assert!((nontriviality_margin(&const_psi) - 1.4).abs() < 1e-12);
    }

    #[test]
    fn degenerate_arc_flagged() {
        let samples: Vec<ExtState> = (0..10)
            .map(|i| interior([0.0, -(i as f64)], [0.0, 0.0], 0.0))
            .collect();
        assert!(nontriviality_margin(&samples) < DEGENERACY_TOL);
    }

    #[test]
    fn singular_diagnostics_constructed_arc() {
        // psi = (0, -1), mu = 0 under the zero field: psi1 - mu = 0 and
        // dv2/dx1 = 0 everywhere, so the whole duration is S1 risk.
        let zero = FlowField::zero();
        let samples: Vec<ExtState> = (0..=100)
            .map(|i| {
                let t = i as f64 * 0.01;
                let mut s = interior([0.0, -t], [0.0, -1.0], 0.0);
                s.t = t;
                s
            })
            .collect();
        let report = singular_diagnostics(&samples, &zero, 1e-6).unwrap();
        assert_eq!(report.s1_risk.len(), 1);
        assert!((report.s1_risk[0].1 - report.s1_risk[0].0 - 1.0).abs() < 1e-12);
        assert!((report.total_risk_measure - 1.0).abs() < 1e-12);
        // psi2 = -1 is far from singular.
        assert!(report.s2_risk.is_empty());
    }

    #[test]
    fn singular_diagnostics_shear_s2_empty() {
        // dv1/dx2 = 0.1 != 0 everywhere for the sheared field, so S2 risk
        // never flags even with psi2 = 0.
        let f = FlowField::builtin("shear_tidal").unwrap();
        let samples: Vec<ExtState> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.01;
                let mut s = interior([0.3, -t], [1.0, 0.0], 0.0);
                s.t = t;
                s
            })
            .collect();
        let report = singular_diagnostics(&samples, &f, 1e-6).unwrap();
        assert!(report.s2_risk.is_empty());
    }

    #[test]
    fn isolated_flags_have_zero_measure() {
        let zero = FlowField::zero();
        let mut samples: Vec<ExtState> = (0..=10)
            .map(|i| {
                let t = i as f64 * 0.1;
                let mut s = interior([0.1, 0.0], [0.5, 0.5], 0.0);
                s.t = t;
                s
            })
            .collect();
        // One isolated sample sits exactly on both singular conditions.
        samples[5].psi = [0.0, 0.5];
        let report = singular_diagnostics(&samples, &zero, 1e-6).unwrap();
        assert_eq!(report.s1_risk.len(), 1);
        assert_eq!(report.total_risk_measure, 0.0);
    }
}
