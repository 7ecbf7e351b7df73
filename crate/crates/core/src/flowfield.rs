//! Planar flow fields `v(t, x)` with velocity, spatial Jacobian and
//! time-partial access.
//!
//! Three built-in fields come with analytic derivatives; arbitrary fields
//! can be assembled from a pair of parsed expressions, in which case the
//! derivatives are central finite differences. The built-ins are a steady
//! parabolic channel profile, the same profile with a tidal cross-stream
//! oscillation, and a sheared profile with a tidal downstream pulse.

use crate::fieldexpr::{EvalError, Expr};
use std::f64::consts::PI;
use std::fmt;

/// Step used for finite-difference derivatives of expression fields,
/// relative to `max(1, |coordinate|)`.
const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianSource {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    /// `v = (x1/4, -x1^2)`
    SteadyParabolic,
    /// `v = (x1/4 + sin(pi t/2), -x1^2)`
    TidalParabolic,
    /// `v = (x1/4 + x2/10, -x1^2 - sin^2(pi t/2)/2)`
    ShearTidal,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::SteadyParabolic => "steady_parabolic",
            Builtin::TidalParabolic => "tidal_parabolic",
            Builtin::ShearTidal => "shear_tidal",
        }
    }

    pub fn all() -> [Builtin; 3] {
        [
            Builtin::SteadyParabolic,
            Builtin::TidalParabolic,
            Builtin::ShearTidal,
        ]
    }

    /// Component formulas in the expression grammar; used by tests and for
    /// plot annotations.
    pub fn expression_strings(self) -> (&'static str, &'static str) {
        match self {
            Builtin::SteadyParabolic => ("x1/4", "-x1^2"),
            Builtin::TidalParabolic => ("x1/4 + sin(pi*t/2)", "-x1^2"),
            Builtin::ShearTidal => ("x1/4 + x2/10", "-x1^2 - 1/2*sin(pi*t/2)^2"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Builtin(Builtin),
    Expression { vx: Expr, vy: Expr },
}

/// A time-dependent planar velocity field. Immutable; safe for concurrent
/// read-only evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    id: String,
    kind: Kind,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error(
        "unknown builtin field `{0}` (expected steady_parabolic, tidal_parabolic or shear_tidal)"
    )]
    UnknownBuiltin(String),
    #[error("evaluating {component} at (t={t}, x1={x1}, x2={x2}): {source}")]
    Eval {
        component: &'static str,
        t: f64,
        x1: f64,
        x2: f64,
        source: EvalError,
    },
}

impl FlowField {
    /// Look up a built-in field by name.
    pub fn builtin(name: &str) -> Result<FlowField, FieldError> {
        for b in Builtin::all() {
            if b.name() == name {
                return Ok(FlowField::from_builtin(b));
            }
        }
        Err(FieldError::UnknownBuiltin(name.to_string()))
    }

    pub fn from_builtin(builtin: Builtin) -> FlowField {
        FlowField {
            id: builtin.name().to_string(),
            kind: Kind::Builtin(builtin),
        }
    }

    /// Field with components given by parsed expressions; derivatives are
    /// finite-differenced.
    pub fn from_expressions(vx: Expr, vy: Expr) -> FlowField {
        FlowField {
            id: format!("expr:({vx},{vy})"),
            kind: Kind::Expression { vx, vy },
        }
    }

    /// The zero field. Handy in tests and as a degenerate base case.
    pub fn zero() -> FlowField {
        FlowField {
            id: "expr:(0,0)".to_string(),
            kind: Kind::Expression {
                vx: Expr::Const(0.0),
                vy: Expr::Const(0.0),
            },
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn jacobian_source(&self) -> JacobianSource {
        match self.kind {
            Kind::Builtin(_) => JacobianSource::Analytic,
            Kind::Expression { .. } => JacobianSource::FiniteDifference,
        }
    }

    /// True if the velocity depends on `t`.
    pub fn is_time_varying(&self) -> bool {
        match &self.kind {
            Kind::Builtin(Builtin::SteadyParabolic) => false,
            Kind::Builtin(_) => true,
            Kind::Expression { vx, vy } => references_t(vx) || references_t(vy),
        }
    }

    /// Human-readable component formulas, e.g. for plot annotations.
    pub fn describe(&self) -> String {
        match &self.kind {
            Kind::Builtin(b) => {
                let (vx, vy) = b.expression_strings();
                format!("{}: v = ({vx}, {vy})", b.name())
            }
            Kind::Expression { vx, vy } => format!("v = ({vx}, {vy})"),
        }
    }

    /// Velocity `(v1, v2)` at `(t, x)`.
    pub fn velocity(&self, t: f64, x: [f64; 2]) -> Result<[f64; 2], FieldError> {
        match &self.kind {
            Kind::Builtin(b) => Ok(builtin_velocity(*b, t, x)),
            Kind::Expression { vx, vy } => Ok([
                eval_component(vx, "vx", t, x)?,
                eval_component(vy, "vy", t, x)?,
            ]),
        }
    }

    /// Spatial Jacobian; `jac[i][j] = dv_i/dx_j`.
    pub fn jacobian(&self, t: f64, x: [f64; 2]) -> Result<[[f64; 2]; 2], FieldError> {
        match &self.kind {
            Kind::Builtin(b) => Ok(builtin_jacobian(*b, t, x)),
            Kind::Expression { .. } => {
                let mut jac = [[0.0; 2]; 2];
                for j in 0..2 {
                    let h = FD_STEP * x[j].abs().max(1.0);
                    let mut xp = x;
                    let mut xm = x;
                    xp[j] += h;
                    xm[j] -= h;
                    let vp = self.velocity(t, xp)?;
                    let vm = self.velocity(t, xm)?;
                    for i in 0..2 {
                        jac[i][j] = (vp[i] - vm[i]) / (2.0 * h);
                    }
                }
                Ok(jac)
            }
        }
    }

    /// `(dv1/dt, dv2/dt)` at `(t, x)`.
    pub fn time_partial(&self, t: f64, x: [f64; 2]) -> Result<[f64; 2], FieldError> {
        match &self.kind {
            Kind::Builtin(b) => Ok(builtin_time_partial(*b, t, x)),
            Kind::Expression { .. } => {
                let h = FD_STEP * t.abs().max(1.0);
                let vp = self.velocity(t + h, x)?;
                let vm = self.velocity(t - h, x)?;
                Ok([(vp[0] - vm[0]) / (2.0 * h), (vp[1] - vm[1]) / (2.0 * h)])
            }
        }
    }

    /// Scan a grid for violations of the admissibility hypothesis
    /// `|v1(t, x)| < 1`: over `t` in `t_range`, `x1` in `[-x1_bound,
    /// x1_bound]`, `x2` in `x2_range`, with `nt` x `nx` x `nx` points.
    /// Report only; violations never abort a solve.
    pub fn check_assumption_h(
        &self,
        t_range: (f64, f64),
        nt: usize,
        nx: usize,
        x1_bound: f64,
        x2_range: (f64, f64),
    ) -> AssumptionReport {
        assert!(
            nt >= 2 && nx >= 2,
            "grid must have at least 2 points per axis"
        );
        let grid = GridSpec {
            t_range,
            x1_range: (-x1_bound, x1_bound),
            x2_range,
            nt,
            nx,
        };
        let mut sup_abs_v1 = 0.0_f64;
        let mut witnesses = Vec::new();
        let mut failures = Vec::new();
        for it in 0..nt {
            let t = lerp_grid(t_range, it, nt);
            for i1 in 0..nx {
                let x1 = lerp_grid((-x1_bound, x1_bound), i1, nx);
                for i2 in 0..nx {
                    let x2 = lerp_grid(x2_range, i2, nx);
                    match self.velocity(t, [x1, x2]) {
                        Ok(v) => {
                            sup_abs_v1 = sup_abs_v1.max(v[0].abs());
                            if v[0].abs() >= 1.0 {
                                witnesses.push(Witness {
                                    t,
                                    x: [x1, x2],
                                    v1: v[0],
                                });
                            }
                        }
                        Err(e) => failures.push(EvalFailure {
                            t,
                            x: [x1, x2],
                            message: e.to_string(),
                        }),
                    }
                }
            }
        }
        AssumptionReport {
            violated: !witnesses.is_empty(),
            sup_abs_v1,
            witnesses,
            failures,
            grid,
        }
    }
}

fn references_t(expr: &Expr) -> bool {
    match expr {
        Expr::Const(_) => false,
        Expr::Var(v) => matches!(v, crate::fieldexpr::Var::T),
        Expr::Neg(inner) => references_t(inner),
        Expr::Binary(_, lhs, rhs) => references_t(lhs) || references_t(rhs),
        Expr::Call(_, arg) => references_t(arg),
    }
}

fn eval_component(
    expr: &Expr,
    component: &'static str,
    t: f64,
    x: [f64; 2],
) -> Result<f64, FieldError> {
    expr.eval(t, x[0], x[1]).map_err(|source| FieldError::Eval {
        component,
        t,
        x1: x[0],
        x2: x[1],
        source,
    })
}

fn builtin_velocity(b: Builtin, t: f64, x: [f64; 2]) -> [f64; 2] {
    match b {
        Builtin::SteadyParabolic => [x[0] / 4.0, -x[0] * x[0]],
        Builtin::TidalParabolic => [x[0] / 4.0 + (PI * t / 2.0).sin(), -x[0] * x[0]],
        Builtin::ShearTidal => {
            let s = (PI * t / 2.0).sin();
            [x[0] / 4.0 + x[1] / 10.0, -x[0] * x[0] - s * s / 2.0]
        }
    }
}

fn builtin_jacobian(b: Builtin, _t: f64, x: [f64; 2]) -> [[f64; 2]; 2] {
    match b {
        Builtin::SteadyParabolic | Builtin::TidalParabolic => [[0.25, 0.0], [-2.0 * x[0], 0.0]],
        Builtin::ShearTidal => [[0.25, 0.1], [-2.0 * x[0], 0.0]],
    }
}

fn builtin_time_partial(b: Builtin, t: f64, _x: [f64; 2]) -> [f64; 2] {
    match b {
        Builtin::SteadyParabolic => [0.0, 0.0],
        Builtin::TidalParabolic => [PI / 2.0 * (PI * t / 2.0).cos(), 0.0],
        // d/dt of -sin^2(pi t/2)/2 = -(pi/2) sin(pi t/2) cos(pi t/2)
        Builtin::ShearTidal => {
            let a = PI * t / 2.0;
            [0.0, -(PI / 2.0) * a.sin() * a.cos()]
        }
    }
}

fn lerp_grid(range: (f64, f64), i: usize, n: usize) -> f64 {
    let frac = i as f64 / (n - 1) as f64;
    range.0 + (range.1 - range.0) * frac
}

/// A grid point where `|v1| >= 1`, i.e. the cross-stream flow can
/// overpower the control and boundary arcs may be infeasible there.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub t: f64,
    pub x: [f64; 2],
    pub v1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalFailure {
    pub t: f64,
    pub x: [f64; 2],
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub t_range: (f64, f64),
    pub x1_range: (f64, f64),
    pub x2_range: (f64, f64),
    pub nt: usize,
    pub nx: usize,
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "t in [{}, {}] ({} pts), x1 in [{}, {}] ({} pts), x2 in [{}, {}] ({} pts)",
            self.t_range.0,
            self.t_range.1,
            self.nt,
            self.x1_range.0,
            self.x1_range.1,
            self.nx,
            self.x2_range.0,
            self.x2_range.1,
            self.nx
        )
    }
}

/// Result of scanning for `|v1| < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub sup_abs_v1: f64,
    pub violated: bool,
    pub witnesses: Vec<Witness>,
    pub failures: Vec<EvalFailure>,
    pub grid: GridSpec,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expr_field(vx: &str, vy: &str) -> FlowField {
        FlowField::from_expressions(Expr::parse(vx).unwrap(), Expr::parse(vy).unwrap())
    }

    fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
        assert!((a - b).abs() <= tol, "{what}: {a} vs {b}");
    }

    // Mixed absolute/relative comparison used for derivative checks.
    fn assert_rel(a: f64, b: f64, tol: f64, what: &str) {
        let scale = a.abs().max(1.0);
        assert!((a - b).abs() <= tol * scale, "{what}: {a} vs {b}");
    }

    #[test]
    fn steady_parabolic_values() {
        let f = FlowField::builtin("steady_parabolic").unwrap();
        let v = f.velocity(0.0, [1.0, -3.0]).unwrap();
        assert_eq!(v, [0.25, -1.0]);
        let jac = f.jacobian(0.0, [1.0, -3.0]).unwrap();
        assert_eq!(jac, [[0.25, 0.0], [-2.0, 0.0]]);
        assert_eq!(f.time_partial(7.3, [1.0, -3.0]).unwrap(), [0.0, 0.0]);
        assert!(!f.is_time_varying());
    }

    #[test]
    fn tidal_parabolic_values() {
        let f = FlowField::builtin("tidal_parabolic").unwrap();
        let v = f.velocity(1.0, [0.0, 0.0]).unwrap();
        assert_close(v[0], 1.0, 1e-15, "v1 at t=1");
        assert_eq!(v[1], 0.0);
        assert!(f.is_time_varying());
    }

    #[test]
    fn shear_tidal_values() {
        let f = FlowField::builtin("shear_tidal").unwrap();
        let v = f.velocity(1.0, [0.0, 1.0]).unwrap();
        assert_close(v[0], 0.1, 1e-15, "v1");
        assert_close(v[1], -0.5, 1e-15, "v2");
    }

    #[test]
    fn unknown_builtin_rejected() {
        assert!(matches!(
            FlowField::builtin("whirlpool"),
            Err(FieldError::UnknownBuiltin(_))
        ));
    }

    #[test]
    fn expression_field_matches_builtin() {
        // Velocity of the expression form agrees with the hand-coded form
        // to 1e-12 absolute on a grid.
        for b in Builtin::all() {
            let hand = FlowField::from_builtin(b);
            let (vx, vy) = b.expression_strings();
            let expr = expr_field(vx, vy);
            for it in 0..50 {
                let t = 8.0 * it as f64 / 49.0;
                for i1 in 0..50 {
                    let x1 = -1.0 + 2.0 * i1 as f64 / 49.0;
                    for i2 in 0..50 {
                        let x2 = -8.0 + 9.0 * i2 as f64 / 49.0;
                        let a = hand.velocity(t, [x1, x2]).unwrap();
                        let e = expr.velocity(t, [x1, x2]).unwrap();
                        assert_close(a[0], e[0], 1e-12, b.name());
                        assert_close(a[1], e[1], 1e-12, b.name());
                    }
                }
            }
        }
    }

    #[test]
    fn analytic_vs_finite_difference_jacobian() {
        for b in Builtin::all() {
            let hand = FlowField::from_builtin(b);
            let (vx, vy) = b.expression_strings();
            let expr = expr_field(vx, vy);
            for it in 0..20 {
                let t = 8.0 * it as f64 / 19.0;
                for i1 in 0..20 {
                    let x1 = -1.0 + 2.0 * i1 as f64 / 19.0;
                    for i2 in 0..20 {
                        let x2 = -8.0 + 9.0 * i2 as f64 / 19.0;
                        let ja = hand.jacobian(t, [x1, x2]).unwrap();
                        let jf = expr.jacobian(t, [x1, x2]).unwrap();
                        let ta = hand.time_partial(t, [x1, x2]).unwrap();
                        let tf = expr.time_partial(t, [x1, x2]).unwrap();
                        for i in 0..2 {
                            for j in 0..2 {
                                assert_rel(ja[i][j], jf[i][j], 1e-6, b.name());
                            }
                            assert_rel(ta[i], tf[i], 1e-6, b.name());
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn tidal_field_is_periodic_in_t() {
        let f = FlowField::builtin("tidal_parabolic").unwrap();
        for it in 0..40 {
            let t = 4.0 * it as f64 / 39.0;
            for i1 in 0..10 {
                let x1 = -1.0 + 2.0 * i1 as f64 / 9.0;
                let a = f.velocity(t, [x1, -2.0]).unwrap();
                let b = f.velocity(t + 4.0, [x1, -2.0]).unwrap();
                assert_close(a[0], b[0], 1e-12, "period 4 in v1");
                assert_close(a[1], b[1], 1e-12, "period 4 in v2");
            }
        }
    }

    #[test]
    fn zero_and_constant_expression_fields() {
        let zero = FlowField::zero();
        assert_eq!(zero.velocity(1.0, [0.3, -5.0]).unwrap(), [0.0, 0.0]);
        assert_eq!(zero.jacobian(1.0, [0.3, -5.0]).unwrap(), [[0.0; 2]; 2]);
        assert_eq!(zero.time_partial(1.0, [0.3, -5.0]).unwrap(), [0.0, 0.0]);

        let constant = expr_field("0.5", "0");
        assert_eq!(constant.velocity(2.0, [0.1, 0.2]).unwrap(), [0.5, 0.0]);
        assert_eq!(constant.jacobian(2.0, [0.1, 0.2]).unwrap(), [[0.0; 2]; 2]);
        assert_eq!(constant.jacobian_source(), JacobianSource::FiniteDifference);
        assert!(!constant.is_time_varying());
    }

    #[test]
    fn assumption_h_steady_holds() {
        let f = FlowField::builtin("steady_parabolic").unwrap();
        // Analytic max of |x1/4| over |x1| <= 1 is 0.25; grid includes x1 = +-1.
        let report = f.check_assumption_h((0.0, 8.0), 81, 21, 1.0, (-7.0, 1.0));
        assert!(!report.violated);
        assert!(report.witnesses.is_empty());
        assert_close(report.sup_abs_v1, 0.25, 1e-12, "sup |v1|");
    }

    #[test]
    fn assumption_h_tidal_violated() {
        let f = FlowField::builtin("tidal_parabolic").unwrap();
        // Analytic max of |x1/4 + sin(pi t/2)| is 1.25 at x1=1, t=1.
        let report = f.check_assumption_h((0.0, 8.0), 81, 21, 1.0, (-7.0, 1.0));
        assert!(report.violated);
        assert_close(report.sup_abs_v1, 1.25, 1e-12, "sup |v1|");
        assert!(report
            .witnesses
            .iter()
            .any(|w| (w.t - 1.0).abs() < 1e-12 && (w.x[0] - 1.0).abs() < 1e-12));
    }

    #[test]
    fn assumption_h_zero_field() {
        let report = FlowField::zero().check_assumption_h((0.0, 8.0), 9, 5, 1.0, (-1.0, 1.0));
        assert!(!report.violated);
        assert_eq!(report.sup_abs_v1, 0.0);
    }

    #[test]
    fn eval_failures_recorded_separately() {
        let f = expr_field("1/x1", "0");
        let report = f.check_assumption_h((0.0, 1.0), 2, 3, 1.0, (-1.0, 1.0));
        // x1 grid is {-1, 0, 1}; the x1=0 column fails to evaluate.
        assert!(!report.failures.is_empty());
        assert!(report.violated); // |1/x1| = 1 at x1 = +-1
    }
}
