//! Fixed-step classical RK4 propagation of the augmented state with event
//! detection.
//!
//! The control is frozen per step at its start-of-step feedback value:
//! re-evaluating the sign functions inside RK4 stages would make the
//! right-hand side discontinuous within a step and degrade the order,
//! while switch times are resolved to O(tau) which the solver tolerances
//! absorb. Events, in priority order within a step: terminal capture
//! (bracketed distance minimum refined by golden section on the
//! interpolated path), boundary contact (located by linear interpolation
//! of `x1` in the crossing step), domain exit in `x2`, horizon. Boundary
//! arcs additionally stop when the holding feedback becomes infeasible
//! (`|v1| >= 1`, a forced departure) or when the measure multiplier stops
//! being monotone in the direction the boundary side requires.

use crate::flowfield::FlowField;
use crate::pmp::{self, ControlDecision, ExtState, Mode, PmpError, Side};

/// Per-step slack allowed before a boundary-arc multiplier sample counts
/// as violating the required monotonicity.
pub const MU_MONOTONE_TOL: f64 = 1e-9;

/// Local distance minima are refined only when the bracket middle is
/// within this many terminal tolerances of the target.
const REFINE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IntegrateError {
    #[error("non-finite state at t={t}")]
    NonFinite { t: f64 },
    #[error(transparent)]
    Pmp(#[from] PmpError),
    #[error("departure branch contradicts the maximum condition at t={t}")]
    InconsistentDeparture { t: f64 },
}

/// Everything the stepping loop needs to know about the problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationParams {
    pub tau: f64,
    pub terminal_tol: f64,
    pub eps_sing: f64,
    pub t_max: f64,
    /// State-constraint half-width (the boundary sits at `x1 = +-bound`).
    pub bound: f64,
    /// Shots are abandoned when `x2` leaves this interval.
    pub x2_range: (f64, f64),
    /// Target point B.
    pub target: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    BoundaryHit(Side),
    TerminalHit,
    DomainExit,
    HorizonReached,
    ForcedDeparture(Side),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub t: f64,
    pub state: ExtState,
}

/// How a run ended: a detected event, the caller's step budget, or a
/// boundary-arc multiplier monotonicity violation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    Event(Event),
    StepBudget,
    MuMonotonicity { t: f64 },
}

/// Closest approach to the target seen along a run, refined at local
/// minima near the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestApproach {
    pub t: f64,
    pub point: [f64; 2],
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordMode {
    /// Keep nothing; summary fields only.
    None,
    /// Keep every step-boundary state plus the event state, and the
    /// per-step controls.
    Full,
    /// Keep every n-th step-boundary state (boundary walks record their
    /// departure-candidate grid this way).
    Stride(usize),
}

/// Control selection while integrating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlPolicy {
    /// Feedback from the maximum condition at every step.
    Feedback,
    /// A departure branch leaving a boundary arc: `u1` is committed to the
    /// inward direction while the switching function sits in the singular
    /// band. Leaving the band against the committed sign within the first
    /// `consistency_window` steps aborts the branch.
    Departure { u1: f64, consistency_window: usize },
}

/// One maximal integrated stretch: samples at step boundaries (when
/// recorded) plus the event state, per-step controls, and how it stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub samples: Vec<ExtState>,
    pub controls: Vec<ControlDecision>,
    pub stop: Stop,
    /// Last state belonging to the arc (equals the event state when the
    /// run ended in an event).
    pub end: ExtState,
    /// Completed steps.
    pub steps: usize,
    pub closest: ClosestApproach,
}

impl Segment {
    pub fn event(&self) -> Option<&Event> {
        match &self.stop {
            Stop::Event(e) => Some(e),
            _ => None,
        }
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

fn lerp_state(a: &ExtState, b: &ExtState, t: f64) -> ExtState {
    let span = b.t - a.t;
    let w = if span > 0.0 { (t - a.t) / span } else { 0.0 };
    ExtState {
        t,
        x: [
            a.x[0] + w * (b.x[0] - a.x[0]),
            a.x[1] + w * (b.x[1] - a.x[1]),
        ],
        psi: [
            a.psi[0] + w * (b.psi[0] - a.psi[0]),
            a.psi[1] + w * (b.psi[1] - a.psi[1]),
        ],
        mu: a.mu + w * (b.mu - a.mu),
        mode: a.mode,
    }
}

/// One RK4 step with an explicitly supplied (frozen) control. In boundary
/// mode the lateral position is re-pinned and `mu` refreshed to `psi1`
/// afterwards.
pub fn rk4_step_with(
    s: &ExtState,
    f: &FlowField,
    u: [f64; 2],
    tau: f64,
) -> Result<ExtState, IntegrateError> {
    let stage = |t: f64, x: [f64; 2], psi: [f64; 2]| -> Result<([f64; 2], [f64; 2]), PmpError> {
        let probe = ExtState {
            t,
            x,
            psi,
            mu: s.mu,
            mode: s.mode,
        };
        pmp::rhs(&probe, f, u)
    };
    let h = tau;
    let (k1x, k1p) = stage(s.t, s.x, s.psi)?;
    let (k2x, k2p) = stage(
        s.t + h / 2.0,
        [s.x[0] + h / 2.0 * k1x[0], s.x[1] + h / 2.0 * k1x[1]],
        [s.psi[0] + h / 2.0 * k1p[0], s.psi[1] + h / 2.0 * k1p[1]],
    )?;
    let (k3x, k3p) = stage(
        s.t + h / 2.0,
        [s.x[0] + h / 2.0 * k2x[0], s.x[1] + h / 2.0 * k2x[1]],
        [s.psi[0] + h / 2.0 * k2p[0], s.psi[1] + h / 2.0 * k2p[1]],
    )?;
    let (k4x, k4p) = stage(
        s.t + h,
        [s.x[0] + h * k3x[0], s.x[1] + h * k3x[1]],
        [s.psi[0] + h * k3p[0], s.psi[1] + h * k3p[1]],
    )?;
    let mut next = ExtState {
        t: s.t + h,
        x: [
            s.x[0] + h / 6.0 * (k1x[0] + 2.0 * k2x[0] + 2.0 * k3x[0] + k4x[0]),
            s.x[1] + h / 6.0 * (k1x[1] + 2.0 * k2x[1] + 2.0 * k3x[1] + k4x[1]),
        ],
        psi: [
            s.psi[0] + h / 6.0 * (k1p[0] + 2.0 * k2p[0] + 2.0 * k3p[0] + k4p[0]),
            s.psi[1] + h / 6.0 * (k1p[1] + 2.0 * k2p[1] + 2.0 * k3p[1] + k4p[1]),
        ],
        mu: s.mu,
        mode: s.mode,
    };
    if let Mode::OnBoundary(_) = s.mode {
        next.x[0] = s.x[0];
        next.mu = next.psi[0];
    }
    if !next.is_finite() {
        return Err(IntegrateError::NonFinite { t: next.t });
    }
    Ok(next)
}

/// One RK4 step with the control taken from the feedback law at the start
/// state.
pub fn rk4_step(
    s: &ExtState,
    f: &FlowField,
    eps_sing: f64,
    tau: f64,
) -> Result<ExtState, IntegrateError> {
    let u = pmp::control_law(s, f, eps_sing)?;
    rk4_step_with(s, f, u.u, tau)
}

struct Recording {
    mode: RecordMode,
    samples: Vec<ExtState>,
    controls: Vec<ControlDecision>,
}

impl Recording {
    fn new(mode: RecordMode, s0: &ExtState) -> Recording {
        let mut rec = Recording {
            mode,
            samples: Vec::new(),
            controls: Vec::new(),
        };
        match mode {
            RecordMode::None => {}
            RecordMode::Full | RecordMode::Stride(_) => rec.samples.push(*s0),
        }
        rec
    }

    fn push_step(&mut self, step: usize, control: &ControlDecision, next: &ExtState) {
        match self.mode {
            RecordMode::None => {}
            RecordMode::Full => {
                self.controls.push(*control);
                self.samples.push(*next);
            }
            RecordMode::Stride(k) => {
                if k > 0 && step.is_multiple_of(k) {
                    self.samples.push(*next);
                }
            }
        }
    }

    /// Replace everything after `t` with the interpolated event state.
    fn truncate_to_event(&mut self, event_state: &ExtState) {
        if matches!(self.mode, RecordMode::None) {
            return;
        }
        let mut popped = 0usize;
        while self
            .samples
            .last()
            .is_some_and(|s| s.t >= event_state.t - 1e-15)
        {
            self.samples.pop();
            popped += 1;
        }
        if matches!(self.mode, RecordMode::Full) {
            for _ in 1..popped {
                self.controls.pop();
            }
            if self.samples.is_empty() {
                self.controls.clear();
            }
        }
        self.samples.push(*event_state);
    }
}

/// Integrate from `s0` until the first event, abort, budget exhaustion or
/// multiplier monotonicity violation.
pub fn integrate_until_event(
    s0: &ExtState,
    f: &FlowField,
    params: &IntegrationParams,
    policy: ControlPolicy,
    budget: Option<usize>,
    record: RecordMode,
) -> Result<Segment, IntegrateError> {
    if !s0.is_finite() {
        return Err(IntegrateError::NonFinite { t: s0.t });
    }
    let mut rec = Recording::new(record, s0);
    let refine_below = REFINE_FACTOR * params.terminal_tol;
    let d0 = dist(s0.x, params.target);
    let mut closest = ClosestApproach {
        t: s0.t,
        point: s0.x,
        distance: d0,
    };
    let finish = |rec: Recording, stop: Stop, end: ExtState, steps: usize, closest| Segment {
        samples: rec.samples,
        controls: rec.controls,
        stop,
        end,
        steps,
        closest,
    };
    if d0 < params.terminal_tol {
        let event = Event {
            kind: EventKind::TerminalHit,
            t: s0.t,
            state: *s0,
        };
        return Ok(finish(rec, Stop::Event(event), *s0, 0, closest));
    }

    let mut escape = match policy {
        ControlPolicy::Feedback => None,
        ControlPolicy::Departure {
            u1,
            consistency_window,
        } => Some((u1, consistency_window)),
    };
    let mut window: Option<(ExtState, f64, ExtState, f64)> = None; // two previous samples
    let mut cur = *s0;
    let mut d_cur = d0;
    let mut steps = 0usize;

    loop {
        if let Some(b) = budget {
            if steps >= b {
                return Ok(finish(rec, Stop::StepBudget, cur, steps, closest));
            }
        }
        // A shot abandoned while still approaching the target inside the
        // capture radius (no distance bracket has formed yet) is a
        // capture, not a miss.
        let capture_here = |kind: EventKind| -> EventKind {
            if d_cur < params.terminal_tol {
                EventKind::TerminalHit
            } else {
                kind
            }
        };
        if cur.t + params.tau > params.t_max + 1e-12 {
            let event = Event {
                kind: capture_here(EventKind::HorizonReached),
                t: cur.t,
                state: cur,
            };
            return Ok(finish(rec, Stop::Event(event), cur, steps, closest));
        }

        // Frozen control for this step.
        let control = match compute_control(&cur, f, params, &mut escape, steps) {
            Ok(c) => c,
            Err(StepAbort::Forced(side)) => {
                let event = Event {
                    kind: capture_here(EventKind::ForcedDeparture(side)),
                    t: cur.t,
                    state: cur,
                };
                return Ok(finish(rec, Stop::Event(event), cur, steps, closest));
            }
            Err(StepAbort::Hard(e)) => return Err(e),
        };

        let next = rk4_step_with(&cur, f, control.u, params.tau)?;

        // Boundary arcs must keep the multiplier monotone in the direction
        // the side dictates; the first violating step ends the arc.
        if let Mode::OnBoundary(side) = cur.mode {
            let d_mu = next.mu - cur.mu;
            let violated = match side {
                Side::Right => d_mu > MU_MONOTONE_TOL,
                Side::Left => d_mu < -MU_MONOTONE_TOL,
            };
            if violated {
                return Ok(finish(
                    rec,
                    Stop::MuMonotonicity { t: next.t },
                    cur,
                    steps,
                    closest,
                ));
            }
        }

        steps += 1;
        rec.push_step(steps, &control, &next);
        let d_next = dist(next.x, params.target);
        if d_next < closest.distance {
            closest = ClosestApproach {
                t: next.t,
                point: next.x,
                distance: d_next,
            };
        }

        // Candidate terminal event: bracketed local minimum of the
        // distance, refined on the interpolated path.
        let mut terminal: Option<(f64, ExtState, f64)> = None;
        if let Some((w0, d0w, w1, d1w)) = &window {
            if *d1w <= *d0w && *d1w <= d_next && *d1w < refine_below {
                let (tm, sm, dm) = refine_minimum(w0, w1, &next, params.target);
                if dm < closest.distance {
                    closest = ClosestApproach {
                        t: tm,
                        point: sm.x,
                        distance: dm,
                    };
                }
                if dm < params.terminal_tol {
                    terminal = Some((tm, sm, dm));
                }
            }
        }

        // Candidate boundary contact (interior mode only).
        let mut contact: Option<(f64, ExtState, Side)> = None;
        if cur.mode == Mode::Interior && next.x[0].abs() >= params.bound {
            let side = if next.x[0] > 0.0 {
                Side::Right
            } else {
                Side::Left
            };
            let edge = side.sign() * params.bound;
            let denom = next.x[0] - cur.x[0];
            let frac = if denom != 0.0 {
                ((edge - cur.x[0]) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let tc = cur.t + frac * params.tau;
            let mut sc = lerp_state(&cur, &next, tc);
            sc.x[0] = edge;
            contact = Some((tc, sc, side));
        }

        let terminal_first = match (&terminal, &contact) {
            (Some((tm, _, _)), Some((tc, _, _))) => tm <= tc,
            (Some(_), None) => true,
            _ => false,
        };
        if terminal_first {
            let (tm, sm, _) = terminal.unwrap();
            rec.truncate_to_event(&sm);
            let event = Event {
                kind: EventKind::TerminalHit,
                t: tm,
                state: sm,
            };
            return Ok(finish(rec, Stop::Event(event), sm, steps, closest));
        }
        if let Some((tc, sc, side)) = contact {
            rec.truncate_to_event(&sc);
            let d_c = dist(sc.x, params.target);
            let kind = if d_c < params.terminal_tol {
                EventKind::TerminalHit
            } else {
                EventKind::BoundaryHit(side)
            };
            if d_c < closest.distance {
                closest = ClosestApproach {
                    t: tc,
                    point: sc.x,
                    distance: d_c,
                };
            }
            let event = Event {
                kind,
                t: tc,
                state: sc,
            };
            return Ok(finish(rec, Stop::Event(event), sc, steps, closest));
        }
        if next.x[1] < params.x2_range.0 || next.x[1] > params.x2_range.1 {
            let event = Event {
                kind: EventKind::DomainExit,
                t: next.t,
                state: next,
            };
            return Ok(finish(rec, Stop::Event(event), next, steps, closest));
        }

        window = Some((cur, d_cur, next, d_next));
        cur = next;
        d_cur = d_next;
    }
}

enum StepAbort {
    Forced(Side),
    Hard(IntegrateError),
}

fn compute_control(
    cur: &ExtState,
    f: &FlowField,
    params: &IntegrationParams,
    escape: &mut Option<(f64, usize)>,
    steps: usize,
) -> Result<ControlDecision, StepAbort> {
    if let Mode::OnBoundary(_) = cur.mode {
        return match pmp::control_law(cur, f, params.eps_sing) {
            Ok(c) => Ok(c),
            Err(PmpError::BoundaryInfeasible { side, .. }) => Err(StepAbort::Forced(side)),
            Err(e) => Err(StepAbort::Hard(e.into())),
        };
    }
    let mut control =
        pmp::control_law(cur, f, params.eps_sing).map_err(|e| StepAbort::Hard(e.into()))?;
    if let Some((u1, consistency_window)) = *escape {
        let sigma = cur.psi[0] - cur.mu;
        if sigma.abs() <= params.eps_sing {
            control.u[0] = u1;
            control.singular_u1 = true;
        } else if sigma.signum() == u1.signum() {
            *escape = None; // committed direction confirmed
        } else if steps < consistency_window {
            return Err(StepAbort::Hard(IntegrateError::InconsistentDeparture {
                t: cur.t,
            }));
        } else {
            *escape = None; // a genuine later switch back
        }
    }
    Ok(control)
}

/// Golden-section search for the distance minimum on the piecewise-linear
/// path through three consecutive samples.
fn refine_minimum(
    w0: &ExtState,
    w1: &ExtState,
    w2: &ExtState,
    target: [f64; 2],
) -> (f64, ExtState, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let state_at = |t: f64| -> ExtState {
        if t <= w1.t {
            lerp_state(w0, w1, t)
        } else {
            lerp_state(w1, w2, t)
        }
    };
    let g = |t: f64| dist(state_at(t).x, target);
    let (mut a, mut b) = (w0.t, w2.t);
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    for _ in 0..80 {
        if b - a < 1e-14 {
            break;
        }
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - INVPHI * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INVPHI * (b - a);
            gd = g(d);
        }
    }
    let tm = 0.5 * (a + b);
    let sm = state_at(tm);
    let dm = dist(sm.x, target);
    (tm, sm, dm)
}
