//! Shooting on the initial adjoint angle.
//!
//! The two-point boundary value problem is closed by parameterizing the
//! unknown initial adjoint as `psi(0) = (cos theta, sin theta)` and
//! sweeping `theta` over `[0, 2pi)`. Each shot integrates forward until an
//! event. A trajectory that captures the target is an extremal. A
//! trajectory that reaches the lateral boundary continues along it only if
//! the measure multiplier can stay continuous there (`|psi1 - mu|` below
//! the junction tolerance); the boundary arc is then followed, spawning
//! interior departure branches with the multiplier frozen at its departure
//! value.
//!
//! Near-misses are refined by bisection on two sign functions: the lateral
//! miss at closest approach (the cross product of the A->B direction with
//! the offset of the closest point from B), which isolates interior
//! extremals, and the junction residual `psi1(t*) - mu(t*-)` between
//! adjacent shots crossing the same boundary side, which isolates
//! admissible junctions. Promising departure times along a boundary arc
//! are refined the same way down to the step size.

use crate::flowfield::{AssumptionReport, FlowField};
use crate::integrate::{
    integrate_until_event, ClosestApproach, ControlPolicy, EventKind, IntegrationParams,
    RecordMode, Segment, Stop,
};
use crate::pmp::{self, ExtState, Mode, Side, SingularReport};
use rayon::prelude::*;
use std::f64::consts::TAU;

pub const DEFAULT_TAU: f64 = 1e-4;
pub const DEFAULT_THETA_STEP: f64 = 1e-2;
pub const DEFAULT_TERMINAL_TOL: f64 = 1e-3;
pub const DEFAULT_JUNCTION_TOL: f64 = 1e-3;
pub const DEFAULT_EPS_SING: f64 = 1e-6;
pub const DEFAULT_DEPARTURE_STRIDE: usize = 100;

/// Hard cap on the default horizon.
const T_MAX_CAP: f64 = 20.0;
/// Bisection brackets on theta are abandoned below this width.
const THETA_BRACKET_MIN: f64 = 1e-9;
/// Maximum number of boundary arcs along one candidate.
const MAX_JUNCTION_DEPTH: usize = 6;
/// Steps a departure branch gets to confirm its committed control sign.
const DEPARTURE_CONSISTENCY_WINDOW: usize = 10;
/// A departure branch re-contacting the boundary this quickly is a
/// degenerate continuation of the arc it left, not a real branch.
const MIN_BRANCH_STEPS: usize = 5;
/// Departure-time refinement triggers when a branch passes within this
/// many terminal tolerances of the target.
const PROMISING_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecError {
    #[error("{name} must be positive")]
    NonPositive { name: &'static str },
    #[error("start and target coincide")]
    CoincidentEndpoints,
    #[error("{name} lies outside the strip |x1| <= {bound}")]
    OutsideStrip { name: &'static str, bound: f64 },
    #[error("departure stride must be at least 1")]
    BadStride,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("candidate reconstruction diverged from exploration: {0}")]
    Reconstruct(String),
}

/// Problem statement plus solver parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub field: FlowField,
    pub a: [f64; 2],
    pub b: [f64; 2],
    /// State-constraint half-width. The navigation problem fixes it at 1;
    /// it is kept settable so the constraint can be moved out of play.
    pub bound: f64,
    pub tau: f64,
    pub theta_step: f64,
    pub terminal_tol: f64,
    pub junction_tol: f64,
    pub eps_sing: f64,
    pub t_max: f64,
    /// Steps between spawned departure branches along a boundary arc.
    pub departure_stride: usize,
}

impl ProblemSpec {
    /// Build a spec with default solver parameters and an automatic
    /// horizon. The constraint strip has the problem's standard
    /// half-width 1.
    pub fn new(field: FlowField, a: [f64; 2], b: [f64; 2]) -> Result<ProblemSpec, SpecError> {
        ProblemSpec::with_bound(field, a, b, 1.0)
    }

    /// Like [`ProblemSpec::new`] with an explicit constraint half-width
    /// (useful to move the strip out of play).
    pub fn with_bound(
        field: FlowField,
        a: [f64; 2],
        b: [f64; 2],
        bound: f64,
    ) -> Result<ProblemSpec, SpecError> {
        let mut spec = ProblemSpec {
            field,
            a,
            b,
            bound,
            tau: DEFAULT_TAU,
            theta_step: DEFAULT_THETA_STEP,
            terminal_tol: DEFAULT_TERMINAL_TOL,
            junction_tol: DEFAULT_JUNCTION_TOL,
            eps_sing: DEFAULT_EPS_SING,
            t_max: T_MAX_CAP,
            departure_stride: DEFAULT_DEPARTURE_STRIDE,
        };
        spec.validate()?;
        spec.t_max = spec.default_t_max();
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        for (name, v) in [
            ("tau", self.tau),
            ("theta_step", self.theta_step),
            ("terminal_tol", self.terminal_tol),
            ("junction_tol", self.junction_tol),
            ("eps_sing", self.eps_sing),
            ("t_max", self.t_max),
            ("bound", self.bound),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(SpecError::NonPositive { name });
            }
        }
        if self.departure_stride == 0 {
            return Err(SpecError::BadStride);
        }
        if self.a == self.b {
            return Err(SpecError::CoincidentEndpoints);
        }
        if self.a[0].abs() > self.bound {
            return Err(SpecError::OutsideStrip {
                name: "start",
                bound: self.bound,
            });
        }
        if self.b[0].abs() > self.bound {
            return Err(SpecError::OutsideStrip {
                name: "target",
                bound: self.bound,
            });
        }
        Ok(())
    }

    /// Shots are abandoned when `x2` leaves the endpoint bounding box
    /// padded by 1.
    pub fn x2_range(&self) -> (f64, f64) {
        (
            self.a[1].min(self.b[1]) - 1.0,
            self.a[1].max(self.b[1]) + 1.0,
        )
    }

    /// `3 |A - B|_inf / (1 - sup|v1|)`, capped at 20. The supremum comes
    /// from a coarse admissibility scan over the problem region; when the
    /// flow nearly or fully overpowers the control the cap applies.
    pub fn default_t_max(&self) -> f64 {
        let report = self.assumption_report((0.0, T_MAX_CAP), 41, 21);
        let linf = (self.a[0] - self.b[0])
            .abs()
            .max((self.a[1] - self.b[1]).abs());
        let denom = 1.0 - report.sup_abs_v1;
        if denom <= 0.05 {
            T_MAX_CAP
        } else {
            (3.0 * linf / denom).min(T_MAX_CAP)
        }
    }

    /// Admissibility scan of the field over this problem's region.
    pub fn assumption_report(&self, t_range: (f64, f64), nt: usize, nx: usize) -> AssumptionReport {
        self.field
            .check_assumption_h(t_range, nt, nx, self.bound, self.x2_range())
    }

    fn integration_params(&self) -> IntegrationParams {
        IntegrationParams {
            tau: self.tau,
            terminal_tol: self.terminal_tol,
            eps_sing: self.eps_sing,
            t_max: self.t_max,
            bound: self.bound,
            x2_range: self.x2_range(),
            target: self.b,
        }
    }

    fn initial_state(&self, theta: f64) -> ExtState {
        ExtState {
            t: 0.0,
            x: self.a,
            psi: [theta.cos(), theta.sin()],
            mu: 0.0,
            mode: Mode::Interior,
        }
    }
}

/// Which boundary sides an extremal touches; classification records the
/// first side touched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Inner,
    RightBoundary,
    LeftBoundary,
}

impl Classification {
    fn from_sides(sides: &[Side]) -> Classification {
        match sides.first() {
            None => Classification::Inner,
            Some(Side::Right) => Classification::RightBoundary,
            Some(Side::Left) => Classification::LeftBoundary,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Classification::Inner => "inner",
            Classification::RightBoundary => "right_boundary",
            Classification::LeftBoundary => "left_boundary",
        }
    }

    fn rank(self) -> usize {
        match self {
            Classification::Inner => 0,
            Classification::RightBoundary => 1,
            Classification::LeftBoundary => 2,
        }
    }
}

/// One maximal interior or boundary stretch of an extremal.
#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub mode: Mode,
    pub segment: Segment,
}

/// A trajectory satisfying the necessary conditions from start to target.
#[derive(Debug, Clone, PartialEq)]
pub struct Extremal {
    pub theta0: f64,
    pub arcs: Vec<Arc>,
    pub travel_time: f64,
    pub classification: Classification,
    /// Cost multiplier recovered from the free-final-time condition.
    pub lambda: f64,
    pub lambda_nonnegative: bool,
    pub nontriviality_margin: f64,
    pub degenerate: bool,
    pub singular_report: SingularReport,
    /// Times at which the candidate left a boundary arc.
    pub departure_times: Vec<f64>,
    pub terminal_miss: f64,
}

impl Extremal {
    pub fn samples(&self) -> impl Iterator<Item = &ExtState> {
        self.arcs.iter().flat_map(|a| a.segment.samples.iter())
    }

    pub fn final_state(&self) -> &ExtState {
        &self.arcs.last().expect("extremal has arcs").segment.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepDiagnostics {
    /// Initial-angle integrations: the raw sweep plus bisection trials.
    pub shots_fired: usize,
    /// Departure branches integrated along boundary arcs.
    pub branches_spawned: usize,
    /// Bisection iterations, on the angle and on departure times.
    pub bisection_iterations: usize,
}

/// All extremals found for one problem, with the minimal-time one flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalField {
    pub extremals: Vec<Extremal>,
    pub optimal_index: Option<usize>,
    pub problem: ProblemSpec,
    pub diagnostics: SweepDiagnostics,
}

impl ExtremalField {
    pub fn optimal(&self) -> Option<&Extremal> {
        self.optimal_index.map(|i| &self.extremals[i])
    }

    /// (inner, right-boundary, left-boundary) counts.
    pub fn classification_counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for e in &self.extremals {
            match e.classification {
                Classification::Inner => counts.0 += 1,
                Classification::RightBoundary => counts.1 += 1,
                Classification::LeftBoundary => counts.2 += 1,
            }
        }
        counts
    }
}

/// Outcome of a single shot, for callers driving individual angles.
#[derive(Debug, Clone, PartialEq)]
pub enum ShotOutcome {
    Extremals(Vec<Extremal>),
    Miss(MissRecord),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissRecord {
    pub theta: f64,
    pub closest: Option<ClosestApproach>,
    /// Present when the first arc crossed a boundary: the side, the hit
    /// time and the junction residual `psi1(t*) - mu(t*-)`.
    pub crossing: Option<(Side, f64, f64)>,
}

/// Fire one shot and assemble any extremals it produces.
pub fn shoot(theta: f64, spec: &ProblemSpec) -> Result<ShotOutcome, SweepError> {
    spec.validate()?;
    let params = spec.integration_params();
    let mut counters = SweepDiagnostics::default();
    let probe = probe_shot(theta, spec, &params, &mut counters);
    if probe.recipes.is_empty() {
        let crossing = match probe.first {
            ArcEnd::Boundary {
                side,
                t_hit,
                residual,
                ..
            } => Some((side, t_hit, residual)),
            _ => None,
        };
        return Ok(ShotOutcome::Miss(MissRecord {
            theta,
            closest: probe.closest,
            crossing,
        }));
    }
    let mut extremals = Vec::new();
    for recipe in &probe.recipes {
        extremals.push(reconstruct(recipe, spec, &params)?);
    }
    Ok(ShotOutcome::Extremals(extremals))
}

/// Sweep the initial angle, refine brackets, deduplicate and assemble the
/// field of extremals. Finding nothing is a reported outcome, not an
/// error.
pub fn sweep(spec: &ProblemSpec) -> Result<ExtremalField, SweepError> {
    spec.validate()?;
    let params = spec.integration_params();
    let n = (TAU / spec.theta_step).ceil() as usize;

    let shots: Vec<(Probe, SweepDiagnostics)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let theta = k as f64 * spec.theta_step;
            let mut counters = SweepDiagnostics::default();
            counters.shots_fired += 1;
            let probe = probe_shot(theta, spec, &params, &mut counters);
            (probe, counters)
        })
        .collect();

    let mut diagnostics = SweepDiagnostics::default();
    let mut candidates: Vec<Recipe> = Vec::new();
    for (probe, c) in &shots {
        merge_counters(&mut diagnostics, c);
        candidates.extend(probe.recipes.iter().cloned());
    }

    // Bracket pairs over adjacent shots (wrapping around 2 pi).
    let mut lateral_pairs = Vec::new();
    let mut junction_pairs = Vec::new();
    let mut edge_pairs = Vec::new();
    let mut window_seeds = Vec::new();
    for k in 0..n {
        let (lo, hi) = (k, (k + 1) % n);
        let theta_lo = k as f64 * spec.theta_step;
        let theta_hi = if hi == 0 {
            TAU
        } else {
            hi as f64 * spec.theta_step
        };
        let (pl, ph) = (&shots[lo].0, &shots[hi].0);

        // A raw shot that landed inside a junction window but whose
        // boundary exploration produced nothing still marks a window
        // worth scanning.
        if let ArcEnd::Boundary {
            side,
            residual,
            passed: true,
            ..
        } = pl.first
        {
            if pl.recipes.is_empty() {
                window_seeds.push((theta_lo, side, residual, None));
            }
        }

        // A failed boundary junction adjacent to any other outcome
        // brackets the edge of the boundary-hitting family, where the
        // junction residual reaches zero one-sidedly.
        let failed_hit = |p: &Probe| match p.first {
            ArcEnd::Boundary {
                side,
                passed: false,
                ..
            } if p.recipes.is_empty() => Some(side),
            _ => None,
        };
        match (failed_hit(pl), failed_hit(ph)) {
            (Some(sl), Some(sh)) if sl == sh => {
                // Two-sided residual change inside one family.
                if let (
                    ArcEnd::Boundary { residual: rl, .. },
                    ArcEnd::Boundary { residual: rh, .. },
                ) = (pl.first, ph.first)
                {
                    if rl * rh < 0.0 {
                        junction_pairs.push((theta_lo, theta_hi, rl, rh));
                    }
                }
            }
            (Some(side), None) => edge_pairs.push((theta_lo, theta_hi, side, true)),
            (None, Some(side)) => edge_pairs.push((theta_lo, theta_hi, side, false)),
            (Some(sl), Some(_)) => {
                // Adjacent hits on different sides: each family has an
                // edge inside the pair.
                edge_pairs.push((theta_lo, theta_hi, sl, true));
            }
            (None, None) => {}
        }

        if pl.recipes.is_empty() && ph.recipes.is_empty() {
            if let (Some(ml), Some(mh)) = (pl.lateral, ph.lateral) {
                if ml * mh < 0.0 {
                    lateral_pairs.push((theta_lo, theta_hi, ml));
                }
            }
        }
    }

    let refined: Vec<(Vec<Recipe>, SweepDiagnostics)> = lateral_pairs
        .par_iter()
        .map(|&(lo, hi, m_lo)| bisect_lateral(spec, &params, lo, hi, m_lo))
        .chain(
            junction_pairs
                .par_iter()
                .map(|&(lo, hi, r_lo, r_hi)| bisect_junction(spec, &params, lo, hi, r_lo, r_hi)),
        )
        .chain(edge_pairs.par_iter().map(|&(lo, hi, side, hit_is_lo)| {
            bisect_family_edge(spec, &params, lo, hi, side, hit_is_lo)
        }))
        .chain(
            window_seeds
                .par_iter()
                .map(|&(theta, side, residual, slope)| {
                    refine_junction_window(spec, &params, theta, side, residual, slope)
                }),
        )
        .collect();
    for (recipes, c) in refined {
        merge_counters(&mut diagnostics, &c);
        candidates.extend(recipes);
    }

    let kept = deduplicate(candidates, spec.theta_step);
    let mut extremals = Vec::with_capacity(kept.len());
    for recipe in &kept {
        extremals.push(reconstruct(recipe, spec, &params)?);
    }
    extremals.sort_by(|a, b| {
        a.theta0
            .total_cmp(&b.theta0)
            .then_with(|| a.departure_times.len().cmp(&b.departure_times.len()))
            .then_with(|| {
                for (ta, tb) in a.departure_times.iter().zip(&b.departure_times) {
                    match ta.total_cmp(tb) {
                        std::cmp::Ordering::Equal => continue,
                        other => return other,
                    }
                }
                std::cmp::Ordering::Equal
            })
    });
    let optimal_index = extremals
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.travel_time.total_cmp(&b.travel_time))
        .map(|(i, _)| i);

    Ok(ExtremalField {
        extremals,
        optimal_index,
        problem: spec.clone(),
        diagnostics,
    })
}

fn merge_counters(into: &mut SweepDiagnostics, from: &SweepDiagnostics) {
    into.shots_fired += from.shots_fired;
    into.branches_spawned += from.branches_spawned;
    into.bisection_iterations += from.bisection_iterations;
}

// ---------------------------------------------------------------------
// Exploration: streaming integrations that produce replayable recipes.
// ---------------------------------------------------------------------

/// Replay instructions for one candidate: the shot angle, the boundary
/// sides touched in order, and for each boundary arc the number of steps
/// walked before departing. A recipe with one fewer departure than sides
/// ends its final arc on the boundary.
#[derive(Debug, Clone, PartialEq)]
struct Recipe {
    theta0: f64,
    sides: Vec<Side>,
    departures: Vec<usize>,
    travel_time: f64,
    terminal_miss: f64,
}

impl Recipe {
    fn classification(&self) -> Classification {
        Classification::from_sides(&self.sides)
    }
}

/// How the first interior arc of a shot ended.
#[derive(Debug, Clone, Copy, PartialEq)]
enum ArcEnd {
    Terminal,
    Boundary {
        side: Side,
        t_hit: f64,
        residual: f64,
        passed: bool,
    },
    Other,
    Aborted,
}

#[derive(Debug, Clone)]
struct Probe {
    recipes: Vec<Recipe>,
    closest: Option<ClosestApproach>,
    lateral: Option<f64>,
    first: ArcEnd,
}

struct ExploreOut {
    recipes: Vec<Recipe>,
    closest: Option<ClosestApproach>,
    contact: ArcEnd,
}

fn lateral_miss(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let norm = (ab[0] * ab[0] + ab[1] * ab[1]).sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    let u = [ab[0] / norm, ab[1] / norm];
    u[0] * (p[1] - b[1]) - u[1] * (p[0] - b[0])
}

fn better_closest(
    a: Option<ClosestApproach>,
    b: Option<ClosestApproach>,
) -> Option<ClosestApproach> {
    match (a, b) {
        (Some(x), Some(y)) => Some(if y.distance < x.distance { y } else { x }),
        (x, None) => x,
        (None, y) => y,
    }
}

fn probe_shot(
    theta: f64,
    spec: &ProblemSpec,
    params: &IntegrationParams,
    counters: &mut SweepDiagnostics,
) -> Probe {
    let s0 = spec.initial_state(theta);
    let out = explore_interior(
        spec,
        params,
        theta,
        s0,
        ControlPolicy::Feedback,
        0,
        Vec::new(),
        Vec::new(),
        counters,
    );
    let lateral = out.closest.map(|c| lateral_miss(spec.a, spec.b, c.point));
    Probe {
        recipes: out.recipes,
        closest: out.closest,
        lateral,
        first: out.contact,
    }
}

#[allow(clippy::too_many_arguments)]
fn explore_interior(
    spec: &ProblemSpec,
    params: &IntegrationParams,
    theta: f64,
    state: ExtState,
    policy: ControlPolicy,
    depth: usize,
    sides: Vec<Side>,
    departures: Vec<usize>,
    counters: &mut SweepDiagnostics,
) -> ExploreOut {
    let seg =
        match integrate_until_event(&state, &spec.field, params, policy, None, RecordMode::None) {
            Ok(seg) => seg,
            Err(_) => {
                return ExploreOut {
                    recipes: Vec::new(),
                    closest: None,
                    contact: ArcEnd::Aborted,
                }
            }
        };
    let closest = Some(seg.closest);
    match seg.stop {
        Stop::Event(event) => match event.kind {
            EventKind::TerminalHit => {
                let miss = {
                    let dx = event.state.x[0] - spec.b[0];
                    let dy = event.state.x[1] - spec.b[1];
                    (dx * dx + dy * dy).sqrt()
                };
                ExploreOut {
                    recipes: vec![Recipe {
                        theta0: theta,
                        sides,
                        departures,
                        travel_time: event.t,
                        terminal_miss: miss,
                    }],
                    closest,
                    contact: ArcEnd::Terminal,
                }
            }
            EventKind::BoundaryHit(side) => {
                let residual = event.state.psi[0] - event.state.mu;
                let degenerate_branch = matches!(policy, ControlPolicy::Departure { .. })
                    && seg.steps < MIN_BRANCH_STEPS;
                let passed = residual.abs() < spec.junction_tol
                    && depth < MAX_JUNCTION_DEPTH
                    && !degenerate_branch;
                if !passed {
                    return ExploreOut {
                        recipes: Vec::new(),
                        closest,
                        contact: ArcEnd::Boundary {
                            side,
                            t_hit: event.t,
                            residual,
                            passed: false,
                        },
                    };
                }
                let entry = ExtState {
                    mu: event.state.psi[0],
                    mode: Mode::OnBoundary(side),
                    ..event.state
                };
                let mut new_sides = sides;
                new_sides.push(side);
                let sub = follow_boundary_from(
                    spec, params, theta, entry, side, depth, new_sides, departures, counters,
                );
                ExploreOut {
                    recipes: sub.recipes,
                    closest: better_closest(closest, sub.closest),
                    contact: ArcEnd::Boundary {
                        side,
                        t_hit: event.t,
                        residual,
                        passed: true,
                    },
                }
            }
            EventKind::DomainExit | EventKind::HorizonReached | EventKind::ForcedDeparture(_) => {
                ExploreOut {
                    recipes: Vec::new(),
                    closest,
                    contact: ArcEnd::Other,
                }
            }
        },
        Stop::StepBudget | Stop::MuMonotonicity { .. } => ExploreOut {
            recipes: Vec::new(),
            closest,
            contact: ArcEnd::Other,
        },
    }
}

struct BranchTrial {
    step: usize,
    closest: Option<ClosestApproach>,
    lateral: Option<f64>,
    found: bool,
}

/// Walk a boundary arc, spawn departure branches on the stride grid (plus
/// a mandatory branch at a forced departure), and refine promising
/// departure brackets by bisection on the departure step.
#[allow(clippy::too_many_arguments)]
fn follow_boundary_from(
    spec: &ProblemSpec,
    params: &IntegrationParams,
    theta: f64,
    entry: ExtState,
    side: Side,
    depth: usize,
    sides: Vec<Side>,
    departures: Vec<usize>,
    counters: &mut SweepDiagnostics,
) -> ExploreOut {
    let walk = match integrate_until_event(
        &entry,
        &spec.field,
        params,
        ControlPolicy::Feedback,
        None,
        RecordMode::Stride(spec.departure_stride),
    ) {
        Ok(seg) => seg,
        Err(_) => {
            return ExploreOut {
                recipes: Vec::new(),
                closest: None,
                contact: ArcEnd::Aborted,
            }
        }
    };
    let mut closest = Some(walk.closest);
    let mut recipes = Vec::new();

    // The boundary trajectory itself may capture the target.
    if let Some(event) = walk.event() {
        if event.kind == EventKind::TerminalHit {
            let dx = event.state.x[0] - spec.b[0];
            let dy = event.state.x[1] - spec.b[1];
            recipes.push(Recipe {
                theta0: theta,
                sides: sides.clone(),
                departures: departures.clone(),
                travel_time: event.t,
                terminal_miss: (dx * dx + dy * dy).sqrt(),
            });
            return ExploreOut {
                recipes,
                closest,
                contact: ArcEnd::Other,
            };
        }
    }

    // Departure candidates: stride-grid snapshots, plus the forced
    // departure state when the holding feedback failed.
    let mut grid: Vec<(usize, ExtState)> = Vec::new();
    for s in &walk.samples {
        let k_float = (s.t - entry.t) / spec.tau;
        let k = k_float.round() as usize;
        if (k_float - k as f64).abs() < 1e-6
            && k.is_multiple_of(spec.departure_stride)
            && k <= walk.steps
        {
            grid.push((k, *s));
        }
    }
    let mut candidates = grid.clone();
    if let Some(event) = walk.event() {
        if let EventKind::ForcedDeparture(_) = event.kind {
            if candidates.last().map(|(k, _)| *k) != Some(walk.steps) {
                candidates.push((walk.steps, event.state));
            }
        }
    }

    let run_branch =
        |step: usize, from: &ExtState| -> (BranchTrial, Vec<Recipe>, SweepDiagnostics) {
            let mut branch_counters = SweepDiagnostics {
                branches_spawned: 1,
                ..Default::default()
            };
            let branch_state = ExtState {
                mu: from.psi[0],
                mode: Mode::Interior,
                ..*from
            };
            let mut branch_departures = departures.clone();
            branch_departures.push(step);
            let out = explore_interior(
                spec,
                params,
                theta,
                branch_state,
                ControlPolicy::Departure {
                    u1: -side.sign(),
                    consistency_window: DEPARTURE_CONSISTENCY_WINDOW,
                },
                depth + 1,
                sides.clone(),
                branch_departures,
                &mut branch_counters,
            );
            let trial = BranchTrial {
                step,
                closest: out.closest,
                lateral: out.closest.map(|c| lateral_miss(spec.a, spec.b, c.point)),
                found: !out.recipes.is_empty(),
            };
            (trial, out.recipes, branch_counters)
        };

    // Branches are independent; results merge in departure order.
    let branch_results: Vec<(BranchTrial, Vec<Recipe>, SweepDiagnostics)> = candidates
        .par_iter()
        .map(|(step, state)| run_branch(*step, state))
        .collect();
    let mut trials = Vec::with_capacity(candidates.len());
    for (trial, branch_recipes, branch_counters) in branch_results {
        closest = better_closest(closest, trial.closest);
        recipes.extend(branch_recipes);
        merge_counters(counters, &branch_counters);
        trials.push(trial);
    }

    // Refine adjacent departure brackets whose lateral miss changes sign
    // and whose best approach is promising.
    let promising = PROMISING_FACTOR * spec.terminal_tol;
    for w in trials.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.found || b.found {
            continue;
        }
        let (Some(ma), Some(mb)) = (a.lateral, b.lateral) else {
            continue;
        };
        let close_enough = a
            .closest
            .map(|c| c.distance)
            .min_by_f64(b.closest.map(|c| c.distance))
            .map(|d| d < promising)
            .unwrap_or(false);
        if ma * mb >= 0.0 || !close_enough {
            continue;
        }
        let (mut lo, mut hi, mut m_lo) = (a.step, b.step, ma);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            let Some(state_mid) = boundary_state_at(spec, params, &grid, &entry, mid) else {
                break;
            };
            counters.bisection_iterations += 1;
            let (trial, branch_recipes, branch_counters) = run_branch(mid, &state_mid);
            closest = better_closest(closest, trial.closest);
            recipes.extend(branch_recipes);
            merge_counters(counters, &branch_counters);
            if trial.found {
                break;
            }
            match trial.lateral {
                Some(m) if m * m_lo > 0.0 => {
                    lo = mid;
                    m_lo = m;
                }
                Some(_) => hi = mid,
                None => break,
            }
        }
    }

    ExploreOut {
        recipes,
        closest,
        contact: ArcEnd::Other,
    }
}

trait MinByF64 {
    fn min_by_f64(self, other: Option<f64>) -> Option<f64>;
}

impl MinByF64 for Option<f64> {
    fn min_by_f64(self, other: Option<f64>) -> Option<f64> {
        match (self, other) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, None) => a,
            (None, b) => b,
        }
    }
}

/// Boundary state after exactly `step` steps from the arc entry, replayed
/// deterministically from the nearest recorded snapshot.
fn boundary_state_at(
    spec: &ProblemSpec,
    params: &IntegrationParams,
    grid: &[(usize, ExtState)],
    entry: &ExtState,
    step: usize,
) -> Option<ExtState> {
    let (base_step, base_state) = grid
        .iter()
        .rev()
        .find(|(k, _)| *k <= step)
        .copied()
        .unwrap_or((0, *entry));
    if base_step == step {
        return Some(base_state);
    }
    let seg = integrate_until_event(
        &base_state,
        &spec.field,
        params,
        ControlPolicy::Feedback,
        Some(step - base_step),
        RecordMode::None,
    )
    .ok()?;
    if seg.steps == step - base_step {
        Some(seg.end)
    } else {
        None
    }
}

// ---------------------------------------------------------------------
// Bisection on the shot angle.
// ---------------------------------------------------------------------

/// Bisect a lateral-miss sign change between two near misses until a
/// capture or bracket exhaustion.
fn bisect_lateral(
    spec: &ProblemSpec,
    params: &IntegrationParams,
    mut lo: f64,
    mut hi: f64,
    mut value_lo: f64,
) -> (Vec<Recipe>, SweepDiagnostics) {
    let mut counters = SweepDiagnostics::default();
    let mut recipes = Vec::new();
    while hi - lo > THETA_BRACKET_MIN {
        let mid = 0.5 * (lo + hi);
        counters.shots_fired += 1;
        counters.bisection_iterations += 1;
        let probe = probe_shot(mid, spec, params, &mut counters);
        if !probe.recipes.is_empty() {
            recipes = probe.recipes;
            break;
        }
        match probe.lateral {
            Some(v) if v * value_lo > 0.0 => {
                lo = mid;
                value_lo = v;
            }
            Some(_) => hi = mid,
            None => break,
        }
    }
    (recipes, counters)
}

/// Bisect a two-sided junction-residual sign change (both shots cross the
/// same boundary side). Once a trial lands inside the junction window the
/// window is scanned for the departure geometry that actually reaches the
/// target.
fn bisect_junction(
    spec: &ProblemSpec,
    params: &IntegrationParams,
    mut lo: f64,
    mut hi: f64,
    mut r_lo: f64,
    mut r_hi: f64,
) -> (Vec<Recipe>, SweepDiagnostics) {
    let mut counters = SweepDiagnostics::default();
    let mut recipes = Vec::new();
    while hi - lo > THETA_BRACKET_MIN {
        let mid = 0.5 * (lo + hi);
        counters.shots_fired += 1;
        counters.bisection_iterations += 1;
        let probe = probe_shot(mid, spec, params, &mut counters);
        recipes.extend(probe.recipes.iter().cloned());
        match probe.first {
            ArcEnd::Boundary {
                side,
                residual,
                passed,
                ..
            } => {
                if passed {
                    if recipes.is_empty() {
                        let slope = (r_hi - r_lo) / (hi - lo);
                        let (more, c) =
                            refine_junction_window(spec, params, mid, side, residual, Some(slope));
                        merge_counters(&mut counters, &c);
                        recipes.extend(more);
                    }
                    break;
                }
                if residual * r_lo > 0.0 {
                    lo = mid;
                    r_lo = residual;
                } else {
                    hi = mid;
                    r_hi = residual;
                }
            }
            _ => break,
        }
    }
    (recipes, counters)
}

/// Bisect toward the edge of a boundary-hitting family: between a shot
/// whose first arc crossed `side` with a failed junction and a neighbor
/// that did not cross it, the hit time and the control switch time
/// coalesce and the junction residual goes to zero there. Trials inside
/// the family keep failing the junction with a shrinking residual until
/// one passes; the window is then scanned. Extremals found by trials
/// along the way (the no-hit side may capture directly) are collected.
fn bisect_family_edge(
    spec: &ProblemSpec,
    params: &IntegrationParams,
    lo: f64,
    hi: f64,
    side: Side,
    hit_is_lo: bool,
) -> (Vec<Recipe>, SweepDiagnostics) {
    let mut counters = SweepDiagnostics::default();
    let mut recipes = Vec::new();
    let (mut hit, mut other) = if hit_is_lo { (lo, hi) } else { (hi, lo) };
    let mut hit_history: Option<(f64, f64)> = None; // last failed (theta, residual)
    while (hit - other).abs() > THETA_BRACKET_MIN {
        let mid = 0.5 * (hit + other);
        counters.shots_fired += 1;
        counters.bisection_iterations += 1;
        let probe = probe_shot(mid, spec, params, &mut counters);
        recipes.extend(probe.recipes.iter().cloned());
        match probe.first {
            ArcEnd::Boundary {
                side: s,
                residual,
                passed,
                ..
            } if s == side => {
                if passed {
                    if recipes.is_empty() {
                        let slope = hit_history
                            .map(|(t, r)| (residual - r) / (mid - t))
                            .filter(|s| s.is_finite() && s.abs() > 1e-6);
                        let (more, c) =
                            refine_junction_window(spec, params, mid, side, residual, slope);
                        merge_counters(&mut counters, &c);
                        recipes.extend(more);
                    }
                    break;
                }
                hit_history = Some((mid, residual));
                hit = mid;
            }
            _ => other = mid,
        }
    }
    (recipes, counters)
}

/// Scan across a junction window (the interval of shot angles whose
/// boundary contact passes the junction test) and refine the lateral miss
/// of the boundary-departure trees by bisection inside it. The first
/// passing angle found by residual bisection generally sits at the edge
/// of the window while the departure branch that actually reaches the
/// target needs an angle in its interior, so the window is sampled and
/// consecutive passing samples with a lateral sign change are refined.
fn refine_junction_window(
    spec: &ProblemSpec,
    params: &IntegrationParams,
    theta_pass: f64,
    side: Side,
    residual_pass: f64,
    slope: Option<f64>,
) -> (Vec<Recipe>, SweepDiagnostics) {
    const WINDOW_SAMPLES: usize = 9;
    let mut counters = SweepDiagnostics::default();
    let mut recipes = Vec::new();
    let slope = slope.unwrap_or(0.5_f64.copysign(residual_pass));
    let center = (theta_pass - residual_pass / slope)
        .clamp(theta_pass - spec.theta_step, theta_pass + spec.theta_step);
    let half_width = (spec.junction_tol / slope.abs()).clamp(1e-4, spec.theta_step);

    let in_window = |probe: &Probe| -> bool {
        matches!(
            probe.first,
            ArcEnd::Boundary { side: s, passed: true, .. } if s == side
        )
    };

    let mut samples: Vec<(f64, Option<f64>)> = Vec::new(); // (theta, lateral if passing)
    for k in 0..WINDOW_SAMPLES {
        let theta = center - half_width + 2.0 * half_width * k as f64 / (WINDOW_SAMPLES - 1) as f64;
        counters.shots_fired += 1;
        let probe = probe_shot(theta, spec, params, &mut counters);
        recipes.extend(probe.recipes.iter().cloned());
        let lateral = if in_window(&probe) {
            probe.lateral
        } else {
            None
        };
        samples.push((theta, lateral));
    }
    if !recipes.is_empty() {
        return (recipes, counters);
    }

    for w in samples.windows(2) {
        let ((t_lo, Some(m_lo)), (t_hi, Some(m_hi))) = (w[0], w[1]) else {
            continue;
        };
        if m_lo * m_hi >= 0.0 {
            continue;
        }
        let (mut lo, mut hi, mut value_lo) = (t_lo, t_hi, m_lo);
        while hi - lo > THETA_BRACKET_MIN {
            let mid = 0.5 * (lo + hi);
            counters.shots_fired += 1;
            counters.bisection_iterations += 1;
            let probe = probe_shot(mid, spec, params, &mut counters);
            if !probe.recipes.is_empty() {
                recipes.extend(probe.recipes.iter().cloned());
                break;
            }
            match if in_window(&probe) {
                probe.lateral
            } else {
                None
            } {
                Some(v) if v * value_lo > 0.0 => {
                    lo = mid;
                    value_lo = v;
                }
                Some(_) => hi = mid,
                None => break,
            }
        }
        if !recipes.is_empty() {
            break;
        }
    }
    (recipes, counters)
}

// ---------------------------------------------------------------------
// Deduplication and reconstruction.
// ---------------------------------------------------------------------

/// Keep one candidate per cluster of same-classification recipes closer
/// than a quarter sweep step in the shot angle (bisection from both
/// neighbors of a root converges to the same extremal). The best of a
/// cluster is the one hitting the target most accurately.
fn deduplicate(mut candidates: Vec<Recipe>, theta_step: f64) -> Vec<Recipe> {
    let gap = theta_step / 4.0;
    candidates.sort_by(|a, b| {
        (a.classification().rank())
            .cmp(&b.classification().rank())
            .then(a.theta0.total_cmp(&b.theta0))
            .then(a.terminal_miss.total_cmp(&b.terminal_miss))
    });
    let mut kept: Vec<Recipe> = Vec::new();
    let mut cluster: Vec<Recipe> = Vec::new();
    let flush = |cluster: &mut Vec<Recipe>, kept: &mut Vec<Recipe>| {
        if cluster.is_empty() {
            return;
        }
        let best = cluster
            .iter()
            .min_by(|a, b| {
                a.terminal_miss
                    .total_cmp(&b.terminal_miss)
                    .then(a.travel_time.total_cmp(&b.travel_time))
                    .then(a.theta0.total_cmp(&b.theta0))
            })
            .cloned()
            .expect("non-empty cluster");
        kept.push(best);
        cluster.clear();
    };
    for recipe in candidates {
        let same_cluster = cluster.last().is_some_and(|prev: &Recipe| {
            prev.classification() == recipe.classification() && (recipe.theta0 - prev.theta0) <= gap
        });
        if !same_cluster {
            flush(&mut cluster, &mut kept);
        }
        cluster.push(recipe);
    }
    flush(&mut cluster, &mut kept);

    // The sweep is circular: clusters at 0 and 2 pi may be one extremal.
    kept.sort_by(|a, b| {
        a.classification()
            .rank()
            .cmp(&b.classification().rank())
            .then(a.theta0.total_cmp(&b.theta0))
    });
    let mut result: Vec<Recipe> = Vec::new();
    for recipe in kept {
        let wraps = result.iter().position(|r| {
            r.classification() == recipe.classification()
                && (recipe.theta0 - r.theta0)
                    .rem_euclid(TAU)
                    .min((r.theta0 - recipe.theta0).rem_euclid(TAU))
                    <= gap
        });
        match wraps {
            Some(i) => {
                if recipe.terminal_miss < result[i].terminal_miss {
                    result[i] = recipe;
                }
            }
            None => result.push(recipe),
        }
    }
    result
}

/// Replay a recipe with full recording and assemble the extremal.
fn reconstruct(
    recipe: &Recipe,
    spec: &ProblemSpec,
    params: &IntegrationParams,
) -> Result<Extremal, SweepError> {
    let fail = |msg: String| SweepError::Reconstruct(msg);
    let mut arcs: Vec<Arc> = Vec::new();
    let mut departure_times = Vec::new();
    let mut state = spec.initial_state(recipe.theta0);
    let mut policy = ControlPolicy::Feedback;
    let mut terminal: Option<(f64, ExtState)> = None;

    for (i, &side) in recipe.sides.iter().enumerate() {
        let seg =
            integrate_until_event(&state, &spec.field, params, policy, None, RecordMode::Full)
                .map_err(|e| fail(format!("interior arc {i}: {e}")))?;
        let event = *seg
            .event()
            .ok_or_else(|| fail(format!("interior arc {i} ended without an event")))?;
        if event.kind != EventKind::BoundaryHit(side) {
            return Err(fail(format!(
                "interior arc {i} expected to reach side {side:?}, got {:?}",
                event.kind
            )));
        }
        arcs.push(Arc {
            mode: Mode::Interior,
            segment: seg,
        });
        let entry = ExtState {
            mu: event.state.psi[0],
            mode: Mode::OnBoundary(side),
            ..event.state
        };
        if let Some(&steps) = recipe.departures.get(i) {
            let walk = integrate_until_event(
                &entry,
                &spec.field,
                params,
                ControlPolicy::Feedback,
                Some(steps),
                RecordMode::Full,
            )
            .map_err(|e| fail(format!("boundary arc {i}: {e}")))?;
            if walk.steps != steps {
                return Err(fail(format!(
                    "boundary arc {i} walked {} of {steps} steps",
                    walk.steps
                )));
            }
            let end = walk.end;
            arcs.push(Arc {
                mode: Mode::OnBoundary(side),
                segment: walk,
            });
            departure_times.push(end.t);
            state = ExtState {
                mu: end.psi[0],
                mode: Mode::Interior,
                ..end
            };
            policy = ControlPolicy::Departure {
                u1: -side.sign(),
                consistency_window: DEPARTURE_CONSISTENCY_WINDOW,
            };
        } else {
            // Final arc stays on the boundary until capture.
            let walk = integrate_until_event(
                &entry,
                &spec.field,
                params,
                ControlPolicy::Feedback,
                None,
                RecordMode::Full,
            )
            .map_err(|e| fail(format!("final boundary arc: {e}")))?;
            let event = *walk
                .event()
                .ok_or_else(|| fail("final boundary arc ended without event".into()))?;
            if event.kind != EventKind::TerminalHit {
                return Err(fail(format!(
                    "final boundary arc expected terminal capture, got {:?}",
                    event.kind
                )));
            }
            arcs.push(Arc {
                mode: Mode::OnBoundary(side),
                segment: walk,
            });
            terminal = Some((event.t, event.state));
        }
    }

    if terminal.is_none() {
        let seg =
            integrate_until_event(&state, &spec.field, params, policy, None, RecordMode::Full)
                .map_err(|e| fail(format!("final interior arc: {e}")))?;
        let event = *seg
            .event()
            .ok_or_else(|| fail("final interior arc ended without event".into()))?;
        if event.kind != EventKind::TerminalHit {
            return Err(fail(format!(
                "final interior arc expected terminal capture, got {:?}",
                event.kind
            )));
        }
        arcs.push(Arc {
            mode: Mode::Interior,
            segment: seg,
        });
        terminal = Some((event.t, event.state));
    }

    let (travel_time, final_state) = terminal.expect("terminal set on all paths");
    if (travel_time - recipe.travel_time).abs() > 1e-9 {
        return Err(fail(format!(
            "travel time drifted: explored {} vs replayed {travel_time}",
            recipe.travel_time
        )));
    }

    let all_samples: Vec<ExtState> = arcs
        .iter()
        .flat_map(|a| a.segment.samples.iter().copied())
        .collect();
    let lambda = pmp::recover_lambda(&all_samples, &spec.field)
        .map_err(|e| fail(format!("lambda recovery: {e}")))?;
    let margin = pmp::nontriviality_margin(&all_samples);
    let singular_report = pmp::singular_diagnostics(&all_samples, &spec.field, spec.eps_sing)
        .map_err(|e| fail(format!("singular diagnostics: {e}")))?;
    let dx = final_state.x[0] - spec.b[0];
    let dy = final_state.x[1] - spec.b[1];

    Ok(Extremal {
        theta0: recipe.theta0,
        arcs,
        travel_time,
        classification: recipe.classification(),
        lambda,
        lambda_nonnegative: lambda >= -1e-6,
        nontriviality_margin: margin,
        degenerate: margin < pmp::DEGENERACY_TOL,
        singular_report,
        departure_times,
        terminal_miss: (dx * dx + dy * dy).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn zero_spec(b: [f64; 2]) -> ProblemSpec {
        ProblemSpec::new(FlowField::zero(), [0.0, 0.0], b).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(
            ProblemSpec::new(FlowField::zero(), [0.0, 0.0], [0.0, 0.0]),
            Err(SpecError::CoincidentEndpoints)
        ));
        assert!(matches!(
            ProblemSpec::new(FlowField::zero(), [1.5, 0.0], [0.0, -1.0]),
            Err(SpecError::OutsideStrip { .. })
        ));
        let mut spec = zero_spec([-0.7, -0.7]);
        spec.tau = 0.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn default_horizon() {
        let spec = zero_spec([-0.7, -0.7]);
        assert!((spec.t_max - 2.1).abs() < 1e-9, "t_max = {}", spec.t_max);

        let steady = FlowField::builtin("steady_parabolic").unwrap();
        let spec = ProblemSpec::new(steady, [0.0, 0.0], [-0.5, -6.0]).unwrap();
        assert_eq!(spec.t_max, 20.0); // 3*6/0.75 = 24, capped
    }

    #[test]
    fn shoot_direct_hit() {
        let spec = zero_spec([-0.7, -0.7]);
        let outcome = shoot(5.0 * PI / 4.0, &spec).unwrap();
        match outcome {
            ShotOutcome::Extremals(es) => {
                assert_eq!(es.len(), 1);
                let e = &es[0];
                assert!((e.travel_time - 0.7).abs() < 1e-3, "T = {}", e.travel_time);
                assert_eq!(e.classification, Classification::Inner);
                assert!(e.terminal_miss < 1e-3);
                assert!(!e.degenerate);
                assert!(e.lambda_nonnegative);
                // Zero field: psi constant, lambda = |cos| + |sin|.
                let expect = (5.0 * PI / 4.0).cos().abs() + (5.0 * PI / 4.0).sin().abs();
                assert!((e.lambda - expect).abs() < 1e-9);
            }
            other => panic!("expected extremal, got {other:?}"),
        }
    }

    #[test]
    fn shoot_failed_junction_is_miss() {
        // Away from the target: hits the right boundary with psi1 = cos(pi/4),
        // far above the junction tolerance.
        let spec = zero_spec([-0.7, -0.7]);
        let outcome = shoot(PI / 4.0, &spec).unwrap();
        match outcome {
            ShotOutcome::Miss(miss) => {
                let (side, t_hit, residual) = miss.crossing.expect("crossed a boundary");
                assert_eq!(side, Side::Right);
                assert!((t_hit - 1.0).abs() < 2e-4);
                assert!((residual - (PI / 4.0).cos()).abs() < 1e-9);
                assert!(miss.closest.is_some());
            }
            other => panic!("expected miss, got {other:?}"),
        }
    }

    #[test]
    fn sweep_zero_field_diagonal() {
        let mut spec = zero_spec([-0.3, -0.3]);
        spec.theta_step = 0.05;
        let field = sweep(&spec).unwrap();
        assert!(!field.extremals.is_empty());
        let optimal = field.optimal().unwrap();
        assert!(
            (optimal.travel_time - 0.3).abs() < 1e-3,
            "optimal T = {}",
            optimal.travel_time
        );
        // The whole bang-bang cone hits the target in the same time.
        for e in &field.extremals {
            assert_eq!(e.classification, Classification::Inner);
            assert!((e.travel_time - 0.3).abs() < 1e-3);
            let first = &e.arcs[0].segment.samples[0];
            assert!((first.x[0]).abs() < 1e-12 && (first.x[1]).abs() < 1e-12);
            assert_eq!(first.mu, 0.0);
            for s in e.samples() {
                assert!(s.x[0].abs() <= spec.bound + 1e-9);
            }
            assert!(e.terminal_miss < spec.terminal_tol);
        }
        assert!(field.diagnostics.shots_fired >= 126);
    }

    #[test]
    fn bang_bang_cone_shares_travel_time() {
        // Zero field: every angle in the open quadrant toward the target
        // commands the same vertex control, so the whole cone captures in
        // the same time.
        let spec = zero_spec([-0.7, -0.7]);
        for theta in [
            PI + 0.2,
            5.0 * PI / 4.0 - 0.3,
            5.0 * PI / 4.0,
            5.0 * PI / 4.0 + 0.3,
            1.5 * PI - 0.2,
        ] {
            match shoot(theta, &spec).unwrap() {
                ShotOutcome::Extremals(es) => {
                    assert!((es[0].travel_time - 0.7).abs() < 1e-3, "theta = {theta}");
                }
                other => panic!("theta = {theta}: expected capture, got {other:?}"),
            }
        }
    }

    #[test]
    fn sweep_is_deterministic() {
        let mut spec = zero_spec([-0.4, -0.4]);
        spec.theta_step = 0.1;
        let a = sweep(&spec).unwrap();
        let b = sweep(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_reports_empty_field() {
        // Unreachable target (beyond the horizon): no extremals, exit is a
        // report rather than an error.
        let mut spec = zero_spec([0.0, -5.0]);
        spec.t_max = 1.0;
        spec.theta_step = 0.2;
        let field = sweep(&spec).unwrap();
        assert!(field.extremals.is_empty());
        assert_eq!(field.optimal_index, None);
    }

    #[test]
    fn dedup_keeps_separated_candidates() {
        let mk = |theta0: f64, miss: f64| Recipe {
            theta0,
            sides: Vec::new(),
            departures: Vec::new(),
            travel_time: 1.0,
            terminal_miss: miss,
        };
        let kept = deduplicate(
            vec![mk(1.0, 1e-4), mk(1.001, 5e-5), mk(1.02, 2e-4)],
            DEFAULT_THETA_STEP,
        );
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].terminal_miss, 5e-5); // best of the near pair
    }

    #[test]
    fn dedup_distinct_classifications_kept() {
        let mk = |theta0: f64, sides: Vec<Side>| Recipe {
            theta0,
            sides,
            departures: vec![100],
            travel_time: 1.0,
            terminal_miss: 1e-4,
        };
        let kept = deduplicate(
            vec![mk(1.0, vec![Side::Right]), mk(1.0005, vec![Side::Left])],
            DEFAULT_THETA_STEP,
        );
        assert_eq!(kept.len(), 2);
    }
}
