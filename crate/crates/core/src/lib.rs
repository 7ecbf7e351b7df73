//! Field-of-extremals solver for planar time-optimal navigation in a
//! time-dependent flow, with controls in the unit square and the lateral
//! state constraint `|x1| <= 1`.
//!
//! The solver follows the indirect route: candidate trajectories satisfy
//! the first-order necessary conditions (state/adjoint dynamics, bang-bang
//! control from the switching functions, a continuous measure multiplier
//! attached to the state constraint), and the two-point boundary value
//! problem is closed by shooting on the initial adjoint angle. Boundary
//! arcs are followed with the holding feedback `u1 = -v1` and left through
//! departure branches; the full set of trajectories reaching the target is
//! the field of extremals and the one with minimal travelling time is the
//! reported optimum.
//!
//! Modules, bottom up:
//! - [`fieldexpr`]: expressions in `t, x1, x2` for user-defined fields;
//! - [`flowfield`]: built-in and expression-backed velocity fields with
//!   Jacobian/time-partial access and the `|v1| < 1` admissibility scan;
//! - [`pmp`]: control law, boundary multiplier rule, adjoint right-hand
//!   side and extremal diagnostics;
//! - [`integrate`]: fixed-step RK4 with event detection (boundary contact,
//!   terminal capture, domain exit, horizon, forced departure);
//! - [`shooting`]: the angle sweep, boundary-arc following with departure
//!   branching, bisection refinement, and assembly of the extremal field.

pub mod fieldexpr;
pub mod flowfield;
pub mod integrate;
pub mod pmp;
pub mod shooting;

pub use fieldexpr::Expr;
pub use flowfield::{AssumptionReport, FlowField};
pub use integrate::{Event, EventKind, Segment};
pub use pmp::{ControlDecision, ExtState, Mode, Side, SingularReport};
pub use shooting::{Classification, Extremal, ExtremalField, ProblemSpec};
