//! Sweep a benchmark problem and print the resulting field of extremals.
//!
//! Usage: field_sweep [builtin-name | expr:<vx>;<vy>] [tau]

use zermelo_core::shooting::{sweep, ProblemSpec};
use zermelo_core::{Expr, FlowField};

fn main() {
    let name = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "steady_parabolic".into());
    let field = if let Some(rest) = name.strip_prefix("expr:") {
        let (vx, vy) = rest.split_once(';').expect("expr:<vx>;<vy>");
        FlowField::from_expressions(Expr::parse(vx).unwrap(), Expr::parse(vy).unwrap())
    } else {
        FlowField::builtin(&name).unwrap()
    };
    let mut spec = ProblemSpec::new(field, [0.0, 0.0], [-0.5, -6.0]).unwrap();
    if let Some(tau) = std::env::args().nth(2) {
        spec.tau = tau.parse().unwrap();
    }
    eprintln!("t_max = {}, tau = {}", spec.t_max, spec.tau);

    let t0 = std::time::Instant::now();
    let result = sweep(&spec).unwrap();
    eprintln!("elapsed: {:?}", t0.elapsed());
    eprintln!("diagnostics: {:?}", result.diagnostics);
    eprintln!("extremals: {}", result.extremals.len());
    for (i, e) in result.extremals.iter().enumerate() {
        let star = if Some(i) == result.optimal_index {
            "*"
        } else {
            " "
        };
        eprintln!(
            "{star} theta0={:.6} T={:.4} class={} departures={:?} miss={:.2e} lambda={:.4} margin={:.2e}",
            e.theta0,
            e.travel_time,
            e.classification.label(),
            e.departure_times,
            e.terminal_miss,
            e.lambda,
            e.nontriviality_margin,
        );
    }
}
