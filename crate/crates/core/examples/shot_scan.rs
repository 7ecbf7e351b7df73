//! Scan a window of shot angles and print each outcome: capture, or the
//! closest approach plus any boundary-contact data. Handy for looking at
//! the miss landscape around a root.
//!
//! Usage: shot_scan [builtin-name] [theta_lo] [theta_hi] [count]

use zermelo_core::shooting::{shoot, ProblemSpec, ShotOutcome};
use zermelo_core::FlowField;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let name = args
        .get(1)
        .cloned()
        .unwrap_or_else(|| "steady_parabolic".into());
    let lo: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(3.1);
    let hi: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(4.8);
    let n: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(60);
    let field = FlowField::builtin(&name).unwrap();
    let spec = ProblemSpec::new(field, [0.0, 0.0], [-0.5, -6.0]).unwrap();
    for k in 0..=n {
        let theta = lo + (hi - lo) * k as f64 / n as f64;
        match shoot(theta, &spec).unwrap() {
            ShotOutcome::Extremals(es) => {
                for e in es {
                    println!(
                        "theta={theta:.5} EXTREMAL T={:.4} class={} miss={:.2e}",
                        e.travel_time,
                        e.classification.label(),
                        e.terminal_miss,
                    );
                }
            }
            ShotOutcome::Miss(m) => {
                let closest = m
                    .closest
                    .map(|c| {
                        format!(
                            "d={:.4} at t={:.3} p=({:.3},{:.3})",
                            c.distance, c.t, c.point[0], c.point[1]
                        )
                    })
                    .unwrap_or_else(|| "aborted".into());
                let crossing = m
                    .crossing
                    .map(|(side, t_hit, r)| format!(" hit={side:?}@{t_hit:.3} r={r:+.5}"))
                    .unwrap_or_default();
                println!("theta={theta:.5} miss {closest}{crossing}");
            }
        }
    }
}
