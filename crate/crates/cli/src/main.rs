//! Command-line front end: solve a navigation problem, check a flow field
//! against the admissibility assumption, or re-plot a previous solve.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 solve found no
//! extremal.

mod artifacts;
mod config;
mod plot;

use anyhow::{anyhow, bail, Context, Result};
use config::RunConfig;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use zermelo_core::shooting::{sweep, ProblemSpec};

const USAGE: &str = "\
zermelo - field-of-extremals solver for time-optimal navigation in a flow

Usage:
  zermelo solve <config> [options]
  zermelo check-field <config> [options]
  zermelo plot <config> --from <summary.json> [options]

Options:
  --theta-step <x>   override the sweep step
  --tau <x>          override the integration step
  --tmax <x>         override the shot horizon
  --out <dir>        override the output directory
  --quiet            suppress progress output
  -h, --help         print this message
";

struct Cli {
    command: String,
    config_path: PathBuf,
    from: Option<PathBuf>,
    theta_step: Option<f64>,
    tau: Option<f64>,
    t_max: Option<f64>,
    out: Option<PathBuf>,
    quiet: bool,
}

fn parse_args(args: &[String]) -> Result<Cli> {
    let mut positional = Vec::new();
    let mut cli = Cli {
        command: String::new(),
        config_path: PathBuf::new(),
        from: None,
        theta_step: None,
        tau: None,
        t_max: None,
        out: None,
        quiet: false,
    };
    let mut i = 0;
    while i < args.len() {
        let value = |i: &mut usize, flag: &str| -> Result<String> {
            *i += 1;
            args.get(*i)
                .cloned()
                .ok_or_else(|| anyhow!("{flag} expects a value"))
        };
        match args[i].as_str() {
            "--from" => cli.from = Some(PathBuf::from(value(&mut i, "--from")?)),
            "--theta-step" => {
                cli.theta_step = Some(
                    value(&mut i, "--theta-step")?
                        .parse()
                        .context("--theta-step")?,
                )
            }
            "--tau" => cli.tau = Some(value(&mut i, "--tau")?.parse().context("--tau")?),
            "--tmax" => cli.t_max = Some(value(&mut i, "--tmax")?.parse().context("--tmax")?),
            "--out" => cli.out = Some(PathBuf::from(value(&mut i, "--out")?)),
            "--quiet" => cli.quiet = true,
            "-h" | "--help" => bail!("help"),
            flag if flag.starts_with('-') => bail!("unknown option `{flag}`"),
            _ => positional.push(args[i].clone()),
        }
        i += 1;
    }
    if positional.len() != 2 {
        bail!("expected a command and a config path");
    }
    cli.command = positional[0].clone();
    cli.config_path = PathBuf::from(&positional[1]);
    Ok(cli)
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let text = fs::read_to_string(&cli.config_path)
        .with_context(|| format!("reading config {}", cli.config_path.display()))?;
    let mut cfg = RunConfig::parse(&text)
        .with_context(|| format!("parsing config {}", cli.config_path.display()))?;
    if let Some(v) = cli.theta_step {
        cfg.theta_step = Some(v);
    }
    if let Some(v) = cli.tau {
        cfg.tau = Some(v);
    }
    if let Some(v) = cli.t_max {
        cfg.t_max = Some(v);
    }
    if let Some(dir) = &cli.out {
        cfg.out_dir = dir.clone();
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = match parse_args(&args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.to_string() == "help" {
                print!("{USAGE}");
                return ExitCode::SUCCESS;
            }
            eprintln!("error: {e}");
            eprint!("{USAGE}");
            return ExitCode::from(1);
        }
    };
    let outcome = match cli.command.as_str() {
        "solve" => cmd_solve(&cli),
        "check-field" => cmd_check_field(&cli),
        "plot" => cmd_plot(&cli),
        other => Err(anyhow!("unknown command `{other}`")),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn cmd_solve(cli: &Cli) -> Result<u8> {
    let cfg = load_config(cli)?;
    let spec = cfg.build_spec()?;
    let report = spec.assumption_report((0.0, 8.0), 81, 21);
    if report.violated && !cli.quiet {
        eprintln!(
            "warning: |v1| < 1 fails on the scan grid (sup |v1| = {:.4}, {} witnesses); \
             boundary arcs may be infeasible at some times",
            report.sup_abs_v1,
            report.witnesses.len()
        );
    }
    if !cli.quiet {
        let n = (std::f64::consts::TAU / spec.theta_step).ceil() as usize;
        eprintln!(
            "solving ({}, {}) -> ({}, {}) under {} ({} angles, tau={:.1e}, horizon {:.3})",
            spec.a[0],
            spec.a[1],
            spec.b[0],
            spec.b[1],
            spec.field.describe(),
            n,
            spec.tau,
            spec.t_max
        );
    }
    let started = Instant::now();
    let result = sweep(&spec)?;
    if !cli.quiet {
        eprintln!(
            "found {} extremal(s) in {:.1}s ({} shots, {} branches, {} bisection steps)",
            result.extremals.len(),
            started.elapsed().as_secs_f64(),
            result.diagnostics.shots_fired,
            result.diagnostics.branches_spawned,
            result.diagnostics.bisection_iterations
        );
    }

    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    for (i, extremal) in result.extremals.iter().enumerate() {
        let csv = artifacts::write_extremal_csv(extremal, &spec.field, spec.eps_sing)?;
        fs::write(cfg.out_dir.join(artifacts::csv_name(i)), csv)?;
    }
    let summary = artifacts::write_summary_json(&result, report.violated, report.sup_abs_v1);
    let summary_path = cfg.out_dir.join("summary.json");
    fs::write(&summary_path, summary)?;
    render_svg(&cfg, &spec, &summary_path)?;

    for (i, e) in result.extremals.iter().enumerate() {
        let star = if result.optimal_index == Some(i) {
            "*"
        } else {
            " "
        };
        println!(
            "{star} extremal {i}: T = {:.4}, {}, theta0 = {:.6}, lambda = {:.4}",
            e.travel_time,
            e.classification.label(),
            e.theta0,
            e.lambda
        );
    }
    match result.optimal() {
        Some(best) => {
            println!(
                "optimal travelling time {:.4} ({}); artifacts in {}",
                best.travel_time,
                best.classification.label(),
                cfg.out_dir.display()
            );
            Ok(0)
        }
        None => {
            println!("no extremal found; artifacts in {}", cfg.out_dir.display());
            Ok(2)
        }
    }
}

fn cmd_check_field(cli: &Cli) -> Result<u8> {
    let cfg = load_config(cli)?;
    let spec = cfg.build_spec()?;
    let report = spec.assumption_report((0.0, 8.0), 81, 21);
    println!("field: {}", spec.field.describe());
    println!("scan grid: {}", report.grid);
    println!(
        "sup |v1| on grid: {:.6} -> assumption |v1| < 1 {}",
        report.sup_abs_v1,
        if report.violated { "VIOLATED" } else { "holds" }
    );
    if report.violated {
        let w = &report.witnesses[0];
        println!(
            "  {} witnesses, e.g. t={:.3}, x=({:.3}, {:.3}): v1 = {:.4}",
            report.witnesses.len(),
            w.t,
            w.x[0],
            w.x[1],
            w.v1
        );
        println!("  boundary arcs are infeasible at such times; a solve will warn and proceed");
    }
    if !report.failures.is_empty() {
        let f = &report.failures[0];
        println!(
            "  {} grid points failed to evaluate, e.g. t={:.3}, x=({:.3}, {:.3}): {}",
            report.failures.len(),
            f.t,
            f.x[0],
            f.x[1],
            f.message
        );
    }

    // Static singular-control safeguard scan: the maximum condition stays
    // informative where dv2/dx1 (for u1) and dv1/dx2 (for u2) do not
    // vanish.
    let (nt, nx) = (41, 21);
    let x2r = spec.x2_range();
    let mut zero_dv2_dx1 = 0usize;
    let mut zero_dv1_dx2 = 0usize;
    let mut total = 0usize;
    let mut example_s1: Option<(f64, [f64; 2])> = None;
    for it in 0..nt {
        let t = 8.0 * it as f64 / (nt - 1) as f64;
        for i1 in 0..nx {
            let x1 = -spec.bound + 2.0 * spec.bound * i1 as f64 / (nx - 1) as f64;
            for i2 in 0..nx {
                let x2 = x2r.0 + (x2r.1 - x2r.0) * i2 as f64 / (nx - 1) as f64;
                if let Ok(jac) = spec.field.jacobian(t, [x1, x2]) {
                    total += 1;
                    if jac[1][0].abs() < spec.eps_sing {
                        zero_dv2_dx1 += 1;
                        example_s1.get_or_insert((t, [x1, x2]));
                    }
                    if jac[0][1].abs() < spec.eps_sing {
                        zero_dv1_dx2 += 1;
                    }
                }
            }
        }
    }
    let describe = |count: usize| -> String {
        if count == total {
            "identically zero on the grid".to_string()
        } else if count == 0 {
            "nonzero everywhere on the grid".to_string()
        } else {
            format!("zero at {count}/{total} grid points")
        }
    };
    println!("singular-control safeguards:");
    println!("  dv2/dx1: {}", describe(zero_dv2_dx1));
    if let Some((t, x)) = example_s1 {
        if zero_dv2_dx1 != 0 && zero_dv2_dx1 != total {
            println!("    e.g. t={:.3}, x=({:.3}, {:.3})", t, x[0], x[1]);
        }
    }
    println!("  dv1/dx2: {}", describe(zero_dv1_dx2));
    if zero_dv2_dx1 == total && zero_dv1_dx2 == total {
        println!(
            "  notice: both safeguards vanish across the whole domain; singular \
             controls are not excluded anywhere"
        );
    }
    Ok(0)
}

fn cmd_plot(cli: &Cli) -> Result<u8> {
    let cfg = load_config(cli)?;
    let spec = cfg.build_spec()?;
    let from = cli
        .from
        .as_ref()
        .ok_or_else(|| anyhow!("plot requires --from <summary.json>"))?;
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    render_svg(&cfg, &spec, from)?;
    if !cli.quiet {
        eprintln!("wrote {}", cfg.out_dir.join("field.svg").display());
    }
    Ok(0)
}

fn render_svg(cfg: &RunConfig, spec: &ProblemSpec, summary_path: &Path) -> Result<()> {
    let summary = artifacts::read_summary_json(summary_path)?;
    let svg = plot::render(
        &plot::PlotInput {
            summary,
            width: cfg.plot_width,
            height: cfg.plot_height,
        },
        &spec.field,
    )?;
    fs::write(cfg.out_dir.join("field.svg"), svg)?;
    Ok(())
}
