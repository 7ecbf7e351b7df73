//! Flat key-value run configuration.
//!
//! The format is dotted keys, one `key = value` per line, `#` comments.
//! A field is either a builtin (`field.builtin = steady_parabolic`) or an
//! expression pair (`field.vx`, `field.vy`), never both.
//!
//! ```text
//! field.builtin = steady_parabolic
//! problem.A = 0,0
//! problem.B = -0.5,-6
//! solver.theta_step = 1e-2
//! output.dir = out
//! ```

use anyhow::{anyhow, bail, Context, Result};
use std::collections::BTreeMap;
use std::path::PathBuf;
use zermelo_core::shooting::ProblemSpec;
use zermelo_core::{Expr, FlowField};

#[derive(Debug, Clone, PartialEq)]
pub enum FieldConfig {
    Builtin(String),
    Expressions { vx: String, vy: String },
}

/// Everything a run needs: the problem, solver overrides, output paths
/// and plot dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub field: FieldConfig,
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub bound: Option<f64>,
    pub tau: Option<f64>,
    pub theta_step: Option<f64>,
    pub terminal_tol: Option<f64>,
    pub junction_tol: Option<f64>,
    pub eps_sing: Option<f64>,
    pub t_max: Option<f64>,
    pub departure_stride: Option<usize>,
    pub out_dir: PathBuf,
    pub plot_width: u32,
    pub plot_height: u32,
    pub diagnostics: bool,
}

impl RunConfig {
    pub fn parse(source: &str) -> Result<RunConfig> {
        let mut keys: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in source.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if keys.insert(key.clone(), value).is_some() {
                bail!("line {}: duplicate key `{key}`", lineno + 1);
            }
        }

        let mut take = |k: &str| keys.remove(k);

        let field = match (take("field.builtin"), take("field.vx"), take("field.vy")) {
            (Some(name), None, None) => FieldConfig::Builtin(name),
            (None, Some(vx), Some(vy)) => FieldConfig::Expressions { vx, vy },
            (None, None, None) => {
                bail!("missing field definition: set field.builtin or field.vx/field.vy")
            }
            (None, _, _) => bail!("field.vx and field.vy must both be set"),
            (Some(_), _, _) => bail!("field.builtin conflicts with field.vx/field.vy"),
        };

        let a = parse_position(&take("problem.A").ok_or_else(|| anyhow!("missing problem.A"))?)
            .context("problem.A")?;
        let b = parse_position(&take("problem.B").ok_or_else(|| anyhow!("missing problem.B"))?)
            .context("problem.B")?;

        let parse_f64 = |v: Option<String>, what: &str| -> Result<Option<f64>> {
            v.map(|s| {
                s.parse::<f64>()
                    .with_context(|| format!("{what}: invalid number `{s}`"))
            })
            .transpose()
        };
        let bound = parse_f64(take("problem.bound"), "problem.bound")?;
        let tau = parse_f64(take("solver.tau"), "solver.tau")?;
        let theta_step = parse_f64(take("solver.theta_step"), "solver.theta_step")?;
        let terminal_tol = parse_f64(take("solver.terminal_tol"), "solver.terminal_tol")?;
        let junction_tol = parse_f64(take("solver.junction_tol"), "solver.junction_tol")?;
        let eps_sing = parse_f64(take("solver.eps_sing"), "solver.eps_sing")?;
        let t_max = parse_f64(take("solver.t_max"), "solver.t_max")?;
        let departure_stride = take("solver.departure_stride")
            .map(|s| {
                s.parse::<usize>()
                    .with_context(|| format!("solver.departure_stride: invalid count `{s}`"))
            })
            .transpose()?;
        for (key, value) in [
            ("solver.tau", tau),
            ("solver.theta_step", theta_step),
            ("solver.terminal_tol", terminal_tol),
            ("solver.junction_tol", junction_tol),
            ("solver.eps_sing", eps_sing),
            ("solver.t_max", t_max),
            ("problem.bound", bound),
        ] {
            if let Some(v) = value {
                if !v.is_finite() || v <= 0.0 {
                    bail!("{key} must be positive, got {v}");
                }
            }
        }

        let out_dir = PathBuf::from(take("output.dir").unwrap_or_else(|| "out".into()));
        let plot_width = take("plot.width")
            .map(|s| s.parse::<u32>().context("plot.width"))
            .transpose()?
            .unwrap_or(640);
        let plot_height = take("plot.height")
            .map(|s| s.parse::<u32>().context("plot.height"))
            .transpose()?
            .unwrap_or(900);
        let diagnostics = match take("report.diagnostics").as_deref() {
            None => true,
            Some("true") => true,
            Some("false") => false,
            Some(other) => bail!("report.diagnostics: expected true/false, got `{other}`"),
        };

        if let Some(unknown) = keys.keys().next() {
            bail!("unknown config key `{unknown}`");
        }

        Ok(RunConfig {
            field,
            a,
            b,
            bound,
            tau,
            theta_step,
            terminal_tol,
            junction_tol,
            eps_sing,
            t_max,
            departure_stride,
            out_dir,
            plot_width,
            plot_height,
            diagnostics,
        })
    }

    pub fn build_field(&self) -> Result<FlowField> {
        match &self.field {
            FieldConfig::Builtin(name) => Ok(FlowField::builtin(name)?),
            FieldConfig::Expressions { vx, vy } => {
                let vx = Expr::parse(vx).with_context(|| format!("field.vx: `{vx}`"))?;
                let vy = Expr::parse(vy).with_context(|| format!("field.vy: `{vy}`"))?;
                Ok(FlowField::from_expressions(vx, vy))
            }
        }
    }

    /// Assemble the solver problem, applying any overrides.
    pub fn build_spec(&self) -> Result<ProblemSpec> {
        let field = self.build_field()?;
        let mut spec = match self.bound {
            Some(v) => ProblemSpec::with_bound(field, self.a, self.b, v)?,
            None => ProblemSpec::new(field, self.a, self.b)?,
        };
        if let Some(v) = self.tau {
            spec.tau = v;
        }
        if let Some(v) = self.theta_step {
            spec.theta_step = v;
        }
        if let Some(v) = self.terminal_tol {
            spec.terminal_tol = v;
        }
        if let Some(v) = self.junction_tol {
            spec.junction_tol = v;
        }
        if let Some(v) = self.eps_sing {
            spec.eps_sing = v;
        }
        if let Some(v) = self.t_max {
            spec.t_max = v;
        }
        if let Some(v) = self.departure_stride {
            spec.departure_stride = v;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn parse_position(text: &str) -> Result<[f64; 2]> {
    let (x1, x2) = text
        .split_once(',')
        .ok_or_else(|| anyhow!("expected `x1,x2`, got `{text}`"))?;
    Ok([
        x1.trim()
            .parse()
            .with_context(|| format!("invalid number `{}`", x1.trim()))?,
        x2.trim()
            .parse()
            .with_context(|| format!("invalid number `{}`", x2.trim()))?,
    ])
}
