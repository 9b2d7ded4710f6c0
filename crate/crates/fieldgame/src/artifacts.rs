//! Reproducible CSV/JSON artifact serialization.
//!
//! Every artifact embeds the run provenance — seed, step size, particle
//! count, and tool version — so that two files with equal embedded
//! metadata are byte-identical. All floating-point values are written
//! in scientific notation with 17 significant digits, which
//! round-trips every finite `f64` exactly.
//!
//! CSV files carry the provenance as `#`-prefixed comment lines before
//! the header row; JSON files carry it in a `"metadata"` object. The
//! JSON here is emitted by hand (append-only, fixed key order) rather
//! than through a serializer so the byte layout is under direct
//! control.

use std::fmt::Write as _;

use nalgebra::DVector;

use crate::adjoint::AdjointSolution;
use crate::cost::{CostEstimate, Formulation};
use crate::error::{Error, Result};
use crate::model::control::{ControlProcess, Player};
use crate::saddle::SaddleReport;
use crate::simulate::{GridConfig, TrajectoryBundle};

/// Version string embedded in every artifact.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Render a float with 17 significant digits (1 leading + 16 fractional
/// digits in scientific notation), enough to reproduce the exact bits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn json_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

fn json_float_array(values: impl Iterator<Item = f64>) -> String {
    let mut out = String::from("[");
    for (i, v) in values.enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&fmt_float(v));
    }
    out.push(']');
    out
}

/// Provenance block shared by all artifacts.
#[derive(Clone, Debug)]
pub struct RunMetadata {
    pub seed: u64,
    pub steps: usize,
    pub particles: usize,
    pub dt: f64,
}

impl RunMetadata {
    pub fn from_grid(grid: &GridConfig, horizon: f64) -> Self {
        RunMetadata {
            seed: grid.seed,
            steps: grid.step_count,
            particles: grid.particle_count,
            dt: grid.dt(horizon),
        }
    }

    fn csv_comment(&self) -> String {
        format!(
            "# seed={} steps={} particles={} dt={} version={}\n",
            self.seed,
            self.steps,
            self.particles,
            fmt_float(self.dt),
            TOOL_VERSION
        )
    }

    fn json_object(&self) -> String {
        format!(
            "{{\"seed\": {}, \"steps\": {}, \"particles\": {}, \"dt\": {}, \"version\": \"{}\"}}",
            self.seed,
            self.steps,
            self.particles,
            fmt_float(self.dt),
            json_escape(TOOL_VERSION)
        )
    }
}

/// Columnar trajectory dump: one row per (grid time, particle), columns
/// `time, particle, x_0..x_{n-1}, Z`.
pub fn trajectory_csv(bundle: &TrajectoryBundle) -> String {
    let meta = RunMetadata {
        seed: bundle.seed,
        steps: bundle.step_count(),
        particles: bundle.particle_count,
        dt: bundle.dt(),
    };
    let n = bundle.n;
    let mut out = meta.csv_comment();
    out.push_str("time,particle");
    for c in 0..n {
        let _ = write!(out, ",x_{c}");
    }
    out.push_str(",Z\n");
    for k in 0..bundle.times.len() {
        let time = fmt_float(bundle.times[k]);
        let z_row = bundle.z_row(k);
        for i in 0..bundle.particle_count {
            let _ = write!(out, "{time},{i}");
            for v in bundle.state(k, i) {
                let _ = write!(out, ",{}", fmt_float(*v));
            }
            let _ = writeln!(out, ",{}", fmt_float(z_row[i]));
        }
    }
    out
}

/// JSON ensemble summary: grid times, state means, density means, and
/// the standard error of the state mean.
///
/// The standard error reflects Monte Carlo sampling only; the coupling
/// of particles through the ensemble mean adds a systematic
/// O(1/particles) bias that the standard error does not capture, which
/// the metadata records as a note.
pub fn summary_json(bundle: &TrajectoryBundle) -> String {
    let meta = RunMetadata {
        seed: bundle.seed,
        steps: bundle.step_count(),
        particles: bundle.particle_count,
        dt: bundle.dt(),
    };
    let kk = bundle.times.len();
    let n = bundle.n;
    let x_mean_flat = (0..kk).flat_map(|k| bundle.x_mean_at(k).iter().copied());
    let x_se_flat = (0..kk).flat_map(|k| bundle.x_se_at(k));
    let mut out = String::from("{\n");
    let _ = writeln!(out, "  \"t\": {},", json_float_array(bundle.times.iter().copied()));
    let _ = writeln!(out, "  \"state_dim\": {n},");
    let _ = writeln!(out, "  \"x_mean\": {},", json_float_array(x_mean_flat));
    let _ = writeln!(out, "  \"Z_mean\": {},", json_float_array(bundle.z_mean.iter().copied()));
    let _ = writeln!(out, "  \"x_se\": {},", json_float_array(x_se_flat));
    let _ = writeln!(
        out,
        "  \"note\": \"x_se measures sampling noise only; the interacting-particle \
         approximation of the ensemble mean carries an additional O(1/particles) bias\","
    );
    let _ = writeln!(out, "  \"metadata\": {}", meta.json_object());
    out.push_str("}\n");
    out
}

/// Adjoint path dump: `time, p_0..p_{n-1}, q_0.., qt_0..`, one row per
/// grid time. Ensemble solutions are reduced to their particle means.
pub fn adjoint_csv(adj: &AdjointSolution, meta: &RunMetadata) -> String {
    let n = adj.n;
    let mut out = meta.csv_comment();
    out.push_str("time");
    for c in 0..n {
        let _ = write!(out, ",p_{c}");
    }
    for c in 0..n {
        let _ = write!(out, ",q_{c}");
    }
    for c in 0..n {
        let _ = write!(out, ",qt_{c}");
    }
    out.push('\n');
    let count = adj.particle_count as f64;
    for k in 0..adj.times.len() {
        let _ = write!(out, "{}", fmt_float(adj.times[k]));
        for block in 0..3 {
            for c in 0..n {
                let mean: f64 = (0..adj.particle_count)
                    .map(|i| match block {
                        0 => adj.p_at(k, i)[c],
                        1 => adj.q_at(k, i)[c],
                        _ => adj.q_tilde_at(k, i)[c],
                    })
                    .sum::<f64>()
                    / count;
                let _ = write!(out, ",{}", fmt_float(mean));
            }
        }
        out.push('\n');
    }
    out
}

/// JSON companion of [`adjoint_csv`]: solver mode and per-step
/// regression condition numbers.
pub fn adjoint_summary_json(adj: &AdjointSolution, meta: &RunMetadata) -> String {
    let mut out = String::from("{\n");
    let _ = writeln!(out, "  \"deterministic_reduction\": {},", adj.deterministic_reduction);
    let _ = writeln!(out, "  \"ensemble_size\": {},", adj.particle_count);
    let steps = json_float_array(adj.diagnostics.iter().map(|d| d.step as f64));
    let _ = writeln!(out, "  \"regression_steps\": {steps},");
    let conds = json_float_array(adj.diagnostics.iter().map(|d| d.condition));
    let _ = writeln!(out, "  \"regression_conditions\": {conds},");
    let kept = json_float_array(adj.diagnostics.iter().map(|d| d.columns_kept as f64));
    let _ = writeln!(out, "  \"regression_columns_kept\": {kept},");
    let _ = writeln!(out, "  \"metadata\": {}", meta.json_object());
    out.push_str("}\n");
    out
}

/// Piecewise-constant control dump: `time, u_0..u_{k-1}`, one row per
/// grid interval. Feedback controls have no tabular representation and
/// are rejected.
pub fn controls_csv(control: &ControlProcess, meta: &RunMetadata) -> Result<String> {
    let values = control.values().ok_or_else(|| {
        Error::Input("only piecewise-constant open-loop controls serialize to CSV".into())
    })?;
    let mut out = meta.csv_comment();
    let _ = writeln!(out, "# player={}", control.player.number());
    out.push_str("time");
    for c in 0..control.dim {
        let _ = write!(out, ",u_{c}");
    }
    out.push('\n');
    for (t, v) in control.times.iter().zip(values) {
        let _ = write!(out, "{}", fmt_float(*t));
        for c in 0..control.dim {
            let _ = write!(out, ",{}", fmt_float(v[c]));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parse a control CSV produced by [`controls_csv`] (or edited by hand:
/// `#` comments and the header row are skipped, columns are
/// `time, u_0..u_{k-1}`).
pub fn read_controls_csv(text: &str, player: Player) -> Result<ControlProcess> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut dim: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("time") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 2 {
            return Err(Error::Input(format!(
                "control CSV line {}: expected time and at least one control column",
                lineno + 1
            )));
        }
        let parse = |field: &str, what: &str| -> Result<f64> {
            field.trim().parse::<f64>().map_err(|_| {
                Error::Input(format!(
                    "control CSV line {}: cannot parse {what} from {field:?}",
                    lineno + 1
                ))
            })
        };
        let row_dim = fields.len() - 1;
        match dim {
            None => dim = Some(row_dim),
            Some(d) if d != row_dim => {
                return Err(Error::Input(format!(
                    "control CSV line {}: {row_dim} control columns after a row with {d}",
                    lineno + 1
                )));
            }
            Some(_) => {}
        }
        times.push(parse(fields[0], "the time")?);
        let mut v = DVector::zeros(row_dim);
        for c in 0..row_dim {
            v[c] = parse(fields[c + 1], "a control value")?;
        }
        values.push(v);
    }
    if times.is_empty() {
        return Err(Error::Input("control CSV contains no data rows".into()));
    }
    ControlProcess::piecewise_constant(player, times, values)
}

/// JSON cost record: the estimate, its decomposition, and provenance.
pub fn cost_json(estimate: &CostEstimate, formulation: Formulation, meta: &RunMetadata) -> String {
    let mut out = String::from("{\n");
    let _ = writeln!(out, "  \"J\": {},", fmt_float(estimate.value));
    let _ = writeln!(out, "  \"se\": {},", fmt_float(estimate.standard_error));
    let _ = writeln!(out, "  \"running\": {},", fmt_float(estimate.running));
    let _ = writeln!(out, "  \"terminal\": {},", fmt_float(estimate.terminal));
    let _ = writeln!(out, "  \"N\": {},", estimate.particle_count);
    let _ = writeln!(out, "  \"dt\": {},", fmt_float(meta.dt));
    let _ = writeln!(out, "  \"seed\": {},", meta.seed);
    let _ = writeln!(out, "  \"formulation\": \"{}\",", formulation.label());
    let _ = writeln!(out, "  \"metadata\": {}", meta.json_object());
    out.push_str("}\n");
    out
}

/// Full saddle verification report as JSON with a machine-readable
/// `verdict` and one record per check.
pub fn saddle_report_json(report: &SaddleReport, meta: &RunMetadata) -> String {
    let mut out = String::from("{\n");
    let _ = writeln!(out, "  \"verdict\": {},", report.verdict);
    let _ = writeln!(out, "  \"candidate_cost\": {{\"J\": {}, \"se\": {}}},",
        fmt_float(report.candidate_cost.value),
        fmt_float(report.candidate_cost.standard_error));
    if let Some(weak) = &report.weak_candidate_cost {
        let _ = writeln!(out, "  \"weak_candidate_cost\": {{\"J\": {}, \"se\": {}}},",
            fmt_float(weak.value),
            fmt_float(weak.standard_error));
    }
    out.push_str("  \"perturbations\": [\n");
    for (id, check) in report.perturbations.iter().enumerate() {
        let _ = write!(
            out,
            "    {{\"id\": {id}, \"player\": {}, \"description\": \"{}\", \
             \"J\": {}, \"se\": {}, \"delta\": {}, \"delta_se\": {}, \"pass\": {}}}",
            check.player.number(),
            json_escape(&check.description),
            fmt_float(check.cost.value),
            fmt_float(check.cost.standard_error),
            fmt_float(check.diff),
            fmt_float(check.diff_se),
            check.pass
        );
        out.push_str(if id + 1 < report.perturbations.len() { ",\n" } else { "\n" });
    }
    out.push_str("  ],\n");
    match &report.stationarity {
        Some(profile) => {
            let _ = writeln!(
                out,
                "  \"stationarity\": {{\"tolerance\": {}, \"max_player1\": {}, \
                 \"max_player2\": {}, \"times\": {}, \"residuals_player1\": {}, \
                 \"residuals_player2\": {}}},",
                fmt_float(report.residual_tolerance),
                fmt_float(profile.max[0]),
                fmt_float(profile.max[1]),
                json_float_array(profile.times.iter().copied()),
                json_float_array(profile.residuals[0].iter().copied()),
                json_float_array(profile.residuals[1].iter().copied())
            );
        }
        None => out.push_str("  \"stationarity\": null,\n"),
    }
    match &report.convexity {
        Some(conv) => {
            let _ = writeln!(out, "  \"convexity\": {{\"pass\": {},", conv.pass);
            out.push_str("    \"triples\": [\n");
            for (i, t) in conv.triples.iter().enumerate() {
                let _ = write!(
                    out,
                    "      {{\"player\": {}, \"direction\": {}, \"lambdas\": [{}, {}, {}], \
                     \"defect\": {}, \"se\": {}, \"pass\": {}}}",
                    t.player.number(),
                    t.direction,
                    fmt_float(t.lambdas.0),
                    fmt_float(t.lambdas.1),
                    fmt_float(t.lambdas.2),
                    fmt_float(t.defect),
                    fmt_float(t.defect_se),
                    t.pass
                );
                out.push_str(if i + 1 < conv.triples.len() { ",\n" } else { "\n" });
            }
            out.push_str("    ],\n");
            out.push_str("    \"coercivity\": [\n");
            for (i, c) in conv.coercivity.iter().enumerate() {
                let _ = write!(
                    out,
                    "      {{\"player\": {}, \"quadratic_coefficient\": {}, \
                     \"cross_check\": {}, \"se\": {}, \"pass\": {}}}",
                    c.player.number(),
                    fmt_float(c.quadratic_coefficient),
                    fmt_float(c.cross_check),
                    fmt_float(c.standard_error),
                    c.pass
                );
                out.push_str(if i + 1 < conv.coercivity.len() { ",\n" } else { "\n" });
            }
            out.push_str("    ]\n  },\n");
        }
        None => out.push_str("  \"convexity\": null,\n"),
    }
    let _ = writeln!(out, "  \"metadata\": {}", meta.json_object());
    out.push_str("}\n");
    out
}

/// Plot-ready flat table of the unilateral checks:
/// `perturbation_id, player, J, SE, delta, verdict`.
pub fn saddle_checks_csv(report: &SaddleReport, meta: &RunMetadata) -> String {
    let mut out = meta.csv_comment();
    out.push_str("perturbation_id,player,J,SE,delta,verdict\n");
    for (id, check) in report.perturbations.iter().enumerate() {
        let _ = writeln!(
            out,
            "{id},{},{},{},{},{}",
            check.player.number(),
            fmt_float(check.cost.value),
            fmt_float(check.cost.standard_error),
            fmt_float(check.diff),
            check.pass
        );
    }
    out
}
