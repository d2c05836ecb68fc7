//! Scenario execution and parameter sweeps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use multistrain_core::{
    fbsm_solve, objective, simulate, summarize, ControlValue, CostParams, FbsmReport, Trajectory,
    TrajectorySummary,
};
use rayon::prelude::*;

use crate::config::{build_scenario, set_numeric_path, ControlPlan, Scenario, ScenarioConfig};
use crate::error::CliError;
use crate::output::{self, RunExtras, SUMMARY_HEADER};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Simulate the configured schedule; in optimize mode, `u_init`.
    Simulate,
    /// Requires `control.mode = "optimize"`.
    Optimize,
    /// Optimize when the config asks for it, simulate otherwise.
    Auto,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub name: String,
    pub out_dir: PathBuf,
    pub trajectory: Trajectory,
    pub summary: TrajectorySummary,
    pub report: Option<FbsmReport>,
    pub extras: RunExtras,
    pub files: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn converged(&self) -> bool {
        self.report.as_ref().is_none_or(|r| r.converged)
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Runs one scenario and writes `trajectory.csv`, `summary.csv` and the
/// charts into `out_dir`. An optimizer that runs out of iterations still
/// produces artifacts; check [`RunOutcome::converged`].
pub fn run_scenario(
    scenario: &Scenario,
    out_dir: &Path,
    mode: Mode,
    svg: bool,
) -> Result<RunOutcome, CliError> {
    let optimize = match (mode, &scenario.control) {
        (Mode::Simulate, _) => None,
        (_, ControlPlan::Optimize { costs, fbsm, .. }) => Some((*costs, *fbsm)),
        (Mode::Optimize, _) => {
            return Err(CliError::Validation {
                field: "control.mode".into(),
                message: "`optimize` needs mode = \"optimize\"".into(),
            })
        }
        (Mode::Auto, _) => None,
    };

    let (trajectory, report) = match optimize {
        Some((costs, fbsm)) => {
            let rep = fbsm_solve(
                &scenario.initial,
                &scenario.params,
                &scenario.events,
                &scenario.grid,
                &costs,
                &scenario.base_schedule(),
                &fbsm,
            )?;
            (rep.trajectory.clone(), Some(rep))
        }
        None => {
            let traj = simulate(
                &scenario.initial,
                &scenario.params,
                &scenario.base_schedule(),
                &scenario.events,
                &scenario.grid,
            )?;
            (traj, None)
        }
    };

    let summary = summarize(&trajectory, scenario.window)?;
    let mean_u =
        multistrain_core::ControlSchedule::new(scenario.grid, trajectory.controls.clone())?.mean();
    let extras = RunExtras {
        mean_u,
        objective: match (&report, &scenario.control) {
            (Some(r), _) => Some(r.objective),
            (None, ControlPlan::Optimize { costs, .. }) => Some(objective(&trajectory, costs)?),
            _ => None,
        },
        converged: report.as_ref().map(|r| r.converged),
        iterations: report.as_ref().map(|r| r.iterations),
    };

    ensure_dir(out_dir)?;
    let mut files = Vec::new();
    let traj_path = out_dir.join("trajectory.csv");
    output::write_trajectory_csv(&traj_path, &trajectory)?;
    files.push(traj_path);
    let sum_path = out_dir.join("summary.csv");
    output::write_records(
        &sum_path,
        SUMMARY_HEADER,
        &output::summary_records(&summary, &extras),
    )?;
    files.push(sum_path);
    if let Some(rep) = &report {
        let hist_path = out_dir.join("fbsm_history.csv");
        let rows: Vec<Vec<String>> = rep
            .history
            .iter()
            .enumerate()
            .map(|(i, r)| vec![(i + 1).to_string(), output::fmt_f64(*r)])
            .collect();
        output::write_records(&hist_path, &["iteration", "residual"], &rows)?;
        files.push(hist_path);
    }
    if svg {
        let p = out_dir.join("shares.svg");
        output::write_text(&p, &output::shares_chart(&trajectory))?;
        files.push(p);
        let controlled = report.is_some() || !matches!(scenario.control, ControlPlan::None);
        if controlled {
            let p = out_dir.join("control.svg");
            output::write_text(&p, &output::control_chart(&trajectory))?;
            files.push(p);
        }
    }

    Ok(RunOutcome {
        name: scenario.name.clone(),
        out_dir: out_dir.to_path_buf(),
        trajectory,
        summary,
        report,
        extras,
        files,
    })
}

/// Human-readable report of a run.
pub fn format_outcome(o: &RunOutcome) -> String {
    let mut s = String::new();
    let sm = &o.summary;
    let _ = writeln!(s, "scenario {}", o.name);
    let _ = writeln!(
        s,
        "  deaths {:.0} ({:.4}% of P(0)), mean u {:.4}",
        sm.deaths,
        100.0 * sm.death_share(),
        o.extras.mean_u
    );
    let _ = writeln!(
        s,
        "  shares of P(0) over the last {} days (mean, spread):",
        sm.window
    );
    for (j, st) in sm.strains.iter().enumerate() {
        let _ = writeln!(
            s,
            "  strain {}: peak I {:.0} on day {:.2}; S {:.4} ({:.4}) E {:.4} ({:.4}) I {:.4} ({:.4}) R {:.4} ({:.4})",
            j + 1,
            st.peak_infected,
            st.peak_day,
            st.susceptible.mean,
            st.susceptible.spread,
            st.exposed.mean,
            st.exposed.spread,
            st.infected.mean,
            st.infected.spread,
            st.removed.mean,
            st.removed.spread,
        );
    }
    if let Some(r) = &o.report {
        let _ =
            writeln!(
            s,
            "  optimizer: {} after {} iterations, residual {:.3e}, relaxation {}, objective {:.6e}",
            if r.converged { "converged" } else { "NOT converged" },
            r.iterations,
            r.residual,
            r.relaxation,
            r.objective
        );
    } else if let Some(j) = o.extras.objective {
        let _ = writeln!(s, "  objective {j:.6e}");
    }
    let _ = writeln!(s, "  wrote {}", o.out_dir.display());
    s
}

/// One completed sweep point.
#[derive(Debug)]
pub struct SweepPoint {
    pub value: f64,
    pub outcome: RunOutcome,
}

/// Subdirectory name for a sweep value, e.g. `c2_factor=0.5`.
pub fn sweep_dir_name(path: &str, value: f64) -> String {
    let key = path.rsplit('.').next().unwrap_or(path);
    format!("{key}={value}")
}

/// Runs the scenario once per value of the numeric field at `path`, in
/// parallel, each into its own subdirectory of `out_root`, and writes
/// `sweep_summary.csv` there. Every variant is validated before any runs.
pub fn sweep(
    cfg: &ScenarioConfig,
    base_dir: Option<&Path>,
    path: &str,
    values: &[f64],
    out_root: &Path,
    mode: Mode,
    svg: bool,
) -> Result<Vec<SweepPoint>, CliError> {
    if values.is_empty() {
        return Err(CliError::InvalidPath {
            path: path.into(),
            message: "no values given".into(),
        });
    }
    let scenarios = values
        .iter()
        .map(|&v| {
            let c = set_numeric_path(cfg, path, v)?;
            build_scenario(&c, base_dir).map(|s| (v, s))
        })
        .collect::<Result<Vec<_>, _>>()?;
    ensure_dir(out_root)?;

    let results: Vec<Result<SweepPoint, CliError>> = scenarios
        .par_iter()
        .map(|(v, sc)| {
            let dir = out_root.join(sweep_dir_name(path, *v));
            run_scenario(sc, &dir, mode, svg).map(|outcome| SweepPoint { value: *v, outcome })
        })
        .collect();
    let points = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut header = vec!["param", "value"];
    header.extend_from_slice(SUMMARY_HEADER);
    let mut records = Vec::new();
    for p in &points {
        for mut r in output::summary_records(&p.outcome.summary, &p.outcome.extras) {
            r.insert(0, output::fmt_f64(p.value));
            r.insert(0, path.to_string());
            records.push(r);
        }
    }
    output::write_records(&out_root.join("sweep_summary.csv"), &header, &records)?;
    Ok(points)
}

/// Constant schedule objective, handy for comparing against the optimizer.
pub fn constant_objective(
    scenario: &Scenario,
    u: ControlValue,
    costs: &CostParams,
) -> Result<f64, CliError> {
    let sched = multistrain_core::ControlSchedule::constant(scenario.grid, u);
    let traj = simulate(
        &scenario.initial,
        &scenario.params,
        &sched,
        &scenario.events,
        &scenario.grid,
    )?;
    Ok(objective(&traj, costs)?)
}
