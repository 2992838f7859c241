//! Drivers behind the command-line subcommands. Each writes its artifacts
//! into an output directory and returns a short summary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::diagnostics::{
    grain_count_bounds, lewis_means, stability_experiment, tightness_envelope, EnergyGrowth, GrainBoundReport,
    InvariantReport, LewisFit, TightnessLattice, TightnessRecord, Verdict,
};
use crate::error::{Error, Result};
use crate::params::{ModelParams, N_MIN};
use crate::selfsim::{lewis_asymptote, selfsim_moments, SelfSimResult};
use crate::state::SimState;
use crate::stepper::{run_simulation, truncation_ladder, TrajectoryRecord};

use super::config::RunConfig;
use super::initial::{build_initial_state, random_perturbation};
use super::snapshot::{read_snapshot, write_json, write_snapshot, write_time_series};

#[derive(Debug, Clone)]
pub struct CommandOutcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
    /// All hard checks of the command passed.
    pub passed: bool,
}

fn prepare(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub t_final: f64,
    pub end_time: f64,
    pub aborted: Option<String>,
    pub invariants: Option<InvariantReport>,
    pub verdicts: Vec<Verdict>,
    pub tightness: Option<TightnessRecord>,
    pub bounds: Option<GrainBoundReport>,
    pub lewis: Option<LewisFit>,
}

fn snapshot_due(cfg: &RunConfig, state: &SimState, last: f64) -> bool {
    let t = state.time;
    if t == 0.0 || (t - last).abs() <= 1e-9 * last.max(1.0) {
        return true;
    }
    let every = cfg.output.snapshot_every;
    if every <= 0.0 {
        return false;
    }
    let k = t / every;
    (k - k.round()).abs() <= 1e-9 * k.max(1.0)
}

fn write_run(cfg: &RunConfig, params: &ModelParams, rec: &TrajectoryRecord, out: &Path, files: &mut Vec<PathBuf>) -> Result<()> {
    if cfg.output.time_series {
        let p = out.join("time_series.csv");
        write_time_series(&p, rec)?;
        files.push(p);
    }
    let dir = out.join("snapshots");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let last = rec.end_time();
    for s in rec.samples.iter().filter(|s| snapshot_due(cfg, s, last)) {
        let step = (s.time / cfg.stepper.dt).round() as usize;
        let p = dir.join(format!("snapshot_{step:06}.csv"));
        write_snapshot(&p, s, params)?;
        files.push(p);
    }
    Ok(())
}

fn analyse(cfg: &RunConfig, params: &ModelParams, rec: &TrajectoryRecord, aborted: Option<String>) -> SimulationReport {
    let d = &cfg.diagnostics;
    let invariants = d
        .invariants
        .then(|| InvariantReport::from_trajectory(rec, params, &d.tolerances));
    let verdicts = invariants
        .as_ref()
        .map(|r| r.verdicts(&d.tolerances))
        .unwrap_or_default();
    let have_samples = !rec.samples.is_empty();
    let tightness = (d.tightness && have_samples)
        .then(|| tightness_envelope(rec, params, &TightnessLattice::uniform(rec, params, d.lattice)));
    let bounds = (d.bounds && have_samples).then(|| grain_count_bounds(rec, params, d.support_radius));
    let lewis = (d.lewis && have_samples).then(|| {
        let last = rec.final_state().expect("samples present");
        lewis_means(last, params, crate::diagnostics::default_window(params), 1e-14)
    });
    SimulationReport {
        t_final: cfg.t_final,
        end_time: rec.end_time(),
        aborted,
        invariants,
        verdicts,
        tightness,
        bounds,
        lewis,
    }
}

/// Run one simulation; write the time series, snapshots and a report. An
/// aborted run still writes its partial artifacts before the error returns.
pub fn simulate_cmd(cfg: &RunConfig, out: &Path) -> Result<CommandOutcome> {
    prepare(out)?;
    let params = cfg.params()?;
    let g = build_initial_state(&cfg.initial, &params)?;
    let stepper = cfg.sampling_stepper();
    let (rec, failure) = match run_simulation(&g, cfg.t_final, &stepper, &params) {
        Ok(rec) => (rec, None),
        Err(Error::Aborted { reason, partial }) => (*partial, Some(*reason)),
        Err(e) => return Err(e),
    };
    let mut files = Vec::new();
    write_run(cfg, &params, &rec, out, &mut files)?;
    let report = analyse(cfg, &params, &rec, failure.as_ref().map(|e| e.to_string()));
    let p = out.join("report.json");
    write_json(&p, &report)?;
    files.push(p);
    if let Some(reason) = failure {
        return Err(Error::Aborted {
            reason: Box::new(reason),
            partial: Box::new(rec),
        });
    }
    let mut passed = report.verdicts.iter().all(|v| v.pass);
    if let Some(t) = &report.tightness {
        passed &= t.holds() && t.ordered();
    }
    if let Some(b) = &report.bounds {
        passed &= b.growth_holds() && b.positivity_holds() && b.gamma_cap_holds();
    }
    let failing: Vec<&str> = report.verdicts.iter().filter(|v| !v.pass).map(|v| v.name.as_str()).collect();
    let summary = if failing.is_empty() {
        format!("simulated to t = {}; all invariant checks pass", rec.end_time())
    } else {
        format!("simulated to t = {}; failing checks: {}", rec.end_time(), failing.join(", "))
    };
    Ok(CommandOutcome { files, summary, passed })
}

/// Run the truncation ladder; write per-rung time series and the
/// difference table. The initial datum is built with the lowest rung's
/// truncation and zero-filled above it.
pub fn ladder_cmd(cfg: &RunConfig, out: &Path) -> Result<CommandOutcome> {
    prepare(out)?;
    let rungs = &cfg.ladder.rungs;
    let top = *rungs
        .last()
        .ok_or_else(|| Error::Config("ladder needs at least one rung".into()))?;
    let params = cfg.params()?.with_n0(top)?;
    // built on the lowest rung so every rung starts from the same admissible datum
    let g = build_initial_state(&cfg.initial, &params.with_n0(rungs[0])?)?;
    let report = truncation_ladder(&g, rungs, cfg.t_final, &cfg.sampling_stepper(), &params)?;
    let mut files = Vec::new();
    for (n0, rec) in report.rungs.iter().zip(&report.trajectories) {
        let p = out.join(format!("ladder_n0_{n0:03}.csv"));
        write_time_series(&p, rec)?;
        files.push(p);
    }
    let p = out.join("ladder.json");
    write_json(&p, &report)?;
    files.push(p);

    let table = out.join("ladder_differences.csv");
    let mut w = csv::Writer::from_path(&table).map_err(|e| Error::Format {
        path: table.display().to_string(),
        message: e.to_string(),
    })?;
    let wrap = |e: csv::Error| Error::Format {
        path: table.display().to_string(),
        message: e.to_string(),
    };
    w.write_record(["n0_low", "n0_high", "sup_compared", "sup_all", "count_diff", "area_diff", "gamma_diff"])
        .map_err(wrap)?;
    let sups: Vec<f64> = report
        .differences
        .iter()
        .map(|d| d.sup_up_to(cfg.ladder.compare_up_to))
        .collect();
    for (d, s) in report.differences.iter().zip(&sups) {
        w.write_record([
            d.n0_low.to_string(),
            d.n0_high.to_string(),
            format!("{s:.16e}"),
            format!("{:.16e}", d.sup_up_to(d.n0_low)),
            format!("{:.16e}", d.count_diff),
            format!("{:.16e}", d.area_diff),
            format!("{:.16e}", d.gamma_diff),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(&table, e))?;
    files.push(table);
    let decreasing = sups.windows(2).all(|w| w[1] < w[0]);
    Ok(CommandOutcome {
        files,
        summary: format!(
            "ladder {rungs:?}: sup differences on classes <= {} = [{}]{}",
            cfg.ladder.compare_up_to,
            sups.iter().map(|s| format!("{s:.3e}")).collect::<Vec<_>>().join(", "),
            if decreasing { ", strictly decreasing" } else { ", NOT decreasing" }
        ),
        passed: decreasing,
    })
}

#[derive(Debug, Clone, Serialize)]
struct SelfSimReport<'a> {
    result: &'a SelfSimResult,
    lewis_slope: Option<f64>,
    lewis_intercept: Option<f64>,
}

/// Solve the self-similar moment relation; write the moment table and the
/// converged weight with its Lewis-law asymptote.
pub fn selfsim_cmd(cfg: &RunConfig, out: &Path) -> Result<CommandOutcome> {
    prepare(out)?;
    let input = &cfg.selfsim;
    let r = selfsim_moments(input)?;
    let table = out.join("selfsim_moments.csv");
    let mut text = String::from("n,Phi\n");
    for (k, v) in r.moments.iter().enumerate() {
        text.push_str(&format!("{},{v:.16e}\n", k + N_MIN));
    }
    fs::write(&table, text).map_err(|e| Error::io(&table, e))?;
    let lewis = r.gamma.map(|g| lewis_asymptote(input.beta, g));
    let p = out.join("selfsim.json");
    write_json(
        &p,
        &SelfSimReport {
            result: &r,
            lewis_slope: lewis.map(|l| l.0),
            lewis_intercept: lewis.map(|l| l.1),
        },
    )?;
    let summary = match r.gamma {
        None => "trivial solution (all boundary values zero)".to_string(),
        Some(g) => format!(
            "gamma = {g:.12}, relation residual {:.2e}, consistency residual {:.2e}, {}",
            r.relation_residual,
            r.consistency_residual,
            if r.admissible { "non-negative moments" } else { "negative moments (not an admissible profile)" }
        ),
    };
    Ok(CommandOutcome {
        files: vec![table, p],
        summary,
        passed: r.relation_residual < 1e-10 && r.consistency_residual < 1e-10,
    })
}

#[derive(Debug, Clone, Serialize)]
struct StabilityReport<'a> {
    seed: u64,
    deltas: &'a [f64],
    growth: &'a [EnergyGrowth],
    /// Largest relative spread of the fitted slopes across deltas.
    slope_spread: f64,
}

/// Relative spread `(max - min) / max |slope|` of the fitted growth rates.
pub fn slope_spread(growth: &[EnergyGrowth]) -> f64 {
    let slopes: Vec<f64> = growth.iter().map(|g| g.slope).collect();
    let max = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = slopes.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = slopes.iter().map(|s| s.abs()).fold(0.0, f64::max);
    if scale > 0.0 {
        (max - min) / scale
    } else {
        0.0
    }
}

/// Paired runs from `g` and `g + delta b` with a seeded perturbation `b`;
/// write `E(t)` per delta and the growth regression.
pub fn stability_cmd(cfg: &RunConfig, out: &Path) -> Result<CommandOutcome> {
    prepare(out)?;
    let params = cfg.params()?;
    let g = build_initial_state(&cfg.initial, &params)?;
    let st = &cfg.stability;
    let b = random_perturbation(&g, &params, cfg.seed, st.max_class, st.a_lo, st.a_hi)?;
    let mut stepper = cfg.stepper;
    stepper.sample_every = ((0.1 * cfg.t_final / stepper.dt).round() as usize).max(1);
    let growth = stability_experiment(&g, &b, &st.deltas, cfg.t_final, &stepper, &params)?;
    let mut files = Vec::new();
    for (d, eg) in st.deltas.iter().zip(&growth) {
        let p = out.join(format!("energy_delta_{d:e}.csv"));
        let mut text = String::from("t,E\n");
        for (t, e) in eg.times.iter().zip(&eg.energy) {
            text.push_str(&format!("{t:.16e},{e:.16e}\n"));
        }
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        files.push(p);
    }
    let spread = slope_spread(&growth);
    let p = out.join("stability.json");
    write_json(
        &p,
        &StabilityReport {
            seed: cfg.seed,
            deltas: &st.deltas,
            growth: &growth,
            slope_spread: spread,
        },
    )?;
    files.push(p);
    let slopes: Vec<f64> = growth.iter().map(|g| g.slope).collect();
    Ok(CommandOutcome {
        files,
        summary: format!("energy growth slopes {slopes:.4?}, relative spread {spread:.3}"),
        passed: spread <= 0.25,
    })
}

/// Validate a config, build its initial data and optionally check a
/// snapshot file against the configured grid.
pub fn check_cmd(cfg: &RunConfig, snapshot: Option<&Path>) -> Result<CommandOutcome> {
    let params = cfg.params()?;
    let g = build_initial_state(&cfg.initial, &params)?;
    crate::stepper::check_initial(&g, &params)?;
    let mut summary = format!(
        "config valid: beta = {}, n0 = {}, {} nodes, initial data admissible",
        params.beta, params.n0, params.grid.num_nodes
    );
    if let Some(path) = snapshot {
        let s = read_snapshot(path, &params)?;
        s.check_admissible(0.0)?;
        summary.push_str(&format!("; snapshot {} admissible at t = {}", path.display(), s.time));
    }
    Ok(CommandOutcome {
        files: Vec::new(),
        summary,
        passed: true,
    })
}
