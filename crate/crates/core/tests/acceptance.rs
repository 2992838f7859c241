//! Acceptance suite. Each test prints one `criterion k: PASS|FAIL` line with
//! the measured quantities, then asserts.

use std::sync::OnceLock;
use std::time::Instant;

use grainkin::collision::{apply_collision, apply_collision_gain, apply_collision_loss, collision_matrix};
use grainkin::diagnostics::{
    grain_count_bounds, stability_experiment, tightness_envelope, InvariantReport, InvariantTolerances,
    TightnessLattice,
};
use grainkin::io::commands::{simulate_cmd, slope_spread, stability_cmd};
use grainkin::io::initial::random_perturbation;
use grainkin::io::snapshot::{read_snapshot, write_snapshot};
use grainkin::io::{build_initial_state, project_polyhedral, BumpProfile, InitialFamily, RunConfig};
use grainkin::moments::evaluate_moments;
use grainkin::selfsim::{lewis_asymptote, selfsim_moments, SelfSimInput};
use grainkin::stepper::{run_simulation, truncation_ladder, Scheme, StepperConfig, TrajectoryRecord};
use grainkin::supersolution::{gamma_decay, phi};
use grainkin::{AreaGrid, Exec, ModelParams, SimState, SuperSolution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = f64::EPSILON;

/// Written to the process stdout directly so the line shows without
/// `--nocapture`.
fn report(k: u32, pass: bool, detail: &str) {
    use std::io::Write;
    let line = format!("criterion {k}: {} ({detail})\n", if pass { "PASS" } else { "FAIL" });
    std::io::stdout().lock().write_all(line.as_bytes()).unwrap();
}

fn sci(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
}

/// Compensated sum, so the identity residuals measure the operator and not
/// the summation order.
fn neumaier(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = s + v;
        if s.abs() >= v.abs() {
            c += (s - t) + v;
        } else {
            c += (v - t) + s;
        }
        s = t;
    }
    s + c
}

const SWEEP: [(f64, usize); 9] = [
    (0.25, 8),
    (0.25, 20),
    (0.25, 50),
    (1.0, 8),
    (1.0, 20),
    (1.0, 50),
    (1.9, 8),
    (1.9, 20),
    (1.9, 50),
];

fn column_params(beta: f64, n0: usize) -> ModelParams {
    ModelParams::truncated(beta, n0, AreaGrid::new(0.1, 2).unwrap()).unwrap()
}

#[test]
fn criterion_01_operator_identities() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_zero, mut worst_first) = (0.0f64, 0.0f64);
    for &(beta, n0) in &SWEEP {
        let p = column_params(beta, n0);
        for _ in 0..1000 {
            let col: Vec<f64> = (0..p.n_classes()).map(|_| rng.random_range(0.0..1.0)).collect();
            let j = apply_collision(&col, &p).unwrap();
            let gain = apply_collision_gain(&col, &p).unwrap();
            let loss = apply_collision_loss(&col, &p).unwrap();
            let scale: f64 = gain.iter().zip(&loss).map(|(g, l)| g.abs() + l.abs()).sum();
            worst_zero = worst_zero.max(neumaier(j.iter().copied()).abs() / scale);

            // sum_n n (Jf)_n = 2(b+1) f_2 - n0 b f_{n0} - sum_n n f_n
            let n_of = |k: usize| (k + 2) as f64;
            let lhs = neumaier(j.iter().enumerate().map(|(k, v)| n_of(k) * v));
            let rhs = neumaier(
                [2.0 * (beta + 1.0) * col[0], -(n0 as f64) * beta * col[col.len() - 1]]
                    .into_iter()
                    .chain(col.iter().enumerate().map(|(k, v)| -n_of(k) * v)),
            );
            let wscale: f64 = gain
                .iter()
                .zip(&loss)
                .enumerate()
                .map(|(k, (g, l))| n_of(k) * (g.abs() + l.abs()))
                .sum();
            worst_first = worst_first.max((lhs - rhs).abs() / wscale);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst_zero <= 10.0 * EPS && worst_first <= 10.0 * EPS && elapsed < 1.0;
    report(
        1,
        pass,
        &format!("zero balance {worst_zero:.2e}, first moment {worst_first:.2e}, limit {:.2e}, {elapsed:.3} s", 10.0 * EPS),
    );
    assert!(pass);
}

#[test]
fn criterion_02_super_solution() {
    let start = Instant::now();
    let (mut worst_kernel, mut worst_exp) = (0.0f64, 0.0f64);
    for &(beta, n0) in &SWEEP {
        let p = column_params(beta, n0);
        let ph: Vec<f64> = p.classes().map(|n| phi(beta, n)).collect();
        let j = collision_matrix(&p);
        for r in 0..ph.len() {
            let terms: Vec<f64> = (0..ph.len()).map(|c| j[(r, c)] * ph[c]).collect();
            let scale: f64 = terms.iter().map(|t| t.abs()).sum();
            worst_kernel = worst_kernel.max(neumaier(terms).abs() / scale);
        }
        let g = gamma_decay(beta);
        for (k, n) in p.classes().enumerate() {
            let want = (-(n as f64) * g).exp();
            worst_exp = worst_exp.max((beta * n as f64 * ph[k] - want).abs() / want);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst_kernel <= 4.0 * EPS && worst_exp <= 64.0 * EPS && elapsed < 1.0;
    report(
        2,
        pass,
        &format!("|J phi| relative {worst_kernel:.2e}, beta n phi_n vs exp(-n gamma) {worst_exp:.2e}, {elapsed:.3} s"),
    );
    assert!(pass);
}

/// Exponential datum `phi_n a e^{-2a}` projected to `P = 0`.
const LAMBDA: f64 = 2.0;

fn conservation_params(dt: f64) -> ModelParams {
    ModelParams::truncated(1.0, 20, AreaGrid::covering(dt, 30.0).unwrap()).unwrap()
}

fn exponential_datum(p: &ModelParams) -> SimState {
    build_initial_state(
        &InitialFamily::Exponential {
            lambda: LAMBDA,
            scale: 1.0,
            project: true,
        },
        p,
    )
    .unwrap()
}

fn conservation_config(dt: f64, sample_every: usize) -> StepperConfig {
    StepperConfig {
        dt,
        // mass crossing a_max is recorded, not fatal
        overflow_tol: f64::INFINITY,
        sample_every,
        exec: Exec::Sequential,
        ..Default::default()
    }
}

struct ConservationRun {
    params: ModelParams,
    rec: TrajectoryRecord,
    seconds: f64,
}

/// The criterion-3 trajectory, shared with the envelope and bound checks.
fn conservation_run() -> &'static ConservationRun {
    static RUN: OnceLock<ConservationRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let p = conservation_params(0.01);
        let g = exponential_datum(&p);
        let start = Instant::now();
        let rec = run_simulation(&g, 5.0, &conservation_config(0.01, 50), &p).unwrap();
        ConservationRun {
            params: p,
            rec,
            seconds: start.elapsed().as_secs_f64(),
        }
    })
}

#[test]
fn criterion_03_conservation() {
    let run = conservation_run();
    let tol = InvariantTolerances::default();
    let inv = InvariantReport::from_trajectory(&run.rec, &run.params, &tol);
    let verdicts = inv.verdicts(&tol);
    let details: Vec<String> = verdicts
        .iter()
        .map(|v| format!("{} {:.3e} [{}]", v.name, v.value, if v.pass { "ok" } else { "fail" }))
        .collect();
    let pass = verdicts.iter().all(|v| v.pass) && run.seconds < 60.0;
    report(
        3,
        pass,
        &format!(
            "{}; leaked past a_max {:.3e} of N(0) = {:.4}; {:.1} s",
            details.join(", "),
            run.rec.overflow.last().unwrap(),
            run.rec.moments[0].count,
            run.seconds
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_04_cross_stepper() {
    let start = Instant::now();
    let t_final = 0.48;
    let mut sups = Vec::new();
    for dt in [0.04, 0.02, 0.01] {
        let p = conservation_params(dt);
        let g = exponential_datum(&p);
        let strang = StepperConfig {
            window: 0.08,
            sample_every: 1,
            exec: Exec::Parallel,
            ..conservation_config(dt, 1)
        };
        let picard = StepperConfig {
            scheme: Scheme::Picard,
            ..strang
        };
        let a = run_simulation(&g, t_final, &strang, &p).unwrap();
        let b = run_simulation(&g, t_final, &picard, &p).unwrap();
        let ss = SuperSolution::new(&p);
        let sup = a
            .samples
            .iter()
            .zip(&b.samples)
            .map(|(x, y)| ss.flat_distance(x, y))
            .fold(0.0, f64::max);
        sups.push(sup);
    }
    let ratios: Vec<f64> = sups.windows(2).map(|w| w[0] / w[1]).collect();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = ratios.iter().all(|r| (r - 4.0).abs() <= 0.3 * 4.0) && elapsed < 300.0;
    report(
        4,
        pass,
        &format!("sup distances [{}], ratios {ratios:.3?}, {elapsed:.1} s", sci(&sups)),
    );
    assert!(pass);
}

#[test]
fn criterion_05_truncation_ladder() {
    let start = Instant::now();
    let p = ModelParams::truncated(1.0, 22, AreaGrid::covering(0.01, 30.0).unwrap()).unwrap();
    // the exponential datum restricted to classes 2..=8
    let mut g = exponential_datum(&p);
    for n in 9..=22 {
        g.scale_class(n, 0.0);
    }
    let g = project_polyhedral(&g, &p).unwrap();
    let g_norm = SuperSolution::new(&p).flat_norm(&g);
    let cfg = StepperConfig {
        sample_every: 10,
        exec: Exec::Parallel,
        ..conservation_config(0.01, 10)
    };
    let ladder = truncation_ladder(&g, &[10, 14, 18, 22], 2.0, &cfg, &p).unwrap();
    let sups: Vec<f64> = ladder.differences.iter().map(|d| d.sup_up_to(8)).collect();
    let decreasing = sups.windows(2).all(|w| w[1] < w[0]);
    let last = *sups.last().unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = decreasing && last < 1e-6 && elapsed < 300.0;
    report(
        5,
        pass,
        &format!(
            "sup differences on classes <= 8: [{}], flat norm of datum {g_norm:.3}, {elapsed:.1} s",
            sci(&sups)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_tightness_envelopes() {
    let run = conservation_run();
    let start = Instant::now();
    let lattice = TightnessLattice::uniform(&run.rec, &run.params, 10);
    let t = tightness_envelope(&run.rec, &run.params, &lattice);
    let elapsed = start.elapsed().as_secs_f64();
    let pass = t.samples.len() == 100 && t.holds() && elapsed < 5.0;
    report(
        6,
        pass,
        &format!(
            "{} lattice points, min N margin {:.3e}, min M margin {:.3e}, {elapsed:.2} s",
            t.samples.len(),
            t.min_n_margin(),
            t.min_m_margin()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_07_lower_bounds() {
    let start = Instant::now();
    let p = ModelParams::truncated(1.0, 12, AreaGrid::covering(0.01, 10.0).unwrap()).unwrap();
    let mut g = build_initial_state(
        &InitialFamily::CompactBump {
            classes: (3..=9).collect(),
            a_lo: 0.0,
            a_hi: 1.0,
            amplitude: 1.0,
            profile: BumpProfile::Smooth,
            project: true,
        },
        &p,
    )
    .unwrap();
    g.scale(1.0 / evaluate_moments(&g, &p).area);
    let cfg = conservation_config(0.01, 10);
    let rec = run_simulation(&g, 1.0, &cfg, &p).unwrap();
    let growth = grain_count_bounds(&rec, &p, Some(1.0));
    let worst_growth = growth
        .samples
        .iter()
        .map(|s| s.count - 1.0 / (1.0 + 6.0 * s.time))
        .fold(f64::INFINITY, f64::min);

    let run = conservation_run();
    let pos = grain_count_bounds(&run.rec, &run.params, None);
    let worst_pos = pos
        .samples
        .iter()
        .map(|s| s.count - s.positivity_bound)
        .fold(f64::INFINITY, f64::min);
    let final_bound = pos.samples.last().unwrap().positivity_bound;
    let elapsed = start.elapsed().as_secs_f64();
    let pass = growth.growth_holds() && pos.positivity_holds() && final_bound > 0.0 && elapsed < 60.0;
    report(
        7,
        pass,
        &format!(
            "min N - 1/(1+6t) = {worst_growth:.3e}, min N - C_t = {worst_pos:.3e}, C_5 = {final_bound:.3e}, {elapsed:.1} s"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_energy_stability() {
    let start = Instant::now();
    let p = conservation_params(0.01);
    let g = exponential_datum(&p);
    let b = random_perturbation(&g, &p, 2024, 10, 0.5, 3.0).unwrap();
    let cfg = StepperConfig {
        exec: Exec::Parallel,
        ..conservation_config(0.01, 10)
    };
    let growth = stability_experiment(&g, &b, &[1e-2, 1e-3], 1.0, &cfg, &p).unwrap();
    let spread = slope_spread(&growth);
    let slopes: Vec<f64> = growth.iter().map(|e| e.slope).collect();
    // one constant for both pairs, fitted as the steepest observed growth
    let c_hat = growth.iter().map(|e| e.envelope_rate).fold(f64::NEG_INFINITY, f64::max);
    let bounded = growth.iter().all(|e| e.bounded_by(c_hat));
    let elapsed = start.elapsed().as_secs_f64();
    let pass = spread <= 0.25 && bounded && elapsed < 180.0;
    report(
        8,
        pass,
        &format!("slopes {slopes:.4?}, spread {spread:.3}, fitted C = {c_hat:.4}, {elapsed:.1} s"),
    );
    assert!(pass);
}

#[test]
fn criterion_09_self_similar_moments() {
    let start = Instant::now();
    let input = SelfSimInput::default();
    let r = selfsim_moments(&input).unwrap();
    let doubled = selfsim_moments(&SelfSimInput {
        cap: 2 * input.cap,
        ..input
    })
    .unwrap();
    let shift = r
        .moments
        .iter()
        .zip(&doubled.moments)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let gamma = r.gamma.unwrap();
    let (b, c) = lewis_asymptote(input.beta, gamma);
    let want_b = 1.0 / (gamma + 1.0);
    let want_c = want_b * ((2.0 * input.beta + 1.0) - 6.0 * gamma);
    let elapsed = start.elapsed().as_secs_f64();
    let pass = r.relation_residual <= 1e-10
        && r.consistency_residual <= 1e-10
        && shift < 1e-8
        && b == want_b
        && c == want_c
        && elapsed < 5.0;
    report(
        9,
        pass,
        &format!(
            "gamma {gamma:.10}, relation {:.2e}, consistency {:.2e}, cap doubling shift {shift:.2e}, Lewis b {b:.6} c {c:.6}, {elapsed:.2} s",
            r.relation_residual, r.consistency_residual
        ),
    );
    assert!(pass);
}

fn read_tree(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(read_tree(&path));
        } else {
            out.push((path.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&path).unwrap()));
        }
    }
    out.sort();
    out
}

#[test]
fn criterion_10_io_determinism() {
    let start = Instant::now();
    let cfg = RunConfig::from_json(
        r#"{
            "model": {"beta": 1.0, "n0": 12, "delta_a": 0.02, "num_nodes": 501},
            "stepper": {"dt": 0.02},
            "t_final": 0.4,
            "output": {"snapshot_every": 0.1},
            "initial": {"family": "exponential", "lambda": 2.0},
            "diagnostics": {"tightness": true, "bounds": true, "lewis": true},
            "stability": {"deltas": [0.01]},
            "seed": 11
        }"#,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut trees = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        simulate_cmd(&cfg, &out).unwrap();
        stability_cmd(&cfg, &out.join("stability")).unwrap();
        trees.push(read_tree(&out));
    }
    let identical = trees[0] == trees[1];

    let p = cfg.params().unwrap();
    let mut state = build_initial_state(&cfg.initial, &p).unwrap();
    state.time = 0.1 + 0.2;
    // awkward values: subnormals, long mantissas
    state.set(3, 7, 5e-324);
    state.set(4, 9, 1.0 / 3.0);
    let path = dir.path().join("round_trip.csv");
    write_snapshot(&path, &state, &p).unwrap();
    let back = read_snapshot(&path, &p).unwrap();
    let bit_exact = back.time.to_bits() == state.time.to_bits()
        && back
            .as_slice()
            .iter()
            .zip(state.as_slice())
            .all(|(x, y)| x.to_bits() == y.to_bits());
    let elapsed = start.elapsed().as_secs_f64();
    let pass = identical && bit_exact && !trees[0].is_empty() && elapsed < 30.0;
    report(
        10,
        pass,
        &format!(
            "{} files byte-identical: {identical}, snapshot round trip bit-exact: {bit_exact}, {elapsed:.1} s",
            trees[0].len()
        ),
    );
    assert!(pass);
}
