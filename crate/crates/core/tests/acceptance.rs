//! Exit criteria at the cyan operating point `(omega_c T)^-1 = 0.04`,
//! `g0 = 0.3 omega_c`, `kappa = 0.005 omega_c`, full transfer (`beta = 1`).
//!
//! Each test prints one `criterion N [PASS|FAIL]` line with the measured
//! values; `--nocapture` additionally shows the property-suite breakdown.

mod common;

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::{central_differences, rel_err, taylor_expm, Lcg};
use usc_transfer::metrics::leakage;
use usc_transfer::qoc::TransferProblem;
use usc_transfer::sweep::{heatmap_csv, run_point, run_sweep, simulate, PointSettings, SweepGrid};
use usc_transfer::Complex64 as C64;
use usc_transfer::{
    basis_state, excitation_operator, optimize, parity_operator, propagate, propagate_piecewise, GaussianPair,
    Model, ModelParams, OptimizationConfig, OptimizationResult, PropagationOptions, PulseSchedule, RunRecord,
};

const T_INV: f64 = 0.04;
const G0: f64 = 0.3;
const KAPPA: f64 = 0.005;
const TAU_GRID: [f64; 9] = [0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2];

fn settings(model: Model) -> PointSettings {
    let mut s = PointSettings::default().with_model(model);
    s.params = ModelParams::resonant(KAPPA, 8).unwrap();
    s
}

struct Calibration {
    best_ratio: f64,
    best: RunRecord,
    scan: Vec<(f64, f64)>,
    elapsed: Duration,
}

fn calibrate(model: Model) -> Calibration {
    let started = Instant::now();
    let mut scan = Vec::new();
    let mut best: Option<(f64, RunRecord)> = None;
    for ratio in TAU_GRID {
        let s = PointSettings { tau_ratio: ratio, ..settings(model) };
        let rec = run_point(T_INV, G0, &s).unwrap();
        scan.push((ratio, rec.fidelity));
        if best.as_ref().is_none_or(|(_, b)| rec.fidelity > b.fidelity) {
            best = Some((ratio, rec));
        }
    }
    let (best_ratio, best) = best.unwrap();
    Calibration { best_ratio, best, scan, elapsed: started.elapsed() }
}

fn rabi_gaussian() -> &'static Calibration {
    static CELL: OnceLock<Calibration> = OnceLock::new();
    CELL.get_or_init(|| calibrate(Model::Rabi))
}

fn rwa_gaussian() -> &'static Calibration {
    static CELL: OnceLock<Calibration> = OnceLock::new();
    CELL.get_or_init(|| calibrate(Model::Rwa))
}

struct QocRun {
    result: OptimizationResult,
    record: RunRecord,
    elapsed: Duration,
}

fn qoc() -> &'static QocRun {
    static CELL: OnceLock<QocRun> = OnceLock::new();
    CELL.get_or_init(|| {
        let s = settings(Model::Rabi);
        let width = 1.0 / T_INV;
        let cfg = OptimizationConfig {
            bins: 20,
            duration: width,
            bounds: (0.0, G0),
            max_iters: 500,
            restarts: 5,
            seed: 0,
            ..Default::default()
        };
        let init = basis_state(0, 0, 1, &s.params).unwrap();
        let target = basis_state(0, 1, 0, &s.params).unwrap();
        let started = Instant::now();
        let result = optimize(&cfg, &s.params, &init, &target).unwrap();
        let elapsed = started.elapsed();
        let sched: PulseSchedule = result.best_schedule.clone().into();
        let (record, _) = simulate(&sched, (0.0, width), &s).unwrap();
        QocRun { result, record, elapsed }
    })
}

/// Written to the raw stderr handle, which the test harness does not capture,
/// so every criterion shows up in a plain `cargo test` run.
fn report(id: &str, ok: bool, detail: String) {
    use std::io::Write;
    let line = format!("criterion {id} [{}]: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

#[test]
fn criterion_1_gaussian_cyan_point() {
    let cal = rabi_gaussian();
    let f = cal.best.fidelity;
    let in_band = (0.93..=0.97).contains(&f);
    let fast = cal.elapsed < Duration::from_secs(30);
    report(
        "1",
        in_band && fast,
        format!(
            "best F = {f:.5} at tau/T = {} (band [0.93, 0.97]); scan {:?}; runtime {:.1}s (< 30s)",
            cal.best_ratio,
            cal.scan.iter().map(|(r, f)| format!("{r}:{f:.4}")).collect::<Vec<_>>(),
            cal.elapsed.as_secs_f64()
        ),
    );
    assert!(fast, "runtime {:?}", cal.elapsed);
    assert!(in_band, "best Gaussian fidelity {f} outside [0.93, 0.97]");
}

#[test]
fn criterion_2_optimal_control_cyan_point() {
    let q = qoc();
    let width = 1.0 / T_INV;
    let f = q.result.best_fidelity;
    let duration = q.result.best_schedule.duration();
    let gauss = GaussianPair::with_ratio(G0, width, rabi_gaussian().best_ratio).unwrap();
    let gauss_span = gauss.effective_duration() / width;
    let ok_f = f >= 0.98;
    let ok_t = (duration - width).abs() < 1e-9 && gauss_span > 2.5;
    let ok_rt = q.elapsed < Duration::from_secs(600);
    report(
        "2",
        ok_f && ok_t && ok_rt,
        format!(
            "QOC F = {f:.5} (>= 0.98), duration {:.3}T, Gaussian effective duration {gauss_span:.2}T (> 2.5T), \
             {} starts, runtime {:.1}s (< 600s)",
            duration / width,
            q.result.start_fidelities.len(),
            q.elapsed.as_secs_f64()
        ),
    );
    assert!(q.result.best_schedule.is_within_bounds());
    assert!(ok_f && ok_t && ok_rt);
}

#[test]
fn criterion_3_rwa_comparison() {
    let rabi = rabi_gaussian().best.fidelity;
    let rwa = rwa_gaussian().best.fidelity;
    let qoc = qoc().result.best_fidelity;
    let ok = rwa > rabi && qoc >= rwa - 0.01;
    report(
        "3",
        ok,
        format!("Gaussian RWA F = {rwa:.5} > Rabi F = {rabi:.5}; QOC Rabi F = {qoc:.5} >= RWA - 0.01"),
    );
    assert!(ok);
}

#[test]
fn criterion_4_population_histories() {
    let gauss = &rabi_gaussian().best;
    let q = &qoc().record;
    let more_populated = q.peak_cavity_population > gauss.peak_cavity_population;
    let less_leaky = q.leakage < gauss.leakage;
    report(
        "4",
        more_populated && less_leaky,
        format!(
            "peak cavity population QOC {:.4} vs Gaussian {:.4}; leakage QOC {:.5} vs Gaussian {:.5} \
             (Gaussian at calibrated tau/T = {})",
            q.peak_cavity_population,
            gauss.peak_cavity_population,
            q.leakage,
            gauss.leakage,
            rabi_gaussian().best_ratio
        ),
    );
    assert!(more_populated, "QOC cavity population not above Gaussian");
    assert!(less_leaky, "QOC leakage {} not below Gaussian {}", q.leakage, gauss.leakage);
}

fn check(label: &str, ok: bool, failures: &mut Vec<String>) {
    println!("  {label}: {}", if ok { "ok" } else { "FAILED" });
    if !ok {
        failures.push(label.to_string());
    }
}

#[test]
fn criterion_5_property_suite() {
    let started = Instant::now();
    let mut failures = Vec::new();
    let p = ModelParams::resonant(KAPPA, 8).unwrap();
    let lossless = p.with_kappa(0.0);
    let psi0 = basis_state(0, 0, 1, &p).unwrap();
    let pair = GaussianPair::with_ratio(G0, 1.0 / T_INV, rabi_gaussian().best_ratio).unwrap();
    let window = pair.integration_window(1e-4).unwrap();
    let gauss: PulseSchedule = pair.into();
    let steps: PulseSchedule = Lcg(21).schedule(20, 25.0, 0.3).into();
    let opts = PropagationOptions::default();

    // norm at kappa = 0, parity (Rabi) and excitation number (RWA)
    let parity = parity_operator(&lossless);
    let nexc = excitation_operator(&lossless);
    let mut norm_ok = true;
    let mut parity_ok = true;
    let mut nexc_ok = true;
    for (sched, win) in [(&gauss, window), (&steps, (0.0, 25.0))] {
        let rabi = propagate(&psi0, sched, &lossless, win, &opts).unwrap();
        let p0 = parity.expectation(&psi0);
        for s in &rabi.states {
            norm_ok &= (s.norm_sqr() - 1.0).abs() < 1e-9;
            parity_ok &= (parity.expectation(s) - p0).norm() < 1e-8;
        }
        let rwa = propagate(&psi0, sched, &lossless, win, &opts.with_model(Model::Rwa)).unwrap();
        let n0 = nexc.expectation(&psi0);
        for s in &rwa.states {
            norm_ok &= (s.norm_sqr() - 1.0).abs() < 1e-9;
            nexc_ok &= (nexc.expectation(s) - n0).norm() < 1e-8;
        }
    }
    check("norm conserved at kappa=0 to 1e-9", norm_ok, &mut failures);
    check("parity conserved (Rabi) to 1e-8", parity_ok, &mut failures);
    check("excitation number conserved (RWA) to 1e-8", nexc_ok, &mut failures);

    // monotone decay at kappa > 0
    let mut monotone = true;
    for (sched, win) in [(&gauss, window), (&steps, (0.0, 25.0))] {
        let traj = propagate(&psi0, sched, &p, win, &PropagationOptions { record_stride: 1, ..opts }).unwrap();
        let norms: Vec<f64> = traj.norms_sqr().collect();
        monotone &= norms.windows(2).all(|w| w[1] <= w[0] + 1e-10);
        monotone &= leakage(&traj) > 0.0;
    }
    check("norm non-increasing at kappa>0", monotone, &mut failures);

    // dense exponential oracle on n_max = 3
    let small = ModelParams::resonant(KAPPA, 3).unwrap();
    let small_psi = basis_state(0, 0, 1, &small).unwrap();
    let sched = Lcg(4).schedule(8, 25.0, 0.3);
    let (traj, _) = propagate_piecewise(&small_psi, &sched, &small, &opts).unwrap();
    let gen = usc_transfer::Generator::new(&small, Model::Rabi).unwrap();
    let mut psi = small_psi.amplitudes().clone();
    for k in 0..sched.bins() {
        let (g1, g2) = sched.bin(k);
        psi = taylor_expm(&(gen.dense(g1, g2).matrix() * C64::new(0.0, -sched.dt()))) * psi;
    }
    let oracle_err = traj.final_state.as_slice().iter().zip(psi.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    check(&format!("propagator vs dense exponential oracle ({oracle_err:.1e} < 1e-10)"), oracle_err < 1e-10, &mut failures);

    // vacuum Rabi oscillation in the one-excitation RWA sector
    let g = 0.05;
    let vac = ModelParams::resonant(0.0, 2).unwrap();
    let constant: PulseSchedule =
        usc_transfer::PiecewiseConstantSchedule::constant(0.0, 100.0, 1, g, 0.0, (0.0, 1.0)).unwrap().into();
    let traj = propagate(
        &basis_state(0, 0, 1, &vac).unwrap(),
        &constant,
        &vac,
        (0.0, 100.0),
        &PropagationOptions { record_stride: 1, ..opts }.with_model(Model::Rwa),
    )
    .unwrap();
    let sin_err = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(t, s)| (s.population(4) - (g * t).sin().powi(2)).abs())
        .fold(0.0, f64::max);
    check(&format!("vacuum Rabi sin^2 oracle ({sin_err:.1e} < 1e-6)"), sin_err < 1e-6, &mut failures);

    // exact gradient vs central differences
    let gp = ModelParams::resonant(KAPPA, 2).unwrap();
    let problem =
        TransferProblem::new(&gp, Model::Rabi, &basis_state(0, 0, 1, &gp).unwrap(), &basis_state(0, 1, 0, &gp).unwrap())
            .unwrap();
    let mut worst = 0.0f64;
    for seed in [101, 202, 303] {
        let s = Lcg(seed).schedule(5, 20.0, 0.3);
        let (_, exact) = problem.fidelity_and_gradient(&s).unwrap();
        worst = worst.max(rel_err(&exact, &central_differences(&problem, &s, 1e-6)));
    }
    check(&format!("gradient vs central differences ({worst:.1e} < 1e-5)"), worst < 1e-5, &mut failures);

    // Fock truncation convergence
    let s8 = PointSettings { tau_ratio: rabi_gaussian().best_ratio, ..settings(Model::Rabi) };
    let mut s12 = s8.clone();
    s12.params.n_max = 12;
    let (f8, f12) = (run_point(T_INV, G0, &s8).unwrap().fidelity, run_point(T_INV, G0, &s12).unwrap().fidelity);
    check(&format!("|F(8) - F(12)| = {:.1e} < 1e-4", (f8 - f12).abs()), (f8 - f12).abs() < 1e-4, &mut failures);

    // deterministic sweep output
    let grid = SweepGrid { t_inv_values: vec![0.04, 0.07, 0.1], g0_values: vec![0.1, 0.2, 0.3], ..Default::default() };
    let a = heatmap_csv(&run_sweep(&grid).unwrap(), Model::Rabi);
    let b = heatmap_csv(&run_sweep(&grid).unwrap(), Model::Rabi);
    check("byte-identical CSV on repeated sweeps", a.as_bytes() == b.as_bytes(), &mut failures);

    let elapsed = started.elapsed();
    let fast = elapsed < Duration::from_secs(60);
    report(
        "5",
        failures.is_empty() && fast,
        format!("{} sub-checks failed; runtime {:.1}s (< 60s)", failures.len(), elapsed.as_secs_f64()),
    );
    assert!(failures.is_empty(), "{failures:?}");
    assert!(fast, "property suite took {elapsed:?}");
}
