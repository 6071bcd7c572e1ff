//! Single Gaussian-protocol runs and 2-D sweeps over inverse speed and peak
//! coupling, plus their CSV rendering.

use std::fmt::Write as _;
use std::time::Instant;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{propagate, PropagationOptions, Trajectory};
use crate::error::{domain, Error, Result};
use crate::metrics::{
    format_sig12, leakage, peak_cavity_population, peak_mean_photon, transfer_efficiency, RunRecord,
};
use crate::model::{superposition_initial, superposition_target, Model, ModelParams};
use crate::pulses::{
    GaussianPair, PiecewiseConstantSchedule, PulseSchedule, DEFAULT_TAU_RATIO, DEFAULT_WINDOW_CUTOFF,
};

/// Everything except the two swept axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSettings {
    pub params: ModelParams,
    /// `tau / T`.
    pub tau_ratio: f64,
    pub window_cutoff: f64,
    pub alpha: C64,
    pub beta: C64,
    pub propagation: PropagationOptions,
}

impl Default for PointSettings {
    fn default() -> Self {
        Self {
            params: ModelParams::default(),
            tau_ratio: DEFAULT_TAU_RATIO,
            window_cutoff: DEFAULT_WINDOW_CUTOFF,
            alpha: C64::new(0.0, 0.0),
            beta: C64::new(1.0, 0.0),
            propagation: PropagationOptions::default(),
        }
    }
}

impl PointSettings {
    pub fn model(&self) -> Model {
        self.propagation.model
    }

    pub fn with_model(mut self, model: Model) -> Self {
        self.propagation.model = model;
        self
    }

    /// Gaussian pair for inverse speed `t_inv = 1 / (omega_c T)` and peak `g0`.
    pub fn gaussian(&self, t_inv: f64, g0: f64) -> Result<GaussianPair> {
        if !(t_inv > 0.0 && t_inv.is_finite()) {
            return domain(format!("inverse speed must be positive, got {t_inv}"));
        }
        let width = 1.0 / (self.params.omega_c * t_inv);
        GaussianPair::with_ratio(g0, width, self.tau_ratio)
    }
}

/// Runs `schedule` over `window` from the configured initial superposition.
pub fn simulate(
    schedule: &PulseSchedule,
    window: (f64, f64),
    settings: &PointSettings,
) -> Result<(RunRecord, Trajectory)> {
    let started = Instant::now();
    let p = &settings.params;
    let initial = superposition_initial(settings.alpha, settings.beta, p)?;
    let target = superposition_target(settings.alpha, settings.beta, p)?;
    let traj = propagate(&initial, schedule, p, window, &settings.propagation)?;
    let fidelity = transfer_efficiency(&traj.final_state, &target)?;
    let bound = traj.final_state.norm_sqr() * target.norm_sqr();
    if !(0.0..=bound + 1e-12).contains(&fidelity) {
        return Err(Error::Numeric(format!(
            "efficiency {fidelity} violates the Cauchy-Schwarz bound {bound}"
        )));
    }
    let record = RunRecord {
        params: *p,
        model: settings.model(),
        schedule: Some(schedule.clone()),
        alpha: settings.alpha,
        beta: settings.beta,
        fidelity,
        leakage: leakage(&traj),
        peak_mean_photon: peak_mean_photon(&traj),
        peak_cavity_population: peak_cavity_population(&traj),
        duration: window.1 - window.0,
        wall_time: started.elapsed().as_secs_f64(),
        error: None,
    };
    Ok((record, traj))
}

/// Gaussian protocol at one `(t_inv, g0)` point, with its trajectory.
pub fn run_point_trajectory(t_inv: f64, g0: f64, settings: &PointSettings) -> Result<(RunRecord, Trajectory)> {
    if !(g0 >= 0.0 && g0.is_finite()) {
        return domain(format!("g0 must be non-negative, got {g0}"));
    }
    // the window only depends on T and tau, so size it with a unit pair
    let unit = settings.gaussian(t_inv, 1.0)?;
    let window = unit.integration_window(settings.window_cutoff)?;
    let schedule: PulseSchedule = if g0 == 0.0 {
        PiecewiseConstantSchedule::constant(window.0, window.1 - window.0, 1, 0.0, 0.0, (0.0, 0.0))?.into()
    } else {
        settings.gaussian(t_inv, g0)?.into()
    };
    simulate(&schedule, window, settings)
}

/// Gaussian protocol at one `(t_inv, g0)` point.
pub fn run_point(t_inv: f64, g0: f64, settings: &PointSettings) -> Result<RunRecord> {
    run_point_trajectory(t_inv, g0, settings).map(|(r, _)| r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub t_inv_values: Vec<f64>,
    pub g0_values: Vec<f64>,
    pub settings: PointSettings,
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            t_inv_values: linspace(0.01, 0.10, 10),
            g0_values: linspace(0.05, 0.5, 10),
            settings: PointSettings::default(),
        }
    }
}

fn check_axis(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return domain(format!("{name} axis is empty"));
    }
    if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return domain(format!("{name} axis must be positive"));
    }
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return domain(format!("{name} axis must be strictly increasing"));
    }
    Ok(())
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        check_axis("t_inv", &self.t_inv_values)?;
        check_axis("g0", &self.g0_values)?;
        self.settings.params.validate()?;
        self.settings.propagation.validate()
    }

    /// Grid points in row-major order (`t_inv` outer, `g0` inner).
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.t_inv_values
            .iter()
            .flat_map(|t| self.g0_values.iter().map(move |g| (*t, *g)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub t_inv: f64,
    pub g0: f64,
    pub record: std::result::Result<RunRecord, String>,
}

/// Evaluates every grid point. Point failures are kept in their row.
pub fn run_sweep(grid: &SweepGrid) -> Result<Vec<SweepPoint>> {
    grid.validate()?;
    Ok(grid
        .points()
        .into_par_iter()
        .map(|(t_inv, g0)| SweepPoint {
            t_inv,
            g0,
            record: run_point(t_inv, g0, &grid.settings).map_err(|e| e.to_string()),
        })
        .collect())
}

pub const HEATMAP_HEADER: &str = "t_inv,g0,model,fidelity,leakage,peak_mean_photon";

/// Heatmap table, one row per point, 12 significant digits.
pub fn heatmap_csv(points: &[SweepPoint], model: Model) -> String {
    let mut out = String::from(HEATMAP_HEADER);
    out.push('\n');
    for p in points {
        let (f, l, n) = match &p.record {
            Ok(r) => (r.fidelity, r.leakage, r.peak_mean_photon),
            Err(_) => (f64::NAN, f64::NAN, f64::NAN),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            format_sig12(p.t_inv),
            format_sig12(p.g0),
            model,
            format_sig12(f),
            format_sig12(l),
            format_sig12(n)
        );
    }
    out
}
