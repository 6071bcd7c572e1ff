//! Transfer efficiency and population diagnostics.

use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{domain, Result};
use crate::model::{BasisIndex, Model, ModelParams, QuantumState};
use crate::pulses::PulseSchedule;

/// `|<target|final>|^2`. The final state may be sub-normalized.
pub fn transfer_efficiency(final_state: &QuantumState, target: &QuantumState) -> Result<f64> {
    if final_state.dim() != target.dim() {
        return domain(format!(
            "dimension mismatch: final state {} vs target {}",
            final_state.dim(),
            target.dim()
        ));
    }
    Ok(target.inner(final_state).norm_sqr())
}

/// Which part of the basis a population series sums over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PopulationSelector {
    /// One basis state `|n s2 s1>`.
    Basis(BasisIndex),
    /// All states with at least this many photons.
    PhotonsAtLeast(usize),
    /// Every basis state (gives the squared norm).
    All,
}

impl PopulationSelector {
    fn contains(&self, flat: usize) -> bool {
        match *self {
            PopulationSelector::Basis(b) => b.flat() == flat,
            PopulationSelector::PhotonsAtLeast(n) => flat / 4 >= n,
            PopulationSelector::All => true,
        }
    }

    pub fn population(&self, psi: &QuantumState) -> f64 {
        psi.as_slice()
            .iter()
            .enumerate()
            .filter(|(i, _)| self.contains(*i))
            .map(|(_, z)| z.norm_sqr())
            .sum()
    }
}

/// One time series per selector, aligned with `traj.times`.
pub fn populations(traj: &Trajectory, selectors: &[PopulationSelector]) -> Vec<Vec<f64>> {
    selectors
        .iter()
        .map(|sel| traj.states.iter().map(|s| sel.population(s)).collect())
        .collect()
}

/// `<psi|a†a|psi>`, not normalized.
pub fn mean_photon(psi: &QuantumState) -> f64 {
    psi.as_slice()
        .iter()
        .enumerate()
        .map(|(i, z)| (i / 4) as f64 * z.norm_sqr())
        .sum()
}

/// Population lost from the state by the end of the run.
pub fn leakage(traj: &Trajectory) -> f64 {
    (1.0 - traj.final_state.norm_sqr()).clamp(0.0, 1.0)
}

pub fn peak_mean_photon(traj: &Trajectory) -> f64 {
    traj.states.iter().map(mean_photon).fold(0.0, f64::max)
}

/// Largest total population in states with one or more photons.
pub fn peak_cavity_population(traj: &Trajectory) -> f64 {
    let sel = PopulationSelector::PhotonsAtLeast(1);
    traj.states.iter().map(|s| sel.population(s)).fold(0.0, f64::max)
}

/// Fixed-width scientific notation with 12 significant digits.
pub fn format_sig12(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else {
        format!("{x:.11e}")
    }
}

/// Population history table:
/// `time,norm_sqr,p_qubit1,p_qubit2,p_ground,p_cavity,mean_photon`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("time,norm_sqr,p_qubit1,p_qubit2,p_ground,p_cavity,mean_photon\n");
    let cavity = PopulationSelector::PhotonsAtLeast(1);
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let cols = [
            *t,
            s.norm_sqr(),
            s.population(1),
            s.population(2),
            s.population(0),
            cavity.population(s),
            mean_photon(s),
        ];
        let line: Vec<String> = cols.iter().map(|x| format_sig12(*x)).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

/// Outcome of one simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub params: ModelParams,
    pub model: Model,
    pub schedule: Option<PulseSchedule>,
    pub alpha: C64,
    pub beta: C64,
    pub fidelity: f64,
    pub leakage: f64,
    pub peak_mean_photon: f64,
    pub peak_cavity_population: f64,
    /// Length of the integration window.
    pub duration: f64,
    /// Wall-clock seconds. Not serialized, so reruns stay byte-identical.
    #[serde(skip)]
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}
