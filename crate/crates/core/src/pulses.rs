//! Time-dependent coupling schedules `g1(t)`, `g2(t)`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Default relative amplitude below which Gaussian tails are dropped.
pub const DEFAULT_WINDOW_CUTOFF: f64 = 1e-4;

/// Default half-delay between the two Gaussians, in units of their width.
pub const DEFAULT_TAU_RATIO: f64 = 0.7;

/// One of the two coupling controls.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Control {
    /// `g1`, couples qubit 1 (initially excited) to the cavity.
    G1,
    /// `g2`, couples qubit 2 (the receiver) to the cavity.
    G2,
}

impl Control {
    pub const BOTH: [Control; 2] = [Control::G1, Control::G2];
}

impl TryFrom<usize> for Control {
    type Error = Error;

    fn try_from(which: usize) -> Result<Self> {
        match which {
            1 => Ok(Control::G1),
            2 => Ok(Control::G2),
            _ => domain(format!("control id must be 1 or 2, got {which}")),
        }
    }
}

/// Counterintuitively ordered Gaussian pair:
/// `g1(t) = g0 exp(-((t - tau)/T)^2)`, `g2(t) = g0 exp(-((t + tau)/T)^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPair {
    pub g0: f64,
    /// Pulse width `T`.
    pub width: f64,
    pub tau: f64,
}

impl GaussianPair {
    pub fn new(g0: f64, width: f64, tau: f64) -> Result<Self> {
        if !(g0 > 0.0 && g0.is_finite()) {
            return domain(format!("g0 must be positive, got {g0}"));
        }
        if !(width > 0.0 && width.is_finite()) {
            return domain(format!("pulse width must be positive, got {width}"));
        }
        if !(tau >= 0.0 && tau.is_finite()) {
            return domain(format!("tau must be non-negative, got {tau}"));
        }
        Ok(Self { g0, width, tau })
    }

    /// Pair with `tau = tau_ratio * width`.
    pub fn with_ratio(g0: f64, width: f64, tau_ratio: f64) -> Result<Self> {
        Self::new(g0, width, tau_ratio * width)
    }

    pub fn value(&self, t: f64, which: Control) -> f64 {
        let center = match which {
            Control::G1 => self.tau,
            Control::G2 => -self.tau,
        };
        let x = (t - center) / self.width;
        self.g0 * (-x * x).exp()
    }

    /// Symmetric window outside of which both pulses are below `cutoff * g0`.
    pub fn integration_window(&self, cutoff: f64) -> Result<(f64, f64)> {
        if !(cutoff > 0.0 && cutoff < 1.0) {
            return domain(format!("window cutoff must lie in (0, 1), got {cutoff}"));
        }
        let t_end = self.tau + self.width * (1.0 / cutoff).ln().sqrt();
        Ok((-t_end, t_end))
    }

    /// Span over which the larger of the two pulses exceeds `g0 / e`.
    pub fn effective_duration(&self) -> f64 {
        2.0 * (self.tau + self.width)
    }
}

/// Outside-window rule for piecewise-constant schedules.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutsideRule {
    #[default]
    Zero,
    Edge,
}

/// Step-function controls on `M` equal bins starting at `t_start`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule")]
pub struct PiecewiseConstantSchedule {
    t_start: f64,
    dt: f64,
    values1: Vec<f64>,
    values2: Vec<f64>,
    bounds: (f64, f64),
    #[serde(default)]
    outside: OutsideRule,
}

#[derive(Deserialize)]
struct RawSchedule {
    t_start: f64,
    dt: f64,
    values1: Vec<f64>,
    values2: Vec<f64>,
    bounds: (f64, f64),
    #[serde(default)]
    outside: OutsideRule,
}

impl TryFrom<RawSchedule> for PiecewiseConstantSchedule {
    type Error = Error;

    fn try_from(r: RawSchedule) -> Result<Self> {
        Ok(Self::new(r.t_start, r.dt, r.values1, r.values2, r.bounds)?.with_outside(r.outside))
    }
}

impl PiecewiseConstantSchedule {
    /// Values outside `bounds` are accepted here; [`Self::clamp`] projects them.
    pub fn new(
        t_start: f64,
        dt: f64,
        values1: Vec<f64>,
        values2: Vec<f64>,
        bounds: (f64, f64),
    ) -> Result<Self> {
        if values1.is_empty() || values2.is_empty() {
            return domain("schedule must have at least one bin");
        }
        if values1.len() != values2.len() {
            return domain(format!(
                "control arrays differ in length ({} vs {})",
                values1.len(),
                values2.len()
            ));
        }
        if !(dt > 0.0 && dt.is_finite()) || !t_start.is_finite() {
            return domain(format!("invalid bin timing t_start={t_start} dt={dt}"));
        }
        if !bounds.0.is_finite() || !bounds.1.is_finite() || bounds.0 > bounds.1 {
            return domain(format!("bounds [{}, {}] are not ordered", bounds.0, bounds.1));
        }
        if values1.iter().chain(&values2).any(|v| !v.is_finite()) {
            return domain("schedule contains non-finite values");
        }
        Ok(Self { t_start, dt, values1, values2, bounds, outside: OutsideRule::Zero })
    }

    /// Constant controls over `bins` bins covering `[t_start, t_start + duration]`.
    pub fn constant(
        t_start: f64,
        duration: f64,
        bins: usize,
        g1: f64,
        g2: f64,
        bounds: (f64, f64),
    ) -> Result<Self> {
        if bins == 0 {
            return domain("schedule must have at least one bin");
        }
        Self::new(t_start, duration / bins as f64, vec![g1; bins], vec![g2; bins], bounds)
    }

    /// Samples a Gaussian pair at bin midpoints.
    pub fn sample(
        pair: &GaussianPair,
        t_start: f64,
        duration: f64,
        bins: usize,
        bounds: (f64, f64),
    ) -> Result<Self> {
        if bins == 0 {
            return domain("schedule must have at least one bin");
        }
        let dt = duration / bins as f64;
        let mid = |k: usize| t_start + (k as f64 + 0.5) * dt;
        let v1 = (0..bins).map(|k| pair.value(mid(k), Control::G1)).collect();
        let v2 = (0..bins).map(|k| pair.value(mid(k), Control::G2)).collect();
        Self::new(t_start, dt, v1, v2, bounds)
    }

    pub fn with_outside(mut self, rule: OutsideRule) -> Self {
        self.outside = rule;
        self
    }

    pub fn bins(&self) -> usize {
        self.values1.len()
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.dt * self.bins() as f64
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.bins() as f64
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    pub fn outside(&self) -> OutsideRule {
        self.outside
    }

    pub fn values(&self, which: Control) -> &[f64] {
        match which {
            Control::G1 => &self.values1,
            Control::G2 => &self.values2,
        }
    }

    /// Both controls of bin `k`.
    pub fn bin(&self, k: usize) -> (f64, f64) {
        (self.values1[k], self.values2[k])
    }

    /// Controls flattened as `[g1_0..g1_M, g2_0..g2_M]`.
    pub fn to_vector(&self) -> Vec<f64> {
        self.values1.iter().chain(&self.values2).copied().collect()
    }

    /// Same timing and bounds, new values from a `2M` vector (unclamped).
    pub fn with_vector(&self, x: &[f64]) -> Result<Self> {
        let m = self.bins();
        if x.len() != 2 * m {
            return domain(format!("expected {} control values, got {}", 2 * m, x.len()));
        }
        Ok(Self::new(self.t_start, self.dt, x[..m].to_vec(), x[m..].to_vec(), self.bounds)?
            .with_outside(self.outside))
    }

    /// Index of the bin containing `t`, or `None` outside the window.
    /// Bins are left-closed; the final instant belongs to the last bin.
    pub fn bin_index(&self, t: f64) -> Option<usize> {
        if t < self.t_start || t > self.t_end() {
            return None;
        }
        let k = ((t - self.t_start) / self.dt).floor() as usize;
        Some(k.min(self.bins() - 1))
    }

    pub fn value(&self, t: f64, which: Control) -> f64 {
        let vals = self.values(which);
        match self.bin_index(t) {
            Some(k) => vals[k],
            None => match self.outside {
                OutsideRule::Zero => 0.0,
                OutsideRule::Edge if t < self.t_start => vals[0],
                OutsideRule::Edge => vals[vals.len() - 1],
            },
        }
    }

    /// Bin edges `t_start, t_start + dt, ..., t_end`.
    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins()).map(|k| self.t_start + k as f64 * self.dt).collect()
    }

    pub fn is_within_bounds(&self) -> bool {
        let (lo, hi) = self.bounds;
        self.values1.iter().chain(&self.values2).all(|v| (lo..=hi).contains(v))
    }

    /// Projects every value into the bounds.
    pub fn clamp(&self) -> Self {
        let (lo, hi) = self.bounds;
        let proj = |v: &Vec<f64>| v.iter().map(|x| x.clamp(lo, hi)).collect();
        Self { values1: proj(&self.values1), values2: proj(&self.values2), ..self.clone() }
    }

    /// Table with one row per bin: `bin,t_begin,t_end,g1,g2`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin,t_begin,t_end,g1,g2\n");
        for k in 0..self.bins() {
            let t0 = self.t_start + k as f64 * self.dt;
            let _ = writeln!(
                out,
                "{k},{},{},{},{}",
                t0,
                t0 + self.dt,
                self.values1[k],
                self.values2[k]
            );
        }
        out
    }
}

/// Either kind of coupling schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PulseSchedule {
    Gaussian(GaussianPair),
    Piecewise(PiecewiseConstantSchedule),
}

impl PulseSchedule {
    pub fn value(&self, t: f64, which: Control) -> f64 {
        match self {
            PulseSchedule::Gaussian(p) => p.value(t, which),
            PulseSchedule::Piecewise(s) => s.value(t, which),
        }
    }

    pub fn values(&self, t: f64) -> (f64, f64) {
        (self.value(t, Control::G1), self.value(t, Control::G2))
    }

    /// Instants where the schedule may jump; propagators never step across one.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            PulseSchedule::Gaussian(_) => Vec::new(),
            PulseSchedule::Piecewise(s) => s.edges(),
        }
    }
}

impl From<GaussianPair> for PulseSchedule {
    fn from(p: GaussianPair) -> Self {
        PulseSchedule::Gaussian(p)
    }
}

impl From<PiecewiseConstantSchedule> for PulseSchedule {
    fn from(s: PiecewiseConstantSchedule) -> Self {
        PulseSchedule::Piecewise(s)
    }
}
