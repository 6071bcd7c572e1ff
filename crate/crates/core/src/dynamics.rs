//! Time evolution under `K(t) = H(t) - (i/2) κ a†a`.
//!
//! States are never renormalized; the norm lost during evolution is the
//! population that leaked out of the cavity.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{expm_scaled, expmv, CsrMatrix, ZERO};
use crate::model::{
    bare_hamiltonian, coupling_operator, number_operator, Model, ModelParams, Operator,
    QuantumState,
};
use crate::pulses::{Control, PiecewiseConstantSchedule, PulseSchedule};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `K(g1, g2) = K0 + g1 X1 + g2 X2` with a diagonal drift `K0`.
#[derive(Clone, Debug)]
pub struct Generator {
    params: ModelParams,
    model: Model,
    drift: Vec<C64>,
    // drift minus `shift`, centering its real spectrum to shrink exponent norms
    shifted: Vec<C64>,
    shift: f64,
    couplings: [CsrMatrix; 2],
    drift_norm: f64,
    coupling_norms: [f64; 2],
}

impl Generator {
    pub fn new(params: &ModelParams, model: Model) -> Result<Self> {
        params.validate()?;
        let h0 = bare_hamiltonian(params);
        let n = number_operator(params);
        let drift: Vec<C64> = (0..params.dim())
            .map(|i| h0.entry(i, i) - I * (0.5 * params.kappa) * n.entry(i, i))
            .collect();
        let x1 = CsrMatrix::from_dense(coupling_operator(model, 1, params)?.matrix());
        let x2 = CsrMatrix::from_dense(coupling_operator(model, 2, params)?.matrix());
        let lo = drift.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        let hi = drift.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let shift = 0.5 * (lo + hi);
        let shifted: Vec<C64> = drift.iter().map(|z| z - shift).collect();
        let drift_norm = shifted.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let coupling_norms = [x1.norm1(), x2.norm1()];
        Ok(Self {
            params: *params,
            model,
            drift,
            shifted,
            shift,
            couplings: [x1, x2],
            drift_norm,
            coupling_norms,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    pub fn coupling(&self, which: Control) -> &CsrMatrix {
        match which {
            Control::G1 => &self.couplings[0],
            Control::G2 => &self.couplings[1],
        }
    }

    pub fn coupling_norm(&self, which: Control) -> f64 {
        match which {
            Control::G1 => self.coupling_norms[0],
            Control::G2 => self.coupling_norms[1],
        }
    }

    /// Dense `K(g1, g2)`.
    pub fn dense(&self, g1: f64, g2: f64) -> Operator {
        let mut m = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.drift.clone()));
        let x1 = coupling_operator(self.model, 1, &self.params).expect("qubit 1");
        let x2 = coupling_operator(self.model, 2, &self.params).expect("qubit 2");
        m += x1.matrix() * C64::from(g1) + x2.matrix() * C64::from(g2);
        Operator::from_matrix(m)
    }

    /// `y = coeff * K(g1, g2) x`, or `coeff * K† x` when `adjoint` is set.
    #[inline]
    pub fn apply(&self, g1: f64, g2: f64, coeff: C64, adjoint: bool, x: &[C64], y: &mut [C64]) {
        self.apply_with(&self.drift, g1, g2, coeff, adjoint, x, y);
    }

    /// As [`Self::apply`] for `K - shift`.
    #[inline]
    pub fn apply_shifted(&self, g1: f64, g2: f64, coeff: C64, adjoint: bool, x: &[C64], y: &mut [C64]) {
        self.apply_with(&self.shifted, g1, g2, coeff, adjoint, x, y);
    }

    /// Real scalar removed from the drift by [`Self::apply_shifted`].
    pub fn shift(&self) -> f64 {
        self.shift
    }

    #[allow(clippy::too_many_arguments)]
    #[inline]
    fn apply_with(&self, drift: &[C64], g1: f64, g2: f64, coeff: C64, adjoint: bool, x: &[C64], y: &mut [C64]) {
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(drift) {
            let d = if adjoint { d.conj() } else { *d };
            *yi = coeff * d * xi;
        }
        // couplings are Hermitian with real coefficients
        if g1 != 0.0 {
            self.couplings[0].mul_add(coeff * g1, x, y);
        }
        if g2 != 0.0 {
            self.couplings[1].mul_add(coeff * g2, x, y);
        }
    }

    /// Bound on `||K(g1, g2) - shift||_1`.
    pub fn norm_bound(&self, g1: f64, g2: f64) -> f64 {
        self.drift_norm + g1.abs() * self.coupling_norms[0] + g2.abs() * self.coupling_norms[1]
    }

    /// `psi <- exp(-i K dt) psi`
    pub fn step(&self, psi: &mut [C64], g1: f64, g2: f64, dt: f64) -> Result<()> {
        let coeff = -I * dt;
        expmv(|x, y| self.apply_shifted(g1, g2, coeff, false, x, y), self.norm_bound(g1, g2) * dt, psi)?;
        let phase = C64::new(0.0, -self.shift * dt).exp();
        psi.iter_mut().for_each(|z| *z *= phase);
        Ok(())
    }

    /// `chi <- exp(-i K dt)† chi = exp(i K† dt) chi`
    pub fn step_adjoint(&self, chi: &mut [C64], g1: f64, g2: f64, dt: f64) -> Result<()> {
        let coeff = I * dt;
        expmv(|x, y| self.apply_shifted(g1, g2, coeff, true, x, y), self.norm_bound(g1, g2) * dt, chi)?;
        let phase = C64::new(0.0, self.shift * dt).exp();
        chi.iter_mut().for_each(|z| *z *= phase);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// `exp(-i K(t_mid) h)` per step, controls sampled at step midpoints.
    #[default]
    PiecewiseExponential,
    /// Dormand–Prince 5(4) with embedded error control.
    AdaptiveRk,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationOptions {
    pub method: Method,
    pub dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Record every `record_stride`-th step (first and last state always kept).
    pub record_stride: usize,
    pub model: Model,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            method: Method::PiecewiseExponential,
            dt: 0.005,
            rel_tol: 1e-9,
            abs_tol: 1e-9,
            record_stride: 10,
            model: Model::Rabi,
        }
    }
}

impl PropagationOptions {
    pub fn with_model(self, model: Model) -> Self {
        Self { model, ..self }
    }

    pub fn with_method(self, method: Method) -> Self {
        Self { method, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return domain(format!("step size must be positive, got {}", self.dt));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return domain("tolerances must be positive");
        }
        if self.record_stride == 0 {
            return domain("record stride must be at least 1");
        }
        Ok(())
    }
}

/// Sampled history of one propagation.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<QuantumState>,
    pub final_state: QuantumState,
}

impl Trajectory {
    pub fn norms_sqr(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(QuantumState::norm_sqr)
    }

    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0) - self.times.first().copied().unwrap_or(0.0)
    }
}

struct Recorder {
    stride: usize,
    count: usize,
    times: Vec<f64>,
    states: Vec<QuantumState>,
}

impl Recorder {
    fn new(stride: usize, t0: f64, psi: &[C64]) -> Self {
        Self {
            stride,
            count: 0,
            times: vec![t0],
            states: vec![QuantumState::from_amplitudes(psi.to_vec())],
        }
    }

    fn step(&mut self, t: f64, psi: &[C64]) {
        self.count += 1;
        if self.count.is_multiple_of(self.stride) {
            self.times.push(t);
            self.states.push(QuantumState::from_amplitudes(psi.to_vec()));
        }
    }

    fn finish(mut self, t: f64, psi: Vec<C64>) -> Trajectory {
        if *self.times.last().unwrap() < t {
            self.times.push(t);
            self.states.push(QuantumState::from_amplitudes(psi.clone()));
        }
        Trajectory { times: self.times, states: self.states, final_state: QuantumState::from_amplitudes(psi) }
    }
}

fn check_inputs(state0: &QuantumState, params: &ModelParams, window: (f64, f64)) -> Result<()> {
    params.validate()?;
    if state0.dim() != params.dim() {
        return domain(format!("state has dimension {}, model has {}", state0.dim(), params.dim()));
    }
    if (state0.norm_sqr() - 1.0).abs() > 1e-10 {
        return domain(format!("initial state not normalized (|psi|^2 = {})", state0.norm_sqr()));
    }
    let (t0, t1) = window;
    if !(t0.is_finite() && t1.is_finite()) || t1 < t0 {
        return domain(format!("invalid propagation window ({t0}, {t1})"));
    }
    Ok(())
}

/// Splits `[t0, t1]` at the schedule's jump points.
fn segments(schedule: &PulseSchedule, window: (f64, f64)) -> Vec<(f64, f64)> {
    let (t0, t1) = window;
    let mut cuts = vec![t0];
    cuts.extend(schedule.breakpoints().into_iter().filter(|&b| b > t0 && b < t1));
    cuts.push(t1);
    cuts.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[0], w[1])).collect()
}

/// Solves `i dψ/dt = K(t) ψ` over `window` starting from `state0`.
pub fn propagate(
    state0: &QuantumState,
    schedule: &PulseSchedule,
    params: &ModelParams,
    window: (f64, f64),
    opts: &PropagationOptions,
) -> Result<Trajectory> {
    check_inputs(state0, params, window)?;
    opts.validate()?;
    let gen = Generator::new(params, opts.model)?;
    match opts.method {
        Method::PiecewiseExponential => propagate_exponential(&gen, state0, schedule, window, opts),
        Method::AdaptiveRk => propagate_dopri(&gen, state0, schedule, window, opts),
    }
}

fn propagate_exponential(
    gen: &Generator,
    state0: &QuantumState,
    schedule: &PulseSchedule,
    window: (f64, f64),
    opts: &PropagationOptions,
) -> Result<Trajectory> {
    let mut psi = state0.as_slice().to_vec();
    let mut rec = Recorder::new(opts.record_stride, window.0, &psi);
    for (a, b) in segments(schedule, window) {
        let steps = ((b - a) / opts.dt - 1e-9).ceil().max(1.0) as usize;
        let h = (b - a) / steps as f64;
        for k in 0..steps {
            let tm = a + (k as f64 + 0.5) * h;
            let (g1, g2) = schedule.values(tm);
            gen.step(&mut psi, g1, g2, h).map_err(|e| Error::Integration {
                time: tm,
                reason: e.to_string(),
            })?;
            let t = if k + 1 == steps { b } else { a + (k + 1) as f64 * h };
            rec.step(t, &psi);
        }
    }
    Ok(rec.finish(window.1, psi))
}

// Dormand–Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// 5th-order weights are the last row of DP_A; these are the 4th-order ones.
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn propagate_dopri(
    gen: &Generator,
    state0: &QuantumState,
    schedule: &PulseSchedule,
    window: (f64, f64),
    opts: &PropagationOptions,
) -> Result<Trajectory> {
    let n = gen.dim();
    let mut psi = state0.as_slice().to_vec();
    let mut rec = Recorder::new(opts.record_stride, window.0, &psi);
    let mut k: Vec<Vec<C64>> = vec![vec![ZERO; n]; 7];
    let mut stage = vec![ZERO; n];
    let mut next = vec![ZERO; n];
    let rhs = |t: f64, x: &[C64], y: &mut [C64]| {
        let (g1, g2) = schedule.values(t);
        gen.apply(g1, g2, -I, false, x, y);
    };
    let mut h = opts.dt;
    for (a, b) in segments(schedule, window) {
        let mut t = a;
        let h_min = 1e-12 * (b - a).max(1.0);
        let mut fsal = false;
        while t < b {
            if b - t < h {
                h = b - t;
            }
            if !fsal {
                rhs(t, &psi, &mut k[0]);
            }
            for s in 1..7 {
                for i in 0..n {
                    let mut acc = psi[i];
                    for j in 0..s {
                        acc += k[j][i] * (h * DP_A[s][j]);
                    }
                    stage[i] = acc;
                }
                rhs(t + DP_C[s] * h, &stage, &mut k[s]);
            }
            // stage now holds the 5th-order solution (row 6 of DP_A)
            let mut err = 0.0f64;
            for i in 0..n {
                let mut e = ZERO;
                for j in 0..7 {
                    let b5 = if j < 6 { DP_A[6][j] } else { 0.0 };
                    e += k[j][i] * (h * (b5 - DP_B4[j]));
                }
                let scale = opts.abs_tol + opts.rel_tol * psi[i].norm().max(stage[i].norm());
                err = err.max(e.norm() / scale);
            }
            if !err.is_finite() {
                return Err(Error::Integration { time: t, reason: "non-finite error estimate".into() });
            }
            if err <= 1.0 {
                t = if b - t <= h { b } else { t + h };
                next.copy_from_slice(&stage);
                std::mem::swap(&mut psi, &mut next);
                k.swap(0, 6);
                fsal = true;
                rec.step(t, &psi);
            } else {
                fsal = false;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
            if h < h_min && t < b {
                return Err(Error::Integration {
                    time: t,
                    reason: format!("step size {h:e} fell below {h_min:e} (error ratio {err:e})"),
                });
            }
        }
    }
    Ok(rec.finish(window.1, psi))
}

/// Applies `U_k = exp(-i K(g1_k, g2_k) dt)` bin by bin. Returns the trajectory
/// sampled at bin edges together with the dense `U_k`.
pub fn propagate_piecewise(
    state0: &QuantumState,
    sched: &PiecewiseConstantSchedule,
    params: &ModelParams,
    opts: &PropagationOptions,
) -> Result<(Trajectory, Vec<Operator>)> {
    check_inputs(state0, params, (sched.t_start(), sched.t_end()))?;
    let gen = Generator::new(params, opts.model)?;
    let mut psi = state0.clone();
    let mut times = vec![sched.t_start()];
    let mut states = vec![psi.clone()];
    let mut props = Vec::with_capacity(sched.bins());
    for (k, t) in sched.edges().into_iter().skip(1).enumerate() {
        let (g1, g2) = sched.bin(k);
        let u = expm_scaled(gen.dense(g1, g2).matrix(), -I * sched.dt())?;
        let u = Operator::from_matrix(u);
        psi = u.apply(&psi);
        times.push(t);
        states.push(psi.clone());
        props.push(u);
    }
    Ok((Trajectory { times, states, final_state: psi }, props))
}
