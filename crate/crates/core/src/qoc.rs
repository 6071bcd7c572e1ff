//! Optimization of piecewise-constant couplings.
//!
//! The objective is the transfer efficiency after the bin propagators
//! `U_k = exp(-i K_k dt)` act on the initial state. Gradients are exact: the
//! derivative of each `U_k` along a coupling operator is read off the
//! exponential of a block-triangular augmented generator, which stays valid
//! for the non-Hermitian `K_k`. Ascent uses a projected limited-memory
//! quasi-Newton step with backtracking, so every iterate respects the bounds.

use std::collections::VecDeque;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::Generator;
use crate::error::{domain, Error, Result};
use crate::linalg::{expmv, ZERO};
use crate::model::{Model, ModelParams, QuantumState};
use crate::pulses::{Control, GaussianPair, PiecewiseConstantSchedule};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Initial guess for the first start. Later restarts are always random.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitStrategy {
    /// Counterintuitive Gaussian pair squeezed into the control window and
    /// sampled at bin midpoints; peak equals the upper bound.
    GaussianSampled { tau_ratio: f64 },
    Constant { g1: f64, g2: f64 },
    Random,
}

impl Default for InitStrategy {
    fn default() -> Self {
        InitStrategy::GaussianSampled { tau_ratio: crate::pulses::DEFAULT_TAU_RATIO }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationConfig {
    pub bins: usize,
    pub duration: f64,
    pub t_start: f64,
    pub bounds: (f64, f64),
    pub max_iters: usize,
    /// Stop when the projected gradient's largest entry drops below this.
    pub gradient_tol: f64,
    /// Stop when one iteration improves the efficiency by less than this.
    pub objective_tol: f64,
    pub seed: u64,
    pub init: InitStrategy,
    /// Total number of starts (at least one).
    pub restarts: usize,
    pub model: Model,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        Self {
            bins: 20,
            duration: 25.0,
            t_start: 0.0,
            bounds: (0.0, 0.3),
            max_iters: 500,
            gradient_tol: 1e-8,
            objective_tol: 1e-12,
            seed: 0,
            init: InitStrategy::default(),
            restarts: 1,
            model: Model::Rabi,
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 {
            return domain("need at least one bin");
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return domain(format!("duration must be positive, got {}", self.duration));
        }
        if !self.bounds.0.is_finite() || !self.bounds.1.is_finite() || self.bounds.0 > self.bounds.1 {
            return domain(format!("bounds [{}, {}] not ordered", self.bounds.0, self.bounds.1));
        }
        if self.restarts == 0 {
            return domain("need at least one start");
        }
        Ok(())
    }

    fn template(&self) -> Result<PiecewiseConstantSchedule> {
        PiecewiseConstantSchedule::constant(self.t_start, self.duration, self.bins, 0.0, 0.0, self.bounds)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub fidelity: f64,
    /// Largest entry of the projected gradient.
    pub gradient_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best_schedule: PiecewiseConstantSchedule,
    pub best_fidelity: f64,
    pub iteration_history: Vec<IterationRecord>,
    pub converged: bool,
    /// Which start produced the best schedule.
    pub best_start: usize,
    /// Final efficiency of every start, in start order.
    pub start_fidelities: Vec<f64>,
}

/// Initial/target pair together with the generator used for every evaluation.
#[derive(Clone, Debug)]
pub struct TransferProblem {
    gen: Generator,
    initial: Vec<C64>,
    target: Vec<C64>,
}

impl TransferProblem {
    pub fn new(params: &ModelParams, model: Model, initial: &QuantumState, target: &QuantumState) -> Result<Self> {
        let gen = Generator::new(params, model)?;
        if initial.dim() != gen.dim() || target.dim() != gen.dim() {
            return domain("state dimension does not match the model");
        }
        Ok(Self { gen, initial: initial.as_slice().to_vec(), target: target.as_slice().to_vec() })
    }

    fn overlap(&self, psi: &[C64]) -> C64 {
        self.target.iter().zip(psi).map(|(t, p)| t.conj() * p).sum()
    }

    /// Final state after all bins.
    pub fn evolve(&self, sched: &PiecewiseConstantSchedule) -> Result<Vec<C64>> {
        let mut psi = self.initial.clone();
        for k in 0..sched.bins() {
            let (g1, g2) = sched.bin(k);
            self.gen.step(&mut psi, g1, g2, sched.dt())?;
        }
        Ok(psi)
    }

    pub fn fidelity(&self, sched: &PiecewiseConstantSchedule) -> Result<f64> {
        let f = self.overlap(&self.evolve(sched)?).norm_sqr();
        if !f.is_finite() {
            return Err(Error::Numeric("non-finite efficiency".into()));
        }
        Ok(f)
    }

    /// Efficiency and its gradient, ordered `[dF/dg1_0.., dF/dg2_0..]`.
    pub fn fidelity_and_gradient(&self, sched: &PiecewiseConstantSchedule) -> Result<(f64, Vec<f64>)> {
        let m = sched.bins();
        let dt = sched.dt();
        let n = self.gen.dim();

        let mut forward = Vec::with_capacity(m + 1);
        forward.push(self.initial.clone());
        for k in 0..m {
            let mut psi = forward[k].clone();
            let (g1, g2) = sched.bin(k);
            self.gen.step(&mut psi, g1, g2, dt)?;
            forward.push(psi);
        }
        let c = self.overlap(&forward[m]);

        let mut grad = vec![0.0; 2 * m];
        let mut chi = self.target.clone();
        let x1 = self.gen.coupling(Control::G1);
        let x2 = self.gen.coupling(Control::G2);
        let e_norm = (self.gen.coupling_norm(Control::G1) + self.gen.coupling_norm(Control::G2)) * dt;
        let coeff = -I * dt;
        let shift_phase = C64::new(0.0, -self.gen.shift() * dt).exp();
        for k in (0..m).rev() {
            let (g1, g2) = sched.bin(k);
            // exp of [[A, 0, E1], [0, A, E2], [0, 0, A]] acting on [0; 0; phi]:
            // the top blocks become the directional derivatives of exp(A) phi.
            let mut aug = vec![ZERO; 3 * n];
            aug[2 * n..].copy_from_slice(&forward[k]);
            let norm = self.gen.norm_bound(g1, g2) * dt + e_norm;
            expmv(
                |x, y| {
                    let (y1, rest) = y.split_at_mut(n);
                    let (y2, y3) = rest.split_at_mut(n);
                    let (xa, rest) = x.split_at(n);
                    let (xb, xc) = rest.split_at(n);
                    self.gen.apply_shifted(g1, g2, coeff, false, xa, y1);
                    x1.mul_add(coeff, xc, y1);
                    self.gen.apply_shifted(g1, g2, coeff, false, xb, y2);
                    x2.mul_add(coeff, xc, y2);
                    self.gen.apply_shifted(g1, g2, coeff, false, xc, y3);
                },
                norm,
                &mut aug,
            )?;
            let d1: C64 = chi.iter().zip(&aug[..n]).map(|(a, b)| a.conj() * b).sum::<C64>() * shift_phase;
            let d2: C64 = chi.iter().zip(&aug[n..2 * n]).map(|(a, b)| a.conj() * b).sum::<C64>() * shift_phase;
            grad[k] = 2.0 * (c.conj() * d1).re;
            grad[m + k] = 2.0 * (c.conj() * d2).re;
            self.gen.step_adjoint(&mut chi, g1, g2, dt)?;
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("non-finite gradient entry".into()));
        }
        Ok((c.norm_sqr(), grad))
    }
}

/// Efficiency `|<target| U_M ... U_1 |initial>|^2` of a step schedule.
pub fn objective(
    sched: &PiecewiseConstantSchedule,
    params: &ModelParams,
    model: Model,
    initial: &QuantumState,
    target: &QuantumState,
) -> Result<f64> {
    TransferProblem::new(params, model, initial, target)?.fidelity(sched)
}

/// Exact gradient of [`objective`] with respect to the `2M` bin values.
pub fn gradient(
    sched: &PiecewiseConstantSchedule,
    params: &ModelParams,
    model: Model,
    initial: &QuantumState,
    target: &QuantumState,
) -> Result<Vec<f64>> {
    Ok(TransferProblem::new(params, model, initial, target)?.fidelity_and_gradient(sched)?.1)
}

/// Central finite-difference gradient of the efficiency with step `h`.
pub fn finite_difference_gradient(
    problem: &TransferProblem,
    sched: &PiecewiseConstantSchedule,
    h: f64,
) -> Result<Vec<f64>> {
    let x = sched.to_vector();
    (0..x.len())
        .into_par_iter()
        .map(|i| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fp = problem.fidelity(&sched.with_vector(&xp)?)?;
            let fm = problem.fidelity(&sched.with_vector(&xm)?)?;
            Ok((fp - fm) / (2.0 * h))
        })
        .collect()
}

/// `||a - b||_2 / ||b||_2`, or the absolute error when `b` vanishes.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub seed: u64,
    pub bins: usize,
    pub n_max: usize,
    pub relative_error: f64,
    pub fidelity: f64,
}

/// Compares the exact gradient with central differences (`h = 1e-6`) on a
/// random schedule drawn from `seed`.
#[allow(clippy::too_many_arguments)]
pub fn gradient_check(
    params: &ModelParams,
    model: Model,
    initial: &QuantumState,
    target: &QuantumState,
    bins: usize,
    duration: f64,
    bounds: (f64, f64),
    seed: u64,
) -> Result<GradCheckReport> {
    let problem = TransferProblem::new(params, model, initial, target)?;
    let template = PiecewiseConstantSchedule::constant(0.0, duration, bins, 0.0, 0.0, bounds)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sched = random_schedule(&template, &mut rng)?;
    let (fidelity, exact) = problem.fidelity_and_gradient(&sched)?;
    let fd = finite_difference_gradient(&problem, &sched, 1e-6)?;
    Ok(GradCheckReport { seed, bins, n_max: params.n_max, relative_error: relative_error(&exact, &fd), fidelity })
}

fn random_schedule(template: &PiecewiseConstantSchedule, rng: &mut ChaCha8Rng) -> Result<PiecewiseConstantSchedule> {
    let (lo, hi) = template.bounds();
    let x: Vec<f64> = (0..2 * template.bins())
        .map(|_| if hi > lo { rng.random_range(lo..=hi) } else { lo })
        .collect();
    template.with_vector(&x)
}

fn initial_schedule(cfg: &OptimizationConfig, start: usize) -> Result<PiecewiseConstantSchedule> {
    let template = cfg.template()?;
    if start > 0 || cfg.init == InitStrategy::Random {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(start as u64));
        return random_schedule(&template, &mut rng);
    }
    let sched = match &cfg.init {
        InitStrategy::Constant { g1, g2 } => {
            PiecewiseConstantSchedule::constant(cfg.t_start, cfg.duration, cfg.bins, *g1, *g2, cfg.bounds)?
        }
        InitStrategy::GaussianSampled { tau_ratio } => {
            // 1/e envelope 2 (tau + w) spans the window
            let width = cfg.duration / (2.0 * (1.0 + tau_ratio));
            let peak = if cfg.bounds.1 > 0.0 { cfg.bounds.1 } else { 1.0 };
            let pair = GaussianPair::with_ratio(peak, width, *tau_ratio)?;
            let shifted = PiecewiseConstantSchedule::sample(&pair, -0.5 * cfg.duration, cfg.duration, cfg.bins, cfg.bounds)?;
            template.with_vector(&shifted.to_vector())?
        }
        InitStrategy::Random => unreachable!(),
    };
    Ok(sched.clamp())
}

struct StartOutcome {
    schedule: PiecewiseConstantSchedule,
    fidelity: f64,
    history: Vec<IterationRecord>,
    converged: bool,
}

const MEMORY: usize = 10;
const ARMIJO: f64 = 1e-4;

fn project(x: &mut [f64], (lo, hi): (f64, f64)) {
    x.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
}

fn projected_gradient(x: &[f64], g: &[f64], (lo, hi): (f64, f64)) -> f64 {
    x.iter()
        .zip(g)
        .map(|(xi, gi)| ((xi + gi).clamp(lo, hi) - xi).abs())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// L-BFGS two-loop recursion: approximates (-Hessian)^-1 q.
fn two_loop(q: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>)>) -> Vec<f64> {
    let mut d = q.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y) in memory.iter().rev() {
        let rho = 1.0 / dot(y, s);
        let a = rho * dot(s, &d);
        d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
        alphas.push((a, rho));
    }
    if let Some((s, y)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        d.iter_mut().for_each(|di| *di *= gamma);
    }
    for ((s, y), (a, rho)) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &d);
        d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
    }
    d
}

fn ascend(problem: &TransferProblem, cfg: &OptimizationConfig, start: PiecewiseConstantSchedule) -> Result<StartOutcome> {
    let bounds = cfg.bounds;
    let span = (bounds.1 - bounds.0).max(f64::EPSILON);
    let mut x = start.to_vector();
    project(&mut x, bounds);
    let mut sched = start.with_vector(&x)?;
    let (mut f, mut g) = problem.fidelity_and_gradient(&sched)?;
    let mut history = vec![IterationRecord { iter: 0, fidelity: f, gradient_norm: projected_gradient(&x, &g, bounds) }];
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::new();
    let mut converged = false;

    for iter in 1..=cfg.max_iters {
        if history.last().unwrap().gradient_norm < cfg.gradient_tol {
            converged = true;
            break;
        }
        let tol = 1e-12 * span;
        let free: Vec<bool> = x
            .iter()
            .zip(&g)
            .map(|(xi, gi)| !((*xi <= bounds.0 + tol && *gi < 0.0) || (*xi >= bounds.1 - tol && *gi > 0.0)))
            .collect();
        let g_free: Vec<f64> = g.iter().zip(&free).map(|(gi, fr)| if *fr { *gi } else { 0.0 }).collect();

        let mut accepted = None;
        for use_memory in [true, false] {
            let mut d = if use_memory && !memory.is_empty() {
                let mut d = two_loop(&g_free, &memory);
                d.iter_mut().zip(&free).for_each(|(di, fr)| if !fr { *di = 0.0 });
                d
            } else {
                g_free.clone()
            };
            if dot(&d, &g_free) <= 0.0 {
                d = g_free.clone();
            }
            let dmax = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if dmax == 0.0 {
                break;
            }
            let mut alpha = if use_memory && !memory.is_empty() { 1.0 } else { 0.1 * span / dmax };
            for _ in 0..50 {
                let mut xn: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
                project(&mut xn, bounds);
                let step: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
                let gain = dot(&g, &step);
                if gain <= 0.0 {
                    alpha *= 0.5;
                    continue;
                }
                let trial = start.with_vector(&xn)?;
                let fn_ = problem.fidelity(&trial)?;
                if fn_ > f && fn_ >= f + ARMIJO * gain {
                    accepted = Some((xn, trial));
                    break;
                }
                alpha *= 0.5;
            }
            if accepted.is_some() || memory.is_empty() {
                break;
            }
            memory.clear();
        }

        let Some((xn, trial)) = accepted else {
            // no ascent direction left within machine precision
            converged = true;
            break;
        };
        let (fn_, gn) = problem.fidelity_and_gradient(&trial)?;
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g.iter().zip(&gn).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            memory.push_back((s, y));
            if memory.len() > MEMORY {
                memory.pop_front();
            }
        }
        let improvement = fn_ - f;
        x = xn;
        sched = trial;
        f = fn_;
        g = gn;
        history.push(IterationRecord { iter, fidelity: f, gradient_norm: projected_gradient(&x, &g, bounds) });
        if improvement < cfg.objective_tol {
            converged = true;
            break;
        }
    }
    if !converged && history.last().unwrap().gradient_norm < cfg.gradient_tol {
        converged = true;
    }
    Ok(StartOutcome { schedule: sched, fidelity: f, history, converged })
}

/// Maximizes the transfer efficiency over bounded step schedules.
pub fn optimize(
    cfg: &OptimizationConfig,
    params: &ModelParams,
    initial: &QuantumState,
    target: &QuantumState,
) -> Result<OptimizationResult> {
    cfg.validate()?;
    let problem = TransferProblem::new(params, cfg.model, initial, target)?;
    let outcomes: Vec<StartOutcome> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| ascend(&problem, cfg, initial_schedule(cfg, r)?))
        .collect::<Result<_>>()?;
    let start_fidelities: Vec<f64> = outcomes.iter().map(|o| o.fidelity).collect();
    let (best_start, best) = outcomes
        .into_iter()
        .enumerate()
        .fold(None::<(usize, StartOutcome)>, |acc, (i, o)| match acc {
            Some((j, b)) if b.fidelity >= o.fidelity => Some((j, b)),
            _ => Some((i, o)),
        })
        .expect("at least one start");
    let best_fidelity = problem.fidelity(&best.schedule)?;
    Ok(OptimizationResult {
        best_schedule: best.schedule,
        best_fidelity,
        iteration_history: best.history,
        converged: best.converged,
        best_start,
        start_fidelities,
    })
}
