//! Truncated Hilbert space of one cavity mode and two qubits, elementary
//! operators, and the Rabi / RWA Hamiltonians.
//!
//! Basis kets are `|n s2 s1>` with flat index `4 n + 2 s2 + s1` (qubit 1
//! fastest). Frequencies are measured in units of the cavity frequency.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::linalg::{max_abs, ZERO};

/// Physical constants of the cavity + two qubit system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub omega_c: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub kappa: f64,
    /// Fock cutoff: photon numbers `0..=n_max` are kept.
    pub n_max: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            omega_c: 1.0,
            eps1: 1.0,
            eps2: 1.0,
            kappa: 0.005,
            n_max: 8,
        }
    }
}

impl ModelParams {
    pub fn new(omega_c: f64, eps1: f64, eps2: f64, kappa: f64, n_max: usize) -> Result<Self> {
        let p = Self { omega_c, eps1, eps2, kappa, n_max };
        p.validate()?;
        Ok(p)
    }

    /// Qubits resonant with the cavity, `omega_c = 1`.
    pub fn resonant(kappa: f64, n_max: usize) -> Result<Self> {
        Self::new(1.0, 1.0, 1.0, kappa, n_max)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_c > 0.0 && self.omega_c.is_finite()) {
            return domain(format!("omega_c must be positive, got {}", self.omega_c));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return domain(format!("kappa must be non-negative, got {}", self.kappa));
        }
        if !(self.eps1.is_finite() && self.eps2.is_finite()) {
            return domain("qubit splittings must be finite");
        }
        if self.n_max < 1 {
            return domain("n_max must be at least 1");
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        4 * (self.n_max + 1)
    }

    pub fn with_kappa(self, kappa: f64) -> Self {
        Self { kappa, ..self }
    }

    pub fn with_n_max(self, n_max: usize) -> Self {
        Self { n_max, ..self }
    }
}

/// Which coupling term to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Full coupling `g (a + a†)(σ₋ + σ₊)`.
    #[default]
    Rabi,
    /// Rotating-wave coupling `g (a σ₊ + a† σ₋)`.
    Rwa,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Rabi => "rabi",
            Model::Rwa => "rwa",
        })
    }
}

impl std::str::FromStr for Model {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rabi" => Ok(Model::Rabi),
            "rwa" => Ok(Model::Rwa),
            other => domain(format!("unknown model '{other}' (expected rabi or rwa)")),
        }
    }
}

/// Factorized basis label `|n s2 s1>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisIndex {
    pub n: usize,
    pub s2: u8,
    pub s1: u8,
}

impl BasisIndex {
    pub fn new(n: usize, s2: u8, s1: u8, params: &ModelParams) -> Result<Self> {
        if n > params.n_max {
            return domain(format!("photon number {n} exceeds cutoff {}", params.n_max));
        }
        if s1 > 1 || s2 > 1 {
            return domain(format!("qubit levels must be 0 or 1, got s2={s2} s1={s1}"));
        }
        Ok(Self { n, s2, s1 })
    }

    pub fn flat(self) -> usize {
        4 * self.n + 2 * self.s2 as usize + self.s1 as usize
    }

    pub fn from_flat(idx: usize, params: &ModelParams) -> Result<Self> {
        if idx >= params.dim() {
            return domain(format!("flat index {idx} out of range 0..{}", params.dim()));
        }
        Ok(Self {
            n: idx / 4,
            s2: ((idx / 2) % 2) as u8,
            s1: (idx % 2) as u8,
        })
    }

    /// Photons plus excited qubits.
    pub fn excitations(self) -> usize {
        self.n + self.s1 as usize + self.s2 as usize
    }
}

fn basis_iter(params: &ModelParams) -> impl Iterator<Item = BasisIndex> {
    (0..params.dim()).map(|i| BasisIndex { n: i / 4, s2: ((i / 2) % 2) as u8, s1: (i % 2) as u8 })
}

/// State vector over the truncated factorized basis. Not necessarily
/// normalized: under lossy evolution the squared norm decays.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState(DVector<C64>);

impl QuantumState {
    pub fn zeros(dim: usize) -> Self {
        Self(DVector::from_element(dim, ZERO))
    }

    pub fn from_amplitudes(amps: Vec<C64>) -> Self {
        Self(DVector::from_vec(amps))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[C64] {
        self.0.as_slice()
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        self.0.as_mut_slice()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.norm_squared()
    }

    /// `<self|other>`
    pub fn inner(&self, other: &QuantumState) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn population(&self, idx: usize) -> f64 {
        self.0[idx].norm_sqr()
    }
}

/// Builds `|n s2 s1>`.
pub fn basis_state(n: usize, s2: u8, s1: u8, params: &ModelParams) -> Result<QuantumState> {
    let idx = BasisIndex::new(n, s2, s1, params)?.flat();
    let mut psi = QuantumState::zeros(params.dim());
    psi.0[idx] = C64::new(1.0, 0.0);
    Ok(psi)
}

fn check_normalized(alpha: C64, beta: C64) -> Result<()> {
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if norm.is_nan() || (norm - 1.0).abs() > 1e-10 {
        return domain(format!("|alpha|^2 + |beta|^2 = {norm}, expected 1"));
    }
    Ok(())
}

/// `|0>|g2>(alpha|g1> + beta|e1>)`
pub fn superposition_initial(alpha: C64, beta: C64, params: &ModelParams) -> Result<QuantumState> {
    check_normalized(alpha, beta)?;
    let mut psi = QuantumState::zeros(params.dim());
    psi.0[0] = alpha;
    psi.0[1] = beta;
    Ok(psi)
}

/// `|0>(alpha|g2> + beta|e2>)|g1>`
pub fn superposition_target(alpha: C64, beta: C64, params: &ModelParams) -> Result<QuantumState> {
    check_normalized(alpha, beta)?;
    let mut psi = QuantumState::zeros(params.dim());
    psi.0[0] = alpha;
    psi.0[2] = beta;
    Ok(psi)
}

/// Square complex matrix acting on the truncated basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator(DMatrix<C64>);

impl Operator {
    pub fn from_matrix(m: DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "operator must be square");
        Self(m)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::from_element(dim, dim, ZERO))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn apply(&self, psi: &QuantumState) -> QuantumState {
        QuantumState(&self.0 * &psi.0)
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    /// `[self, other]`
    pub fn commutator(&self, other: &Operator) -> Self {
        Self(&self.0 * &other.0 - &other.0 * &self.0)
    }

    /// Largest entry modulus of `self - self†`.
    pub fn hermiticity_defect(&self) -> f64 {
        max_abs(&(&self.0 - self.0.adjoint()))
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.0)
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// `<psi|self|psi>` without normalizing `psi`.
    pub fn expectation(&self, psi: &QuantumState) -> C64 {
        psi.0.dotc(&(&self.0 * &psi.0))
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator(&self.0 - &rhs.0)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

/// Cavity annihilation operator `a`, truncated at `n_max` photons.
pub fn annihilation(params: &ModelParams) -> Operator {
    let mut op = Operator::zeros(params.dim());
    for b in basis_iter(params).filter(|b| b.n > 0) {
        let lower = BasisIndex { n: b.n - 1, ..b };
        op.0[(lower.flat(), b.flat())] = C64::from((b.n as f64).sqrt());
    }
    op
}

pub fn creation(params: &ModelParams) -> Operator {
    annihilation(params).adjoint()
}

/// `σ₋ⁱ = |gⁱ><eⁱ|` for qubit `i` in {1, 2}.
pub fn qubit_lowering(i: usize, params: &ModelParams) -> Result<Operator> {
    let mut op = Operator::zeros(params.dim());
    for b in basis_iter(params) {
        let (excited, lowered) = match i {
            1 => (b.s1 == 1, BasisIndex { s1: 0, ..b }),
            2 => (b.s2 == 1, BasisIndex { s2: 0, ..b }),
            _ => return domain(format!("qubit id must be 1 or 2, got {i}")),
        };
        if excited {
            op.0[(lowered.flat(), b.flat())] = C64::new(1.0, 0.0);
        }
    }
    Ok(op)
}

pub fn qubit_raising(i: usize, params: &ModelParams) -> Result<Operator> {
    Ok(qubit_lowering(i, params)?.adjoint())
}

/// Diagonal part `ωc a†a + ε¹ σ₊¹σ₋¹ + ε² σ₊²σ₋²`.
pub fn bare_hamiltonian(params: &ModelParams) -> Operator {
    let diag = DVector::from_iterator(
        params.dim(),
        basis_iter(params).map(|b| {
            C64::from(params.omega_c * b.n as f64 + params.eps1 * b.s1 as f64 + params.eps2 * b.s2 as f64)
        }),
    );
    Operator(DMatrix::from_diagonal(&diag))
}

/// Coupling operator multiplying `g_i` in the chosen model.
pub fn coupling_operator(model: Model, qubit: usize, params: &ModelParams) -> Result<Operator> {
    let a = annihilation(params);
    let ad = a.adjoint();
    let sm = qubit_lowering(qubit, params)?;
    let sp = sm.adjoint();
    Ok(match model {
        Model::Rabi => &(&a + &ad) * &(&sm + &sp),
        Model::Rwa => &(&a * &sp) + &(&ad * &sm),
    })
}

/// Hamiltonian of the chosen model at fixed couplings.
pub fn build_hamiltonian(model: Model, params: &ModelParams, g1: f64, g2: f64) -> Operator {
    let h0 = bare_hamiltonian(params);
    let x1 = coupling_operator(model, 1, params).expect("qubit 1 exists");
    let x2 = coupling_operator(model, 2, params).expect("qubit 2 exists");
    &(&h0 + &x1.scale(C64::from(g1))) + &x2.scale(C64::from(g2))
}

/// Full Rabi Hamiltonian with counter-rotating terms.
pub fn build_rabi(params: &ModelParams, g1: f64, g2: f64) -> Operator {
    build_hamiltonian(Model::Rabi, params, g1, g2)
}

/// Rotating-wave Hamiltonian; conserves the excitation number.
pub fn build_rwa(params: &ModelParams, g1: f64, g2: f64) -> Operator {
    build_hamiltonian(Model::Rwa, params, g1, g2)
}

/// Photon number operator `a†a` (diagonal).
pub fn number_operator(params: &ModelParams) -> Operator {
    let diag = DVector::from_iterator(params.dim(), basis_iter(params).map(|b| C64::from(b.n as f64)));
    Operator(DMatrix::from_diagonal(&diag))
}

/// `K = H - (i/2) κ a†a`.
pub fn effective_hamiltonian(h: &Operator, params: &ModelParams) -> Operator {
    let loss = number_operator(params).scale(C64::new(0.0, -0.5 * params.kappa));
    h + &loss
}

/// `N_exc = a†a + σ₊¹σ₋¹ + σ₊²σ₋²`.
pub fn excitation_operator(params: &ModelParams) -> Operator {
    let diag = DVector::from_iterator(
        params.dim(),
        basis_iter(params).map(|b| C64::from(b.excitations() as f64)),
    );
    Operator(DMatrix::from_diagonal(&diag))
}

/// `Π = (-1)^N_exc`.
pub fn parity_operator(params: &ModelParams) -> Operator {
    let diag = DVector::from_iterator(
        params.dim(),
        basis_iter(params).map(|b| C64::from(if b.excitations() % 2 == 0 { 1.0 } else { -1.0 })),
    );
    Operator(DMatrix::from_diagonal(&diag))
}
