#![allow(dead_code)]

use nalgebra::DMatrix;
use usc_transfer::Complex64 as C64;
use usc_transfer::{qoc::TransferProblem, PiecewiseConstantSchedule};

/// exp(m) by plain Taylor series with scaling and squaring; independent of the
/// library's Padé kernel.
pub fn taylor_expm(m: &DMatrix<C64>) -> DMatrix<C64> {
    let n = m.nrows();
    let norm = m.iter().map(|z| z.norm()).sum::<f64>();
    let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let a = m * C64::from(2f64.powi(-s));
    let mut result = DMatrix::<C64>::identity(n, n);
    let mut term = DMatrix::<C64>::identity(n, n);
    for k in 1..40 {
        term = &term * &a * C64::from(1.0 / k as f64);
        result += &term;
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// Central differences of the efficiency, one coordinate at a time.
pub fn central_differences(problem: &TransferProblem, sched: &PiecewiseConstantSchedule, h: f64) -> Vec<f64> {
    let x = sched.to_vector();
    (0..x.len())
        .map(|i| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fp = problem.fidelity(&sched.with_vector(&xp).unwrap()).unwrap();
            let fm = problem.fidelity(&sched.with_vector(&xm).unwrap()).unwrap();
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d / b.iter().map(|y| y * y).sum::<f64>().sqrt()
}

/// Deterministic LCG in [0, 1).
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn schedule(&mut self, bins: usize, duration: f64, hi: f64) -> PiecewiseConstantSchedule {
        let v1 = (0..bins).map(|_| hi * self.next()).collect();
        let v2 = (0..bins).map(|_| hi * self.next()).collect();
        PiecewiseConstantSchedule::new(0.0, duration / bins as f64, v1, v2, (0.0, hi)).unwrap()
    }
}
