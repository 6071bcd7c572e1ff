//! Dense and sparse complex kernels used by the propagators.
//!
//! Dense matrices are small here (a few dozen rows), so `nalgebra` storage is
//! used for operators and the Padé exponential. The hot propagation loops only
//! ever need matrix-vector products, which go through [`CsrMatrix`].

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Compressed sparse row complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    /// Keeps every entry whose modulus is strictly positive.
    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "CsrMatrix requires a square matrix");
        let dim = m.nrows();
        let mut indptr = Vec::with_capacity(dim + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..dim {
            for j in 0..dim {
                let v = m[(i, j)];
                if v.norm_sqr() > 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self { dim, indptr, indices, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `y += coeff * A x`
    #[inline]
    pub fn mul_add(&self, coeff: C64, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *yi += coeff * acc;
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut dense = DMatrix::from_element(self.dim, self.dim, ZERO);
        for i in 0..self.dim {
            for k in self.indptr[i]..self.indptr[i + 1] {
                dense[(self.indices[k], i)] = self.values[k].conj();
            }
        }
        Self::from_dense(&dense)
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        let mut cols = vec![0.0; self.dim];
        for (j, v) in self.indices.iter().zip(&self.values) {
            cols[*j] += v.norm();
        }
        cols.into_iter().fold(0.0, f64::max)
    }
}

/// Maximum absolute column sum of a dense matrix.
pub fn norm1(m: &DMatrix<C64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest entry modulus.
pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Backward-error thresholds on ||A||_1 for each Padé degree (Higham 2005).
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

/// `exp(scale * a)` by Padé scaling and squaring.
pub fn expm_scaled(a: &DMatrix<C64>, scale: C64) -> Result<DMatrix<C64>> {
    if !scale.re.is_finite() || !scale.im.is_finite() {
        return Err(Error::Domain("non-finite exponential scale".into()));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Domain("non-finite entry in exponential argument".into()));
    }
    if a.nrows() != a.ncols() {
        return Err(Error::Domain(format!(
            "exponential of non-square {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let a = a * scale;
    let n = a.nrows();
    let eye = DMatrix::<C64>::identity(n, n);
    let norm = norm1(&a);

    for (deg, theta) in THETA {
        if norm <= theta {
            let coeffs: &[f64] = match deg {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            return pade_low(&a, &eye, coeffs);
        }
    }

    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = &a * C64::from(2f64.powi(-squarings));
    let b = &PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let c = |x: f64| C64::from(x);
    let inner_u = &a6 * (&a6 * c(b[13]) + &a4 * c(b[11]) + &a2 * c(b[9]))
        + &a6 * c(b[7])
        + &a4 * c(b[5])
        + &a2 * c(b[3])
        + &eye * c(b[1]);
    let u = &a * inner_u;
    let v = &a6 * (&a6 * c(b[12]) + &a4 * c(b[10]) + &a2 * c(b[8]))
        + &a6 * c(b[6])
        + &a4 * c(b[4])
        + &a2 * c(b[2])
        + &eye * c(b[0]);
    let mut r = pade_solve(&u, &v)?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(r)
}

fn pade_low(a: &DMatrix<C64>, eye: &DMatrix<C64>, b: &[f64]) -> Result<DMatrix<C64>> {
    let a2 = a * a;
    let mut power = eye.clone();
    let mut u = DMatrix::from_element(a.nrows(), a.ncols(), ZERO);
    let mut v = DMatrix::from_element(a.nrows(), a.ncols(), ZERO);
    for j in (0..b.len()).step_by(2) {
        v += &power * C64::from(b[j]);
        u += &power * C64::from(b[j + 1]);
        power = &power * &a2;
    }
    let u = a * u;
    pade_solve(&u, &v)
}

fn pade_solve(u: &DMatrix<C64>, v: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let q = v - u;
    let p = v + u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| Error::Numeric("singular Padé denominator".into()))
}

/// In-place `v <- exp(A) v` where `apply(x, y)` writes `y = A x`.
///
/// Truncated Taylor series with `ceil(norm_bound)` substeps, each series
/// stopped once two consecutive terms fall below unit roundoff relative to the
/// partial sum. `norm_bound` must bound `||A||` in some consistent norm.
pub fn expmv<F>(apply: F, norm_bound: f64, v: &mut [C64]) -> Result<()>
where
    F: Fn(&[C64], &mut [C64]),
{
    if !norm_bound.is_finite() {
        return Err(Error::Numeric("non-finite operator norm in expmv".into()));
    }
    let substeps = norm_bound.ceil().max(1.0) as usize;
    let inv = 1.0 / substeps as f64;
    let n = v.len();
    let mut term = vec![ZERO; n];
    let mut next = vec![ZERO; n];
    for _ in 0..substeps {
        term.copy_from_slice(v);
        let mut prev_size = f64::INFINITY;
        for k in 1..=60 {
            apply(&term, &mut next);
            let c = inv / k as f64;
            let mut size = 0.0f64;
            let mut acc = 0.0f64;
            for ((t, nx), vi) in term.iter_mut().zip(&next).zip(v.iter_mut()) {
                *t = nx * c;
                *vi += *t;
                size = size.max(t.norm());
                acc = acc.max(vi.norm());
            }
            if size + prev_size <= f64::EPSILON * 0.5 * acc || size == 0.0 {
                break;
            }
            prev_size = size;
        }
    }
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("non-finite state after exponential action".into()));
    }
    Ok(())
}
