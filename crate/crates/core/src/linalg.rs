//! Dense Hermitian eigensolver and exact propagation.

pub use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Eigendecomposition `H = V diag(E) V†`, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `exp(-i H t) psi`.
    pub fn evolve(&self, psi: &DVector<C64>, t: f64) -> DVector<C64> {
        let mut coeffs = self.vectors.ad_mul(psi);
        for (c, e) in coeffs.iter_mut().zip(&self.values) {
            *c *= C64::from_polar(1.0, -e * t);
        }
        &self.vectors * coeffs
    }

    /// Coefficients of `psi` in the eigenbasis.
    pub fn coefficients(&self, psi: &DVector<C64>) -> DVector<C64> {
        self.vectors.ad_mul(psi)
    }

    /// Indices of the `count` eigenvalues closest to zero, ordered by |E|.
    pub fn closest_to_zero(&self, count: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.dim()).collect();
        idx.sort_by(|&a, &b| self.values[a].abs().total_cmp(&self.values[b].abs()));
        idx.truncate(count);
        idx
    }

    pub fn spectral_radius(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, e| m.max(e.abs()))
    }
}

/// Eigendecomposition of a Hermitian matrix. Purely real input takes the
/// cheaper real-symmetric path.
pub fn hermitian_eigen(matrix: &DMatrix<C64>) -> Result<Spectrum> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::Validation("matrix is not square".into()));
    }
    if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("non-finite matrix entry".into()));
    }
    let (values, vectors) = if matrix.iter().all(|z| z.im == 0.0) {
        let real = matrix.map(|z| z.re);
        let eig = real.symmetric_eigen();
        (eig.eigenvalues, eig.eigenvectors.map(|x| C64::new(x, 0.0)))
    } else {
        let eig = matrix.clone().symmetric_eigen();
        (eig.eigenvalues, eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted_values = order.iter().map(|&i| values[i]).collect();
    let sorted_vectors = DMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
    Ok(Spectrum {
        values: sorted_values,
        vectors: sorted_vectors,
    })
}

/// `exp(-i H t) psi` by a Chebyshev series on the Gershgorin interval of `H`,
/// summed until the Bessel weights drop below 1e-17. Returns `None` when the
/// interval is too wide for the series (`a t > 8`).
pub fn chebyshev_evolve(h: &DMatrix<C64>, psi: &DVector<C64>, t: f64) -> Option<DVector<C64>> {
    let n = h.nrows();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in 0..n {
        let radius: f64 = (0..n).filter(|&c| c != r).map(|c| h[(r, c)].norm()).sum();
        lo = lo.min(h[(r, r)].re - radius);
        hi = hi.max(h[(r, r)].re + radius);
    }
    let center = 0.5 * (hi + lo);
    let half = (0.5 * (hi - lo)).max(1e-12);
    let x = half * t.abs();
    if !x.is_finite() || x > 8.0 {
        return None;
    }
    let real = h.iter().all(|z| z.im == 0.0);
    let hr = if real { Some(h.map(|z| z.re)) } else { None };
    // scaled operator (H - center) / half
    let apply = |v: &DVector<C64>| -> DVector<C64> {
        let hv = match &hr {
            Some(m) => {
                let re = m * v.map(|z| z.re);
                let im = m * v.map(|z| z.im);
                DVector::from_fn(n, |i, _| C64::new(re[i], im[i]))
            }
            None => h * v,
        };
        (hv - v * C64::new(center, 0.0)) / C64::new(half, 0.0)
    };
    let sign = if t < 0.0 { -1.0 } else { 1.0 };
    let mut out = psi * C64::new(bessel_j(0, x), 0.0);
    let mut prev = psi.clone();
    let mut cur = apply(psi);
    let mut phase = C64::new(0.0, -sign);
    for k in 1..200 {
        let j = bessel_j(k, x);
        out += &cur * (phase * 2.0 * j);
        if k as f64 > x && j.abs() < 1e-17 {
            break;
        }
        let next = apply(&cur) * C64::new(2.0, 0.0) - &prev;
        prev = std::mem::replace(&mut cur, next);
        phase *= C64::new(0.0, -sign);
    }
    Some(out * C64::from_polar(1.0, -center * t))
}

/// Bessel function `J_k(x)` from its power series; accurate for `|x| <= 8`.
fn bessel_j(k: usize, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = (1..=k).fold(1.0, |acc, i| acc * half / i as f64);
    let mut sum = term;
    let q = half * half;
    for m in 1..100 {
        term *= -q / (m as f64 * (m + k) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Largest entry of `|H - H†|`.
pub fn hermiticity_error(matrix: &DMatrix<C64>) -> f64 {
    let n = matrix.nrows();
    let mut worst = 0.0_f64;
    for r in 0..n {
        for c in 0..n {
            worst = worst.max((matrix[(r, c)] - matrix[(c, r)].conj()).norm());
        }
    }
    worst
}
