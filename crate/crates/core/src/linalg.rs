//! Small dense complex helpers used by the model and the trajectory kernels.
//!
//! Setup-time algebra goes through `nalgebra`; the per-step kernels work on
//! row-major `Vec<Complex64>` operators so the hot loop never allocates.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn real(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

/// Largest entrywise modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    max_abs(&(a - b))
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && max_abs_diff(m, &m.adjoint()) <= tol
}

/// Column-stacking vectorization, matching nalgebra's column-major storage.
pub fn vectorize(m: &CMatrix) -> nalgebra::DVector<Complex64> {
    nalgebra::DVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &nalgebra::DVector<Complex64>, dim: usize) -> CMatrix {
    CMatrix::from_column_slice(dim, dim, v.as_slice())
}

/// Dense row-major operator for allocation-free application to state vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOp {
    dim: usize,
    data: Vec<Complex64>,
}

impl DenseOp {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let dim = m.nrows();
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for col in 0..dim {
                data.push(m[(r, col)]);
            }
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn apply_into(&self, x: &[Complex64], out: &mut [Complex64]) {
        let d = self.dim;
        for (r, o) in out.iter_mut().enumerate().take(d) {
            let row = &self.data[r * d..(r + 1) * d];
            let mut acc = Complex64::new(0.0, 0.0);
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            *o = acc;
        }
    }

    /// `⟨x|A|x⟩` real part, for Hermitian `A`.
    #[inline]
    pub fn expectation(&self, x: &[Complex64]) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for r in 0..d {
            let row = &self.data[r * d..(r + 1) * d];
            let mut ax = Complex64::new(0.0, 0.0);
            for (a, b) in row.iter().zip(x) {
                ax += a * b;
            }
            acc += (x[r].conj() * ax).re;
        }
        acc
    }
}

#[inline]
pub fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

#[inline]
pub fn scale(x: &mut [Complex64], s: f64) {
    for z in x {
        *z *= s;
    }
}

/// `⟨a|b⟩`.
#[inline]
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Matrix exponential `exp(m)`.
pub fn expm(m: &CMatrix) -> CMatrix {
    m.exp()
}

/// Neumaier-compensated sum; the result does not depend on how the caller
/// chunked the work as long as the input order is fixed.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = KahanSum::default();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_op_matches_nalgebra_product() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 2.0), c(0.5, 0.0), c(-1.0, 0.3), c(0.0, -2.0)]);
        let x = [c(0.3, 0.1), c(-0.7, 0.4)];
        let op = DenseOp::from_matrix(&m);
        let mut out = [Complex64::default(); 2];
        op.apply_into(&x, &mut out);
        let expected = &m * nalgebra::DVector::from_row_slice(&x);
        for i in 0..2 {
            assert!((out[i] - expected[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn vectorize_is_column_stacking() {
        let m = CMatrix::from_row_slice(2, 2, &[real(1.0), real(2.0), real(3.0), real(4.0)]);
        let v = vectorize(&m);
        assert_eq!(v[1], real(3.0));
        assert_eq!(unvectorize(&v, 2), m);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }
}
