//! Dense complex operators and Hermitian functional calculus.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Square complex matrix with advisory structure flags.
///
/// The flags are hints set by constructors that know the structure
/// (Gaussian operators, powers of positive matrices, channel outputs).
/// They are never trusted for correctness; `validate_flags` rechecks them.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    entries: DMatrix<C64>,
    hermitian: bool,
    positive: bool,
}

impl Operator {
    pub fn new(entries: DMatrix<C64>) -> Self {
        assert_eq!(entries.nrows(), entries.ncols(), "operator must be square");
        Self { entries, hermitian: false, positive: false }
    }

    pub fn zeros(n: usize) -> Self {
        Self { entries: DMatrix::zeros(n, n), hermitian: true, positive: true }
    }

    pub fn identity(n: usize) -> Self {
        Self { entries: DMatrix::identity(n, n), hermitian: true, positive: true }
    }

    pub fn from_real(m: &DMatrix<f64>) -> Self {
        Self::new(m.map(|v| C64::new(v, 0.0)))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = DMatrix::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        let positive = d.iter().all(|&v| v >= 0.0);
        Self { entries: m, hermitian: true, positive }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn is_flagged_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_flagged_positive(&self) -> bool {
        self.positive
    }

    pub fn with_hermitian(mut self) -> Self {
        self.hermitian = true;
        self
    }

    /// Marks the operator positive (implies Hermitian).
    pub fn with_positive(mut self) -> Self {
        self.hermitian = true;
        self.positive = true;
        self
    }

    pub fn clear_flags(mut self) -> Self {
        self.hermitian = false;
        self.positive = false;
        self
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn adjoint(&self) -> Self {
        Self {
            entries: self.entries.adjoint(),
            hermitian: self.hermitian,
            positive: self.positive,
        }
    }

    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim();
        let mut d: f64 = 0.0;
        for j in 0..n {
            for i in 0..=j {
                d = d.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        d
    }

    /// (x + x*)/2, flagged Hermitian.
    pub fn symmetrized(&self) -> Self {
        let e = (&self.entries + self.entries.adjoint()).scale(0.5);
        Self { entries: e, hermitian: true, positive: self.positive }
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            entries: self.entries.scale(s),
            hermitian: self.hermitian,
            positive: self.positive && s >= 0.0,
        }
    }

    pub fn scale_c(&self, s: C64) -> Self {
        Self::new(self.entries.map(|z| z * s))
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|j| (0..n).all(|i| i == j || self.entries[(i, j)] == C64::new(0.0, 0.0)))
    }

    pub fn diagonal_real(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.entries[(i, i)].re).collect()
    }

    /// Eigendecomposition of the Hermitian part.
    pub fn eigh(&self) -> Spectrum {
        let n = self.dim();
        if self.is_diagonal() {
            return Spectrum { values: self.diagonal_real(), vectors: None, dim: n };
        }
        let h = if self.hermitian_defect() == 0.0 {
            self.entries.clone()
        } else {
            (&self.entries + self.entries.adjoint()).scale(0.5)
        };
        let eig = SymmetricEigen::new(h);
        Spectrum {
            values: eig.eigenvalues.iter().copied().collect(),
            vectors: Some(eig.eigenvectors),
            dim: n,
        }
    }

    pub fn min_eig(&self) -> f64 {
        self.eigh().values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        if self.hermitian_defect() <= 1e-14 * self.max_abs().max(f64::MIN_POSITIVE) {
            return self.eigh().values.iter().fold(0.0, |m, v| m.max(v.abs()));
        }
        let g = Operator::new(self.entries.adjoint() * &self.entries);
        g.eigh().values.iter().fold(0.0_f64, |m, v| m.max(*v)).max(0.0).sqrt()
    }

    /// Checks the advisory flags against the entries.
    pub fn validate_flags(&self) -> Result<()> {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        if self.hermitian && self.hermitian_defect() > 1e-12 * scale {
            return Err(Error::InvalidConfig(format!(
                "hermitian flag set but defect is {:.3e}",
                self.hermitian_defect()
            )));
        }
        if self.positive {
            let norm = self.spectral_norm();
            let m = self.min_eig();
            if m < -1e-10 * norm {
                return Err(Error::NotPositive { min_eig: m, norm });
            }
        }
        Ok(())
    }

    /// Top-left k×k block.
    pub fn block(&self, k: usize) -> Self {
        let k = k.min(self.dim());
        Self {
            entries: self.entries.view((0, 0), (k, k)).into_owned(),
            hermitian: self.hermitian,
            positive: self.positive,
        }
    }

    /// Zero-pads into the top-left corner of an n×n matrix.
    pub fn embed(&self, n: usize) -> Self {
        assert!(n >= self.dim());
        let mut e = DMatrix::zeros(n, n);
        e.view_mut((0, 0), (self.dim(), self.dim())).copy_from(&self.entries);
        Self { entries: e, hermitian: self.hermitian, positive: self.positive }
    }

    /// Squared Frobenius mass outside the top-left k×k block.
    pub fn mass_outside(&self, k: usize) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..n {
                if i >= k || j >= k {
                    s += self.entries[(i, j)].norm_sqr();
                }
            }
        }
        s
    }

    /// Applies a real function to the spectrum of a Hermitian operator.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Self {
        self.eigh().recompose(f)
    }

    /// a·self + b·other, preserving positivity flags for nonnegative coefficients.
    pub fn combine(&self, a: f64, other: &Operator, b: f64) -> Self {
        let e = self.entries.scale(a) + other.entries.scale(b);
        Self {
            entries: e,
            hermitian: self.hermitian && other.hermitian,
            positive: self.positive && other.positive && a >= 0.0 && b >= 0.0,
        }
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        self.combine(1.0, rhs, 1.0)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        let mut out = self.combine(1.0, rhs, -1.0);
        out.positive = false;
        out
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator::new(&self.entries * &rhs.entries)
    }
}

/// Eigenpairs of a Hermitian operator. `vectors` is `None` for diagonal input.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: Option<DMatrix<C64>>,
    dim: usize,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Column k of the eigenbasis.
    pub fn basis(&self) -> DMatrix<C64> {
        match &self.vectors {
            Some(v) => v.clone(),
            None => DMatrix::identity(self.dim, self.dim),
        }
    }

    /// V·diag(f(λ))·V*.
    pub fn recompose(&self, f: impl Fn(f64) -> f64) -> Operator {
        let fv: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        let positive = fv.iter().all(|&v| v >= 0.0);
        let entries = match &self.vectors {
            None => {
                let mut m = DMatrix::zeros(self.dim, self.dim);
                for (i, &v) in fv.iter().enumerate() {
                    m[(i, i)] = C64::new(v, 0.0);
                }
                m
            }
            Some(v) => {
                let mut scaled = v.clone();
                for (j, &s) in fv.iter().enumerate() {
                    scaled.column_mut(j).scale_mut(s);
                }
                let mut m = scaled * v.adjoint();
                // exact Hermitian symmetry
                let n = self.dim;
                for j in 0..n {
                    m[(j, j)].im = 0.0;
                    for i in 0..j {
                        let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                        m[(i, j)] = z;
                        m[(j, i)] = z.conj();
                    }
                }
                m
            }
        };
        let op = Operator::new(entries).with_hermitian();
        if positive { op.with_positive() } else { op }
    }

    pub fn reconstruction_error(&self, a: &Operator) -> f64 {
        (&self.recompose(|v| v) - a).frobenius()
    }
}

/// Max-abs deviation from the identity.
pub fn identity_defect(m: &DMatrix<C64>) -> f64 {
    let mut d: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let target = if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            d = d.max((m[(i, j)] - target).norm());
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eigh_recompose_roundtrip() {
        let m = DMatrix::from_row_slice(
            3,
            3,
            &[c(2.0, 0.0), c(0.5, 0.5), c(0.0, 0.0), c(0.5, -0.5), c(1.0, 0.0), c(0.3, 0.0), c(0.0, 0.0), c(0.3, 0.0), c(4.0, 0.0)],
        );
        let a = Operator::new(m);
        let s = a.eigh();
        assert!(s.reconstruction_error(&a) < 1e-13);
        let sq = s.recompose(|v| v.abs().sqrt());
        assert!((&(&sq * &sq) - &a).frobenius() < 1e-12);
    }

    #[test]
    fn diagonal_fast_path() {
        let a = Operator::from_diagonal(&[3.0, 1.0, 2.0]);
        let s = a.eigh();
        assert!(s.vectors.is_none());
        assert_eq!(s.values, vec![3.0, 1.0, 2.0]);
        assert_eq!(a.spectral_norm(), 3.0);
    }

    #[test]
    fn spectral_norm_of_nonnormal() {
        // [[0,2],[0,0]] has singular values 2, 0
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!((Operator::new(m).spectral_norm() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn embed_and_block() {
        let a = Operator::from_diagonal(&[1.0, 2.0]);
        let e = a.embed(4);
        assert_eq!(e.dim(), 4);
        assert_eq!(e.mass_outside(2), 0.0);
        assert_eq!(e.block(2), a);
    }

    #[test]
    fn flag_validation_catches_negative() {
        let a = Operator::from_diagonal(&[1.0, -1.0]).with_positive();
        assert!(matches!(a.validate_flags(), Err(Error::NotPositive { .. })));
    }
}
