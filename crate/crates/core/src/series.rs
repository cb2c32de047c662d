//! Power series in the embedding parameter alpha.
//!
//! Besides plain Cauchy products, two companion recurrences are needed by
//! the injected-voltage and equivalent-reactance control modes: the
//! reciprocal series F = 1/I and the magnitude series |I| whose Cauchy square
//! equals I(alpha) times the coefficient-conjugated series of I.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Threshold below which a leading coefficient is treated as zero.
pub const EPS_ZERO: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexSeries {
    coeffs: Vec<Complex64>,
}

impl ComplexSeries {
    pub fn new(c0: Complex64) -> Self {
        Self { coeffs: vec![c0] }
    }

    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Self {
        assert!(!coeffs.is_empty(), "a series always has its constant term");
        Self { coeffs }
    }

    pub fn push(&mut self, c: Complex64) {
        self.coeffs.push(c);
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Highest order present.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn conj_coeffs(&self) -> ComplexSeries {
        ComplexSeries {
            coeffs: self.coeffs.iter().map(|c| c.conj()).collect(),
        }
    }
}

impl std::ops::Index<usize> for ComplexSeries {
    type Output = Complex64;
    fn index(&self, d: usize) -> &Complex64 {
        &self.coeffs[d]
    }
}

/// Coefficients of 1/I(alpha).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReciprocalSeries {
    pub coeffs: Vec<Complex64>,
}

impl ReciprocalSeries {
    pub fn start(source: &ComplexSeries) -> Result<Self> {
        let i0 = source[0];
        if i0.norm() <= EPS_ZERO {
            return Err(Error::SingularReciprocal(i0.norm()));
        }
        Ok(Self {
            coeffs: vec![i0.inv()],
        })
    }

    /// Appends the next coefficient; `source` must already hold it.
    pub fn advance(&mut self, source: &ComplexSeries) -> Result<()> {
        let n = self.coeffs.len();
        let next = reciprocal_coefficient(self, source, n)?;
        self.coeffs.push(next);
        Ok(())
    }
}

/// Real coefficients of |I(alpha)|.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MagnitudeSeries {
    pub coeffs: Vec<f64>,
}

impl MagnitudeSeries {
    pub fn start(source: &ComplexSeries) -> Result<Self> {
        let m0 = source[0].norm();
        if m0 <= EPS_ZERO {
            return Err(Error::SingularMagnitude(m0));
        }
        Ok(Self { coeffs: vec![m0] })
    }

    pub fn advance(&mut self, source: &ComplexSeries) -> Result<()> {
        let n = self.coeffs.len();
        let next = magnitude_coefficient(self, source, n)?;
        self.coeffs.push(next);
        Ok(())
    }
}

fn need(len: usize, order: usize) -> Result<()> {
    if len <= order {
        Err(Error::Order {
            needed: order,
            available: len,
        })
    } else {
        Ok(())
    }
}

/// Order-n coefficient of the Cauchy product a*b.
pub fn convolve(a: &ComplexSeries, b: &ComplexSeries, n: usize) -> Result<Complex64> {
    need(a.len(), n)?;
    need(b.len(), n)?;
    Ok((0..=n).map(|d| a[d] * b[n - d]).sum())
}

/// F[n] such that the order-n coefficient of F*I vanishes.
pub fn reciprocal_coefficient(f: &ReciprocalSeries, i: &ComplexSeries, n: usize) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::Order { needed: 1, available: 0 });
    }
    need(f.coeffs.len(), n - 1)?;
    need(i.len(), n)?;
    let i0 = i[0];
    if i0.norm() <= EPS_ZERO {
        return Err(Error::SingularReciprocal(i0.norm()));
    }
    let acc: Complex64 = (0..n).map(|d| f.coeffs[d] * i[n - d]).sum();
    Ok(-acc / i0)
}

/// |I|[n] from the Cauchy-square identity |I|*|I| = I * conj-coeff(I).
pub fn magnitude_coefficient(m: &MagnitudeSeries, i: &ComplexSeries, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Order { needed: 1, available: 0 });
    }
    need(m.coeffs.len(), n - 1)?;
    need(i.len(), n)?;
    let m0 = i[0].norm();
    if m0 <= EPS_ZERO {
        return Err(Error::SingularMagnitude(m0));
    }
    let cross: f64 = (0..=n).map(|d| (i[d] * i[n - d].conj()).re).sum();
    let square: f64 = (1..n).map(|d| m.coeffs[d] * m.coeffs[n - d]).sum();
    Ok((cross - square) / (2.0 * m0))
}

pub fn partial_sum(coeffs: &[Complex64]) -> Complex64 {
    coeffs.iter().sum()
}

/// Diagonal [L/L] Padé approximant evaluated at alpha = 1, built from the
/// first 2L+1 coefficients. L starts at its largest value and drops while the
/// denominator system is rank deficient (as it is for rational functions of
/// lower degree). Returns `None` if no order works.
pub fn pade_at_one(coeffs: &[Complex64]) -> Option<Complex64> {
    if coeffs.len() < 3 {
        return None;
    }
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Some(Complex64::new(0.0, 0.0));
    }
    (1..=(coeffs.len() - 1) / 2).rev().find_map(|l| pade_order(coeffs, l, scale))
}

fn pade_order(coeffs: &[Complex64], l: usize, scale: f64) -> Option<Complex64> {
    let mut a = DMatrix::<Complex64>::zeros(l, l);
    let mut rhs = DVector::<Complex64>::zeros(l);
    for j in 1..=l {
        for k in 1..=l {
            a[(j - 1, k - 1)] = coeffs[l + j - k];
        }
        rhs[j - 1] = -coeffs[l + j];
    }
    let lu = a.lu();
    let u = lu.u();
    if (0..l).any(|p| u[(p, p)].norm() <= 1e-12 * scale) {
        return None;
    }
    let b = lu.solve(&rhs)?;
    if b.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return None;
    }
    let mut num = Complex64::new(0.0, 0.0);
    for i in 0..=l {
        let mut a_i = coeffs[i];
        for k in 1..=i {
            a_i += b[k - 1] * coeffs[i - k];
        }
        num += a_i;
    }
    let den = Complex64::new(1.0, 0.0) + b.iter().sum::<Complex64>();
    if den.norm() < 1e-14 {
        return None;
    }
    Some(num / den)
}

/// Value of the series at alpha = 1: the partial sum, or the diagonal Padé
/// approximant when `pade` is set and well defined.
pub fn evaluate_at_one(s: &ComplexSeries, pade: bool) -> Complex64 {
    if pade {
        if let Some(v) = pade_at_one(s.coeffs()) {
            return v;
        }
    }
    partial_sum(s.coeffs())
}
