//! Structured nonvanishing holomorphic factors.
//!
//! Deformation multipliers range from small rational corrections to
//! exponentials of large harmonic profiles whose values span hundreds of
//! orders of magnitude. Storing the factor structurally (instead of
//! re-expanding it into one Laurent series) keeps evaluation, reciprocals,
//! and log-magnitudes well inside floating-point range.

use serde::{Deserialize, Serialize};

use crate::funspace::LaurentFunction;
use crate::C64;

/// A holomorphic factor kept in structured form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Holo {
    /// The constant 1.
    One,
    /// A finite Laurent expansion (nonvanishing on its domain of use).
    Laurent(LaurentFunction),
    /// `exp(profile)` for a finite Laurent profile.
    Exp(LaurentFunction),
    /// A pointwise product of factors.
    Product(Vec<Holo>),
}

impl Holo {
    /// Wraps a Laurent expansion, collapsing the constant 1.
    pub fn from_laurent(f: LaurentFunction) -> Self {
        if f.is_one() {
            Holo::One
        } else {
            Holo::Laurent(f)
        }
    }

    /// Product of factors with identity factors dropped.
    pub fn product_of(factors: Vec<Holo>) -> Self {
        let mut flat: Vec<Holo> = Vec::new();
        for f in factors {
            match f {
                Holo::One => {}
                Holo::Product(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => Holo::One,
            1 => flat.into_iter().next().unwrap(),
            _ => Holo::Product(flat),
        }
    }

    /// Whether this factor is structurally the constant 1.
    pub fn is_one(&self) -> bool {
        match self {
            Holo::One => true,
            Holo::Laurent(f) => f.is_one(),
            Holo::Exp(p) => p.is_zero(),
            Holo::Product(fs) => fs.iter().all(Holo::is_one),
        }
    }

    /// Value at `z`.
    pub fn eval(&self, z: C64) -> C64 {
        match self {
            Holo::One => C64::new(1.0, 0.0),
            Holo::Laurent(f) => f.eval_at(z),
            Holo::Exp(p) => p.eval_at(z).exp(),
            Holo::Product(fs) => fs.iter().fold(C64::new(1.0, 0.0), |acc, f| acc * f.eval(z)),
        }
    }

    /// Value of the reciprocal at `z`, formed without overflowing
    /// intermediate exponentials.
    pub fn eval_recip(&self, z: C64) -> C64 {
        match self {
            Holo::One => C64::new(1.0, 0.0),
            Holo::Laurent(f) => C64::new(1.0, 0.0) / f.eval_at(z),
            Holo::Exp(p) => (-p.eval_at(z)).exp(),
            Holo::Product(fs) => fs
                .iter()
                .fold(C64::new(1.0, 0.0), |acc, f| acc * f.eval_recip(z)),
        }
    }

    /// `ln |h(z)|`, stable across the factor's full dynamic range.
    pub fn log_abs(&self, z: C64) -> f64 {
        match self {
            Holo::One => 0.0,
            Holo::Laurent(f) => f.eval_at(z).norm().ln(),
            Holo::Exp(p) => p.eval_at(z).re,
            Holo::Product(fs) => fs.iter().map(|f| f.log_abs(z)).sum(),
        }
    }

    /// Smallest `ln |h|` over the given nodes.
    pub fn min_log_abs_on(&self, nodes: &[C64]) -> f64 {
        nodes
            .iter()
            .map(|&z| self.log_abs(z))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `ln |h|` over the given nodes.
    pub fn max_log_abs_on(&self, nodes: &[C64]) -> f64 {
        nodes
            .iter()
            .map(|&z| self.log_abs(z))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn identity_collapses() {
        assert!(Holo::from_laurent(LaurentFunction::one()).is_one());
        assert!(Holo::product_of(vec![Holo::One, Holo::One]).is_one());
        let f = Holo::from_laurent(LaurentFunction::monomial(1, c(1.0, 0.0)));
        assert!(!f.is_one());
        assert_eq!(Holo::product_of(vec![Holo::One, f.clone()]), f);
    }

    #[test]
    fn eval_and_recip_agree() {
        let p = LaurentFunction::from_coeffs(-1, vec![c(0.4, 0.0), c(0.0, 0.3)]);
        let h = Holo::product_of(vec![
            Holo::Exp(p),
            Holo::Laurent(LaurentFunction::from_coeffs(0, vec![c(2.0, 0.0), c(0.1, 0.0)])),
        ]);
        for &z in &[c(1.1, 0.2), c(-0.8, 0.5)] {
            let v = h.eval(z);
            assert!((v * h.eval_recip(z) - c(1.0, 0.0)).norm() < 1e-14);
            assert!((h.log_abs(z) - v.norm().ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn log_abs_survives_extreme_magnitudes() {
        // exp(400/z) at z = 0.8 is about e^500; its log-magnitude must come
        // out exactly without overflow, and the reciprocal must underflow
        // gracefully through the negated profile.
        let p = LaurentFunction::monomial(-1, c(400.0, 0.0));
        let h = Holo::Exp(p);
        let z = c(0.8, 0.0);
        assert!((h.log_abs(z) - 500.0).abs() < 1e-9);
        assert!(h.eval(z).norm().is_finite());
        assert!(h.eval_recip(z).norm() > 0.0);
        let squared = Holo::product_of(vec![h.clone(), h.clone()]);
        assert!((squared.log_abs(z) - 1000.0).abs() < 1e-9);
    }
}
