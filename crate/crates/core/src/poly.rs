//! Multivariate polynomials with exact differentiation.
//!
//! Used for polynomial vector fields (so Jacobians and iterated brackets are
//! symbolic) and for smooth scalar test functions with exact jets.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

/// One monomial `coeff · x₁^e₁ ⋯ x_d^e_d`, as written in field files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

/// Polynomial in `dim` variables, kept in canonical form (no zero terms,
/// monomials sorted by exponent vector).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    dim: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(vec![0; dim], c);
        p
    }

    /// The coordinate function `x_i`.
    pub fn variable(dim: usize, i: usize) -> Self {
        let mut e = vec![0; dim];
        e[i] = 1;
        let mut p = Self::zero(dim);
        p.add_term(e, 1.0);
        p
    }

    pub fn monomial(exponents: Vec<u32>, coeff: f64) -> Self {
        let mut p = Self::zero(exponents.len());
        p.add_term(exponents, coeff);
        p
    }

    pub fn from_terms(dim: usize, terms: &[Term]) -> Result<Self> {
        let mut p = Self::zero(dim);
        for t in terms {
            if t.exponents.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: t.exponents.len(),
                });
            }
            if !t.coeff.is_finite() {
                return Err(Error::Parse(format!("non-finite coefficient {}", t.coeff)));
            }
            p.add_term(t.exponents.clone(), t.coeff);
        }
        Ok(p)
    }

    pub fn to_terms(&self) -> Vec<Term> {
        self.terms
            .iter()
            .map(|(e, &c)| Term {
                exponents: e.clone(),
                coeff: c,
            })
            .collect()
    }

    fn add_term(&mut self, exponents: Vec<u32>, coeff: f64) {
        debug_assert_eq!(exponents.len(), self.dim);
        if coeff == 0.0 {
            return;
        }
        match self.terms.entry(exponents) {
            Entry::Vacant(v) => {
                v.insert(coeff);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += coeff;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, &c)| {
                c * e
                    .iter()
                    .zip(x)
                    .map(|(&k, &xi)| xi.powi(k as i32))
                    .product::<f64>()
            })
            .sum()
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Self::zero(self.dim);
        for (e, &c) in &self.terms {
            if e[i] == 0 {
                continue;
            }
            let mut ne = e.clone();
            ne[i] -= 1;
            out.add_term(ne, c * e[i] as f64);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, &c) in &other.terms {
            out.add_term(e.clone(), c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero(self.dim);
        for (e, &c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.dim);
        for (e1, &c1) in &self.terms {
            for (e2, &c2) in &other.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out
    }

    pub fn gradient(&self, x: &[f64]) -> Vector {
        Vector::from_fn(self.dim, |i, _| self.derivative(i).eval(x))
    }

    pub fn hessian(&self, x: &[f64]) -> Matrix {
        let first: Vec<Polynomial> = (0..self.dim).map(|i| self.derivative(i)).collect();
        Matrix::from_fn(self.dim, self.dim, |i, j| first[i].derivative(j).eval(x))
    }
}

/// A vector of polynomials, one per component of a field `ℝ^d → ℝ^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyField {
    pub components: Vec<Polynomial>,
}

impl PolyField {
    pub fn new(components: Vec<Polynomial>) -> Self {
        Self { components }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, x: &[f64]) -> Vector {
        Vector::from_iterator(self.dim(), self.components.iter().map(|p| p.eval(x)))
    }

    /// Jacobian `J[k][l] = ∂_l X_k`.
    pub fn jacobian(&self, x: &[f64]) -> Matrix {
        let d = self.dim();
        Matrix::from_fn(d, d, |k, l| self.components[k].derivative(l).eval(x))
    }

    /// Symbolic bracket `[self, other] = D(other)·self − D(self)·other`.
    pub fn bracket(&self, other: &Self) -> Self {
        let d = self.dim();
        let components = (0..d)
            .map(|k| {
                let mut acc = Polynomial::zero(d);
                for l in 0..d {
                    acc = acc
                        .add(&other.components[k].derivative(l).mul(&self.components[l]))
                        .sub(&self.components[k].derivative(l).mul(&other.components[l]));
                }
                acc
            })
            .collect();
        Self { components }
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Polynomial::is_zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_derivatives() {
        // p = 3 x0^2 x1 - x1 + 2
        let p = Polynomial::monomial(vec![2, 1], 3.0)
            .add(&Polynomial::monomial(vec![0, 1], -1.0))
            .add(&Polynomial::constant(2, 2.0));
        assert_eq!(p.eval(&[2.0, 1.0]), 13.0);
        let g = p.gradient(&[2.0, 1.0]);
        assert_eq!(g.as_slice(), &[12.0, 11.0]);
        let h = p.hessian(&[2.0, 1.0]);
        assert_eq!(h[(0, 0)], 6.0);
        assert_eq!(h[(0, 1)], 12.0);
        assert_eq!(h[(1, 1)], 0.0);
        assert_eq!(p.degree(), 3);
    }

    #[test]
    fn cancellation_leaves_zero() {
        let p = Polynomial::variable(2, 0);
        assert!(p.sub(&p).is_zero());
    }

    #[test]
    fn rejects_wrong_arity() {
        let t = Term {
            exponents: vec![1],
            coeff: 1.0,
        };
        assert!(Polynomial::from_terms(2, &[t]).is_err());
    }

    #[test]
    fn grushin_bracket_symbolic() {
        let x1 = PolyField::new(vec![Polynomial::constant(2, 1.0), Polynomial::zero(2)]);
        let x2 = PolyField::new(vec![Polynomial::zero(2), Polynomial::variable(2, 0)]);
        let b = x1.bracket(&x2);
        assert_eq!(b.eval(&[0.3, -2.0]).as_slice(), &[0.0, 1.0]);
    }
}
