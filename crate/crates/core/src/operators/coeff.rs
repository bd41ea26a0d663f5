use std::fmt;
use std::sync::Arc;

use crate::fields::VectorFieldFamily;
use crate::linalg::{Matrix, Vector};
use crate::poly::Polynomial;

/// A coefficient `x ↦ c(x)`.
#[derive(Clone)]
pub enum ScalarField {
    Constant(f64),
    Polynomial(Polynomial),
    Function(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Constant(c) => write!(f, "Constant({c})"),
            ScalarField::Polynomial(p) => write!(f, "Polynomial({:?})", p.to_terms()),
            ScalarField::Function(_) => write!(f, "Function"),
        }
    }
}

impl ScalarField {
    pub fn from_fn<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        ScalarField::Function(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScalarField::Constant(c) => *c,
            ScalarField::Polynomial(p) => p.eval(x),
            ScalarField::Function(f) => f(x),
        }
    }

    /// True only when zero is structural (a zero constant or polynomial).
    pub fn is_identically_zero(&self) -> bool {
        match self {
            ScalarField::Constant(c) => *c == 0.0,
            ScalarField::Polynomial(p) => p.is_zero(),
            ScalarField::Function(_) => false,
        }
    }
}

impl From<f64> for ScalarField {
    fn from(c: f64) -> Self {
        ScalarField::Constant(c)
    }
}

/// A matrix coefficient `x ↦ A(x)`.
#[derive(Clone)]
pub enum MatrixMap {
    Constant(Matrix),
    /// Entry-wise table.
    Entries(Vec<Vec<ScalarField>>),
    /// `A = σσᵀ` with `σ` given entry-wise (`d × k`).
    Factor(Vec<Vec<ScalarField>>),
    Function(Arc<dyn Fn(&[f64]) -> Matrix + Send + Sync>),
}

impl fmt::Debug for MatrixMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixMap::Constant(a) => write!(f, "Constant({a:?})"),
            MatrixMap::Entries(e) => write!(f, "Entries({e:?})"),
            MatrixMap::Factor(e) => write!(f, "Factor({e:?})"),
            MatrixMap::Function(_) => write!(f, "Function"),
        }
    }
}

fn table(entries: &[Vec<ScalarField>], x: &[f64]) -> Matrix {
    let rows = entries.len();
    let cols = entries.first().map_or(0, Vec::len);
    Matrix::from_fn(rows, cols, |i, j| entries[i][j].eval(x))
}

impl MatrixMap {
    pub fn from_fn<F: Fn(&[f64]) -> Matrix + Send + Sync + 'static>(f: F) -> Self {
        MatrixMap::Function(Arc::new(f))
    }

    /// `A(x) = s · σ(x)σ(x)ᵀ` for the fields of `family`.
    pub fn from_family(family: &VectorFieldFamily, s: f64) -> Self {
        let family = family.clone();
        MatrixMap::from_fn(move |x| {
            let sigma = family.sigma_unchecked(x);
            &sigma * sigma.transpose() * s
        })
    }

    pub fn eval(&self, x: &[f64]) -> Matrix {
        match self {
            MatrixMap::Constant(a) => a.clone(),
            MatrixMap::Entries(e) => table(e, x),
            MatrixMap::Factor(e) => {
                let s = table(e, x);
                &s * s.transpose()
            }
            MatrixMap::Function(f) => f(x),
        }
    }
}

/// A vector coefficient `x ↦ b(x)`.
#[derive(Clone)]
pub enum VectorMap {
    Constant(Vector),
    Entries(Vec<ScalarField>),
    Function(Arc<dyn Fn(&[f64]) -> Vector + Send + Sync>),
}

impl fmt::Debug for VectorMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VectorMap::Constant(b) => write!(f, "Constant({:?})", b.as_slice()),
            VectorMap::Entries(e) => write!(f, "Entries({e:?})"),
            VectorMap::Function(_) => write!(f, "Function"),
        }
    }
}

impl VectorMap {
    pub fn zero(dim: usize) -> Self {
        VectorMap::Constant(Vector::zeros(dim))
    }

    pub fn eval(&self, x: &[f64]) -> Vector {
        match self {
            VectorMap::Constant(b) => b.clone(),
            VectorMap::Entries(e) => Vector::from_iterator(e.len(), e.iter().map(|c| c.eval(x))),
            VectorMap::Function(f) => f(x),
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            VectorMap::Constant(b) => b.iter().all(|v| *v == 0.0),
            VectorMap::Entries(e) => e.iter().all(ScalarField::is_identically_zero),
            VectorMap::Function(_) => false,
        }
    }
}
