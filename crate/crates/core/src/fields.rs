//! Vector-field families `X₁ … X_m` on a box in `ℝ^d`: evaluation,
//! Jacobians, Lie brackets and the Hörmander rank test.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::poly::{PolyField, Polynomial, Term};

/// Default rank tolerance for `hormander_rank`.
pub const RANK_TOL: f64 = 1e-8;

/// Relative step of the central-difference Jacobian for numeric fields.
pub const JACOBIAN_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothness {
    AnalyticPolynomial,
    LipschitzNumeric,
}

/// Axis-aligned box `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidParameter(format!(
                "empty box lo={lo:?} hi={hi:?}"
            )));
        }
        Ok(Self { lo, hi })
    }

    /// `[-half, half]^d`.
    pub fn cube(dim: usize, half: f64) -> Self {
        Self {
            lo: vec![-half; dim],
            hi: vec![half; dim],
        }
    }

    /// Cube of half-width `half` around `center`.
    pub fn around(center: &[f64], half: f64) -> Self {
        Self {
            lo: center.iter().map(|c| c - half).collect(),
            hi: center.iter().map(|c| c + half).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    pub fn contains_box(&self, other: &DomainBox) -> bool {
        self.contains(&other.lo) && self.contains(&other.hi)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).collect()
    }

    pub fn diameter(&self) -> f64 {
        self.widths().iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

pub type FieldFn = Arc<dyn Fn(&[f64]) -> Vector + Send + Sync>;

#[derive(Clone)]
enum FieldRepr {
    Poly {
        field: PolyField,
        /// `jacobian[k][l] = ∂_l X_k`, precomputed.
        jacobian: Vec<Vec<Polynomial>>,
    },
    Numeric(FieldFn),
}

/// One vector field `ℝ^d → ℝ^d`.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    repr: FieldRepr,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            FieldRepr::Poly { field, .. } => f.debug_tuple("Poly").field(field).finish(),
            FieldRepr::Numeric(_) => write!(f, "Numeric(dim={})", self.dim),
        }
    }
}

impl VectorField {
    pub fn polynomial(field: PolyField) -> Self {
        let jacobian = field
            .components
            .iter()
            .map(|c| (0..field.dim()).map(|l| c.derivative(l)).collect())
            .collect();
        Self {
            dim: field.dim(),
            repr: FieldRepr::Poly { field, jacobian },
        }
    }

    pub fn numeric(dim: usize, f: FieldFn) -> Self {
        Self {
            dim,
            repr: FieldRepr::Numeric(f),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_poly(&self) -> Option<&PolyField> {
        match &self.repr {
            FieldRepr::Poly { field, .. } => Some(field),
            FieldRepr::Numeric(_) => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vector {
        match &self.repr {
            FieldRepr::Poly { field, .. } => field.eval(x),
            FieldRepr::Numeric(f) => f(x),
        }
    }

    /// `DX(x)`; central differences with step `1e-5·max(1, |x|)` for
    /// numeric fields.
    pub fn jacobian(&self, x: &[f64]) -> Matrix {
        let d = self.dim;
        match &self.repr {
            FieldRepr::Poly { jacobian, .. } => {
                Matrix::from_fn(d, d, |k, l| jacobian[k][l].eval(x))
            }
            FieldRepr::Numeric(f) => {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let h = JACOBIAN_STEP * norm.max(1.0);
                let mut jac = Matrix::zeros(d, d);
                let mut xp = x.to_vec();
                for l in 0..d {
                    xp[l] = x[l] + h;
                    let fp = f(&xp);
                    xp[l] = x[l] - h;
                    let fm = f(&xp);
                    xp[l] = x[l];
                    for k in 0..d {
                        jac[(k, l)] = (fp[k] - fm[k]) / (2.0 * h);
                    }
                }
                jac
            }
        }
    }
}

/// One generator of the bracket span: the right-nested word
/// `[i₀,[i₁,[…,i_k]]]` (0-based field indices) and its value at a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketTerm {
    pub word: Vec<usize>,
    pub value: Vec<f64>,
    /// Word length minus one.
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCertificate {
    pub point: Vec<f64>,
    /// Longest word length that was enumerated (enumeration stops early at
    /// full rank).
    pub depth_used: usize,
    pub rank: usize,
    pub generators: Vec<BracketTerm>,
    pub singular_values: Vec<f64>,
}

impl RankCertificate {
    pub fn is_full(&self) -> bool {
        self.rank == self.point.len()
    }
}

/// The family `𝒳 = (X₁, …, X_m)` together with its domain box.
#[derive(Debug, Clone)]
pub struct VectorFieldFamily {
    name: String,
    dim: usize,
    fields: Vec<VectorField>,
    domain: DomainBox,
    smoothness: Smoothness,
}

/// Default half-width of catalog domains.
const CATALOG_HALF_WIDTH: f64 = 10.0;

impl VectorFieldFamily {
    pub fn from_poly_fields(name: &str, dim: usize, fields: Vec<PolyField>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::InvalidParameter("empty field family".into()));
        }
        if let Some(bad) = fields.iter().find(|f| f.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.dim(),
            });
        }
        if let Some(p) = fields
            .iter()
            .flat_map(|f| f.components.iter())
            .find(|p| p.dim() != dim)
        {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.dim(),
            });
        }
        Ok(Self {
            name: name.to_string(),
            dim,
            fields: fields.into_iter().map(VectorField::polynomial).collect(),
            domain: DomainBox::cube(dim, CATALOG_HALF_WIDTH),
            smoothness: Smoothness::AnalyticPolynomial,
        })
    }

    /// A family of closures; Jacobians fall back to central differences.
    pub fn numeric(name: &str, dim: usize, fields: Vec<FieldFn>, domain: DomainBox) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::InvalidParameter("empty field family".into()));
        }
        if domain.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: domain.dim(),
            });
        }
        Ok(Self {
            name: name.to_string(),
            dim,
            fields: fields
                .into_iter()
                .map(|f| VectorField::numeric(dim, f))
                .collect(),
            domain,
            smoothness: Smoothness::LipschitzNumeric,
        })
    }

    /// Standard basis `e₁ … e_d`.
    pub fn euclidean(dim: usize) -> Self {
        let fields = (0..dim)
            .map(|i| {
                PolyField::new(
                    (0..dim)
                        .map(|k| Polynomial::constant(dim, if k == i { 1.0 } else { 0.0 }))
                        .collect(),
                )
            })
            .collect();
        Self::from_poly_fields(&format!("euclidean:{dim}"), dim, fields)
            .expect("euclidean family is well formed")
    }

    /// Grushin fields `X₁ = (1, 0)`, `X₂ = (0, x₁)`.
    pub fn grushin() -> Self {
        let d = 2;
        let x1 = PolyField::new(vec![Polynomial::constant(d, 1.0), Polynomial::zero(d)]);
        let x2 = PolyField::new(vec![Polynomial::zero(d), Polynomial::variable(d, 0)]);
        Self::from_poly_fields("grushin", d, vec![x1, x2]).expect("grushin family is well formed")
    }

    /// Heisenberg generators `X₁ = (1, 0, 2x₂)`, `X₂ = (0, 1, −2x₁)`.
    pub fn heisenberg() -> Self {
        let d = 3;
        let x1 = PolyField::new(vec![
            Polynomial::constant(d, 1.0),
            Polynomial::zero(d),
            Polynomial::variable(d, 1).scale(2.0),
        ]);
        let x2 = PolyField::new(vec![
            Polynomial::zero(d),
            Polynomial::constant(d, 1.0),
            Polynomial::variable(d, 0).scale(-2.0),
        ]);
        Self::from_poly_fields("heisenberg1", d, vec![x1, x2])
            .expect("heisenberg family is well formed")
    }

    /// Resolves `"euclidean:d"`, `"grushin"` or `"heisenberg1"`.
    pub fn from_catalog(name: &str) -> Result<Self> {
        match name {
            "grushin" => Ok(Self::grushin()),
            "heisenberg1" => Ok(Self::heisenberg()),
            _ => {
                if let Some(d) = name.strip_prefix("euclidean:") {
                    let dim: usize = d
                        .parse()
                        .map_err(|_| Error::Parse(format!("bad dimension in {name:?}")))?;
                    if dim == 0 {
                        return Err(Error::InvalidParameter("euclidean:0".into()));
                    }
                    Ok(Self::euclidean(dim))
                } else {
                    Err(Error::Parse(format!("unknown catalog family {name:?}")))
                }
            }
        }
    }

    pub fn catalog_names() -> &'static [&'static str] {
        &["euclidean:d", "grushin", "heisenberg1"]
    }

    pub fn with_domain(mut self, domain: DomainBox) -> Result<Self> {
        if domain.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: domain.dim(),
            });
        }
        self.domain = domain;
        Ok(self)
    }

    /// Keeps only the listed fields (0-based), in order.
    pub fn subfamily(&self, indices: &[usize]) -> Result<Self> {
        let mut fields = Vec::with_capacity(indices.len());
        for &i in indices {
            fields.push(self.field(i)?.clone());
        }
        if fields.is_empty() {
            return Err(Error::InvalidParameter("empty field family".into()));
        }
        Ok(Self {
            name: format!("{}{:?}", self.name, indices),
            fields,
            ..self.clone()
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.fields.len()
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.fields
    }

    fn field(&self, i: usize) -> Result<&VectorField> {
        self.fields.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            count: self.fields.len(),
        })
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        Ok(())
    }

    /// `X_i(x)`, with `i` 0-based.
    pub fn eval_field(&self, i: usize, x: &[f64]) -> Result<Vector> {
        let f = self.field(i)?;
        self.check_point(x)?;
        Ok(f.eval(x))
    }

    /// `DX_i(x)`.
    pub fn field_jacobian(&self, i: usize, x: &[f64]) -> Result<Matrix> {
        let f = self.field(i)?;
        self.check_point(x)?;
        Ok(f.jacobian(x))
    }

    /// `σ(x) = [X₁(x) … X_m(x)]`, a `d × m` matrix.
    pub fn sigma(&self, x: &[f64]) -> Result<Matrix> {
        self.check_point(x)?;
        Ok(self.sigma_unchecked(x))
    }

    pub(crate) fn sigma_unchecked(&self, x: &[f64]) -> Matrix {
        let mut s = Matrix::zeros(self.dim, self.fields.len());
        for (j, f) in self.fields.iter().enumerate() {
            s.set_column(j, &f.eval(x));
        }
        s
    }

    /// `Σ βᵢ Xᵢ(x)` without domain checks (the integrator checks the box).
    pub(crate) fn velocity(&self, x: &[f64], beta: &[f64]) -> Vector {
        let mut v = Vector::zeros(self.dim);
        for (f, &b) in self.fields.iter().zip(beta) {
            if b != 0.0 {
                v += f.eval(x) * b;
            }
        }
        v
    }

    /// `[X_i, X_j](x) = DX_j(x)·X_i(x) − DX_i(x)·X_j(x)`.
    pub fn lie_bracket(&self, i: usize, j: usize, x: &[f64]) -> Result<Vector> {
        let fi = self.field(i)?;
        let fj = self.field(j)?;
        self.check_point(x)?;
        Ok(fj.jacobian(x) * fi.eval(x) - fi.jacobian(x) * fj.eval(x))
    }

    /// `η(x) = (1/m) Σ |X_i(x)|²`.
    pub fn mean_square_norm(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let m = self.fields.len() as f64;
        Ok(self
            .fields
            .iter()
            .map(|f| f.eval(x).norm_squared())
            .sum::<f64>()
            / m)
    }

    /// Largest `|X_i(x)|` over the corners, center and a coarse lattice of
    /// `region`.
    pub fn max_field_norm(&self, region: &DomainBox) -> f64 {
        let per_axis = 5usize;
        let total = per_axis.pow(self.dim as u32);
        let mut best = 0.0f64;
        let mut x = vec![0.0; self.dim];
        for flat in 0..total {
            let mut rem = flat;
            for (k, xk) in x.iter_mut().enumerate() {
                let idx = rem % per_axis;
                rem /= per_axis;
                let t = idx as f64 / (per_axis - 1) as f64;
                *xk = region.lo[k] + t * (region.hi[k] - region.lo[k]);
            }
            for f in &self.fields {
                best = best.max(f.eval(&x).norm());
            }
        }
        best
    }

    /// Symbolic polynomial field for a right-nested bracket word.
    fn word_field(&self, word: &[usize], memo: &mut HashMap<Vec<usize>, PolyField>) -> Result<PolyField> {
        if let Some(p) = memo.get(word) {
            return Ok(p.clone());
        }
        let head = self
            .field(word[0])?
            .as_poly()
            .ok_or_else(|| Error::Unsupported("iterated brackets need polynomial fields".into()))?
            .clone();
        let out = if word.len() == 1 {
            head
        } else {
            let tail = self.word_field(&word[1..], memo)?;
            head.bracket(&tail)
        };
        memo.insert(word.to_vec(), out.clone());
        Ok(out)
    }

    /// Rank of the span of iterated brackets at `x`.
    ///
    /// `max_depth` is the longest word length enumerated: 1 means the
    /// fields alone, 2 adds the brackets `[X_i, X_j]`, and so on. Words are
    /// right-nested and enumerated breadth-first; enumeration stops as soon
    /// as the rank reaches `d`. The rank counts singular values above
    /// `tol · max(σ_max, 1)` of the stacked value matrix.
    pub fn hormander_rank(&self, x: &[f64], max_depth: usize, tol: f64) -> Result<RankCertificate> {
        if max_depth == 0 {
            return Err(Error::InvalidParameter("max_depth must be at least 1".into()));
        }
        self.check_point(x)?;
        if max_depth >= 2 && self.smoothness != Smoothness::AnalyticPolynomial {
            return Err(Error::Unsupported(
                "bracket words longer than one need analytic-polynomial fields".into(),
            ));
        }
        let m = self.fields.len();
        let mut memo = HashMap::new();
        let mut terms: Vec<BracketTerm> = Vec::new();
        let mut generators: Vec<BracketTerm> = Vec::new();
        let mut layer: Vec<Vec<usize>> = (0..m).map(|i| vec![i]).collect();
        let mut depth_used = 0;
        let mut rank = 0;

        for len in 1..=max_depth {
            depth_used = len;
            for word in &layer {
                let value = if len == 1 {
                    self.fields[word[0]].eval(x)
                } else {
                    self.word_field(word, &mut memo)?.eval(x)
                };
                if value.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Singular(format!("bracket {word:?} not finite")));
                }
                let term = BracketTerm {
                    word: word.clone(),
                    value: value.iter().copied().collect(),
                    depth: word.len() - 1,
                };
                if rank < self.dim {
                    let mut candidate = generators.clone();
                    candidate.push(term.clone());
                    let r = linalg::numerical_rank(
                        &linalg::singular_values(&stack(&candidate, self.dim)),
                        tol,
                    );
                    if r > rank {
                        rank = r;
                        generators = candidate;
                    }
                }
                terms.push(term);
            }
            if rank == self.dim || len == max_depth {
                break;
            }
            layer = (0..m)
                .flat_map(|i| {
                    layer.iter().map(move |w| {
                        let mut nw = Vec::with_capacity(w.len() + 1);
                        nw.push(i);
                        nw.extend_from_slice(w);
                        nw
                    })
                })
                .collect();
        }

        let singular_values = linalg::singular_values(&stack(&terms, self.dim));
        let rank_all = linalg::numerical_rank(&singular_values, tol);
        debug_assert_eq!(rank_all, rank);
        Ok(RankCertificate {
            point: x.to_vec(),
            depth_used,
            rank: rank_all,
            generators,
            singular_values,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Parses a polynomial field document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: FieldFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.build()
    }

    /// Writes a polynomial field document; numeric families cannot be saved.
    pub fn to_toml_string(&self) -> Result<String> {
        let mut fields = Vec::new();
        for f in &self.fields {
            let poly = f
                .as_poly()
                .ok_or_else(|| Error::Unsupported("numeric fields have no file form".into()))?;
            fields.push(FieldSpec {
                components: poly.components.iter().map(Polynomial::to_terms).collect(),
            });
        }
        let file = FieldFile {
            name: Some(self.name.clone()),
            dim: self.dim,
            count: self.fields.len(),
            domain: Some(self.domain.clone()),
            fields,
        };
        toml::to_string(&file).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn stack(terms: &[BracketTerm], dim: usize) -> Matrix {
    Matrix::from_fn(terms.len(), dim, |r, c| terms[r].value[c])
}

/// On-disk polynomial field document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldFile {
    #[serde(default)]
    pub name: Option<String>,
    pub dim: usize,
    pub count: usize,
    #[serde(default)]
    pub domain: Option<DomainBox>,
    pub fields: Vec<FieldSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    /// One term list per component.
    pub components: Vec<Vec<Term>>,
}

impl FieldFile {
    pub fn build(&self) -> Result<VectorFieldFamily> {
        if self.fields.len() != self.count {
            return Err(Error::Parse(format!(
                "count = {} but {} fields listed",
                self.count,
                self.fields.len()
            )));
        }
        let mut polys = Vec::with_capacity(self.count);
        for spec in &self.fields {
            if spec.components.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: spec.components.len(),
                });
            }
            let comps = spec
                .components
                .iter()
                .map(|terms| Polynomial::from_terms(self.dim, terms))
                .collect::<Result<Vec<_>>>()?;
            polys.push(PolyField::new(comps));
        }
        let name = self.name.clone().unwrap_or_else(|| "user".to_string());
        let family = VectorFieldFamily::from_poly_fields(&name, self.dim, polys)?;
        match &self.domain {
            Some(d) => family.with_domain(DomainBox::new(d.lo.clone(), d.hi.clone())?),
            None => Ok(family),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn catalog_evaluations() {
        let g = VectorFieldFamily::grushin();
        assert_eq!(g.eval_field(1, &[0.0, 0.5]).unwrap().as_slice(), &[0.0, 0.0]);
        let h = VectorFieldFamily::heisenberg();
        assert_eq!(
            h.eval_field(0, &[0.0, 1.0, 0.0]).unwrap().as_slice(),
            &[1.0, 0.0, 2.0]
        );
        let e = VectorFieldFamily::euclidean(2);
        assert_eq!(e.eval_field(0, &[3.0, -4.0]).unwrap().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn eval_errors() {
        let g = VectorFieldFamily::grushin();
        assert!(matches!(
            g.eval_field(2, &[0.0, 0.0]),
            Err(Error::IndexOutOfRange { index: 2, count: 2 })
        ));
        assert!(matches!(
            g.eval_field(0, &[100.0, 0.0]),
            Err(Error::OutsideDomain { .. })
        ));
        assert!(g.eval_field(0, &[0.0]).is_err());
    }

    #[test]
    fn catalog_jacobians() {
        let g = VectorFieldFamily::grushin();
        let j = g.field_jacobian(1, &[0.7, -0.2]).unwrap();
        assert_eq!(linalg::matrix_to_rows(&j), vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
        let h = VectorFieldFamily::heisenberg();
        let j = h.field_jacobian(1, &[0.3, 0.1, 2.0]).unwrap();
        assert_eq!(
            linalg::matrix_to_rows(&j),
            vec![vec![0.0; 3], vec![0.0; 3], vec![-2.0, 0.0, 0.0]]
        );
        let e = VectorFieldFamily::euclidean(3);
        assert_eq!(e.field_jacobian(2, &[1.0, 2.0, 3.0]).unwrap().norm(), 0.0);
    }

    #[test]
    fn brackets_closed_form() {
        let g = VectorFieldFamily::grushin();
        assert!(close(g.lie_bracket(0, 1, &[0.4, 1.0]).unwrap().as_slice(), &[0.0, 1.0], 0.0));
        let h = VectorFieldFamily::heisenberg();
        assert!(close(
            h.lie_bracket(0, 1, &[0.4, -1.0, 2.0]).unwrap().as_slice(),
            &[0.0, 0.0, -4.0],
            0.0
        ));
        assert_eq!(h.lie_bracket(1, 1, &[0.4, -1.0, 2.0]).unwrap().norm(), 0.0);
    }

    #[test]
    fn grushin_rank_by_depth() {
        let g = VectorFieldFamily::grushin();
        let c1 = g.hormander_rank(&[0.0, 0.0], 1, RANK_TOL).unwrap();
        assert_eq!(c1.rank, 1);
        let c2 = g.hormander_rank(&[0.0, 0.0], 2, RANK_TOL).unwrap();
        assert_eq!(c2.rank, 2);
        let words: Vec<_> = c2.generators.iter().map(|t| t.word.clone()).collect();
        assert_eq!(words, vec![vec![0], vec![0, 1]]);
        assert_eq!(c2.generators[1].depth, 1);
        let off = g.hormander_rank(&[0.5, 0.0], 1, RANK_TOL).unwrap();
        assert_eq!(off.rank, 2);
        assert_eq!(off.depth_used, 1);
    }

    #[test]
    fn heisenberg_rank_three() {
        let h = VectorFieldFamily::heisenberg();
        let c = h.hormander_rank(&[0.0; 3], 2, RANK_TOL).unwrap();
        assert_eq!(c.rank, 3);
        assert!(c.is_full());
        assert_eq!(c.generators.len(), 3);
    }

    #[test]
    fn numeric_fields_refuse_deep_brackets() {
        let f: FieldFn = Arc::new(|x: &[f64]| Vector::from_vec(vec![1.0, x[0].abs()]));
        let fam = VectorFieldFamily::numeric("abs", 2, vec![f], DomainBox::cube(2, 1.0)).unwrap();
        assert_eq!(fam.smoothness(), Smoothness::LipschitzNumeric);
        assert!(fam.hormander_rank(&[0.1, 0.0], 1, RANK_TOL).is_ok());
        assert!(matches!(
            fam.hormander_rank(&[0.1, 0.0], 2, RANK_TOL),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn numeric_jacobian_central_difference() {
        let f: FieldFn = Arc::new(|x: &[f64]| Vector::from_vec(vec![x[0] * x[1], x[1].sin()]));
        let fam = VectorFieldFamily::numeric("n", 2, vec![f], DomainBox::cube(2, 2.0)).unwrap();
        let j = fam.field_jacobian(0, &[0.5, 0.3]).unwrap();
        let expected = [[0.3, 0.5], [0.0, 0.3f64.cos()]];
        for k in 0..2 {
            for l in 0..2 {
                assert!((j[(k, l)] - expected[k][l]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn catalog_names_parse() {
        assert_eq!(VectorFieldFamily::from_catalog("euclidean:4").unwrap().dim(), 4);
        assert!(VectorFieldFamily::from_catalog("euclidean:x").is_err());
        assert!(VectorFieldFamily::from_catalog("engel").is_err());
    }

    #[test]
    fn field_file_round_trip() {
        let h = VectorFieldFamily::heisenberg();
        let text = h.to_toml_string().unwrap();
        let back = VectorFieldFamily::from_toml_str(&text).unwrap();
        let x = [0.3, -0.7, 1.1];
        for i in 0..2 {
            assert_eq!(h.eval_field(i, &x).unwrap(), back.eval_field(i, &x).unwrap());
        }
    }

    #[test]
    fn field_file_rejects_bad_count() {
        let text = r#"
            dim = 2
            count = 2
            [[fields]]
            components = [[{ exponents = [0, 0], coeff = 1.0 }], []]
        "#;
        assert!(VectorFieldFamily::from_toml_str(text).is_err());
    }
}
