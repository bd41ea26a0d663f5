use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::DomainBox;
use crate::linalg::{Matrix, Vector};
use crate::poly::Polynomial;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Semicontinuity {
    Continuous,
    UscPointlist,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalNode {
    pub node: usize,
    pub value: f64,
}

/// Nodal values on a uniform grid over a box, stored row-major (last axis
/// fastest). Node `k` on axis `i` sits at `lo_i + k h_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    bounds: DomainBox,
    shape: Vec<usize>,
    values: Vec<f64>,
    semicontinuity: Semicontinuity,
    exceptional: Vec<ExceptionalNode>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    dims: usize,
    origin: Vec<f64>,
    spacing: Vec<f64>,
    shape: Vec<usize>,
    semicontinuity: Semicontinuity,
    #[serde(default)]
    exceptional: Vec<ExceptionalNode>,
}

impl GridFunction {
    pub fn new(bounds: DomainBox, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if shape.len() != bounds.dim() || shape.iter().any(|s| *s < 2) {
            return Err(Error::InvalidParameter(format!("bad grid shape {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if values.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value at node {i}")));
        }
        Ok(Self {
            bounds,
            shape,
            values,
            semicontinuity: Semicontinuity::Continuous,
            exceptional: Vec::new(),
        })
    }

    pub fn from_fn(bounds: DomainBox, shape: Vec<usize>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let probe = Self::new(bounds.clone(), shape.clone(), vec![0.0; shape.iter().product()])?;
        let values = (0..probe.len()).map(|i| f(&probe.point(i))).collect();
        Self::new(bounds, shape, values)
    }

    pub fn from_smooth(bounds: DomainBox, shape: Vec<usize>, u: &SmoothFunction) -> Result<Self> {
        Self::from_fn(bounds, shape, |x| u.value(x))
    }

    /// Overrides the listed nodes and tags the function as a pointwise USC
    /// function.
    pub fn with_exceptional(mut self, nodes: Vec<ExceptionalNode>) -> Result<Self> {
        for e in &nodes {
            if e.node >= self.len() {
                return Err(Error::IndexOutOfRange {
                    index: e.node,
                    count: self.len(),
                });
            }
            if !e.value.is_finite() {
                return Err(Error::InvalidParameter("non-finite exceptional value".into()));
            }
            self.values[e.node] = e.value;
        }
        self.semicontinuity = Semicontinuity::UscPointlist;
        self.exceptional = nodes;
        Ok(self)
    }

    pub fn bounds(&self) -> &DomainBox {
        &self.bounds
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn semicontinuity(&self) -> Semicontinuity {
        self.semicontinuity
    }

    pub fn exceptional(&self) -> &[ExceptionalNode] {
        &self.exceptional
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.bounds
            .widths()
            .iter()
            .zip(&self.shape)
            .map(|(w, s)| w / (*s - 1) as f64)
            .collect()
    }

    pub fn cell_diameter(&self) -> f64 {
        self.spacing().iter().map(|h| h * h).sum::<f64>().sqrt()
    }

    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = flat % self.shape[k];
            flat /= self.shape[k];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (i, s)| acc * s + i)
    }

    pub fn point(&self, node: usize) -> Vec<f64> {
        let h = self.spacing();
        self.multi_index(node)
            .iter()
            .enumerate()
            .map(|(k, i)| self.bounds.lo[k] + *i as f64 * h[k])
            .collect()
    }

    /// Node closest to `x` (clamped to the box).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let h = self.spacing();
        let idx: Vec<usize> = (0..self.dim())
            .map(|k| {
                let t = ((x[k] - self.bounds.lo[k]) / h[k]).round();
                t.clamp(0.0, (self.shape[k] - 1) as f64) as usize
            })
            .collect();
        self.flat_index(&idx)
    }

    /// True when every index is at least `rho` away from the grid edge.
    pub fn is_interior(&self, node: usize, rho: usize) -> bool {
        self.multi_index(node)
            .iter()
            .zip(&self.shape)
            .all(|(i, s)| *i >= rho && *i + rho < *s)
    }

    /// Offsets in `{−ρ..ρ}^d \ {0}`, in lexicographic order.
    pub fn stencil(&self, rho: usize) -> Vec<Vec<isize>> {
        let d = self.dim();
        let side = 2 * rho + 1;
        let r = rho as isize;
        (0..side.pow(d as u32))
            .map(|mut k| {
                let mut off = vec![0isize; d];
                for o in off.iter_mut().rev() {
                    *o = (k % side) as isize - r;
                    k /= side;
                }
                off
            })
            .filter(|o| o.iter().any(|v| *v != 0))
            .collect()
    }

    pub fn offset(&self, node: usize, off: &[isize]) -> Option<usize> {
        let idx = self.multi_index(node);
        let mut out = Vec::with_capacity(idx.len());
        for ((i, o), s) in idx.iter().zip(off).zip(&self.shape) {
            let j = *i as isize + o;
            if j < 0 || j >= *s as isize {
                return None;
            }
            out.push(j as usize);
        }
        Some(self.flat_index(&out))
    }

    /// Multilinear interpolation; `None` outside the box.
    pub fn interpolate(&self, x: &[f64]) -> Option<f64> {
        if !self.bounds.contains(x) {
            return None;
        }
        let d = self.dim();
        let h = self.spacing();
        let mut base = Vec::with_capacity(d);
        let mut frac = Vec::with_capacity(d);
        for k in 0..d {
            let t = (x[k] - self.bounds.lo[k]) / h[k];
            let i = (t.floor() as usize).min(self.shape[k] - 2);
            base.push(i);
            frac.push((t - i as f64).clamp(0.0, 1.0));
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = base.clone();
            for k in 0..d {
                if corner >> k & 1 == 1 {
                    idx[k] += 1;
                    w *= frac[k];
                } else {
                    w *= 1.0 - frac[k];
                }
            }
            if w != 0.0 {
                acc += w * self.values[self.flat_index(&idx)];
            }
        }
        Some(acc)
    }

    /// `max |Δu| / h` over axis-neighbor pairs.
    pub fn lipschitz_estimate(&self) -> f64 {
        let h = self.spacing();
        let mut best: f64 = 0.0;
        for node in 0..self.len() {
            let idx = self.multi_index(node);
            for k in 0..self.dim() {
                if idx[k] + 1 < self.shape[k] {
                    let mut j = idx.clone();
                    j[k] += 1;
                    let diff = (self.values[self.flat_index(&j)] - self.values[node]).abs();
                    best = best.max(diff / h[k]);
                }
            }
        }
        best
    }

    /// First node (in index order) attaining the maximum.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        best
    }

    /// Central-difference gradient and Hessian at an interior node.
    pub fn fd_jet(&self, node: usize) -> Option<(Vector, Matrix)> {
        if !self.is_interior(node, 1) {
            return None;
        }
        let d = self.dim();
        let h = self.spacing();
        let at = |off: &[isize]| self.values[self.offset(node, off).expect("interior node")];
        let u0 = self.values[node];
        let mut grad = Vector::zeros(d);
        let mut hess = Matrix::zeros(d, d);
        for i in 0..d {
            let mut e = vec![0isize; d];
            e[i] = 1;
            let up = at(&e);
            e[i] = -1;
            let dn = at(&e);
            grad[i] = (up - dn) / (2.0 * h[i]);
            hess[(i, i)] = (up - 2.0 * u0 + dn) / (h[i] * h[i]);
            for j in (i + 1)..d {
                let mut o = vec![0isize; d];
                let mut corner = |si: isize, sj: isize| {
                    o[i] = si;
                    o[j] = sj;
                    at(&o)
                };
                let v = (corner(1, 1) - corner(1, -1) - corner(-1, 1) + corner(-1, -1)) / (4.0 * h[i] * h[j]);
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        Some((grad, hess))
    }

    /// Structured text: TOML header, `---`, one row of values per line of
    /// the last axis.
    pub fn to_text(&self) -> String {
        let header = Header {
            dims: self.dim(),
            origin: self.bounds.lo.clone(),
            spacing: self.spacing(),
            shape: self.shape.clone(),
            semicontinuity: self.semicontinuity,
            exceptional: self.exceptional.clone(),
        };
        let mut out = toml::to_string(&header).expect("header serializes");
        out.push_str("---\n");
        let row = *self.shape.last().unwrap();
        for chunk in self.values.chunks(row) {
            let line: Vec<String> = chunk.iter().map(f64::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (head, body) = text
            .split_once("\n---\n")
            .or_else(|| text.strip_prefix("---\n").map(|b| ("", b)))
            .ok_or_else(|| Error::Parse("grid function: missing '---' separator".into()))?;
        let header: Header = toml::from_str(head).map_err(|e| Error::Parse(e.to_string()))?;
        if header.origin.len() != header.dims || header.spacing.len() != header.dims || header.shape.len() != header.dims {
            return Err(Error::Parse("grid function: header lengths disagree with dims".into()));
        }
        if header.spacing.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::Parse("grid function: spacing must be positive".into()));
        }
        let values = body
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("grid value {t:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let hi = header
            .origin
            .iter()
            .zip(&header.spacing)
            .zip(&header.shape)
            .map(|((o, h), s)| o + h * (s.saturating_sub(1)) as f64)
            .collect();
        let bounds = DomainBox::new(header.origin.clone(), hi)?;
        let g = Self::new(bounds, header.shape, values)?;
        match header.semicontinuity {
            Semicontinuity::Continuous if header.exceptional.is_empty() => Ok(g),
            Semicontinuity::Continuous => Err(Error::Parse("exceptional nodes need the usc-pointlist tag".into())),
            Semicontinuity::UscPointlist => g.with_exceptional(header.exceptional),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

pub type JetFn = std::sync::Arc<dyn Fn(&[f64]) -> (f64, Vector, Matrix) + Send + Sync>;

/// A smooth function with exact first and second derivatives.
#[derive(Clone)]
pub enum SmoothFunction {
    Polynomial(Polynomial),
    Custom(JetFn),
}

impl std::fmt::Debug for SmoothFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SmoothFunction::Polynomial(p) => f.debug_tuple("Polynomial").field(p).finish(),
            SmoothFunction::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl SmoothFunction {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            SmoothFunction::Polynomial(p) => p.eval(x),
            SmoothFunction::Custom(f) => f(x).0,
        }
    }

    /// `(u(x), Du(x), D²u(x))`.
    pub fn jet(&self, x: &[f64]) -> (f64, Vector, Matrix) {
        match self {
            SmoothFunction::Polynomial(p) => (p.eval(x), p.gradient(x), p.hessian(x)),
            SmoothFunction::Custom(f) => f(x),
        }
    }
}
