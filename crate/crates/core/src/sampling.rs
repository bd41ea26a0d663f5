//! Deterministic sampling: seeded RNGs, low-discrepancy unit directions and
//! random orthogonal matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{Matrix, Vector};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `index` derived from `seed`.
pub fn substream(seed: u64, index: u64) -> SeededRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(index);
    r
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base as u64) as f64 * inv;
        index /= base as u64;
        inv /= b;
    }
    out
}

/// Halton point `index` in `[0,1)^dim` (dim ≤ 16).
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    (0..dim).map(|k| radical_inverse(index, PRIMES[k % PRIMES.len()])).collect()
}

pub fn gaussian_vector(dim: usize, rng: &mut impl Rng) -> Vector {
    Vector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

pub fn random_unit(dim: usize, rng: &mut impl Rng) -> Vector {
    loop {
        let v = gaussian_vector(dim, rng);
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Uniform point in the closed ball of radius `radius` around `center`.
pub fn random_in_ball(center: &[f64], radius: f64, rng: &mut impl Rng) -> Vec<f64> {
    let d = center.len();
    let dir = random_unit(d, rng);
    let u: f64 = rng.random();
    let rho = radius * u.powf(1.0 / d as f64);
    center.iter().zip(dir.iter()).map(|(c, v)| c + rho * v).collect()
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`.
pub fn random_orthogonal(n: usize, rng: &mut impl Rng) -> Matrix {
    let g = gaussian_matrix(n, n, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Orthonormal basis of the complement of the unit vector `axis`
/// (Gram–Schmidt over the coordinate axes), as columns of a `d × (d−1)`
/// matrix.
pub fn complement_basis(axis: &Vector) -> Matrix {
    let d = axis.len();
    let mut basis: Vec<Vector> = vec![axis.clone()];
    let mut order: Vec<usize> = (0..d).collect();
    // start with the axes least aligned with `axis`
    order.sort_by(|&a, &b| axis[a].abs().total_cmp(&axis[b].abs()));
    for k in order {
        if basis.len() == d {
            break;
        }
        let mut v = Vector::zeros(d);
        v[k] = 1.0;
        for b in &basis {
            let c = b.dot(&v);
            v -= b * c;
        }
        let n = v.norm();
        if n > 1e-8 {
            basis.push(v / n);
        }
    }
    Matrix::from_columns(&basis[1..])
}

/// `n` unit vectors in `ℝ^dim`, spread quasi-uniformly and arranged around
/// `axis` so that `|axis·p| ≥ |axis| / n` for every returned `p` (in `d = 2`,
/// `|axis|·sin(π/n)`).
///
/// In `d = 2` the points are angles offset by half a step from the normal of
/// `axis`. In higher dimension the heights along `axis` are stratified
/// (`t_k = (2k+1−n)/n`) and the complementary component follows a golden
/// angle spiral (`d = 3`) or Halton points (`d ≥ 4`).
pub fn adapted_directions(dim: usize, n: usize, axis: Option<&Vector>) -> Vec<Vector> {
    if n == 0 || dim == 0 {
        return Vec::new();
    }
    let axis = match axis {
        Some(a) if a.norm() > 0.0 => a / a.norm(),
        _ => {
            let mut e = Vector::zeros(dim);
            e[0] = 1.0;
            e
        }
    };
    if dim == 1 {
        return (0..n)
            .map(|k| Vector::from_element(1, if k % 2 == 0 { 1.0 } else { -1.0 }))
            .collect();
    }
    let comp = complement_basis(&axis);
    if dim == 2 {
        let normal = comp.column(0).into_owned();
        return (0..n)
            .map(|k| {
                let th = (k as f64 + 0.5) * std::f64::consts::TAU / n as f64;
                &normal * th.cos() + &axis * th.sin()
            })
            .collect();
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let t = (2.0 * k as f64 + 1.0 - n as f64) / n as f64;
            let s = (1.0 - t * t).max(0.0).sqrt();
            let w = if dim == 3 {
                let phi = golden * k as f64;
                Vector::from_vec(vec![phi.cos(), phi.sin()])
            } else {
                let mut idx = k as u64 + 1;
                loop {
                    let h = halton(idx, dim - 1);
                    let v = Vector::from_iterator(dim - 1, h.iter().map(|u| 2.0 * u - 1.0));
                    if v.norm() > 1e-3 {
                        break v.normalize();
                    }
                    idx += n as u64;
                }
            };
            &axis * t + (&comp * w) * s
        })
        .collect()
}

/// Log-spaced grid of `n` points over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}
