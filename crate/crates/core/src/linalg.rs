//! Small dense complex matrices.
//!
//! Every fiber in this crate is an `n x n` complex matrix with `n <= 8`, so a
//! plain row-major `Vec` with cyclic Jacobi for hermitian eigenproblems is
//! both fast enough and fully deterministic: the sweep order is fixed and no
//! BLAS/LAPACK backend is involved.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Dense square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CMat {
    n: usize,
    data: Vec<C64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        CMat { n, data: vec![ZERO; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn scalar(v: f64) -> Self {
        CMat { n: 1, data: vec![C64::new(v, 0.0)] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        CMat { n, data }
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, |i, j| if i == j { C64::new(diag[i], 0.0) } else { ZERO })
    }

    /// Builds a matrix from row-major real entries. Panics unless `entries.len()` is a square.
    pub fn from_real(n: usize, entries: &[f64]) -> Self {
        assert_eq!(entries.len(), n * n, "expected {} entries", n * n);
        CMat { n, data: entries.iter().map(|&v| C64::new(v, 0.0)).collect() }
    }

    pub fn from_vec(n: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), n * n, "expected {} entries", n * n);
        CMat { n, data }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn adjoint(&self) -> CMat {
        CMat::from_fn(self.n, |i, j| self.get(j, i).conj())
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        let n = self.n;
        assert_eq!(n, other.n);
        let mut out = vec![ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                let dst = &mut out[i * n..(i + 1) * n];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        CMat { n, data: out }
    }

    pub fn scale(&self, s: f64) -> CMat {
        CMat { n: self.n, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn scale_complex(&self, s: C64) -> CMat {
        CMat { n: self.n, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// `Re tr(self * other)`, the real inner product on hermitian matrices.
    pub fn real_inner(&self, other: &CMat) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for i in 0..n {
            for k in 0..n {
                acc += (self.data[i * n + k] * other.data[k * n + i]).re;
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest entry of `|self - self^dagger|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    pub fn hermitian_part(&self) -> CMat {
        CMat::from_fn(self.n, |i, j| (self.get(i, j) + self.get(j, i).conj()) * 0.5)
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.n;
        (0..n).all(|i| (0..n).all(|j| i == j || self.get(i, j).norm() <= tol))
    }

    pub fn diagonal_real(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i).re).collect()
    }

    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        eigh(self).values.first().copied().unwrap_or(0.0)
    }
}

impl Add for &CMat {
    type Output = CMat;
    fn add(self, rhs: &CMat) -> CMat {
        assert_eq!(self.n, rhs.n);
        CMat { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &CMat {
    type Output = CMat;
    fn sub(self, rhs: &CMat) -> CMat {
        assert_eq!(self.n, rhs.n);
        CMat { n: self.n, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl Mul for &CMat {
    type Output = CMat;
    fn mul(self, rhs: &CMat) -> CMat {
        self.matmul(rhs)
    }
}

impl Neg for &CMat {
    type Output = CMat;
    fn neg(self) -> CMat {
        CMat { n: self.n, data: self.data.iter().map(|v| -v).collect() }
    }
}

/// Spectral decomposition `a = V diag(values) V^dagger` of a hermitian matrix.
/// Eigenvalues are ascending; eigenvectors are the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl HermitianEigen {
    /// `V diag(f(values)) V^dagger`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> CMat {
        let fv: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        self.reconstruct(&fv)
    }

    pub fn reconstruct(&self, diag: &[f64]) -> CMat {
        let n = self.vectors.n();
        let v = &self.vectors;
        CMat::from_fn(n, |i, j| {
            let mut acc = ZERO;
            for (k, &d) in diag.iter().enumerate() {
                if d != 0.0 {
                    acc += v.get(i, k) * v.get(j, k).conj() * d;
                }
            }
            acc
        })
    }

    /// Projection onto the span of the eigenvectors with the given indices.
    pub fn projection(&self, keep: &[usize]) -> CMat {
        let mut diag = vec![0.0; self.values.len()];
        for &k in keep {
            diag[k] = 1.0;
        }
        self.reconstruct(&diag)
    }
}

const JACOBI_THRESHOLD: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 64;

/// Cyclic Jacobi eigensolver on the hermitian part of `a`.
///
/// Sweeps visit pairs `(p, q)` with `p < q` in row order and stop once the
/// off-diagonal Frobenius mass drops below `1e-13` times the total mass.
pub fn eigh(a: &CMat) -> HermitianEigen {
    let n = a.n();
    let mut m = a.hermitian_part();
    let mut v = CMat::identity(n);
    let total = m.frobenius_norm();
    if n <= 1 || total == 0.0 {
        let values = (0..n).map(|i| m.get(i, i).re).collect();
        return HermitianEigen { values, vectors: v };
    }
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m.get(i, j).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_THRESHOLD * total {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m.get(i, i).re).collect();
    order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = CMat::from_fn(n, |i, k| v.get(i, order[k]));
    HermitianEigen { values, vectors }
}

/// One complex Jacobi rotation annihilating `m[p][q]`.
fn rotate(m: &mut CMat, v: &mut CMat, p: usize, q: usize) {
    let n = m.n();
    let apq = m.get(p, q);
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    let app = m.get(p, p).re;
    let aqq = m.get(q, q).re;
    if r <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        m.set(p, q, ZERO);
        m.set(q, p, ZERO);
        return;
    }
    // Phase-align a_pq to a real number, then apply the real symmetric rotation.
    let phase = apq / r;
    let zeta = (aqq - app) / (2.0 * r);
    let t = if zeta >= 0.0 {
        1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
    } else {
        -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    // J = D R with D = diag(.., e^{-i phi} at q, ..)
    let jpp = C64::new(c, 0.0);
    let jpq = C64::new(s, 0.0);
    let jqp = phase.conj() * (-s);
    let jqq = phase.conj() * c;
    for k in 0..n {
        let akp = m.get(k, p);
        let akq = m.get(k, q);
        m.set(k, p, akp * jpp + akq * jqp);
        m.set(k, q, akp * jpq + akq * jqq);
    }
    for k in 0..n {
        let apk = m.get(p, k);
        let aqk = m.get(q, k);
        m.set(p, k, jpp.conj() * apk + jqp.conj() * aqk);
        m.set(q, k, jpq.conj() * apk + jqq.conj() * aqk);
    }
    m.set(p, q, ZERO);
    m.set(q, p, ZERO);
    m.set(p, p, C64::new(m.get(p, p).re, 0.0));
    m.set(q, q, C64::new(m.get(q, q).re, 0.0));
    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, vkp * jpp + vkq * jqp);
        v.set(k, q, vkp * jpq + vkq * jqq);
    }
}

/// `|x| = (x^dagger x)^{1/2}`.
pub fn abs(x: &CMat) -> CMat {
    if x.is_hermitian(0.0) {
        return eigh(x).apply(f64::abs);
    }
    sqrt_psd(&x.adjoint().matmul(x))
}

/// Square root of a positive semidefinite matrix; negative rounding noise is clipped.
pub fn sqrt_psd(a: &CMat) -> CMat {
    eigh(a).apply(|v| v.max(0.0).sqrt())
}

/// Lower Cholesky factor of a hermitian positive definite matrix, or `None`
/// when a pivot is not strictly positive.
pub fn cholesky(a: &CMat) -> Option<CMat> {
    let n = a.n();
    let mut l = CMat::zeros(n);
    for j in 0..n {
        let mut d = a.get(j, j).re;
        for k in 0..j {
            d -= l.get(j, k).norm_sqr();
        }
        if !(d > 0.0) {
            return None;
        }
        let djj = d.sqrt();
        l.set(j, j, C64::new(djj, 0.0));
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k).conj();
            }
            l.set(i, j, s / djj);
        }
    }
    Some(l)
}

/// Inverse and log-determinant of a hermitian positive definite matrix.
pub fn inverse_pd(a: &CMat) -> Option<(CMat, f64)> {
    let l = cholesky(a)?;
    let n = a.n();
    let logdet = 2.0 * (0..n).map(|i| l.get(i, i).re.ln()).sum::<f64>();
    // L^{-1} by forward substitution, then A^{-1} = L^{-dagger} L^{-1}.
    let mut linv = CMat::zeros(n);
    for col in 0..n {
        for i in 0..n {
            let mut s = if i == col { ONE } else { ZERO };
            for k in 0..i {
                s -= l.get(i, k) * linv.get(k, col);
            }
            linv.set(i, col, s / l.get(i, i));
        }
    }
    let inv = linv.adjoint().matmul(&linv);
    Some((inv.hermitian_part(), logdet))
}

/// Solves the real symmetric positive definite system `h x = b` in place
/// (Cholesky). Returns `false` when `h` is not numerically positive definite.
pub(crate) fn solve_spd(h: &mut [f64], b: &mut [f64], dim: usize) -> bool {
    for j in 0..dim {
        let mut d = h[j * dim + j];
        for k in 0..j {
            d -= h[j * dim + k] * h[j * dim + k];
        }
        if !(d > 0.0) {
            return false;
        }
        let djj = d.sqrt();
        h[j * dim + j] = djj;
        for i in j + 1..dim {
            let mut s = h[i * dim + j];
            for k in 0..j {
                s -= h[i * dim + k] * h[j * dim + k];
            }
            h[i * dim + j] = s / djj;
        }
    }
    for i in 0..dim {
        let mut s = b[i];
        for k in 0..i {
            s -= h[i * dim + k] * b[k];
        }
        b[i] = s / h[i * dim + i];
    }
    for i in (0..dim).rev() {
        let mut s = b[i];
        for k in i + 1..dim {
            s -= h[k * dim + i] * b[k];
        }
        b[i] = s / h[i * dim + i];
    }
    true
}

/// Orthonormal basis of the `n^2`-dimensional real space of `n x n` hermitian
/// matrices under `Re tr(AB)`: diagonal units, then symmetric and
/// antisymmetric off-diagonal pairs scaled by `1/sqrt 2`.
pub fn hermitian_basis(n: usize) -> Vec<CMat> {
    let mut basis = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut e = CMat::zeros(n);
        e.set(i, i, ONE);
        basis.push(e);
    }
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        for j in i + 1..n {
            let mut s = CMat::zeros(n);
            s.set(i, j, C64::new(h, 0.0));
            s.set(j, i, C64::new(h, 0.0));
            basis.push(s);
            let mut a = CMat::zeros(n);
            a.set(i, j, C64::new(0.0, h));
            a.set(j, i, C64::new(0.0, -h));
            basis.push(a);
        }
    }
    basis
}
