//! Matrix-valued fields on the finite torus `Z_M^d`.
//!
//! Storage is site-major: site `x = (x_1, …, x_d)` has linear index
//! `Σ x_k M^{d-1-k}` (row-major, `x_d` fastest) and owns `n²` consecutive
//! complex entries holding its `n × n` matrix, also row-major.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};
use crate::multiplier::{canonicalize, Frequency};
use crate::sampling::rng_for;

/// Hermitian flag tolerance on `‖f(x) - f(x)†‖_∞`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Positivity flag tolerance on the smallest eigenvalue.
pub const POSITIVE_TOL: f64 = 1e-10;

/// Shape shared by fields and spectra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub side: usize,
    pub dim: usize,
    pub n: usize,
}

impl Shape {
    pub fn new(side: usize, dim: usize, n: usize) -> Result<Self> {
        if side == 0 || dim == 0 || n == 0 {
            return Err(Error::InvalidParameter(format!("field shape needs M, d, n >= 1, got ({side}, {dim}, {n})")));
        }
        side.checked_pow(dim as u32)
            .and_then(|s| s.checked_mul(n * n))
            .ok_or_else(|| Error::InvalidParameter(format!("M^d n² overflows for ({side}, {dim}, {n})")))?;
        Ok(Shape { side, dim, n })
    }

    pub fn sites(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    fn entries(&self) -> usize {
        self.n * self.n
    }

    fn len(&self) -> usize {
        self.sites() * self.entries()
    }

    /// Site-index distance between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.side.pow((self.dim - 1 - axis) as u32)
    }

    pub fn coords(&self, mut site: usize) -> Vec<usize> {
        let mut c = vec![0; self.dim];
        for k in (0..self.dim).rev() {
            c[k] = site % self.side;
            site /= self.side;
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().fold(0, |acc, &c| acc * self.side + c % self.side)
    }

    /// Site reached from `site` by moving `delta` along `axis`, with wrap.
    pub fn neighbour(&self, site: usize, axis: usize, delta: i64) -> usize {
        let stride = self.stride(axis);
        let c = (site / stride) % self.side;
        let m = self.side as i64;
        let moved = ((c as i64 + delta) % m + m) % m;
        site - c * stride + moved as usize * stride
    }

    /// Site of `x + v`, with wrap.
    pub fn translate(&self, site: usize, v: &[i64]) -> usize {
        let m = self.side as i64;
        let mut c = self.coords(site);
        for (ck, vk) in c.iter_mut().zip(v) {
            *ck = ((*ck as i64 + vk) % m + m) as usize % self.side;
        }
        self.index(&c)
    }

    /// Canonical grid frequency `j/M` of a spectrum site.
    pub fn frequency(&self, site: usize) -> Frequency {
        let m = self.side as f64;
        Frequency::new(&self.coords(site).iter().map(|&j| canonicalize(j as f64 / m)).collect::<Vec<_>>())
    }

    fn check_same(&self, other: &Shape) -> Result<()> {
        if self != other {
            return Err(Error::ShapeMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// A function `Z_M^d → M_n(C)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusField {
    shape: Shape,
    values: Vec<C64>,
    #[serde(default)]
    hermitian: bool,
    #[serde(default)]
    positive: bool,
}

/// The unnormalized Fourier transform of a [`TorusField`], indexed by `j ∈ Z_M^d`
/// for the frequency `j/M`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumField {
    shape: Shape,
    values: Vec<C64>,
}

macro_rules! site_access {
    ($t:ty) => {
        impl $t {
            pub fn shape(&self) -> Shape {
                self.shape
            }

            pub fn side(&self) -> usize {
                self.shape.side
            }

            pub fn dim(&self) -> usize {
                self.shape.dim
            }

            pub fn n(&self) -> usize {
                self.shape.n
            }

            pub fn sites(&self) -> usize {
                self.shape.sites()
            }

            pub fn values(&self) -> &[C64] {
                &self.values
            }

            pub fn site_slice(&self, site: usize) -> &[C64] {
                let e = self.shape.entries();
                &self.values[site * e..(site + 1) * e]
            }

            pub fn site(&self, site: usize) -> CMat {
                CMat::from_vec(self.shape.n, self.site_slice(site).to_vec())
            }

            /// Largest entrywise modulus of the difference.
            pub fn max_abs_diff(&self, other: &Self) -> f64 {
                assert_eq!(self.shape, other.shape);
                self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
            }

            pub fn max_abs(&self) -> f64 {
                self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
            }

            /// `Σ_x ‖F(x)‖²_HS`.
            pub fn hs_norm_sq(&self) -> f64 {
                self.values.iter().map(|v| v.norm_sqr()).sum()
            }
        }
    };
}

site_access!(TorusField);
site_access!(SpectrumField);

impl TorusField {
    pub fn zeros(side: usize, dim: usize, n: usize) -> Result<Self> {
        let shape = Shape::new(side, dim, n)?;
        Ok(TorusField { shape, values: vec![C64::new(0.0, 0.0); shape.len()], hermitian: true, positive: true })
    }

    pub fn from_values(side: usize, dim: usize, n: usize, values: Vec<C64>) -> Result<Self> {
        let shape = Shape::new(side, dim, n)?;
        if values.len() != shape.len() {
            return Err(Error::ShapeMismatch(format!("expected {} entries, got {}", shape.len(), values.len())));
        }
        Ok(TorusField { shape, values, hermitian: false, positive: false })
    }

    pub fn from_fn(side: usize, dim: usize, n: usize, mut f: impl FnMut(&[usize]) -> CMat) -> Result<Self> {
        let shape = Shape::new(side, dim, n)?;
        let mut values = Vec::with_capacity(shape.len());
        for site in 0..shape.sites() {
            let m = f(&shape.coords(site));
            if m.n() != n {
                return Err(Error::ShapeMismatch(format!(
                    "site matrix is {}x{}, field fiber is {n}x{n}",
                    m.n(),
                    m.n()
                )));
            }
            values.extend_from_slice(m.as_slice());
        }
        Ok(TorusField { shape, values, hermitian: false, positive: false })
    }

    /// Scalar field (`n = 1`) from real values.
    pub fn scalar(side: usize, dim: usize, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        TorusField::from_fn(side, dim, 1, |x| CMat::scalar(f(x)))
            .map(|g| g.flag_hermitian().expect("real scalars are hermitian"))
    }

    /// `c` at every site.
    pub fn constant(side: usize, dim: usize, c: &CMat) -> Result<Self> {
        TorusField::from_fn(side, dim, c.n(), |_| c.clone())
    }

    /// `δ_0 · I_n`.
    pub fn delta(side: usize, dim: usize, n: usize) -> Result<Self> {
        let mut f = TorusField::zeros(side, dim, n)?;
        for i in 0..n {
            f.values[i * n + i] = C64::new(1.0, 0.0);
        }
        Ok(f)
    }

    /// Hermitian field with i.i.d. Gaussian entries (GUE-like fibers), seeded per site.
    pub fn random_hermitian(side: usize, dim: usize, n: usize, seed: u64) -> Result<Self> {
        let shape = Shape::new(side, dim, n)?;
        let mut values = Vec::with_capacity(shape.len());
        for site in 0..shape.sites() {
            values.extend_from_slice(random_hermitian_matrix(&mut rng_for(seed, site as u64), n).as_slice());
        }
        Ok(TorusField { shape, values, hermitian: true, positive: false })
    }

    /// Positive semidefinite field `G(x) G(x)† / n` with Gaussian `G(x)`.
    pub fn random_positive(side: usize, dim: usize, n: usize, seed: u64) -> Result<Self> {
        let shape = Shape::new(side, dim, n)?;
        let mut values = Vec::with_capacity(shape.len());
        for site in 0..shape.sites() {
            let mut rng = rng_for(seed, site as u64);
            let g = CMat::from_fn(n, |_, _| gaussian_c64(&mut rng));
            values.extend_from_slice(g.matmul(&g.adjoint()).scale(1.0 / n as f64).hermitian_part().as_slice());
        }
        Ok(TorusField { shape, values, hermitian: true, positive: true })
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_positive(&self) -> bool {
        self.positive
    }

    /// Largest hermitian defect over the sites.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.sites()).map(|s| self.site(s).hermitian_defect()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over the sites (of the hermitian part).
    pub fn min_eigenvalue(&self) -> f64 {
        (0..self.sites()).map(|s| self.site(s).hermitian_part().min_eigenvalue()).fold(f64::INFINITY, f64::min)
    }

    /// Marks the field hermitian after checking every site.
    pub fn flag_hermitian(mut self) -> Result<Self> {
        for s in 0..self.sites() {
            let defect = self.site(s).hermitian_defect();
            if defect > HERMITIAN_TOL {
                return Err(Error::NonHermitian { index: s, defect });
            }
        }
        self.hermitian = true;
        Ok(self)
    }

    /// Marks the field positive after checking hermiticity and every site's spectrum.
    pub fn flag_positive(self) -> Result<Self> {
        let mut f = self.flag_hermitian()?;
        let low = f.min_eigenvalue();
        if low < -POSITIVE_TOL {
            return Err(Error::InvalidParameter(format!("field has eigenvalue {low:e} below -{POSITIVE_TOL:e}")));
        }
        f.positive = true;
        Ok(f)
    }

    fn with_flags_of(self, src: &TorusField) -> Self {
        self.with_flags(src.hermitian, src.positive)
    }

    /// Sets flags without re-validation; hermitian results are symmetrized so
    /// transform round-off cannot break the flag.
    fn with_flags(mut self, hermitian: bool, positive: bool) -> Self {
        self.hermitian = hermitian;
        self.positive = positive;
        if self.hermitian {
            self.symmetrize();
        }
        self
    }

    /// Replaces every site by its hermitian part.
    fn symmetrize(&mut self) {
        let n = self.shape.n;
        for site in self.values.chunks_mut(n * n) {
            for i in 0..n {
                site[i * n + i].im = 0.0;
                for j in i + 1..n {
                    let avg = 0.5 * (site[i * n + j] + site[j * n + i].conj());
                    site[i * n + j] = avg;
                    site[j * n + i] = avg.conj();
                }
            }
        }
    }

    pub fn map_sites(&self, mut f: impl FnMut(usize, &CMat) -> CMat) -> TorusField {
        let mut values = Vec::with_capacity(self.values.len());
        for s in 0..self.sites() {
            values.extend_from_slice(f(s, &self.site(s)).as_slice());
        }
        TorusField { shape: self.shape, values, hermitian: false, positive: false }
    }

    pub fn add(&self, other: &TorusField) -> Result<TorusField> {
        self.shape.check_same(&other.shape)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(TorusField {
            shape: self.shape,
            values,
            hermitian: self.hermitian && other.hermitian,
            positive: self.positive && other.positive,
        })
    }

    pub fn sub(&self, other: &TorusField) -> Result<TorusField> {
        self.shape.check_same(&other.shape)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(TorusField { shape: self.shape, values, hermitian: self.hermitian && other.hermitian, positive: false })
    }

    pub fn scale(&self, c: f64) -> TorusField {
        TorusField {
            shape: self.shape,
            values: self.values.iter().map(|v| v * c).collect(),
            hermitian: self.hermitian,
            positive: self.positive && c >= 0.0,
        }
    }

    /// `x ↦ f(x + v)`.
    pub fn shifted(&self, v: &[i64]) -> Result<TorusField> {
        if v.len() != self.dim() {
            return Err(Error::ShapeMismatch(format!("shift has {} coordinates, torus has {}", v.len(), self.dim())));
        }
        let e = self.shape.entries();
        let mut values = vec![C64::new(0.0, 0.0); self.values.len()];
        for (s, out) in values.chunks_mut(e).enumerate() {
            out.copy_from_slice(self.site_slice(self.shape.translate(s, v)));
        }
        Ok(TorusField { shape: self.shape, values, hermitian: self.hermitian, positive: self.positive })
    }

    /// Writes the binary format: `TFLD`, `u64 M`, `u32 d`, `u32 n`, `u32 flags`
    /// (bit 0 hermitian, bit 1 positive), then `(re, im)` little-endian `f64` pairs in index order.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(b"TFLD")?;
        out.write_all(&(self.side() as u64).to_le_bytes())?;
        out.write_all(&(self.dim() as u32).to_le_bytes())?;
        out.write_all(&(self.n() as u32).to_le_bytes())?;
        let flags = self.hermitian as u32 | (self.positive as u32) << 1;
        out.write_all(&flags.to_le_bytes())?;
        for v in &self.values {
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads the binary format; flags are re-validated.
    pub fn read_binary<R: Read>(mut input: R) -> Result<TorusField> {
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != b"TFLD" {
            return Err(Error::Format("bad magic".into()));
        }
        let mut b8 = [0u8; 8];
        let mut b4 = [0u8; 4];
        input.read_exact(&mut b8)?;
        let side = usize::try_from(u64::from_le_bytes(b8)).map_err(|_| Error::Format("side too large".into()))?;
        input.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        input.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        input.read_exact(&mut b4)?;
        let flags = u32::from_le_bytes(b4);
        let shape = Shape::new(side, dim, n).map_err(|e| Error::Format(e.to_string()))?;
        let mut values = Vec::with_capacity(shape.len());
        for _ in 0..shape.len() {
            input.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            input.read_exact(&mut b8)?;
            values.push(C64::new(re, f64::from_le_bytes(b8)));
        }
        if input.read(&mut b4)? != 0 {
            return Err(Error::Format("trailing bytes after field data".into()));
        }
        let f = TorusField { shape, values, hermitian: false, positive: false };
        match flags {
            0 => Ok(f),
            1 => f.flag_hermitian(),
            3 => f.flag_positive(),
            other => Err(Error::Format(format!("unknown flag bits {other:#b}"))),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses the JSON format; shape and flags are re-validated.
    pub fn from_json(text: &str) -> Result<TorusField> {
        let raw: TorusField = serde_json::from_str(text)?;
        let f = TorusField::from_values(raw.shape.side, raw.shape.dim, raw.shape.n, raw.values)?;
        match (raw.hermitian, raw.positive) {
            (_, true) => f.flag_positive(),
            (true, false) => f.flag_hermitian(),
            _ => Ok(f),
        }
    }
}

fn gaussian_c64<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// `(G + G†)/2` with standard complex Gaussian `G`.
pub fn random_hermitian_matrix<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    CMat::from_fn(n, |_, _| gaussian_c64(rng)).hermitian_part()
}

impl SpectrumField {
    /// Canonical frequency of site `j`.
    pub fn frequency(&self, site: usize) -> Frequency {
        self.shape.frequency(site)
    }

    /// Multiplies every frequency by a scalar symbol.
    pub fn apply_symbol(&self, mut symbol: impl FnMut(&Frequency) -> C64) -> SpectrumField {
        let e = self.shape.entries();
        let mut values = self.values.clone();
        for (s, chunk) in values.chunks_mut(e).enumerate() {
            let m = symbol(&self.frequency(s));
            chunk.iter_mut().for_each(|v| *v *= m);
        }
        SpectrumField { shape: self.shape, values }
    }
}

/// In-place multidimensional FFT of every matrix entry.
fn transform(shape: Shape, values: &mut [C64], fft: &Arc<dyn Fft<f64>>) {
    let m = shape.side;
    let e = shape.entries();
    let mut line = vec![C64::new(0.0, 0.0); m];
    let mut scratch = vec![C64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..shape.dim {
        let stride = shape.stride(axis);
        for outer in 0..shape.sites() / (m * stride) {
            for inner in 0..stride {
                let base = outer * m * stride + inner;
                for entry in 0..e {
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = values[(base + j * stride) * e + entry];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (j, v) in line.iter().enumerate() {
                        values[(base + j * stride) * e + entry] = *v;
                    }
                }
            }
        }
    }
}

/// `F(ξ) = Σ_x f(x) e^{-2πi⟨x,ξ⟩}` at `ξ = j/M`.
pub fn dft(f: &TorusField) -> SpectrumField {
    let mut values = f.values.clone();
    let fft = FftPlanner::new().plan_fft_forward(f.side());
    transform(f.shape, &mut values, &fft);
    SpectrumField { shape: f.shape, values }
}

/// Inverse of [`dft`] (normalized by `M^{-d}`); the result carries no flags.
pub fn idft(spec: &SpectrumField) -> TorusField {
    let mut values = spec.values.clone();
    let fft = FftPlanner::new().plan_fft_inverse(spec.side());
    transform(spec.shape, &mut values, &fft);
    let norm = 1.0 / spec.sites() as f64;
    values.iter_mut().for_each(|v| *v *= norm);
    TorusField { shape: spec.shape, values, hermitian: false, positive: false }
}

/// Implementation choice for operators with two independent evaluations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Path {
    Spatial,
    Spectral,
    Series,
}

/// Canonical offsets of the Euclidean ball `|y| <= N` as torus sites, in site order.
fn ball_sites(shape: Shape, radius: f64) -> Vec<usize> {
    let top = crate::lattice::exact_floor_square(radius);
    let m = shape.side as i64;
    (0..shape.sites())
        .filter(|&s| {
            let r2: u64 = shape
                .coords(s)
                .iter()
                .map(|&c| {
                    let c = c as i64;
                    let rep = if 2 * c > m { c - m } else { c };
                    (rep * rep) as u64
                })
                .sum();
            r2 <= top
        })
        .collect()
}

fn check_embedding(shape: Shape, radius: f64) -> Result<()> {
    let reach = crate::lattice::isqrt(crate::lattice::exact_floor_square(radius)) as usize;
    if 2 * reach + 1 > shape.side {
        return Err(Error::Embedding { side: shape.side, radius });
    }
    Ok(())
}

/// Periodized ball average `|B_N ∩ Z^d|⁻¹ Σ_{|y| <= N} f(x - y)`.
///
/// The spatial path sums shifted copies; the spectral path multiplies by the
/// transform of the normalized ball indicator, which equals the ball
/// multiplier at the grid frequencies. Requires `2⌊N⌋ + 1 <= M`.
pub fn convolve_ball(f: &TorusField, radius: f64, path: Path) -> Result<TorusField> {
    check_embedding(f.shape, radius)?;
    let offsets = ball_sites(f.shape, radius);
    let out = match path {
        Path::Spatial => {
            let e = f.shape.entries();
            let mut values = vec![C64::new(0.0, 0.0); f.values.len()];
            let inv = 1.0 / offsets.len() as f64;
            for (x, out) in values.chunks_mut(e).enumerate() {
                let xc = f.shape.coords(x);
                for &y in &offsets {
                    let yc = f.shape.coords(y);
                    let src: Vec<usize> = xc.iter().zip(&yc).map(|(a, b)| (a + f.side() - b) % f.side()).collect();
                    for (o, v) in out.iter_mut().zip(f.site_slice(f.shape.index(&src))) {
                        *o += v;
                    }
                }
                out.iter_mut().for_each(|v| *v *= inv);
            }
            TorusField { shape: f.shape, values, hermitian: false, positive: false }
        }
        Path::Spectral | Path::Series => {
            let symbol = ball_symbol(f.shape, &offsets);
            let spec = dft(f);
            let mut values = spec.values;
            let e = f.shape.entries();
            for (chunk, m) in values.chunks_mut(e).zip(&symbol) {
                chunk.iter_mut().for_each(|v| *v *= m);
            }
            idft(&SpectrumField { shape: f.shape, values })
        }
    };
    Ok(out.with_flags_of(f))
}

/// Ball multiplier at every grid frequency, via the transform of the ball indicator.
pub fn ball_symbol_grid(side: usize, dim: usize, radius: f64) -> Result<Vec<f64>> {
    let shape = Shape::new(side, dim, 1)?;
    check_embedding(shape, radius)?;
    Ok(ball_symbol(shape, &ball_sites(shape, radius)))
}

fn ball_symbol(shape: Shape, offsets: &[usize]) -> Vec<f64> {
    let scalar = Shape { n: 1, ..shape };
    let mut values = vec![C64::new(0.0, 0.0); scalar.sites()];
    let w = 1.0 / offsets.len() as f64;
    for &s in offsets {
        values[s] = C64::new(w, 0.0);
    }
    let fft = FftPlanner::new().plan_fft_forward(shape.side);
    transform(scalar, &mut values, &fft);
    values.iter().map(|v| v.re).collect()
}

/// Average over every offset `|y| <= N` of `Z^d` reduced mod `M`, counted with multiplicity.
///
/// Unlike [`convolve_ball`] this does not require the ball to embed.
pub fn convolve_ball_wrapped(f: &TorusField, radius: f64) -> Result<TorusField> {
    let spec = crate::lattice::BallSpec::euclidean(f.dim(), radius)?;
    let pts = crate::lattice::enumerate_ball(&spec)?;
    let e = f.shape.entries();
    let mut values = vec![C64::new(0.0, 0.0); f.values.len()];
    let inv = 1.0 / pts.len() as f64;
    for (x, out) in values.chunks_mut(e).enumerate() {
        for y in &pts {
            let neg: Vec<i64> = y.iter().map(|v| -v).collect();
            for (o, v) in out.iter_mut().zip(f.site_slice(f.shape.translate(x, &neg))) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|v| *v *= inv);
    }
    Ok(TorusField { shape: f.shape, values, hermitian: false, positive: false }.with_flags_of(f))
}

/// `Δ_k f(x) = f(x) - f(x + e_k)`.
pub fn discrete_derivative(f: &TorusField, axis: usize) -> Result<TorusField> {
    if axis >= f.dim() {
        return Err(Error::InvalidParameter(format!("axis {axis} out of range for d = {}", f.dim())));
    }
    let e = f.shape.entries();
    let mut values = f.values.clone();
    for (s, out) in values.chunks_mut(e).enumerate() {
        for (o, v) in out.iter_mut().zip(f.site_slice(f.shape.neighbour(s, axis, 1))) {
            *o -= v;
        }
    }
    Ok(TorusField { shape: f.shape, values, hermitian: f.hermitian, positive: false })
}

/// `ℒ_k f = ¼ Δ_k* Δ_k f = ¼ (2f(x) - f(x + e_k) - f(x - e_k))`.
pub fn partial_laplacian(f: &TorusField, axis: usize) -> Result<TorusField> {
    if axis >= f.dim() {
        return Err(Error::InvalidParameter(format!("axis {axis} out of range for d = {}", f.dim())));
    }
    let e = f.shape.entries();
    let mut values = vec![C64::new(0.0, 0.0); f.values.len()];
    for (s, out) in values.chunks_mut(e).enumerate() {
        let up = f.site_slice(f.shape.neighbour(s, axis, 1));
        let down = f.site_slice(f.shape.neighbour(s, axis, -1));
        for (((o, c), u), d) in out.iter_mut().zip(f.site_slice(s)).zip(up).zip(down) {
            *o = 0.25 * (2.0 * c - u - d);
        }
    }
    Ok(TorusField { shape: f.shape, values, hermitian: f.hermitian, positive: false })
}

/// `ℒ = Σ_k ℒ_k`, with symbol `Σ_k sin²(πξ_k)`.
pub fn laplacian(f: &TorusField) -> TorusField {
    let mut acc = partial_laplacian(f, 0).expect("axis 0 exists");
    for k in 1..f.dim() {
        acc = acc.add(&partial_laplacian(f, k).expect("axis in range")).expect("same shape");
    }
    acc.hermitian = f.hermitian;
    acc
}

/// Truncation tolerance for the series path of the heat semigroup.
pub const SERIES_TAIL: f64 = 1e-12;

/// Poisson weights `e^{-s} s^j / j!` for `j = 0..=J`, with `J` the first index at
/// which the remaining tail is provably below [`SERIES_TAIL`].
///
/// For `j + 1 > s` the tail after `j` is at most `w_{j+1} / (1 - s/(j+2))`.
pub fn poisson_weights(s: f64) -> Vec<f64> {
    let mut weights = Vec::new();
    let mut log_w = -s;
    let mut j = 0usize;
    loop {
        weights.push(log_w.exp());
        let log_next = log_w + if s > 0.0 { s.ln() - ((j + 1) as f64).ln() } else { f64::NEG_INFINITY };
        let ratio = s / (j + 2) as f64;
        if ratio < 1.0 && log_next.exp() / (1.0 - ratio) <= SERIES_TAIL {
            return weights;
        }
        log_w = log_next;
        j += 1;
    }
}

/// One-dimensional kernel of `e^{-tℒ_k}` on `Z_M`: `e^{-t/2} Σ_j (t/2)^j/j! 𝒢^j δ_0`
/// with `𝒢 = (S + S⁻¹)/2`.
pub fn heat_kernel_1d(side: usize, t: f64) -> Vec<f64> {
    let weights = poisson_weights(t / 2.0);
    let mut power = vec![0.0; side];
    power[0] = 1.0;
    let mut kernel = vec![0.0; side];
    for (j, w) in weights.iter().enumerate() {
        if j > 0 {
            let prev = power.clone();
            for (i, p) in power.iter_mut().enumerate() {
                *p = 0.5 * (prev[(i + 1) % side] + prev[(i + side - 1) % side]);
            }
        }
        for (k, p) in kernel.iter_mut().zip(&power) {
            *k += w * p;
        }
    }
    kernel
}

/// `P_t f` with symbol `e^{-t Σ sin²(πξ_k)}`.
///
/// The spectral path multiplies the transform; the series path convolves with
/// the truncated Poisson series of `𝒢_k` along axes `1..d` in order.
pub fn heat_semigroup(f: &TorusField, t: f64, path: Path) -> Result<TorusField> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("heat time must be finite and nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    let out = match path {
        Path::Spectral => idft(&dft(f).apply_symbol(|xi| C64::new(crate::multiplier::heat_multiplier(t, xi), 0.0))),
        Path::Series | Path::Spatial => {
            let kernel = heat_kernel_1d(f.side(), t);
            let mut cur = f.clone();
            for axis in 0..f.dim() {
                cur = axis_convolve(&cur, axis, &kernel);
            }
            cur
        }
    };
    Ok(out.with_flags_of(f))
}

/// `g(x) = Σ_j K(j) f(x - j e_axis)`.
fn axis_convolve(f: &TorusField, axis: usize, kernel: &[f64]) -> TorusField {
    let e = f.shape.entries();
    let mut values = vec![C64::new(0.0, 0.0); f.values.len()];
    for (s, out) in values.chunks_mut(e).enumerate() {
        for (j, k) in kernel.iter().enumerate() {
            if *k == 0.0 {
                continue;
            }
            let src = f.site_slice(f.shape.neighbour(s, axis, -(j as i64)));
            for (o, v) in out.iter_mut().zip(src) {
                *o += v * k;
            }
        }
    }
    TorusField { shape: f.shape, values, hermitian: false, positive: false }
}

/// Splits `f` by frequency: `f1` keeps grid frequencies with `|V_ξ| <= d/2`, `f2` the rest.
pub fn frequency_split(f: &TorusField) -> (TorusField, TorusField) {
    let spec = dft(f);
    let low = |xi: &Frequency| 2 * xi.v_count() <= xi.dim();
    let part = |keep_low: bool| {
        let kept = spec.apply_symbol(|xi| C64::new(if low(xi) == keep_low { 1.0 } else { 0.0 }, 0.0));
        idft(&kept).with_flags(f.hermitian, false)
    };
    (part(true), part(false))
}

/// `x ↦ e^{2πi⟨t,x⟩} f(x)` with `x_k ∈ {0, …, M-1}`.
pub fn modulate(f: &TorusField, t: &[f64]) -> Result<TorusField> {
    if t.len() != f.dim() {
        return Err(Error::ShapeMismatch(format!("modulation has {} coordinates, torus has {}", t.len(), f.dim())));
    }
    let e = f.shape.entries();
    let mut values = f.values.clone();
    for (s, out) in values.chunks_mut(e).enumerate() {
        let phase: f64 = f.shape.coords(s).iter().zip(t).map(|(&x, tk)| canonicalize(x as f64 * tk)).sum();
        let z = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * phase);
        out.iter_mut().for_each(|v| *v *= z);
    }
    Ok(TorusField { shape: f.shape, values, hermitian: false, positive: false })
}

/// Shapes `(M, d)` cycled through by [`seeded_corpus`].
const CORPUS_SHAPES: [(usize, usize); 8] = [(4, 1), (8, 1), (16, 1), (4, 2), (8, 2), (16, 2), (4, 3), (8, 3)];

/// Deterministic test corpus: field `i` has shape `CORPUS_SHAPES[i mod 8]`,
/// fiber size `1 + (i mod 3)`, and alternates hermitian and positive fibers.
pub fn seeded_corpus(count: usize, seed: u64) -> Vec<TorusField> {
    (0..count)
        .map(|i| {
            let (side, dim) = CORPUS_SHAPES[i % CORPUS_SHAPES.len()];
            let n = 1 + i % 3;
            let s = crate::sampling::derive_seed(seed, i as u64);
            if i % 2 == 0 {
                TorusField::random_hermitian(side, dim, n, s)
            } else {
                TorusField::random_positive(side, dim, n, s)
            }
            .expect("corpus shapes are valid")
        })
        .collect()
}
