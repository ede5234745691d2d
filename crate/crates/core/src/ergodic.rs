//! Finite dynamical systems on `Z_M^d` acting on matrix-valued fields:
//! ergodic ball averages, the fixed-point expectation, transference and
//! bilaterally almost uniform convergence certificates.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{convolve_ball, Path, Shape, TorusField};
use crate::lattice::{enumerate_ball, BallSpec};
use crate::linalg::{eigh, CMat};
use crate::ncmax::{field_lp_norm, field_maximal_norm, lp_of, scalar_maximal_norm, MajorantOptions};

/// `Z^d` acting on fields over `Z_M^d` by translation, optionally conjugated
/// by commuting diagonal unitaries `U_k = diag(ω^{e_{k,i}})` with `ω = e^{2πi/M}`.
///
/// Storing the exponents keeps `U_k^M = I` and commutativity exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftSystem {
    shape: Shape,
    /// `twist[k][i]` is the exponent of `ω` in entry `i` of `U_k`.
    twist: Option<Vec<Vec<u64>>>,
    /// Enclosing-cube constant: `B_t ⊆ Q_{c_G t}`.
    cube_constant: u64,
}

impl ShiftSystem {
    pub fn shift(side: usize, dim: usize, n: usize) -> Result<Self> {
        Ok(ShiftSystem { shape: Shape::new(side, dim, n)?, twist: None, cube_constant: 1 })
    }

    /// Twisted shift; `exponents` has one row of length `n` per axis.
    pub fn twisted(side: usize, dim: usize, n: usize, exponents: Vec<Vec<u64>>) -> Result<Self> {
        let shape = Shape::new(side, dim, n)?;
        if exponents.len() != dim || exponents.iter().any(|row| row.len() != n) {
            return Err(Error::ShapeMismatch(format!("twist must have {dim} rows of length {n}")));
        }
        let exponents = exponents.into_iter().map(|row| row.into_iter().map(|e| e % side as u64).collect()).collect();
        Ok(ShiftSystem { shape, twist: Some(exponents), cube_constant: 1 })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn cube_constant(&self) -> u64 {
        self.cube_constant
    }

    pub fn is_pure_shift(&self) -> bool {
        self.twist.as_ref().map_or(true, |t| t.iter().flatten().all(|&e| e == 0))
    }

    fn omega_power(&self, e: i64) -> C64 {
        let m = self.shape.side as i64;
        C64::from_polar(1.0, TAU * e.rem_euclid(m) as f64 / m as f64)
    }

    /// `U_axis` as a matrix.
    pub fn twist_matrix(&self, axis: usize) -> CMat {
        let n = self.shape.n;
        match &self.twist {
            None => CMat::identity(n),
            Some(t) => {
                CMat::from_fn(n, |i, j| if i == j { self.omega_power(t[axis][i] as i64) } else { C64::new(0.0, 0.0) })
            }
        }
    }

    /// Phase exponents of `W(v) = Π_k U_k^{v_k}`.
    fn phases(&self, v: &[i64]) -> Vec<i64> {
        match &self.twist {
            None => vec![0; self.shape.n],
            Some(t) => (0..self.shape.n).map(|i| v.iter().zip(t).map(|(vk, row)| vk * row[i] as i64).sum()).collect(),
        }
    }

    /// Largest `‖U_j U_k − U_k U_j‖` and `‖U_k^M − I‖` over all axes, from explicit matrix products.
    pub fn twist_defects(&self) -> (f64, f64) {
        let us: Vec<CMat> = (0..self.shape.dim).map(|k| self.twist_matrix(k)).collect();
        let mut commutator: f64 = 0.0;
        for a in &us {
            for b in &us {
                commutator = commutator.max(a.matmul(b).max_abs_diff(&b.matmul(a)));
            }
        }
        let id = CMat::identity(self.shape.n);
        let mut period: f64 = 0.0;
        for u in &us {
            let mut acc = id.clone();
            for _ in 0..self.shape.side {
                acc = acc.matmul(u);
            }
            period = period.max(acc.max_abs_diff(&id));
        }
        (commutator, period)
    }

    fn check(&self, f: &TorusField) -> Result<()> {
        if f.shape() != self.shape {
            return Err(Error::ShapeMismatch(format!(
                "field shape {:?} does not match system {:?}",
                f.shape(),
                self.shape
            )));
        }
        Ok(())
    }
}

/// `(α(v) f)(x) = W(v) f(x + v) W(v)†`.
pub fn apply_action(sys: &ShiftSystem, v: &[i64], f: &TorusField) -> Result<TorusField> {
    sys.check(f)?;
    if v.len() != sys.shape.dim {
        return Err(Error::ShapeMismatch(format!("shift has {} coordinates, expected {}", v.len(), sys.shape.dim)));
    }
    let shifted = f.shifted(v)?;
    if sys.is_pure_shift() {
        return Ok(shifted);
    }
    let ph = sys.phases(v);
    let n = sys.shape.n;
    let factors: Vec<C64> = (0..n * n).map(|k| sys.omega_power(ph[k / n] - ph[k % n])).collect();
    let values = shifted.values().chunks(n * n).flat_map(|c| c.iter().zip(&factors).map(|(a, b)| a * b)).collect();
    let out = TorusField::from_values(sys.shape.side, sys.shape.dim, n, values)?;
    // Conjugation by a unitary preserves both flags.
    carry_flags(out, f)
}

fn carry_flags(out: TorusField, like: &TorusField) -> Result<TorusField> {
    let out = if like.is_hermitian() { out.flag_hermitian()? } else { out };
    if like.is_positive() {
        out.flag_positive()
    } else {
        Ok(out)
    }
}

/// `|B_N ∩ Z^d|⁻¹ Σ_{y ∈ B_N} α(y) f`, summing over the true lattice ball (wrapped on the torus).
pub fn ergodic_average(sys: &ShiftSystem, f: &TorusField, radius: f64) -> Result<TorusField> {
    sys.check(f)?;
    let points = enumerate_ball(&BallSpec::euclidean(sys.shape.dim, radius)?)?;
    let mut acc = vec![C64::new(0.0, 0.0); f.values().len()];
    for y in &points {
        let moved = apply_action(sys, y, f)?;
        for (a, v) in acc.iter_mut().zip(moved.values()) {
            *a += v;
        }
    }
    let inv = 1.0 / points.len() as f64;
    acc.iter_mut().for_each(|v| *v *= inv);
    carry_flags(TorusField::from_values(sys.shape.side, sys.shape.dim, sys.shape.n, acc)?, f)
}

/// Conditional expectation onto the fixed points of the action: the group average
/// `M^{-d} Σ_v α(v) f`.
///
/// Entry `(i, j)` of `α(v) f(x)` carries the character `ω^{v·δ}` with
/// `δ_k = e_{k,i} − e_{k,j}`, so the average keeps a single Fourier mode of each entry:
/// `F f(x)_{ij} = ω^{−x·δ} M^{-d} Σ_u ω^{u·δ} f(u)_{ij}`.
pub fn fixed_point_expectation(sys: &ShiftSystem, f: &TorusField) -> Result<TorusField> {
    sys.check(f)?;
    let shape = sys.shape;
    let n = shape.n;
    let sites = shape.sites();
    let coords: Vec<Vec<i64>> = (0..sites).map(|s| shape.coords(s).into_iter().map(|c| c as i64).collect()).collect();
    let delta = |i: usize, j: usize| -> Vec<i64> {
        match &sys.twist {
            None => vec![0; shape.dim],
            Some(t) => t.iter().map(|row| row[i] as i64 - row[j] as i64).collect(),
        }
    };
    let dot = |x: &[i64], d: &[i64]| x.iter().zip(d).map(|(a, b)| a * b).sum::<i64>();
    let mut values = vec![C64::new(0.0, 0.0); f.values().len()];
    for i in 0..n {
        for j in 0..n {
            let d = delta(i, j);
            let k = i * n + j;
            let mut coeff = C64::new(0.0, 0.0);
            for (s, x) in coords.iter().enumerate() {
                coeff += sys.omega_power(dot(x, &d)) * f.values()[s * n * n + k];
            }
            coeff /= sites as f64;
            for (s, x) in coords.iter().enumerate() {
                values[s * n * n + k] = sys.omega_power(-dot(x, &d)) * coeff;
            }
        }
    }
    carry_flags(TorusField::from_values(shape.side, shape.dim, n, values)?, f)
}

/// Worst case of `‖𝒜_N g‖_∞ / ‖g‖_∞` for `g = h − α(v)h`: the overlap defect
/// `|B_N △ (B_N + v)| / |B_N ∩ Z^d|`.
pub fn coboundary_bound(dim: usize, radius: f64, shift: &[i64]) -> Result<f64> {
    let spec = BallSpec::euclidean(dim, radius)?;
    let sym = crate::lattice::symmetric_difference_count(&spec, shift)?;
    let count = enumerate_ball(&spec)?.len();
    Ok(sym as f64 / count as f64)
}

/// Largest site-wise operator norm of a field.
pub fn field_sup_norm(f: &TorusField) -> f64 {
    (0..f.sites())
        .map(|s| crate::ncmax::schatten_norm(&f.site(s), f64::INFINITY).unwrap_or(f64::NAN))
        .fold(0.0, f64::max)
}

/// One row of a transference comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferenceReport {
    pub dim: usize,
    pub side: usize,
    pub p: f64,
    pub cube_radius: u64,
    pub eps: f64,
    pub radii: Vec<u64>,
    /// Half-width `⌊c_G R (1 + ε/d)⌋` of the localization window.
    pub window: u64,
    pub companion_side: usize,
    /// `‖sup_t 𝒜_t f‖_p` under the normalized counting measure.
    pub lhs: f64,
    /// `(Σ_x ‖sup_t ℳ_t φ_x‖_p^p / (M^d |Q_R|))^{1/p}` over the full companion torus.
    pub transferred: f64,
    /// Largest `‖sup_t ℳ_t φ_x‖_p / ‖φ_x‖_p` over the localized functions.
    pub maximal_constant: f64,
    /// `(1 + slack) · maximal_constant · ‖f‖_p`.
    pub rhs: f64,
    pub slack: f64,
    /// `max_t ‖𝒜_t f − ℳ_t f‖_∞`, entrywise.
    pub identity_defect: f64,
    pub holds: bool,
}

/// `((1 + ε/d) + 1/(2 c_G R))^{d/p} − 1`.
pub fn transference_slack(dim: usize, p: f64, cube_radius: f64, eps: f64, cube_constant: f64) -> f64 {
    let d = dim as f64;
    ((1.0 + eps / d) + 1.0 / (2.0 * cube_constant * cube_radius)).powf(d / p) - 1.0
}

/// Largest companion torus (in sites) a transference check may build.
pub const COMPANION_SITE_CAP: usize = 1 << 16;

/// Relative tolerance for comparisons that pass through the majorant solver.
pub const TRANSFERENCE_TOL: f64 = 1e-6;

/// Transfers the ergodic maximal function of `f` to ball averages of the
/// localized functions `φ_x(y) = α(y) f(x)` for `y` in the cube of half-width
/// `⌊c_G R (1 + ε/d)⌋`, each living on a companion torus large enough that no
/// average wraps.
pub fn transference_check(
    sys: &ShiftSystem,
    f: &TorusField,
    p: f64,
    radii: &[u64],
    cube_radius: u64,
    eps: f64,
    opts: &MajorantOptions,
) -> Result<TransferenceReport> {
    sys.check(f)?;
    if !sys.is_pure_shift() {
        return Err(Error::Unsupported("transference is implemented for the pure shift".into()));
    }
    if !(eps > 0.0 && eps < 1.0) || cube_radius == 0 || radii.is_empty() {
        return Err(Error::InvalidParameter("need eps in (0,1), R >= 1 and at least one radius".into()));
    }
    let dim = sys.shape.dim;
    let cg = sys.cube_constant as f64;
    let half_width = cg * cube_radius as f64 * (1.0 + eps / dim as f64);
    let window = half_width.floor() as u64;
    let t_max = *radii.iter().max().unwrap();
    if sys.cube_constant * t_max + sys.cube_constant * cube_radius > window {
        return Err(Error::InvalidParameter(format!(
            "radius {t_max} does not fit: need c_G (R + t) <= {window} for R = {cube_radius}"
        )));
    }
    let companion_side = (2 * (window + t_max) as usize + 1).next_power_of_two();
    let companion_sites = (companion_side as u128).checked_pow(dim as u32).unwrap_or(u128::MAX);
    if companion_sites > COMPANION_SITE_CAP as u128 {
        return Err(Error::WindowTooLarge { half_width, side: companion_side });
    }

    let scalar = f.n() == 1;
    let sup_norm_p = |family: &[TorusField]| -> Result<f64> {
        if scalar {
            scalar_maximal_norm(family, p)
        } else {
            Ok(field_maximal_norm(family, p, opts)?.value)
        }
    };

    let mut identity_defect: f64 = 0.0;
    let mut averages = Vec::with_capacity(radii.len());
    for &t in radii {
        let a = ergodic_average(sys, f, t as f64)?;
        if 2 * (t as usize) < sys.shape.side {
            identity_defect = identity_defect.max(a.max_abs_diff(&convolve_ball(f, t as f64, Path::Spatial)?));
        }
        averages.push(a);
    }
    let sites = sys.shape.sites() as f64;
    let lhs = sup_norm_p(&averages)? / sites.powf(1.0 / p);

    let w = window as i64;
    let mut transferred_terms = Vec::with_capacity(sys.shape.sites());
    let mut maximal_constant: f64 = 0.0;
    for x in 0..sys.shape.sites() {
        let zero = CMat::zeros(f.n());
        let phi = TorusField::from_fn(companion_side, dim, f.n(), |y| {
            let offset: Vec<i64> = y.iter().map(|&c| centred(c, companion_side)).collect();
            if offset.iter().all(|o| o.abs() <= w) {
                f.site(sys.shape.translate(x, &offset))
            } else {
                zero.clone()
            }
        })?;
        let phi = carry_flags(phi, f)?;
        let family: Vec<TorusField> =
            radii.iter().map(|&t| convolve_ball(&phi, t as f64, Path::Spectral)).collect::<Result<_>>()?;
        let sup = sup_norm_p(&family)?;
        let norm = field_lp_norm(&phi, p)?;
        if norm > 0.0 {
            maximal_constant = maximal_constant.max(sup / norm);
        }
        transferred_terms.push(sup);
    }
    let cube_count = ((2 * cube_radius + 1) as f64).powi(dim as i32);
    let transferred = lp_of(&transferred_terms, p) / (sites * cube_count).powf(1.0 / p);
    let f_norm = field_lp_norm(f, p)? / sites.powf(1.0 / p);
    let slack = transference_slack(dim, p, cube_radius as f64, eps, cg);
    let rhs = (1.0 + slack) * maximal_constant * f_norm;
    let holds = lhs <= transferred * (1.0 + TRANSFERENCE_TOL) && transferred <= rhs * (1.0 + TRANSFERENCE_TOL);
    Ok(TransferenceReport {
        dim,
        side: sys.shape.side,
        p,
        cube_radius,
        eps,
        radii: radii.to_vec(),
        window,
        companion_side,
        lhs,
        transferred,
        maximal_constant,
        rhs,
        slack,
        identity_defect,
        holds,
    })
}

fn centred(c: usize, side: usize) -> i64 {
    let (c, side) = (c as i64, side as i64);
    if 2 * c >= side {
        c - side
    } else {
        c
    }
}

/// CSV `d,M,p,R,eps,lhs,rhs,slack`.
pub fn write_transference_csv<W: Write>(reports: &[TransferenceReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["d", "M", "p", "R", "eps", "lhs", "rhs", "slack"])?;
    for r in reports {
        w.write_record([
            r.dim.to_string(),
            r.side.to_string(),
            r.p.to_string(),
            r.cube_radius.to_string(),
            r.eps.to_string(),
            r.lhs.to_string(),
            r.rhs.to_string(),
            r.slack.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Projection certificate for bilaterally almost uniform convergence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BauReport {
    pub epsilon: f64,
    /// One hermitian idempotent per block (a single block for a matrix sequence, one per site for fields).
    pub projection: Vec<CMat>,
    /// Normalized trace of `1 − e`.
    pub trace_deficit: f64,
    /// `max_block ‖e (s_N − limit) e‖_∞` for each term.
    pub residuals: Vec<f64>,
    /// Whether the compressed residuals decay from the head to the tail of the sequence.
    pub converged: bool,
}

impl BauReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// A residual sequence counts as decaying once its tail maximum is at most
/// this fraction of its head maximum.
pub const BAU_DECAY_RATIO: f64 = 0.5;
/// Residuals below this are treated as zero.
pub const BAU_ZERO: f64 = 1e-12;

/// Greedy spectral search for `e` with `τ(1 − e) < ε` and `e (s_N − limit) e → 0`.
///
/// Accumulates `S = Σ_N 2^{−N} |s_N − limit|²` and removes eigenvectors of
/// `S` from the top down, one at a time, until the compressed residuals decay
/// or the trace budget is spent. Sequences that already decay keep `e = I`.
pub fn bau_projection_search(seq: &[CMat], limit: &CMat, eps: f64) -> Result<BauReport> {
    let blocks: Vec<Vec<CMat>> = seq.iter().map(|s| vec![s.clone()]).collect();
    bau_search_blocks(&blocks, std::slice::from_ref(limit), eps)
}

/// [`bau_projection_search`] for a sequence of fields, as block-diagonal operators.
pub fn bau_projection_search_fields(seq: &[TorusField], limit: &TorusField, eps: f64) -> Result<BauReport> {
    for f in seq {
        if f.shape() != limit.shape() {
            return Err(Error::ShapeMismatch("sequence and limit shapes differ".into()));
        }
    }
    let to_blocks = |f: &TorusField| (0..f.sites()).map(|s| f.site(s)).collect::<Vec<_>>();
    let blocks: Vec<Vec<CMat>> = seq.iter().map(to_blocks).collect();
    bau_search_blocks(&blocks, &to_blocks(limit), eps)
}

fn bau_search_blocks(seq: &[Vec<CMat>], limit: &[CMat], eps: f64) -> Result<BauReport> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    let n = limit.first().map(CMat::n).ok_or_else(|| Error::InvalidParameter("empty limit".into()))?;
    let diffs: Vec<Vec<CMat>> = seq.iter().map(|term| term.iter().zip(limit).map(|(s, l)| s - l).collect()).collect();
    let eig: Vec<_> = (0..limit.len())
        .map(|b| {
            let mut acc = CMat::zeros(n);
            let mut w = 1.0;
            for term in &diffs {
                w *= 0.5;
                let d = &term[b];
                acc = &acc + &d.adjoint().matmul(d).scale(w);
            }
            eigh(&acc)
        })
        .collect();
    // Removal order: largest eigenvalue first, ties by block then index.
    let mut order: Vec<(usize, usize)> = (0..limit.len()).flat_map(|b| (0..n).map(move |k| (b, k))).collect();
    order.sort_by(|a, b| eig[b.0].values[b.1].total_cmp(&eig[a.0].values[a.1]).then(a.cmp(b)));

    let total = (limit.len() * n) as f64;
    let mut kept: Vec<Vec<bool>> = vec![vec![true; n]; limit.len()];
    let build = |kept: &[Vec<bool>]| -> Vec<CMat> {
        eig.iter()
            .zip(kept)
            .map(|(e, k)| {
                let keep: Vec<usize> = (0..n).filter(|&i| k[i]).collect();
                if keep.len() == n {
                    CMat::identity(n)
                } else {
                    e.projection(&keep)
                }
            })
            .collect()
    };
    let residuals_for = |proj: &[CMat]| -> Vec<f64> {
        diffs
            .iter()
            .map(|term| {
                term.iter()
                    .zip(proj)
                    .map(|(d, e)| {
                        crate::ncmax::schatten_norm(&e.matmul(d).matmul(e), f64::INFINITY).unwrap_or(f64::NAN)
                    })
                    .fold(0.0, f64::max)
            })
            .collect()
    };
    let mut removed = 0usize;
    loop {
        let projection = build(&kept);
        let residuals = residuals_for(&projection);
        let converged = decays(&residuals);
        let next_deficit = (removed + 1) as f64 / total;
        if converged || removed == order.len() || next_deficit >= eps {
            return Ok(BauReport {
                epsilon: eps,
                projection,
                trace_deficit: removed as f64 / total,
                residuals,
                converged,
            });
        }
        let (b, k) = order[removed];
        kept[b][k] = false;
        removed += 1;
    }
}

fn decays(residuals: &[f64]) -> bool {
    let quarter = residuals.len().div_ceil(4).max(1);
    let head = residuals.iter().take(quarter).copied().fold(0.0, f64::max);
    let tail = residuals.iter().rev().take(quarter).copied().fold(0.0, f64::max);
    tail <= BAU_ZERO || (residuals.len() > 1 && tail <= BAU_DECAY_RATIO * head)
}
