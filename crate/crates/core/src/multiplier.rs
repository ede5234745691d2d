//! Fourier multipliers of lattice-ball averages and their closed-form approximants.
//!
//! The ball multiplier
//!
//! ```text
//! m_N(ξ) = |B_N ∩ Z^d|⁻¹ Σ_{x ∈ B_N ∩ Z^d} e^{2πi⟨x,ξ⟩}
//! ```
//!
//! is evaluated by a dynamic program over the squared radius. Pairing `x`
//! with `-x` turns each coordinate's contribution into the real weight
//! `2 cos(2π x ξ_k)`, so the multiplier is real by construction and
//! `g_k(r) = Σ_{x >= 0, x² <= r} w_k(x) g_{k-1}(r - x²)` needs one shifted
//! axpy per `x`. The count `h_k` runs through the same recurrence with
//! weights `1, 2, 2, …`; both tables are rescaled by the same power of two
//! after every coordinate (so nothing overflows even for `d = 25600`) and
//! the ratio `Σ g_d / Σ h_d` is the multiplier. When `N² << d` the weights
//! are also tilted by `e^{t x²}`, which keeps the mass of every intermediate
//! table where the final sum needs it; the tilt cancels in the ratio.
//! Accumulation carries a TwoSum error term per entry.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{exact_floor_square, isqrt};
use crate::linalg::C64;
use crate::sampling::{SampleSpec, Stratum};

/// `κ(d, N) = N / √d`.
pub fn kappa(dim: usize, radius: f64) -> f64 {
    radius / (dim as f64).sqrt()
}

/// Representative of `x` modulo 1 in `(-1/2, 1/2]`.
pub fn canonicalize(x: f64) -> f64 {
    x - (x - 0.5).ceil()
}

/// A point of the torus `T^d`, stored by its canonical representative.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    xi: Vec<f64>,
}

impl Frequency {
    pub fn new(raw: &[f64]) -> Self {
        Frequency { xi: raw.iter().map(|&x| canonicalize(x)).collect() }
    }

    pub fn zero(dim: usize) -> Self {
        Frequency { xi: vec![0.0; dim] }
    }

    /// `(1/2, …, 1/2)`.
    pub fn corner(dim: usize) -> Self {
        Frequency { xi: vec![0.5; dim] }
    }

    pub fn components(&self) -> &[f64] {
        &self.xi
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    /// Euclidean norm of the canonical representative.
    pub fn norm(&self) -> f64 {
        self.xi.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `V_ξ = {j : 1/4 < |ξ_j| <= 1/2}`.
    pub fn v_set(&self) -> Vec<usize> {
        self.xi.iter().enumerate().filter(|(_, x)| x.abs() > 0.25).map(|(j, _)| j).collect()
    }

    pub fn v_count(&self) -> usize {
        self.xi.iter().filter(|x| x.abs() > 0.25).count()
    }

    /// `V_ξ` through its defining test `cos(2πξ_j) < 0`.
    pub fn v_set_by_cosine(&self) -> Vec<usize> {
        self.xi
            .iter()
            .enumerate()
            .filter(|(_, x)| (2.0 * std::f64::consts::PI * **x).cos() < 0.0)
            .map(|(j, _)| j)
            .collect()
    }

    /// `Σ_j sin²(πξ_j)`.
    pub fn sin2_sum(&self) -> f64 {
        self.xi.iter().map(|x| (std::f64::consts::PI * x).sin().powi(2)).sum()
    }

    /// `Σ_j cos²(πξ_j)`.
    pub fn cos2_sum(&self) -> f64 {
        self.xi.iter().map(|x| (std::f64::consts::PI * x).cos().powi(2)).sum()
    }
}

/// `p_t(ξ) = exp(-t Σ sin²(πξ_k))`.
pub fn heat_multiplier(t: f64, xi: &Frequency) -> f64 {
    (-t * xi.sin2_sum()).exp()
}

/// `λ¹_N(ξ) = exp(-κ² Σ sin²(πξ_j))`, evaluated as `p_{κ²}(ξ)`.
pub fn lambda1(dim: usize, radius: f64, xi: &Frequency) -> f64 {
    let k = kappa(dim, radius);
    heat_multiplier(k * k, xi)
}

/// Default inner-update budget for the multiplier dynamic program.
pub const DEFAULT_DP_BUDGET: u64 = 1 << 34;

/// Fails with `BudgetExceeded` when the squared-radius recurrence for `(d, N)`
/// needs more than `budget` table updates, counted as `⌊N²⌋ (2⌊N⌋ + 1) d`.
pub fn check_dp_budget(dim: usize, radius: f64, budget: u64) -> Result<()> {
    let top = exact_floor_square(radius) as u128;
    let max_coord = isqrt(top as u64) as u128;
    let required = top * (2 * max_coord + 1) * dim as u128;
    if required > budget as u128 {
        return Err(Error::BudgetExceeded { required, budget: budget as u128 });
    }
    Ok(())
}

/// Squared-radius evaluator for a fixed Euclidean ball `Z^d ∩ B_N`.
///
/// Construction runs the counting recurrence once and records the rescaling
/// exponents; each evaluation then costs one pass of the same recurrence.
#[derive(Clone, Debug)]
pub struct BallMultiplier {
    dim: usize,
    radius: f64,
    max_coord: usize,
    top: usize,
    shifts: Vec<i32>,
    /// `e^{t x²}` for `x = 0..=max_coord`.
    tilt: Vec<f64>,
    /// `e^{t (top - r)}` for `r = 0..=top`.
    untilt: Vec<f64>,
    count_total: f64,
}

impl BallMultiplier {
    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        Self::with_budget(dim, radius, DEFAULT_DP_BUDGET)
    }

    pub fn with_budget(dim: usize, radius: f64, budget: u64) -> Result<Self> {
        if dim == 0 || !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("need d >= 1 and N > 0, got d={dim}, N={radius}")));
        }
        check_dp_budget(dim, radius, budget)?;
        let top = exact_floor_square(radius) as usize;
        let max_coord = isqrt(top as u64) as usize;
        let rate = tilt_rate(max_coord, top as f64 / dim as f64);
        let mut this = BallMultiplier {
            dim,
            radius,
            max_coord,
            top,
            shifts: Vec::with_capacity(dim),
            tilt: (0..=max_coord).map(|x| (rate * (x * x) as f64).exp()).collect(),
            untilt: (0..=top).map(|r| (rate * (top - r) as f64).exp()).collect(),
            count_total: 0.0,
        };
        let weights = this.count_weights();
        let mut shifts = Vec::with_capacity(dim);
        this.count_total = this.run(
            |_| weights.clone(),
            |hi: &[f64]| {
                let peak = hi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let e = if peak > 0.0 { peak.log2().floor() as i32 } else { 0 };
                shifts.push(e);
                e
            },
        );
        this.shifts = shifts;
        Ok(this)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn kappa(&self) -> f64 {
        kappa(self.dim, self.radius)
    }

    /// Number of inner updates one evaluation performs.
    pub fn cost(&self) -> u64 {
        let per_axis: u64 = (1..=self.max_coord).map(|x| (self.top - x * x + 1) as u64).sum();
        per_axis * self.dim as u64
    }

    fn count_weights(&self) -> Vec<f64> {
        let mut w = vec![2.0; self.max_coord + 1];
        w[0] = 1.0;
        w
    }

    /// `m_N(ξ)`; the imaginary part is identically zero.
    pub fn eval(&self, xi: &Frequency) -> Result<C64> {
        if xi.dim() != self.dim {
            return Err(Error::ShapeMismatch(format!("frequency has {} coordinates, ball has {}", xi.dim(), self.dim)));
        }
        let comps = xi.components();
        let shifts = &self.shifts;
        let mut step = 0;
        let total = self.run(
            |k| paired_weights(comps[k], self.max_coord),
            |_| {
                let e = shifts[step];
                step += 1;
                e
            },
        );
        Ok(C64::new(total / self.count_total, 0.0))
    }

    /// `|B_N ∩ Z^d|⁻¹ Σ_x (-1)^{Σ x_j}`, i.e. the multiplier at `(1/2, …, 1/2)`.
    pub fn alternating_mass(&self) -> f64 {
        let mut w: Vec<f64> = (0..=self.max_coord).map(|x| if x % 2 == 0 { 2.0 } else { -2.0 }).collect();
        w[0] = 1.0;
        let shifts = &self.shifts;
        let mut step = 0;
        let total = self.run(
            |_| w.clone(),
            |_| {
                let e = shifts[step];
                step += 1;
                e
            },
        );
        total / self.count_total
    }

    /// `λ²_N(ξ) = alternating mass · exp(-κ² Σ cos²(πξ_j))`.
    pub fn lambda2(&self, xi: &Frequency) -> f64 {
        self.lambda2_with_mass(self.alternating_mass(), xi)
    }

    pub fn lambda2_with_mass(&self, mass: f64, xi: &Frequency) -> f64 {
        let k = self.kappa();
        mass * (-k * k * xi.cos2_sum()).exp()
    }

    /// Runs the recurrence with per-axis weights, rescaling after each axis
    /// by `2^{-shift}`; returns the rescaled total.
    fn run(&self, mut weights: impl FnMut(usize) -> Vec<f64>, mut shift: impl FnMut(&[f64]) -> i32) -> f64 {
        let len = self.top + 1;
        let mut hi = vec![0.0; len];
        let mut lo = vec![0.0; len];
        let mut next_hi = vec![0.0; len];
        let mut next_lo = vec![0.0; len];
        hi[0] = 1.0;
        for k in 0..self.dim {
            let mut w = weights(k);
            for (v, t) in w.iter_mut().zip(&self.tilt) {
                *v *= t;
            }
            recurrence_step(&hi, &lo, &mut next_hi, &mut next_lo, &w, self.top);
            let e = shift(&next_hi);
            let factor = pow2(-e);
            for (h, l) in next_hi.iter_mut().zip(next_lo.iter_mut()) {
                *h *= factor;
                *l *= factor;
            }
            std::mem::swap(&mut hi, &mut next_hi);
            std::mem::swap(&mut lo, &mut next_lo);
        }
        let mut sum = 0.0;
        let mut err = 0.0;
        for ((h, l), u) in hi.iter().zip(&lo).zip(&self.untilt) {
            let (s, e) = two_sum(sum, h * u);
            sum = s;
            err += e + l * u;
        }
        sum + err
    }
}

/// Exponential tilt `t <= 0` making the mean of `x²` under weights
/// `e^{t x²}` on `|x| <= max_coord` equal to `target` (or `t = 0` if the
/// untilted mean already falls short).
///
/// Without the tilt, the entries that dominate the final sum when `N² << d`
/// (small squared radius early in the recurrence) are many orders of
/// magnitude below the running peak and underflow.
fn tilt_rate(max_coord: usize, target: f64) -> f64 {
    let mean = |t: f64| {
        let (mut z, mut m) = (1.0, 0.0);
        for x in 1..=max_coord {
            let s = (x * x) as f64;
            let w = 2.0 * (t * s).exp();
            z += w;
            m += s * w;
        }
        m / z
    };
    if max_coord == 0 || mean(0.0) <= target {
        return 0.0;
    }
    let (mut lo, mut hi) = (-1.0, 0.0);
    while mean(lo) > target {
        lo *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mean(mid) > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn pow2(e: i32) -> f64 {
    2f64.powi(e)
}

#[inline(always)]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bp = s - a;
    (s, (a - (s - bp)) + (b - bp))
}

/// `w(0) = 1`, `w(x) = 2 cos(2π x ξ)` with the phase reduced modulo 1 first.
fn paired_weights(xi: f64, max_coord: usize) -> Vec<f64> {
    let tau = 2.0 * std::f64::consts::PI;
    (0..=max_coord)
        .map(|x| {
            if x == 0 {
                1.0
            } else {
                let phase = canonicalize(x as f64 * xi);
                2.0 * (tau * phase).cos()
            }
        })
        .collect()
}

/// `next(r) = Σ_{x² <= r} w(x) prev(r - x²)` on (hi, lo) pairs.
fn recurrence_step(hi: &[f64], lo: &[f64], next_hi: &mut [f64], next_lo: &mut [f64], w: &[f64], top: usize) {
    let w0 = w[0];
    for (((nh, nl), h), l) in next_hi.iter_mut().zip(next_lo.iter_mut()).zip(hi).zip(lo) {
        *nh = w0 * h;
        *nl = w0 * l;
    }
    for (x, &c) in w.iter().enumerate().skip(1) {
        let s = x * x;
        if s > top {
            break;
        }
        let n = top + 1 - s;
        let src_hi = &hi[..n];
        let src_lo = &lo[..n];
        let (dst_hi, dst_lo) = (&mut next_hi[s..], &mut next_lo[s..]);
        for (((dh, dl), &ph), &pl) in dst_hi.iter_mut().zip(dst_lo.iter_mut()).zip(src_hi).zip(src_lo) {
            let t = c * ph;
            let a = *dh;
            let sum = a + t;
            let bp = sum - a;
            let err = (a - (sum - bp)) + (t - bp);
            *dh = sum;
            *dl += err + c * pl;
        }
    }
    for (h, l) in next_hi.iter_mut().zip(next_lo.iter_mut()) {
        let (s, e) = two_sum(*h, *l);
        *h = s;
        *l = e;
    }
}

/// `m_N(ξ)` for a single frequency.
pub fn exp_sum_multiplier(dim: usize, radius: f64, xi: &Frequency) -> Result<C64> {
    BallMultiplier::new(dim, radius)?.eval(xi)
}

/// Alternating mass of the Euclidean ball.
pub fn alternating_mass(dim: usize, radius: f64) -> Result<f64> {
    Ok(BallMultiplier::new(dim, radius)?.alternating_mass())
}

pub fn lambda2(dim: usize, radius: f64, xi: &Frequency) -> Result<f64> {
    Ok(BallMultiplier::new(dim, radius)?.lambda2(xi))
}

/// Which inequality a report row checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Origin,
    Decay,
    /// `|V_ξ| <= d/2`: compare with `λ¹`.
    Low,
    /// `|V_ξ| > d/2`: compare with `λ²`.
    High,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Branch::Origin => "origin",
            Branch::Decay => "decay",
            Branch::Low => "i",
            Branch::High => "ii",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierRow {
    pub xi: Vec<f64>,
    pub stratum: Stratum,
    pub m: C64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub heat: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub branch: Branch,
}

/// Sampled multiplier values with inequality residuals and fitted constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiplierReport {
    pub dim: usize,
    pub radius: f64,
    pub kappa: f64,
    pub rows: Vec<MultiplierRow>,
    pub fitted_constants: BTreeMap<String, f64>,
    /// Rows with `slack < -tolerance`.
    pub violations: usize,
    pub tolerance: f64,
}

/// Slack below which a row counts as a violation.
pub const SLACK_TOLERANCE: f64 = 1e-9;

impl MultiplierReport {
    fn finish(dim: usize, radius: f64, rows: Vec<MultiplierRow>, fitted: BTreeMap<String, f64>) -> Self {
        let violations = rows.iter().filter(|r| r.slack < -SLACK_TOLERANCE).count();
        MultiplierReport {
            dim,
            radius,
            kappa: kappa(dim, radius),
            rows,
            fitted_constants: fitted,
            violations,
            tolerance: SLACK_TOLERANCE,
        }
    }

    pub fn violating_rows(&self) -> impl Iterator<Item = &MultiplierRow> {
        self.rows.iter().filter(|r| r.slack < -self.tolerance)
    }

    /// Rows as CSV (`xi,m_re,m_im,lambda1,lambda2,lhs,rhs,slack,branch`) with
    /// the fitted constants as a trailing `# {json}` line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(["xi", "m_re", "m_im", "lambda1", "lambda2", "lhs", "rhs", "slack", "branch"])?;
            for r in &self.rows {
                let xi = r.xi.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";");
                w.write_record([
                    xi,
                    r.m.re.to_string(),
                    r.m.im.to_string(),
                    r.lambda1.to_string(),
                    r.lambda2.to_string(),
                    r.lhs.to_string(),
                    r.rhs.to_string(),
                    r.slack.to_string(),
                    r.branch.label().to_string(),
                ])?;
            }
            w.flush()?;
        }
        writeln!(out, "# {}", serde_json::to_string(&self.fitted_constants)?)?;
        Ok(())
    }
}

struct Sampled {
    xi: Frequency,
    stratum: Stratum,
    m: C64,
}

fn evaluate_samples(ball: &BallMultiplier, samples: &SampleSpec, extra: &[Frequency]) -> Result<Vec<Sampled>> {
    let dim = ball.dim();
    let k = ball.kappa();
    let scale = 1.0 / (10.0 * k * (dim as f64).sqrt());
    let mut points: Vec<(Frequency, Stratum)> =
        (0..samples.len()).map(|i| (Frequency::new(&samples.draw(i, dim, scale)), samples.stratum(i))).collect();
    points.extend(extra.iter().map(|xi| (xi.clone(), Stratum::Uniform)));
    points
        .into_par_iter()
        .map(|(xi, stratum)| {
            let m = ball.eval(&xi)?;
            Ok(Sampled { xi, stratum, m })
        })
        .collect()
}

/// Checks `|m_N(ξ) - 1| <= 2π² κ² ‖ξ‖²` on the sample.
pub fn verify_origin_bound(dim: usize, radius: f64, samples: &SampleSpec) -> Result<MultiplierReport> {
    verify_origin_bound_at(dim, radius, samples, &[])
}

/// As [`verify_origin_bound`], with extra fixed frequencies appended to the sample.
pub fn verify_origin_bound_at(
    dim: usize,
    radius: f64,
    samples: &SampleSpec,
    extra: &[Frequency],
) -> Result<MultiplierReport> {
    let ball = BallMultiplier::new(dim, radius)?;
    let k = ball.kappa();
    let mass = ball.alternating_mass();
    let two_pi2 = 2.0 * std::f64::consts::PI.powi(2);
    let mut worst_ratio: f64 = 0.0;
    let rows: Vec<MultiplierRow> = evaluate_samples(&ball, samples, extra)?
        .into_iter()
        .map(|s| {
            let lhs = (s.m - 1.0).norm();
            let rhs = two_pi2 * k * k * s.xi.norm().powi(2);
            if rhs > 0.0 {
                worst_ratio = worst_ratio.max(lhs / rhs);
            }
            row(&ball, mass, s, lhs, rhs, Branch::Origin)
        })
        .collect();
    let mut fitted = BTreeMap::new();
    fitted.insert("max_lhs_over_rhs".to_string(), worst_ratio);
    Ok(MultiplierReport::finish(dim, radius, rows, fitted))
}

fn row(ball: &BallMultiplier, mass: f64, s: Sampled, lhs: f64, rhs: f64, branch: Branch) -> MultiplierRow {
    let l1 = lambda1(ball.dim(), ball.radius(), &s.xi);
    MultiplierRow {
        xi: s.xi.components().to_vec(),
        stratum: s.stratum,
        m: s.m,
        lambda1: l1,
        lambda2: ball.lambda2_with_mass(mass, &s.xi),
        heat: l1,
        lhs,
        rhs,
        slack: rhs - lhs,
        branch,
    }
}

/// Checks `|m_N(ξ)| <= C (κ⁻¹ ‖ξ‖⁻¹ + κ^{-1/7})` for `10 <= κ <= 50 √d`.
///
/// Without `c_fit` the smallest admissible `C` over the sample is reported
/// as `fitted_constants["C"]` and the rows are checked against it.
pub fn verify_decay_bound(
    dim: usize,
    radius: f64,
    samples: &SampleSpec,
    c_fit: Option<f64>,
) -> Result<MultiplierReport> {
    let k = kappa(dim, radius);
    if !(10.0..=50.0 * (dim as f64).sqrt()).contains(&k) {
        return Err(Error::RegimeViolation(format!(
            "decay bound needs 10 <= kappa <= 50 sqrt(d); kappa({dim}, {radius}) = {k}"
        )));
    }
    let ball = BallMultiplier::new(dim, radius)?;
    let mass = ball.alternating_mass();
    let samples = evaluate_samples(&ball, samples, &[])?;
    let unit = |xi: &Frequency| {
        let norm = xi.norm();
        let near = if norm > 0.0 { 1.0 / (k * norm) } else { f64::INFINITY };
        near + k.powf(-1.0 / 7.0)
    };
    let fitted_c = samples.iter().map(|s| s.m.norm() / unit(&s.xi)).fold(0.0, f64::max);
    let c = c_fit.unwrap_or(fitted_c);
    let rows = samples
        .into_iter()
        .map(|s| {
            let lhs = s.m.norm();
            let rhs = c * unit(&s.xi);
            row(&ball, mass, s, lhs, rhs, Branch::Decay)
        })
        .collect();
    let mut fitted = BTreeMap::new();
    fitted.insert("C".to_string(), fitted_c);
    if let Some(c) = c_fit {
        fitted.insert("C_asserted".to_string(), c);
    }
    Ok(MultiplierReport::finish(dim, radius, rows, fitted))
}

/// Constant in front of the small-scale approximation bound.
pub const SMALL_SCALE_CONSTANT: f64 = 17.0;

/// Checks the small-scale approximation `|m_N - λ^{i}| <= 17 min{e^{-cκ²S/400}, κ²S}`,
/// with `S = Σ sin²(πξ_j)` on branch (i) (`|V_ξ| <= d/2`, against `λ¹`) and
/// `S = Σ cos²(πξ_j)` on branch (ii) (against `λ²`).
///
/// With `c_fit` the full minimum is checked. Without it rows are checked
/// against the algebraic arm `17 κ² S`, and the largest `c` for which the
/// exponential arm holds on every row is reported (`c_sup`, possibly `> 1`;
/// `c` is that value capped at 1).
pub fn verify_small_scale_approx(
    dim: usize,
    radius: f64,
    samples: &SampleSpec,
    c_fit: Option<f64>,
) -> Result<MultiplierReport> {
    verify_small_scale_approx_at(dim, radius, samples, &[], c_fit)
}

pub fn verify_small_scale_approx_at(
    dim: usize,
    radius: f64,
    samples: &SampleSpec,
    extra: &[Frequency],
    c_fit: Option<f64>,
) -> Result<MultiplierReport> {
    let k = kappa(dim, radius);
    if radius < 2f64.powf(4.5) || k > 0.2 {
        return Err(Error::RegimeViolation(format!(
            "small-scale bound needs N >= 2^(9/2) and kappa <= 1/5; got N = {radius}, kappa = {k}"
        )));
    }
    if let Some(c) = c_fit {
        if !(c > 0.0 && c < 1.0) {
            return Err(Error::InvalidParameter(format!("c must lie in (0, 1), got {c}")));
        }
    }
    let ball = BallMultiplier::new(dim, radius)?;
    let mass = ball.alternating_mass();
    let k2 = k * k;
    let mut c_sup = f64::INFINITY;
    let rows: Vec<MultiplierRow> = evaluate_samples(&ball, samples, extra)?
        .into_iter()
        .map(|s| {
            let low = 2 * s.xi.v_count() <= dim;
            let (branch, approx, spread) = if low {
                (Branch::Low, lambda1(dim, radius, &s.xi), s.xi.sin2_sum())
            } else {
                (Branch::High, ball.lambda2_with_mass(mass, &s.xi), s.xi.cos2_sum())
            };
            let lhs = (s.m.re - approx).abs();
            let algebraic = k2 * spread;
            if lhs > 0.0 && spread > 0.0 {
                c_sup = c_sup.min(400.0 * (SMALL_SCALE_CONSTANT / lhs).ln() / (k2 * spread));
            }
            let rhs = match c_fit {
                Some(c) => SMALL_SCALE_CONSTANT * (-c * k2 * spread / 400.0).exp().min(algebraic),
                None => SMALL_SCALE_CONSTANT * algebraic,
            };
            row(&ball, mass, s, lhs, rhs, branch)
        })
        .collect();
    let mut fitted = BTreeMap::new();
    fitted.insert("c_sup".to_string(), c_sup);
    fitted.insert("c".to_string(), c_sup.min(1.0));
    if let Some(c) = c_fit {
        fitted.insert("c_asserted".to_string(), c);
    }
    Ok(MultiplierReport::finish(dim, radius, rows, fitted))
}
