//! Lattice balls `Z^d ∩ B^q_N` for `q ∈ {1, 2, ∞}`.
//!
//! Counting is exact: the Euclidean and `ℓ¹` cases run a dynamic program over
//! the radius budget (squared radius for `q = 2`), accumulating in `u128`
//! with checked arithmetic and promoting to arbitrary precision on overflow.
//! Membership against a real radius never uses an epsilon: `Σ x_k²` is an
//! integer, so the comparison with `N²` reduces to comparing against the exact
//! integer `⌊N²⌋` computed in rational arithmetic.

use std::collections::BTreeMap;
use std::io::Write;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which norm cuts out the ball.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallNorm {
    One,
    Two,
    Infinity,
}

impl std::str::FromStr for BallNorm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "one" => Ok(BallNorm::One),
            "2" | "two" => Ok(BallNorm::Two),
            "inf" | "infinity" => Ok(BallNorm::Infinity),
            other => Err(Error::InvalidParameter(format!("unknown ball norm {other:?}"))),
        }
    }
}

impl std::fmt::Display for BallNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BallNorm::One => "one",
            BallNorm::Two => "two",
            BallNorm::Infinity => "infinity",
        })
    }
}

/// A lattice ball `{x ∈ Z^d : |x|_q <= N}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub dim: usize,
    pub radius: f64,
    pub norm: BallNorm,
}

impl BallSpec {
    pub fn new(dim: usize, radius: f64, norm: BallNorm) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("radius must be positive and finite, got {radius}")));
        }
        Ok(BallSpec { dim, radius, norm })
    }

    pub fn euclidean(dim: usize, radius: f64) -> Result<Self> {
        Self::new(dim, radius, BallNorm::Two)
    }

    /// `⌊N⌋`, the largest admissible coordinate magnitude.
    pub fn max_coordinate(&self) -> i64 {
        self.radius.floor() as i64
    }

    /// `⌊N²⌋`, computed exactly. Only meaningful for the Euclidean ball.
    pub fn max_squared_radius(&self) -> u64 {
        exact_floor_square(self.radius)
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        debug_assert_eq!(x.len(), self.dim);
        match self.norm {
            BallNorm::Infinity => x.iter().all(|&c| c.abs() <= self.max_coordinate()),
            BallNorm::One => x.iter().map(|c| c.unsigned_abs()).sum::<u64>() <= self.max_coordinate() as u64,
            BallNorm::Two => x.iter().map(|&c| (c * c) as u64).sum::<u64>() <= self.max_squared_radius(),
        }
    }
}

/// `⌊r²⌋` for a finite nonnegative double, via exact rational arithmetic.
pub fn exact_floor_square(r: f64) -> u64 {
    let q = BigRational::from_float(r.abs()).expect("finite radius");
    let sq = &q * &q;
    sq.floor().to_integer().to_u64().expect("squared radius fits in u64")
}

/// Default dimension cap for [`enumerate_ball`].
pub const DEFAULT_ENUMERATION_DIM_CAP: usize = 8;
/// Default point cap for [`enumerate_ball`] (memory guard).
pub const DEFAULT_ENUMERATION_POINT_CAP: u64 = 1 << 24;
/// Default state budget for the counting dynamic programs.
pub const DEFAULT_COUNT_BUDGET: u64 = 1 << 31;

/// Limits for enumeration.
#[derive(Clone, Copy, Debug)]
pub struct EnumerationCaps {
    pub max_dim: usize,
    pub max_points: u64,
}

impl Default for EnumerationCaps {
    fn default() -> Self {
        EnumerationCaps { max_dim: DEFAULT_ENUMERATION_DIM_CAP, max_points: DEFAULT_ENUMERATION_POINT_CAP }
    }
}

/// Every lattice point of the ball, each exactly once, in lexicographic order.
pub fn enumerate_ball(spec: &BallSpec) -> Result<Vec<Vec<i64>>> {
    enumerate_ball_with(spec, EnumerationCaps::default())
}

pub fn enumerate_ball_with(spec: &BallSpec, caps: EnumerationCaps) -> Result<Vec<Vec<i64>>> {
    if spec.dim > caps.max_dim {
        let count = count_ball(spec)?.count;
        return Err(Error::CapExceeded { dim: spec.dim, count });
    }
    let count = count_ball(spec)?.count;
    if count > BigUint::from(caps.max_points) {
        return Err(Error::CapExceeded { dim: spec.dim, count });
    }
    let mut out = Vec::with_capacity(count.to_usize().unwrap_or(0));
    let mut current = vec![0i64; spec.dim];
    let budget = match spec.norm {
        BallNorm::Two => spec.max_squared_radius(),
        BallNorm::One | BallNorm::Infinity => spec.max_coordinate() as u64,
    };
    descend(spec, 0, budget, &mut current, &mut out);
    Ok(out)
}

fn descend(spec: &BallSpec, axis: usize, remaining: u64, current: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
    if axis == spec.dim {
        out.push(current.clone());
        return;
    }
    let reach = match spec.norm {
        BallNorm::Two => isqrt(remaining) as i64,
        BallNorm::One => remaining as i64,
        BallNorm::Infinity => spec.max_coordinate(),
    };
    for x in -reach..=reach {
        current[axis] = x;
        let rest = match spec.norm {
            BallNorm::Two => remaining - (x * x) as u64,
            BallNorm::One => remaining - x.unsigned_abs(),
            BallNorm::Infinity => remaining,
        };
        descend(spec, axis + 1, rest, current, out);
    }
}

pub(crate) fn isqrt(v: u64) -> u64 {
    let mut r = (v as f64).sqrt() as u64;
    while r * r > v {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= v {
        r += 1;
    }
    r
}

/// Exact count of a lattice ball.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountResult {
    pub count: BigUint,
    /// `r ↦ #{x : Σ x_k² = r}` for `r <= ⌊N²⌋`; present for Euclidean balls only.
    pub by_squared_radius: Option<BTreeMap<u64, BigUint>>,
}

pub fn count_ball(spec: &BallSpec) -> Result<CountResult> {
    count_ball_with_budget(spec, DEFAULT_COUNT_BUDGET)
}

pub fn count_ball_with_budget(spec: &BallSpec, budget: u64) -> Result<CountResult> {
    match spec.norm {
        BallNorm::Infinity => {
            let side = BigUint::from(2 * spec.max_coordinate() as u64 + 1);
            Ok(CountResult { count: side.pow(spec.dim as u32), by_squared_radius: None })
        }
        BallNorm::Two => {
            let top = spec.max_squared_radius();
            check_budget(top, spec.dim, budget)?;
            let table = radius_dp(spec.dim, top, isqrt, |x| x * x);
            let count = table.iter().fold(BigUint::zero(), |acc, c| acc + c);
            let hist =
                table.into_iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(r, c)| (r as u64, c)).collect();
            Ok(CountResult { count, by_squared_radius: Some(hist) })
        }
        BallNorm::One => {
            let top = spec.max_coordinate() as u64;
            check_budget(top, spec.dim, budget)?;
            let table = radius_dp(spec.dim, top, |r| r, |x| x);
            let count = table.iter().fold(BigUint::zero(), |acc, c| acc + c);
            Ok(CountResult { count, by_squared_radius: None })
        }
    }
}

fn check_budget(top: u64, dim: usize, budget: u64) -> Result<()> {
    let states = (top as u128 + 1) * dim as u128;
    if states > budget as u128 {
        return Err(Error::BudgetExceeded { required: states, budget: budget as u128 });
    }
    Ok(())
}

/// `h_k(r) = Σ_{|x| <= reach(r)} h_{k-1}(r - cost(|x|))`, `h_0 = δ_0`, returning `h_d`.
///
/// Runs in `u128` and restarts in `BigUint` the first time a checked add overflows.
fn radius_dp(dim: usize, top: u64, reach: impl Fn(u64) -> u64, cost: impl Fn(u64) -> u64) -> Vec<BigUint> {
    let len = top as usize + 1;
    let mut small = vec![0u128; len];
    small[0] = 1;
    let mut overflowed = false;
    'fast: for _ in 0..dim {
        let mut next = vec![0u128; len];
        for (r, slot) in next.iter_mut().enumerate() {
            let r = r as u64;
            let mut acc = small[r as usize];
            for x in 1..=reach(r) {
                let term = match small[(r - cost(x)) as usize].checked_mul(2) {
                    Some(t) => t,
                    None => {
                        overflowed = true;
                        break 'fast;
                    }
                };
                acc = match acc.checked_add(term) {
                    Some(a) => a,
                    None => {
                        overflowed = true;
                        break 'fast;
                    }
                };
            }
            *slot = acc;
        }
        small = next;
    }
    if !overflowed {
        return small.into_iter().map(BigUint::from).collect();
    }
    let mut big: Vec<BigUint> = vec![BigUint::zero(); len];
    big[0] = BigUint::from(1u32);
    for _ in 0..dim {
        let mut next = vec![BigUint::zero(); len];
        for (r, slot) in next.iter_mut().enumerate() {
            let r = r as u64;
            let mut acc = big[r as usize].clone();
            for x in 1..=reach(r) {
                acc += &big[(r - cost(x)) as usize] * 2u32;
            }
            *slot = acc;
        }
        big = next;
    }
    big
}

/// Exact size of the symmetric difference `(B ∩ Z^d) △ (B ∩ Z^d + v)`.
pub fn symmetric_difference_count(spec: &BallSpec, shift: &[i64]) -> Result<u64> {
    if shift.len() != spec.dim {
        return Err(Error::ShapeMismatch(format!("shift has {} coordinates, ball has {}", shift.len(), spec.dim)));
    }
    let points = enumerate_ball(spec)?;
    let mut probe = vec![0i64; spec.dim];
    let mut outside = 0u64;
    for y in &points {
        for ((p, a), b) in probe.iter_mut().zip(y).zip(shift) {
            *p = a - b;
        }
        if !spec.contains(&probe) {
            outside += 1;
        }
    }
    // |B \ (B+v)| = |(B+v) \ B| by translation, so the symmetric difference doubles it.
    Ok(2 * outside)
}

/// Lebesgue volume of the Euclidean ball of radius `radius` in `R^dim`.
///
/// Uses the two-step recurrence `V_d = V_{d-2} · 2πN²/d` with the running
/// product kept in mantissa/exponent form, so intermediate values never
/// overflow; the result is `0` or `inf` only when the true value lies outside
/// the `f64` range.
pub fn ball_volume(dim: usize, radius: f64) -> f64 {
    let (mantissa, exponent) = ball_volume_parts(dim, radius);
    scale_by_pow2(mantissa, exponent)
}

/// Natural logarithm of [`ball_volume`], finite for every `dim >= 1`.
pub fn ln_ball_volume(dim: usize, radius: f64) -> f64 {
    let (mantissa, exponent) = ball_volume_parts(dim, radius);
    mantissa.ln() + exponent as f64 * std::f64::consts::LN_2
}

fn ball_volume_parts(dim: usize, radius: f64) -> (f64, i64) {
    assert!(dim >= 1 && radius > 0.0);
    let two_pi = 2.0 * std::f64::consts::PI;
    let (mut m, mut e) = if dim % 2 == 1 { split_pow2(2.0 * radius) } else { (1.0, 0) };
    let mut k = if dim % 2 == 1 { 3 } else { 2 };
    let r2 = radius * radius;
    while k <= dim {
        m *= two_pi * r2 / k as f64;
        let (mm, ee) = split_pow2(m);
        m = mm;
        e += ee;
        k += 2;
    }
    (m, e)
}

fn split_pow2(v: f64) -> (f64, i64) {
    if v == 0.0 || !v.is_finite() {
        return (v, 0);
    }
    let e = v.abs().log2().floor() as i64;
    let m = scale_by_pow2(v, -e);
    (m, e)
}

fn scale_by_pow2(v: f64, e: i64) -> f64 {
    let mut out = v;
    let mut e = e;
    while e > 1000 {
        out *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        out *= 2f64.powi(-1000);
        e += 1000;
    }
    out * 2f64.powi(e as i32)
}

/// How the radii of a count/volume table are chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum RadiusRule {
    /// `N = C₁ · d · m` for each multiplier `m`.
    Multiples(Vec<f64>),
    /// The same explicit radii for every dimension.
    Fixed(Vec<f64>),
}

impl RadiusRule {
    pub fn radii(&self, dim: usize, c1: f64) -> Vec<f64> {
        match self {
            RadiusRule::Multiples(ms) => ms.iter().map(|m| c1 * dim as f64 * m).collect(),
            RadiusRule::Fixed(rs) => rs.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountVolumeRow {
    pub dim: usize,
    pub radius: f64,
    pub count: BigUint,
    pub volume: f64,
    pub ratio: f64,
    /// `ratio <= 2 e^{1/(8C₁²)}`.
    pub upper_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountVolumeReport {
    pub c1: f64,
    pub upper_bound: f64,
    pub rows: Vec<CountVolumeRow>,
    /// Smallest `C₂` with `ratio >= 1/C₂` on every row.
    pub fitted_c2: f64,
}

impl CountVolumeReport {
    pub fn all_upper_ok(&self) -> bool {
        self.rows.iter().all(|r| r.upper_ok)
    }

    /// CSV with columns `d,N,count,volume,ratio,upper_ok`; counts are decimal strings.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["d", "N", "count", "volume", "ratio", "upper_ok"])?;
        for r in &self.rows {
            w.write_record([
                r.dim.to_string(),
                r.radius.to_string(),
                r.count.to_string(),
                r.volume.to_string(),
                r.ratio.to_string(),
                r.upper_ok.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Lattice-count versus volume table for Euclidean balls with `N >= C₁ d`.
pub fn count_volume_report(dims: &[usize], rule: &RadiusRule, c1: f64) -> Result<CountVolumeReport> {
    if !(c1 > 0.0) {
        return Err(Error::InvalidParameter(format!("C1 must be positive, got {c1}")));
    }
    let upper_bound = 2.0 * (1.0 / (8.0 * c1 * c1)).exp();
    let mut rows = Vec::new();
    for &dim in dims {
        for radius in rule.radii(dim, c1) {
            if radius < c1 * dim as f64 {
                return Err(Error::RegimeViolation(format!(
                    "radius {radius} is below C1*d = {} in dimension {dim}",
                    c1 * dim as f64
                )));
            }
            let spec = BallSpec::euclidean(dim, radius)?;
            let count = count_ball(&spec)?.count;
            let volume = ball_volume(dim, radius);
            let ratio = biguint_to_f64(&count) / volume;
            rows.push(CountVolumeRow { dim, radius, count, volume, ratio, upper_ok: ratio <= upper_bound });
        }
    }
    let fitted_c2 = rows.iter().map(|r| 1.0 / r.ratio).fold(0.0, f64::max);
    Ok(CountVolumeReport { c1, upper_bound, rows, fitted_c2 })
}

/// Nearest double to a big integer (saturates to `inf`).
pub fn biguint_to_f64(v: &BigUint) -> f64 {
    v.to_f64().unwrap_or(f64::INFINITY)
}
