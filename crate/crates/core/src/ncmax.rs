//! Schatten norms, semi-commutative `L_p` norms and the selfadjoint maximal norm
//!
//! `‖sup_j x_j‖_p = inf { ‖a‖_p : -a ⪯ x_j ⪯ a for all j }`.
//!
//! The infimum is a convex program in the `n²` real coordinates of `a`. It is
//! solved exactly when the family commutes (including `n = 1`) or `p = ∞`,
//! and otherwise by a log-barrier Newton method whose central points also
//! yield a dual feasible point, hence a rigorous lower bound. A bisection
//! over the level with Dykstra alternating projections is available as an
//! eigen-solve-only alternative.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::TorusField;
use crate::linalg::{eigh, hermitian_basis, inverse_pd, solve_spd, CMat, HermitianEigen, C64};

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("exponent must lie in [1, ∞], got {p}")));
    }
    Ok(())
}

/// `(Σ s_i^p)^{1/p}` of a nonnegative vector, `max` for `p = ∞`; scaled to avoid overflow.
pub fn lp_of(values: &[f64], p: f64) -> f64 {
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if p.is_infinite() || peak == 0.0 {
        return peak;
    }
    peak * values.iter().map(|v| (v.abs() / peak).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Singular values of `x` (eigenvalue moduli when `x` is exactly hermitian).
pub fn singular_values(x: &CMat) -> Vec<f64> {
    if x.is_hermitian(0.0) {
        eigh(x).values.iter().map(|v| v.abs()).collect()
    } else {
        eigh(&x.adjoint().matmul(x)).values.iter().map(|v| v.max(0.0).sqrt()).collect()
    }
}

/// `‖x‖_p = (tr |x|^p)^{1/p}` with the unnormalized trace.
pub fn schatten_norm(x: &CMat, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(lp_of(&singular_values(x), p))
}

/// `(Σ_x ‖f(x)‖_p^p)^{1/p}`, or the largest site norm for `p = ∞`.
pub fn field_lp_norm(f: &TorusField, p: f64) -> Result<f64> {
    check_exponent(p)?;
    let per_site: Vec<f64> = (0..f.sites()).map(|s| lp_of(&singular_values(&f.site(s)), p)).collect();
    Ok(lp_of(&per_site, p))
}

mod exponent_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Finite(f64),
        Tag(String),
    }

    pub fn serialize<S: Serializer>(p: &f64, s: S) -> Result<S::Ok, S::Error> {
        if p.is_infinite() {
            Repr::Tag("inf".into()).serialize(s)
        } else {
            Repr::Finite(*p).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Finite(v) => Ok(v),
            Repr::Tag(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Tag(t) => Err(serde::de::Error::custom(format!("unknown exponent {t}"))),
        }
    }
}

/// How a certificate was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MajorantMethod {
    /// Closed form (`p = ∞`, scalar or commuting family).
    Exact,
    /// Log-barrier Newton method with a dual lower bound.
    Barrier,
    /// Level bisection with Dykstra alternating projections.
    Dykstra,
}

/// A feasible majorant `a ⪰ ±x_j` and how close `‖a‖_p` is to the infimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MajorantCertificate {
    #[serde(with = "exponent_serde")]
    pub p: f64,
    pub value: f64,
    pub a: CMat,
    /// `max(0, -min_j λ_min(a ∓ x_j))`.
    #[serde(rename = "residual")]
    pub feasibility_residual: f64,
    /// Best lower bound on the infimum that was established.
    pub lower_bound: f64,
    /// `value - lower_bound`.
    #[serde(rename = "gap")]
    pub gap_estimate: f64,
    pub converged: bool,
    pub method: MajorantMethod,
}

impl MajorantCertificate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MajorantOptions {
    /// Relative gap at which a certificate counts as converged.
    pub tol: f64,
    pub method: MajorantMethod,
    /// Iteration cap (Newton steps for the barrier, projection sweeps per level for Dykstra).
    pub max_iter: usize,
}

impl Default for MajorantOptions {
    fn default() -> Self {
        MajorantOptions { tol: 1e-4, method: MajorantMethod::Barrier, max_iter: 50_000 }
    }
}

/// Hermitian tolerance for family members, relative to their size.
const FAMILY_HERMITIAN_TOL: f64 = 1e-10;

fn validate_family(xs: &[CMat]) -> Result<usize> {
    let n = xs.first().map(|x| x.n()).ok_or_else(|| Error::InvalidParameter("empty family".into()))?;
    for (i, x) in xs.iter().enumerate() {
        if x.n() != n {
            return Err(Error::ShapeMismatch(format!("matrix {i} is {}x{}, expected {n}x{n}", x.n(), x.n())));
        }
        let defect = x.hermitian_defect();
        if defect > FAMILY_HERMITIAN_TOL * (1.0 + x.max_abs()) {
            return Err(Error::NonHermitian { index: i, defect });
        }
    }
    Ok(n)
}

/// `max(0, -min λ_min(a ∓ x_j))`.
pub fn feasibility_residual(a: &CMat, xs: &[CMat]) -> f64 {
    xs.iter().flat_map(|x| [(a - x).min_eigenvalue(), (a + x).min_eigenvalue()]).fold(0.0, |r, low| r.max(-low))
}

/// `max_j ‖x_j‖_p`, a lower bound for the maximal norm since `±x_j ⪯ a` forces `‖x_j‖_p <= ‖a‖_p`.
pub fn singleton_lower_bound(xs: &[CMat], p: f64) -> f64 {
    xs.iter().map(|x| lp_of(&singular_values(x), p)).fold(0.0, f64::max)
}

/// `‖Σ_j |x_j|‖_p`, the norm of an explicit feasible point.
pub fn sum_abs_upper_bound(xs: &[CMat], p: f64) -> f64 {
    lp_of(&singular_values(&sum_abs(xs)), p)
}

fn sum_abs(xs: &[CMat]) -> CMat {
    let n = xs[0].n();
    xs.iter().fold(CMat::zeros(n), |acc, x| &acc + &crate::linalg::abs(&x.hermitian_part())).hermitian_part()
}

/// Selfadjoint maximal norm `inf {‖a‖_p : -a ⪯ x_j ⪯ a}` with a certificate.
pub fn majorant_norm(xs: &[CMat], p: f64, opts: &MajorantOptions) -> Result<MajorantCertificate> {
    check_exponent(p)?;
    let n = validate_family(xs)?;
    let xs: Vec<CMat> = xs.iter().map(|x| x.hermitian_part()).collect();
    let lower = singleton_lower_bound(&xs, p);

    if p.is_infinite() {
        let level = xs.iter().map(|x| lp_of(&singular_values(x), f64::INFINITY)).fold(0.0, f64::max);
        return Ok(exact_certificate(CMat::identity(n).scale(level), level, p, &xs));
    }
    if n == 1 {
        let level = xs.iter().map(|x| x.get(0, 0).re.abs()).fold(0.0, f64::max);
        return Ok(exact_certificate(CMat::scalar(level), level, p, &xs));
    }
    if let Some(eig) = common_eigenbasis(&xs) {
        let maxima: Vec<f64> = (0..n)
            .map(|k| {
                xs.iter()
                    .map(|x| {
                        let v = (0..n).map(|i| eig.vectors.get(i, k)).collect::<Vec<_>>();
                        quad_form(x, &v).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        let a = eig.reconstruct(&maxima);
        return Ok(exact_certificate(a, lp_of(&maxima, p), p, &xs));
    }
    if lower == 0.0 {
        return Ok(exact_certificate(CMat::zeros(n), 0.0, p, &xs));
    }

    // Work with the family scaled to unit operator norm.
    let scale = xs.iter().map(|x| lp_of(&singular_values(x), f64::INFINITY)).fold(0.0, f64::max);
    let unit: Vec<CMat> = xs.iter().map(|x| x.scale(1.0 / scale)).collect();
    let (a_unit, dual) = match opts.method {
        MajorantMethod::Dykstra => (dykstra_search(&unit, p, opts), 0.0),
        _ => barrier_search(&unit, p, opts),
    };
    let mut a = a_unit.scale(scale).hermitian_part();
    // Projection iterates are feasible only to a tolerance; lifting by the
    // worst violation makes the certificate exactly feasible.
    let shortfall = feasibility_residual(&a, &xs);
    if shortfall > 0.0 {
        a = &a + &CMat::identity(n).scale(shortfall);
    }
    let value = lp_of(&singular_values(&a), p);
    let lower_bound = lower.max(dual * scale).min(value);
    let gap = value - lower_bound;
    Ok(MajorantCertificate {
        p,
        value,
        feasibility_residual: feasibility_residual(&a, &xs),
        a,
        lower_bound,
        gap_estimate: gap,
        converged: gap <= opts.tol * value,
        method: if opts.method == MajorantMethod::Dykstra { MajorantMethod::Dykstra } else { MajorantMethod::Barrier },
    })
}

fn exact_certificate(a: CMat, value: f64, p: f64, xs: &[CMat]) -> MajorantCertificate {
    MajorantCertificate {
        p,
        value,
        feasibility_residual: feasibility_residual(&a, xs),
        a,
        lower_bound: value,
        gap_estimate: 0.0,
        converged: true,
        method: MajorantMethod::Exact,
    }
}

fn quad_form(x: &CMat, v: &[C64]) -> f64 {
    let n = x.n();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += v[i].conj() * x.get(i, j) * v[j];
        }
    }
    acc.re
}

/// Eigenbasis diagonalizing every member, when the family commutes.
///
/// For a commuting family the pinching onto this basis maps any feasible `a`
/// to a feasible diagonal one of no larger Schatten norm, so the problem
/// splits into scalar maxima per eigenvector.
fn common_eigenbasis(xs: &[CMat]) -> Option<HermitianEigen> {
    let size: f64 = xs.iter().map(|x| x.frobenius_norm()).fold(0.0, f64::max);
    if size == 0.0 {
        return None;
    }
    for (i, x) in xs.iter().enumerate() {
        for y in &xs[i + 1..] {
            if (&x.matmul(y) - &y.matmul(x)).frobenius_norm() > 1e-12 * size * size {
                return None;
            }
        }
    }
    // Generic combination: irrational weights separate the joint eigenvalues.
    let n = xs[0].n();
    let combo = xs.iter().enumerate().fold(CMat::zeros(n), |acc, (j, x)| {
        let w = 0.5 + ((j as f64 + 1.0) * 0.618_033_988_749_894_9).fract();
        &acc + &x.scale(w)
    });
    let eig = eigh(&combo);
    let u = &eig.vectors;
    for x in xs {
        let d = u.adjoint().matmul(x).matmul(u);
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| d.get(i, j).norm_sqr())
            .sum();
        if off.sqrt() > 1e-10 * size {
            return None;
        }
    }
    Some(eig)
}

/// Constraint matrices `y` with `a ⪰ y`: `x_j` always, `-x_j` unless `x_j ⪰ 0`
/// (then `a ⪰ x_j ⪰ 0 ⪰ -x_j` already).
fn constraints(xs: &[CMat]) -> Vec<CMat> {
    let mut ys = Vec::with_capacity(2 * xs.len());
    for x in xs {
        ys.push(x.clone());
        if x.min_eigenvalue() < 0.0 {
            ys.push(-x);
        }
    }
    ys
}

struct Barrier<'a> {
    basis: Vec<CMat>,
    ys: &'a [CMat],
    p: f64,
}

struct Point {
    a: CMat,
    /// `(a - y_i)⁻¹`.
    inverses: Vec<CMat>,
    log_dets: f64,
    eig: HermitianEigen,
    trace_power: f64,
}

impl Barrier<'_> {
    fn assemble(&self, theta: &[f64]) -> CMat {
        let n = self.basis[0].n();
        let mut a = CMat::zeros(n);
        for (b, t) in self.basis.iter().zip(theta) {
            for (dst, src) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *dst += src * t;
            }
        }
        a
    }

    fn point(&self, theta: &[f64]) -> Option<Point> {
        let a = self.assemble(theta);
        let mut inverses = Vec::with_capacity(self.ys.len());
        let mut log_dets = 0.0;
        for y in self.ys {
            let (inv, ld) = inverse_pd(&(&a - y))?;
            inverses.push(inv);
            log_dets += ld;
        }
        let eig = eigh(&a);
        if eig.values[0] <= 0.0 {
            return None;
        }
        let trace_power = eig.values.iter().map(|v| v.powf(self.p)).sum();
        Some(Point { a, inverses, log_dets, eig, trace_power })
    }

    fn objective(&self, t: f64, pt: &Point) -> f64 {
        t * pt.trace_power - pt.log_dets
    }

    /// Gradient and Hessian of `t tr(a^p) - Σ log det(a - y_i)` in basis coordinates.
    fn derivatives(&self, t: f64, pt: &Point) -> (Vec<f64>, Vec<f64>) {
        let dim = self.basis.len();
        let p = self.p;
        let grad_trace = pt.eig.apply(|v| p * v.powf(p - 1.0));
        let mut grad = vec![0.0; dim];
        let mut hess = vec![0.0; dim * dim];
        for (r, b) in self.basis.iter().enumerate() {
            grad[r] = t * grad_trace.real_inner(b) - pt.inverses.iter().map(|s| s.real_inner(b)).sum::<f64>();
        }
        // Barrier part: Re tr(S⁻¹ B_r S⁻¹ B_s).
        for s_inv in &pt.inverses {
            let prods: Vec<CMat> = self.basis.iter().map(|b| s_inv.matmul(b)).collect();
            for r in 0..dim {
                for c in r..dim {
                    let v = prods[r].real_inner(&prods[c]);
                    hess[r * dim + c] += v;
                }
            }
        }
        // Objective part via first divided differences of λ ↦ p λ^{p-1}.
        if p != 1.0 {
            let vals = &pt.eig.values;
            let n = vals.len();
            let deriv = |x: f64| p * x.powf(p - 1.0);
            let second = |x: f64| p * (p - 1.0) * x.powf(p - 2.0);
            let gamma = CMat::from_fn(n, |i, k| {
                let (li, lk) = (vals[i], vals[k]);
                let v = if (li - lk).abs() <= 1e-8 * li.abs().max(lk.abs()) {
                    second(0.5 * (li + lk))
                } else {
                    (deriv(li) - deriv(lk)) / (li - lk)
                };
                C64::new(v, 0.0)
            });
            let u = &pt.eig.vectors;
            let rotated: Vec<CMat> = self.basis.iter().map(|b| u.adjoint().matmul(b).matmul(u)).collect();
            for r in 0..dim {
                for c in r..dim {
                    let mut acc = 0.0;
                    for i in 0..n {
                        for k in 0..n {
                            acc += (rotated[r].get(k, i) * gamma.get(i, k) * rotated[c].get(i, k)).re;
                        }
                    }
                    hess[r * dim + c] += t * acc;
                }
            }
        }
        for r in 0..dim {
            for c in 0..r {
                hess[r * dim + c] = hess[c * dim + r];
            }
        }
        (grad, hess)
    }

    /// Dual bound on `min tr(a^p)` from `Z_i = S_i⁻¹ / t`.
    fn dual_bound(&self, t: f64, pt: &Point) -> f64 {
        let n = pt.a.n();
        let mut zs: Vec<CMat> = pt.inverses.iter().map(|s| s.scale(1.0 / t)).collect();
        let w = zs.iter().fold(CMat::zeros(n), |acc, z| &acc + z).hermitian_part();
        let w_eig = eigh(&w);
        let p = self.p;
        let offset: f64 = if p == 1.0 {
            let top = w_eig.values.last().copied().unwrap_or(0.0);
            if top > 1.0 {
                zs.iter_mut().for_each(|z| *z = z.scale(1.0 / top));
            }
            0.0
        } else {
            let q = p / (p - 1.0);
            -(p - 1.0) * w_eig.values.iter().map(|v| (v.max(0.0) / p).powf(q)).sum::<f64>()
        };
        offset + zs.iter().zip(self.ys).map(|(z, y)| z.real_inner(y)).sum::<f64>()
    }
}

/// Barrier path-following. Returns the final majorant and a lower bound on the norm.
fn barrier_search(xs: &[CMat], p: f64, opts: &MajorantOptions) -> (CMat, f64) {
    let n = xs[0].n();
    let ys = constraints(xs);
    let barrier = Barrier { basis: hermitian_basis(n), ys: &ys, p };
    let start = &sum_abs(xs) + &CMat::identity(n);
    let mut theta: Vec<f64> = barrier.basis.iter().map(|b| start.real_inner(b)).collect();
    let mut pt = barrier.point(&theta).expect("sum of |x_j| plus identity is strictly feasible");
    let nu = (ys.len() * n) as f64;
    let mut t = nu / pt.trace_power;
    let mut best_lower: f64 = 0.0;
    let internal_tol = (opts.tol * 1e-4).max(1e-11);
    let mut newton_steps = 0usize;
    'outer: for _ in 0..80 {
        for _ in 0..200 {
            if newton_steps >= opts.max_iter {
                break 'outer;
            }
            newton_steps += 1;
            let (grad, hess) = barrier.derivatives(t, &pt);
            let dim = grad.len();
            let mut step: Vec<f64> = grad.iter().map(|g| -g).collect();
            let mut h = hess.clone();
            if !solve_spd(&mut h, &mut step, dim) {
                let ridge = 1e-12 * (0..dim).map(|i| hess[i * dim + i].abs()).fold(0.0, f64::max).max(1e-300);
                let mut h = hess.clone();
                (0..dim).for_each(|i| h[i * dim + i] += ridge);
                step = grad.iter().map(|g| -g).collect();
                if !solve_spd(&mut h, &mut step, dim) {
                    break;
                }
            }
            let slope: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();
            if -slope / 2.0 <= 1e-12 {
                break;
            }
            let f0 = barrier.objective(t, &pt);
            let mut s = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> = theta.iter().zip(&step).map(|(a, d)| a + s * d).collect();
                if let Some(next) = barrier.point(&trial) {
                    if barrier.objective(t, &next) <= f0 + 0.25 * s * slope {
                        accepted = Some((trial, next));
                        break;
                    }
                }
                s *= 0.5;
            }
            match accepted {
                Some((trial, next)) => {
                    theta = trial;
                    pt = next;
                }
                None => break,
            }
        }
        let dual = barrier.dual_bound(t, &pt);
        if dual > 0.0 {
            best_lower = best_lower.max(dual.powf(1.0 / p));
        }
        let value = pt.trace_power.powf(1.0 / p);
        if value - best_lower <= internal_tol * value || nu / t <= 1e-14 * pt.trace_power {
            break;
        }
        t *= 8.0;
    }
    (pt.a, best_lower)
}

/// Projection of a real vector onto `{v : ‖v‖_p <= radius}` in the Euclidean metric.
pub fn project_lp_ball(u: &[f64], p: f64, radius: f64) -> Vec<f64> {
    if lp_of(u, p) <= radius {
        return u.to_vec();
    }
    if p.is_infinite() {
        return u.iter().map(|v| v.clamp(-radius, radius)).collect();
    }
    if p == 2.0 {
        let shrink = radius / lp_of(u, 2.0);
        return u.iter().map(|v| v * shrink).collect();
    }
    if p == 1.0 {
        // Soft threshold at the level making the ℓ¹ norm equal to `radius`.
        let mut mags: Vec<f64> = u.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let mut cum = 0.0;
        let mut theta = 0.0;
        for (k, m) in mags.iter().enumerate() {
            cum += m;
            let candidate = (cum - radius) / (k + 1) as f64;
            if candidate < *m {
                theta = candidate;
            }
        }
        return u.iter().map(|v| v.signum() * (v.abs() - theta).max(0.0)).collect();
    }
    // KKT: w_i + μ p w_i^{p-1} = |u_i|; bisect on μ, then on each w_i.
    let solve_w = |m: f64, mu: f64| {
        let (mut lo, mut hi) = (0.0, m);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid + mu * p * mid.powf(p - 1.0) > m {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let norm_at = |mu: f64| lp_of(&u.iter().map(|v| solve_w(v.abs(), mu)).collect::<Vec<_>>(), p);
    let (mut lo, mut hi) = (0.0, 1.0);
    while norm_at(hi) > radius {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if norm_at(mid) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    u.iter().map(|v| v.signum() * solve_w(v.abs(), hi)).collect()
}

/// Frobenius projection onto `{a : ‖a‖_p <= radius}`.
fn project_schatten_ball(a: &CMat, p: f64, radius: f64) -> CMat {
    let eig = eigh(a);
    eig.reconstruct(&project_lp_ball(&eig.values, p, radius))
}

/// Frobenius projection onto `{a : a ⪰ y}`.
fn project_above(a: &CMat, y: &CMat) -> CMat {
    let eig = eigh(&(a - y));
    &eig.apply(|v| v.max(0.0)) + y
}

const DYKSTRA_FEASIBILITY: f64 = 1e-6;
const DYKSTRA_BISECTION_WIDTH: f64 = 1e-4;
/// Sweeps over which the violation must shrink by 1% for a level to stay in play.
const DYKSTRA_STALL_WINDOW: usize = 500;

/// Dykstra's algorithm for `∩_i {a ⪰ y_i} ∩ {‖a‖_p <= level}` from `start`.
/// Returns the last iterate when it is feasible to [`DYKSTRA_FEASIBILITY`].
fn dykstra_feasible(ys: &[CMat], p: f64, level: f64, start: &CMat, max_iter: usize) -> Option<CMat> {
    let n = start.n();
    let sets = ys.len() + 1;
    let mut increments = vec![CMat::zeros(n); sets];
    let mut x = start.clone();
    let mut checkpoint = f64::INFINITY;
    let mut best = f64::INFINITY;
    for sweep in 0..max_iter {
        for (k, inc) in increments.iter_mut().enumerate() {
            let shifted = &x + inc;
            let projected =
                if k < ys.len() { project_above(&shifted, &ys[k]) } else { project_schatten_ball(&shifted, p, level) };
            *inc = &shifted - &projected;
            x = projected;
        }
        let viol = ys.iter().map(|y| -(&x - y).min_eigenvalue()).fold(0.0, f64::max);
        if viol <= DYKSTRA_FEASIBILITY * (1.0 + level) {
            return Some(x);
        }
        // An empty intersection shows up as a violation that stops shrinking.
        best = best.min(viol);
        if sweep % DYKSTRA_STALL_WINDOW == DYKSTRA_STALL_WINDOW - 1 {
            if best > 0.99 * checkpoint {
                return None;
            }
            checkpoint = best;
        }
    }
    None
}

fn dykstra_search(xs: &[CMat], p: f64, opts: &MajorantOptions) -> CMat {
    let ys = constraints(xs);
    let mut best = sum_abs(xs);
    let mut hi = lp_of(&singular_values(&best), p);
    let mut lo = singleton_lower_bound(xs, p);
    let cap = opts.max_iter.max(1);
    while hi - lo > DYKSTRA_BISECTION_WIDTH * hi {
        let mid = 0.5 * (lo + hi);
        match dykstra_feasible(&ys, p, mid, &best, cap) {
            Some(a) => {
                hi = lp_of(&singular_values(&a), p).min(mid * (1.0 + DYKSTRA_FEASIBILITY));
                best = a;
            }
            None => lo = mid,
        }
    }
    best
}

/// Maximal norm of a family of fields with its per-site certificates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldMaximalNorm {
    pub value: f64,
    pub certificates: Vec<MajorantCertificate>,
}

impl FieldMaximalNorm {
    pub fn converged(&self) -> bool {
        self.certificates.iter().all(|c| c.converged)
    }

    pub fn max_gap(&self) -> f64 {
        self.certificates.iter().map(|c| c.gap_estimate).fold(0.0, f64::max)
    }
}

fn check_family_shape(fs: &[TorusField]) -> Result<()> {
    let first = fs.first().ok_or_else(|| Error::InvalidParameter("empty field family".into()))?;
    for (i, f) in fs.iter().enumerate() {
        if f.shape() != first.shape() {
            return Err(Error::ShapeMismatch(format!(
                "field {i} has shape {:?}, expected {:?}",
                f.shape(),
                first.shape()
            )));
        }
    }
    Ok(())
}

/// `(Σ_x majorant_norm({f_j(x)}_j)^p)^{1/p}`.
///
/// Both the constraints `-a(x) ⪯ f_j(x) ⪯ a(x)` and the objective
/// `Σ_x tr a(x)^p` separate over sites, so the joint problem is solved site by site.
pub fn field_maximal_norm(fs: &[TorusField], p: f64, opts: &MajorantOptions) -> Result<FieldMaximalNorm> {
    check_exponent(p)?;
    check_family_shape(fs)?;
    let certificates: Vec<MajorantCertificate> = (0..fs[0].sites())
        .into_par_iter()
        .map(|s| {
            let family: Vec<CMat> = fs.iter().map(|f| f.site(s)).collect();
            majorant_norm(&family, p, opts)
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = certificates.iter().map(|c| c.value).collect();
    Ok(FieldMaximalNorm { value: lp_of(&values, p), certificates })
}

/// Scalar (`n = 1`) fast path: `‖max_j |f_j|‖_p`, no certificates.
pub fn scalar_maximal_norm(fs: &[TorusField], p: f64) -> Result<f64> {
    check_exponent(p)?;
    check_family_shape(fs)?;
    if fs[0].n() != 1 {
        return Err(Error::ShapeMismatch("scalar maximal norm needs n = 1".into()));
    }
    let maxima: Vec<f64> =
        (0..fs[0].sites()).map(|s| fs.iter().map(|f| f.values()[s].norm()).fold(0.0, f64::max)).collect();
    Ok(lp_of(&maxima, p))
}

/// Column and row square-function norms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrNormResult {
    /// `‖(Σ x_j† x_j)^{1/2}‖_p`.
    pub column: f64,
    /// `‖(Σ x_j x_j†)^{1/2}‖_p`.
    pub row: f64,
    /// `max(column, row)`.
    pub combined: f64,
}

fn square_function_norm(gram: &CMat, p: f64) -> f64 {
    let roots: Vec<f64> = eigh(gram).values.iter().map(|v| v.max(0.0).sqrt()).collect();
    lp_of(&roots, p)
}

fn check_cr_exponent(p: f64) -> Result<()> {
    check_exponent(p)?;
    if p < 2.0 {
        return Err(Error::Unsupported(format!("column/row norms are implemented for p >= 2, got {p}")));
    }
    Ok(())
}

fn grams(xs: &[CMat]) -> (CMat, CMat, bool) {
    let n = xs[0].n();
    let all_hermitian = xs.iter().all(|x| x.is_hermitian(0.0));
    let col = xs.iter().fold(CMat::zeros(n), |acc, x| &acc + &x.adjoint().matmul(x));
    let row = if all_hermitian {
        col.clone()
    } else {
        xs.iter().fold(CMat::zeros(n), |acc, x| &acc + &x.matmul(&x.adjoint()))
    };
    (col, row, all_hermitian)
}

/// Column/row square-function norms of a finite family, `p >= 2`.
pub fn cr_norm(xs: &[CMat], p: f64) -> Result<CrNormResult> {
    check_cr_exponent(p)?;
    if xs.is_empty() {
        return Err(Error::InvalidParameter("empty family".into()));
    }
    let (col, row, same) = grams(xs);
    let column = square_function_norm(&col, p);
    let row = if same { column } else { square_function_norm(&row, p) };
    Ok(CrNormResult { column, row, combined: column.max(row) })
}

/// Field version: site norms combined in `ℓ_p` over the torus.
pub fn field_cr_norm(fs: &[TorusField], p: f64) -> Result<CrNormResult> {
    check_cr_exponent(p)?;
    check_family_shape(fs)?;
    let mut cols = Vec::with_capacity(fs[0].sites());
    let mut rows = Vec::with_capacity(fs[0].sites());
    for s in 0..fs[0].sites() {
        let family: Vec<CMat> = fs.iter().map(|f| f.site(s)).collect();
        let r = cr_norm(&family, p)?;
        cols.push(r.column);
        rows.push(r.row);
    }
    let column = lp_of(&cols, p);
    let row = lp_of(&rows, p);
    Ok(CrNormResult { column, row, combined: column.max(row) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schatten_examples() {
        let x = CMat::from_real_diag(&[3.0, -4.0]);
        assert_eq!(schatten_norm(&x, 1.0).unwrap(), 7.0);
        assert_eq!(schatten_norm(&x, f64::INFINITY).unwrap(), 4.0);
        assert!((schatten_norm(&x, 2.0).unwrap() - 5.0).abs() < 1e-15);
        assert!(schatten_norm(&x, 0.5).is_err());
    }

    #[test]
    fn lp_ball_projection_lands_on_sphere() {
        let u = [3.0, -1.0, 0.5, 2.0];
        for p in [1.0, 1.5, 2.0, 3.0, f64::INFINITY] {
            let v = project_lp_ball(&u, p, 1.0);
            assert!((lp_of(&v, p) - 1.0).abs() < 1e-9, "p = {p}");
        }
    }

    #[test]
    fn exponent_json() {
        let c =
            majorant_norm(&[CMat::from_real_diag(&[1.0, -2.0])], f64::INFINITY, &MajorantOptions::default()).unwrap();
        let text = c.to_json().unwrap();
        assert!(text.contains("\"p\":\"inf\""));
        let back: MajorantCertificate = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }
}
