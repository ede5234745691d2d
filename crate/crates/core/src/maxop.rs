//! Dyadic maximal operators: regime splitting of radii, families of ball
//! averages, ratio experiments and the large-scale domination check.

use std::io::Write;

use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{convolve_ball, Path, Shape, TorusField};
use crate::lattice::{biguint_to_f64, count_ball, count_volume_report, BallSpec, RadiusRule};
use crate::linalg::CMat;
use crate::ncmax::{field_lp_norm, field_maximal_norm, scalar_maximal_norm, MajorantOptions};
use crate::sampling::{rng_for, sample_ball_shell};

/// Constants splitting dyadic radii into small, intermediate and large scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeConfig {
    /// Small scales: `N <= c0 √d`.
    pub c0: f64,
    /// Intermediate scales: `c1 √d <= N <= c2 d`.
    pub c1: f64,
    pub c2: f64,
    /// Large scales: `N >= c3 d`.
    pub c3: f64,
    /// Largest dyadic radius considered.
    pub n_max: u64,
}

impl Default for RegimeConfig {
    fn default() -> Self {
        RegimeConfig { c0: 1.0, c1: 1.0, c2: 1.0, c3: 1.0, n_max: 64 }
    }
}

impl RegimeConfig {
    pub fn new(c0: f64, c1: f64, c2: f64, c3: f64, n_max: u64) -> Result<Self> {
        for (name, c) in [("c0", c0), ("c1", c1), ("c2", c2), ("c3", c3)] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {c}")));
            }
        }
        if n_max == 0 {
            return Err(Error::InvalidParameter("n_max must be at least 1".into()));
        }
        // With c1 <= c0 the small and intermediate ranges overlap at every d,
        // and with c3 <= c2 so do the intermediate and large ones.
        if c1 > c0 || c3 > c2 {
            return Err(Error::InvalidParameter(format!(
                "regimes can leave gaps: need c1 <= c0 and c3 <= c2, got c0={c0}, c1={c1}, c2={c2}, c3={c3}"
            )));
        }
        Ok(RegimeConfig { c0, c1, c2, c3, n_max })
    }

    pub fn with_n_max(&self, n_max: u64) -> Self {
        RegimeConfig { n_max, ..self.clone() }
    }
}

/// Dyadic radii `{1, 2, 4, …} ∩ [1, n_max]`.
pub fn dyadic_up_to(n_max: u64) -> Vec<u64> {
    (0..64).map(|k| 1u64 << k).take_while(|&r| r <= n_max).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Small,
    Mid,
    Large,
    Union,
}

impl Regime {
    pub fn label(self) -> &'static str {
        match self {
            Regime::Small => "small",
            Regime::Mid => "mid",
            Regime::Large => "large",
            Regime::Union => "union",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DyadicRegimes {
    pub small: Vec<u64>,
    pub mid: Vec<u64>,
    pub large: Vec<u64>,
}

impl DyadicRegimes {
    /// Sorted, deduplicated union of the three lists.
    pub fn union(&self) -> Vec<u64> {
        let mut all: Vec<u64> = self.small.iter().chain(&self.mid).chain(&self.large).copied().collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    pub fn get(&self, regime: Regime) -> Vec<u64> {
        match regime {
            Regime::Small => self.small.clone(),
            Regime::Mid => self.mid.clone(),
            Regime::Large => self.large.clone(),
            Regime::Union => self.union(),
        }
    }
}

/// Splits the dyadic radii up to `cfg.n_max` into the three scale regimes.
pub fn dyadic_radii(dim: usize, cfg: &RegimeConfig) -> Result<DyadicRegimes> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    let d = dim as f64;
    let root = d.sqrt();
    let all = dyadic_up_to(cfg.n_max);
    let pick = |keep: &dyn Fn(f64) -> bool| all.iter().copied().filter(|&r| keep(r as f64)).collect::<Vec<_>>();
    let regimes = DyadicRegimes {
        small: pick(&|r| r <= cfg.c0 * root),
        mid: pick(&|r| cfg.c1 * root <= r && r <= cfg.c2 * d),
        large: pick(&|r| r >= cfg.c3 * d),
    };
    let covered = regimes.union();
    if let Some(&gap) = all.iter().find(|r| covered.binary_search(r).is_err()) {
        return Err(Error::CoverageGap(gap));
    }
    Ok(regimes)
}

/// Ball averages of `f` at each radius, via the spectral path.
pub fn maximal_family(f: &TorusField, radii: &[u64]) -> Result<Vec<TorusField>> {
    radii.iter().map(|&r| convolve_ball(f, r as f64, Path::Spectral)).collect()
}

/// Smallest power of two that is at least `2 n_max + 2`.
pub fn torus_side_for(n_max: u64) -> usize {
    (2 * n_max as usize + 2).next_power_of_two()
}

/// Built-in experiment inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputKind {
    /// `δ_0 · I_n`.
    Delta { n: usize },
    /// Indicator of the centred ball of radius `M/4`, times `I_n`.
    SubBall { n: usize },
    /// Seeded positive semidefinite field.
    RandomPositive { n: usize, seed: u64 },
    /// `v(x) v(x)†` for seeded unit vectors `v(x)`.
    RankOneProjector { n: usize, seed: u64 },
}

impl InputKind {
    pub fn n(&self) -> usize {
        match *self {
            InputKind::Delta { n }
            | InputKind::SubBall { n }
            | InputKind::RandomPositive { n, .. }
            | InputKind::RankOneProjector { n, .. } => n,
        }
    }

    pub fn id(&self) -> String {
        match *self {
            InputKind::Delta { n } => format!("delta_n{n}"),
            InputKind::SubBall { n } => format!("sub_ball_n{n}"),
            InputKind::RandomPositive { n, seed } => format!("random_positive_n{n}_s{seed}"),
            InputKind::RankOneProjector { n, seed } => format!("rank_one_n{n}_s{seed}"),
        }
    }

    pub fn build(&self, side: usize, dim: usize) -> Result<TorusField> {
        match *self {
            InputKind::Delta { n } => TorusField::delta(side, dim, n),
            InputKind::SubBall { n } => {
                let r2 = ((side / 4) * (side / 4)) as i64;
                let id = CMat::identity(n);
                let zero = CMat::zeros(n);
                TorusField::from_fn(side, dim, n, |x| {
                    let norm2: i64 = x.iter().map(|&c| centred(c, side).pow(2)).sum();
                    if norm2 <= r2 {
                        id.clone()
                    } else {
                        zero.clone()
                    }
                })?
                .flag_positive()
            }
            InputKind::RandomPositive { n, seed } => TorusField::random_positive(side, dim, n, seed),
            InputKind::RankOneProjector { n, seed } => {
                let shape = Shape::new(side, dim, n)?;
                let mut values = Vec::with_capacity(shape.sites() * n * n);
                for site in 0..shape.sites() {
                    let mut rng = rng_for(seed, site as u64);
                    let mut v: Vec<C64> =
                        (0..n).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect();
                    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    v.iter_mut().for_each(|z| *z /= norm);
                    for i in 0..n {
                        for j in 0..n {
                            values.push(v[i] * v[j].conj());
                        }
                    }
                }
                TorusField::from_values(side, dim, n, values)?.flag_positive()
            }
        }
    }
}

fn centred(c: usize, side: usize) -> i64 {
    let c = c as i64;
    let side = side as i64;
    if 2 * c > side {
        c - side
    } else {
        c
    }
}

/// Torus sizing for one experiment dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentBudget {
    /// Site cap for scalar inputs.
    pub scalar_sites: usize,
    /// Site cap for matrix inputs, where every site solves a majorant problem.
    pub matrix_sites: usize,
}

impl Default for ExperimentBudget {
    fn default() -> Self {
        ExperimentBudget { scalar_sites: 1 << 18, matrix_sites: 1 << 12 }
    }
}

/// Largest dyadic radius not above `n_max` whose torus fits the site cap, with that torus side.
pub fn fit_radius(dim: usize, n_max: u64, max_sites: usize) -> Result<(u64, usize)> {
    let mut r =
        *dyadic_up_to(n_max).last().ok_or_else(|| Error::InvalidParameter("n_max must be at least 1".into()))?;
    loop {
        let side = torus_side_for(r);
        let sites = (side as u128).checked_pow(dim as u32).unwrap_or(u128::MAX);
        if sites <= max_sites as u128 {
            return Ok((r, side));
        }
        if r == 1 {
            return Err(Error::BudgetExceeded { required: sites, budget: max_sites as u128 });
        }
        r /= 2;
    }
}

pub const P_BELOW_TWO_NOTE: &str = "p < 2: outside the dimension-free range for all radii; large-radius regime only";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub dim: usize,
    pub side: usize,
    pub p: f64,
    pub input_id: String,
    pub regime: Regime,
    pub radii: Vec<u64>,
    pub ratio: f64,
    pub converged: bool,
    pub runtime_ms: u128,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioTable {
    pub rows: Vec<RatioRow>,
}

impl RatioTable {
    /// CSV `d,M,p,input_id,regime,radii_count,ratio`. Timings stay out of the
    /// body so that reruns are byte-identical.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["d", "M", "p", "input_id", "regime", "radii_count", "ratio", "note"])?;
        for r in &self.rows {
            w.write_record([
                r.dim.to_string(),
                r.side.to_string(),
                r.p.to_string(),
                r.input_id.clone(),
                r.regime.label().to_string(),
                r.radii.len().to_string(),
                r.ratio.to_string(),
                r.note.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn rows_for<'a>(&'a self, input_id: &'a str, regime: Regime) -> impl Iterator<Item = &'a RatioRow> + 'a {
        self.rows.iter().filter(move |r| r.input_id == input_id && r.regime == regime)
    }
}

/// `‖sup_{N∈R} ℳ_N f‖_p / ‖f‖_p` for every dimension, input and regime.
///
/// Each dimension uses the largest dyadic `N_max` that fits the site budget
/// for the input's fiber size. For `p < 2` only the large regime is computed.
pub fn maximal_ratio_experiment(
    inputs: &[InputKind],
    p: f64,
    dims: &[usize],
    cfg: &RegimeConfig,
    budget: &ExperimentBudget,
    opts: &MajorantOptions,
) -> Result<RatioTable> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("exponent must be at least 1, got {p}")));
    }
    let mut jobs = Vec::new();
    for &dim in dims {
        for input in inputs {
            let cap = if input.n() == 1 { budget.scalar_sites } else { budget.matrix_sites };
            let (n_max, side) = fit_radius(dim, cfg.n_max, cap)?;
            let regimes = dyadic_radii(dim, &cfg.with_n_max(n_max))?;
            let wanted: &[Regime] =
                if p < 2.0 { &[Regime::Large] } else { &[Regime::Small, Regime::Mid, Regime::Large, Regime::Union] };
            for &regime in wanted {
                let radii = regimes.get(regime);
                if !radii.is_empty() {
                    jobs.push((dim, side, *input, regime, radii));
                }
            }
        }
    }
    // Rows come back in job order whatever the schedule.
    let rows = jobs
        .into_par_iter()
        .map(|(dim, side, input, regime, radii)| {
            let start = std::time::Instant::now();
            let f = input.build(side, dim)?;
            let family = maximal_family(&f, &radii)?;
            let (sup, converged) = if f.n() == 1 {
                (scalar_maximal_norm(&family, p)?, true)
            } else {
                let r = field_maximal_norm(&family, p, opts)?;
                (r.value, r.converged())
            };
            let ratio = sup / field_lp_norm(&f, p)?;
            Ok(RatioRow {
                dim,
                side,
                p,
                input_id: input.id(),
                regime,
                radii,
                ratio,
                converged,
                runtime_ms: start.elapsed().as_millis(),
                note: (p < 2.0).then(|| P_BELOW_TWO_NOTE.to_string()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RatioTable { rows })
}

/// Closed form of `‖sup_{N∈R} ℳ_N δ_0‖_2` on a torus large enough to embed every ball.
///
/// The sup at `x` is `1/c_i` for the smallest radius `N_i` with `x ∈ B_{N_i}`,
/// so the square norm is `Σ_i (c_i − c_{i−1}) / c_i²` over lattice counts.
pub fn delta_ratio_closed_form(dim: usize, radii: &[u64]) -> Result<f64> {
    let mut sorted = radii.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut prev = 0.0;
    let mut total = 0.0;
    for r in sorted {
        let c = biguint_to_f64(&count_ball(&BallSpec::euclidean(dim, r as f64)?)?.count);
        total += (c - prev) / (c * c);
        prev = c;
    }
    Ok(total.sqrt())
}

/// Parameters of the large-scale domination check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationCheck {
    pub dim: usize,
    pub radius: f64,
    /// `(N² + d/4)^{1/2}`: every cube `y + [-1/2, 1/2]^d` with `y ∈ B_N` lies in `B_{N1}`.
    pub n1: f64,
    /// `(N1² + d/4)^{1/2}`.
    pub n2: f64,
    /// Monte Carlo samples per site.
    pub mc_samples: usize,
    pub seed: u64,
}

pub const MIN_MC_SAMPLES: usize = 100_000;
pub const MC_SHELLS: usize = 16;
/// Largest accepted relative standard error of the pooled estimate.
pub const MC_REL_STDERR: f64 = 0.01;

impl DominationCheck {
    pub fn new(dim: usize, radius: f64, mc_samples: usize, seed: u64) -> Result<Self> {
        if dim == 0 || !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("need d >= 1 and N > 0, got d={dim}, N={radius}")));
        }
        if mc_samples < MIN_MC_SAMPLES {
            return Err(Error::InvalidParameter(format!("need at least {MIN_MC_SAMPLES} samples, got {mc_samples}")));
        }
        let quarter = dim as f64 / 4.0;
        let n1 = (radius * radius + quarter).sqrt();
        let n2 = (n1 * n1 + quarter).sqrt();
        Ok(DominationCheck { dim, radius, n1, n2, mc_samples, seed })
    }

    /// `(N1/N)^d`, computed as `(1 + d/(4N²))^{d/2}`.
    pub fn volume_ratio(&self) -> f64 {
        let d = self.dim as f64;
        (1.0 + d / (4.0 * self.radius * self.radius)).powf(d / 2.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationSite {
    pub site: usize,
    /// `ℳ_N f(x)`.
    pub average: f64,
    /// Monte Carlo estimate of the continuous average of the extension over `B_{N1}` at `x`.
    pub estimate: f64,
    pub stderr: f64,
    /// `constant · (estimate + 3 stderr)`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub check: DominationCheck,
    pub c1: f64,
    pub c2: f64,
    /// `2 C2 e^{1/(8 C1²)}`.
    pub constant: f64,
    pub volume_ratio: f64,
    /// `e^{1/(8 C1²)}`.
    pub volume_bound: f64,
    pub volume_ok: bool,
    /// Standard error of `Σ_x estimate(x)` relative to that sum.
    pub pooled_rel_stderr: f64,
    pub sites: Vec<DominationSite>,
}

impl DominationReport {
    pub fn violations(&self) -> Vec<&DominationSite> {
        self.sites.iter().filter(|s| !s.holds).collect()
    }

    pub fn all_hold(&self) -> bool {
        self.volume_ok && self.sites.iter().all(|s| s.holds)
    }
}

/// `C2 = 1 / min (lattice count / volume)` over `d <= max_dim`, `N = C1 d · {1, 2, 4}`.
pub fn fitted_lattice_c2(max_dim: usize, c1: f64) -> Result<f64> {
    let dims: Vec<usize> = (1..=max_dim).collect();
    Ok(count_volume_report(&dims, &RadiusRule::Multiples(vec![1.0, 2.0, 4.0]), c1)?.fitted_c2)
}

/// Compares `ℳ_N f` with the continuous ball average of the piecewise-constant
/// extension `F(z) = f(round(z))` over the larger ball `B_{N1}`.
///
/// Each site draws its own stream of stratified uniform points in `B_{N1}`
/// (16 equal-volume radial shells). The budget check uses the pooled sum over
/// sites: per-site relative errors blow up wherever the average is tiny.
pub fn large_scale_domination_check(
    f: &TorusField,
    chk: &DominationCheck,
    c1: f64,
    c2: f64,
) -> Result<DominationReport> {
    if !(c1 > 0.0 && c2 > 0.0) {
        return Err(Error::InvalidParameter(format!("C1 and C2 must be positive, got {c1}, {c2}")));
    }
    if chk.radius < c1 * chk.dim as f64 {
        return Err(Error::RegimeViolation(format!("N = {} is below C1 d = {}", chk.radius, c1 * chk.dim as f64)));
    }
    if f.n() != 1 || f.dim() != chk.dim {
        return Err(Error::ShapeMismatch(format!(
            "need a scalar field of dimension {}, got n={}, d={}",
            chk.dim,
            f.n(),
            f.dim()
        )));
    }
    let vals: Vec<f64> = f.values().iter().map(|z| z.re).collect();
    if f.values().iter().any(|z| z.re < 0.0 || z.im != 0.0) {
        return Err(Error::InvalidParameter("field must be real and nonnegative".into()));
    }
    if chk.mc_samples < MIN_MC_SAMPLES {
        return Err(Error::InvalidParameter(format!("need at least {MIN_MC_SAMPLES} samples")));
    }
    let shape = f.shape();
    // Points of B_{N1} round into B_{N1 + √d/2}; keep them from wrapping onto themselves.
    let reach = (chk.n1 + (chk.dim as f64).sqrt() / 2.0).floor() as usize;
    if 2 * reach + 1 > shape.side {
        return Err(Error::Embedding { side: shape.side, radius: chk.n1 });
    }
    let averages = convolve_ball(f, chk.radius, Path::Spatial)?;
    let constant = 2.0 * c2 * (1.0 / (8.0 * c1 * c1)).exp();
    let volume_ratio = chk.volume_ratio();
    let volume_bound = (1.0 / (8.0 * c1 * c1)).exp();
    let direct = (chk.n1 / chk.radius).powi(chk.dim as i32);
    let volume_ok = volume_ratio <= volume_bound && (direct - volume_ratio).abs() <= 1e-12 * volume_ratio;

    let per_shell = chk.mc_samples / MC_SHELLS;
    let estimates: Vec<(f64, f64)> = (0..shape.sites())
        .into_par_iter()
        .map(|site| {
            let mut rng = rng_for(chk.seed, site as u64);
            let mut z = vec![0.0; chk.dim];
            let base: Vec<i64> = shape.coords(site).into_iter().map(|c| c as i64).collect();
            let side = shape.side as i64;
            let mut mean = 0.0;
            let mut var = 0.0;
            for shell in 0..MC_SHELLS {
                let (mut s, mut s2) = (0.0, 0.0);
                for _ in 0..per_shell {
                    sample_ball_shell(&mut rng, chk.dim, chk.n1, shell, MC_SHELLS, &mut z);
                    let at = base
                        .iter()
                        .zip(&z)
                        .fold(0i64, |acc, (&b, zk)| acc * side + (b - zk.round() as i64).rem_euclid(side));
                    let v = vals[at as usize];
                    s += v;
                    s2 += v * v;
                }
                let m = s / per_shell as f64;
                let shell_var = (s2 / per_shell as f64 - m * m).max(0.0) * per_shell as f64 / (per_shell as f64 - 1.0);
                mean += m;
                var += shell_var / per_shell as f64;
            }
            let shells = MC_SHELLS as f64;
            (mean / shells, var.sqrt() / shells)
        })
        .collect();

    let pooled: f64 = estimates.iter().map(|e| e.0).sum();
    let pooled_se = estimates.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt();
    let pooled_rel_stderr = if pooled > 0.0 { pooled_se / pooled } else { 0.0 };
    if pooled_rel_stderr > MC_REL_STDERR {
        return Err(Error::McBudget { rel_stderr: pooled_rel_stderr });
    }
    let sites = estimates
        .into_iter()
        .enumerate()
        .map(|(site, (estimate, stderr))| {
            let average = averages.values()[site].re;
            let bound = constant * (estimate + 3.0 * stderr);
            DominationSite { site, average, estimate, stderr, bound, holds: average <= bound }
        })
        .collect();
    Ok(DominationReport {
        check: chk.clone(),
        c1,
        c2,
        constant,
        volume_ratio,
        volume_bound,
        volume_ok,
        pooled_rel_stderr,
        sites,
    })
}
