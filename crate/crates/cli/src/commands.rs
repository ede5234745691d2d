use std::str::FromStr;

use hlmax::ergodic::{
    bau_projection_search_fields, ergodic_average, fixed_point_expectation, transference_check, write_transference_csv,
    ShiftSystem, TransferenceReport,
};
use hlmax::field::{convolve_ball, dft, heat_semigroup, seeded_corpus, Path, TorusField};
use hlmax::lattice::{count_ball, count_volume_report, BallNorm, BallSpec, CountVolumeReport, RadiusRule};
use hlmax::maxop::{
    fitted_lattice_c2, large_scale_domination_check, maximal_ratio_experiment, torus_side_for, DominationCheck,
    ExperimentBudget, InputKind,
};
use hlmax::multiplier::{
    check_dp_budget, verify_decay_bound, verify_origin_bound, verify_small_scale_approx, BallMultiplier,
    MultiplierReport,
};
use hlmax::ncmax::MajorantOptions;
use hlmax::sampling::{derive_seed, SampleSpec};

use crate::config::{DominationInput, ExperimentConfig, MultiplierCheck, Sampling};
use crate::{Command, Outcome, RowRuntime, RunError, Sink};

pub(crate) fn dispatch(command: Command, cfg: &ExperimentConfig, sink: &mut Sink) -> Result<Outcome, RunError> {
    match command {
        Command::Count => count(cfg, sink),
        Command::MultiplierVerify => multiplier_verify(cfg, sink),
        Command::SemigroupCheck => semigroup_check(cfg, sink),
        Command::MaximalExperiment => maximal_experiment(cfg, sink),
        Command::DominationCheck => domination_check(cfg, sink),
        Command::ErgodicDemo => ergodic_demo(cfg, sink),
        Command::BauDemo => bau_demo(cfg, sink),
    }
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| RunError::Core(e.into());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.into_inner().map_err(|e| RunError::Io(e.into_error()))
}

fn norm_label(norm: BallNorm) -> &'static str {
    match norm {
        BallNorm::One => "one",
        BallNorm::Two => "two",
        BallNorm::Infinity => "infinity",
    }
}

fn count(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<Outcome, RunError> {
    let c = &cfg.count;
    let norms = c
        .norms
        .iter()
        .map(|s| BallNorm::from_str(s).map_err(|_| RunError::Config(format!("unknown norm {s:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for &dim in &c.dims {
        for &radius in &c.radii {
            for &norm in &norms {
                let n = count_ball(&BallSpec::new(dim, radius, norm)?)?.count;
                rows.push(vec![dim.to_string(), radius.to_string(), norm_label(norm).to_string(), n.to_string()]);
            }
        }
    }
    let balls = rows.len();
    sink.csv("counts.csv", csv_bytes(&["d", "N", "norm", "count"], rows)?)?;

    if c.volume_dims.is_empty() {
        return Ok(Outcome::clean(format!("{balls} ball counts")));
    }
    let report = count_volume_report(&c.volume_dims, &RadiusRule::Multiples(c.volume_multiples.clone()), c.c1)?;
    let mut body = Vec::new();
    report.write_csv(&mut body)?;
    sink.csv("count_volume.csv", body)?;
    let bad =
        CountVolumeReport { rows: report.rows.iter().filter(|r| !r.upper_ok).cloned().collect(), ..report.clone() };
    let mut violation_rows = Vec::new();
    bad.write_csv(&mut violation_rows)?;
    Ok(Outcome {
        summary: format!(
            "{balls} ball counts; count/volume table with {} rows, fitted C2 = {:.6}",
            report.rows.len(),
            report.fitted_c2
        ),
        violations: bad.rows.len(),
        violation_rows,
        row_runtimes: Vec::new(),
    })
}

fn multiplier_verify(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<Outcome, RunError> {
    let m = &cfg.multiplier;
    check_dp_budget(m.dim, m.radius, cfg.budget_updates)?;
    let samples = match m.sampling {
        Sampling::Mixed => SampleSpec::mixed(m.samples, cfg.seed),
        Sampling::Uniform => SampleSpec::uniform(m.samples, cfg.seed),
        Sampling::NearOrigin => SampleSpec::near_origin(m.samples, cfg.seed),
    };
    let report = match m.check {
        MultiplierCheck::Origin => {
            if m.constant.is_some() {
                return Err(RunError::Config("the origin bound has no constant to override".into()));
            }
            verify_origin_bound(m.dim, m.radius, &samples)?
        }
        MultiplierCheck::Decay => verify_decay_bound(m.dim, m.radius, &samples, m.constant)?,
        MultiplierCheck::SmallScale => verify_small_scale_approx(m.dim, m.radius, &samples, m.constant)?,
    };
    let mut body = Vec::new();
    report.write_csv(&mut body)?;
    sink.csv("multiplier.csv", body)?;

    let bad = MultiplierReport { rows: report.violating_rows().cloned().collect(), ..report.clone() };
    let mut violation_rows = Vec::new();
    bad.write_csv(&mut violation_rows)?;
    let constants: Vec<String> = report.fitted_constants.iter().map(|(k, v)| format!("{k} = {v:.6e}")).collect();
    Ok(Outcome {
        summary: format!(
            "{} samples at d = {}, N = {}; {} violations; {}",
            report.rows.len(),
            m.dim,
            m.radius,
            report.violations,
            if constants.is_empty() { "no fitted constants".to_string() } else { constants.join(", ") }
        ),
        violations: report.violations,
        violation_rows,
        row_runtimes: Vec::new(),
    })
}

const PLANCHEREL_TOL: f64 = 1e-9;
const CONVOLUTION_TOL: f64 = 1e-9;
const HEAT_PATH_TOL: f64 = 1e-8;
const SEMIGROUP_LAW_TOL: f64 = 1e-8;
const POSITIVITY_TOL: f64 = 1e-9;

fn semigroup_check(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<Outcome, RunError> {
    let s = &cfg.semigroup;
    let (Some(&t_first), Some(&t_last)) = (s.times.first(), s.times.last()) else {
        return Err(RunError::Config("semigroup.times must not be empty".into()));
    };
    let header =
        ["field", "M", "d", "n", "plancherel", "convolution", "heat_paths", "semigroup_law", "min_eigenvalue", "ok"];
    let mut rows = Vec::new();
    let mut bad = Vec::new();
    for (i, f) in seeded_corpus(s.fields, cfg.seed).iter().enumerate() {
        let energy = f.hs_norm_sq();
        let plancherel = (dft(f).hs_norm_sq() / f.sites() as f64 - energy).abs() / energy;

        let radius = ((f.side() - 1) / 2) as f64;
        let ball = BallMultiplier::new(f.dim(), radius)?;
        let averaged = convolve_ball(f, radius, Path::Spectral)?;
        let mut symbol_err = None;
        let via_symbol = dft(f).apply_symbol(|xi| {
            ball.eval(xi).unwrap_or_else(|e| {
                symbol_err.get_or_insert(e);
                0.0.into()
            })
        });
        if let Some(e) = symbol_err {
            return Err(e.into());
        }
        let convolution = dft(&averaged).max_abs_diff(&via_symbol) / (1.0 + via_symbol.max_abs());

        let positive = f.is_positive();
        // NaN marks a field that is not positive, where the eigenvalue check does not apply.
        let mut min_eig = if positive { averaged.min_eigenvalue() } else { f64::NAN };
        let mut heat_paths: f64 = 0.0;
        for &t in &s.times {
            let a = heat_semigroup(f, t, Path::Spectral)?;
            let b = heat_semigroup(f, t, Path::Series)?;
            heat_paths = heat_paths.max(a.max_abs_diff(&b));
            if positive {
                min_eig = min_eig.min(a.min_eigenvalue()).min(b.min_eigenvalue());
            }
        }
        let composed = heat_semigroup(&heat_semigroup(f, t_first, Path::Series)?, t_last, Path::Series)?;
        let law = composed.max_abs_diff(&heat_semigroup(f, t_first + t_last, Path::Series)?);

        let ok = plancherel <= PLANCHEREL_TOL
            && convolution <= CONVOLUTION_TOL
            && heat_paths <= HEAT_PATH_TOL
            && law <= SEMIGROUP_LAW_TOL
            && (min_eig.is_nan() || min_eig >= -POSITIVITY_TOL);
        let row = vec![
            i.to_string(),
            f.side().to_string(),
            f.dim().to_string(),
            f.n().to_string(),
            plancherel.to_string(),
            convolution.to_string(),
            heat_paths.to_string(),
            law.to_string(),
            if positive { min_eig.to_string() } else { String::new() },
            ok.to_string(),
        ];
        if !ok {
            bad.push(row.clone());
        }
        rows.push(row);
    }
    let total = rows.len();
    sink.csv("semigroup.csv", csv_bytes(&header, rows)?)?;
    Ok(Outcome {
        summary: format!("{total} fields checked, {} fail", bad.len()),
        violations: bad.len(),
        violation_rows: csv_bytes(&header, bad)?,
        row_runtimes: Vec::new(),
    })
}

/// The delta input satisfies `ratio <= 2` for every `p >= 2`.
const DELTA_RATIO_BOUND: f64 = 2.0;

fn maximal_experiment(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<Outcome, RunError> {
    let m = &cfg.maximal;
    let regimes = m.regimes()?;
    let inputs = m.input_kinds(cfg.seed);
    if inputs.is_empty() || m.dims.is_empty() {
        return Err(RunError::Config("maximal.inputs and maximal.dims must not be empty".into()));
    }
    let budget = ExperimentBudget { scalar_sites: m.scalar_sites, matrix_sites: m.matrix_sites };
    let opts = MajorantOptions { tol: m.tol, ..MajorantOptions::default() };
    let table = maximal_ratio_experiment(&inputs, m.p, &m.dims, &regimes, &budget, &opts)?;

    let mut body = Vec::new();
    table.write_csv(&mut body)?;
    sink.csv("ratios.csv", body)?;

    let delta_ids: Vec<String> =
        inputs.iter().filter(|k| matches!(k, InputKind::Delta { .. })).map(|k| k.id()).collect();
    let bad = hlmax::maxop::RatioTable {
        rows: table
            .rows
            .iter()
            .filter(|r| m.p >= 2.0 && delta_ids.contains(&r.input_id) && r.ratio > DELTA_RATIO_BOUND)
            .cloned()
            .collect(),
    };
    let mut violation_rows = Vec::new();
    bad.write_csv(&mut violation_rows)?;
    let unconverged = table.rows.iter().filter(|r| !r.converged).count();
    let max_ratio = table.rows.iter().map(|r| r.ratio).fold(f64::NAN, f64::max);
    Ok(Outcome {
        summary: format!(
            "{} rows, largest ratio {max_ratio:.4}, {unconverged} rows short of the solver tolerance",
            table.rows.len()
        ),
        violations: bad.rows.len(),
        violation_rows,
        row_runtimes: table
            .rows
            .iter()
            .map(|r| RowRuntime {
                row: format!("d={} input={} regime={}", r.dim, r.input_id, r.regime.label()),
                runtime_ms: r.runtime_ms,
            })
            .collect(),
    })
}

fn domination_check(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<Outcome, RunError> {
    let c = &cfg.domination;
    let chk = DominationCheck::new(c.dim, c.radius, c.mc_samples, cfg.seed)?;
    let c2 = match c.c2 {
        Some(v) => v,
        None => fitted_lattice_c2(6, c.c1)?,
    };
    // The extension lives on cubes of half-width 1/2 around each site of B_{N1}.
    let outer = (c.radius * c.radius + c.dim as f64 / 4.0).sqrt() + (c.dim as f64).sqrt() / 2.0;
    let side = torus_side_for(outer.floor().max(1.0) as u64);
    let f = match c.input {
        DominationInput::Delta => TorusField::delta(side, c.dim, 1)?,
        DominationInput::Constant => TorusField::scalar(side, c.dim, |_| 1.0)?,
        DominationInput::SubBall => InputKind::SubBall { n: 1 }.build(side, c.dim)?,
    };
    let rep = large_scale_domination_check(&f, &chk, c.c1, c2)?;

    let header = ["site", "average", "estimate", "stderr", "bound", "holds"];
    let row = |s: &hlmax::maxop::DominationSite| {
        vec![
            s.site.to_string(),
            s.average.to_string(),
            s.estimate.to_string(),
            s.stderr.to_string(),
            s.bound.to_string(),
            s.holds.to_string(),
        ]
    };
    sink.csv("domination.csv", csv_bytes(&header, rep.sites.iter().map(row))?)?;
    let mut meta = rep.clone();
    meta.sites.clear();
    sink.json("domination.json", &meta)?;

    let failing = rep.violations();
    let mut bad: Vec<Vec<String>> = failing.iter().map(|s| row(s)).collect();
    if !rep.volume_ok {
        bad.push(vec![
            "volume".into(),
            rep.volume_ratio.to_string(),
            String::new(),
            String::new(),
            rep.volume_bound.to_string(),
            "false".into(),
        ]);
    }
    let worst = rep.sites.iter().filter(|s| s.bound > 0.0).map(|s| s.average / s.bound).fold(0.0, f64::max);
    Ok(Outcome {
        summary: format!(
            "{} sites on side {side}, {} fail; worst average/bound {worst:.4}, C2 = {c2:.6}, pooled relative stderr {:.2e}",
            rep.sites.len(),
            failing.len(),
            rep.pooled_rel_stderr
        ),
        violations: bad.len(),
        violation_rows: csv_bytes(&header, bad)?,
        row_runtimes: Vec::new(),
    })
}

fn ergodic_demo(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<Outcome, RunError> {
    let e = &cfg.ergodic;
    let sys = ShiftSystem::shift(e.side, e.dim, e.n)?;
    let opts = MajorantOptions::default();
    let reports = (0..e.cases as u64)
        .map(|k| {
            let f = TorusField::random_positive(e.side, e.dim, e.n, derive_seed(cfg.seed, k))?;
            transference_check(&sys, &f, e.p, &e.radii, e.cube_radius, e.eps, &opts)
        })
        .collect::<Result<Vec<TransferenceReport>, _>>()?;

    let mut body = Vec::new();
    write_transference_csv(&reports, &mut body)?;
    sink.csv("transference.csv", body)?;

    let bad: Vec<TransferenceReport> = reports.iter().filter(|r| !r.holds).cloned().collect();
    let mut violation_rows = Vec::new();
    write_transference_csv(&bad, &mut violation_rows)?;
    let defect = reports.iter().map(|r| r.identity_defect).fold(0.0, f64::max);
    let worst = reports.iter().map(|r| r.lhs / r.rhs).fold(0.0, f64::max);
    Ok(Outcome {
        summary: format!(
            "{} transference cases, {} fail; max lhs/rhs {worst:.4}, shift-average identity defect {defect:.1e}",
            reports.len(),
            bad.len()
        ),
        violations: bad.len(),
        violation_rows,
        row_runtimes: Vec::new(),
    })
}

fn bau_demo(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<Outcome, RunError> {
    let b = &cfg.bau;
    let sys = if b.twist.is_empty() {
        ShiftSystem::shift(b.side, b.dim, b.n)?
    } else {
        ShiftSystem::twisted(b.side, b.dim, b.n, b.twist.clone())?
    };
    let f = TorusField::random_hermitian(b.side, b.dim, b.n, cfg.seed)?;
    let limit = fixed_point_expectation(&sys, &f)?;
    let seq = (1..=b.terms).map(|r| ergodic_average(&sys, &f, r as f64)).collect::<Result<Vec<_>, _>>()?;
    let rep = bau_projection_search_fields(&seq, &limit, b.eps)?;

    let rows = rep.residuals.iter().enumerate().map(|(i, r)| vec![(i + 1).to_string(), r.to_string()]);
    sink.csv("bau_residuals.csv", csv_bytes(&["N", "residual"], rows)?)?;
    sink.json("bau.json", &rep)?;

    // The search never spends more than eps of trace; anything else is a defect.
    let over_budget = rep.trace_deficit >= b.eps;
    let violation_rows = csv_bytes(
        &["trace_deficit", "epsilon"],
        over_budget.then(|| vec![rep.trace_deficit.to_string(), b.eps.to_string()]),
    )?;
    Ok(Outcome {
        summary: format!(
            "{} terms, trace deficit {:.4} of {}, residuals {}",
            seq.len(),
            rep.trace_deficit,
            b.eps,
            if rep.converged { "decay" } else { "do not decay within the budget" }
        ),
        violations: usize::from(over_budget),
        violation_rows,
        row_runtimes: Vec::new(),
    })
}
