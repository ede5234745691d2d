use hlmax::lattice::{enumerate_ball, BallSpec};
use hlmax::linalg::C64;
use hlmax::multiplier::*;
use hlmax::sampling::{rng_for, SampleSpec};
use rand::Rng;

/// Direct sum of `e^{2πi⟨x,ξ⟩}` over the enumerated ball.
fn brute_force(dim: usize, radius: f64, xi: &[f64]) -> C64 {
    let pts = enumerate_ball(&BallSpec::euclidean(dim, radius).unwrap()).unwrap();
    let tau = 2.0 * std::f64::consts::PI;
    let sum: C64 = pts
        .iter()
        .map(|x| {
            let phase: f64 = x.iter().zip(xi).map(|(a, b)| *a as f64 * b).sum();
            C64::from_polar(1.0, tau * phase)
        })
        .sum();
    sum / pts.len() as f64
}

#[test]
fn dp_matches_brute_force() {
    let mut rng = rng_for(7, 0);
    for dim in 1..=3 {
        for radius in [1.0, 1.5, 2.0, 3.0, 4.0] {
            let ball = BallMultiplier::new(dim, radius).unwrap();
            for _ in 0..100 {
                let raw: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
                let xi = Frequency::new(&raw);
                let m = ball.eval(&xi).unwrap();
                let b = brute_force(dim, radius, xi.components());
                assert!((m - b).norm() <= 1e-12, "d={dim} N={radius}: {m} vs {b}");
            }
        }
    }
}

#[test]
fn symmetry_periodicity_and_bounds() {
    let ball = BallMultiplier::new(5, 3.0).unwrap();
    let mut rng = rng_for(11, 0);
    for _ in 0..50 {
        let raw: Vec<f64> = (0..5).map(|_| rng.random::<f64>() - 0.5).collect();
        let m = ball.eval(&Frequency::new(&raw)).unwrap();
        assert!(m.norm() <= 1.0 + 1e-12);
        assert!(m.im.abs() <= 1e-10);
        let neg: Vec<f64> = raw.iter().map(|v| -v).collect();
        assert!((ball.eval(&Frequency::new(&neg)).unwrap() - m.conj()).norm() <= 1e-12);
        let mut shifted = raw.clone();
        shifted[2] += 1.0;
        assert!((ball.eval(&Frequency::new(&shifted)).unwrap() - m).norm() <= 1e-12);
    }
}

#[test]
fn alternating_mass_is_the_corner_value() {
    for (d, n) in [(1, 2.0), (2, 1.0), (3, 2.5), (6, 3.0)] {
        let ball = BallMultiplier::new(d, n).unwrap();
        let corner = ball.eval(&Frequency::corner(d)).unwrap().re;
        assert!((ball.alternating_mass() - corner).abs() <= 1e-14);
        assert!((corner - brute_force(d, n, &vec![0.5; d]).re).abs() <= 1e-12);
    }
}

#[test]
fn v_set_definitions_agree() {
    let mut rng = rng_for(3, 0);
    for _ in 0..10_000 {
        let raw: Vec<f64> = (0..4).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let xi = Frequency::new(&raw);
        assert!(xi.components().iter().all(|c| *c > -0.5 && *c <= 0.5));
        assert_eq!(xi.v_set(), xi.v_set_by_cosine());
    }
}

#[test]
fn origin_examples() {
    let r = verify_origin_bound_at(1, 2.0, &SampleSpec::uniform(0, 0), &[Frequency::new(&[0.1]), Frequency::zero(1)])
        .unwrap();
    assert!((r.rows[0].m.re - 0.647213595499958).abs() < 1e-12);
    assert!((r.rows[0].lhs - 0.352786404500042).abs() < 1e-12);
    assert!((r.rows[0].rhs - 0.789568352087149).abs() < 1e-12);
    assert_eq!(r.rows[1].lhs, 0.0);
    assert_eq!(r.violations, 0);
    let r = verify_origin_bound_at(2, 1.0, &SampleSpec::mixed(50, 1), &[Frequency::new(&[0.05, 0.0])]).unwrap();
    assert_eq!(r.violations, 0);
}

#[test]
fn decay_report_fits_c() {
    let r = verify_decay_bound(4, 32.0, &SampleSpec::mixed(100, 5), None).unwrap();
    let c = r.fitted_constants["C"];
    assert!(c.is_finite() && c > 0.0);
    assert_eq!(r.violations, 0);
    let strict = verify_decay_bound(4, 32.0, &SampleSpec::mixed(100, 5), Some(c * 0.5)).unwrap();
    assert!(strict.violations > 0);
}

#[test]
fn csv_has_json_trailer() {
    let r = verify_origin_bound(2, 2.0, &SampleSpec::mixed(5, 9)).unwrap();
    let mut buf = Vec::new();
    r.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "xi,m_re,m_im,lambda1,lambda2,lhs,rhs,slack,branch");
    assert_eq!(lines.len(), 7);
    let trailer: serde_json::Value = serde_json::from_str(lines[6].strip_prefix("# ").unwrap()).unwrap();
    assert!(trailer.get("max_lhs_over_rhs").is_some());
}

/// `ln` of the number of points of `Z^k` with squared norm exactly `r`, for `r <= top`.
fn log_shell_counts(k: usize, top: usize) -> Vec<f64> {
    let max = (top as f64).sqrt() as usize;
    let mut cur = vec![f64::NEG_INFINITY; top + 1];
    cur[0] = 0.0;
    for _ in 0..k {
        let mut next = vec![f64::NEG_INFINITY; top + 1];
        for (r, slot) in next.iter_mut().enumerate() {
            let mut terms = Vec::with_capacity(max + 1);
            for x in 0..=max {
                if x * x > r {
                    break;
                }
                let prev = cur[r - x * x];
                if prev.is_finite() {
                    terms.push(prev + if x == 0 { 0.0 } else { 2f64.ln() });
                }
            }
            if let Some(peak) = terms.iter().cloned().reduce(f64::max) {
                *slot = peak + terms.iter().map(|t| (t - peak).exp()).sum::<f64>().ln();
            }
        }
        cur = next;
    }
    cur
}

fn log_cumulative(shells: &[f64], upto: usize) -> f64 {
    let peak = shells[..=upto].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    peak + shells[..=upto].iter().map(|t| (t - peak).exp()).sum::<f64>().ln()
}

/// With `ξ` supported on the first coordinate,
/// `m = Σ_y cos(2πξy) · #{z ∈ Z^{d-1} : |z|² <= N² - y²} / #ball`.
#[test]
fn high_dimension_matches_log_domain_oracle() {
    for (dim, radius) in [(25600usize, 16usize), (6400, 32)] {
        let top = radius * radius;
        let rest = log_shell_counts(dim - 1, top);
        let full = log_cumulative(&log_shell_counts(dim, top), top);
        let ball = BallMultiplier::new(dim, radius as f64).unwrap();
        for xi1 in [0.01, 0.13, 0.5] {
            let mut oracle = 0.0;
            for y in -(radius as i64)..=(radius as i64) {
                let weight = (log_cumulative(&rest, top - (y * y) as usize) - full).exp();
                oracle += (2.0 * std::f64::consts::PI * xi1 * y as f64).cos() * weight;
            }
            let mut raw = vec![0.0; dim];
            raw[0] = xi1;
            let m = ball.eval(&Frequency::new(&raw)).unwrap().re;
            assert!((m - oracle).abs() <= 1e-9, "d={dim} N={radius} xi1={xi1}: {m} vs {oracle}");
        }
    }
}
