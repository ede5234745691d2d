use hlmax::field::TorusField;
use hlmax::linalg::{CMat, C64};
use hlmax::ncmax::*;
use hlmax::sampling::rng_for;
use rand::Rng;

fn sym_eigs(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mean = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    (mean - rad, mean + rad)
}

/// Grid search over real symmetric `[[α, β], [β, γ]]` for the smallest
/// `‖a‖_p` with `a ⪰ ±x_j`, refined from step 1e-2 to 1e-3 to 1e-4.
fn grid_oracle(xs: &[[f64; 3]], p: f64, range: f64) -> f64 {
    let norm = |a: f64, b: f64, c: f64| {
        let (l0, l1) = sym_eigs(a, b, c);
        if p.is_infinite() {
            l0.abs().max(l1.abs())
        } else {
            (l0.abs().powf(p) + l1.abs().powf(p)).powf(1.0 / p)
        }
    };
    let feasible = |a: f64, b: f64, c: f64| {
        xs.iter().all(|x| {
            sym_eigs(a - x[0], b - x[1], c - x[2]).0 >= -1e-12 && sym_eigs(a + x[0], b + x[1], c + x[2]).0 >= -1e-12
        })
    };
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
    let search = |lo: [f64; 3], hi: [f64; 3], step: f64, best: &mut (f64, f64, f64, f64)| {
        let count = |k: usize| ((hi[k] - lo[k]) / step).round() as i64;
        for i in 0..=count(0) {
            let a = lo[0] + i as f64 * step;
            for j in 0..=count(1) {
                let b = lo[1] + j as f64 * step;
                for k in 0..=count(2) {
                    let c = lo[2] + k as f64 * step;
                    if feasible(a, b, c) {
                        let v = norm(a, b, c);
                        if v < best.0 {
                            *best = (v, a, b, c);
                        }
                    }
                }
            }
        }
    };
    search([0.0, -range, 0.0], [range, range, range], 1e-2, &mut best);
    for (step, half) in [(1e-3, 2e-2), (1e-4, 2e-3)] {
        let (_, a, b, c) = best;
        search([a - half, b - half, c - half], [a + half, b + half, c + half], step, &mut best);
    }
    best.0
}

fn pauli() -> Vec<CMat> {
    vec![CMat::from_real(2, &[0.0, 1.0, 1.0, 0.0]), CMat::from_real(2, &[1.0, 0.0, 0.0, -1.0])]
}

#[test]
fn grid_oracle_examples() {
    assert!((grid_oracle(&[[3.0, 0.0, -4.0]], 1.0, 5.0) - 7.0).abs() <= 1e-4);
    let pauli = [[0.0, 1.0, 0.0], [1.0, 0.0, -1.0]];
    assert!((grid_oracle(&pauli, 1.0, 2.5) - 2.0).abs() <= 1e-4);
    assert!((grid_oracle(&pauli, f64::INFINITY, 2.5) - 1.0).abs() <= 1e-4);
}

#[test]
fn pauli_pair_against_grid_oracle() {
    let opts = MajorantOptions::default();
    let pauli_grid = [[0.0, 1.0, 0.0], [1.0, 0.0, -1.0]];
    for p in [1.0, 2.0, 3.0, f64::INFINITY] {
        let cert = majorant_norm(&pauli(), p, &opts).unwrap();
        let oracle = grid_oracle(&pauli_grid, p, 2.5);
        assert!((cert.value - oracle).abs() <= 1e-4 * oracle, "p={p}: {} vs {oracle}", cert.value);
        assert!(cert.feasibility_residual <= 1e-6 * (1.0 + cert.value));
        assert!(cert.converged);
    }
    let one = majorant_norm(&pauli(), 1.0, &opts).unwrap();
    assert!((one.value - 2.0).abs() <= 2e-4);
    assert!(one.a.max_abs_diff(&CMat::identity(2)) <= 1e-3);
    assert_eq!(majorant_norm(&pauli(), f64::INFINITY, &opts).unwrap().value, 1.0);
}

#[test]
fn single_matrix_is_its_own_norm() {
    let x = CMat::from_real_diag(&[3.0, -4.0]);
    let cert = majorant_norm(std::slice::from_ref(&x), 1.0, &MajorantOptions::default()).unwrap();
    assert_eq!(cert.value, 7.0);
    assert!(cert.a.max_abs_diff(&CMat::from_real_diag(&[3.0, 4.0])) <= 1e-14);
    let mut rng = rng_for(1, 0);
    for _ in 0..20 {
        let y = hlmax::field::random_hermitian_matrix(&mut rng, 3);
        for p in [1.0, 1.5, 2.0, 4.0] {
            let v = majorant_norm(std::slice::from_ref(&y), p, &MajorantOptions::default()).unwrap().value;
            let direct = schatten_norm(&y, p).unwrap();
            assert!((v - direct).abs() <= 1e-6 * direct);
        }
    }
}

#[test]
fn scalar_and_commuting_reductions() {
    let xs: Vec<CMat> = [2.0, -5.0, 3.0].iter().map(|&v| CMat::scalar(v)).collect();
    assert_eq!(majorant_norm(&xs, 1.5, &MajorantOptions::default()).unwrap().value, 5.0);
    let mut rng = rng_for(2, 0);
    for _ in 0..20 {
        let diags: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect()).collect();
        let xs: Vec<CMat> = diags.iter().map(|d| CMat::from_real_diag(d)).collect();
        let maxima: Vec<f64> = (0..3).map(|k| diags.iter().map(|d| d[k].abs()).fold(0.0, f64::max)).collect();
        for p in [1.0, 2.0, 3.5] {
            let v = majorant_norm(&xs, p, &MajorantOptions::default()).unwrap().value;
            assert!((v - lp_of(&maxima, p)).abs() <= 1e-12 * v);
        }
    }
}

fn random_family(seed: u64) -> (Vec<CMat>, f64) {
    let mut rng = rng_for(seed, 0);
    let n = 2 + rng.random_range(0..3usize);
    let size = 1 + rng.random_range(0..8usize);
    let p = [1.0, 1.5, 2.0, 3.0, 4.0, f64::INFINITY][rng.random_range(0..6usize)];
    let xs = (0..size).map(|_| hlmax::field::random_hermitian_matrix(&mut rng, n)).collect();
    (xs, p)
}

#[test]
fn sandwich_homogeneity_monotonicity() {
    let opts = MajorantOptions::default();
    let mut worst_gap: f64 = 0.0;
    for seed in 0..500 {
        let (xs, p) = random_family(seed);
        let cert = majorant_norm(&xs, p, &opts).unwrap();
        let lower = singleton_lower_bound(&xs, p);
        let upper = sum_abs_upper_bound(&xs, p);
        assert!(cert.value >= lower - 1e-6 && cert.value <= upper + 1e-6, "seed {seed}");
        assert!(cert.feasibility_residual <= 1e-6 * (1.0 + cert.value));
        assert!(cert.converged, "seed {seed}: gap {}", cert.gap_estimate);
        worst_gap = worst_gap.max(cert.gap_estimate / cert.value);
        if seed % 5 == 0 {
            let c = -2.75;
            let scaled: Vec<CMat> = xs.iter().map(|x| x.scale(c)).collect();
            let v = majorant_norm(&scaled, p, &opts).unwrap().value;
            assert!((v - c.abs() * cert.value).abs() <= 1e-6 * v, "seed {seed}");
            let fewer = majorant_norm(&xs[..xs.len().div_ceil(2)], p, &opts).unwrap().value;
            assert!(fewer <= cert.value * (1.0 + 1e-6));
        }
    }
    assert!(worst_gap <= 1e-4, "{worst_gap}");
}

#[test]
fn dykstra_agrees_with_barrier() {
    let barrier = MajorantOptions::default();
    let dykstra = MajorantOptions { method: MajorantMethod::Dykstra, ..MajorantOptions::default() };
    let mut families = vec![pauli()];
    for seed in 0..3 {
        let mut rng = rng_for(1000 + seed, 0);
        families.push((0..3).map(|_| hlmax::field::random_hermitian_matrix(&mut rng, 2)).collect());
    }
    for xs in &families {
        for p in [1.0, 2.0, 3.0] {
            let a = majorant_norm(xs, p, &barrier).unwrap();
            let b = majorant_norm(xs, p, &dykstra).unwrap();
            assert_eq!(b.method, MajorantMethod::Dykstra);
            assert!(b.value >= a.lower_bound * (1.0 - 1e-9));
            assert!((a.value - b.value).abs() <= 1e-3 * a.value, "p {p}: {} vs {}", a.value, b.value);
            assert!(b.feasibility_residual <= 1e-12 * (1.0 + b.value));
        }
    }
}

#[test]
fn field_norm_examples() {
    let delta = TorusField::delta(4, 2, 3).unwrap();
    assert!((field_lp_norm(&delta, 2.0).unwrap() - 3f64.sqrt()).abs() < 1e-15);
    let c = TorusField::constant(4, 2, &CMat::scalar(-1.5)).unwrap();
    assert!((field_lp_norm(&c, 3.0).unwrap() - 1.5 * 16f64.powf(1.0 / 3.0)).abs() < 1e-12);

    let f = TorusField::random_positive(3, 2, 2, 8).unwrap();
    let opts = MajorantOptions::default();
    for p in [1.0, 2.0, 3.0] {
        let m = field_maximal_norm(&[f.clone(), f.clone()], p, &opts).unwrap();
        let direct = field_lp_norm(&f, p).unwrap();
        assert!((m.value - direct).abs() <= 1e-6 * direct);
    }

    let g = TorusField::scalar(4, 2, |x| x[0] as f64 - 1.5 * x[1] as f64).unwrap();
    let h = TorusField::scalar(4, 2, |x| 2.0 - x[1] as f64).unwrap();
    let m = field_maximal_norm(&[g.clone(), h.clone()], 2.0, &opts).unwrap();
    assert!((m.value - scalar_maximal_norm(&[g, h], 2.0).unwrap()).abs() <= 1e-12);

    let mut placed = vec![TorusField::zeros(2, 1, 2).unwrap(); 2];
    for (field, x) in placed.iter_mut().zip(pauli()) {
        *field = TorusField::from_fn(2, 1, 2, |c| if c[0] == 0 { x.clone() } else { CMat::zeros(2) }).unwrap();
    }
    let m = field_maximal_norm(&placed, 1.0, &opts).unwrap();
    assert!((m.value - majorant_norm(&pauli(), 1.0, &opts).unwrap().value).abs() <= 1e-12);
}

/// Joint problem over both sites at once versus the per-site decoupling (M = 2, d = 1, n = 1).
#[test]
fn decoupling_matches_joint_brute_force() {
    let f1 = TorusField::scalar(2, 1, |x| [0.7, -1.2][x[0]]).unwrap();
    let f2 = TorusField::scalar(2, 1, |x| [-0.9, 0.4][x[0]]).unwrap();
    for p in [1.0, 2.0, 3.0] {
        let mut best = f64::INFINITY;
        for i in 0..=300 {
            for j in 0..=300 {
                let (a0, a1) = (i as f64 * 0.01, j as f64 * 0.01);
                if a0 >= 0.9 - 1e-12 && a1 >= 1.2 - 1e-12 {
                    best = best.min((a0.powf(p) + a1.powf(p)).powf(1.0 / p));
                }
            }
        }
        let m = field_maximal_norm(&[f1.clone(), f2.clone()], p, &MajorantOptions::default()).unwrap();
        assert!((m.value - best).abs() <= 1e-12);
    }
}

#[test]
fn modulation_and_scalar_multipliers() {
    let fs: Vec<TorusField> = (0..3).map(|i| TorusField::random_hermitian(4, 2, 1, 40 + i).unwrap()).collect();
    let modulated: Vec<TorusField> = fs.iter().map(|f| hlmax::field::modulate(f, &[0.3, -0.21]).unwrap()).collect();
    let abs =
        |f: &TorusField| TorusField::scalar(f.side(), f.dim(), |x| f.values()[f.shape().index(x)].norm()).unwrap();
    for p in [1.0, 2.0, f64::INFINITY] {
        let a = scalar_maximal_norm(&fs.iter().map(abs).collect::<Vec<_>>(), p).unwrap();
        let b = scalar_maximal_norm(&modulated.iter().map(abs).collect::<Vec<_>>(), p).unwrap();
        assert!((a - b).abs() <= 1e-10);
        let betas = [0.5, -0.9, 0.25];
        let weighted: Vec<TorusField> = fs.iter().zip(betas).map(|(f, b)| f.scale(b)).collect();
        let base = field_maximal_norm(&fs, p, &MajorantOptions::default()).unwrap().value;
        let w = field_maximal_norm(&weighted, p, &MajorantOptions::default()).unwrap().value;
        assert!(w <= 0.9 * base + 1e-9);
    }
}

#[test]
fn cr_norm_examples() {
    let r = cr_norm(&[CMat::scalar(3.0), CMat::scalar(4.0)], 2.0).unwrap();
    assert!((r.column - 5.0).abs() < 1e-15 && r.row == r.column);
    let (xs, _) = random_family(77);
    let r = cr_norm(&xs, 3.0).unwrap();
    assert_eq!(r.column, r.row);
    assert!(matches!(cr_norm(&xs, 1.5), Err(hlmax::Error::Unsupported(_))));

    // Non-hermitian pair at p = 4 against a direct oracle on the 2x2 Gram matrices.
    let x = CMat::from_vec(2, vec![C64::new(1.0, 0.5), C64::new(-0.3, 0.0), C64::new(0.2, 1.0), C64::new(0.0, -0.7)]);
    let y = CMat::from_vec(2, vec![C64::new(0.1, 0.0), C64::new(0.9, 0.2), C64::new(-0.4, 0.3), C64::new(1.1, 0.0)]);
    let r = cr_norm(&[x.clone(), y.clone()], 4.0).unwrap();
    let two_by_two = |g: &CMat| {
        let (a, d) = (g.get(0, 0).re, g.get(1, 1).re);
        let b2 = g.get(0, 1).norm_sqr();
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b2).sqrt();
        ((mean + rad).powf(2.0) + (mean - rad).powf(2.0)).powf(0.25)
    };
    let col = &x.adjoint().matmul(&x) + &y.adjoint().matmul(&y);
    let row = &x.matmul(&x.adjoint()) + &y.matmul(&y.adjoint());
    assert!((r.column - two_by_two(&col)).abs() <= 1e-10);
    assert!((r.row - two_by_two(&row)).abs() <= 1e-10);
}

#[test]
fn certificate_json_shape() {
    let cert = majorant_norm(&pauli(), 1.0, &MajorantOptions::default()).unwrap();
    let v: serde_json::Value = serde_json::from_str(&cert.to_json().unwrap()).unwrap();
    for key in ["p", "value", "a", "residual", "gap", "converged"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}
