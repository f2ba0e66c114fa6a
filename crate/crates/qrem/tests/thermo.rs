use approx::assert_abs_diff_eq;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use qrem::disorder::{sample_rem, DisorderField};
use qrem::hypercube::t_spectrum;
use qrem::predictions::{beta_c, ln_cosh, p_rem};
use qrem::thermo::*;

/// Spectrum of `ΓT + U`, assembled pair by pair.
fn dense_levels(u: &DisorderField, gamma: f64) -> Vec<f64> {
    let dim = u.len();
    let h = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            u.values[i]
        } else if (i ^ j).count_ones() == 1 {
            -gamma
        } else {
            0.0
        }
    });
    SymmetricEigen::new(h).eigenvalues.iter().copied().collect()
}

fn oracle_pressure(levels: &[f64], beta: f64, n: usize) -> f64 {
    let m = levels.iter().map(|e| -beta * e).fold(f64::NEG_INFINITY, f64::max);
    m + levels.iter().map(|e| (-beta * e - m).exp()).sum::<f64>().ln() - n as f64 * std::f64::consts::LN_2
}

fn constant(n: usize, c: f64) -> DisorderField {
    DisorderField::from_values(n, vec![c; 1 << n]).unwrap()
}

#[test]
fn classical_examples() {
    let u = sample_rem(10, 1).unwrap();
    assert_eq!(classical_pressure(&u, 0.0), 0.0);
    assert_abs_diff_eq!(classical_pressure(&constant(9, 2.5), 0.4), -1.0, epsilon = 1e-12);
    // Exponents of order β·N·3 stay finite.
    let deep = constant(4, -1000.0);
    assert_abs_diff_eq!(classical_pressure(&deep, 10.0), 10_000.0, epsilon = 1e-9);
    let high = constant(4, 1000.0);
    assert_abs_diff_eq!(classical_pressure(&high, 10.0), -10_000.0, epsilon = 1e-9);
}

#[test]
fn classical_pressure_concentrates_at_n16() {
    let n = 16;
    let mean: f64 = (0..50).map(|s| classical_pressure(&sample_rem(n, s).unwrap(), 0.8) / n as f64).sum::<f64>() / 50.0;
    assert!((mean - p_rem(0.8)).abs() <= 0.03, "{mean}");
    assert_abs_diff_eq!(p_rem(0.8), 0.32, epsilon = 1e-15);
}

#[test]
fn pressure_at_zero_beta_is_zero() {
    let u = sample_rem(6, 2).unwrap();
    for method in [
        PressureMethod::DenseTrace,
        PressureMethod::LowEnergyTruncated { k: 4 },
        PressureMethod::DiagonalQuadrature { samples: 8 },
    ] {
        assert_eq!(quantum_pressure(&u, 0.0, 1.3, method).unwrap().log_z, 0.0);
    }
}

#[test]
fn dense_trace_matches_oracle() {
    for (seed, beta, gamma) in [(0, 0.5, 0.3), (1, 1.0, 2.0), (2, 2.0, 0.3), (3, 3.0, 1.0)] {
        let u = sample_rem(8, seed).unwrap();
        let want = oracle_pressure(&dense_levels(&u, gamma), beta, 8);
        let got = quantum_pressure(&u, beta, gamma, PressureMethod::DenseTrace).unwrap();
        assert_abs_diff_eq!(got.log_z, want, epsilon = 1e-10);
        assert!(!got.flagged);
    }
}

#[test]
fn zero_field_is_classical() {
    let u = sample_rem(9, 4).unwrap();
    for beta in [0.3, 1.0, 2.5] {
        let dense = quantum_pressure(&u, beta, 0.0, PressureMethod::DenseTrace).unwrap().log_z;
        let exact = quantum_pressure(&u, beta, 0.0, PressureMethod::ClassicalExact).unwrap().log_z;
        assert_abs_diff_eq!(dense, classical_pressure(&u, beta), epsilon = 1e-10);
        assert_abs_diff_eq!(exact, classical_pressure(&u, beta), epsilon = 1e-15);
    }
    assert!(quantum_pressure(&u, 1.0, 0.5, PressureMethod::ClassicalExact).is_err());
}

#[test]
fn pure_paramagnet_factorizes() {
    let n = 8;
    let zero = DisorderField::zero(n).unwrap();
    for (beta, gamma) in [(0.5, 1.0), (1.0, 2.0), (2.0, 0.7)] {
        let want = n as f64 * ln_cosh(beta * gamma);
        let dense = quantum_pressure(&zero, beta, gamma, PressureMethod::DenseTrace).unwrap();
        assert_abs_diff_eq!(dense.log_z, want, epsilon = 1e-10);
        let quad = quantum_pressure(&zero, beta, gamma, PressureMethod::DiagonalQuadrature { samples: 256 }).unwrap();
        assert_abs_diff_eq!(quad.log_z, want, epsilon = 1e-9);
    }
}

#[test]
fn truncated_trace_within_its_bound() {
    let u = sample_rem(12, 0).unwrap();
    let (beta, gamma) = (1.0, 2.0);
    let dense = quantum_pressure(&u, beta, gamma, PressureMethod::DenseTrace).unwrap().log_z;
    let t = quantum_pressure(&u, beta, gamma, PressureMethod::LowEnergyTruncated { k: 64 }).unwrap();
    let bound = t.remainder_bound.unwrap();
    let missing = dense - t.log_z;
    assert!(missing >= -1e-9 && missing <= bound + 1e-9, "missing {missing}, bound {bound}");
    let u = sample_rem(10, 0).unwrap();
    let deep = quantum_pressure(&u, 4.0, 0.4, PressureMethod::LowEnergyTruncated { k: 64 }).unwrap();
    let dense = quantum_pressure(&u, 4.0, 0.4, PressureMethod::DenseTrace).unwrap().log_z;
    let missing = dense - deep.log_z;
    assert!(missing >= -1e-9 && missing <= deep.remainder_bound.unwrap() + 1e-9);
    assert!(quantum_pressure(&u, 1.0, 1.0, PressureMethod::LowEnergyTruncated { k: 0 }).is_err());
}

#[test]
fn quadrature_matches_dense() {
    for (seed, beta, gamma) in [(0, 0.5, 0.3), (1, 1.0, 2.0), (2, 2.0, 0.3)] {
        let u = sample_rem(8, seed).unwrap();
        let dense = quantum_pressure(&u, beta, gamma, PressureMethod::DenseTrace).unwrap().log_z;
        let full = quantum_pressure(&u, beta, gamma, PressureMethod::DiagonalQuadrature { samples: 256 }).unwrap();
        assert_abs_diff_eq!(full.log_z, dense, epsilon = 1e-8);
        assert_eq!(full.stderr, Some(0.0));
        let sampled = quantum_pressure(&u, beta, gamma, PressureMethod::DiagonalQuadrature { samples: 128 }).unwrap();
        let se = sampled.stderr.unwrap();
        assert!((sampled.log_z - dense).abs() <= 4.0 * se + 1e-6, "seed {seed}: {} vs {dense} (se {se})", sampled.log_z);
    }
}

#[test]
fn pressure_is_convex_in_beta() {
    let u = sample_rem(8, 5).unwrap();
    let levels = dense_levels(&u, 0.8);
    let grid: Vec<f64> = (0..=30).map(|i| 0.1 * i as f64).collect();
    let phi: Vec<f64> = grid
        .iter()
        .map(|&b| quantum_pressure(&u, b, 0.8, PressureMethod::DenseTrace).unwrap().log_z)
        .collect();
    for (p, &b) in phi.iter().zip(&grid) {
        assert_abs_diff_eq!(*p, oracle_pressure(&levels, b, 8), epsilon = 1e-10);
    }
    assert!(phi.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] >= -1e-9));
}

#[test]
fn slope_at_zero_is_minus_mean_energy() {
    let u = sample_rem(8, 6).unwrap();
    let h = 1e-4;
    let f = |b: f64| quantum_pressure(&u, b, 1.2, PressureMethod::DenseTrace).unwrap().log_z;
    let slope = (f(h) - f(-h)) / (2.0 * h);
    let want = -u.values.iter().sum::<f64>() / u.len() as f64;
    assert!((slope - want).abs() <= 1e-6, "{slope} vs {want}");
}

#[test]
fn paramagnet_t_average_matches_dense() {
    assert_abs_diff_eq!(paramagnet_t_average(10, 1.0), -7.615_941_559_557_649, epsilon = 1e-12);
    assert_abs_diff_eq!(dense_t_average(10, 1.0).unwrap(), paramagnet_t_average(10, 1.0), epsilon = 1e-10);
    assert_eq!(paramagnet_t_average(10, 0.0), 0.0);
    assert!(dense_t_average(10, 0.0).unwrap().abs() < 1e-10);
}

/// Gibbs mass of `T` in `[−N(tanh β + δ), −N(tanh β − δ)]`: the level
/// `2k − N` has weight `C(N,k) e^{−β(2k−N)}`, i.e. `k ~ Binomial(N, 1/(1+e^{2β}))`.
fn binomial_window_mass(n: usize, beta: f64, delta: f64) -> f64 {
    let p = 1.0 / (1.0 + (2.0 * beta).exp());
    let t = beta.tanh();
    let nf = n as f64;
    let mut ln_c = 0.0;
    let mut mass = 0.0;
    for k in 0..=n {
        if k > 0 {
            ln_c += ((n - k + 1) as f64 / k as f64).ln();
        }
        let e = 2.0 * k as f64 - nf;
        if e >= -nf * (t + delta) && e <= -nf * (t - delta) {
            mass += (ln_c + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp();
        }
    }
    mass
}

#[test]
fn gibbs_window_mass_matches_binomial_law() {
    let beta = 1.0f64;
    for n in [8usize, 12, 16, 20] {
        let levels: Vec<f64> = t_spectrum(n)
            .into_iter()
            .flat_map(|(e, m)| std::iter::repeat(e as f64).take(m as usize))
            .collect();
        let t = beta.tanh();
        let mass = gibbs_window_mass(&levels, beta, -(n as f64) * (t + 0.2), -(n as f64) * (t - 0.2));
        assert_abs_diff_eq!(mass, binomial_window_mass(n, beta, 0.2), epsilon = 1e-10);
        assert_abs_diff_eq!(gibbs_mean(&levels, beta), -(n as f64) * t, epsilon = 1e-10 * n as f64);
    }
    // The window mass tends to one; parity of the lattice makes it uneven at small N.
    assert!(binomial_window_mass(200, beta, 0.2) > 0.99);
    assert!(binomial_window_mass(400, beta, 0.2) > binomial_window_mass(200, beta, 0.2));
}

#[test]
#[ignore = "known red at N = 12: the window holds two levels and mass 0.618, see decisions ledger"]
fn gibbs_weight_concentrates_for_pure_t() {
    let (n, beta) = (12, 1.0f64);
    let levels: Vec<f64> = t_spectrum(n)
        .into_iter()
        .flat_map(|(e, m)| std::iter::repeat(e as f64).take(m as usize))
        .collect();
    let t = beta.tanh();
    let mass = gibbs_window_mass(&levels, beta, -(n as f64) * (t + 0.2), -(n as f64) * (t - 0.2));
    assert!(mass >= 0.99, "{mass}");
    assert_abs_diff_eq!(gibbs_mean(&levels, beta), -(n as f64) * t, epsilon = 1e-10);
}

#[test]
fn classical_energy_average() {
    let u = sample_rem(8, 0).unwrap();
    assert_abs_diff_eq!(classical_u_average(&u, 0.0), u.values.iter().sum::<f64>() / 256.0, epsilon = 1e-12);
    let n = 16;
    let mean = (0..50).map(|s| classical_u_average(&sample_rem(n, s).unwrap(), 0.7) / n as f64).sum::<f64>() / 50.0;
    assert!((mean + 0.7).abs() <= 0.05, "{mean}");
}

#[test]
fn corrections_vanish_without_field() {
    for beta in [0.5, 2.0] {
        let u = sample_rem(9, 3).unwrap();
        let (x, flagged) = correction_sample(&u, beta, 0.0, PressureMethod::DenseTrace).unwrap();
        assert!(x.abs() < 1e-10 && !flagged);
    }
}

#[test]
fn correction_series_shape() {
    let s = correction_measurement(1.0, 2.0, &[6, 8], &[0, 1, 2], PressureMethod::DenseTrace).unwrap();
    assert_eq!(s.rows.len(), 2);
    assert_abs_diff_eq!(s.rows[0].prediction, 1.0 / (2.0 * 2f64.tanh()), epsilon = 1e-15);
    for row in &s.rows {
        assert_eq!(row.samples.len(), 3);
        let (m, se) = mean_stderr(&row.samples);
        assert_eq!((row.mean, row.stderr), (m, se));
        // Paramagnet correction is positive: the disorder only adds to ln Z by Jensen.
        assert!(row.samples.iter().all(|&x| x > 0.0));
    }
    assert!(correction_measurement(1.0, qrem::predictions::gamma_c(1.0), &[6], &[0], PressureMethod::DenseTrace).is_err());
}

#[test]
fn ruelle_samples_are_positive() {
    for seed in 0..5 {
        let u = sample_rem(8, seed).unwrap();
        let x = ruelle_fluctuation_sample(&u, 1.8, 0.2, PressureMethod::DenseTrace).unwrap();
        assert!(x > 0.0 && x.is_finite());
    }
    let u = sample_rem(8, 0).unwrap();
    assert!(ruelle_fluctuation_sample(&u, 1.0, 0.2, PressureMethod::DenseTrace).is_err());
    assert!(ruelle_fluctuation_sample(&u, 1.8, 2.0, PressureMethod::DenseTrace).is_err());
    // Γ = 0: prefactor times Z is the classical Ruelle normalization.
    let ln = ln_ruelle_sample(&u, 1.8, 0.0, PressureMethod::ClassicalExact).unwrap();
    let want = qrem::predictions::ln_ruelle_prefactor(8, 1.8, 0.0).unwrap() + classical_pressure(&u, 1.8);
    assert_abs_diff_eq!(ln, want, epsilon = 1e-12);
}

#[test]
fn ruelle_law_is_stable_from_n11_to_n13() {
    // Two-sample KS distance between the laws of ln(sample) at N = 11 and 13.
    let (beta, gamma) = (1.8, 0.2);
    let draw = |n: usize| {
        let mut xs: Vec<f64> = (0..200)
            .map(|s| {
                let u = sample_rem(n, s).unwrap();
                ln_ruelle_sample(&u, beta, gamma, PressureMethod::DiagonalQuadrature { samples: 256 }).unwrap()
            })
            .collect();
        xs.sort_by(f64::total_cmp);
        xs
    };
    let (a, b) = (draw(11), draw(13));
    let q = |xs: &[f64], p: f64| xs[(p * (xs.len() - 1) as f64) as usize];
    assert!((q(&b, 0.75) - q(&b, 0.25)).is_finite() && q(&b, 0.75) > q(&b, 0.25));
    let ecdf = |xs: &[f64], x: f64| xs.partition_point(|&v| v <= x) as f64 / xs.len() as f64;
    let d = a.iter().chain(&b).map(|&x| (ecdf(&a, x) - ecdf(&b, x)).abs()).fold(0.0, f64::max);
    assert!(d <= 0.15, "KS distance {d}");
    assert!(beta > beta_c());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_sum_exp_is_permutation_invariant(mut xs in prop::collection::vec(-700.0f64..700.0, 1..40), seed in any::<u64>()) {
        let a = log_sum_exp(xs.iter().copied());
        let k = (seed % xs.len() as u64) as usize;
        xs.rotate_left(k);
        xs.reverse();
        let b = log_sum_exp(xs.iter().copied());
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(a >= m && a <= m + (xs.len() as f64).ln() + 1e-12);
    }

    #[test]
    fn classical_pressure_matches_naive_sum(seed in any::<u64>(), beta in 0.0f64..2.0) {
        let u = sample_rem(6, seed).unwrap();
        let naive = (u.values.iter().map(|v| (-beta * v).exp()).sum::<f64>() / 64.0).ln();
        prop_assert!((classical_pressure(&u, beta) - naive).abs() <= 1e-12);
    }
}
