use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use qrem::analysis::*;
use qrem::disorder::{rescale, sample_rem};
use qrem::eigensolve::{dense_spectrum, lanczos_extremal};
use qrem::hypercube::{binomial_f64, Configuration, StateVector};
use qrem::krylov::LanczosOptions;
use qrem::operators::OperatorSpec;
use qrem::predictions::{beta_c, gumbel_cdf};

fn ground_state(n: usize, gamma: f64, seed: u64) -> StateVector {
    let u = sample_rem(n, seed).unwrap();
    let opts = LanczosOptions::lowest(1).tol(1e-9).seed(seed).vectors();
    let r = lanczos_extremal(&OperatorSpec::full(gamma, &u), &opts).unwrap();
    assert!(r.all_converged(), "N={n} seed {seed}");
    r.eigenvectors.unwrap().remove(0)
}

/// Brute-force ECDF distance over every sample point, both one-sided limits.
fn ks_oracle(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let m = samples.len() as f64;
    let mut d: f64 = 0.0;
    for &x in samples {
        let below = samples.iter().filter(|&&y| y < x).count() as f64 / m;
        let upto = samples.iter().filter(|&&y| y <= x).count() as f64 / m;
        d = d.max((cdf(x) - below).abs()).max((upto - cdf(x)).abs());
    }
    d
}

#[test]
fn stats_of_phi_empty() {
    let n = 10;
    let s = eigvec_stats(&StateVector::phi_empty(n).unwrap(), 0.5, 3).unwrap();
    assert_abs_diff_eq!(s.linf * s.linf, 2f64.powi(-10), epsilon = 1e-15);
    assert_abs_diff_eq!(s.overlap_phi_empty, 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(s.phi_empty_distance, 0.0, epsilon = 1e-6);
    assert_abs_diff_eq!(s.l1, 32.0, epsilon = 1e-10);
    assert_abs_diff_eq!(s.l2, 1.0, epsilon = 1e-12);
    assert_eq!(s.argmax, 0);
}

#[test]
fn stats_of_delta() {
    let c = Configuration::new(0b1011, 8).unwrap();
    let s = eigvec_stats(&StateVector::delta(c), 0.5, 4).unwrap();
    assert_eq!((s.l1, s.l2, s.l4, s.linf), (1.0, 1.0, 1.0, 1.0));
    assert_eq!(s.argmax, 0b1011);
    assert_eq!(s.ball_mass, vec![1.0; 5]);
    assert_abs_diff_eq!(s.delta_distance, 0.0, epsilon = 1e-15);
    assert_abs_diff_eq!(s.overlap_phi_empty, 1.0 / 16.0, epsilon = 1e-15);
}

#[test]
fn first_order_vector_is_normalized() {
    let n = 12;
    let xi = first_order_vector(n, 0.5, 7).unwrap();
    // (1 − Γ²/(β_c²N)) + N·Γ²/(β_c N)² = 1.
    assert_abs_diff_eq!(xi.norm(), 1.0, epsilon = 1e-14);
    assert!(first_order_vector(2, 3.0, 0).is_err());
    let s = eigvec_stats(&xi, 0.5, 2).unwrap();
    assert_abs_diff_eq!(s.xi_distance, 0.0, epsilon = 1e-14);
    assert_abs_diff_eq!(s.ball_mass[1], 1.0, epsilon = 1e-14);
}

#[test]
fn stats_are_sign_blind() {
    let psi = ground_state(10, 0.5, 3);
    let mut neg = psi.clone();
    neg.amplitudes.iter_mut().for_each(|x| *x = -*x);
    let (a, b) = (eigvec_stats(&psi, 0.5, 3).unwrap(), eigvec_stats(&neg, 0.5, 3).unwrap());
    assert_eq!(a.argmax, b.argmax);
    assert_abs_diff_eq!(a.overlap_phi_empty, b.overlap_phi_empty, epsilon = 1e-15);
    assert_abs_diff_eq!(a.xi_distance, b.xi_distance, epsilon = 1e-15);
}

#[test]
fn spin_glass_ground_states() {
    // ℓ¹ near β_c/(β_c − Γ), mass concentrated on B_2(σ*), and ξ closer than δ_{σ*}.
    let gamma = 0.5;
    let target = beta_c() / (beta_c() - gamma);
    assert_abs_diff_eq!(target, 1.7381, epsilon = 1e-4);
    let mut gaps = Vec::new();
    for n in [12, 16] {
        let mut acc = 0.0;
        for seed in 0..8 {
            let s = eigvec_stats(&ground_state(n, gamma, seed), gamma, 2).unwrap();
            assert!(s.xi_distance.powi(2) < s.delta_distance.powi(2), "N={n} seed {seed}");
            if n == 16 {
                assert!(s.ball_mass[2] >= 0.99, "seed {seed}: {:?}", s.ball_mass);
            }
            acc += s.l1;
        }
        gaps.push((acc / 8.0 - target).abs());
    }
    assert!(gaps[1] <= 0.3, "{gaps:?}");
    assert!(gaps[1] < gaps[0], "{gaps:?}");
}

#[test]
fn paramagnetic_ground_state_approaches_phi_empty() {
    let mut means = Vec::new();
    for n in [10, 12, 14, 16] {
        let d: f64 = (0..5).map(|s| eigvec_stats(&ground_state(n, 2.0, s), 2.0, 0).unwrap().phi_empty_distance).sum();
        means.push(d / 5.0);
    }
    assert!(means.windows(2).all(|w| w[1] < w[0]), "{means:?}");
}

#[test]
fn phi_empty_always_passes_delocalization() {
    for n in [6, 10, 16] {
        let nf = n as f64;
        let psi = StateVector::phi_empty(n).unwrap();
        for (v, frac) in [(0.0, 0.5), (0.3, 0.1), (0.5, 0.9)] {
            let e = -nf * (1.0 + v) + frac * nf;
            let r = delocalization_verdict(&psi, e, v, n).unwrap();
            assert!(r.holds && r.slack >= 1.0 - 1e-12);
        }
    }
    let psi = StateVector::phi_empty(6).unwrap();
    assert!(delocalization_verdict(&psi, 1.0, 0.2, 6).is_err());
}

#[test]
fn dense_eigenvectors_satisfy_delocalization() {
    // H/Γ = T + U/Γ with U/Γ ≥ −vN; every eigenvector at λ ≤ −vN obeys the
    // bound evaluated at its own eigenvalue.
    let (n, gamma) = (10, 2.0);
    let nf = n as f64;
    for seed in 0..3 {
        let u = sample_rem(n, seed).unwrap();
        let v = (-u.min()).max(0.0) / (gamma * nf);
        let res = dense_spectrum(&OperatorSpec::full(gamma, &u), true).unwrap();
        let vecs = res.eigenvectors.unwrap();
        let mut checked = 0;
        for (e, psi) in res.eigenvalues.iter().zip(&vecs) {
            let lambda = e / gamma;
            if lambda > -v * nf {
                break;
            }
            let r = delocalization_verdict(psi, lambda.max(-nf * (1.0 + v)), v, n).unwrap();
            assert!(r.holds, "seed {seed}, E = {e}: {} > {}", r.measured, r.bound);
            checked += 1;
        }
        assert!(checked > 0);
    }
}

#[test]
fn ks_matches_brute_force() {
    let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64 / 10.0 - 2.0).collect();
    assert_abs_diff_eq!(ks_gumbel(&xs), ks_oracle(&xs, gumbel_cdf), epsilon = 1e-15);
    let shifted: Vec<f64> = (0..200).map(|s| rescale(sample_rem(10, s).unwrap().min(), 10, 0.0).unwrap().x).collect();
    let base = ks_gumbel(&shifted);
    let moved: Vec<f64> = shifted.iter().map(|x| x + 1.0).collect();
    assert!(ks_gumbel(&moved) > base);
}

#[test]
fn zero_field_ensemble_is_the_rem() {
    let seeds: Vec<u64> = (0..40).collect();
    let e = extreme_ensemble(10, 0.0, &seeds).unwrap();
    assert_eq!(e.samples.len(), 40);
    assert!(e.failures.is_empty());
    for (x, &s) in e.samples.iter().zip(&seeds) {
        assert_eq!(*x, rescale(sample_rem(10, s).unwrap().min(), 10, 0.0).unwrap().x);
    }
    assert!((0.0..=1.0).contains(&e.ks_to_reference));
    assert!(extreme_ensemble(10, 1.5, &seeds).is_err());
}

#[test]
fn mismatch_without_field_is_zero() {
    let r = sigma0_mismatch(10, 0.0, &(0..30).collect::<Vec<_>>()).unwrap();
    assert_eq!(r.rate, 0.0);
    assert_eq!(r.min_u_hits, 30);
    assert!(r.interval.0 == 0.0 && r.interval.1 < 0.15);
}

#[test]
fn second_order_energy_example() {
    let n = 6;
    let mut vals = vec![0.0; 64];
    vals[0] = -8.0;
    vals[1] = 2.0;
    vals[2] = -1.0;
    let u = qrem::disorder::DisorderField::from_values(n, vals).unwrap();
    let g = 0.5;
    assert_abs_diff_eq!(second_order_energy(&u, g, 0), -8.0 + 0.25 * 6.0 / -8.0 + 0.25 * 1.0 / 64.0, epsilon = 1e-15);
}

#[test]
fn mismatch_rate_scales_like_one_over_n() {
    let seeds: Vec<u64> = (0..500).collect();
    let r12 = sigma0_mismatch(12, 0.8, &seeds).unwrap();
    let r16 = sigma0_mismatch(16, 0.8, &seeds).unwrap();
    assert!(r16.rate > 0.0 && r16.rate < 0.5, "{}", r16.rate);
    let ratio = (16.0 * r16.rate) / (12.0 * r12.rate);
    assert!((1.0 / 3.0..=3.0).contains(&ratio), "N·rate: {} vs {}", 12.0 * r12.rate, 16.0 * r16.rate);
    for r in [&r12, &r16] {
        assert!(r.predictor_hits > r.min_u_hits, "N={}: {} vs {}", r.n, r.predictor_hits, r.min_u_hits);
        assert!(r.interval.0 <= r.rate && r.rate <= r.interval.1);
    }
}

/// Distance law by repeated multiplication with the full cube transition matrix.
fn brute_walk(n: usize, steps: usize) -> Vec<f64> {
    let dim = 1usize << n;
    let mut p = vec![0.0; dim];
    p[0] = 1.0;
    for _ in 0..steps {
        let mut next = vec![0.0; dim];
        for (s, &w) in p.iter().enumerate() {
            for j in 0..n {
                next[s ^ (1 << j)] += w / n as f64;
            }
        }
        p = next;
    }
    p
}

#[test]
fn walk_examples() {
    assert_eq!(rw_transition(8, 0, 0).unwrap(), 1.0);
    assert_eq!(rw_transition(8, 0, 3).unwrap(), 0.0);
    assert_abs_diff_eq!(rw_transition(8, 1, 1).unwrap(), 1.0 / 8.0, epsilon = 1e-15);
    assert!(rw_transition(8, 2, 9).is_err());
    // Parity: an odd number of steps never returns.
    assert_eq!(rw_transition(8, 3, 0).unwrap(), 0.0);
}

#[test]
fn walk_matches_brute_force() {
    let n = 7;
    for steps in [0, 1, 2, 5, 9] {
        let p = brute_walk(n, steps);
        for s in [0usize, 1, 0b11, 0b1011, 0b1111111] {
            let d = s.count_ones() as usize;
            assert_abs_diff_eq!(rw_transition(n, steps, d).unwrap(), p[s], epsilon = 1e-14);
        }
    }
}

#[test]
fn walk_envelope_at_n16() {
    let (n, alpha) = (16, 0.25);
    let steps = 4;
    let env = rw_envelope(n, alpha).unwrap();
    let worst = (0..=n).map(|d| rw_transition(n, steps, d).unwrap()).fold(0.0, f64::max);
    assert!(worst <= env, "{worst} > {env}");
    assert_abs_diff_eq!(env, (-0.5f64).exp(), epsilon = 1e-12);
}

#[test]
fn sojourn_examples() {
    let empty = rw_sojourn(16, 0, 0.25, 0.125, 1000, 1).unwrap();
    assert_eq!(empty.probability, 0.0);
    let late = rw_sojourn(16, 4, 0.25, 0.3, 1000, 1).unwrap();
    assert_eq!(late.probability, 0.0);
    let est = rw_sojourn(16, 4, 0.25, 0.125, 100_000, 7).unwrap();
    assert!(est.probability <= est.bound, "{} > {}", est.probability, est.bound);
    assert_eq!(est.w.len(), 4);
    assert!(!est.w.contains(&0));
}

/// Exact `P(visits ≥ need)` by dynamic programming over (site, visit count).
fn sojourn_exact(n: usize, w: &[u32], steps: usize, need: usize) -> f64 {
    let dim = 1usize << n;
    let cap = need;
    let mut p = vec![vec![0.0; cap + 1]; dim];
    p[0][w.contains(&0) as usize] = 1.0;
    for _ in 0..steps {
        let mut next = vec![vec![0.0; cap + 1]; dim];
        for s in 0..dim {
            for c in 0..=cap {
                let mass = p[s][c];
                if mass == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let t = s ^ (1 << j);
                    let c2 = (c + w.contains(&(t as u32)) as usize).min(cap);
                    next[t][c2] += mass / n as f64;
                }
            }
        }
        p = next;
    }
    p.iter().map(|row| row[cap]).sum()
}

#[test]
fn sojourn_matches_exact_dp() {
    let (n, alpha, t) = (8, 0.75, 0.25);
    let trials = 40_000;
    let est = rw_sojourn(n, 6, alpha, t, trials, 3).unwrap();
    let need = (t * n as f64).ceil() as usize;
    let exact = sojourn_exact(n, &est.w, est.steps, need);
    let sd = (exact * (1.0 - exact) / trials as f64).sqrt();
    assert!((est.probability - exact).abs() <= 4.0 * sd, "{} vs {exact}", est.probability);
}

proptest! {
    #[test]
    fn walk_conserves_probability(n in 1usize..=30, steps in 0usize..60) {
        let total: f64 = (0..=n).map(|d| binomial_f64(n, d) * rw_transition(n, steps, d).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_sample_ks_matches_brute_force(
        a in prop::collection::vec(-5i32..5, 1..30),
        b in prop::collection::vec(-5i32..5, 1..30),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let ecdf = |xs: &[f64], x: f64| xs.iter().filter(|&&v| v <= x).count() as f64 / xs.len() as f64;
        let want = a.iter().chain(&b).map(|&x| (ecdf(&a, x) - ecdf(&b, x)).abs()).fold(0.0, f64::max);
        prop_assert!((ks_two_sample(&a, &b) - want).abs() < 1e-15);
        prop_assert!(ks_two_sample(&a, &a) == 0.0);
    }

    #[test]
    fn eigvec_invariants(seed in any::<u64>(), k in 0usize..8) {
        let n = 8;
        let mut rng = qrem::rng::aux_rng(seed, qrem::rng::STREAM_TEST);
        use rand::Rng;
        let raw: Vec<f64> = (0..256).map(|_| rng.random::<f64>() - 0.3).collect();
        let psi = StateVector::from_vec(n, raw).unwrap().normalized();
        let s = eigvec_stats(&psi, 0.4, k).unwrap();
        prop_assert!((s.l2 - 1.0).abs() < 1e-8);
        prop_assert!(s.l1 >= 1.0 - 1e-12 && s.linf <= 1.0 + 1e-12);
        prop_assert!(s.ball_mass.windows(2).all(|w| w[1] >= w[0] - 1e-15));
        prop_assert!(*s.ball_mass.last().unwrap() <= 1.0 + 1e-12);
        prop_assert!(s.l4 <= s.l2 + 1e-12 && s.linf <= s.l4 + 1e-12);
    }
}
