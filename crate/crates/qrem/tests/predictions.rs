use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use qrem::predictions::*;

fn entropy(p: f64) -> f64 {
    let t = |x: f64| if x == 0.0 { 0.0 } else { -x * x.ln() };
    t(p) + t(1.0 - p)
}

#[test]
fn critical_constants() {
    assert_abs_diff_eq!(beta_c(), 1.177_410, epsilon = 5e-7);
    assert_eq!(gamma_c(0.0), 1.0);
    assert_abs_diff_eq!(gamma_c(beta_c()), 2f64.acosh() / beta_c(), epsilon = 1e-12);
    assert_abs_diff_eq!(gamma_c(beta_c()), 1.118_521_052, epsilon = 1e-9);
}

#[test]
fn gamma_c_matches_acosh_oracle() {
    for i in 1..=60 {
        let beta = 0.05 * i as f64;
        let want = p_rem(beta).exp().acosh() / beta;
        assert!((gamma_c(beta) - want).abs() <= 1e-10 * want, "β = {beta}");
    }
    // Small-β branch joins the series 1 + β²/12 smoothly.
    for beta in [1e-8, 1e-6, 5e-5, 2e-4] {
        assert_abs_diff_eq!(gamma_c(beta), 1.0 + beta * beta / 12.0, epsilon = 1e-10);
    }
}

#[test]
fn p_rem_branches() {
    let bc = beta_c();
    assert_abs_diff_eq!(p_rem(0.5), 0.125, epsilon = 1e-15);
    assert_abs_diff_eq!(p_rem(bc), std::f64::consts::LN_2, epsilon = 1e-15);
    assert_abs_diff_eq!(p_rem(2.0), 2.0 * bc - std::f64::consts::LN_2, epsilon = 1e-14);
    assert_abs_diff_eq!(p_par(1.3), 1.3f64.cosh().ln(), epsilon = 1e-14);
    assert_abs_diff_eq!(ln_cosh(800.0), 800.0 - std::f64::consts::LN_2, epsilon = 1e-12);
}

#[test]
fn pressure_branches_meet_on_the_critical_line() {
    for i in 0..=80 {
        let beta = 0.05 * i as f64;
        let g = gamma_c(beta);
        assert!((p_rem(beta) - p_par(beta * g)).abs() <= 1e-12, "β = {beta}");
        assert_eq!(phase_point(beta, g).regime, Regime::CriticalLine);
    }
}

#[test]
fn phase_regimes() {
    assert_eq!(phase_point(0.5, 0.3).regime, Regime::RemClassical);
    assert_eq!(phase_point(2.0, 0.3).regime, Regime::RemFrozen);
    assert_eq!(phase_point(1.0, 2.0).regime, Regime::QuantumParamagnet);
    assert_eq!(phase_point(0.0, 1.5).regime, Regime::QuantumParamagnet);
    let json = serde_json::to_value(phase_point(2.0, 0.3)).unwrap();
    assert_eq!(json["regime"], "rem-frozen");
}

#[test]
fn paramagnetic_level_examples() {
    let (levels, warn) = paramagnetic_levels(20, 2.0, 0.1);
    assert!(!warn);
    assert_eq!(levels.iter().map(|l| l.n).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    assert_abs_diff_eq!(levels[0].center, -40.5, epsilon = 1e-12);
    assert_eq!(levels[0].multiplicity, 1);
    assert_abs_diff_eq!(levels[1].center, -36.0 - 20.0 / 36.0, epsilon = 1e-12);
    assert_abs_diff_eq!(levels[1].center, -36.5556, epsilon = 5e-5);
    assert_eq!(levels[1].multiplicity, 20);
    assert!(paramagnetic_levels(20, 1.0, 0.1).1);
}

#[test]
fn ground_state_examples() {
    assert_eq!(ground_state_prediction(20, 2.0, -25.0).energy(), -40.5);
    assert!(matches!(ground_state_prediction(20, 2.0, -25.0), GroundStatePrediction::Paramagnet { .. }));
    assert_eq!(ground_state_prediction(16, 0.0, -19.7).energy(), -19.7);
    let g = ground_state_prediction(16, 0.5, -1.2 * 16.0);
    assert!(matches!(g, GroundStatePrediction::SpinGlass { .. }));
    assert_abs_diff_eq!(g.energy(), -19.2 + 0.25 * 16.0 / -19.2, epsilon = 1e-12);
    assert_abs_diff_eq!(g.energy(), -19.4083, epsilon = 5e-5);
}

#[test]
fn critical_window_returns_both_branches() {
    let (n, min_u) = (16, -1.1 * 16.0);
    let gn = critical_field(n, min_u);
    // At Γ_N both predictions coincide: −ΓN − 1/Γ = U + Γ²N/U solved for Γ.
    let para = -gn * n as f64 - 1.0 / gn;
    let glass = min_u + gn * gn * n as f64 / min_u;
    assert!((para - glass).abs() < 0.1, "{para} vs {glass}");
    match ground_state_prediction(n, gn + 0.5 / n as f64, min_u) {
        GroundStatePrediction::Critical { paramagnet, spin_glass } => {
            assert!(paramagnet.is_finite() && spin_glass.is_finite());
        }
        other => panic!("expected critical branch, got {other:?}"),
    }
    assert!(!matches!(ground_state_prediction(n, gn + 2.0 / n as f64, min_u), GroundStatePrediction::Critical { .. }));
}

#[test]
fn correction_examples() {
    assert_abs_diff_eq!(free_energy_correction(1.0, 2.0).unwrap(), 1.0 / (2.0 * 2f64.tanh()), epsilon = 1e-15);
    assert_abs_diff_eq!(free_energy_correction(1.0, 2.0).unwrap(), 0.518_657_360, epsilon = 1e-9);
    assert_abs_diff_eq!(free_energy_correction(0.5, 0.3).unwrap(), 0.09, epsilon = 1e-15);
    assert_abs_diff_eq!(free_energy_correction(2.0, 0.3).unwrap(), 0.152_878, epsilon = 5e-7);
    assert!(free_energy_correction(1.0, gamma_c(1.0)).is_err());
    assert_abs_diff_eq!(free_energy_correction(0.0, 2.0).unwrap(), 0.25, epsilon = 1e-15);
}

#[test]
fn classical_and_frozen_corrections_meet_at_beta_c() {
    let g = 0.4;
    let below = free_energy_correction(beta_c() * (1.0 - 1e-12), g).unwrap();
    let above = free_energy_correction(beta_c() * (1.0 + 1e-12), g).unwrap();
    assert_abs_diff_eq!(below, above, epsilon = 1e-10);
}

#[test]
fn deloc_bound_examples() {
    let (n, v) = (16, 0.3);
    let nf = n as f64;
    assert_abs_diff_eq!(deloc_bound(-(1.0 + v) * nf, v, n).unwrap(), 2f64.powi(-16), epsilon = 1e-18);
    assert_abs_diff_eq!(deloc_bound(-v * nf, v, n).unwrap(), 1.0, epsilon = 1e-12);
    let v = (beta_c() + 0.1) / 4.0;
    let e = -1.2 * nf;
    let nu = e / nf + v;
    let want = 2f64.powi(-16) * (nf * entropy((1.0 + nu) / 2.0)).exp();
    let got = deloc_bound(e, v, n).unwrap();
    assert!((got - want).abs() <= 1e-12 * want);
    assert!(got < 1e-2);
    assert!(deloc_bound(-(1.0 + v) * nf - 0.1, v, n).is_err());
    assert!(deloc_bound(0.0, v, n).is_err());
    assert!(deloc_bound(-10.0, 1.0, n).is_err());
}

#[test]
fn gumbel_examples() {
    assert_abs_diff_eq!(gumbel_cdf(0.0), (-1.0f64).exp(), epsilon = 1e-15);
    assert_abs_diff_eq!(gumbel_cdf(0.0), 0.367_879, epsilon = 5e-7);
    assert!(gumbel_cdf(-10.0) < 1e-9);
    assert!(gumbel_cdf(30.0) > 1.0 - 1e-12);
}

#[test]
fn ruelle_prefactor_log_domain() {
    let (n, beta, gamma) = (16usize, 1.5, 0.4);
    let bc = (2.0 * 2f64.ln()).sqrt();
    let terms = [
        -(n as f64) * (beta * bc - 2f64.ln()),
        beta / (2.0 * bc) * (n as f64 * 2f64.ln()).ln(),
        beta / (2.0 * bc) * (4.0 * std::f64::consts::PI).ln(),
        -beta * gamma * gamma / bc,
    ];
    let ln_want: f64 = terms.iter().sum();
    assert!((ln_ruelle_prefactor(n, beta, gamma).unwrap() - ln_want).abs() <= 1e-12);
    let p = ruelle_prefactor(n, beta, gamma).unwrap();
    assert!((p / ln_want.exp() - 1.0).abs() <= 1e-12);
    // Γ only enters through e^{−βΓ²/β_c}.
    let ratio = ruelle_prefactor(n, beta, gamma).unwrap() / ruelle_prefactor(n, beta, 0.0).unwrap();
    assert_abs_diff_eq!(ratio, (-beta * gamma * gamma / bc).exp(), epsilon = 1e-12);
    assert!(ruelle_prefactor(n, 1.0, 0.4).is_err());
}

#[test]
fn phase_rows() {
    let r = phase_row(1.0, 2.0);
    assert_eq!(r.regime, Regime::QuantumParamagnet);
    assert_abs_diff_eq!(r.pressure, 2f64.cosh().ln(), epsilon = 1e-14);
    assert!(phase_row(1.0, gamma_c(1.0)).correction.is_none());
}

proptest! {
    #[test]
    fn level_centers_increase_and_stay_below_threshold(n in 2usize..=40, gamma in 1.2f64..5.0, eta in 0.0f64..0.5) {
        let (levels, _) = paramagnetic_levels(n, gamma, eta);
        let threshold = -(beta_c() + 2.0 * eta) * n as f64;
        prop_assert!(levels.windows(2).all(|w| w[1].center > w[0].center));
        for l in &levels {
            prop_assert!((2.0 * l.n as f64 - n as f64) * gamma < threshold);
        }
    }

    #[test]
    fn pressure_is_the_larger_branch(beta in 0.0f64..4.0, gamma in 0.0f64..4.0) {
        let p = pressure_limit(beta, gamma);
        prop_assert!(p >= p_rem(beta) && p >= p_par(beta * gamma));
        let regime = phase_point(beta, gamma).regime;
        if regime == Regime::QuantumParamagnet {
            prop_assert!(p_par(beta * gamma) >= p_rem(beta) - 1e-12);
        }
    }

    #[test]
    fn deloc_bound_is_a_probability_scale(n in 4usize..=30, v in 0.0f64..0.99, t in 0.0f64..1.0) {
        let nf = n as f64;
        let e = -nf * (1.0 + v) + t * nf;
        let b = deloc_bound(e, v, n).unwrap();
        prop_assert!(b >= 2f64.powi(-(n as i32)) * (1.0 - 1e-12) && b <= 1.0 + 1e-12);
    }
}
