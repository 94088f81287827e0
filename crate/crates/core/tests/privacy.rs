use privbary_core::dp::{
    amplified_epsilon, discrete_laplace_variance, discrete_laplace_zero_mass, epsilon_before_amplification,
    exponential_mechanism, exponential_mechanism_probabilities, gaussian_calibration, gaussian_mechanism,
    sample_discrete_laplace, PrivacyBudget, PrivacyLedger, Scope, Share, Strictness,
};
use privbary_core::rng::rng_from_seed;
use proptest::prelude::*;

#[test]
fn discrete_laplace_matches_closed_form_pmf() {
    let scale = 1.7;
    let draws = 200_000;
    let mut rng = rng_from_seed(1);
    let mut hist = std::collections::HashMap::<i64, usize>::new();
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..draws {
        let z = sample_discrete_laplace(scale, &mut rng).unwrap();
        *hist.entry(z).or_default() += 1;
        s += z as f64;
        s2 += (z * z) as f64;
    }
    let alpha = (-1.0f64 / scale).exp();
    for z in -3i64..=3 {
        let expected = (1.0 - alpha) / (1.0 + alpha) * alpha.powi(z.abs() as i32);
        let got = hist.get(&z).copied().unwrap_or(0) as f64 / draws as f64;
        assert!((got - expected).abs() < 4.0 * (expected / draws as f64).sqrt() + 1e-3, "z={z}: {got} vs {expected}");
    }
    let mean = s / draws as f64;
    let var = s2 / draws as f64 - mean * mean;
    assert!(mean.abs() < 0.03);
    assert!((var / discrete_laplace_variance(scale) - 1.0).abs() < 0.03);
    assert!(((1.0 - alpha) / (1.0 + alpha) - discrete_laplace_zero_mass(scale)).abs() < 1e-15);
}

#[test]
fn gaussian_noise_has_calibrated_variance() {
    let budget = PrivacyBudget::new(0.5, 1e-5).unwrap();
    let cal = gaussian_calibration(0.3, &budget).unwrap();
    let expected = 0.09 * 2.0 * (1.25f64 / 1e-5).ln() / 0.25;
    assert!((cal.sigma2 - expected).abs() < 1e-12 * expected);
    assert!(cal.warning.is_none());
    let mut rng = rng_from_seed(2);
    let rel = gaussian_mechanism(&vec![0.0; 50_000], 0.3, &budget, 1.0, &mut rng).unwrap();
    let var = rel.values.iter().map(|v| v * v).sum::<f64>() / rel.values.len() as f64;
    assert!((var / expected - 1.0).abs() < 0.03);
    assert_eq!(rel.noise.strictness(), Strictness::Strict);
    let half = gaussian_mechanism(&[0.0], 0.3, &budget, 0.5, &mut rng).unwrap();
    assert_eq!(half.noise.strictness(), Strictness::Heuristic);
    assert!(gaussian_calibration(0.3, &PrivacyBudget::pure(1.0).unwrap()).is_err());
}

#[test]
fn exponential_mechanism_frequencies() {
    let u = [0.0, 1.0, 2.0, 0.5];
    let probs = exponential_mechanism_probabilities(&u, 1.0, 1.5).unwrap();
    let z: f64 = u.iter().map(|x| (0.75 * x).exp()).sum();
    for (p, x) in probs.iter().zip(u) {
        assert!((p - (0.75 * x).exp() / z).abs() < 1e-14);
    }
    let mut rng = rng_from_seed(3);
    let mut counts = [0usize; 4];
    let draws = 100_000;
    for _ in 0..draws {
        counts[exponential_mechanism(&u, 1.0, 1.5, &mut rng).unwrap()] += 1;
    }
    for (c, p) in counts.iter().zip(&probs) {
        assert!((*c as f64 / draws as f64 - p).abs() < 0.01);
    }
}

#[test]
fn amplification_round_trip() {
    let a = amplified_epsilon(1.0, 0.01).unwrap();
    assert!((a - 0.017037).abs() < 1e-6);
    assert!((amplified_epsilon(1.0, 0.5).unwrap() - 0.6201).abs() < 1e-4);
    let tiny = amplified_epsilon(1e-3, 0.2).unwrap();
    assert!((tiny / 2e-4 - 1.0).abs() < 0.01);
    assert!((epsilon_before_amplification(a, 0.01).unwrap() - 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn equal_sequential_shares_exhaust_budget_exactly(n in 1u64..64, eps in 0.01f64..10.0) {
        let budget = PrivacyBudget::pure(eps).unwrap();
        let mut l = PrivacyLedger::new(budget);
        for i in 0..n {
            l.charge(&format!("{i}"), Scope::Sequential, Share::new(1, n), Share::ZERO).unwrap();
        }
        prop_assert_eq!(l.charged().unwrap(), budget);
        prop_assert!(l.charge("over", Scope::Sequential, Share::new(1, 1000), Share::ZERO).is_err());
    }

    #[test]
    fn parallel_groups_cost_their_maximum(shares in prop::collection::vec(1u64..10, 1..8)) {
        let mut l = PrivacyLedger::new(PrivacyBudget::new(1.0, 1e-6).unwrap());
        for s in &shares {
            l.charge("part", Scope::Parallel { group: 3 }, Share::new(*s, 10), Share::new(*s, 10)).unwrap();
        }
        let max = *shares.iter().max().unwrap();
        prop_assert_eq!(l.total_shares().unwrap(), (Share::new(max, 10), Share::new(max, 10)));
    }

    #[test]
    fn discrete_laplace_ratio_and_variance(scale in 0.2f64..5.0) {
        let alpha = (-1.0 / scale).exp();
        let pmf = |z: i64| (1.0 - alpha) / (1.0 + alpha) * alpha.powi(z.abs() as i32);
        // Neighbouring counts c and c + 1 give output ratios within e^{1/scale}.
        for v in -5i64..5 {
            let r = pmf(v) / pmf(v - 1);
            prop_assert!(r <= (1.0 / scale).exp() * (1.0 + 1e-12));
        }
        let var = discrete_laplace_variance(scale);
        let direct: f64 = (-400i64..=400).map(|z| (z * z) as f64 * pmf(z)).sum();
        prop_assert!((var - direct).abs() < 1e-9 * var.max(1.0));
    }
}
