//! Cross-module property tests.

use bandit_core::exp_family::{BanditInstance, ExpFamily};
use bandit_core::harness::{monte_carlo_regret, ExperimentConfig, Mode};
use bandit_core::policies::{PolicyConfig, PolicyKind};
use bandit_core::posterior::{Posterior, Prior};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Level-set inversion: the result satisfies the constraint from below
    // and is monotone in the level.
    #[test]
    fn level_set_monotone_and_feasible(
        x in 0.01f64..0.99,
        level_lo in 0.001f64..1.0,
        bump in 0.001f64..1.0,
    ) {
        let b = ExpFamily::Bernoulli;
        let q_lo = b.d_level_set_sup(x, level_lo, 1.0).unwrap();
        let q_hi = b.d_level_set_sup(x, level_lo + bump, 1.0).unwrap();
        prop_assert!(q_hi >= q_lo - 1e-12);
        prop_assert!(q_lo >= x);
        if q_lo < 1.0 {
            prop_assert!(b.kl_mean(x, q_lo).unwrap() <= level_lo + 1e-9);
        }
    }

    // Quantile/tail duality across the posterior grid.
    #[test]
    fn quantile_tail_duality(
        alpha in 0.01f64..0.99,
        n in 0u64..200,
        tenths in 0u32..=10,
    ) {
        let xbar = tenths as f64 / 10.0;
        let p = Posterior::with_stats(
            ExpFamily::Bernoulli,
            Prior::Beta { alpha: 1.0, beta: 1.0 },
            n,
            xbar,
        ).unwrap();
        let q = p.quantile(alpha).unwrap();
        prop_assert!((p.tail(q).unwrap() - (1.0 - alpha)).abs() <= 1e-8);
    }

    // Pseudo-regret of any policy on any instance stays inside
    // [0, T (mu* - mu_min)].
    #[test]
    fn regret_positive_and_bounded(
        seed in 0u64..1000,
        kind_idx in 0usize..6,
        gap_tenths in 1u32..6,
    ) {
        let kinds = [
            PolicyKind::KlUcb,
            PolicyKind::KlUcbPlus,
            PolicyKind::BayesUcb,
            PolicyKind::ThompsonSampling,
            PolicyKind::Moss,
            PolicyKind::UniformRandom,
        ];
        let lo = 0.2;
        let hi = 0.2 + gap_tenths as f64 / 10.0;
        let horizon = 60;
        let mut config = ExperimentConfig::new(
            ExpFamily::Bernoulli,
            Mode::FixedInstance { means: vec![lo, hi] },
            horizon,
            8,
            seed,
        );
        config.checkpoints = vec![horizon];
        config.policies = vec![PolicyConfig::new(kinds[kind_idx])];
        let result = monte_carlo_regret(&config).unwrap();
        let regret = result.curves[0].mean_regret[0];
        prop_assert!(regret >= 0.0);
        prop_assert!(regret <= horizon as f64 * (hi - lo) + 1e-9);
    }
}

// Bayes-UCB indices are sandwiched between kl-UCB-style levels: with a
// uniform prior, n d+(x, q) - log t stays within
// [-1.5 log n - b1, 0.5 log n + b2] over the whole grid, with b1, b2 fitted
// on the n = 1 row.
#[test]
fn bayes_ucb_quantile_sandwich() {
    let bern = ExpFamily::Bernoulli;
    let xs = [0.1, 0.3, 0.5, 0.7, 0.9];
    let ts = [2.0f64, 10.0, 100.0, 1000.0, 10_000.0];
    let ns = [1u64, 2, 5, 10, 100, 1000, 10_000];

    let residual = |x: f64, n: u64, t: f64| -> f64 {
        let posterior = Posterior::with_stats(
            bern,
            Prior::Beta { alpha: 1.0, beta: 1.0 },
            n,
            x,
        )
        .unwrap();
        let alpha = (1.0 - 1.0 / t).max(0.5);
        let q = posterior.quantile(alpha).unwrap();
        let d_plus = if q > x { bern.kl_mean(x, q).unwrap() } else { 0.0 };
        n as f64 * d_plus - t.ln()
    };

    let mut b1: f64 = 0.0;
    let mut b2: f64 = 0.0;
    for &x in &xs {
        for &t in &ts {
            let r = residual(x, 1, t);
            b1 = b1.max(-r);
            b2 = b2.max(r);
        }
    }

    for &x in &xs {
        for &n in &ns {
            for &t in &ts {
                let r = residual(x, n, t);
                let logn = (n as f64).ln();
                assert!(
                    r >= -1.5 * logn - b1 - 1e-9 && r <= 0.5 * logn + b2 + 1e-9,
                    "residual {r} outside sandwich at x={x}, n={n}, t={t} (b1={b1}, b2={b2})"
                );
            }
        }
    }
}

// The harness decomposition identity: pseudo-regret at T equals the
// gap-weighted mean pull counts.
#[test]
fn regret_decomposition_across_policies() {
    let means = vec![0.2, 0.5, 0.8];
    let instance = BanditInstance::new(ExpFamily::Bernoulli, means.clone()).unwrap();
    let mut config = ExperimentConfig::new(
        ExpFamily::Bernoulli,
        Mode::FixedInstance { means },
        120,
        64,
        99,
    );
    config.checkpoints = vec![120];
    config.policies = vec![
        PolicyConfig::new(PolicyKind::KlUcb),
        PolicyConfig::new(PolicyKind::ThompsonSampling),
        PolicyConfig::new(PolicyKind::UniformRandom),
    ];
    let result = monte_carlo_regret(&config).unwrap();
    for curve in &result.curves {
        let total: f64 = curve.mean_pulls.iter().sum();
        assert!((total - 120.0).abs() <= 1e-9, "{}: pulls {total}", curve.policy);
        let decomposed: f64 = curve
            .mean_pulls
            .iter()
            .zip(&instance.means)
            .map(|(&pulls, &mu)| (instance.mu_star - mu) * pulls)
            .sum();
        assert!(
            (decomposed - curve.mean_regret[0]).abs() <= 1e-9,
            "{}: {} vs {}",
            curve.policy,
            decomposed,
            curve.mean_regret[0]
        );
    }
}
