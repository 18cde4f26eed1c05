//! One-parameter canonical exponential families and their divergence
//! machinery.
//!
//! A family member has density `exp(theta * x - b(theta))` with respect to a
//! reference measure; the mean is `b_dot(theta)` and the variance
//! `b_ddot(theta)`, so the natural parameter `theta` and the mean `mu` are
//! dual coordinates linked by the strictly increasing map `b_dot`. Divergences
//! are exposed both in natural coordinates (`kl_natural`) and mean
//! coordinates (`kl_mean`), together with the level-set inversion
//! `d_level_set_sup` on which every UCB-type index is built, and the two
//! regularizations `d_bar` (clamped first argument) and `d_tilde` (linear
//! extension below a compact boundary).

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::invert_monotone_sup;

/// Exploration levels are inverted to this absolute tolerance in divergence
/// value, with a hard iteration cap.
const LEVEL_SET_TOL: f64 = 1e-10;
const LEVEL_SET_MAX_ITER: usize = 200;

/// A one-parameter canonical exponential family of reward distributions.
///
/// `Exponential` is the Gamma family with known shape 1, parameterized by its
/// mean (natural parameter `theta = -1/mu`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExpFamily {
    Bernoulli,
    GaussianKnownVariance { sigma2: f64 },
    Poisson,
    Exponential,
}

impl ExpFamily {
    pub fn gaussian(sigma2: f64) -> Result<Self> {
        if sigma2 > 0.0 && sigma2.is_finite() {
            Ok(ExpFamily::GaussianKnownVariance { sigma2 })
        } else {
            Err(Error::Config(format!(
                "gaussian variance must be positive and finite, got {sigma2}"
            )))
        }
    }

    /// Open interval of natural parameters.
    pub fn theta_domain(&self) -> (f64, f64) {
        match self {
            ExpFamily::Bernoulli => (f64::NEG_INFINITY, f64::INFINITY),
            ExpFamily::GaussianKnownVariance { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            ExpFamily::Poisson => (f64::NEG_INFINITY, f64::INFINITY),
            ExpFamily::Exponential => (f64::NEG_INFINITY, 0.0),
        }
    }

    /// Open interval of means, the image of the natural domain under `b_dot`.
    pub fn mean_domain(&self) -> (f64, f64) {
        match self {
            ExpFamily::Bernoulli => (0.0, 1.0),
            ExpFamily::GaussianKnownVariance { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            ExpFamily::Poisson | ExpFamily::Exponential => (0.0, f64::INFINITY),
        }
    }

    /// Log-partition function `b`.
    pub fn b(&self, theta: f64) -> f64 {
        match self {
            ExpFamily::Bernoulli => theta.exp().ln_1p(),
            ExpFamily::GaussianKnownVariance { sigma2 } => 0.5 * sigma2 * theta * theta,
            ExpFamily::Poisson => theta.exp(),
            ExpFamily::Exponential => -(-theta).ln(),
        }
    }

    /// First derivative of `b`; maps natural parameters to means.
    pub fn b_dot(&self, theta: f64) -> f64 {
        match self {
            ExpFamily::Bernoulli => 1.0 / (1.0 + (-theta).exp()),
            ExpFamily::GaussianKnownVariance { sigma2 } => sigma2 * theta,
            ExpFamily::Poisson => theta.exp(),
            ExpFamily::Exponential => -1.0 / theta,
        }
    }

    /// Second derivative of `b`; the variance in natural coordinates.
    pub fn b_ddot(&self, theta: f64) -> f64 {
        match self {
            ExpFamily::Bernoulli => {
                let s = 1.0 / (1.0 + (-theta).exp());
                s * (1.0 - s)
            }
            ExpFamily::GaussianKnownVariance { sigma2 } => *sigma2,
            ExpFamily::Poisson => theta.exp(),
            ExpFamily::Exponential => 1.0 / (theta * theta),
        }
    }

    /// Inverse mean map `b_dot^{-1}`.
    pub fn theta_of_mean(&self, mu: f64) -> f64 {
        match self {
            ExpFamily::Bernoulli => (mu / (1.0 - mu)).ln(),
            ExpFamily::GaussianKnownVariance { sigma2 } => mu / sigma2,
            ExpFamily::Poisson => mu.ln(),
            ExpFamily::Exponential => -1.0 / mu,
        }
    }

    fn validate_theta(&self, theta: f64, what: &str) -> Result<()> {
        let (lo, hi) = self.theta_domain();
        if theta.is_nan() || theta <= lo || theta >= hi {
            return Err(Error::Domain(format!(
                "{what} = {theta} outside natural domain ({lo}, {hi})"
            )));
        }
        Ok(())
    }

    /// Checks that `mu` lies strictly inside the mean domain.
    pub fn validate_mean_interior(&self, mu: f64, what: &str) -> Result<()> {
        let (lo, hi) = self.mean_domain();
        if mu.is_nan() || mu <= lo || mu >= hi {
            return Err(Error::Domain(format!(
                "{what} = {mu} outside open mean domain ({lo}, {hi})"
            )));
        }
        Ok(())
    }

    /// Checks that `x` lies in the closed mean domain. Empirical means hit
    /// the boundary with positive probability (e.g. all-zero Bernoulli
    /// rewards), so divergence first arguments are allowed there.
    pub fn validate_mean_closed(&self, x: f64, what: &str) -> Result<()> {
        let (lo, hi) = self.mean_domain();
        if x.is_nan() || x < lo || x > hi {
            return Err(Error::Domain(format!(
                "{what} = {x} outside closed mean domain [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    /// Variance as a function of the mean, `V(mu) = b_ddot(b_dot^{-1}(mu))`.
    pub fn variance(&self, mu: f64) -> Result<f64> {
        self.validate_mean_interior(mu, "mu")?;
        Ok(match self {
            ExpFamily::Bernoulli => mu * (1.0 - mu),
            ExpFamily::GaussianKnownVariance { sigma2 } => *sigma2,
            ExpFamily::Poisson => mu,
            ExpFamily::Exponential => mu * mu,
        })
    }

    /// KL divergence in natural coordinates,
    /// `K(theta, lambda) = b_dot(theta)(theta - lambda) - b(theta) + b(lambda)`.
    pub fn kl_natural(&self, theta: f64, lambda: f64) -> Result<f64> {
        self.validate_theta(theta, "theta")?;
        self.validate_theta(lambda, "lambda")?;
        Ok((self.b_dot(theta) * (theta - lambda) - self.b(theta) + self.b(lambda)).max(0.0))
    }

    /// KL divergence between family members with means `mu` and `mu_prime`,
    /// via the family's closed form.
    ///
    /// The first argument may sit on the closed boundary of the mean domain
    /// (with the convention `0 ln 0 = 0`); the second must be interior. For
    /// the Exponential family the divergence from a zero mean is infinite.
    pub fn kl_mean(&self, mu: f64, mu_prime: f64) -> Result<f64> {
        self.validate_mean_closed(mu, "mu")?;
        self.validate_mean_interior(mu_prime, "mu_prime")?;
        Ok(self.kl_mean_unchecked(mu, mu_prime))
    }

    pub(crate) fn kl_mean_unchecked(&self, p: f64, q: f64) -> f64 {
        match self {
            ExpFamily::Bernoulli => {
                let mut d = 0.0;
                if p > 0.0 {
                    d += p * (p / q).ln();
                }
                if p < 1.0 {
                    d += (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln();
                }
                d.max(0.0)
            }
            ExpFamily::GaussianKnownVariance { sigma2 } => (p - q) * (p - q) / (2.0 * sigma2),
            ExpFamily::Poisson => {
                let base = q - p;
                if p > 0.0 {
                    (base + p * (p / q).ln()).max(0.0)
                } else {
                    base.max(0.0)
                }
            }
            ExpFamily::Exponential => {
                if p > 0.0 {
                    (p / q - 1.0 + (q / p).ln()).max(0.0)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Largest `q <= cap` with `d(x, q) <= level`, using the monotonicity of
    /// `q -> d(x, q)` above `x`.
    ///
    /// `cap` may be the upper end of the mean domain (`+inf` for unbounded
    /// families, in which case the upper bracket is grown geometrically until
    /// the divergence exceeds the level). Gaussian families use the closed
    /// form `x + sqrt(2 sigma2 level)`.
    pub fn d_level_set_sup(&self, x: f64, level: f64, cap: f64) -> Result<f64> {
        self.validate_mean_closed(x, "x")?;
        let (lo, hi) = self.mean_domain();
        let cap_ok = !cap.is_nan() && cap > lo && (cap == hi || cap < hi);
        if !cap_ok {
            return Err(Error::Domain(format!("cap = {cap} outside mean domain")));
        }
        if level.is_nan() || level < 0.0 {
            return Err(Error::Domain(format!("level = {level} must be >= 0")));
        }
        if x > cap {
            return Err(Error::Domain(format!("x = {x} exceeds cap = {cap}")));
        }
        if level == 0.0 || x == cap {
            return Ok(x.min(cap));
        }
        if let ExpFamily::GaussianKnownVariance { sigma2 } = self {
            return Ok((x + (2.0 * sigma2 * level).sqrt()).min(cap));
        }

        let d = |q: f64| self.kl_mean_unchecked(x, q);
        if let ExpFamily::Bernoulli = self {
            // Solve in w = -ln(1 - q), evaluating the divergence directly in
            // w. The slope in w is bounded by 1, so the residual stays at
            // tolerance even when the level set reaches far into the upper
            // boundary region.
            let h = |w: f64| {
                let ln_q = (-(-w).exp()).ln_1p();
                let mut v = 0.0;
                if x > 0.0 {
                    v += x * (x.ln() - ln_q);
                }
                if x < 1.0 {
                    v += (1.0 - x) * ((1.0 - x).ln() + w);
                }
                v.max(0.0)
            };
            let w_lo = -(1.0 - x).ln();
            let w_hi = 708.0;
            let w = invert_monotone_sup(h, w_lo, w_hi, level, LEVEL_SET_TOL, LEVEL_SET_MAX_ITER);
            let mut q = (1.0 - (-w).exp()).min(cap).max(x);
            // Mapping w back to the mean can land half an ulp past the level
            // set; step down to the last representable mean inside it.
            let mut guard = 0;
            while q > x && self.kl_mean_unchecked(x, q) > level && guard < 64 {
                q = f64::from_bits(q.to_bits() - 1);
                guard += 1;
            }
            return Ok(q);
        }
        // Geometric expansion of the bracket for unbounded domains.
        let mut upper = {
            let mut step = x.abs().max(1.0);
            let mut u = x + step;
            while u < cap && d(u) <= level {
                step *= 2.0;
                u = x + step;
            }
            u
        };
        if upper >= cap {
            if d(cap) <= level {
                return Ok(cap);
            }
            upper = cap;
        }
        let q = invert_monotone_sup(d, x, upper, level, LEVEL_SET_TOL, LEVEL_SET_MAX_ITER);
        Ok(q.min(cap))
    }

    /// Divergence with the first argument clamped into `[clamp_lo, clamp_hi]`.
    pub fn d_bar(&self, x: f64, y: f64, clamp_lo: f64, clamp_hi: f64) -> Result<f64> {
        self.validate_mean_interior(clamp_lo, "clamp_lo")?;
        self.validate_mean_interior(clamp_hi, "clamp_hi")?;
        if clamp_lo >= clamp_hi {
            return Err(Error::Domain(format!(
                "invalid clamp interval [{clamp_lo}, {clamp_hi}]"
            )));
        }
        self.validate_mean_interior(y, "y")?;
        Ok(self.kl_mean_unchecked(x.clamp(clamp_lo, clamp_hi), y))
    }

    /// Divergence extended linearly below the compact boundary `mu_lo`:
    /// `d(x, y)` for `x > mu_lo`, otherwise
    /// `d(mu_lo, y) + (theta(y) - theta(mu_lo)) (mu_lo - x)`.
    pub fn d_tilde(&self, x: f64, y: f64, mu_lo: f64) -> Result<f64> {
        self.validate_mean_interior(y, "y")?;
        self.validate_mean_interior(mu_lo, "mu_lo")?;
        if x > mu_lo {
            self.validate_mean_closed(x, "x")?;
            Ok(self.kl_mean_unchecked(x, y))
        } else {
            let slope = self.theta_of_mean(y) - self.theta_of_mean(mu_lo);
            Ok(self.kl_mean_unchecked(mu_lo, y) + slope * (mu_lo - x))
        }
    }

    /// Largest `q <= cap` with `d_tilde(x, q, mu_lo) <= level`.
    ///
    /// For fixed `x`, `q -> d_tilde(x, q, mu_lo)` is nondecreasing above
    /// `max(x, mu_lo)` and vanishes there, so the same bisection scheme as
    /// `d_level_set_sup` applies.
    pub fn d_tilde_level_set_sup(&self, x: f64, mu_lo: f64, level: f64, cap: f64) -> Result<f64> {
        self.validate_mean_interior(mu_lo, "mu_lo")?;
        if level.is_nan() || level < 0.0 {
            return Err(Error::Domain(format!("level = {level} must be >= 0")));
        }
        if x > mu_lo {
            return self.d_level_set_sup(x, level, cap);
        }
        let start = mu_lo;
        if level == 0.0 || start >= cap {
            return Ok(start.min(cap));
        }
        let g = |q: f64| self.d_tilde(x, q, mu_lo).unwrap_or(f64::INFINITY);
        let (_, hi) = self.mean_domain();
        let mut upper = if hi.is_finite() {
            hi
        } else {
            let mut step = start.abs().max(1.0);
            let mut u = start + step;
            while u < cap && g(u) <= level {
                step *= 2.0;
                u = start + step;
            }
            u
        };
        if upper >= cap {
            if g(cap) <= level {
                return Ok(cap);
            }
            upper = cap;
        }
        let q = invert_monotone_sup(g, start, upper, level, LEVEL_SET_TOL, LEVEL_SET_MAX_ITER);
        Ok(q.min(cap))
    }

    /// Whether `reward` belongs to the family's support.
    pub fn supports_reward(&self, reward: f64) -> bool {
        match self {
            ExpFamily::Bernoulli => reward == 0.0 || reward == 1.0,
            ExpFamily::GaussianKnownVariance { .. } => reward.is_finite(),
            ExpFamily::Poisson => reward >= 0.0 && reward.fract() == 0.0 && reward.is_finite(),
            ExpFamily::Exponential => reward > 0.0 && reward.is_finite(),
        }
    }

    /// One draw from the family member with mean `mu`.
    pub fn sample<R: Rng + ?Sized>(&self, mu: f64, rng: &mut R) -> Result<f64> {
        self.validate_mean_interior(mu, "mu")?;
        Ok(match self {
            ExpFamily::Bernoulli => {
                if rng.random_bool(mu) {
                    1.0
                } else {
                    0.0
                }
            }
            ExpFamily::GaussianKnownVariance { sigma2 } => {
                rand_distr::Normal::new(mu, sigma2.sqrt())
                    .map_err(|e| Error::Numeric(e.to_string()))?
                    .sample(rng)
            }
            ExpFamily::Poisson => rand_distr::Poisson::new(mu)
                .map_err(|e| Error::Numeric(e.to_string()))?
                .sample(rng),
            ExpFamily::Exponential => rand_distr::Exp::new(1.0 / mu)
                .map_err(|e| Error::Numeric(e.to_string()))?
                .sample(rng),
        })
    }
}

/// A single arm: a family member identified by its mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmDistribution {
    pub model: ExpFamily,
    pub mean: f64,
}

impl ArmDistribution {
    pub fn new(model: ExpFamily, mean: f64) -> Result<Self> {
        model.validate_mean_interior(mean, "arm mean")?;
        Ok(ArmDistribution { model, mean })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // Mean validated at construction, so sampling cannot fail.
        self.model.sample(self.mean, rng).expect("valid arm")
    }
}

/// An ordered set of arms sharing one exponential family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditInstance {
    pub model: ExpFamily,
    pub means: Vec<f64>,
    pub mu_star: f64,
    pub optimal_set: Vec<usize>,
}

impl BanditInstance {
    pub fn new(model: ExpFamily, means: Vec<f64>) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::Config("a bandit instance needs at least one arm".into()));
        }
        for (i, &m) in means.iter().enumerate() {
            model.validate_mean_interior(m, &format!("mean of arm {i}"))?;
        }
        let mu_star = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let optimal_set = means
            .iter()
            .enumerate()
            .filter(|(_, &m)| m == mu_star)
            .map(|(i, _)| i)
            .collect();
        Ok(BanditInstance {
            model,
            means,
            mu_star,
            optimal_set,
        })
    }

    pub fn n_arms(&self) -> usize {
        self.means.len()
    }

    pub fn arm(&self, a: usize) -> ArmDistribution {
        ArmDistribution {
            model: self.model,
            mean: self.means[a],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const GAUSS1: ExpFamily = ExpFamily::GaussianKnownVariance { sigma2: 1.0 };

    #[test]
    fn kl_mean_identity_and_oracles() {
        let b = ExpFamily::Bernoulli;
        assert_eq!(b.kl_mean(0.3, 0.3).unwrap(), 0.0);
        // p ln(p/q) + (1-p) ln((1-p)/(1-q)) at (0.05, 0.15)
        assert_abs_diff_eq!(
            b.kl_mean(0.05, 0.15).unwrap(),
            0.050733738921307676,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(GAUSS1.kl_mean(0.0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        // Poisson d(p,q) = q - p + p ln(p/q)
        assert_abs_diff_eq!(
            ExpFamily::Poisson.kl_mean(5.0, 4.0).unwrap(),
            0.11571775657104878,
            epsilon = 1e-12
        );
        // Exponential d(p,q) = p/q - 1 + ln(q/p)
        assert_abs_diff_eq!(
            ExpFamily::Exponential.kl_mean(1.0, 3.0).unwrap(),
            3.0f64.ln() - 2.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn kl_mean_boundary_conventions() {
        let b = ExpFamily::Bernoulli;
        assert_abs_diff_eq!(
            b.kl_mean(0.0, 0.5).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(b.kl_mean(1.0, 0.5).unwrap(), std::f64::consts::LN_2, epsilon = 1e-12);
        assert_abs_diff_eq!(ExpFamily::Poisson.kl_mean(0.0, 2.0).unwrap(), 2.0, epsilon = 1e-12);
        assert!(ExpFamily::Exponential.kl_mean(0.0, 2.0).unwrap().is_infinite());
        assert!(b.kl_mean(-0.1, 0.5).is_err());
        assert!(b.kl_mean(0.5, 1.0).is_err());
    }

    #[test]
    fn kl_natural_oracles() {
        let b = ExpFamily::Bernoulli;
        assert_eq!(b.kl_natural(0.7, 0.7).unwrap(), 0.0);
        // theta = 0 (mu = 0.5), lambda = ln 9 (mu = 0.9)
        assert_abs_diff_eq!(
            b.kl_natural(0.0, 9.0f64.ln()).unwrap(),
            0.5108256237659907,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(GAUSS1.kl_natural(0.0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert!(ExpFamily::Exponential.kl_natural(-1.0, 0.5).is_err());
    }

    #[test]
    fn variance_oracles() {
        assert_abs_diff_eq!(ExpFamily::Bernoulli.variance(0.5).unwrap(), 0.25, epsilon = 1e-15);
        let g2 = ExpFamily::GaussianKnownVariance { sigma2: 2.0 };
        assert_eq!(g2.variance(-3.7).unwrap(), 2.0);
        assert_eq!(ExpFamily::Exponential.variance(3.0).unwrap(), 9.0);
        assert!(ExpFamily::Bernoulli.variance(0.0).is_err());
        assert!(ExpFamily::Bernoulli.variance(1.0).is_err());
    }

    #[test]
    fn natural_mean_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for model in [
            ExpFamily::Bernoulli,
            GAUSS1,
            ExpFamily::Poisson,
            ExpFamily::Exponential,
        ] {
            for _ in 0..10_000 {
                let mu = match model {
                    ExpFamily::Bernoulli => rng.random_range(1e-6..1.0 - 1e-6),
                    ExpFamily::GaussianKnownVariance { .. } => rng.random_range(-50.0..50.0),
                    _ => rng.random_range(1e-6..1e3),
                };
                let back = model.b_dot(model.theta_of_mean(mu));
                assert!(
                    (back - mu).abs() <= 1e-10 * mu.abs().max(1.0),
                    "{model:?}: roundtrip {mu} -> {back}"
                );
            }
        }
    }

    #[test]
    fn closed_form_matches_natural_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for model in [
            ExpFamily::Bernoulli,
            GAUSS1,
            ExpFamily::Poisson,
            ExpFamily::Exponential,
        ] {
            for _ in 0..2_000 {
                let (lo, hi) = match model {
                    ExpFamily::Bernoulli => (1e-4, 1.0 - 1e-4),
                    ExpFamily::GaussianKnownVariance { .. } => (-20.0, 20.0),
                    _ => (1e-3, 100.0),
                };
                let mu = rng.random_range(lo..hi);
                let mu2 = rng.random_range(lo..hi);
                let via_mean = model.kl_mean(mu, mu2).unwrap();
                let via_nat = model
                    .kl_natural(model.theta_of_mean(mu), model.theta_of_mean(mu2))
                    .unwrap();
                assert!(
                    (via_mean - via_nat).abs() <= 1e-9 * via_mean.abs().max(1e-9),
                    "{model:?}: d({mu},{mu2}) = {via_mean} vs K = {via_nat}"
                );
            }
        }
    }

    #[test]
    fn divergence_monotone_in_second_arg() {
        for model in [ExpFamily::Bernoulli, ExpFamily::Poisson, ExpFamily::Exponential] {
            let x = 0.4;
            let mut prev = 0.0;
            for k in 1..200 {
                let q = x + k as f64 * 0.002;
                let d = model.kl_mean(x, q).unwrap();
                assert!(d > prev, "{model:?} not increasing at q = {q}");
                prev = d;
            }
        }
    }

    #[test]
    fn level_set_examples() {
        let b = ExpFamily::Bernoulli;
        assert_eq!(b.d_level_set_sup(0.5, 0.0, 1.0).unwrap(), 0.5);
        // d(0, q) = -ln(1-q), so q = 1 - exp(-level)
        let level = 0.6931;
        let q = b.d_level_set_sup(0.0, level, 1.0).unwrap();
        assert_abs_diff_eq!(q, 1.0 - (-level).exp(), epsilon = 1e-9);
        assert_abs_diff_eq!(
            GAUSS1.d_level_set_sup(0.0, 0.5, f64::INFINITY).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn level_set_inversion_residual() {
        // Levels are drawn via a target point q*; for Bernoulli the target
        // stays below 1 - 1e-7, past which no representable mean can hold
        // the residual (ulp spacing times the divergence slope exceeds it).
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for model in [ExpFamily::Bernoulli, ExpFamily::Poisson, ExpFamily::Exponential] {
            let (_, hi) = model.mean_domain();
            for _ in 0..500 {
                let (x, q_target) = match model {
                    ExpFamily::Bernoulli => {
                        let x = rng.random_range(0.01..0.99);
                        (x, rng.random_range(x + 1e-4..1.0 - 1e-7))
                    }
                    _ => {
                        let x = rng.random_range(0.1..10.0);
                        (x, x + rng.random_range(0.01..30.0))
                    }
                };
                let level = model.kl_mean_unchecked(x, q_target);
                let q = model.d_level_set_sup(x, level, hi).unwrap();
                if q < hi {
                    let resid = (model.kl_mean_unchecked(x, q) - level).abs();
                    assert!(resid <= 1e-9, "{model:?}: residual {resid} at x={x} level={level}");
                }
            }
        }
    }

    #[test]
    fn level_set_respects_cap() {
        let b = ExpFamily::Bernoulli;
        let q = b.d_level_set_sup(0.5, 5.0, 0.8).unwrap();
        assert_eq!(q, 0.8);
        let p = ExpFamily::Poisson.d_level_set_sup(10.0, 100.0, 12.0).unwrap();
        assert_eq!(p, 12.0);
    }

    #[test]
    fn d_bar_examples() {
        let b = ExpFamily::Bernoulli;
        assert_abs_diff_eq!(
            b.d_bar(0.3, 0.5, 0.1, 0.9).unwrap(),
            b.kl_mean(0.3, 0.5).unwrap(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            b.d_bar(0.0, 0.5, 0.1, 0.9).unwrap(),
            b.kl_mean(0.1, 0.5).unwrap(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            ExpFamily::Poisson.d_bar(10.0, 4.0, 0.5, 5.0).unwrap(),
            ExpFamily::Poisson.kl_mean(5.0, 4.0).unwrap(),
            epsilon = 1e-15
        );
        assert!(b.d_bar(0.3, 0.5, 0.9, 0.1).is_err());
    }

    #[test]
    fn d_tilde_examples() {
        let b = ExpFamily::Bernoulli;
        assert_abs_diff_eq!(
            b.d_tilde(0.5, 0.7, 0.1).unwrap(),
            b.kl_mean(0.5, 0.7).unwrap(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            b.d_tilde(0.1, 0.5, 0.1).unwrap(),
            b.kl_mean(0.1, 0.5).unwrap(),
            epsilon = 1e-15
        );
        // d(0.1, 0.5) + (theta(0.5) - theta(0.1)) * (0.1 - 0.05)
        let expected = b.kl_mean(0.1, 0.5).unwrap() + 9.0f64.ln() * 0.05;
        assert_abs_diff_eq!(b.d_tilde(0.05, 0.5, 0.1).unwrap(), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 0.477925436035308, epsilon = 1e-12);
    }

    #[test]
    fn d_tilde_continuous_at_boundary() {
        let b = ExpFamily::Bernoulli;
        let at = b.kl_mean(0.1, 0.5).unwrap();
        for k in 1..=6 {
            let eps = 10f64.powi(-k);
            let below = b.d_tilde(0.1 - eps, 0.5, 0.1).unwrap();
            assert!((below - at).abs() <= 3.0 * eps, "eps={eps}: gap {}", below - at);
        }
    }

    #[test]
    fn sampling_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 1_000_000;

        let arm = ArmDistribution::new(ExpFamily::Exponential, 2.0).unwrap();
        let mean = (0..n).map(|_| arm.sample(&mut rng)).sum::<f64>() / n as f64;
        assert_abs_diff_eq!(mean, 2.0, epsilon = 0.01);

        let arm = ArmDistribution::new(GAUSS1, 0.0).unwrap();
        let var = (0..n).map(|_| arm.sample(&mut rng).powi(2)).sum::<f64>() / n as f64;
        assert_abs_diff_eq!(var, 1.0, epsilon = 0.01);

        let arm = ArmDistribution::new(ExpFamily::Bernoulli, 1.0 - 1e-12).unwrap();
        let ones = (0..n).filter(|_| arm.sample(&mut rng) == 1.0).count();
        assert!(ones as f64 / n as f64 >= 1.0 - 1e-9);
    }

    #[test]
    fn instance_tracks_optimum() {
        let inst = BanditInstance::new(ExpFamily::Bernoulli, vec![0.2, 0.8, 0.8]).unwrap();
        assert_eq!(inst.mu_star, 0.8);
        assert_eq!(inst.optimal_set, vec![1, 2]);
        assert!(BanditInstance::new(ExpFamily::Bernoulli, vec![]).is_err());
        assert!(BanditInstance::new(ExpFamily::Bernoulli, vec![0.0]).is_err());
    }
}
