//! Asymptotic lower bounds and Monte Carlo validators for the deviation and
//! posterior-tail inequalities.
//!
//! Validators are deterministic given a seed: independent sample paths draw
//! from per-path ChaCha substreams, so results are identical under any
//! parallel schedule. Each check emits a [`BoundReport`] comparing the
//! analytic bound with the empirical estimate plus three standard errors.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::exp_family::{BanditInstance, ExpFamily};
use crate::numeric::{adaptive_simpson, invert_monotone_sup, linear_fit};
use crate::posterior::{Posterior, Prior};
use crate::rng::substream_rng;

/// Lai-Robbins regret floor: `constant * log T` with
/// `constant = sum over suboptimal arms of (mu* - mu_a) / d(mu_a, mu*)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundCurve {
    pub constant: f64,
}

impl LowerBoundCurve {
    pub fn evaluate(&self, t: f64) -> f64 {
        if t <= 1.0 {
            0.0
        } else {
            self.constant * t.ln()
        }
    }
}

pub fn lai_robbins_curve(instance: &BanditInstance) -> Result<LowerBoundCurve> {
    let mut constant = 0.0;
    for &mu in &instance.means {
        if mu < instance.mu_star {
            constant += (instance.mu_star - mu) / instance.model.kl_mean(mu, instance.mu_star)?;
        }
    }
    Ok(LowerBoundCurve { constant })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BayesRiskMethod {
    ClosedFormBernoulliUniform,
    NumericHomogeneous,
    NumericGeneralProduct,
}

/// The constant in front of `log^2 T` in the Bayes-risk lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesRiskConstant {
    pub value: f64,
    pub method: BayesRiskMethod,
}

/// Closed form for K Bernoulli arms under uniform priors:
/// `(K - 1) / (2 (K + 1))`.
pub fn bernoulli_uniform_constant(k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::Domain("the lower bound needs at least two arms".into()));
    }
    Ok(0.5 * (k as f64 - 1.0) / (k as f64 + 1.0))
}

/// Inverts a CDF on the natural-parameter line by bracket expansion and
/// bisection.
fn quantile_of_cdf(cdf: &dyn Fn(f64) -> f64, p: f64) -> f64 {
    let mut lo = -1.0;
    let mut hi = 1.0;
    while cdf(lo) > p && lo > -1e12 {
        lo *= 2.0;
    }
    while cdf(hi) < p && hi < 1e12 {
        hi *= 2.0;
    }
    invert_monotone_sup(|t| cdf(t), lo, hi, p, 1e-13, 200)
}

/// Homogeneous-prior Bayes-risk constant
/// `(K (K - 1) / 2) * integral of q^2(theta) Q^{K-2}(theta) dtheta`,
/// where every arm shares the density `q` (CDF `Q`) on its natural parameter.
///
/// The integral is mapped to `(0, 1)` by the substitution `p = Q(theta)`,
/// giving `integral of q(Q^{-1}(p)) p^{K-2} dp`, and evaluated by adaptive
/// Simpson quadrature.
pub fn bayes_risk_constant_homogeneous(
    density: &dyn Fn(f64) -> f64,
    cdf: &dyn Fn(f64) -> f64,
    k: usize,
) -> Result<BayesRiskConstant> {
    if k < 2 {
        return Err(Error::Domain("the lower bound needs at least two arms".into()));
    }
    // Spot-check that the CDF differentiates to the density.
    for p in [0.2, 0.5, 0.8] {
        let theta = quantile_of_cdf(cdf, p);
        let h = 1e-5 * (1.0 + theta.abs());
        let fd = (cdf(theta + h) - cdf(theta - h)) / (2.0 * h);
        let q = density(theta);
        if (fd - q).abs() > 1e-3 * q.abs().max(1e-3) {
            return Err(Error::Config(format!(
                "cdf derivative {fd} disagrees with density {q} at theta = {theta}"
            )));
        }
    }

    let integrand = |p: f64| {
        if p <= 0.0 || p >= 1.0 {
            return 0.0;
        }
        let theta = quantile_of_cdf(cdf, p);
        density(theta) * p.powi(k as i32 - 2)
    };
    let eps = 1e-9;
    let integral = adaptive_simpson(&integrand, eps, 1.0 - eps, 1e-10);
    if !integral.is_finite() {
        return Err(Error::Numeric("bayes-risk integrand did not integrate".into()));
    }
    let kk = k as f64;
    Ok(BayesRiskConstant {
        value: 0.5 * kk * (kk - 1.0) * integral,
        method: BayesRiskMethod::NumericHomogeneous,
    })
}

/// A prior on one arm's natural parameter, given by density and CDF.
pub struct ThetaPrior<'a> {
    pub density: &'a dyn Fn(f64) -> f64,
    pub cdf: &'a dyn Fn(f64) -> f64,
}

/// General product-prior Bayes-risk constant
/// `(1/2) sum_a integral of h_a(theta) f_max,-a(theta) dtheta`, where
/// `f_max,-a` is the density of the maximum of the other arms' parameters.
pub fn bayes_risk_constant_product(priors: &[ThetaPrior<'_>]) -> Result<BayesRiskConstant> {
    let k = priors.len();
    if k < 2 {
        return Err(Error::Domain("the lower bound needs at least two arms".into()));
    }
    // Common integration window covering every marginal's bulk.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in priors {
        lo = lo.min(quantile_of_cdf(p.cdf, 1e-10));
        hi = hi.max(quantile_of_cdf(p.cdf, 1.0 - 1e-10));
    }
    let mut total = 0.0;
    for a in 0..k {
        let integrand = |theta: f64| {
            let mut max_density = 0.0;
            for i in 0..k {
                if i == a {
                    continue;
                }
                let mut term = (priors[i].density)(theta);
                for j in 0..k {
                    if j != a && j != i {
                        term *= (priors[j].cdf)(theta);
                    }
                }
                max_density += term;
            }
            (priors[a].density)(theta) * max_density
        };
        total += adaptive_simpson(&integrand, lo, hi, 1e-10);
    }
    if !total.is_finite() {
        return Err(Error::Numeric("bayes-risk integrand did not integrate".into()));
    }
    Ok(BayesRiskConstant {
        value: 0.5 * total,
        method: BayesRiskMethod::NumericGeneralProduct,
    })
}

/// One validated inequality: analytic bound vs Monte Carlo estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: String,
    pub params: serde_json::Value,
    pub analytic: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub pass: bool,
}

fn probability_report(
    name: &str,
    params: serde_json::Value,
    analytic: f64,
    hits: usize,
    n: usize,
) -> BoundReport {
    let empirical = hits as f64 / n as f64;
    let std_error = (empirical * (1.0 - empirical) / n as f64).sqrt();
    BoundReport {
        bound: name.into(),
        params,
        analytic,
        empirical,
        std_error,
        pass: empirical <= analytic + 3.0 * std_error,
    }
}

/// Chernoff upper deviation: `P(empirical mean of s draws > x) <= exp(-s d(x, mu))`
/// for `x > mu`.
pub fn chernoff_check(
    model: ExpFamily,
    mu: f64,
    x: f64,
    s: u64,
    n_runs: usize,
    seed: u64,
) -> Result<BoundReport> {
    model.validate_mean_interior(mu, "mu")?;
    model.validate_mean_interior(x, "x")?;
    if x <= mu {
        return Err(Error::Domain("chernoff check needs x > mu".into()));
    }
    let bound = (-(s as f64) * model.kl_mean(x, mu)?).exp();
    let hits = (0..n_runs)
        .into_par_iter()
        .map(|path| {
            let mut rng = substream_rng(seed, path as u64);
            let mut sum = 0.0;
            for _ in 0..s {
                sum += model.sample(mu, &mut rng).expect("valid mean");
            }
            usize::from(sum / s as f64 > x)
        })
        .sum();
    Ok(probability_report(
        "chernoff",
        json!({"family": model, "mu": mu, "x": x, "s": s, "runs": n_runs}),
        bound,
        hits,
        n_runs,
    ))
}

/// Analytic self-normalized deviation bound
/// `(delta log t + 1) exp(-delta + 1)` on
/// `P(exists s <= t : s d+(mean_s, mu) >= delta)`.
pub fn self_normalized_bound(delta: f64, t: u64) -> f64 {
    (delta * (t as f64).ln() + 1.0) * (-delta + 1.0).exp()
}

/// Monte Carlo companion of [`self_normalized_bound`] (downward deviations
/// of the running mean, measured by `d`).
pub fn self_normalized_check(
    model: ExpFamily,
    mu: f64,
    delta: f64,
    t: u64,
    n_paths: usize,
    seed: u64,
) -> Result<BoundReport> {
    model.validate_mean_interior(mu, "mu")?;
    if delta <= 0.0 {
        return Err(Error::Domain("delta must be positive".into()));
    }
    let bound = self_normalized_bound(delta, t);
    let hits = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = substream_rng(seed, path as u64);
            let mut sum = 0.0;
            for s in 1..=t {
                sum += model.sample(mu, &mut rng).expect("valid mean");
                let mean = sum / s as f64;
                if mean < mu && s as f64 * model.kl_mean_unchecked(mean, mu) >= delta {
                    return 1usize;
                }
            }
            0
        })
        .sum();
    Ok(probability_report(
        "self-normalized",
        json!({"family": model, "mu": mu, "delta": delta, "t": t, "paths": n_paths}),
        bound,
        hits,
        n_paths,
    ))
}

/// Maximal inequality:
/// `P(max_{n <= N} sum_{i <= n} (mu - Y_i) >= x) <= exp(-N d(mu - x/N, mu))`.
pub fn maximal_inequality_check(
    model: ExpFamily,
    mu: f64,
    x: f64,
    n_steps: u64,
    n_paths: usize,
    seed: u64,
) -> Result<BoundReport> {
    model.validate_mean_interior(mu, "mu")?;
    if x < 0.0 {
        return Err(Error::Domain("threshold x must be nonnegative".into()));
    }
    let shifted = mu - x / n_steps as f64;
    model.validate_mean_closed(shifted, "mu - x/N")?;
    let bound = (-(n_steps as f64) * model.kl_mean_unchecked(shifted, mu)).exp();
    let hits = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = substream_rng(seed, path as u64);
            let mut walk = 0.0;
            for _ in 0..n_steps {
                walk += mu - model.sample(mu, &mut rng).expect("valid mean");
                if walk >= x {
                    return 1usize;
                }
            }
            0
        })
        .sum();
    Ok(probability_report(
        "maximal-inequality",
        json!({"family": model, "mu": mu, "x": x, "n": n_steps, "paths": n_paths}),
        bound,
        hits,
        n_paths,
    ))
}

/// Quadratic (Pinsker-like) envelope report for a compact natural-parameter
/// interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinskerReport {
    pub c1: f64,
    pub c2: f64,
    pub n_pairs: usize,
    pub violations: usize,
}

/// Checks the three quadratic divergence envelopes on a compact
/// `[theta_lo, theta_hi]`:
/// `c1/2 (t - t')^2 <= K(t, t') <= c2/2 (t - t')^2`, the mean-space analog
/// with `1/(2 c2)` and `1/(2 c1)`, and the inverse-map Lipschitz bound
/// `theta(v) - theta(x) <= (v - x)/c1`.
///
/// `c1`/`c2` are the extrema of `b_ddot` over a dense inclusive grid
/// (10001 points).
pub fn pinsker_check(
    model: ExpFamily,
    theta_lo: f64,
    theta_hi: f64,
    n_samples: usize,
    seed: u64,
) -> Result<PinskerReport> {
    model.validate_theta_pair(theta_lo, theta_hi)?;
    let grid_points = 10_001;
    let mut c1 = f64::INFINITY;
    let mut c2 = f64::NEG_INFINITY;
    for i in 0..grid_points {
        let theta = theta_lo + (theta_hi - theta_lo) * i as f64 / (grid_points - 1) as f64;
        let v = model.b_ddot(theta);
        c1 = c1.min(v);
        c2 = c2.max(v);
    }

    let tol = 1e-9;
    let violations = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream_rng(seed, i as u64);
            let t1: f64 = rng.random_range(theta_lo..=theta_hi);
            let t2: f64 = rng.random_range(theta_lo..=theta_hi);
            let dt2 = (t1 - t2) * (t1 - t2);
            let kl = model.kl_natural(t1, t2).expect("in domain");
            let mut bad = 0usize;
            let slack = tol * (1.0 + dt2);
            if kl < 0.5 * c1 * dt2 - slack || kl > 0.5 * c2 * dt2 + slack {
                bad += 1;
            }
            let x = model.b_dot(t1);
            let v = model.b_dot(t2);
            let dm2 = (x - v) * (x - v);
            let d = model.kl_mean_unchecked(x, v);
            let slack = tol * (1.0 + dm2);
            if d < dm2 / (2.0 * c2) - slack || d > dm2 / (2.0 * c1) + slack {
                bad += 1;
            }
            let (x, v) = if x < v { (x, v) } else { (v, x) };
            let gap = model.theta_of_mean(v) - model.theta_of_mean(x);
            if gap > (v - x) / c1 + tol * (1.0 + gap.abs()) {
                bad += 1;
            }
            bad
        })
        .sum();

    Ok(PinskerReport {
        c1,
        c2,
        n_pairs: n_samples,
        violations,
    })
}

/// Result of checking the posterior tail envelope for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EnvelopeReport {
    /// `x < v`: `-log` tail minus `n d(x, v)` must stay inside
    /// `[-0.5 log n - b_b, log n + b_a]`, with the constants fitted at
    /// `n = 1`. `slope` is the least-squares rate of `-log` tail against `n`
    /// over the `n >= 100` portion of the range.
    TwoSided {
        d: f64,
        b_a: f64,
        b_b: f64,
        envelope_ok: bool,
        slope: f64,
        slope_rel_err: f64,
    },
    /// `v <= x`: the tail must stay above `C / sqrt(n)` with `C` fitted at
    /// `n = 1`.
    SqrtFloor { c: f64, floor_ok: bool },
}

impl EnvelopeReport {
    pub fn pass(&self) -> bool {
        match self {
            EnvelopeReport::TwoSided { envelope_ok, .. } => *envelope_ok,
            EnvelopeReport::SqrtFloor { floor_ok, .. } => *floor_ok,
        }
    }
}

/// Checks the deterministic posterior-tail envelope over `n_range` (all
/// entries >= 1) for the posterior built from `(prior, n, x)`.
pub fn posterior_tail_envelope(
    model: ExpFamily,
    prior: &Prior,
    x: f64,
    v: f64,
    n_range: &[u64],
) -> Result<EnvelopeReport> {
    model.validate_mean_closed(x, "x")?;
    model.validate_mean_interior(v, "v")?;
    if n_range.is_empty() || n_range.contains(&0) {
        return Err(Error::Domain("n_range must be nonempty with n >= 1".into()));
    }
    let tail_at = |n: u64| -> Result<f64> {
        Posterior::with_stats(model, prior.clone(), n, x)?.tail(v)
    };
    let tol = 1e-9;

    if x < v {
        let d = model.kl_mean(x, v)?;
        let r1 = -tail_at(1)?.ln() - d;
        let b_a = r1.max(0.0);
        let b_b = (-r1).max(0.0);
        let mut envelope_ok = true;
        let mut ns = Vec::new();
        let mut ls = Vec::new();
        for &n in n_range {
            let l = -tail_at(n)?.ln();
            let r = l - n as f64 * d;
            let logn = (n as f64).ln();
            if r > logn + b_a + tol || r < -0.5 * logn - b_b - tol {
                envelope_ok = false;
            }
            if n >= 100 {
                ns.push(n as f64);
                ls.push(l);
            }
        }
        let (slope, slope_rel_err) = if ns.len() >= 2 {
            let (slope, _, _) = linear_fit(&ns, &ls)?;
            (slope, (slope - d).abs() / d)
        } else {
            (f64::NAN, f64::NAN)
        };
        Ok(EnvelopeReport::TwoSided {
            d,
            b_a,
            b_b,
            envelope_ok,
            slope,
            slope_rel_err,
        })
    } else {
        let c = tail_at(1)?;
        let mut floor_ok = true;
        for &n in n_range {
            if tail_at(n)? * (n as f64).sqrt() < c * (1.0 - tol) {
                floor_ok = false;
            }
        }
        Ok(EnvelopeReport::SqrtFloor { c, floor_ok })
    }
}

impl ExpFamily {
    fn validate_theta_pair(&self, lo: f64, hi: f64) -> Result<()> {
        let (dlo, dhi) = self.theta_domain();
        if !(lo < hi) || lo <= dlo || hi >= dhi || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Domain(format!(
                "compact [{lo}, {hi}] must sit strictly inside the natural domain ({dlo}, {dhi})"
            )));
        }
        Ok(())
    }
}

/// The Bernoulli-uniform prior expressed on the natural parameter line:
/// density `e^theta / (1 + e^theta)^2`, CDF `e^theta / (1 + e^theta)`.
pub fn bernoulli_uniform_theta_density(theta: f64) -> f64 {
    let s = 1.0 / (1.0 + (-theta).exp());
    s * (1.0 - s)
}

pub fn bernoulli_uniform_theta_cdf(theta: f64) -> f64 {
    1.0 / (1.0 + (-theta).exp())
}

const GAUSS1: ExpFamily = ExpFamily::GaussianKnownVariance { sigma2: 1.0 };

/// Chernoff deviation checks over a grid of `(family, mu, x, s)`.
pub fn chernoff_suite(n_runs: usize, seed: u64) -> Result<Vec<BoundReport>> {
    let mut grid: Vec<(ExpFamily, f64, f64)> = Vec::new();
    for mu in [0.3, 0.6] {
        for dx in [0.1, 0.25] {
            grid.push((ExpFamily::Bernoulli, mu, mu + dx));
        }
    }
    for x in [0.5, 1.0] {
        grid.push((GAUSS1, 0.0, x));
    }
    for mu in [1.0, 3.0] {
        for dx in [0.5, 1.0] {
            grid.push((ExpFamily::Poisson, mu, mu + dx));
        }
    }
    for mu in [1.0, 2.0] {
        for f in [1.5, 2.0] {
            grid.push((ExpFamily::Exponential, mu, mu * f));
        }
    }
    let mut reports = Vec::new();
    for (i, (model, mu, x)) in grid.iter().enumerate() {
        for (j, s) in [1u64, 5, 25].into_iter().enumerate() {
            reports.push(chernoff_check(
                *model,
                *mu,
                *x,
                s,
                n_runs,
                seed ^ ((i * 3 + j) as u64) << 32,
            )?);
        }
    }
    Ok(reports)
}

/// Self-normalized deviation checks at parameters where the bound is
/// informative (below one).
pub fn self_normalized_suite(n_paths: usize, seed: u64) -> Result<Vec<BoundReport>> {
    let mut reports = Vec::new();
    for (i, (model, mu)) in [(ExpFamily::Bernoulli, 0.5), (GAUSS1, 0.0)].into_iter().enumerate() {
        for (j, (delta, t)) in [(5.0, 100u64), (8.0, 100), (6.0, 50)].into_iter().enumerate() {
            reports.push(self_normalized_check(
                model,
                mu,
                delta,
                t,
                n_paths,
                seed ^ ((i * 3 + j) as u64) << 33,
            )?);
        }
    }
    Ok(reports)
}

/// Maximal-inequality checks, one informative configuration per family.
pub fn maximal_suite(n_paths: usize, seed: u64) -> Result<Vec<BoundReport>> {
    let configs = [
        (ExpFamily::Bernoulli, 0.5, 20.0, 100u64),
        (GAUSS1, 0.0, 15.0, 50),
        (ExpFamily::Poisson, 2.0, 40.0, 100),
        (ExpFamily::Exponential, 2.0, 50.0, 100),
    ];
    configs
        .iter()
        .enumerate()
        .map(|(i, (model, mu, x, n))| {
            maximal_inequality_check(*model, *mu, *x, *n, n_paths, seed ^ (i as u64) << 34)
        })
        .collect()
}

/// Pinsker-like quadratic envelope checks on one compact per family.
pub fn pinsker_suite(n_pairs: usize, seed: u64) -> Result<Vec<(String, PinskerReport)>> {
    let configs = [
        (ExpFamily::Bernoulli, -2.0, 2.0),
        (GAUSS1, -3.0, 3.0),
        (ExpFamily::Poisson, 0.0, 1.0),
        (ExpFamily::Exponential, -2.0, -0.5),
    ];
    configs
        .iter()
        .enumerate()
        .map(|(i, (model, lo, hi))| {
            let report = pinsker_check(*model, *lo, *hi, n_pairs, seed ^ (i as u64) << 35)?;
            Ok((format!("{model:?}"), report))
        })
        .collect()
}

/// Posterior-tail envelope checks: Bernoulli-uniform and Gaussian-flat
/// configurations for both Lemma statements, n = 1..=1000.
pub fn envelope_suite() -> Result<Vec<(String, EnvelopeReport)>> {
    let ns: Vec<u64> = (1..=1000).collect();
    let uniform = Prior::Beta { alpha: 1.0, beta: 1.0 };
    let flat = Prior::Gaussian { mean: 0.0, variance: None };
    Ok(vec![
        (
            "bernoulli-uniform x=0.3 v=0.5".into(),
            posterior_tail_envelope(ExpFamily::Bernoulli, &uniform, 0.3, 0.5, &ns)?,
        ),
        (
            "gaussian-flat x=0 v=0.5".into(),
            posterior_tail_envelope(GAUSS1, &flat, 0.0, 0.5, &ns)?,
        ),
        (
            "bernoulli-uniform x=0.6 v=0.5".into(),
            posterior_tail_envelope(ExpFamily::Bernoulli, &uniform, 0.6, 0.5, &ns)?,
        ),
        (
            "gaussian-flat x=0.5 v=0.3".into(),
            posterior_tail_envelope(GAUSS1, &flat, 0.5, 0.3, &ns)?,
        ),
    ])
}
