//! Finite-horizon Gittins indices for Beta posteriors and the exact
//! Bayes-optimal policy for two-armed Bernoulli bandits.
//!
//! The Gittins index of a posterior `pi` with `r` rounds left is the smallest
//! price `lambda` at which the calibration game — pay `lambda` per pull,
//! stop whenever you like within `r` pulls — has zero optimal value. The
//! value recursion runs over the triangular grid of Beta states reachable by
//! integer success/failure increments; the index is found by bisection on
//! `lambda` over `[posterior mean, 1]`, a valid bracket because one pull is
//! profitable below the mean and worthless at 1.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Horizons above this are rejected: table size grows like `T^3 / 6`.
pub const MAX_TABLE_HORIZON: u32 = 2000;
/// Ceiling for the exact two-armed dynamic program (state space `~T^4 / 24`).
pub const MAX_DP_HORIZON: u32 = 100;

const LAMBDA_TOL: f64 = 1e-7;

/// A Beta posterior over a Bernoulli mean. Hyperparameters need not be
/// integers; play advances them by integer offsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaState {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaState {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite() {
            Ok(BetaState { alpha, beta })
        } else {
            Err(Error::Config(format!(
                "beta state needs positive parameters, got ({alpha}, {beta})"
            )))
        }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn offset(&self, successes: u32, failures: u32) -> BetaState {
        BetaState {
            alpha: self.alpha + successes as f64,
            beta: self.beta + failures as f64,
        }
    }
}

/// Optimal value of the calibration game: play the arm at price `lambda`,
/// stopping any time within `r` pulls.
///
/// Backward induction on `V(pi, 0) = 0`,
/// `V(pi, k) = max(0, p (1 - lambda + V(pi+, k-1)) + (1-p)(-lambda + V(pi-, k-1)))`
/// where `p` is the posterior mean and `pi+`/`pi-` the success/failure
/// updates.
pub fn calibration_value(state: BetaState, r: u32, lambda: f64) -> f64 {
    if r == 0 {
        return 0.0;
    }
    let r = r as usize;
    // prev[s] = V(state + (s, depth - s), k - 1) for states at depth = r - k + 1
    let mut prev = vec![0.0f64; r + 1];
    let mut cur = vec![0.0f64; r + 1];
    for k in 1..=r {
        let depth = r - k;
        for s in 0..=depth {
            let f = depth - s;
            let a = state.alpha + s as f64;
            let b = state.beta + f as f64;
            let p = a / (a + b);
            let cont = p * (1.0 - lambda + prev[s + 1]) + (1.0 - p) * (-lambda + prev[s]);
            cur[s] = cont.max(0.0);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[0]
}

/// Finite-horizon Gittins index `G(pi, r) = inf { lambda : V(pi, r, lambda) = 0 }`.
///
/// `r = 1` reduces to the posterior mean exactly; larger `r` is resolved by
/// bisection until the lambda bracket is narrower than 1e-7.
pub fn fh_gittins_index(state: BetaState, r: u32) -> Result<f64> {
    if r < 1 {
        return Err(Error::Domain("gittins index needs r >= 1".into()));
    }
    if r == 1 {
        return Ok(state.mean());
    }
    let mut lo = state.mean();
    let mut hi = 1.0;
    while hi - lo > LAMBDA_TOL {
        let mid = 0.5 * (lo + hi);
        if calibration_value(state, r, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Precomputed Gittins indices `G(prior + (s, f), r)` for every state
/// reachable within the horizon: `s + f + r <= horizon`, `r >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaGittinsTable {
    pub prior: BetaState,
    pub horizon: u32,
    /// Blocks ordered by `r` ascending; within a block states are ordered by
    /// depth `s + f`, then by `s`.
    values: Vec<f64>,
    r_base: Vec<usize>,
}

fn triangle_entries(max_depth: u32) -> usize {
    let m = max_depth as usize;
    (m + 1) * (m + 2) / 2
}

pub fn build_gittins_table(prior: BetaState, horizon: u32) -> Result<BetaGittinsTable> {
    if horizon < 1 {
        return Err(Error::Domain("gittins table needs horizon >= 1".into()));
    }
    if horizon > MAX_TABLE_HORIZON {
        return Err(Error::Unsupported(format!(
            "horizon {horizon} exceeds the {MAX_TABLE_HORIZON} table guard"
        )));
    }
    let mut r_base = Vec::with_capacity(horizon as usize + 1);
    let mut total = 0usize;
    for r in 1..=horizon {
        r_base.push(total);
        total += triangle_entries(horizon - r);
    }
    r_base.push(total);

    let mut blocks: Vec<(u32, Vec<f64>)> = (1..=horizon)
        .into_par_iter()
        .map(|r| {
            let max_depth = horizon - r;
            let mut block = Vec::with_capacity(triangle_entries(max_depth));
            for depth in 0..=max_depth {
                for s in 0..=depth {
                    let state = prior.offset(s, depth - s);
                    block.push(fh_gittins_index(state, r).expect("r >= 1"));
                }
            }
            (r, block)
        })
        .collect();
    blocks.sort_by_key(|(r, _)| *r);

    let mut values = Vec::with_capacity(total);
    for (_, mut block) in blocks.drain(..) {
        values.append(&mut block);
    }
    Ok(BetaGittinsTable {
        prior,
        horizon,
        values,
        r_base,
    })
}

impl BetaGittinsTable {
    /// `G(prior + (successes, failures), r)`.
    pub fn lookup(&self, successes: u32, failures: u32, r: u32) -> Result<f64> {
        let depth = successes + failures;
        if r < 1 || r > self.horizon || depth > self.horizon - r {
            return Err(Error::Domain(format!(
                "state ({successes}, {failures}, r={r}) outside table horizon {}",
                self.horizon
            )));
        }
        let d = depth as usize;
        let idx = self.r_base[(r - 1) as usize] + d * (d + 1) / 2 + successes as usize;
        Ok(self.values[idx])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Serializes the table cache: a `prior_alpha,prior_beta,horizon` header,
    /// then `alpha_offset,beta_offset,r,g` rows in the table's fixed order.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 24 + 64);
        out.push_str("prior_alpha,prior_beta,horizon\n");
        let _ = writeln!(out, "{},{},{}", self.prior.alpha, self.prior.beta, self.horizon);
        out.push_str("alpha_offset,beta_offset,r,g\n");
        for r in 1..=self.horizon {
            for depth in 0..=(self.horizon - r) {
                for s in 0..=depth {
                    let g = self
                        .lookup(s, depth - s, r)
                        .expect("in-range by construction");
                    let _ = writeln!(out, "{},{},{},{}", s, depth - s, r, g);
                }
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let parse_err = |msg: &str| Error::Config(format!("gittins cache: {msg}"));
        if lines.next() != Some("prior_alpha,prior_beta,horizon") {
            return Err(parse_err("missing header"));
        }
        let head = lines.next().ok_or_else(|| parse_err("missing header row"))?;
        let fields: Vec<&str> = head.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err("malformed header row"));
        }
        let alpha: f64 = fields[0].parse().map_err(|_| parse_err("bad alpha"))?;
        let beta: f64 = fields[1].parse().map_err(|_| parse_err("bad beta"))?;
        let horizon: u32 = fields[2].parse().map_err(|_| parse_err("bad horizon"))?;
        if lines.next() != Some("alpha_offset,beta_offset,r,g") {
            return Err(parse_err("missing column header"));
        }

        let prior = BetaState::new(alpha, beta)?;
        let mut r_base = Vec::with_capacity(horizon as usize + 1);
        let mut total = 0usize;
        for r in 1..=horizon {
            r_base.push(total);
            total += triangle_entries(horizon - r);
        }
        r_base.push(total);

        let mut values = Vec::with_capacity(total);
        for line in lines {
            let mut it = line.split(',');
            let (s, f, r, g) = (it.next(), it.next(), it.next(), it.next());
            let g: f64 = g
                .ok_or_else(|| parse_err("short row"))?
                .parse()
                .map_err(|_| parse_err("bad index value"))?;
            let _ = (s, f, r); // order is fixed; offsets are informational
            values.push(g);
        }
        if values.len() != total {
            return Err(parse_err(&format!(
                "expected {total} rows for horizon {horizon}, found {}",
                values.len()
            )));
        }
        Ok(BetaGittinsTable {
            prior,
            horizon,
            values,
            r_base,
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// Exact solution of the two-armed Bernoulli bandit with uniform priors:
/// optimal expected reward for every horizon up to `horizon`, and the greedy
/// action map for the full-horizon policy.
#[derive(Debug, Clone)]
pub struct TwoArmedDpSolution {
    pub horizon: u32,
    /// `value_by_horizon[r - 1]` is the optimal expected reward over `r`
    /// rounds from the uniform-prior start.
    pub value_by_horizon: Vec<f64>,
    /// Actions per depth layer; 0 = arm 1, 1 = arm 2, 2 = tie (arm 1 played).
    actions: Vec<Vec<u8>>,
    pub tie_count: usize,
}

/// Expected maximum of two independent uniform means.
pub const UNIFORM_PAIR_MAX_MEAN: f64 = 2.0 / 3.0;

fn layer_len(d: usize) -> usize {
    // number of (s1, f1, s2, f2) with nonnegative entries summing to d
    (d + 1) * (d + 2) * (d + 3) / 6
}

/// Flat index of `(s1, f1, s2, *)` inside the depth-`d` layer.
#[inline]
fn layer_index(d: usize, s1: usize, f1: usize, s2: usize) -> usize {
    // skip s1' < s1: each contributes C(d - s1' + 2, 2) states
    let mut idx = 0;
    for prev in 0..s1 {
        let m = d - prev;
        idx += (m + 1) * (m + 2) / 2;
    }
    let m1 = d - s1;
    idx += f1 * (m1 + 1) - f1.saturating_sub(1) * f1 / 2 + s2;
    idx
}

pub fn bayes_optimal_two_armed(horizon: u32) -> Result<TwoArmedDpSolution> {
    if horizon < 1 {
        return Err(Error::Domain("dynamic program needs horizon >= 1".into()));
    }
    if horizon > MAX_DP_HORIZON {
        return Err(Error::Unsupported(format!(
            "horizon {horizon} exceeds the {MAX_DP_HORIZON} exact-DP guard"
        )));
    }
    let t = horizon as usize;

    // One backward induction per horizon for the value curve (cheap), plus
    // action recording on the full-horizon pass.
    let mut value_by_horizon = vec![0.0; t];
    let mut actions: Vec<Vec<u8>> = Vec::new();
    let mut tie_count = 0usize;

    for h in 1..=t {
        let record = h == t;
        let mut next = vec![0.0f64; layer_len(h)];
        let mut layer_actions: Vec<Vec<u8>> = if record {
            (0..h).map(|d| vec![0u8; layer_len(d)]).collect()
        } else {
            Vec::new()
        };
        for d in (0..h).rev() {
            let mut cur = vec![0.0f64; layer_len(d)];
            let mut pos = 0usize;
            for s1 in 0..=d {
                for f1 in 0..=(d - s1) {
                    for s2 in 0..=(d - s1 - f1) {
                        let f2 = d - s1 - f1 - s2;
                        let p1 = (s1 + 1) as f64 / (s1 + f1 + 2) as f64;
                        let p2 = (s2 + 1) as f64 / (s2 + f2 + 2) as f64;
                        let v1 = p1 * (1.0 + next[layer_index(d + 1, s1 + 1, f1, s2)])
                            + (1.0 - p1) * next[layer_index(d + 1, s1, f1 + 1, s2)];
                        let v2 = p2 * (1.0 + next[layer_index(d + 1, s1, f1, s2 + 1)])
                            + (1.0 - p2) * next[layer_index(d + 1, s1, f1, s2)];
                        cur[pos] = v1.max(v2);
                        if record {
                            let a = if v1 > v2 {
                                0
                            } else if v2 > v1 {
                                1
                            } else {
                                tie_count += 1;
                                2
                            };
                            layer_actions[d][pos] = a;
                        }
                        pos += 1;
                    }
                }
            }
            next = cur;
        }
        value_by_horizon[h - 1] = next[0];
        if record {
            actions = layer_actions;
        }
    }

    Ok(TwoArmedDpSolution {
        horizon,
        value_by_horizon,
        actions,
        tie_count,
    })
}

impl TwoArmedDpSolution {
    /// Optimal expected reward over the full horizon.
    pub fn value(&self) -> f64 {
        self.value_by_horizon[self.horizon as usize - 1]
    }

    /// Greedy optimal action (0 or 1) in the given state; ties resolve to
    /// arm 0 deterministically so the value is reproducible bit for bit.
    pub fn action(&self, s1: u32, f1: u32, s2: u32, f2: u32) -> Result<usize> {
        let d = (s1 + f1 + s2 + f2) as usize;
        if d >= self.horizon as usize {
            return Err(Error::Domain(format!(
                "state depth {d} has no remaining rounds at horizon {}",
                self.horizon
            )));
        }
        let code = self.actions[d][layer_index(d, s1 as usize, f1 as usize, s2 as usize)];
        Ok(if code == 1 { 1 } else { 0 })
    }

    /// Exact Bayes risk of the optimal strategy for each horizon
    /// `r = 1..=horizon`: `r * E[max(mu1, mu2)] - value(r)`.
    pub fn bayes_risk_curve(&self) -> Vec<f64> {
        self.value_by_horizon
            .iter()
            .enumerate()
            .map(|(i, v)| (i + 1) as f64 * UNIFORM_PAIR_MAX_MEAN - v)
            .collect()
    }
}

/// Shared handle used by policies; building the table is the expensive part.
pub type SharedGittinsTable = Arc<BetaGittinsTable>;
