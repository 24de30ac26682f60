//! Shared numerics on the probability simplex: the [`Portfolio`] type,
//! Euclidean projection, a projected-gradient maximizer for concave
//! objectives, and the log-optimal (Kelly) solver built on it.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{argument, OlpsError, Result};
use crate::market::PriceRelatives;

/// Entries below this are treated as rounding noise and clamped to zero.
pub const NEGATIVE_SLACK: f64 = 1e-12;
/// Allowed deviation of the weight sum from one.
pub const SUM_SLACK: f64 = 1e-9;

/// A point on the simplex: non-negative fractions of capital summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Portfolio(Vec<f64>);

impl Portfolio {
    /// Validates and clamps tiny negatives to zero.
    pub fn new(mut weights: Vec<f64>) -> Result<Self> {
        validate(&weights).map_err(argument)?;
        for w in weights.iter_mut() {
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        Ok(Self(weights))
    }

    /// Skips validation. The backtest engine still checks every emitted
    /// portfolio, so an infeasible one is reported as a contract violation.
    pub fn new_unchecked(weights: Vec<f64>) -> Self {
        Self(weights)
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    pub fn vertex(m: usize, i: usize) -> Self {
        let mut w = vec![0.0; m];
        w[i] = 1.0;
        Self(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        dot(&self.0, x)
    }

    /// Holdings after the period's price move: `(b ⊙ x) / (b · x)`.
    pub fn price_adjusted(&self, x: &[f64]) -> Portfolio {
        let r = self.dot(x);
        Self(self.0.iter().zip(x).map(|(b, x)| b * x / r).collect())
    }

    /// `Σ_k c_k b_k` for non-negative coefficients summing to one.
    pub fn mixture<'a>(m: usize, parts: impl IntoIterator<Item = (f64, &'a Portfolio)>) -> Portfolio {
        let mut out = vec![0.0; m];
        for (c, b) in parts {
            for (o, w) in out.iter_mut().zip(b.weights()) {
                *o += c * w;
            }
        }
        renormalize(&mut out);
        Self(out)
    }

    /// Feasibility against the simplex invariants for `m` assets.
    pub fn check(&self, m: usize) -> std::result::Result<(), String> {
        if self.0.len() != m {
            return Err(format!("portfolio has {} weights for {m} assets", self.0.len()));
        }
        validate(&self.0)
    }

    pub fn distance(&self, other: &Portfolio) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl Deref for Portfolio {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

fn validate(w: &[f64]) -> std::result::Result<(), String> {
    if w.is_empty() {
        return Err("empty portfolio".into());
    }
    if let Some((i, v)) = w
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || **v < -NEGATIVE_SLACK)
    {
        return Err(format!("weight {} is {v}", i + 1));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > SUM_SLACK {
        return Err(format!("weights sum to {s}"));
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| a * b).sum()
}

fn renormalize(w: &mut [f64]) {
    for v in w.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let s: f64 = w.iter().sum();
    if s > 0.0 {
        w.iter_mut().for_each(|v| *v /= s);
    }
}

/// Euclidean projection onto the simplex (sort-and-threshold).
pub fn project_to_simplex(v: &[f64]) -> Result<Portfolio> {
    if v.is_empty() {
        return Err(argument("cannot project an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(argument("cannot project a non-finite vector"));
    }
    Ok(Portfolio(project_raw(v)))
}

pub(crate) fn project_raw(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// A smooth function on the simplex to be maximized.
pub trait SimplexObjective {
    fn dim(&self) -> usize;
    fn value(&self, b: &[f64]) -> f64;
    fn gradient(&self, b: &[f64], grad: &mut [f64]);
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Stop once the Frank–Wolfe gap (an upper bound on suboptimality for
    /// concave objectives) falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

/// Projected gradient ascent with Barzilai–Borwein trial steps and
/// Armijo backtracking.
///
/// Terminates when the Frank–Wolfe gap `max_i g_i - g·b` is within
/// `opts.tol`, or when no ascent step is representable in floating point.
pub fn maximize_on_simplex<O: SimplexObjective + ?Sized>(
    objective: &O,
    start: &Portfolio,
    opts: SolverOptions,
) -> Result<Portfolio> {
    let m = objective.dim();
    if start.len() != m {
        return Err(OlpsError::Shape(format!(
            "start point has {} weights for {m} assets",
            start.len()
        )));
    }
    let mut b = start.0.clone();
    let mut f = objective.value(&b);
    if !f.is_finite() {
        return Err(OlpsError::Numeric("objective not finite at start point".into()));
    }
    let mut g = vec![0.0; m];
    objective.gradient(&b, &mut g);
    let mut step = 1.0;
    let mut trial = vec![0.0; m];
    let mut g_new = vec![0.0; m];

    for _ in 0..opts.max_iter {
        let gb = dot(&g, &b);
        let gap = g.iter().copied().fold(f64::NEG_INFINITY, f64::max) - gb;
        if gap <= opts.tol {
            return Ok(Portfolio(b));
        }

        let mut accepted = false;
        while step > 1e-20 {
            for ((t, bi), gi) in trial.iter_mut().zip(&b).zip(&g) {
                *t = bi + step * gi;
            }
            let cand = project_raw(&trial);
            let ascent: f64 = cand.iter().zip(&b).zip(&g).map(|((c, bi), gi)| gi * (c - bi)).sum();
            if ascent <= 0.0 {
                // the projected step does not move the point
                return Ok(Portfolio(b));
            }
            let f_c = objective.value(&cand);
            if f_c.is_finite() && f_c >= f + 1e-4 * ascent {
                objective.gradient(&cand, &mut g_new);
                let (mut ss, mut sy) = (0.0, 0.0);
                for i in 0..m {
                    let s = cand[i] - b[i];
                    ss += s * s;
                    sy -= s * (g_new[i] - g[i]);
                }
                step = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e10) } else { (step * 4.0).min(1e10) };
                b = cand;
                f = f_c;
                std::mem::swap(&mut g, &mut g_new);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // no representable ascent remains
            return Ok(Portfolio(b));
        }
    }
    Err(OlpsError::Convergence {
        solver: "projected gradient",
        iterations: opts.max_iter,
        best: b,
    })
}

/// Discrete distribution over price-relative scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    scenarios: Vec<Vec<f64>>,
    probabilities: Vec<f64>,
}

impl ScenarioSet {
    pub fn new(scenarios: Vec<Vec<f64>>, probabilities: Vec<f64>) -> Result<Self> {
        Self::build(scenarios, probabilities, true)
    }

    /// Equal probability `1/k` on each of `k` scenarios.
    pub fn uniform(scenarios: Vec<Vec<f64>>) -> Result<Self> {
        let k = scenarios.len().max(1);
        let p = vec![1.0 / k as f64; scenarios.len()];
        // the sum of k copies of 1/k is one up to k ulps
        Self::build(scenarios, p, false)
    }

    fn build(scenarios: Vec<Vec<f64>>, probabilities: Vec<f64>, check_sum: bool) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(argument("scenario set is empty"));
        }
        if scenarios.len() != probabilities.len() {
            return Err(OlpsError::Shape("one probability per scenario required".into()));
        }
        let m = scenarios[0].len();
        if m == 0 || scenarios.iter().any(|s| s.len() != m) {
            return Err(OlpsError::Shape("scenarios must share a non-zero length".into()));
        }
        if scenarios.iter().flatten().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(argument("scenario entries must be finite and positive"));
        }
        if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(argument("probabilities must be non-negative"));
        }
        let total: f64 = probabilities.iter().sum();
        if check_sum && (total - 1.0).abs() > 1e-12 {
            return Err(argument(format!("probabilities sum to {total}")));
        }
        Ok(Self {
            scenarios,
            probabilities,
        })
    }

    pub fn from_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        Self::uniform(rows.into_iter().map(<[f64]>::to_vec).collect())
    }

    pub fn dim(&self) -> usize {
        self.scenarios[0].len()
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn scenarios(&self) -> &[Vec<f64>] {
        &self.scenarios
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Expected log return `Σ p_i log(b · x_i)`.
    pub fn expected_log(&self, b: &[f64]) -> f64 {
        self.scenarios
            .iter()
            .zip(&self.probabilities)
            .map(|(x, p)| p * dot(b, x).ln())
            .sum()
    }
}

/// Expected log return over a scenario set, optionally minus `½ c ‖b‖²`.
pub(crate) struct LogUtility<'a> {
    pub scen: &'a ScenarioSet,
    pub l2: f64,
}

impl SimplexObjective for LogUtility<'_> {
    fn dim(&self) -> usize {
        self.scen.dim()
    }

    fn value(&self, b: &[f64]) -> f64 {
        self.scen.expected_log(b) - 0.5 * self.l2 * dot(b, b)
    }

    fn gradient(&self, b: &[f64], grad: &mut [f64]) {
        for (g, bi) in grad.iter_mut().zip(b) {
            *g = -self.l2 * bi;
        }
        for (x, p) in self.scen.scenarios.iter().zip(&self.scen.probabilities) {
            let r = p / dot(b, x);
            for (g, xi) in grad.iter_mut().zip(x) {
                *g += r * xi;
            }
        }
    }
}

/// Portfolio maximizing `Σ p_i log(b · x_i)` over the simplex, started
/// from the uniform portfolio.
pub fn log_optimal(scen: &ScenarioSet, tol: f64, max_iter: usize) -> Result<Portfolio> {
    let obj = LogUtility { scen, l2: 0.0 };
    maximize_on_simplex(&obj, &Portfolio::uniform(scen.dim()), SolverOptions { tol, max_iter })
}

pub fn log_optimal_default(scen: &ScenarioSet) -> Result<Portfolio> {
    let opts = SolverOptions::default();
    log_optimal(scen, opts.tol, opts.max_iter)
}

/// Wealth of rebalancing to `b` every period: `Π_t b · x_t`.
pub fn crp_wealth(b: &Portfolio, seq: &PriceRelatives) -> Result<f64> {
    if b.len() != seq.m() {
        return Err(OlpsError::Shape(format!(
            "portfolio has {} weights for {} assets",
            b.len(),
            seq.m()
        )));
    }
    Ok(seq.rows().map(|x| b.dot(x)).product())
}

/// `(1/n) log S_n`.
pub fn growth_rate(wealth: f64, n: usize) -> Result<f64> {
    if !(wealth > 0.0) || !wealth.is_finite() {
        return Err(argument(format!("wealth must be positive, got {wealth}")));
    }
    if n == 0 {
        return Err(argument("growth rate needs at least one period"));
    }
    Ok(wealth.ln() / n as f64)
}
