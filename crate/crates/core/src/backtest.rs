//! The sequential decision loop, proportional transaction costs, and
//! result summaries.
//!
//! At the start of period `t` a strategy commits to `b_t` having seen only
//! `x_1..x_{t-1}`; the market then reveals `x_t` and wealth evolves as
//! `S_t = S_{t-1} · c_{t-1} · (b_t · x_t)`, where `c_{t-1}` is the fraction
//! of wealth surviving the rebalance from the drifted holdings into `b_t`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{argument, OlpsError, Result};
use crate::market::{MarketWindow, PriceRelatives};
use crate::simplex::Portfolio;

/// An online portfolio selection rule.
///
/// The engine calls `reset`, then `init(m)` for `b_1`, then
/// `decide(x_1..x_t)` once per period for `b_{t+1}` with a history that
/// grows by exactly one row per call.
pub trait Strategy: Send {
    fn name(&self) -> String;

    /// Drops all learned state.
    fn reset(&mut self);

    /// The first-period portfolio, chosen before any data is seen.
    fn init(&mut self, m: usize) -> Result<Portfolio>;

    /// The portfolio for period `history.len() + 1`.
    fn decide(&mut self, history: MarketWindow<'_>) -> Result<Portfolio>;

    /// Hindsight benchmarks are built from the full market and are exempt
    /// from causality checks.
    fn is_hindsight(&self) -> bool {
        false
    }

    /// Per-expert bookkeeping for combination strategies.
    fn expert_summaries(&self) -> Option<Vec<ExpertSummary>> {
        None
    }
}

impl<S: Strategy + ?Sized> Strategy for Box<S> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn reset(&mut self) {
        (**self).reset()
    }
    fn init(&mut self, m: usize) -> Result<Portfolio> {
        (**self).init(m)
    }
    fn decide(&mut self, history: MarketWindow<'_>) -> Result<Portfolio> {
        (**self).decide(history)
    }
    fn is_hindsight(&self) -> bool {
        (**self).is_hindsight()
    }
    fn expert_summaries(&self) -> Option<Vec<ExpertSummary>> {
        (**self).expert_summaries()
    }
}

/// Tracks how many periods a stateful strategy has absorbed, so `decide`
/// can catch up when handed a longer history.
#[derive(Debug, Clone, Copy, Default)]
pub struct Cursor {
    seen: usize,
}

impl Cursor {
    pub fn reset(&mut self) {
        self.seen = 0;
    }

    pub fn seen(&self) -> usize {
        self.seen
    }

    /// Periods not yet absorbed, marking them as seen.
    pub fn advance(&mut self, history: &MarketWindow<'_>) -> Result<std::ops::Range<usize>> {
        if history.start() != 1 {
            return Err(argument("strategy histories must start at period 1"));
        }
        if history.end() < self.seen {
            return Err(argument(format!(
                "history shrank from {} to {} periods without a reset",
                self.seen,
                history.end()
            )));
        }
        let range = self.seen + 1..history.end() + 1;
        self.seen = history.end();
        Ok(range)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertSummary {
    pub name: String,
    /// Wealth the expert would have on its own, without costs.
    pub wealth: f64,
    pub weight: f64,
}

/// Proportional buy and sell rates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub gamma_buy: f64,
    pub gamma_sell: f64,
}

impl CostSpec {
    pub fn new(gamma_buy: f64, gamma_sell: f64) -> Result<Self> {
        for (label, g) in [("buy", gamma_buy), ("sell", gamma_sell)] {
            if !(0.0..1.0).contains(&g) {
                return Err(argument(format!("{label} rate {g} outside [0, 1)")));
            }
        }
        Ok(Self {
            gamma_buy,
            gamma_sell,
        })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.gamma_buy == 0.0 && self.gamma_sell == 0.0
    }

    /// Smallest attainable factor, reached by a full switch between assets.
    pub fn lower_bound(&self) -> f64 {
        (1.0 - self.gamma_sell) / (1.0 + self.gamma_buy)
    }
}

/// `g(c) = c + γ_s Σ(b̂_i − b_i c)⁺ + γ_b Σ(b_i c − b̂_i)⁺ − 1`.
pub fn cost_residual(held: &[f64], target: &[f64], costs: CostSpec, c: f64) -> f64 {
    let (mut sold, mut bought) = (0.0, 0.0);
    for (h, b) in held.iter().zip(target) {
        let d = b * c - h;
        if d > 0.0 {
            bought += d;
        } else {
            sold -= d;
        }
    }
    c + costs.gamma_sell * sold + costs.gamma_buy * bought - 1.0
}

/// Fraction of wealth kept when rebalancing from drifted holdings `held`
/// into `target`. Bisection on the strictly increasing residual.
pub fn cost_factor_from_holdings(held: &[f64], target: &[f64], costs: CostSpec) -> Result<f64> {
    if costs.is_zero() {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (costs.lower_bound(), 1.0);
    if cost_residual(held, target, costs, hi) <= 0.0 {
        return Ok(hi);
    }
    if cost_residual(held, target, costs, lo) >= 0.0 {
        return Ok(lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let g = cost_residual(held, target, costs, mid);
        if g.abs() < 1e-15 || hi - lo < 1e-15 {
            return Ok(mid);
        }
        if g > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(OlpsError::Numeric("transaction cost bisection did not converge".into()))
}

/// `c(b_{t-1}, x_{t-1}, b_t)`: the holdings are `b_prev` drifted by `x_prev`.
pub fn cost_factor(
    b_prev: &Portfolio,
    x_prev: &[f64],
    b_new: &Portfolio,
    costs: CostSpec,
) -> Result<f64> {
    let held = b_prev.price_adjusted(x_prev);
    cost_factor_from_holdings(&held, b_new, costs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub strategy: String,
    /// `S_0..S_n`, with `S_0 = 1`.
    pub wealth: Vec<f64>,
    /// `b_t · x_t` for `t = 1..n`.
    pub period_returns: Vec<f64>,
    /// `c_0..c_{n-1}`; `c_0 = 1` because entering `b_1` is free.
    pub cost_factors: Vec<f64>,
    /// Wealth paid in costs at each rebalance, `S_{t-1}(1 − c_{t-1})`.
    pub costs_paid: Vec<f64>,
    /// `b_1..b_n`.
    pub portfolios: Vec<Portfolio>,
    pub growth_rate: f64,
    pub expert_summaries: Option<Vec<ExpertSummary>>,
}

impl BacktestResult {
    pub fn final_wealth(&self) -> f64 {
        *self.wealth.last().expect("wealth path holds S_0")
    }

    pub fn n(&self) -> usize {
        self.period_returns.len()
    }

    pub fn write_wealth_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "period,wealth,period_return,cost_factor")?;
        writeln!(w, "0,{},,", self.wealth[0])?;
        for t in 0..self.n() {
            writeln!(
                w,
                "{},{},{},{}",
                t + 1,
                self.wealth[t + 1],
                self.period_returns[t],
                self.cost_factors[t]
            )?;
        }
        Ok(())
    }
}

fn checked(p: Portfolio, m: usize, period: usize) -> Result<Portfolio> {
    p.check(m)
        .map_err(|reason| OlpsError::ContractViolation { period, reason })?;
    Ok(p)
}

/// Runs the decision loop over the full sequence.
pub fn run_backtest<S: Strategy + ?Sized>(
    strategy: &mut S,
    seq: &PriceRelatives,
    costs: CostSpec,
) -> Result<BacktestResult> {
    let m = seq.m();
    let n = seq.n();
    strategy.reset();

    let mut wealth = Vec::with_capacity(n + 1);
    let mut period_returns = Vec::with_capacity(n);
    let mut cost_factors = Vec::with_capacity(n);
    let mut costs_paid = Vec::with_capacity(n);
    let mut portfolios: Vec<Portfolio> = Vec::with_capacity(n);
    wealth.push(1.0);

    for t in 1..=n {
        let b = if t == 1 {
            strategy.init(m)?
        } else {
            strategy.decide(seq.prefix(t - 1))?
        };
        let b = checked(b, m, t)?;
        let c = match portfolios.last() {
            None => 1.0,
            Some(prev) => cost_factor(prev, seq.row(t - 2), &b, costs)?,
        };
        let x = seq.row(t - 1);
        let r = b.dot(x);
        let s_prev = *wealth.last().unwrap();
        costs_paid.push(s_prev * (1.0 - c));
        wealth.push(s_prev * c * r);
        period_returns.push(r);
        cost_factors.push(c);
        portfolios.push(b);
    }

    // let combination strategies absorb the last period before reporting
    let expert_summaries = if strategy.expert_summaries().is_some() {
        strategy.decide(seq.full())?;
        strategy.expert_summaries()
    } else {
        None
    };

    let final_wealth = *wealth.last().unwrap();
    if !(final_wealth > 0.0) || !final_wealth.is_finite() {
        return Err(OlpsError::Numeric(format!("final wealth {final_wealth}")));
    }
    Ok(BacktestResult {
        strategy: strategy.name(),
        growth_rate: crate::simplex::growth_rate(final_wealth, n)?,
        wealth,
        period_returns,
        cost_factors,
        costs_paid,
        portfolios,
        expert_summaries,
    })
}

/// Decisions `b_1..b_{n+1}`: the backtest decisions plus the portfolio
/// the strategy would hold after the last observed period.
pub fn decision_path<S: Strategy + ?Sized>(
    strategy: &mut S,
    seq: &PriceRelatives,
) -> Result<Vec<Portfolio>> {
    let m = seq.m();
    strategy.reset();
    let mut out = Vec::with_capacity(seq.n() + 1);
    out.push(checked(strategy.init(m)?, m, 1)?);
    for t in 1..=seq.n() {
        out.push(checked(strategy.decide(seq.prefix(t))?, m, t + 1)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CausalityVerdict {
    Pass,
    /// First period whose decision changed when later data was removed.
    Fail { period: usize, difference: f64 },
    /// Hindsight benchmark; not checked.
    Exempt,
}

impl CausalityVerdict {
    pub fn passed(&self) -> bool {
        !matches!(self, CausalityVerdict::Fail { .. })
    }
}

/// Compares `b_1..b_{t_cut}` computed on the full market with the same
/// decisions computed on a market that ends at period `t_cut − 1`.
///
/// `factory` builds a fresh strategy for a given market, so strategies that
/// peek at the market they were built from are caught too.
pub fn truncation_causality_check<F>(
    factory: F,
    seq: &PriceRelatives,
    t_cut: usize,
) -> Result<CausalityVerdict>
where
    F: Fn(&PriceRelatives) -> Result<Box<dyn Strategy>>,
{
    if t_cut < 2 || t_cut > seq.n() {
        return Err(argument(format!("cut point {t_cut} outside 2..={}", seq.n())));
    }
    let mut full_strategy = factory(seq)?;
    if full_strategy.is_hindsight() {
        return Ok(CausalityVerdict::Exempt);
    }
    let full = decision_path(&mut full_strategy, seq)?;
    let short_seq = seq.truncated(t_cut - 1)?;
    let mut short_strategy = factory(&short_seq)?;
    let short = decision_path(&mut short_strategy, &short_seq)?;

    for (t, (a, b)) in full.iter().zip(&short).enumerate().take(t_cut) {
        let difference = a.distance(b);
        if difference > 1e-12 {
            return Ok(CausalityVerdict::Fail {
                period: t + 1,
                difference,
            });
        }
    }
    Ok(CausalityVerdict::Pass)
}

/// `log S(BCRP) − log S(Alg)`; negative when the algorithm beats BCRP.
pub fn regret(alg_wealth: f64, bcrp_wealth: f64) -> Result<f64> {
    if !(alg_wealth > 0.0) || !(bcrp_wealth > 0.0) {
        return Err(argument(format!(
            "regret needs positive wealths, got {alg_wealth} and {bcrp_wealth}"
        )));
    }
    Ok(bcrp_wealth.ln() - alg_wealth.ln())
}

/// Versioned, deterministic run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub strategy: String,
    pub params: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub experts: Vec<String>,
    pub n: usize,
    pub m: usize,
    pub costs: CostSpec,
    pub final_wealth: f64,
    pub growth_rate: f64,
    pub bcrp_wealth: f64,
    pub regret: f64,
    /// Worst single-period relative wealth change, `max_t (1 − c_{t−1} b_t·x_t)`, floored at 0.
    pub max_period_loss: f64,
    pub total_costs: f64,
    /// Log-wealth lost to costs, `−Σ log c_{t−1}`.
    pub cost_drag: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub expert_summaries: Option<Vec<ExpertSummary>>,
}

pub const REPORT_SCHEMA: u32 = 1;

pub fn summarize(result: &BacktestResult, bcrp_wealth: f64) -> Result<Report> {
    let final_wealth = result.final_wealth();
    let max_period_loss = result
        .period_returns
        .iter()
        .zip(&result.cost_factors)
        .map(|(r, c)| 1.0 - r * c)
        .fold(0.0, f64::max);
    Ok(Report {
        schema: REPORT_SCHEMA,
        strategy: result.strategy.clone(),
        params: BTreeMap::new(),
        experts: Vec::new(),
        n: result.n(),
        m: result.portfolios.first().map(|p| p.len()).unwrap_or(0),
        costs: CostSpec::zero(),
        final_wealth,
        growth_rate: crate::simplex::growth_rate(final_wealth, result.n())?,
        bcrp_wealth,
        regret: regret(final_wealth, bcrp_wealth)?,
        max_period_loss,
        total_costs: result.costs_paid.iter().sum(),
        cost_drag: 0.0 - result.cost_factors.iter().map(|c| c.ln()).sum::<f64>(),
        expert_summaries: result.expert_summaries.clone(),
    })
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }
}
