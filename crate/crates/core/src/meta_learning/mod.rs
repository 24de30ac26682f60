//! Combination layers that run several base strategies and mix their portfolios.

pub mod flh;

pub use flh::FollowLeadingHistory;

use serde::{Deserialize, Serialize};

use crate::backtest::{Cursor, ExpertSummary, Strategy};
use crate::error::{argument, Result};
use crate::follow_winner::gradient::{gradient_family_update, GradientMode};
use crate::follow_winner::ons::OnsState;
use crate::market::MarketWindow;
use crate::simplex::Portfolio;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MetaRule {
    /// Aggregating algorithm: `w_j ∝ w_j (b_j·x)^η`.
    Aa { eta: f64 },
    /// Split wealth evenly and let every expert run on its own.
    Bah,
    /// Exponentiated gradient on the weights, expert returns as relatives.
    Ogu { eta: f64 },
    /// Online Newton step on the weights, expert returns as relatives.
    Onu { beta: f64, delta: f64 },
}

impl MetaRule {
    pub fn name(&self) -> &'static str {
        match self {
            MetaRule::Aa { .. } => "meta:aa",
            MetaRule::Bah => "meta:bah",
            MetaRule::Ogu { .. } => "meta:ogu",
            MetaRule::Onu { .. } => "meta:onu",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MetaRule::Aa { eta } | MetaRule::Ogu { eta } if !(eta > 0.0) || !eta.is_finite() => {
                Err(argument(format!("eta {eta} must be positive")))
            }
            MetaRule::Onu { beta, delta } if !(beta > 0.0 && delta > 0.0) => {
                Err(argument(format!("beta {beta} and delta {delta} must be positive")))
            }
            _ => Ok(()),
        }
    }
}

/// Mixture weights and stand-alone wealths of a set of experts.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertPool {
    pub weights: Vec<f64>,
    pub wealths: Vec<f64>,
}

impl ExpertPool {
    pub fn new(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
            wealths: vec![1.0; n],
        }
    }

    pub fn combine(&self, portfolios: &[Portfolio]) -> Portfolio {
        let m = portfolios[0].len();
        Portfolio::mixture(m, self.weights.iter().copied().zip(portfolios))
    }

    fn normalize(&mut self) {
        let s: f64 = self.weights.iter().sum();
        self.weights.iter_mut().for_each(|w| *w /= s);
    }

    fn record(&mut self, returns: &[f64]) {
        for (w, r) in self.wealths.iter_mut().zip(returns) {
            *w *= r;
        }
    }
}

fn expert_returns(portfolios: &[Portfolio], x: &[f64]) -> Result<Vec<f64>> {
    let r: Vec<f64> = portfolios.iter().map(|b| b.dot(x)).collect();
    if r.iter().any(|v| !(*v > 0.0)) {
        return Err(argument("an expert return is not positive"));
    }
    Ok(r)
}

pub fn aa_update(pool: &mut ExpertPool, portfolios: &[Portfolio], x: &[f64], eta: f64) -> Result<()> {
    let r = expert_returns(portfolios, x)?;
    pool.record(&r);
    // rescale by the best return so many periods cannot underflow
    let top = r.iter().cloned().fold(0.0, f64::max);
    for (w, ri) in pool.weights.iter_mut().zip(&r) {
        *w *= (ri / top).powf(eta);
    }
    pool.normalize();
    Ok(())
}

pub fn bah_combine(pool: &mut ExpertPool, portfolios: &[Portfolio], x: &[f64]) -> Result<()> {
    let r = expert_returns(portfolios, x)?;
    pool.record(&r);
    let total: f64 = pool.wealths.iter().sum();
    for (w, s) in pool.weights.iter_mut().zip(&pool.wealths) {
        *w = s / total;
    }
    Ok(())
}

pub fn ogu_update(pool: &mut ExpertPool, portfolios: &[Portfolio], x: &[f64], eta: f64) -> Result<()> {
    let r = expert_returns(portfolios, x)?;
    pool.record(&r);
    let w = Portfolio::new_unchecked(pool.weights.clone());
    pool.weights = gradient_family_update(&w, &r, eta, GradientMode::Eg)?.into_inner();
    Ok(())
}

pub fn onu_update(pool: &mut ExpertPool, state: &mut OnsState, portfolios: &[Portfolio], x: &[f64]) -> Result<()> {
    let r = expert_returns(portfolios, x)?;
    pool.record(&r);
    let w = Portfolio::new_unchecked(pool.weights.clone());
    state.accumulate(&w, &r)?;
    pool.weights = state.decide()?.into_inner();
    Ok(())
}

/// Always holds a single asset.
#[derive(Debug, Clone)]
pub struct StockExpert {
    asset: usize,
    label: String,
}

impl StockExpert {
    pub fn new(asset: usize, label: impl Into<String>) -> Self {
        Self {
            asset,
            label: label.into(),
        }
    }
}

impl Strategy for StockExpert {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn reset(&mut self) {}

    fn init(&mut self, m: usize) -> Result<Portfolio> {
        if self.asset >= m {
            return Err(argument(format!("asset {} outside a {m}-asset market", self.asset + 1)));
        }
        Ok(Portfolio::vertex(m, self.asset))
    }

    fn decide(&mut self, history: MarketWindow<'_>) -> Result<Portfolio> {
        self.init(history.m())
    }
}

/// One stock expert per asset, named after the asset when names are known.
pub fn stock_experts(m: usize, names: Option<&[String]>) -> Vec<Box<dyn Strategy>> {
    (0..m)
        .map(|i| {
            let label = names.map(|n| n[i].clone()).unwrap_or_else(|| format!("stock{}", i + 1));
            Box::new(StockExpert::new(i, label)) as Box<dyn Strategy>
        })
        .collect()
}

pub struct MetaStrategy {
    rule: MetaRule,
    label: Option<String>,
    experts: Vec<Box<dyn Strategy>>,
    pool: ExpertPool,
    ons: Option<OnsState>,
    current: Vec<Portfolio>,
    cursor: Cursor,
}

impl MetaStrategy {
    pub fn new(rule: MetaRule, experts: Vec<Box<dyn Strategy>>) -> Result<Self> {
        rule.validate()?;
        if experts.is_empty() {
            return Err(argument("a combination needs at least one expert"));
        }
        let n = experts.len();
        Ok(Self {
            rule,
            label: None,
            experts,
            pool: ExpertPool::new(n),
            ons: None,
            current: Vec::new(),
            cursor: Cursor::default(),
        })
    }

    /// Reports under `label` instead of the rule's name.
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn pool(&self) -> &ExpertPool {
        &self.pool
    }
}

impl Strategy for MetaStrategy {
    fn name(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.rule.name().into())
    }

    fn is_hindsight(&self) -> bool {
        self.experts.iter().any(|e| e.is_hindsight())
    }

    fn reset(&mut self) {
        self.experts.iter_mut().for_each(|e| e.reset());
        self.pool = ExpertPool::new(self.experts.len());
        self.ons = None;
        self.current.clear();
        self.cursor.reset();
    }

    fn init(&mut self, m: usize) -> Result<Portfolio> {
        self.reset();
        if let MetaRule::Onu { beta, delta } = self.rule {
            self.ons = Some(OnsState::new(self.experts.len(), beta, delta)?);
        }
        self.current = self.experts.iter_mut().map(|e| e.init(m)).collect::<Result<_>>()?;
        for (e, b) in self.experts.iter().zip(&self.current) {
            b.check(m)
                .map_err(|reason| argument(format!("expert {} at period 1: {reason}", e.name())))?;
        }
        Ok(self.pool.combine(&self.current))
    }

    fn decide(&mut self, history: MarketWindow<'_>) -> Result<Portfolio> {
        if self.current.is_empty() {
            self.init(history.m())?;
        }
        for t in self.cursor.advance(&history)? {
            let x = history.period(t);
            match self.rule {
                MetaRule::Aa { eta } => aa_update(&mut self.pool, &self.current, x, eta)?,
                MetaRule::Bah => bah_combine(&mut self.pool, &self.current, x)?,
                MetaRule::Ogu { eta } => ogu_update(&mut self.pool, &self.current, x, eta)?,
                MetaRule::Onu { .. } => {
                    onu_update(&mut self.pool, self.ons.as_mut().unwrap(), &self.current, x)?
                }
            }
            let seen = history.sub(history.start(), t);
            for (e, b) in self.experts.iter_mut().zip(self.current.iter_mut()) {
                *b = e.decide(seen)?;
                b.check(history.m())
                    .map_err(|reason| argument(format!("expert {} at period {}: {reason}", e.name(), t + 1)))?;
            }
        }
        Ok(self.pool.combine(&self.current))
    }

    fn expert_summaries(&self) -> Option<Vec<ExpertSummary>> {
        Some(
            self.experts
                .iter()
                .zip(&self.pool.wealths)
                .zip(&self.pool.weights)
                .map(|((e, &wealth), &weight)| ExpertSummary {
                    name: e.name(),
                    wealth,
                    weight,
                })
                .collect(),
        )
    }
}
