//! Buy-and-hold, best stock, constant rebalancing and the hindsight BCRP.

use crate::backtest::{Cursor, Strategy};
use crate::error::{argument, Result};
use crate::market::{MarketWindow, PriceRelatives};
use crate::simplex::{log_optimal_default, Portfolio, ScenarioSet};

pub use crate::backtest::regret;

/// Holdings after one period of drift: `(b ⊙ x) / (b · x)`.
pub fn bah_decide(b: &Portfolio, x_prev: &[f64]) -> Portfolio {
    b.price_adjusted(x_prev)
}

/// Vertex of the asset with the largest cumulative product, lowest index on ties.
pub fn best_stock(seq: &PriceRelatives) -> Portfolio {
    let products = seq.column_products();
    let mut best = 0;
    for (i, p) in products.iter().enumerate() {
        if *p > products[best] {
            best = i;
        }
    }
    Portfolio::vertex(seq.m(), best)
}

/// The constant rebalanced portfolio that is log-optimal in hindsight.
pub fn bcrp(seq: &PriceRelatives) -> Result<Portfolio> {
    let scen = ScenarioSet::from_rows(seq.rows())?;
    log_optimal_default(&scen)
}

fn initial(b: &Option<Portfolio>, m: usize) -> Result<Portfolio> {
    match b {
        None => Ok(Portfolio::uniform(m)),
        Some(b) if b.len() == m => Ok(b.clone()),
        Some(b) => Err(argument(format!(
            "initial portfolio has {} weights for {m} assets",
            b.len()
        ))),
    }
}

/// Buy once, then let the holdings drift.
#[derive(Debug, Clone, Default)]
pub struct BuyAndHold {
    initial: Option<Portfolio>,
    holdings: Option<Portfolio>,
    cursor: Cursor,
}

impl BuyAndHold {
    /// Uniform initial allocation.
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_initial(b: Portfolio) -> Self {
        Self {
            initial: Some(b),
            ..Self::default()
        }
    }
}

impl Strategy for BuyAndHold {
    fn name(&self) -> String {
        "bah".into()
    }

    fn reset(&mut self) {
        self.holdings = None;
        self.cursor.reset();
    }

    fn init(&mut self, m: usize) -> Result<Portfolio> {
        let b = initial(&self.initial, m)?;
        self.holdings = Some(b.clone());
        Ok(b)
    }

    fn decide(&mut self, history: MarketWindow<'_>) -> Result<Portfolio> {
        if self.holdings.is_none() {
            self.init(history.m())?;
        }
        let mut b = self.holdings.take().unwrap();
        for t in self.cursor.advance(&history)? {
            b = bah_decide(&b, history.period(t));
        }
        self.holdings = Some(b.clone());
        Ok(b)
    }
}

/// Rebalances to the same portfolio every period.
#[derive(Debug, Clone, Default)]
pub struct ConstantRebalanced {
    target: Option<Portfolio>,
    resolved: Option<Portfolio>,
}

impl ConstantRebalanced {
    pub fn new(b: Portfolio) -> Self {
        Self {
            target: Some(b),
            resolved: None,
        }
    }

    pub fn uniform() -> Self {
        Self::default()
    }
}

impl Strategy for ConstantRebalanced {
    fn name(&self) -> String {
        match self.target {
            None => "ucrp".into(),
            Some(_) => "crp".into(),
        }
    }

    fn reset(&mut self) {
        self.resolved = None;
    }

    fn init(&mut self, m: usize) -> Result<Portfolio> {
        let b = initial(&self.target, m)?;
        self.resolved = Some(b.clone());
        Ok(b)
    }

    fn decide(&mut self, history: MarketWindow<'_>) -> Result<Portfolio> {
        match &self.resolved {
            Some(b) => Ok(b.clone()),
            None => self.init(history.m()),
        }
    }
}

/// A portfolio fixed from the whole market before trading starts.
#[derive(Debug, Clone)]
pub struct Hindsight {
    name: &'static str,
    b: Portfolio,
}

impl Hindsight {
    pub fn best_stock(seq: &PriceRelatives) -> Self {
        Self {
            name: "best",
            b: best_stock(seq),
        }
    }

    pub fn bcrp(seq: &PriceRelatives) -> Result<Self> {
        Ok(Self {
            name: "bcrp",
            b: bcrp(seq)?,
        })
    }

    pub fn portfolio(&self) -> &Portfolio {
        &self.b
    }
}

impl Strategy for Hindsight {
    fn name(&self) -> String {
        self.name.into()
    }

    fn reset(&mut self) {}

    fn init(&mut self, m: usize) -> Result<Portfolio> {
        if m != self.b.len() {
            return Err(argument(format!(
                "{} was fitted on {} assets, market has {m}",
                self.name,
                self.b.len()
            )));
        }
        Ok(self.b.clone())
    }

    /// Best stock is a single vertex, so holding and rebalancing coincide.
    fn decide(&mut self, history: MarketWindow<'_>) -> Result<Portfolio> {
        self.init(history.m())
    }

    fn is_hindsight(&self) -> bool {
        true
    }
}
