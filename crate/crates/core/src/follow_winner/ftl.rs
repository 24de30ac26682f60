//! Strategies that track the best constant rebalanced portfolio so far.

use serde::{Deserialize, Serialize};

use crate::backtest::{Cursor, Strategy};
use crate::error::{argument, Result};
use crate::market::MarketWindow;
use crate::simplex::{log_optimal_default, maximize_on_simplex, LogUtility, Portfolio, ScenarioSet, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FtlVariant {
    Ftl,
    Scrp,
    /// `(1 − γ) b* + γ b_prev`.
    Wscrp { gamma: f64 },
    /// BCRP over the last `window` periods.
    Vrp { window: usize },
    /// `(t/(t+1)) b* + (1/(t+1)) uniform`.
    Ordentlich,
}

impl FtlVariant {
    pub fn name(&self) -> &'static str {
        match self {
            FtlVariant::Ftl => "ftl",
            FtlVariant::Scrp => "scrp",
            FtlVariant::Wscrp { .. } => "wscrp",
            FtlVariant::Vrp { .. } => "vrp",
            FtlVariant::Ordentlich => "ordentlich",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FtlVariant::Wscrp { gamma } if !(0.0..=1.0).contains(&gamma) => {
                Err(argument(format!("gamma {gamma} outside [0, 1]")))
            }
            FtlVariant::Vrp { window: 0 } => Err(argument("window must be at least 1")),
            _ => Ok(()),
        }
    }
}

/// Log-optimal portfolio over the given periods (uniform when empty).
pub fn leader(history: &MarketWindow<'_>) -> Result<Portfolio> {
    if history.is_empty() {
        return Ok(Portfolio::uniform(history.m()));
    }
    log_optimal_default(&ScenarioSet::from_rows(history.rows())?)
}

/// One decision given the history `x_1..x_t` and the previous decision `b_t`.
pub fn follow_leader_decide(history: &MarketWindow<'_>, variant: FtlVariant, prev: &Portfolio) -> Result<Portfolio> {
    variant.validate()?;
    let m = history.m();
    if history.is_empty() {
        return Ok(Portfolio::uniform(m));
    }
    match variant {
        FtlVariant::Ftl | FtlVariant::Scrp => leader(history),
        FtlVariant::Wscrp { gamma } => {
            let star = leader(history)?;
            Ok(Portfolio::mixture(m, [(1.0 - gamma, &star), (gamma, prev)]))
        }
        FtlVariant::Vrp { window } => leader(&history.tail(window)),
        FtlVariant::Ordentlich => {
            let t = history.len() as f64;
            let star = leader(history)?;
            Ok(Portfolio::mixture(
                m,
                [(t / (t + 1.0), &star), (1.0 / (t + 1.0), &Portfolio::uniform(m))],
            ))
        }
    }
}

#[derive(Debug, Clone)]
pub struct FollowLeader {
    variant: FtlVariant,
    prev: Option<Portfolio>,
    cursor: Cursor,
}

impl FollowLeader {
    pub fn new(variant: FtlVariant) -> Result<Self> {
        variant.validate()?;
        Ok(Self {
            variant,
            prev: None,
            cursor: Cursor::default(),
        })
    }
}

impl Strategy for FollowLeader {
    fn name(&self) -> String {
        self.variant.name().into()
    }

    fn reset(&mut self) {
        self.prev = None;
        self.cursor.reset();
    }

    fn init(&mut self, m: usize) -> Result<Portfolio> {
        let b = Portfolio::uniform(m);
        self.prev = Some(b.clone());
        Ok(b)
    }

    fn decide(&mut self, history: MarketWindow<'_>) -> Result<Portfolio> {
        let mut b = match self.prev.take() {
            Some(b) => b,
            None => Portfolio::uniform(history.m()),
        };
        let periods = self.cursor.advance(&history)?;
        if matches!(self.variant, FtlVariant::Wscrp { .. }) {
            for t in periods {
                b = follow_leader_decide(&history.sub(1, t), self.variant, &b)?;
            }
        } else if !periods.is_empty() {
            b = follow_leader_decide(&history, self.variant, &b)?;
        }
        self.prev = Some(b.clone());
        Ok(b)
    }
}

/// `argmax Σ_τ log(b·x_τ) − ½‖b‖²`.
pub fn expconcave_ftl_decide(history: &MarketWindow<'_>) -> Result<Portfolio> {
    let m = history.m();
    if history.is_empty() {
        return Ok(Portfolio::uniform(m));
    }
    let scen = ScenarioSet::from_rows(history.rows())?;
    // dividing the objective by t leaves the maximizer unchanged
    let obj = LogUtility {
        scen: &scen,
        l2: 1.0 / history.len() as f64,
    };
    maximize_on_simplex(&obj, &Portfolio::uniform(m), SolverOptions::default())
}

#[derive(Debug, Clone, Default)]
pub struct ExpConcaveFtl;

impl Strategy for ExpConcaveFtl {
    fn name(&self) -> String {
        "expconcave_ftl".into()
    }

    fn reset(&mut self) {}

    fn init(&mut self, m: usize) -> Result<Portfolio> {
        Ok(Portfolio::uniform(m))
    }

    fn decide(&mut self, history: MarketWindow<'_>) -> Result<Portfolio> {
        expconcave_ftl_decide(&history)
    }
}
