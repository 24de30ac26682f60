//! Nonparametric strategies: find past periods that followed market windows
//! similar to the latest one, then optimize a utility over what came next.

pub mod selection;
pub mod utility;

pub use selection::{select_samples, SelectorMethod, SelectorSpec, SimilaritySet};
pub use utility::{optimize_utility, semi_log, UtilitySpec};

use crate::backtest::{Cursor, Strategy};
use crate::error::{argument, Result};
use crate::market::MarketWindow;
use crate::simplex::Portfolio;

pub fn pm_strategy_decide(
    history: &MarketWindow<'_>,
    selector: &SelectorSpec,
    utility: &UtilitySpec,
    b_prev: &Portfolio,
) -> Result<Portfolio> {
    let c = select_samples(history, selector)?;
    optimize_utility(&c, history, utility, b_prev)
}

#[derive(Debug, Clone)]
pub struct PatternMatching {
    label: String,
    selector: SelectorSpec,
    utility: UtilitySpec,
    prev: Option<Portfolio>,
    cursor: Cursor,
}

impl PatternMatching {
    pub fn new(label: impl Into<String>, selector: SelectorSpec, utility: UtilitySpec) -> Result<Self> {
        selector.validate()?;
        utility.validate()?;
        Ok(Self {
            label: label.into(),
            selector,
            utility,
            prev: None,
            cursor: Cursor::default(),
        })
    }

    pub fn selector(&self) -> &SelectorSpec {
        &self.selector
    }
}

impl Strategy for PatternMatching {
    fn name(&self) -> String {
        self.label.clone()
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
        if matches!(self.utility, UtilitySpec::Gv { .. }) {
            // the cost-aware utility depends on the previous decision
            for t in periods {
                b = pm_strategy_decide(&history.sub(1, t), &self.selector, &self.utility, &b)?;
            }
        } else if !periods.is_empty() {
            b = pm_strategy_decide(&history, &self.selector, &self.utility, &b)?;
        }
        self.prev = Some(b.clone());
        Ok(b)
    }
}

/// One strategy per selector in `grid`, all sharing `utility`.
pub fn pm_expert_family(label: &str, grid: &[SelectorSpec], utility: UtilitySpec) -> Result<Vec<PatternMatching>> {
    if grid.is_empty() {
        return Err(argument("empty parameter grid"));
    }
    grid.iter()
        .map(|s| PatternMatching::new(format!("{label}(w={})", s.window), *s, utility))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::synthetic_cg86;

    #[test]
    fn kernel_on_cg86_holds_cash() {
        let seq = synthetic_cg86(3).unwrap();
        let sel = SelectorSpec::new(SelectorMethod::Kernel { radius: 1e-9 }, 1).unwrap();
        let b = pm_strategy_decide(&seq.full(), &sel, &UtilitySpec::LogOptimal, &Portfolio::uniform(2)).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_history_is_uniform() {
        let seq = synthetic_cg86(3).unwrap();
        for method in [
            SelectorMethod::Histogram { bins: 2 },
            SelectorMethod::Kernel { radius: 0.1 },
            SelectorMethod::NearestNeighbor { neighbors: 3 },
            SelectorMethod::Correlation { rho: 0.1 },
        ] {
            let sel = SelectorSpec::new(method, 1).unwrap();
            let b = pm_strategy_decide(&seq.prefix(0), &sel, &UtilitySpec::SemiLog, &Portfolio::uniform(2)).unwrap();
            assert_eq!(b, Portfolio::uniform(2));
        }
    }

    #[test]
    fn family_sizes() {
        let grid: Vec<SelectorSpec> = (1..=5)
            .map(|w| SelectorSpec::new(SelectorMethod::Kernel { radius: 0.2 }, w).unwrap())
            .collect();
        assert_eq!(pm_expert_family("bk", &grid, UtilitySpec::LogOptimal).unwrap().len(), 5);
        assert_eq!(pm_expert_family("bk", &grid[..1], UtilitySpec::LogOptimal).unwrap().len(), 1);
        assert!(pm_expert_family("bk", &[], UtilitySpec::LogOptimal).is_err());
    }
}
