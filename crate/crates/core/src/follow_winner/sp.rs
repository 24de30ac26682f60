//! Switching portfolios.

use crate::backtest::{Cursor, Strategy};
use crate::error::{argument, Result};
use crate::market::MarketWindow;
use crate::simplex::Portfolio;

/// `(1 − γ − γ/(m−1)) b + γ/(m−1)` applied coordinate-wise.
pub fn switching_portfolio_update(b: &Portfolio, gamma: f64) -> Result<Portfolio> {
    let m = b.len();
    if m < 2 {
        return Err(argument("switching needs at least two assets"));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(argument(format!("gamma {gamma} outside [0, 1)")));
    }
    let share = gamma / (m - 1) as f64;
    let keep = 1.0 - gamma - share;
    Ok(Portfolio::new_unchecked(b.iter().map(|w| keep * w + share).collect()))
}

#[derive(Debug, Clone)]
pub struct SwitchingPortfolio {
    gamma: f64,
    initial: Option<Portfolio>,
    b: Option<Portfolio>,
    cursor: Cursor,
}

impl SwitchingPortfolio {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(argument(format!("gamma {gamma} outside [0, 1)")));
        }
        Ok(Self {
            gamma,
            initial: None,
            b: None,
            cursor: Cursor::default(),
        })
    }

    pub fn with_initial(mut self, b: Portfolio) -> Self {
        self.initial = Some(b);
        self
    }
}

impl Strategy for SwitchingPortfolio {
    fn name(&self) -> String {
        "sp".into()
    }

    fn reset(&mut self) {
        self.b = None;
        self.cursor.reset();
    }

    fn init(&mut self, m: usize) -> Result<Portfolio> {
        if m < 2 {
            return Err(argument("switching needs at least two assets"));
        }
        let b = match &self.initial {
            Some(b) if b.len() == m => b.clone(),
            Some(b) => return Err(argument(format!("initial portfolio has {} weights for {m} assets", b.len()))),
            None => Portfolio::uniform(m),
        };
        self.b = Some(b.clone());
        Ok(b)
    }

    fn decide(&mut self, history: MarketWindow<'_>) -> Result<Portfolio> {
        if self.b.is_none() {
            self.init(history.m())?;
        }
        let mut b = self.b.take().unwrap();
        for _ in self.cursor.advance(&history)? {
            b = switching_portfolio_update(&b, self.gamma)?;
        }
        self.b = Some(b.clone());
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let b = Portfolio::new(vec![0.3, 0.7]).unwrap();
        assert_eq!(switching_portfolio_update(&b, 0.0).unwrap(), b);
        let v = switching_portfolio_update(&Portfolio::vertex(2, 0), 0.1).unwrap();
        assert!((v[0] - 0.9).abs() < 1e-15 && (v[1] - 0.1).abs() < 1e-15);
        let u = switching_portfolio_update(&Portfolio::uniform(5), 0.4).unwrap();
        assert!(u.distance(&Portfolio::uniform(5)) < 1e-15);
    }

    #[test]
    fn single_asset_unsupported() {
        assert!(switching_portfolio_update(&Portfolio::uniform(1), 0.1).is_err());
        assert!(SwitchingPortfolio::new(0.1).unwrap().init(1).is_err());
    }
}
