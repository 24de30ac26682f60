//! Robust median reversion.

use crate::backtest::{Cursor, Strategy};
use crate::error::{argument, OlpsError, Result};
use crate::market::MarketWindow;
use crate::simplex::Portfolio;

use super::median::l1_median;
use super::olmar::reversion_pa_step;

const MEDIAN_TOL: f64 = 1e-9;
const MEDIAN_MAX_ITER: usize = 1_000;

/// `L1med(prices) / p_t`, where the last row of `prices` is `p_t`.
pub fn rmr_predict(prices: &[Vec<f64>]) -> Result<Vec<f64>> {
    let latest = prices.last().ok_or_else(|| argument("empty price window"))?;
    let median = match l1_median(prices, MEDIAN_TOL, MEDIAN_MAX_ITER) {
        Ok(med) => med,
        Err(OlpsError::Convergence { best, .. }) => best,
        Err(e) => return Err(e),
    };
    Ok(median.iter().zip(latest).map(|(a, p)| a / p).collect())
}

/// Prices relative to the latest one, oldest first, from `k` relatives.
pub fn relative_prices(recent: &[&[f64]], m: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![1.0; m]];
    for x in recent.iter().rev() {
        let prev: Vec<f64> = out.last().unwrap().iter().zip(x.iter()).map(|(p, r)| p / r).collect();
        out.push(prev);
    }
    out.reverse();
    out
}

#[derive(Debug, Clone)]
pub struct Rmr {
    epsilon: f64,
    window: usize,
    b: Option<Portfolio>,
    cursor: Cursor,
}

impl Rmr {
    pub fn new(epsilon: f64, window: usize) -> Result<Self> {
        if !(epsilon >= 1.0) {
            return Err(argument(format!("epsilon {epsilon} below 1")));
        }
        if window < 2 {
            return Err(argument(format!("window must be at least 2, got {window}")));
        }
        Ok(Self {
            epsilon,
            window,
            b: None,
            cursor: Cursor::default(),
        })
    }
}

impl Strategy for Rmr {
    fn name(&self) -> String {
        "rmr".into()
    }

    fn reset(&mut self) {
        self.b = None;
        self.cursor.reset();
    }

    fn init(&mut self, m: usize) -> Result<Portfolio> {
        let b = Portfolio::uniform(m);
        self.b = Some(b.clone());
        Ok(b)
    }

    fn decide(&mut self, history: MarketWindow<'_>) -> Result<Portfolio> {
        let m = history.m();
        let mut b = match self.b.take() {
            Some(b) => b,
            None => Portfolio::uniform(m),
        };
        for t in self.cursor.advance(&history)? {
            if t < self.window {
                continue;
            }
            let recent: Vec<&[f64]> = history.sub(t + 2 - self.window, t).rows().collect();
            let xhat = rmr_predict(&relative_prices(&recent, m))?;
            b = reversion_pa_step(&b, &xhat, self.epsilon)?;
        }
        self.b = Some(b.clone());
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_prices_predict_flat() {
        let p = vec![vec![3.0, 5.0]; 4];
        let x = rmr_predict(&p).unwrap();
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn median_pulls_up_a_dipped_asset() {
        let p = vec![vec![4.0, 2.0], vec![4.0, 2.0], vec![1.0, 2.0]];
        let x = rmr_predict(&p).unwrap();
        assert!(x[0] > 1.0);
    }

    #[test]
    fn symmetric_window_symmetric_prediction() {
        let p = vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![1.5, 1.5]];
        let x = rmr_predict(&p).unwrap();
        assert!((x[0] - x[1]).abs() < 1e-8);
    }

    #[test]
    fn prices_from_relatives() {
        let a: &[f64] = &[2.0, 1.0];
        let b: &[f64] = &[0.5, 4.0];
        let p = relative_prices(&[a, b], 2);
        assert_eq!(p, vec![vec![1.0, 0.25], vec![2.0, 0.25], vec![1.0, 1.0]]);
    }
}
