//! Moving-average reversion and the shared passive aggressive step.

use crate::backtest::{Cursor, Strategy};
use crate::error::{argument, Result};
use crate::market::MarketWindow;
use crate::simplex::{project_to_simplex, Portfolio};

/// Predicted next relative from the most recent relatives (oldest first):
/// `x̂_i = (1/w) Σ_{k<w} 1 / Π_{j<k} x_{t−j,i}`. Uses every available row
/// when fewer than `w − 1` are given.
pub fn olmar_predict(recent: &[&[f64]], w: usize, m: usize) -> Result<Vec<f64>> {
    if w == 0 {
        return Err(argument("window must be at least 1"));
    }
    let mut xhat = vec![1.0; m];
    let mut inv = vec![1.0; m];
    let terms = w.min(recent.len() + 1);
    for x in recent.iter().rev().take(terms - 1) {
        for i in 0..m {
            inv[i] /= x[i];
            xhat[i] += inv[i];
        }
    }
    Ok(xhat.into_iter().map(|v| v / terms as f64).collect())
}

/// Smallest Euclidean move making `b·x̂ ≥ ε`, followed by projection.
pub fn reversion_pa_step(b: &Portfolio, xhat: &[f64], eps: f64) -> Result<Portfolio> {
    let value = b.dot(xhat);
    if value >= eps {
        return Ok(b.clone());
    }
    let mean = xhat.iter().sum::<f64>() / xhat.len() as f64;
    let dev: Vec<f64> = xhat.iter().map(|v| v - mean).collect();
    let norm2: f64 = dev.iter().map(|d| d * d).sum();
    if norm2 == 0.0 {
        return Ok(b.clone());
    }
    let tau = (eps - value) / norm2;
    let raw: Vec<f64> = b.iter().zip(&dev).map(|(w, d)| w + tau * d).collect();
    project_to_simplex(&raw)
}

#[derive(Debug, Clone)]
pub struct Olmar {
    epsilon: f64,
    window: usize,
    b: Option<Portfolio>,
    cursor: Cursor,
}

impl Olmar {
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

impl Strategy for Olmar {
    fn name(&self) -> String {
        "olmar".into()
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
            let xhat = olmar_predict(&recent, self.window, m)?;
            b = reversion_pa_step(&b, &xhat, self.epsilon)?;
        }
        self.b = Some(b.clone());
        Ok(b)
    }
}
