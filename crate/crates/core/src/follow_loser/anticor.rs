//! Anticor: transfers capital along positive lagged cross-correlations
//! from recent winners to recent losers.

use crate::backtest::{Cursor, Strategy};
use crate::error::{argument, Result};
use crate::market::MarketWindow;
use crate::simplex::Portfolio;

/// Correlation between column `i` of `y1` and column `j` of `y2`, and the
/// column means of `y2`. A zero standard deviation gives zero correlation.
pub fn lagged_correlation(y1: &[Vec<f64>], y2: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let w = y1.len();
    if w < 2 || y2.len() != w {
        return Err(argument(format!(
            "windows must share a length of at least 2, got {} and {}",
            y1.len(),
            y2.len()
        )));
    }
    let m = y1[0].len();
    let stats = |y: &[Vec<f64>]| {
        let mean: Vec<f64> = (0..m).map(|i| y.iter().map(|r| r[i]).sum::<f64>() / w as f64).collect();
        let sd: Vec<f64> = (0..m)
            .map(|i| (y.iter().map(|r| (r[i] - mean[i]).powi(2)).sum::<f64>() / (w - 1) as f64).sqrt())
            .collect();
        (mean, sd)
    };
    let (mean1, sd1) = stats(y1);
    let (mean2, sd2) = stats(y2);
    let mut cor = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            if sd1[i] == 0.0 || sd2[j] == 0.0 {
                continue;
            }
            let cov = y1
                .iter()
                .zip(y2)
                .map(|(a, b)| (a[i] - mean1[i]) * (b[j] - mean2[j]))
                .sum::<f64>()
                / (w - 1) as f64;
            cor[i][j] = cov / (sd1[i] * sd2[j]);
        }
    }
    Ok((cor, mean2))
}

/// Claims from a correlation matrix and the recent-window means.
pub fn claims_from_correlation(cor: &[Vec<f64>], mean2: &[f64]) -> Vec<Vec<f64>> {
    let m = mean2.len();
    let mut claims = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            if i != j && mean2[i] > mean2[j] && cor[i][j] > 0.0 {
                claims[i][j] = cor[i][j] - cor[i][i].min(0.0) - cor[j][j].min(0.0);
            }
        }
    }
    claims
}

/// Transfer claims between assets from two consecutive log-relative windows.
pub fn anticor_claims(y1: &[Vec<f64>], y2: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let (cor, mean2) = lagged_correlation(y1, y2)?;
    Ok(claims_from_correlation(&cor, &mean2))
}

/// Moves `b̂_i · claim(i→j) / Σ_k claim(i→k)` from asset `i` to asset `j`.
pub fn anticor_update(b_hat: &Portfolio, claims: &[Vec<f64>]) -> Portfolio {
    let m = b_hat.len();
    let mut b = b_hat.weights().to_vec();
    for i in 0..m {
        let total: f64 = claims[i].iter().sum();
        if total <= 0.0 {
            continue;
        }
        for j in 0..m {
            let transfer = b_hat[i] * claims[i][j] / total;
            b[i] -= transfer;
            b[j] += transfer;
        }
    }
    Portfolio::mixture(m, [(1.0, &Portfolio::new_unchecked(b))])
}

#[derive(Debug, Clone)]
pub struct Anticor {
    window: usize,
    b: Option<Portfolio>,
    cursor: Cursor,
}

impl Anticor {
    pub fn new(window: usize) -> Result<Self> {
        if window < 2 {
            return Err(argument(format!("window must be at least 2, got {window}")));
        }
        Ok(Self {
            window,
            b: None,
            cursor: Cursor::default(),
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }
}

impl Strategy for Anticor {
    fn name(&self) -> String {
        format!("anticor(w={})", self.window)
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
        let mut b = match self.b.take() {
            Some(b) => b,
            None => Portfolio::uniform(history.m()),
        };
        let w = self.window;
        for t in self.cursor.advance(&history)? {
            let b_hat = b.price_adjusted(history.period(t));
            b = if t >= 2 * w {
                let logs = |a: usize, z: usize| -> Vec<Vec<f64>> {
                    (a..=z).map(|s| history.period(s).iter().map(|v| v.ln()).collect()).collect()
                };
                let y1 = logs(t + 1 - 2 * w, t - w);
                let y2 = logs(t + 1 - w, t);
                anticor_update(&b_hat, &anticor_claims(&y1, &y2)?)
            } else {
                b_hat
            };
        }
        self.b = Some(b.clone());
        Ok(b)
    }
}
