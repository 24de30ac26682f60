//! One-step updates that move toward the last period's winners: EG, GP and EM.

use serde::{Deserialize, Serialize};

use crate::backtest::{Cursor, Strategy};
use crate::error::{argument, Result};
use crate::market::MarketWindow;
use crate::simplex::{project_to_simplex, Portfolio};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientMode {
    /// Exponentiated gradient.
    Eg,
    /// Gradient projection.
    Gp,
    /// Expectation maximization.
    Em,
}

impl GradientMode {
    pub fn name(self) -> &'static str {
        match self {
            GradientMode::Eg => "eg",
            GradientMode::Gp => "gp",
            GradientMode::Em => "em",
        }
    }
}

pub fn gradient_family_update(b: &Portfolio, x: &[f64], eta: f64, mode: GradientMode) -> Result<Portfolio> {
    if !(eta > 0.0) {
        return Err(argument(format!("learning rate must be positive, got {eta}")));
    }
    let r = b.dot(x);
    if !(r > 0.0) {
        return Err(argument("period return must be positive"));
    }
    let rel: Vec<f64> = x.iter().map(|xi| xi / r).collect();
    match mode {
        GradientMode::Eg => {
            // shift the exponent by its max so large η cannot overflow
            let top = rel.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let raw: Vec<f64> = b
                .iter()
                .zip(&rel)
                .map(|(bi, g)| bi * (eta * (g - top)).exp())
                .collect();
            let z: f64 = raw.iter().sum();
            Ok(Portfolio::new_unchecked(raw.into_iter().map(|v| v / z).collect()))
        }
        GradientMode::Gp => {
            let mean = rel.iter().sum::<f64>() / rel.len() as f64;
            let raw: Vec<f64> = b.iter().zip(&rel).map(|(bi, g)| bi + eta * (g - mean)).collect();
            settle(raw)
        }
        GradientMode::Em => {
            let raw: Vec<f64> = b.iter().zip(&rel).map(|(bi, g)| bi * (eta * (g - 1.0) + 1.0)).collect();
            settle(raw)
        }
    }
}

fn settle(raw: Vec<f64>) -> Result<Portfolio> {
    if raw.iter().any(|v| *v < 0.0) {
        project_to_simplex(&raw)
    } else {
        let s: f64 = raw.iter().sum();
        Ok(Portfolio::new_unchecked(raw.into_iter().map(|v| v / s).collect()))
    }
}

#[derive(Debug, Clone)]
pub struct GradientStrategy {
    mode: GradientMode,
    eta: f64,
    b: Option<Portfolio>,
    cursor: Cursor,
}

impl GradientStrategy {
    pub fn new(mode: GradientMode, eta: f64) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(argument(format!("learning rate must be positive, got {eta}")));
        }
        Ok(Self {
            mode,
            eta,
            b: None,
            cursor: Cursor::default(),
        })
    }
}

impl Strategy for GradientStrategy {
    fn name(&self) -> String {
        self.mode.name().into()
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
        for t in self.cursor.advance(&history)? {
            b = gradient_family_update(&b, history.period(t), self.eta, self.mode)?;
        }
        self.b = Some(b.clone());
        Ok(b)
    }
}
