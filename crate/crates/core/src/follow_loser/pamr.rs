//! Passive aggressive mean reversion.

use serde::{Deserialize, Serialize};

use crate::backtest::{Cursor, Strategy};
use crate::error::{argument, Result};
use crate::market::MarketWindow;
use crate::simplex::{project_to_simplex, Portfolio};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PamrVariant {
    Plain,
    /// Step capped at `C`.
    Capped(f64),
    /// `1/(2C)` added to the step denominator.
    Smoothed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PamrSpec {
    pub epsilon: f64,
    pub variant: PamrVariant,
}

impl Default for PamrSpec {
    fn default() -> Self {
        Self {
            epsilon: 0.5,
            variant: PamrVariant::Plain,
        }
    }
}

impl PamrSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(argument(format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        match self.variant {
            PamrVariant::Capped(c) | PamrVariant::Smoothed(c) if !(c > 0.0) => {
                Err(argument(format!("aggressiveness {c} must be positive")))
            }
            _ => Ok(()),
        }
    }
}

/// ε-insensitive loss: `max(0, b·x − ε)`.
pub fn pamr_loss(b: &Portfolio, x: &[f64], eps: f64) -> f64 {
    (b.dot(x) - eps).max(0.0)
}

pub fn pamr_update(b: &Portfolio, x: &[f64], spec: PamrSpec) -> Result<Portfolio> {
    spec.validate()?;
    let loss = pamr_loss(b, x, spec.epsilon);
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let dev: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let norm2: f64 = dev.iter().map(|d| d * d).sum();
    if loss == 0.0 || norm2 == 0.0 {
        return Ok(b.clone());
    }
    let tau = match spec.variant {
        PamrVariant::Plain => loss / norm2,
        PamrVariant::Capped(c) => (loss / norm2).min(c),
        PamrVariant::Smoothed(c) => loss / (norm2 + 0.5 / c),
    };
    let raw: Vec<f64> = b.iter().zip(&dev).map(|(w, d)| w - tau * d).collect();
    project_to_simplex(&raw)
}

#[derive(Debug, Clone)]
pub struct Pamr {
    spec: PamrSpec,
    b: Option<Portfolio>,
    cursor: Cursor,
}

impl Pamr {
    pub fn new(spec: PamrSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            b: None,
            cursor: Cursor::default(),
        })
    }
}

impl Strategy for Pamr {
    fn name(&self) -> String {
        "pamr".into()
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
            b = pamr_update(&b, history.period(t), self.spec)?;
        }
        self.b = Some(b.clone());
        Ok(b)
    }
}
