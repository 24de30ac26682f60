//! Confidence weighted mean reversion with a diagonal Gaussian over portfolios.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::backtest::{Cursor, Strategy};
use crate::error::{argument, OlpsError, Result};
use crate::market::MarketWindow;
use crate::simplex::{project_to_simplex, Portfolio};

const LAMBDA_MAX: f64 = 1e6;
const MAX_WIDENINGS: usize = 90;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPortfolio {
    pub mu: Portfolio,
    /// Diagonal covariance entries.
    pub sigma: Vec<f64>,
}

impl GaussianPortfolio {
    /// Uniform mean, `Σ = diag(1/m²)`.
    pub fn initial(m: usize) -> Self {
        Self {
            mu: Portfolio::uniform(m),
            sigma: vec![1.0 / (m * m) as f64; m],
        }
    }
}

/// `Φ⁻¹(θ)`.
pub fn confidence_to_phi(theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(argument(format!("confidence {theta} outside (0, 1)")));
    }
    Ok(Normal::standard().inverse_cdf(theta))
}

fn residual(g: &GaussianPortfolio, x: &[f64], xbar: f64, eps: f64, phi: f64, lambda: f64) -> f64 {
    let mut mean_return = 0.0;
    let mut variance = 0.0;
    for ((mu, s), xi) in g.mu.iter().zip(&g.sigma).zip(x) {
        mean_return += (mu - lambda * s * (xi - xbar)) * xi;
        let s_new = 1.0 / (1.0 / s + 2.0 * lambda * phi * xi * xi);
        variance += s_new * xi * xi;
    }
    eps - mean_return - phi * variance
}

/// One step: the smallest `λ ≥ 0` making `ε − μ'ᵀx ≥ φ xᵀΣ'x` hold.
pub fn cwmr_update(g: &GaussianPortfolio, x: &[f64], eps: f64, phi: f64) -> Result<GaussianPortfolio> {
    if !(phi >= 0.0) {
        return Err(argument(format!("phi must be non-negative, got {phi}")));
    }
    if g.sigma.iter().any(|s| !(*s > 0.0)) {
        return Err(argument("covariance entries must be positive"));
    }
    let s_total: f64 = g.sigma.iter().sum();
    let xbar = g.sigma.iter().zip(x).map(|(s, xi)| s * xi).sum::<f64>() / s_total;
    let spread: f64 = g.sigma.iter().zip(x).map(|(s, xi)| s * (xi - xbar).powi(2)).sum();
    if spread <= 1e-15 * s_total {
        return Ok(g.clone());
    }
    if residual(g, x, xbar, eps, phi, 0.0) >= 0.0 {
        return Ok(g.clone());
    }
    let (mut lo, mut hi) = (0.0, LAMBDA_MAX);
    // shrunken variances can push the root past the initial bracket
    let mut widenings = 0;
    while residual(g, x, xbar, eps, phi, hi) < 0.0 {
        if widenings == MAX_WIDENINGS {
            return Err(OlpsError::Convergence {
                solver: "confidence weighted step",
                iterations: widenings,
                best: g.mu.weights().to_vec(),
            });
        }
        lo = hi;
        hi *= 1e3;
        widenings += 1;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if residual(g, x, xbar, eps, phi, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi.max(1.0) {
            break;
        }
    }
    let lambda = hi;
    let mu: Vec<f64> = g
        .mu
        .iter()
        .zip(&g.sigma)
        .zip(x)
        .map(|((mu, s), xi)| mu - lambda * s * (xi - xbar))
        .collect();
    let sigma = g
        .sigma
        .iter()
        .zip(x)
        .map(|(s, xi)| 1.0 / (1.0 / s + 2.0 * lambda * phi * xi * xi))
        .collect();
    Ok(GaussianPortfolio {
        mu: project_to_simplex(&mu)?,
        sigma,
    })
}

#[derive(Debug, Clone)]
pub struct Cwmr {
    epsilon: f64,
    phi: f64,
    state: Option<GaussianPortfolio>,
    cursor: Cursor,
}

impl Cwmr {
    pub fn new(epsilon: f64, phi: f64) -> Result<Self> {
        if !(phi >= 0.0) || !epsilon.is_finite() {
            return Err(argument(format!("invalid epsilon {epsilon} or phi {phi}")));
        }
        Ok(Self {
            epsilon,
            phi,
            state: None,
            cursor: Cursor::default(),
        })
    }

    pub fn with_confidence(epsilon: f64, theta: f64) -> Result<Self> {
        Self::new(epsilon, confidence_to_phi(theta)?)
    }

    pub fn state(&self) -> Option<&GaussianPortfolio> {
        self.state.as_ref()
    }
}

impl Strategy for Cwmr {
    fn name(&self) -> String {
        "cwmr".into()
    }

    fn reset(&mut self) {
        self.state = None;
        self.cursor.reset();
    }

    fn init(&mut self, m: usize) -> Result<Portfolio> {
        let g = GaussianPortfolio::initial(m);
        let b = g.mu.clone();
        self.state = Some(g);
        Ok(b)
    }

    fn decide(&mut self, history: MarketWindow<'_>) -> Result<Portfolio> {
        let mut g = match self.state.take() {
            Some(g) => g,
            None => GaussianPortfolio::initial(history.m()),
        };
        for t in self.cursor.advance(&history)? {
            g = cwmr_update(&g, history.period(t), self.epsilon, self.phi)?;
        }
        let b = g.mu.clone();
        self.state = Some(g);
        Ok(b)
    }
}
