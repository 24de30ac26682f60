//! Portfolio optimization over the selected similar periods.

use serde::{Deserialize, Serialize};

use crate::backtest::{cost_factor_from_holdings, CostSpec};
use crate::error::{argument, OlpsError, Result};
use crate::market::MarketWindow;
use crate::simplex::{
    dot, log_optimal_default, maximize_on_simplex, Portfolio, ScenarioSet, SimplexObjective, SolverOptions,
};

use super::selection::SimilaritySet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum UtilitySpec {
    LogOptimal,
    SemiLog,
    Markowitz { lambda: f64 },
    /// Log return net of proportional rebalancing costs.
    Gv { costs: CostSpec },
}

impl UtilitySpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            UtilitySpec::Markowitz { lambda } if !(*lambda >= 0.0) => {
                Err(argument(format!("lambda {lambda} must be non-negative")))
            }
            _ => Ok(()),
        }
    }
}

/// Second-order expansion of `log z` around 1.
pub fn semi_log(z: f64) -> f64 {
    z - 1.0 - 0.5 * (z - 1.0) * (z - 1.0)
}

struct SemiLogObjective<'a>(&'a ScenarioSet);

impl SimplexObjective for SemiLogObjective<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, b: &[f64]) -> f64 {
        self.0
            .scenarios()
            .iter()
            .zip(self.0.probabilities())
            .map(|(x, p)| p * semi_log(dot(b, x)))
            .sum()
    }
    fn gradient(&self, b: &[f64], grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (x, p) in self.0.scenarios().iter().zip(self.0.probabilities()) {
            let d = p * (2.0 - dot(b, x));
            for (g, xi) in grad.iter_mut().zip(x) {
                *g += d * xi;
            }
        }
    }
}

struct MeanVariance<'a> {
    scen: &'a ScenarioSet,
    lambda: f64,
}

impl MeanVariance<'_> {
    fn moments(&self, b: &[f64]) -> (f64, f64) {
        let mut e = 0.0;
        let mut e2 = 0.0;
        for (x, p) in self.scen.scenarios().iter().zip(self.scen.probabilities()) {
            let r = dot(b, x);
            e += p * r;
            e2 += p * r * r;
        }
        (e, e2)
    }
}

impl SimplexObjective for MeanVariance<'_> {
    fn dim(&self) -> usize {
        self.scen.dim()
    }
    fn value(&self, b: &[f64]) -> f64 {
        let (e, e2) = self.moments(b);
        e - self.lambda * (e2 - e * e)
    }
    fn gradient(&self, b: &[f64], grad: &mut [f64]) {
        let (e, _) = self.moments(b);
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (x, p) in self.scen.scenarios().iter().zip(self.scen.probabilities()) {
            let r = dot(b, x);
            let d = p * (1.0 - 2.0 * self.lambda * (r - e));
            for (g, xi) in grad.iter_mut().zip(x) {
                *g += d * xi;
            }
        }
    }
}

/// `Σ P_i (log b·x_i + log c(b_prev, b, x_i))`, where `c` is the fraction kept
/// when moving from `b_prev` drifted by `x_i` into `b`.
pub(crate) struct NetOfCosts<'a> {
    pub scen: &'a ScenarioSet,
    pub b_prev: &'a Portfolio,
    pub costs: CostSpec,
}

impl NetOfCosts<'_> {
    fn held(&self, x: &[f64]) -> Portfolio {
        self.b_prev.price_adjusted(x)
    }
}

impl SimplexObjective for NetOfCosts<'_> {
    fn dim(&self) -> usize {
        self.scen.dim()
    }

    fn value(&self, b: &[f64]) -> f64 {
        let mut v = 0.0;
        for (x, p) in self.scen.scenarios().iter().zip(self.scen.probabilities()) {
            let c = match cost_factor_from_holdings(&self.held(x), b, self.costs) {
                Ok(c) => c,
                Err(_) => return f64::NAN,
            };
            v += p * (dot(b, x).ln() + c.ln());
        }
        v
    }

    fn gradient(&self, b: &[f64], grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (gs, gb) = (self.costs.gamma_sell, self.costs.gamma_buy);
        for (x, p) in self.scen.scenarios().iter().zip(self.scen.probabilities()) {
            let r = dot(b, x);
            let held = self.held(x);
            let c = cost_factor_from_holdings(&held, b, self.costs).unwrap_or(1.0);
            // implicit differentiation of the cost equation g(c, b) = 0
            let mut dg_dc = 1.0;
            let mut dg_db = vec![0.0; b.len()];
            for i in 0..b.len() {
                let d = b[i] * c - held[i];
                if d > 0.0 {
                    dg_dc += gb * b[i];
                    dg_db[i] = gb * c;
                } else if d < 0.0 {
                    dg_dc -= gs * b[i];
                    dg_db[i] = -gs * c;
                }
            }
            for i in 0..b.len() {
                let dlogc = -dg_db[i] / dg_dc / c;
                grad[i] += p * (x[i] / r + dlogc);
            }
        }
    }
}

/// Maximizes the chosen utility over the selected periods; uniform when none were selected.
pub fn optimize_utility(
    c: &SimilaritySet,
    history: &MarketWindow<'_>,
    utility: &UtilitySpec,
    b_prev: &Portfolio,
) -> Result<Portfolio> {
    utility.validate()?;
    let m = history.m();
    if c.is_empty() {
        return Ok(Portfolio::uniform(m));
    }
    let scen = ScenarioSet::new(
        c.indices.iter().map(|&i| history.period(i).to_vec()).collect(),
        c.probabilities.clone(),
    )?;
    let start = Portfolio::uniform(m);
    match utility {
        UtilitySpec::LogOptimal => log_optimal_default(&scen),
        UtilitySpec::SemiLog => maximize_on_simplex(&SemiLogObjective(&scen), &start, SolverOptions::default()),
        UtilitySpec::Markowitz { lambda } => maximize_on_simplex(
            &MeanVariance { scen: &scen, lambda: *lambda },
            &start,
            SolverOptions::default(),
        ),
        UtilitySpec::Gv { costs } => {
            if b_prev.len() != m {
                return Err(OlpsError::Shape("previous portfolio has the wrong size".into()));
            }
            let obj = NetOfCosts {
                scen: &scen,
                b_prev,
                costs: *costs,
            };
            // the cost term has kinks, so accept the best iterate of a bounded run
            let opts = SolverOptions {
                tol: 1e-9,
                max_iter: 500,
            };
            match maximize_on_simplex(&obj, b_prev, opts) {
                Err(OlpsError::Convergence { best, .. }) => Ok(Portfolio::new_unchecked(best)),
                other => other,
            }
        }
    }
}
