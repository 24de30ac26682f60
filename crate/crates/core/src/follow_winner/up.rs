//! Universal portfolios: a wealth-weighted average over a discretized
//! population of constant rebalanced portfolios.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::backtest::{Cursor, Strategy};
use crate::error::{argument, OlpsError, Result};
use crate::market::{MarketWindow, PriceRelatives};
use crate::simplex::Portfolio;

const MAX_GRID_NODES: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpMode {
    /// Grid for up to three assets, sampling beyond.
    Auto,
    Grid,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpPrior {
    Uniform,
    DirichletHalf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpSpec {
    pub mode: UpMode,
    pub grid_step: f64,
    pub samples: usize,
    pub seed: u64,
    pub prior: UpPrior,
}

impl Default for UpSpec {
    fn default() -> Self {
        Self {
            mode: UpMode::Auto,
            grid_step: 0.05,
            samples: 10_000,
            seed: 0,
            prior: UpPrior::Uniform,
        }
    }
}

impl UpSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.grid_step > 0.0 && self.grid_step <= 1.0) {
            return Err(argument(format!("grid step {} outside (0, 1]", self.grid_step)));
        }
        if self.samples == 0 {
            return Err(argument("at least one sample is required"));
        }
        if self.mode == UpMode::Grid && self.prior == UpPrior::DirichletHalf {
            return Err(argument("the Dirichlet(1/2) prior is only available by sampling"));
        }
        Ok(())
    }

    fn uses_grid(&self, m: usize) -> bool {
        match self.mode {
            UpMode::Grid => true,
            UpMode::MonteCarlo => false,
            UpMode::Auto => m <= 3 && self.prior == UpPrior::Uniform,
        }
    }

    /// Nodes of the discretized prior, each with equal weight.
    pub fn nodes(&self, m: usize) -> Result<Vec<Portfolio>> {
        self.validate()?;
        if m == 0 {
            return Err(argument("no assets"));
        }
        if self.uses_grid(m) {
            let k = (1.0 / self.grid_step).round() as usize;
            if ((k as f64) * self.grid_step - 1.0).abs() > 1e-9 {
                return Err(argument(format!(
                    "grid step {} does not divide 1",
                    self.grid_step
                )));
            }
            simplex_grid(m, k.max(1))
        } else {
            let alpha = match self.prior {
                UpPrior::Uniform => 1.0,
                UpPrior::DirichletHalf => 0.5,
            };
            Ok(dirichlet_samples(m, self.samples, alpha, self.seed))
        }
    }
}

/// All portfolios whose weights are multiples of `1/k`.
pub fn simplex_grid(m: usize, k: usize) -> Result<Vec<Portfolio>> {
    let mut count: f64 = 1.0;
    for i in 1..m {
        count *= (k + i) as f64 / i as f64;
    }
    if count > MAX_GRID_NODES as f64 {
        return Err(argument(format!(
            "grid with {m} assets and step 1/{k} has {count:.0} nodes; use sampling"
        )));
    }
    let mut out = Vec::with_capacity(count.round() as usize);
    let mut parts = vec![0usize; m];
    fill(&mut parts, 0, k, k, &mut out);
    Ok(out)
}

fn fill(parts: &mut [usize], i: usize, left: usize, k: usize, out: &mut Vec<Portfolio>) {
    if i + 1 == parts.len() {
        parts[i] = left;
        out.push(Portfolio::new_unchecked(
            parts.iter().map(|&p| p as f64 / k as f64).collect(),
        ));
        return;
    }
    for p in (0..=left).rev() {
        parts[i] = p;
        fill(parts, i + 1, left - p, k, out);
    }
}

/// Symmetric Dirichlet draws via normalized Gamma variates.
pub fn dirichlet_samples(m: usize, count: usize, alpha: f64, seed: u64) -> Vec<Portfolio> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gamma = Gamma::new(alpha, 1.0).expect("positive shape");
    (0..count)
        .map(|_| loop {
            let g: Vec<f64> = (0..m).map(|_| gamma.sample(&mut rng)).collect();
            let s: f64 = g.iter().sum();
            if s > 0.0 && s.is_finite() {
                break Portfolio::new_unchecked(g.into_iter().map(|v| v / s).collect());
            }
        })
        .collect()
}

/// Mean final wealth of the node population, `Σ_k S_n(b_k) / K`.
pub fn up_wealth_identity(seq: &PriceRelatives, nodes: &[Portfolio]) -> Result<f64> {
    if nodes.is_empty() {
        return Err(argument("empty node set"));
    }
    let logs: Vec<f64> = nodes
        .iter()
        .map(|b| seq.rows().map(|x| b.dot(x).ln()).sum())
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = logs.iter().map(|l| (l - top).exp()).sum::<f64>() / nodes.len() as f64;
    Ok(top.exp() * mean)
}

#[derive(Debug, Clone)]
pub struct UniversalPortfolio {
    spec: UpSpec,
    nodes: Vec<Portfolio>,
    log_wealth: Vec<f64>,
    cursor: Cursor,
}

impl UniversalPortfolio {
    pub fn new(spec: UpSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec,
            nodes: Vec::new(),
            log_wealth: Vec::new(),
            cursor: Cursor::default(),
        })
    }

    /// Uses the given nodes instead of the spec's discretization.
    pub fn with_nodes(nodes: Vec<Portfolio>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(argument("empty node set"));
        }
        let mut up = Self::new(UpSpec::default())?;
        up.log_wealth = vec![0.0; nodes.len()];
        up.nodes = nodes;
        Ok(up)
    }

    fn combine(&self) -> Result<Portfolio> {
        let top = self
            .log_wealth
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if !top.is_finite() {
            return Err(OlpsError::Numeric("all node wealths vanished".into()));
        }
        let m = self.nodes[0].len();
        let weights = self.log_wealth.iter().map(|l| (l - top).exp());
        Ok(Portfolio::mixture(m, weights.zip(&self.nodes)))
    }
}

impl Strategy for UniversalPortfolio {
    fn name(&self) -> String {
        "up".into()
    }

    fn reset(&mut self) {
        self.log_wealth.iter_mut().for_each(|l| *l = 0.0);
        self.cursor.reset();
    }

    fn init(&mut self, m: usize) -> Result<Portfolio> {
        if self.nodes.first().map(|b| b.len()) != Some(m) {
            self.nodes = self.spec.nodes(m)?;
        }
        self.log_wealth = vec![0.0; self.nodes.len()];
        self.combine()
    }

    fn decide(&mut self, history: MarketWindow<'_>) -> Result<Portfolio> {
        if self.log_wealth.len() != self.nodes.len() || self.nodes.is_empty() {
            self.init(history.m())?;
        }
        for t in self.cursor.advance(&history)? {
            let x = history.period(t);
            for (l, b) in self.log_wealth.iter_mut().zip(&self.nodes) {
                *l += b.dot(x).ln();
            }
        }
        self.combine()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backtest::{run_backtest, CostSpec};
    use crate::market::{synthetic_cg86, synthetic_iid};

    fn three_nodes() -> Vec<Portfolio> {
        simplex_grid(2, 2).unwrap()
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(simplex_grid(2, 2).unwrap().len(), 3);
        assert_eq!(simplex_grid(3, 20).unwrap().len(), 231);
        for b in simplex_grid(3, 4).unwrap() {
            assert!(b.check(3).is_ok());
        }
        assert!(simplex_grid(30, 20).is_err());
    }

    #[test]
    fn first_decision_uniform() {
        let mut up = UniversalPortfolio::new(UpSpec::default()).unwrap();
        let b = up.init(3).unwrap();
        for w in b.iter() {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn three_node_cg86_decision() {
        let seq = synthetic_cg86(2).unwrap();
        let mut up = UniversalPortfolio::with_nodes(three_nodes()).unwrap();
        up.init(2).unwrap();
        let b = up.decide(seq.full()).unwrap();
        // (1·(1,0) + 9/8·(1/2,1/2) + 1·(0,1)) / (25/8)
        let first = (1.0 + 9.0 / 16.0) / (25.0 / 8.0);
        assert!((b[0] - first).abs() < 1e-14);
        assert!((up_wealth_identity(&seq, &three_nodes()).unwrap() - 25.0 / 24.0).abs() < 1e-14);
    }

    #[test]
    fn single_node_is_crp() {
        let seq = synthetic_iid(3, 20, 2, 0.5, 1.5).unwrap();
        let b = Portfolio::new(vec![0.2, 0.3, 0.5]).unwrap();
        let mut up = UniversalPortfolio::with_nodes(vec![b.clone()]).unwrap();
        let r = run_backtest(&mut up, &seq, CostSpec::zero()).unwrap();
        for p in &r.portfolios {
            assert!(p.distance(&b) < 1e-15);
        }
        let flat = PriceRelatives::new(vec![vec![1.0, 1.0]; 3]).unwrap();
        assert!((up_wealth_identity(&flat, &three_nodes()).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn backtest_matches_identity() {
        for seed in 0..5 {
            let seq = synthetic_iid(3, 60, seed, 0.5, 1.5).unwrap();
            let spec = UpSpec::default();
            let nodes = spec.nodes(3).unwrap();
            let mut up = UniversalPortfolio::new(spec).unwrap();
            let r = run_backtest(&mut up, &seq, CostSpec::zero()).unwrap();
            let id = up_wealth_identity(&seq, &nodes).unwrap();
            assert!((r.final_wealth() / id - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let spec = UpSpec {
            mode: UpMode::MonteCarlo,
            samples: 50,
            prior: UpPrior::DirichletHalf,
            seed: 7,
            ..UpSpec::default()
        };
        let a = spec.nodes(4).unwrap();
        assert_eq!(a, spec.nodes(4).unwrap());
        for b in &a {
            assert!(b.check(4).is_ok());
        }
        let grid_half = UpSpec {
            mode: UpMode::Grid,
            prior: UpPrior::DirichletHalf,
            ..UpSpec::default()
        };
        assert!(grid_half.validate().is_err());
    }
}
