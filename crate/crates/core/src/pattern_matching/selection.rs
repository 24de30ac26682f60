//! Choosing past periods whose preceding market window resembles the latest one.

use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};
use crate::market::MarketWindow;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum SelectorMethod {
    /// Same cell of a quantile partition, `bins` cells per coordinate.
    Histogram { bins: usize },
    /// Euclidean distance at most `radius`.
    Kernel { radius: f64 },
    /// The `neighbors` closest windows.
    NearestNeighbor { neighbors: usize },
    /// Pearson correlation at least `rho`.
    Correlation { rho: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorSpec {
    pub method: SelectorMethod,
    pub window: usize,
}

impl SelectorSpec {
    pub fn new(method: SelectorMethod, window: usize) -> Result<Self> {
        let spec = Self { method, window };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(argument("window must be at least 1"));
        }
        match self.method {
            SelectorMethod::Histogram { bins: 0 } => Err(argument("at least one bin is required")),
            SelectorMethod::Kernel { radius } if !(radius > 0.0) => {
                Err(argument(format!("radius {radius} must be positive")))
            }
            SelectorMethod::NearestNeighbor { neighbors: 0 } => {
                Err(argument("at least one neighbor is required"))
            }
            SelectorMethod::Correlation { rho } if !(rho > -1.0 && rho <= 1.0) => {
                Err(argument(format!("correlation threshold {rho} outside (-1, 1]")))
            }
            _ => Ok(()),
        }
    }
}

/// Selected periods (increasing) with equal probabilities.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySet {
    pub indices: Vec<usize>,
    pub probabilities: Vec<f64>,
}

impl SimilaritySet {
    pub fn uniform(indices: Vec<usize>) -> Self {
        let p = 1.0 / indices.len().max(1) as f64;
        Self {
            probabilities: vec![p; indices.len()],
            indices,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }
}

/// Flattened rows `start..=end`.
fn flat(history: &MarketWindow<'_>, start: usize, end: usize) -> Vec<f64> {
    (start..=end).flat_map(|t| history.period(t).iter().copied()).collect()
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Pearson correlation, zero when either vector is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Cut points splitting the pooled observed relatives into `bins` groups of
/// (roughly) equal size.
pub fn quantile_edges(history: &MarketWindow<'_>, bins: usize) -> Vec<f64> {
    let mut all: Vec<f64> = history.rows().flatten().copied().collect();
    all.sort_by(|a, b| a.total_cmp(b));
    (1..bins)
        .map(|k| {
            let pos = k as f64 / bins as f64 * (all.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let frac = pos - lo as f64;
            let hi = (lo + 1).min(all.len() - 1);
            all[lo] + frac * (all[hi] - all[lo])
        })
        .collect()
}

/// Index of the cell containing `v`.
pub fn bin_of(v: f64, edges: &[f64]) -> usize {
    edges.partition_point(|e| *e <= v)
}

pub fn select_samples(history: &MarketWindow<'_>, spec: &SelectorSpec) -> Result<SimilaritySet> {
    spec.validate()?;
    let w = spec.window;
    let t = history.end();
    if history.start() != 1 {
        return Err(argument("selection needs the history from period 1"));
    }
    if t <= w + 1 {
        return Ok(SimilaritySet::default());
    }
    let latest = flat(history, t + 1 - w, t);
    let candidates = w + 1..=t;
    let window_of = |i: usize| flat(history, i - w, i - 1);

    let indices: Vec<usize> = match spec.method {
        SelectorMethod::Histogram { bins } => {
            let edges = quantile_edges(history, bins);
            let key = |v: &[f64]| v.iter().map(|x| bin_of(*x, &edges)).collect::<Vec<_>>();
            let target = key(&latest);
            candidates.filter(|&i| key(&window_of(i)) == target).collect()
        }
        SelectorMethod::Kernel { radius } => candidates
            .filter(|&i| euclidean(&window_of(i), &latest) <= radius)
            .collect(),
        SelectorMethod::NearestNeighbor { neighbors } => {
            let mut scored: Vec<(f64, usize)> = candidates
                .map(|i| (euclidean(&window_of(i), &latest), i))
                .collect();
            scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut chosen: Vec<usize> = scored.into_iter().take(neighbors).map(|(_, i)| i).collect();
            chosen.sort_unstable();
            chosen
        }
        SelectorMethod::Correlation { rho } => candidates
            .filter(|&i| pearson(&window_of(i), &latest) >= rho)
            .collect(),
    };
    Ok(SimilaritySet::uniform(indices))
}
