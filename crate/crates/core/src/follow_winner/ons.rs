//! Online Newton step.

use nalgebra::{DMatrix, DVector};

use crate::backtest::{Cursor, Strategy};
use crate::error::{argument, OlpsError, Result};
use crate::market::MarketWindow;
use crate::simplex::{maximize_on_simplex, project_to_simplex, Portfolio, SimplexObjective, SolverOptions};

#[derive(Debug, Clone)]
pub struct OnsState {
    pub a: DMatrix<f64>,
    pub p: DVector<f64>,
    pub beta: f64,
    pub delta: f64,
}

impl OnsState {
    pub fn new(m: usize, beta: f64, delta: f64) -> Result<Self> {
        if !(beta > 0.0) || !(delta > 0.0) {
            return Err(argument(format!("beta {beta} and delta {delta} must be positive")));
        }
        Ok(Self {
            a: DMatrix::identity(m, m),
            p: DVector::zeros(m),
            beta,
            delta,
        })
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    /// Adds `x xᵀ/(b·x)²` to `A` and `(1 + 1/β) x/(b·x)` to `p`.
    pub fn accumulate(&mut self, b: &Portfolio, x: &[f64]) -> Result<()> {
        let r = b.dot(x);
        if !(r > 0.0) {
            return Err(argument("period return must be positive"));
        }
        let g = DVector::from_iterator(x.len(), x.iter().map(|v| v / r));
        self.a += &g * g.transpose();
        self.p += &g * (1.0 + 1.0 / self.beta);
        Ok(())
    }

    /// `Π^A(δ A⁻¹ p)`.
    pub fn decide(&self) -> Result<Portfolio> {
        let chol = self
            .a
            .clone()
            .cholesky()
            .ok_or_else(|| OlpsError::Numeric("second-order matrix lost definiteness".into()))?;
        let target = chol.solve(&self.p) * self.delta;
        generalized_projection(&self.a, target.as_slice())
    }
}

struct Quadratic<'a> {
    a: &'a DMatrix<f64>,
    center: &'a [f64],
}

impl SimplexObjective for Quadratic<'_> {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, q: &[f64]) -> f64 {
        let d = DVector::from_iterator(q.len(), q.iter().zip(self.center).map(|(a, b)| a - b));
        -(d.transpose() * self.a * &d)[(0, 0)]
    }

    fn gradient(&self, q: &[f64], grad: &mut [f64]) {
        let d = DVector::from_iterator(q.len(), q.iter().zip(self.center).map(|(a, b)| a - b));
        let ad = self.a * d;
        for (g, v) in grad.iter_mut().zip(ad.iter()) {
            *g = -2.0 * v;
        }
    }
}

/// `argmin_{q ∈ Δ} (q − y)ᵀ A (q − y)` for symmetric positive definite `A`.
pub fn generalized_projection(a: &DMatrix<f64>, y: &[f64]) -> Result<Portfolio> {
    if a.nrows() != y.len() || a.ncols() != y.len() {
        return Err(OlpsError::Shape("matrix and point disagree in size".into()));
    }
    let start = project_to_simplex(y)?;
    let obj = Quadratic { a, center: y };
    let opts = SolverOptions {
        tol: 1e-10,
        ..SolverOptions::default()
    };
    match maximize_on_simplex(&obj, &start, opts) {
        Ok(b) => Ok(b),
        Err(OlpsError::Convergence { best, .. }) => Ok(Portfolio::new_unchecked(best)),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone)]
pub struct OnlineNewtonStep {
    beta: f64,
    delta: f64,
    state: Option<OnsState>,
    b: Option<Portfolio>,
    cursor: Cursor,
}

impl OnlineNewtonStep {
    pub fn new(beta: f64, delta: f64) -> Result<Self> {
        OnsState::new(1, beta, delta)?;
        Ok(Self {
            beta,
            delta,
            state: None,
            b: None,
            cursor: Cursor::default(),
        })
    }

    pub fn state(&self) -> Option<&OnsState> {
        self.state.as_ref()
    }
}

impl Default for OnlineNewtonStep {
    fn default() -> Self {
        Self::new(1.0, 0.125).expect("valid defaults")
    }
}

impl Strategy for OnlineNewtonStep {
    fn name(&self) -> String {
        "ons".into()
    }

    fn reset(&mut self) {
        self.state = None;
        self.b = None;
        self.cursor.reset();
    }

    fn init(&mut self, m: usize) -> Result<Portfolio> {
        self.state = Some(OnsState::new(m, self.beta, self.delta)?);
        let b = Portfolio::uniform(m);
        self.b = Some(b.clone());
        Ok(b)
    }

    fn decide(&mut self, history: MarketWindow<'_>) -> Result<Portfolio> {
        if self.state.is_none() {
            self.init(history.m())?;
        }
        let state = self.state.as_mut().unwrap();
        let mut b = self.b.take().unwrap();
        for t in self.cursor.advance(&history)? {
            state.accumulate(&b, history.period(t))?;
            b = state.decide()?;
        }
        self.b = Some(b.clone());
        Ok(b)
    }
}
