//! Online portfolio selection: strategies, benchmarks, and a backtest engine.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod benchmarks;
pub mod error;
pub mod follow_loser;
pub mod follow_winner;
pub mod market;
pub mod meta_learning;
pub mod pattern_matching;
pub mod registry;
pub mod simplex;

pub use backtest::{run_backtest, CostSpec, Strategy};
pub use error::{OlpsError, Result};
pub use market::{MarketWindow, PriceRelatives};
pub use simplex::Portfolio;
