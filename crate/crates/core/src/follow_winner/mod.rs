//! Strategies that move capital toward assets that have done well.

pub mod ftl;
pub mod gradient;
pub mod ons;
pub mod sp;
pub mod up;

pub use ftl::{expconcave_ftl_decide, follow_leader_decide, ExpConcaveFtl, FollowLeader, FtlVariant};
pub use gradient::{gradient_family_update, GradientMode, GradientStrategy};
pub use ons::{generalized_projection, OnlineNewtonStep, OnsState};
pub use sp::{switching_portfolio_update, SwitchingPortfolio};
pub use up::{dirichlet_samples, simplex_grid, up_wealth_identity, UniversalPortfolio, UpMode, UpPrior, UpSpec};
