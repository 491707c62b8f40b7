//! Score-based turbo message passing for `y = Ax + n` with Gaussian-mixture
//! priors, whose scores are available in closed form.

pub mod error;
pub mod harness;
pub mod linops;
pub mod lmmse;
pub mod messages;
pub mod metrics;
pub mod priors;
pub mod quadrature;
pub mod rng;
pub mod score;
pub mod stmp;

pub use error::{Error, Result};
pub use linops::{LinearOperator, Operator};
pub use lmmse::{LmmseBackend, LmmseProblem};
pub use messages::{DampingPolicy, GaussianMessage};
pub use priors::GmmPrior;
pub use score::{
    AffineScore, AnalyticGmmScore, AnalyticGmmTrace, ConstantTrace, ScoreModel, TraceScoreModel,
    ZeroScore,
};
pub use stmp::{run_stmp, se_predict, StmpConfig, StmpOutcome, StmpTrace};
