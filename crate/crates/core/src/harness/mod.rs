//! Configuration, file formats, synthetic problems and experiment drivers
//! behind the command-line tool.

pub mod config;
pub mod denoiser;
pub mod fit;
pub mod problem;
pub mod recover;
pub mod sweep;
pub mod tensor_file;
pub mod verify;

pub use config::{DenoiserKind, ExperimentConfig, NoiseScale, OperatorKind};
pub use denoiser::{Denoiser, FittedModel};
pub use problem::{generate, ProblemSpec, SyntheticProblem};
pub use recover::{recover_to_dir, run_recovery, Recovery};
pub use sweep::{cell_seed, run_sweep, write_sweep, SweepReport};
pub use tensor_file::Tensor;
