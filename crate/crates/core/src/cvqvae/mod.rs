//! Vector-quantized autoencoder with pseudo-class and interaction heads.
//!
//! The model is a pair of tanh MLPs around a nearest-neighbor codebook.
//! Gradients are derived by hand; the quantization step passes its
//! gradient straight through from the decoder input to the encoder output.
//! Codebook rows are updated by their own gradient term, and codes whose
//! moving usage falls below a threshold are re-seeded from recent encoder
//! outputs after each epoch.

pub mod checkpoint;
pub mod data;
pub mod gradcheck;
pub mod loss;
pub mod model;
pub mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use data::{scenario_sample, scenario_set};
pub use gradcheck::{grad_check, toy_problem, GradCheckOptions, GradCheckReport};
pub use loss::{batch_loss, Batch, Frozen, LossBreakdown, LossWeights, Sample};
pub use model::{nearest_code, Dense, ModelConfig, ModelDims, ModelParams, Weights};
pub use train::{
    dims_for, evaluate_loss, train, train_from, write_history_csv, EpochRecord, Optimizer, SampleSet,
    TrainConfig, TrainOutcome,
};
