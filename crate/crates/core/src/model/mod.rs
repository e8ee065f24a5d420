//! The full network, its optimizer, training loop and checkpoints.

mod ablation;
mod adam;
mod checkpoint;
mod network;
mod params;
mod train;

pub use ablation::Mode;
pub use adam::{clip_global_norm, Adam};
pub use checkpoint::Checkpoint;
pub use network::{
    decide, encode_news, encode_side, forward, loss, predict, probabilities, AttentionReport,
    ForwardOutput, Prediction, LOG_FLOOR,
};
pub use params::{ModelParams, WordEncoderParams};
pub use train::{evaluate, train, EpochLog, Evaluation, StepStats, TrainOutcome, Trainer};
