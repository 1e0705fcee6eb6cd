//! From-scratch neural network: dense matrices, z-score scaling, the MLP
//! with Adam training, ReliefF ranking, k-fold grid selection, and the
//! versioned model file.

mod matrix;
pub mod cv;
pub mod mlp;
pub mod model_file;
pub mod relieff;
mod scaler;

pub use matrix::Matrix;
pub use mlp::{argmax, train, MlpModel, StageTag, TrainConfig};
pub use model_file::{load_model, save_model};
pub use relieff::{relieff_rank, ReliefRanking};
pub use scaler::Scaler;
