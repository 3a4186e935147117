//! Cross-entropy loss, SGD with momentum, step decay, early stopping and the
//! epoch loop.

mod loss;
mod optim;
mod trainer;

pub use loss::cross_entropy;
pub use optim::{early_stop_check, lr_at_epoch, Sgd};
pub use trainer::{
    evaluate, predict, prepare_eval, train_loop, EpochRecord, Evaluation, PreparedSplit, TrainConfig, TrainData,
    TrainOutcome, TrainingLog,
};
