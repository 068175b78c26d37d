pub mod checkpoint;
pub mod gradcheck;
pub mod model;
pub mod optim;
pub mod train;

pub use gradcheck::{grad_check, GradCheckReport};
pub use model::{cs_gnn_layer, gine_branch, pool, CsGnn, GraphInput, InputEncoder, ModelConfig, Pooling};
pub use optim::Adam;
pub use train::{evaluate, prepare, train, train_prepared, EpochMetrics, TrainConfig, TrainReport};
