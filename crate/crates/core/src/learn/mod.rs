//! Training the front-end end to end.
//!
//! [`model`] runs the full stack (filter bank, first nonlinearity,
//! modulation filtering or max pooling, second nonlinearity, normalization,
//! time averaging, linear head) and its analytic backward pass. [`optim`]
//! holds Adam, the plateau learning-rate schedule and early stopping;
//! [`data`] builds the synthetic amplitude-modulation task and [`train`]
//! ties them together.

pub mod data;
pub mod model;
pub mod optim;
pub mod params;
pub mod train;

pub use data::{make_am_dataset, stratified_split, AmTaskSpec, Carrier, Example, SyntheticDataset};
pub use model::{
    backward, bce_with_logits, forward, ForwardCache, FrontEndConfig, ModMode, Normalization,
};
pub use optim::{adam_step, early_stop, lr_schedule, AdamConfig, Schedule, TrainState};
pub use params::{project_constraints, ModParams, ParamVector, MIN_BAND_WIDTH};
pub use train::{evaluate, train, EpochRecord, EvalSummary, Split, TrainAbort, TrainConfig, TrainOutcome};
