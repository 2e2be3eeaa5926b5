//! The truth-table network: low-fan-in binarized filters over the input
//! bits plus a linear head, trained with straight-through gradients.

mod model;
mod train;

pub use model::{
    bits_read, build_model, collect_patch_support, decide, drop_zero_weight_filters,
    target_standardization, HeadMode, LinearHead, LttFilter, Prediction, Standardization,
    TTnetModel, MAX_FAN_IN,
};
pub use train::{
    loss_and_grads, metric_from_scores, ternarize_head, ternarize_row, train, validation_metric,
    ActivationMode, FilterGrads, Hyperparams, ModelGrads, Trained,
};
