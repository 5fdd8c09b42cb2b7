//! Learnable modulation front-end for audio.
//!
//! The pipeline is a bank of sinc band-pass filters applied to the raw
//! waveform ([`filterbank`]), followed by a temporal modulation filter layer
//! whose filters are shared across every frequency band ([`modulation`]).
//! [`learn`] provides analytic gradients through the whole stack, Adam with
//! plateau halving and early stopping, and a synthetic amplitude-modulation
//! task. [`metrics`] implements the multi-label ROC-AUC / PR-AUC reporting.

pub mod conv;
pub mod error;
pub mod filterbank;
pub mod learn;
pub mod metrics;
pub mod modulation;

pub use error::{Error, Result};
pub use filterbank::{
    mel_init, rectify_values, sinc_kernel, tf_decompose, Nonlinearity, Rectify, SincFilterBank,
    TimeFrequencyMap, Waveform, Window,
};
pub use modulation::{
    freq_response, hamming_fir_init, instance_norm, linear_sinc_init, max_pool_baseline,
    mod_filter, weight_norm, ModFilterMeta, ModVariant, ModulationLayer, ModulationTensor,
};
