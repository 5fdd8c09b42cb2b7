//! Synthetic amplitude-modulation classification task.
//!
//! Each example is `carrier * (1 + 0.9 cos(2 pi rate t + phase))` where the
//! rate identifies the class, so classes differ only in their temporal
//! envelope.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::filterbank::Waveform;

pub const MODULATION_DEPTH: f64 = 0.9;
const TONE_AMPLITUDE: f64 = 0.5;
const NOISE_STD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Carrier {
    Noise,
    Tone,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmTaskSpec {
    pub seed: u64,
    pub n_per_class: usize,
    pub class_rates: Vec<f64>,
    pub duration_s: f64,
    pub carrier: Carrier,
    pub sample_rate: u32,
    /// Tone carrier frequency; ignored for noise.
    pub carrier_hz: f64,
    /// Highest modulation rate the front-end can represent (half its
    /// frame rate).
    pub max_rate_hz: f64,
}

impl Default for AmTaskSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            n_per_class: 200,
            class_rates: vec![4.0, 40.0],
            duration_s: 1.0,
            carrier: Carrier::Tone,
            sample_rate: 16_000,
            carrier_hz: 1000.0,
            max_rate_hz: 800.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub waveform: Waveform,
    pub label: usize,
}

/// Labelled examples with a train/validation/test split. Built either by
/// [`make_am_dataset`] or from caller-supplied audio via
/// [`SyntheticDataset::from_examples`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub examples: Vec<Example>,
    /// Modulation rate of each class; empty for caller-supplied data.
    pub class_rates: Vec<f64>,
    pub class_names: Vec<String>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl SyntheticDataset {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Wraps labelled examples and splits them 70/15/15 per class.
    pub fn from_examples(examples: Vec<Example>, class_names: Vec<String>, seed: u64) -> Result<Self> {
        if let Some(e) = examples.iter().find(|e| e.label >= class_names.len()) {
            return Err(Error::Config(format!(
                "label {} outside {} classes",
                e.label,
                class_names.len()
            )));
        }
        let labels: Vec<usize> = examples.iter().map(|e| e.label).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (train, val, test) = stratified_split(&labels, class_names.len(), &mut rng);
        Ok(Self {
            examples,
            class_rates: Vec::new(),
            class_names,
            train,
            val,
            test,
        })
    }
}

/// Per-class shuffled 70/15/15 split of example indices.
pub fn stratified_split(
    labels: &[usize],
    n_classes: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for c in 0..n_classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(rng);
        let n_train = (0.70 * idx.len() as f64).round() as usize;
        let n_val = ((0.15 * idx.len() as f64).round() as usize).min(idx.len() - n_train);
        train.extend_from_slice(&idx[..n_train]);
        val.extend_from_slice(&idx[n_train..n_train + n_val]);
        test.extend_from_slice(&idx[n_train + n_val..]);
    }
    (train, val, test)
}

/// Builds the seeded dataset with a stratified 70/15/15 split.
pub fn make_am_dataset(spec: &AmTaskSpec) -> Result<SyntheticDataset> {
    if spec.class_rates.is_empty() || spec.n_per_class == 0 {
        return Err(Error::Config("need at least one class and one example per class".into()));
    }
    if spec.duration_s < 1.0 {
        return Err(Error::Config(format!("duration {} s is below 1 s", spec.duration_s)));
    }
    if spec.sample_rate == 0 {
        return Err(Error::Config("sample rate must be positive".into()));
    }
    for &r in &spec.class_rates {
        if !(r > 0.0 && r < spec.max_rate_hz) {
            return Err(Error::Config(format!(
                "modulation rate {r} Hz outside (0, {}) Hz",
                spec.max_rate_hz
            )));
        }
    }
    if spec.carrier == Carrier::Tone && !(spec.carrier_hz > 0.0 && spec.carrier_hz < spec.sample_rate as f64 / 2.0) {
        return Err(Error::Config(format!("carrier {} Hz above Nyquist", spec.carrier_hz)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = (spec.duration_s * spec.sample_rate as f64).round() as usize;
    let sr = spec.sample_rate as f64;
    let normal = Normal::new(0.0, NOISE_STD).expect("valid std");
    let mut examples = Vec::with_capacity(spec.class_rates.len() * spec.n_per_class);
    for (label, &rate) in spec.class_rates.iter().enumerate() {
        for _ in 0..spec.n_per_class {
            let env_phase = rng.gen_range(0.0..2.0 * PI);
            let carrier_phase = rng.gen_range(0.0..2.0 * PI);
            let samples = (0..n)
                .map(|i| {
                    let t = i as f64 / sr;
                    let carrier = match spec.carrier {
                        Carrier::Tone => TONE_AMPLITUDE * (2.0 * PI * spec.carrier_hz * t + carrier_phase).cos(),
                        Carrier::Noise => normal.sample(&mut rng),
                    };
                    carrier * (1.0 + MODULATION_DEPTH * (2.0 * PI * rate * t + env_phase).cos())
                })
                .collect();
            examples.push(Example {
                waveform: Waveform::new(samples, spec.sample_rate)?,
                label,
            });
        }
    }

    let labels: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let (train, val, test) = stratified_split(&labels, spec.class_rates.len(), &mut rng);
    Ok(SyntheticDataset {
        examples,
        class_rates: spec.class_rates.clone(),
        class_names: spec.class_rates.iter().map(|r| format!("{r}hz")).collect(),
        train,
        val,
        test,
    })
}
