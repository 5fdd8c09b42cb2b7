//! Flat `key = value` configuration covering every knob of the front-end,
//! the optimizer, the synthetic task and windowed analysis.

use std::fmt::Write as _;
use std::path::Path;

use modfront_core::learn::{AmTaskSpec, Carrier, FrontEndConfig, ModMode, Normalization, TrainConfig};
use modfront_core::{Nonlinearity, Window};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub sample_rate: u32,
    pub n_bands: usize,
    pub tf_kernel_len: usize,
    pub tf_stride: usize,
    pub tf_window: Window,
    pub f_min: f64,
    pub f_max: f64,
    pub r1: Nonlinearity,
    pub r2: Nonlinearity,
    pub variant: ModMode,
    pub n_mod: usize,
    pub mod_kernel_len: usize,
    pub mod_stride: usize,
    pub mod_window: Window,
    pub mod_f_lo: f64,
    pub mod_f_hi: f64,
    pub norm: Normalization,
    pub norm_affine: bool,
    pub epsilon: f64,
    pub init_seed: u64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub train_seed: u64,
    pub train_front_end: bool,
    pub data_seed: u64,
    pub n_per_class: usize,
    pub class_rates: Vec<f64>,
    pub duration: f64,
    pub carrier: Carrier,
    pub carrier_hz: f64,
    pub analysis_window: f64,
    pub analysis_hop: f64,
}

/// Every accepted key with a one-line description, in file order.
pub const KEYS: &[(&str, &str)] = &[
    ("sample_rate", "audio sample rate in Hz"),
    ("n_bands", "number of sinc band-pass filters"),
    ("tf_kernel_len", "band-pass kernel length in samples"),
    ("tf_stride", "band-pass convolution stride in samples"),
    ("tf_window", "band-pass kernel window: hamming | none"),
    ("f_min", "lowest mel edge in Hz"),
    ("f_max", "highest mel edge in Hz"),
    ("r1", "nonlinearity after the filter bank: relu | abs_squared | none"),
    ("r2", "nonlinearity after modulation filtering: relu | abs_squared | none"),
    ("variant", "modulation stage: sinc | fir | maxpool"),
    ("n_mod", "number of modulation filters"),
    ("mod_kernel_len", "modulation kernel (or pooling window) length in frames"),
    ("mod_stride", "modulation stride in frames"),
    ("mod_window", "window of sinc modulation kernels: hamming | none"),
    ("mod_f_lo", "lowest linear modulation edge in Hz"),
    ("mod_f_hi", "highest linear modulation edge in Hz"),
    ("norm", "modulation normalization: instance | weight"),
    ("norm_affine", "learnable scale and shift after instance norm: true | false"),
    ("epsilon", "instance-norm variance floor"),
    ("init_seed", "seed of the classifier head initialization"),
    ("lr", "initial Adam learning rate"),
    ("batch_size", "examples per update"),
    ("epochs", "maximum training epochs"),
    ("train_seed", "seed of the per-epoch shuffles"),
    ("train_front_end", "update filter parameters as well as the head: true | false"),
    ("data_seed", "seed of the synthetic task and of the split"),
    ("n_per_class", "synthetic examples per class"),
    ("class_rates", "comma-separated modulation rate of each synthetic class in Hz"),
    ("duration", "synthetic example length in seconds"),
    ("carrier", "synthetic carrier: tone | noise"),
    ("carrier_hz", "tone carrier frequency in Hz"),
    ("analysis_window", "analysis window length in seconds"),
    ("analysis_hop", "hop between analysis windows in seconds"),
];

impl Default for Config {
    fn default() -> Self {
        let fe = FrontEndConfig::default();
        let tc = TrainConfig::default();
        let task = AmTaskSpec::default();
        Self {
            sample_rate: fe.sample_rate,
            n_bands: fe.n_bands,
            tf_kernel_len: fe.tf_kernel_len,
            tf_stride: fe.tf_stride,
            tf_window: fe.tf_window,
            f_min: fe.f_min,
            f_max: fe.f_max,
            r1: fe.r1,
            r2: fe.r2,
            variant: fe.mode,
            n_mod: fe.n_mod,
            mod_kernel_len: fe.mod_kernel_len,
            mod_stride: fe.mod_stride,
            mod_window: fe.mod_window,
            mod_f_lo: fe.mod_f_lo,
            mod_f_hi: fe.mod_f_hi,
            norm: fe.norm,
            norm_affine: fe.norm_affine,
            epsilon: fe.epsilon,
            init_seed: 7,
            lr: tc.lr,
            batch_size: tc.batch_size,
            epochs: tc.max_epochs,
            train_seed: tc.seed,
            train_front_end: tc.train_front_end,
            data_seed: task.seed,
            n_per_class: task.n_per_class,
            class_rates: task.class_rates,
            duration: task.duration_s,
            carrier: task.carrier,
            carrier_hz: task.carrier_hz,
            analysis_window: 5.0,
            analysis_hop: 2.5,
        }
    }
}

fn bad(key: &str, value: &str, expected: &str) -> CliError {
    CliError::Config(format!("{key}: cannot parse '{value}' as {expected}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value.parse().map_err(|_| bad(key, value, "a number"))
}

fn flag(key: &str, value: &str) -> CliResult<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, value, "true or false")),
    }
}

fn window(key: &str, value: &str) -> CliResult<Window> {
    match value {
        "hamming" => Ok(Window::Hamming),
        "none" => Ok(Window::None),
        _ => Err(bad(key, value, "hamming or none")),
    }
}

fn nonlinearity(key: &str, value: &str) -> CliResult<Nonlinearity> {
    match value {
        "relu" => Ok(Nonlinearity::Relu),
        "abs_squared" => Ok(Nonlinearity::AbsSquared),
        "none" => Ok(Nonlinearity::None),
        _ => Err(bad(key, value, "relu, abs_squared or none")),
    }
}

fn window_name(w: Window) -> &'static str {
    match w {
        Window::Hamming => "hamming",
        Window::None => "none",
    }
}

pub fn nonlinearity_name(r: Nonlinearity) -> &'static str {
    match r {
        Nonlinearity::Relu => "relu",
        Nonlinearity::AbsSquared => "abs_squared",
        Nonlinearity::None => "none",
    }
}

pub fn variant_name(v: ModMode) -> &'static str {
    match v {
        ModMode::Sinc => "sinc",
        ModMode::Fir => "fir",
        ModMode::MaxPool => "maxpool",
    }
}

impl Config {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let v = value.trim();
        match key {
            "sample_rate" => self.sample_rate = num(key, v)?,
            "n_bands" => self.n_bands = num(key, v)?,
            "tf_kernel_len" => self.tf_kernel_len = num(key, v)?,
            "tf_stride" => self.tf_stride = num(key, v)?,
            "tf_window" => self.tf_window = window(key, v)?,
            "f_min" => self.f_min = num(key, v)?,
            "f_max" => self.f_max = num(key, v)?,
            "r1" => self.r1 = nonlinearity(key, v)?,
            "r2" => self.r2 = nonlinearity(key, v)?,
            "variant" => {
                self.variant = match v {
                    "sinc" => ModMode::Sinc,
                    "fir" => ModMode::Fir,
                    "maxpool" => ModMode::MaxPool,
                    _ => return Err(bad(key, v, "sinc, fir or maxpool")),
                }
            }
            "n_mod" => self.n_mod = num(key, v)?,
            "mod_kernel_len" => self.mod_kernel_len = num(key, v)?,
            "mod_stride" => self.mod_stride = num(key, v)?,
            "mod_window" => self.mod_window = window(key, v)?,
            "mod_f_lo" => self.mod_f_lo = num(key, v)?,
            "mod_f_hi" => self.mod_f_hi = num(key, v)?,
            "norm" => {
                self.norm = match v {
                    "instance" => Normalization::Instance,
                    "weight" => Normalization::Weight,
                    _ => return Err(bad(key, v, "instance or weight")),
                }
            }
            "norm_affine" => self.norm_affine = flag(key, v)?,
            "epsilon" => self.epsilon = num(key, v)?,
            "init_seed" => self.init_seed = num(key, v)?,
            "lr" => self.lr = num(key, v)?,
            "batch_size" => self.batch_size = num(key, v)?,
            "epochs" => self.epochs = num(key, v)?,
            "train_seed" => self.train_seed = num(key, v)?,
            "train_front_end" => self.train_front_end = flag(key, v)?,
            "data_seed" => self.data_seed = num(key, v)?,
            "n_per_class" => self.n_per_class = num(key, v)?,
            "class_rates" => {
                self.class_rates = v
                    .split(',')
                    .map(|r| num(key, r.trim()))
                    .collect::<CliResult<Vec<f64>>>()?
            }
            "duration" => self.duration = num(key, v)?,
            "carrier" => {
                self.carrier = match v {
                    "tone" => Carrier::Tone,
                    "noise" => Carrier::Noise,
                    _ => return Err(bad(key, v, "tone or noise")),
                }
            }
            "carrier_hz" => self.carrier_hz = num(key, v)?,
            "analysis_window" => self.analysis_window = num(key, v)?,
            "analysis_hop" => self.analysis_hop = num(key, v)?,
            _ => return Err(CliError::Config(format!("unknown configuration key '{key}'"))),
        }
        Ok(())
    }

    /// Textual value of `key` as written by [`Config::to_text`].
    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "sample_rate" => self.sample_rate.to_string(),
            "n_bands" => self.n_bands.to_string(),
            "tf_kernel_len" => self.tf_kernel_len.to_string(),
            "tf_stride" => self.tf_stride.to_string(),
            "tf_window" => window_name(self.tf_window).into(),
            "f_min" => self.f_min.to_string(),
            "f_max" => self.f_max.to_string(),
            "r1" => nonlinearity_name(self.r1).into(),
            "r2" => nonlinearity_name(self.r2).into(),
            "variant" => variant_name(self.variant).into(),
            "n_mod" => self.n_mod.to_string(),
            "mod_kernel_len" => self.mod_kernel_len.to_string(),
            "mod_stride" => self.mod_stride.to_string(),
            "mod_window" => window_name(self.mod_window).into(),
            "mod_f_lo" => self.mod_f_lo.to_string(),
            "mod_f_hi" => self.mod_f_hi.to_string(),
            "norm" => match self.norm {
                Normalization::Instance => "instance".into(),
                Normalization::Weight => "weight".into(),
            },
            "norm_affine" => self.norm_affine.to_string(),
            "epsilon" => self.epsilon.to_string(),
            "init_seed" => self.init_seed.to_string(),
            "lr" => self.lr.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "epochs" => self.epochs.to_string(),
            "train_seed" => self.train_seed.to_string(),
            "train_front_end" => self.train_front_end.to_string(),
            "data_seed" => self.data_seed.to_string(),
            "n_per_class" => self.n_per_class.to_string(),
            "class_rates" => self
                .class_rates
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(","),
            "duration" => self.duration.to_string(),
            "carrier" => match self.carrier {
                Carrier::Tone => "tone".into(),
                Carrier::Noise => "noise".into(),
            },
            "carrier_hz" => self.carrier_hz.to_string(),
            "analysis_window" => self.analysis_window.to_string(),
            "analysis_hop" => self.analysis_hop.to_string(),
            _ => return None,
        })
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are
    /// ignored; unknown or repeated keys are errors.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = Config::default();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(CliError::Config(format!("line {}: key '{key}' repeated", n + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| CliError::Config(format!("line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    /// Canonical form: every key in [`KEYS`] order. The digest is taken over
    /// this text, so equal configurations always hash equally.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, _) in KEYS {
            writeln!(out, "{key} = {}", self.get(key).expect("listed key")).unwrap();
        }
        out
    }

    /// Canonical text with each key's description as a comment.
    pub fn to_annotated_text(&self) -> String {
        let mut out = String::new();
        for (key, doc) in KEYS {
            writeln!(out, "# {doc}").unwrap();
            writeln!(out, "{key} = {}", self.get(key).expect("listed key")).unwrap();
        }
        out
    }

    /// Lowercase hex SHA-256 of [`Config::to_text`].
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_text().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn front_end(&self, n_classes: usize) -> FrontEndConfig {
        FrontEndConfig {
            sample_rate: self.sample_rate,
            n_bands: self.n_bands,
            tf_kernel_len: self.tf_kernel_len,
            tf_stride: self.tf_stride,
            tf_window: self.tf_window,
            f_min: self.f_min,
            f_max: self.f_max,
            r1: self.r1,
            r2: self.r2,
            mode: self.variant,
            n_mod: self.n_mod,
            mod_kernel_len: self.mod_kernel_len,
            mod_stride: self.mod_stride,
            mod_window: self.mod_window,
            mod_f_lo: self.mod_f_lo,
            mod_f_hi: self.mod_f_hi,
            norm: self.norm,
            norm_affine: self.norm_affine,
            epsilon: self.epsilon,
            n_classes,
        }
    }

    pub fn training(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            batch_size: self.batch_size,
            max_epochs: self.epochs,
            seed: self.train_seed,
            train_front_end: self.train_front_end,
        }
    }

    pub fn task(&self) -> AmTaskSpec {
        AmTaskSpec {
            seed: self.data_seed,
            n_per_class: self.n_per_class,
            class_rates: self.class_rates.clone(),
            duration_s: self.duration,
            carrier: self.carrier,
            sample_rate: self.sample_rate,
            carrier_hz: self.carrier_hz,
            max_rate_hz: self.sample_rate as f64 / self.tf_stride.max(1) as f64 / 2.0,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.front_end(self.class_rates.len().max(1)).validate()?;
        if !(self.lr > 0.0) || self.batch_size == 0 {
            return Err(CliError::Config("lr and batch_size must be positive".into()));
        }
        if self.class_rates.is_empty() {
            return Err(CliError::Config("class_rates needs at least one rate".into()));
        }
        if !(self.analysis_window > 0.0 && self.analysis_hop > 0.0) {
            return Err(CliError::Config("analysis window and hop must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_text_round_trips() {
        let mut cfg = Config::default();
        cfg.set("variant", "fir").unwrap();
        cfg.set("class_rates", "4, 40, 100").unwrap();
        let back = Config::parse(&cfg.to_annotated_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.digest(), cfg.digest());
        assert_ne!(Config::default().digest(), cfg.digest());
    }

    #[test]
    fn rejects_unknown_repeated_and_malformed_keys() {
        for text in ["n_band = 3", "lr = 1\nlr = 2", "r1 = tanh", "just text", "n_bands = -1"] {
            assert!(matches!(Config::parse(text), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn validation_runs_on_load() {
        let err = Config::parse("f_min = 9000").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn every_key_is_settable() {
        let cfg = Config::default();
        for (key, _) in KEYS {
            let mut c = Config::default();
            c.set(key, &cfg.get(key).unwrap()).unwrap();
            assert_eq!(c, cfg, "{key}");
        }
    }
}
