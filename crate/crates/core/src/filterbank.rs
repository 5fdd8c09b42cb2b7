//! Sinc band-pass filter bank and the time-frequency decomposition.
//!
//! Cutoffs are stored as normalized frequencies (cycles/sample, Nyquist is
//! 0.5) and only converted to Hz when talking to the outside world.

use std::f64::consts::PI;

use crate::conv;
use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;
pub const DEFAULT_TF_FILTERS: usize = 80;
pub const DEFAULT_TF_KERNEL_LEN: usize = 256;
pub const DEFAULT_TF_STRIDE: usize = 10;
pub const DEFAULT_F_MIN_HZ: f64 = 30.0;

/// Mono audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Config("waveform has no samples".into()));
        }
        if sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Taper applied to sinc kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    None,
    #[default]
    Hamming,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::None => vec![1.0; len],
            Window::Hamming => hamming(len),
        }
    }
}

/// Symmetric Hamming window, unit peak for odd lengths.
pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / denom).cos())
        .collect()
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Centered tap offset, half-integer for even lengths.
#[inline]
pub(crate) fn centered_offset(n: usize, len: usize) -> f64 {
    n as f64 - (len as f64 - 1.0) / 2.0
}

#[inline]
fn lowpass_term(f: f64, offset: f64) -> f64 {
    // 2 f sinc(2 pi f n) with sinc(0) = 1
    if offset == 0.0 {
        2.0 * f
    } else {
        (2.0 * PI * f * offset).sin() / (PI * offset)
    }
}

fn check_cutoffs(f1: f64, f2: f64) -> Result<()> {
    if !(f1.is_finite() && f2.is_finite()) {
        return Err(Error::Parameter(format!("non-finite cutoffs ({f1}, {f2})")));
    }
    if f1 < 0.0 || f2 > 0.5 {
        return Err(Error::Parameter(format!(
            "cutoffs ({f1}, {f2}) outside [0, 0.5] cycles/sample"
        )));
    }
    if f1 > f2 {
        return Err(Error::Parameter(format!("low cutoff {f1} above high cutoff {f2}")));
    }
    Ok(())
}

/// Band-pass kernel `2 f2 sinc(2 pi f2 n) - 2 f1 sinc(2 pi f1 n)` over a
/// centered index, optionally tapered.
///
/// Equal cutoffs give an all-zero kernel; `f1 > f2` is rejected.
pub fn sinc_kernel(f1: f64, f2: f64, kernel_len: usize, window: Window) -> Result<Vec<f64>> {
    check_cutoffs(f1, f2)?;
    if kernel_len < 2 {
        return Err(Error::Config(format!("kernel length {kernel_len} < 2")));
    }
    let w = window.coefficients(kernel_len);
    Ok((0..kernel_len)
        .map(|n| {
            let offset = centered_offset(n, kernel_len);
            (lowpass_term(f2, offset) - lowpass_term(f1, offset)) * w[n]
        })
        .collect())
}

/// Partial derivatives of [`sinc_kernel`] with respect to `f1` and `f2`.
pub fn sinc_kernel_partials(f1: f64, f2: f64, kernel_len: usize, window: Window) -> (Vec<f64>, Vec<f64>) {
    let w = window.coefficients(kernel_len);
    let mut d1 = Vec::with_capacity(kernel_len);
    let mut d2 = Vec::with_capacity(kernel_len);
    for (n, &wn) in w.iter().enumerate() {
        let offset = centered_offset(n, kernel_len);
        d1.push(-2.0 * (2.0 * PI * f1 * offset).cos() * wn);
        d2.push(2.0 * (2.0 * PI * f2 * offset).cos() * wn);
    }
    (d1, d2)
}

/// A bank of learnable band-pass filters plus its convolution geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SincFilterBank {
    cutoffs: Vec<(f64, f64)>,
    pub kernel_len: usize,
    pub stride: usize,
    pub window: Window,
    pub sample_rate: u32,
}

impl SincFilterBank {
    /// Builds a bank from normalized `(f1, f2)` pairs.
    pub fn new(
        cutoffs: Vec<(f64, f64)>,
        kernel_len: usize,
        stride: usize,
        window: Window,
        sample_rate: u32,
    ) -> Result<Self> {
        if cutoffs.is_empty() {
            return Err(Error::Config("filter bank needs at least one filter".into()));
        }
        if kernel_len < 2 {
            return Err(Error::Config(format!("kernel length {kernel_len} < 2")));
        }
        if stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        if sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        for (k, &(f1, f2)) in cutoffs.iter().enumerate() {
            if !(f1 >= 0.0 && f1 < f2 && f2 <= 0.5) {
                return Err(Error::Config(format!(
                    "filter {k}: cutoffs ({f1}, {f2}) violate 0 <= f1 < f2 <= 0.5"
                )));
            }
        }
        Ok(Self {
            cutoffs,
            kernel_len,
            stride,
            window,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cutoffs.is_empty()
    }

    pub fn cutoffs(&self) -> &[(f64, f64)] {
        &self.cutoffs
    }

    pub fn cutoffs_hz(&self) -> Vec<(f64, f64)> {
        let sr = self.sample_rate as f64;
        self.cutoffs.iter().map(|&(a, b)| (a * sr, b * sr)).collect()
    }

    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / self.stride as f64
    }

    pub fn kernels(&self) -> Vec<Vec<f64>> {
        self.cutoffs
            .iter()
            .map(|&(f1, f2)| {
                sinc_kernel(f1, f2, self.kernel_len, self.window).expect("bank invariants hold")
            })
            .collect()
    }
}

/// Mel-spaced initialization.
///
/// `num_filters + 1` edges are placed uniformly on the mel scale between
/// `f_min` and `f_max`; filter `k` spans `[edge_k, edge_{k+2}]`, where edges
/// past the last one continue the mel spacing and are clipped to Nyquist.
pub fn mel_init(num_filters: usize, sample_rate: u32, f_min: f64, f_max: f64) -> Result<SincFilterBank> {
    mel_init_with(
        num_filters,
        sample_rate,
        f_min,
        f_max,
        DEFAULT_TF_KERNEL_LEN,
        DEFAULT_TF_STRIDE,
        Window::Hamming,
    )
}

pub fn mel_init_with(
    num_filters: usize,
    sample_rate: u32,
    f_min: f64,
    f_max: f64,
    kernel_len: usize,
    stride: usize,
    window: Window,
) -> Result<SincFilterBank> {
    if num_filters == 0 {
        return Err(Error::Config("need at least one filter".into()));
    }
    if sample_rate == 0 {
        return Err(Error::Config("sample rate must be positive".into()));
    }
    let nyquist = sample_rate as f64 / 2.0;
    if !(f_min >= 0.0 && f_min < f_max && f_max <= nyquist) {
        return Err(Error::Config(format!(
            "invalid mel range [{f_min}, {f_max}] Hz for Nyquist {nyquist} Hz"
        )));
    }
    let edges = mel_edges(num_filters, f_min, f_max);
    let step = (hz_to_mel(f_max) - hz_to_mel(f_min)) / num_filters as f64;
    let edge = |i: usize| -> f64 {
        if i < edges.len() {
            edges[i]
        } else {
            mel_to_hz(hz_to_mel(f_min) + step * i as f64).min(nyquist)
        }
    };
    let sr = sample_rate as f64;
    let cutoffs = (0..num_filters)
        .map(|k| (edge(k) / sr, edge(k + 2).min(nyquist) / sr))
        .collect();
    SincFilterBank::new(cutoffs, kernel_len, stride, window, sample_rate)
}

/// `num_filters + 1` mel-equispaced edges in Hz; endpoints are exact.
pub fn mel_edges(num_filters: usize, f_min: f64, f_max: f64) -> Vec<f64> {
    let lo = hz_to_mel(f_min);
    let hi = hz_to_mel(f_max);
    let step = (hi - lo) / num_filters as f64;
    (0..=num_filters)
        .map(|i| {
            if i == 0 {
                f_min
            } else if i == num_filters {
                f_max
            } else {
                mel_to_hz(lo + step * i as f64)
            }
        })
        .collect()
}

/// Output of the filter bank: one row per band, `K x T` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFrequencyMap {
    pub values: Vec<f64>,
    pub n_bands: usize,
    pub n_frames: usize,
    pub frame_rate: f64,
    pub band_edges_hz: Vec<(f64, f64)>,
}

impl TimeFrequencyMap {
    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.n_frames..(k + 1) * self.n_frames]
    }
}

/// Valid strided convolution of the waveform with every kernel of the bank.
pub fn tf_decompose(x: &Waveform, bank: &SincFilterBank) -> Result<TimeFrequencyMap> {
    let kernels = bank.kernels();
    let (values, n_frames) = convolve_bank(x.samples(), &kernels, bank.stride)?;
    Ok(TimeFrequencyMap {
        values,
        n_bands: kernels.len(),
        n_frames,
        frame_rate: x.sample_rate() as f64 / bank.stride as f64,
        band_edges_hz: bank.cutoffs_hz(),
    })
}

pub(crate) fn convolve_bank(samples: &[f64], kernels: &[Vec<f64>], stride: usize) -> Result<(Vec<f64>, usize)> {
    let kernel_len = kernels.first().map_or(0, Vec::len);
    let n_frames = conv::output_len(samples.len(), kernel_len, stride).ok_or(Error::InputTooShort {
        len: samples.len(),
        needed: kernel_len,
    })?;
    let mut values = vec![0.0; kernels.len() * n_frames];
    for (row, kernel) in values.chunks_mut(n_frames).zip(kernels) {
        conv::convolve_valid(samples, kernel, stride, row);
    }
    Ok((values, n_frames))
}

/// Pointwise nonlinearity applied after the filter bank (r1) or after the
/// modulation layer (r2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    Relu,
    AbsSquared,
    None,
}

impl Nonlinearity {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Nonlinearity::Relu => v.max(0.0),
            Nonlinearity::AbsSquared => v * v,
            Nonlinearity::None => v,
        }
    }

    /// Derivative at the pre-activation value `v` (zero at the ReLU kink).
    #[inline]
    pub fn derivative(self, v: f64) -> f64 {
        match self {
            Nonlinearity::Relu => {
                if v > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Nonlinearity::AbsSquared => 2.0 * v,
            Nonlinearity::None => 1.0,
        }
    }
}

pub fn rectify_values(values: &mut [f64], mode: Nonlinearity) {
    if mode == Nonlinearity::None {
        return;
    }
    for v in values.iter_mut() {
        *v = mode.apply(*v);
    }
}

pub trait Rectify: Sized {
    fn rectify(self, mode: Nonlinearity) -> Self;
}

impl Rectify for TimeFrequencyMap {
    fn rectify(mut self, mode: Nonlinearity) -> Self {
        rectify_values(&mut self.values, mode);
        self
    }
}
