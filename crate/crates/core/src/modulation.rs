//! Temporal modulation filtering shared across frequency bands.
//!
//! Every band of a [`TimeFrequencyMap`] is convolved with the same `M`
//! filters, producing an `M x K x T'` [`ModulationTensor`]. Filters are
//! either free FIR taps or sinc band-passes whose cutoffs are normalized to
//! the frame rate of the incoming map.

use std::f64::consts::PI;

use crate::conv;
use crate::error::{Error, Result};
use crate::filterbank::{hamming, sinc_kernel, Nonlinearity, Rectify, TimeFrequencyMap, Window};

pub const DEFAULT_MOD_FILTERS: usize = 20;
pub const DEFAULT_MOD_KERNEL_LEN: usize = 128;
pub const DEFAULT_MOD_STRIDE: usize = 160;
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Number of Hamming slots used by [`hamming_fir_init`].
const FIR_SLOTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModVariant {
    Fir,
    Sinc,
}

#[derive(Debug, Clone, PartialEq)]
enum Filters {
    Fir(Vec<Vec<f64>>),
    Sinc(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulationLayer {
    filters: Filters,
    pub kernel_len: usize,
    pub stride: usize,
    pub window: Window,
    pub frame_rate: f64,
}

impl ModulationLayer {
    pub fn fir(taps: Vec<Vec<f64>>, stride: usize, frame_rate: f64) -> Result<Self> {
        let kernel_len = taps.first().map_or(0, Vec::len);
        if taps.iter().any(|t| t.len() != kernel_len) {
            return Err(Error::Shape("FIR filters differ in length".into()));
        }
        Self::validate(taps.len(), kernel_len, stride, frame_rate)?;
        Ok(Self {
            filters: Filters::Fir(taps),
            kernel_len,
            stride,
            window: Window::None,
            frame_rate,
        })
    }

    pub fn sinc(
        cutoffs: Vec<(f64, f64)>,
        kernel_len: usize,
        stride: usize,
        window: Window,
        frame_rate: f64,
    ) -> Result<Self> {
        Self::validate(cutoffs.len(), kernel_len, stride, frame_rate)?;
        for (m, &(f1, f2)) in cutoffs.iter().enumerate() {
            if !(f1 >= 0.0 && f1 < f2 && f2 <= 0.5) {
                return Err(Error::Config(format!(
                    "modulation filter {m}: cutoffs ({f1}, {f2}) violate 0 <= f1 < f2 <= 0.5"
                )));
            }
        }
        Ok(Self {
            filters: Filters::Sinc(cutoffs),
            kernel_len,
            stride,
            window,
            frame_rate,
        })
    }

    fn validate(m: usize, kernel_len: usize, stride: usize, frame_rate: f64) -> Result<()> {
        if m == 0 {
            return Err(Error::Config("need at least one modulation filter".into()));
        }
        if kernel_len < 2 {
            return Err(Error::Config(format!("modulation kernel length {kernel_len} < 2")));
        }
        if stride == 0 {
            return Err(Error::Config("modulation stride must be at least 1".into()));
        }
        if !(frame_rate > 0.0) {
            return Err(Error::Config("frame rate must be positive".into()));
        }
        Ok(())
    }

    pub fn variant(&self) -> ModVariant {
        match self.filters {
            Filters::Fir(_) => ModVariant::Fir,
            Filters::Sinc(_) => ModVariant::Sinc,
        }
    }

    pub fn len(&self) -> usize {
        match &self.filters {
            Filters::Fir(t) => t.len(),
            Filters::Sinc(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cutoffs(&self) -> Option<&[(f64, f64)]> {
        match &self.filters {
            Filters::Sinc(c) => Some(c),
            Filters::Fir(_) => None,
        }
    }

    /// Materialized impulse responses, one per filter.
    pub fn kernels(&self) -> Vec<Vec<f64>> {
        match &self.filters {
            Filters::Fir(t) => t.clone(),
            Filters::Sinc(c) => c
                .iter()
                .map(|&(f1, f2)| {
                    sinc_kernel(f1, f2, self.kernel_len, self.window).expect("layer invariants hold")
                })
                .collect(),
        }
    }

    fn meta(&self) -> Vec<ModFilterMeta> {
        match &self.filters {
            Filters::Fir(t) => (0..t.len()).map(|index| ModFilterMeta::Fir { index }).collect(),
            Filters::Sinc(c) => c
                .iter()
                .map(|&(f1, f2)| ModFilterMeta::Band {
                    f1_hz: f1 * self.frame_rate,
                    f2_hz: f2 * self.frame_rate,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModFilterMeta {
    Band { f1_hz: f64, f2_hz: f64 },
    Fir { index: usize },
    MaxPool { kernel: usize },
}

impl ModFilterMeta {
    pub fn center_hz(&self) -> Option<f64> {
        match *self {
            ModFilterMeta::Band { f1_hz, f2_hz } => Some(0.5 * (f1_hz + f2_hz)),
            _ => None,
        }
    }
}

/// `M x K x T'` row-major tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ModulationTensor {
    pub values: Vec<f64>,
    pub n_filters: usize,
    pub n_bands: usize,
    pub n_frames: usize,
    pub frame_rate_out: f64,
    pub mod_meta: Vec<ModFilterMeta>,
}

impl ModulationTensor {
    pub fn channel(&self, m: usize) -> &[f64] {
        let n = self.n_bands * self.n_frames;
        &self.values[m * n..(m + 1) * n]
    }

    pub fn row(&self, m: usize, k: usize) -> &[f64] {
        let start = (m * self.n_bands + k) * self.n_frames;
        &self.values[start..start + self.n_frames]
    }
}

impl Rectify for ModulationTensor {
    fn rectify(mut self, mode: Nonlinearity) -> Self {
        crate::filterbank::rectify_values(&mut self.values, mode);
        self
    }
}

/// Hamming bumps of length `floor(kernel_len / 5)` placed in one of five
/// non-overlapping slots; slot `s` starts at `round(s * kernel_len / 5)` and
/// filter `m` uses slot `m mod 5`.
pub fn hamming_fir_init(m: usize, kernel_len: usize) -> Result<Vec<Vec<f64>>> {
    if m == 0 {
        return Err(Error::Config("need at least one FIR filter".into()));
    }
    if kernel_len < 2 * FIR_SLOTS {
        return Err(Error::Config(format!(
            "FIR kernel length {kernel_len} too short for {FIR_SLOTS} Hamming slots"
        )));
    }
    let width = kernel_len / FIR_SLOTS;
    let bump = hamming(width);
    Ok((0..m)
        .map(|i| {
            let start = hamming_slot_start(i % FIR_SLOTS, kernel_len);
            let mut taps = vec![0.0; kernel_len];
            taps[start..start + width].copy_from_slice(&bump);
            taps
        })
        .collect())
}

pub fn hamming_slot_start(slot: usize, kernel_len: usize) -> usize {
    ((slot * kernel_len) as f64 / FIR_SLOTS as f64).round() as usize
}

/// `m` band-passes with edges linearly spaced over `[f_lo, f_hi]` Hz,
/// returned normalized to `frame_rate`.
pub fn linear_sinc_init(m: usize, frame_rate: f64, f_lo: f64, f_hi: f64) -> Result<Vec<(f64, f64)>> {
    if m == 0 {
        return Err(Error::Config("need at least one modulation filter".into()));
    }
    if !(frame_rate > 0.0 && f_lo >= 0.0 && f_lo < f_hi && f_hi <= frame_rate / 2.0) {
        return Err(Error::Config(format!(
            "invalid modulation range [{f_lo}, {f_hi}] Hz for frame rate {frame_rate} Hz"
        )));
    }
    let step = (f_hi - f_lo) / m as f64;
    let edge = |i: usize| if i == m { f_hi } else { f_lo + step * i as f64 };
    Ok((0..m)
        .map(|i| (edge(i) / frame_rate, edge(i + 1) / frame_rate))
        .collect())
}

/// Convolves every band of `values` (`K x T`) with each kernel, producing
/// `M x K x T'`.
pub(crate) fn filter_bands(
    values: &[f64],
    n_bands: usize,
    n_frames: usize,
    kernels: &[Vec<f64>],
    stride: usize,
) -> Result<(Vec<f64>, usize)> {
    let kernel_len = kernels.first().map_or(0, Vec::len);
    let out_frames = conv::output_len(n_frames, kernel_len, stride).ok_or(Error::InputTooShort {
        len: n_frames,
        needed: kernel_len,
    })?;
    let mut out = vec![0.0; kernels.len() * n_bands * out_frames];
    let mut rows = out.chunks_mut(out_frames);
    for kernel in kernels {
        for k in 0..n_bands {
            let row = rows.next().expect("sized above");
            conv::convolve_valid(&values[k * n_frames..(k + 1) * n_frames], kernel, stride, row);
        }
    }
    Ok((out, out_frames))
}

/// Applies the shared modulation filters to every band of `map`.
pub fn mod_filter(map: &TimeFrequencyMap, layer: &ModulationLayer) -> Result<ModulationTensor> {
    let kernels = layer.kernels();
    let (values, n_frames) = filter_bands(&map.values, map.n_bands, map.n_frames, &kernels, layer.stride)?;
    Ok(ModulationTensor {
        values,
        n_filters: kernels.len(),
        n_bands: map.n_bands,
        n_frames,
        frame_rate_out: map.frame_rate / layer.stride as f64,
        mod_meta: layer.meta(),
    })
}

/// Per-channel standardization statistics.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ChannelStats {
    pub inv_std: Vec<f64>,
}

/// Standardizes each of `n_channels` contiguous chunks in place using the
/// population variance.
pub(crate) fn standardize_channels(values: &mut [f64], n_channels: usize, epsilon: f64) -> ChannelStats {
    let n = values.len() / n_channels;
    let mut inv_std = Vec::with_capacity(n_channels);
    for chunk in values.chunks_mut(n) {
        let mean = chunk.iter().sum::<f64>() / n as f64;
        let var = chunk.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let s = 1.0 / (var + epsilon).sqrt();
        for v in chunk.iter_mut() {
            *v = (*v - mean) * s;
        }
        inv_std.push(s);
    }
    ChannelStats { inv_std }
}

/// Mean-variance normalization per modulation channel over all bands and
/// frames of a single example.
pub fn instance_norm(t: &ModulationTensor, epsilon: f64) -> Result<ModulationTensor> {
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut out = t.clone();
    standardize_channels(&mut out.values, t.n_filters, epsilon);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightNormOutput {
    pub taps: Vec<Vec<f64>>,
    /// Indices of filters with zero L2 norm, returned unchanged.
    pub zero_norm: Vec<usize>,
}

/// Scales each filter to unit L2 norm.
pub fn weight_norm(taps: &[Vec<f64>]) -> WeightNormOutput {
    let mut zero_norm = Vec::new();
    let taps = taps
        .iter()
        .enumerate()
        .map(|(m, t)| {
            let norm = l2_norm(t);
            if norm == 0.0 {
                zero_norm.push(m);
                t.clone()
            } else {
                t.iter().map(|v| v / norm).collect()
            }
        })
        .collect();
    WeightNormOutput { taps, zero_norm }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Windowed maximum over time for every band, the non-learnable comparison
/// to [`mod_filter`].
pub fn max_pool_baseline(map: &TimeFrequencyMap, kernel: usize, stride: usize) -> Result<ModulationTensor> {
    let (values, _, n_frames) = max_pool_with_indices(&map.values, map.n_bands, map.n_frames, kernel, stride)?;
    Ok(ModulationTensor {
        values,
        n_filters: 1,
        n_bands: map.n_bands,
        n_frames,
        frame_rate_out: map.frame_rate / stride as f64,
        mod_meta: vec![ModFilterMeta::MaxPool { kernel }],
    })
}

/// Returns pooled values, the flat input index of each maximum (first on
/// ties), and the number of output frames.
pub(crate) fn max_pool_with_indices(
    values: &[f64],
    n_bands: usize,
    n_frames: usize,
    kernel: usize,
    stride: usize,
) -> Result<(Vec<f64>, Vec<usize>, usize)> {
    if kernel == 0 || stride == 0 {
        return Err(Error::Config("pooling kernel and stride must be positive".into()));
    }
    let out_frames = conv::output_len(n_frames, kernel, stride).ok_or(Error::InputTooShort {
        len: n_frames,
        needed: kernel,
    })?;
    let mut out = Vec::with_capacity(n_bands * out_frames);
    let mut idx = Vec::with_capacity(n_bands * out_frames);
    for k in 0..n_bands {
        let row = &values[k * n_frames..(k + 1) * n_frames];
        for t in 0..out_frames {
            let start = t * stride;
            let mut best = start;
            for i in start + 1..start + kernel {
                if row[i] > row[best] {
                    best = i;
                }
            }
            out.push(row[best]);
            idx.push(k * n_frames + best);
        }
    }
    Ok((out, idx, out_frames))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    pub freqs_hz: Vec<f64>,
    pub magnitude_db: Vec<f64>,
}

/// Floor applied before converting magnitudes to dB, relative to the peak.
const RESPONSE_FLOOR: f64 = 1e-12;

/// Magnitude response of `taps` at `n_points` frequencies evenly covering
/// `[0, rate / 2]`, in dB relative to the maximum.
pub fn freq_response(taps: &[f64], n_points: usize, rate: f64) -> Result<FrequencyResponse> {
    if n_points < 64 {
        return Err(Error::Config(format!("need at least 64 response points, got {n_points}")));
    }
    let mags: Vec<f64> = (0..n_points)
        .map(|i| {
            let f = 0.5 * i as f64 / (n_points - 1) as f64;
            let (mut re, mut im) = (0.0, 0.0);
            for (n, &h) in taps.iter().enumerate() {
                let phase = -2.0 * PI * f * n as f64;
                re += h * phase.cos();
                im += h * phase.sin();
            }
            re.hypot(im)
        })
        .collect();
    let peak = mags.iter().copied().fold(0.0, f64::max);
    let magnitude_db = mags
        .iter()
        .map(|&m| {
            if peak > 0.0 {
                20.0 * (m / peak).max(RESPONSE_FLOOR).log10()
            } else {
                20.0 * RESPONSE_FLOOR.log10()
            }
        })
        .collect();
    let freqs_hz = (0..n_points)
        .map(|i| 0.5 * rate * i as f64 / (n_points - 1) as f64)
        .collect();
    Ok(FrequencyResponse { freqs_hz, magnitude_db })
}

/// [`freq_response`] of a sinc band-pass given by normalized cutoffs.
pub fn band_freq_response(
    f1: f64,
    f2: f64,
    kernel_len: usize,
    window: Window,
    n_points: usize,
    rate: f64,
) -> Result<FrequencyResponse> {
    freq_response(&sinc_kernel(f1, f2, kernel_len, window)?, n_points, rate)
}
