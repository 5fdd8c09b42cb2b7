//! Forward and backward passes through the full front-end and the linear
//! classifier head.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conv;
use crate::error::{Error, Result};
use crate::filterbank::{
    self, convolve_bank, mel_init_with, sinc_kernel, sinc_kernel_partials, Nonlinearity, Waveform, Window,
};
use crate::modulation::{
    self, filter_bands, hamming_fir_init, linear_sinc_init, max_pool_with_indices, standardize_channels,
};

use super::params::{pairs, ModParams, ParamVector};

/// What follows the filter bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModMode {
    /// Free FIR modulation filters (ModNet).
    Fir,
    /// Sinc band-pass modulation filters (SincModNet).
    Sinc,
    /// Windowed max over time, the non-learnable baseline.
    MaxPool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Per-example, per-channel standardization of the modulation tensor.
    Instance,
    /// Unit L2 norm of every modulation filter.
    Weight,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontEndConfig {
    pub sample_rate: u32,
    pub n_bands: usize,
    pub tf_kernel_len: usize,
    pub tf_stride: usize,
    pub tf_window: Window,
    pub f_min: f64,
    pub f_max: f64,
    pub r1: Nonlinearity,
    pub r2: Nonlinearity,
    pub mode: ModMode,
    pub n_mod: usize,
    pub mod_kernel_len: usize,
    pub mod_stride: usize,
    pub mod_window: Window,
    pub mod_f_lo: f64,
    pub mod_f_hi: f64,
    pub norm: Normalization,
    pub norm_affine: bool,
    pub epsilon: f64,
    pub n_classes: usize,
}

impl Default for FrontEndConfig {
    fn default() -> Self {
        Self {
            sample_rate: filterbank::DEFAULT_SAMPLE_RATE,
            n_bands: filterbank::DEFAULT_TF_FILTERS,
            tf_kernel_len: filterbank::DEFAULT_TF_KERNEL_LEN,
            tf_stride: filterbank::DEFAULT_TF_STRIDE,
            tf_window: Window::Hamming,
            f_min: filterbank::DEFAULT_F_MIN_HZ,
            f_max: filterbank::DEFAULT_SAMPLE_RATE as f64 / 2.0,
            r1: Nonlinearity::Relu,
            r2: Nonlinearity::AbsSquared,
            mode: ModMode::Sinc,
            n_mod: modulation::DEFAULT_MOD_FILTERS,
            mod_kernel_len: modulation::DEFAULT_MOD_KERNEL_LEN,
            mod_stride: modulation::DEFAULT_MOD_STRIDE,
            mod_window: Window::Hamming,
            mod_f_lo: 0.0,
            mod_f_hi: 800.0,
            norm: Normalization::Instance,
            norm_affine: false,
            epsilon: modulation::DEFAULT_EPSILON,
            n_classes: 2,
        }
    }
}

impl FrontEndConfig {
    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / self.tf_stride as f64
    }

    /// Number of modulation channels actually produced.
    pub fn channels(&self) -> usize {
        match self.mode {
            ModMode::MaxPool => 1,
            _ => self.n_mod,
        }
    }

    pub fn n_features(&self) -> usize {
        self.channels() * self.n_bands
    }

    /// `(T, T')` for an input of `n_samples`.
    pub fn frame_counts(&self, n_samples: usize) -> Option<(usize, usize)> {
        let t = conv::output_len(n_samples, self.tf_kernel_len, self.tf_stride)?;
        let t2 = conv::output_len(t, self.mod_kernel_len, self.mod_stride)?;
        Some((t, t2))
    }

    /// Shortest input that yields at least one modulation frame.
    pub fn min_samples(&self) -> usize {
        (self.mod_kernel_len - 1) * self.tf_stride + self.tf_kernel_len
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive".into());
        }
        if self.n_bands == 0 || self.n_mod == 0 || self.n_classes == 0 {
            return bad("filter and class counts must be positive".into());
        }
        if self.tf_kernel_len < 2 || self.mod_kernel_len < 2 {
            return bad("kernel lengths must be at least 2".into());
        }
        if self.tf_stride == 0 || self.mod_stride == 0 {
            return bad("strides must be at least 1".into());
        }
        if self.mode == ModMode::Fir && self.mod_kernel_len < 10 {
            return bad("FIR modulation kernels need at least 10 taps".into());
        }
        if !(self.epsilon > 0.0) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if !(self.f_min >= 0.0 && self.f_min < self.f_max && self.f_max <= nyquist) {
            return bad(format!("invalid TF range [{}, {}] Hz", self.f_min, self.f_max));
        }
        let mod_nyquist = self.frame_rate() / 2.0;
        if !(self.mod_f_lo >= 0.0 && self.mod_f_lo < self.mod_f_hi && self.mod_f_hi <= mod_nyquist) {
            return bad(format!(
                "invalid modulation range [{}, {}] Hz for frame rate {} Hz",
                self.mod_f_lo,
                self.mod_f_hi,
                self.frame_rate()
            ));
        }
        Ok(())
    }

    /// Fresh parameters: mel-spaced TF cutoffs, Hamming-slot or linearly
    /// spaced modulation filters, unit affine and a small random head.
    pub fn init_params(&self, seed: u64) -> Result<ParamVector> {
        self.validate()?;
        let bank = mel_init_with(
            self.n_bands,
            self.sample_rate,
            self.f_min,
            self.f_max,
            self.tf_kernel_len,
            self.tf_stride,
            self.tf_window,
        )?;
        let tf_cutoffs = bank.cutoffs().iter().flat_map(|&(a, b)| [a, b]).collect();
        let mod_params = match self.mode {
            ModMode::Fir => ModParams::Fir(hamming_fir_init(self.n_mod, self.mod_kernel_len)?.concat()),
            ModMode::Sinc => ModParams::Sinc(
                linear_sinc_init(self.n_mod, self.frame_rate(), self.mod_f_lo, self.mod_f_hi)?
                    .into_iter()
                    .flat_map(|(a, b)| [a, b])
                    .collect(),
            ),
            ModMode::MaxPool => ModParams::None,
        };
        let norm_affine = if self.norm == Normalization::Instance && self.norm_affine {
            let m = self.channels();
            let mut v = vec![1.0; m];
            v.extend(std::iter::repeat_n(0.0, m));
            v
        } else {
            Vec::new()
        };
        let f = self.n_features();
        let bound = 1.0 / (f as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let head_weights = (0..self.n_classes * f).map(|_| rng.gen_range(-bound..bound)).collect();
        Ok(ParamVector {
            tf_cutoffs,
            mod_params,
            norm_affine,
            head_weights,
            head_bias: vec![0.0; self.n_classes],
        })
    }

    /// Checks that `params` has the layout this configuration expects.
    pub fn check_params(&self, params: &ParamVector) -> Result<()> {
        let m = self.channels();
        let expected_mod = match self.mode {
            ModMode::Fir => ("fir", self.n_mod * self.mod_kernel_len),
            ModMode::Sinc => ("sinc", 2 * self.n_mod),
            ModMode::MaxPool => ("none", 0),
        };
        let affine = if self.norm == Normalization::Instance && self.norm_affine {
            2 * m
        } else {
            0
        };
        let ok = params.tf_cutoffs.len() == 2 * self.n_bands
            && params.mod_params.kind() == expected_mod.0
            && params.mod_params.as_slice().len() == expected_mod.1
            && params.norm_affine.len() == affine
            && params.head_weights.len() == self.n_classes * self.n_features()
            && params.head_bias.len() == self.n_classes;
        if ok {
            Ok(())
        } else {
            Err(Error::Shape("parameter layout does not match configuration".into()))
        }
    }
}

/// Intermediates retained by [`forward`] for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    fingerprint: u64,
    input: Vec<f64>,
    tf_pre: Vec<f64>,
    n_frames: usize,
    mod_raw: Vec<Vec<f64>>,
    mod_used: Vec<Vec<f64>>,
    mod_norms: Vec<f64>,
    tf_post: Vec<f64>,
    pool_idx: Vec<usize>,
    mod_pre: Vec<f64>,
    mod_frames: usize,
    normalized: Vec<f64>,
    inv_std: Vec<f64>,
    means: Vec<f64>,
    pooled: Vec<f64>,
    pub logits: Vec<f64>,
}

impl ForwardCache {
    /// `K x T` filter bank output before the first nonlinearity.
    pub fn tf_map(&self) -> (&[f64], usize) {
        (&self.tf_pre, self.n_frames)
    }

    /// `K x T` filter bank output after the first nonlinearity.
    pub fn tf_rectified(&self) -> &[f64] {
        &self.tf_post
    }

    /// Modulation kernels as applied, after any weight normalization.
    pub fn mod_kernels(&self) -> &[Vec<f64>] {
        &self.mod_used
    }

    /// `M x K x T'` modulation output before the second nonlinearity.
    pub fn modulation(&self) -> (&[f64], usize) {
        (&self.mod_pre, self.mod_frames)
    }

    /// Flat `K x T` index of each max-pooling winner (empty unless pooling).
    pub fn pool_argmax(&self) -> &[usize] {
        &self.pool_idx
    }

    /// Time-averaged features fed to the head, `M x K`.
    pub fn features(&self) -> &[f64] {
        &self.pooled
    }
}

/// Runs the front-end and head on one waveform.
pub fn forward(x: &Waveform, params: &ParamVector, config: &FrontEndConfig) -> Result<ForwardCache> {
    config.check_params(params)?;
    if x.sample_rate() != config.sample_rate {
        return Err(Error::Config(format!(
            "waveform sampled at {} Hz, model expects {} Hz",
            x.sample_rate(),
            config.sample_rate
        )));
    }
    let k = config.n_bands;

    let tf_kernels = params
        .tf_pairs()
        .into_iter()
        .map(|(f1, f2)| sinc_kernel(f1, f2, config.tf_kernel_len, config.tf_window))
        .collect::<Result<Vec<_>>>()?;
    let (tf_pre, n_frames) = convolve_bank(x.samples(), &tf_kernels, config.tf_stride)?;
    let mut tf_post = tf_pre.clone();
    filterbank::rectify_values(&mut tf_post, config.r1);

    let mod_raw: Vec<Vec<f64>> = match &params.mod_params {
        ModParams::Fir(taps) => taps.chunks(config.mod_kernel_len).map(<[f64]>::to_vec).collect(),
        ModParams::Sinc(c) => pairs(c)
            .into_iter()
            .map(|(f1, f2)| sinc_kernel(f1, f2, config.mod_kernel_len, config.mod_window))
            .collect::<Result<Vec<_>>>()?,
        ModParams::None => Vec::new(),
    };
    let mod_norms: Vec<f64> = mod_raw.iter().map(|h| modulation::l2_norm(h)).collect();
    let mod_used = if config.norm == Normalization::Weight {
        modulation::weight_norm(&mod_raw).taps
    } else {
        mod_raw.clone()
    };

    let (mod_pre, pool_idx, mod_frames) = match config.mode {
        ModMode::MaxPool => max_pool_with_indices(&tf_post, k, n_frames, config.mod_kernel_len, config.mod_stride)?,
        _ => {
            let (v, t2) = filter_bands(&tf_post, k, n_frames, &mod_used, config.mod_stride)?;
            (v, Vec::new(), t2)
        }
    };

    let m = config.channels();
    let mut normalized = mod_pre.clone();
    filterbank::rectify_values(&mut normalized, config.r2);
    let inv_std = if config.norm == Normalization::Instance {
        standardize_channels(&mut normalized, m, config.epsilon).inv_std
    } else {
        Vec::new()
    };

    let per_channel = k * mod_frames;
    let mut means = Vec::with_capacity(m * k);
    let mut pooled = Vec::with_capacity(m * k);
    for (ch, rows) in normalized.chunks(per_channel).enumerate() {
        let (gamma, beta) = affine(params, ch, m);
        for row in rows.chunks(mod_frames) {
            let mean = row.iter().sum::<f64>() / mod_frames as f64;
            means.push(mean);
            pooled.push(gamma * mean + beta);
        }
    }

    let f = pooled.len();
    let logits = params
        .head_weights
        .chunks(f)
        .zip(&params.head_bias)
        .map(|(w, b)| b + w.iter().zip(&pooled).map(|(a, p)| a * p).sum::<f64>())
        .collect();

    Ok(ForwardCache {
        fingerprint: params.fingerprint(),
        input: x.samples().to_vec(),
        tf_pre,
        n_frames,
        mod_raw,
        mod_used,
        mod_norms,
        tf_post,
        pool_idx,
        mod_pre,
        mod_frames,
        normalized,
        inv_std,
        means,
        pooled,
        logits,
    })
}

fn affine(params: &ParamVector, ch: usize, m: usize) -> (f64, f64) {
    if params.norm_affine.is_empty() {
        (1.0, 0.0)
    } else {
        (params.norm_affine[ch], params.norm_affine[m + ch])
    }
}

/// Mean per-class sigmoid cross-entropy and its gradient at the logits.
pub fn bce_with_logits(logits: &[f64], targets: &[f64]) -> (f64, Vec<f64>) {
    let c = logits.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &y) in logits.iter().zip(targets) {
        // softplus(z) - y z, stable for large |z|
        loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z;
        grad.push((sigmoid(z) - y) / c);
    }
    (loss / c, grad)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Gradient of a scalar loss with respect to every parameter, given the
/// loss gradient at the logits. With `front_end` false only the head and
/// normalization affine receive gradients.
pub fn backward(
    cache: &ForwardCache,
    params: &ParamVector,
    config: &FrontEndConfig,
    grad_logits: &[f64],
    front_end: bool,
) -> Result<ParamVector> {
    if cache.fingerprint != params.fingerprint() {
        return Err(Error::Internal("forward cache was computed with different parameters".into()));
    }
    if grad_logits.len() != config.n_classes {
        return Err(Error::Shape(format!(
            "{} logit gradients for {} classes",
            grad_logits.len(),
            config.n_classes
        )));
    }
    let k = config.n_bands;
    let m = config.channels();
    let f = m * k;
    let t2 = cache.mod_frames;
    let mut grads = params.zeros_like();

    // head
    let mut d_pooled = vec![0.0; f];
    for (c, &dz) in grad_logits.iter().enumerate() {
        grads.head_bias[c] = dz;
        let w = &params.head_weights[c * f..(c + 1) * f];
        let gw = &mut grads.head_weights[c * f..(c + 1) * f];
        for j in 0..f {
            gw[j] = dz * cache.pooled[j];
            d_pooled[j] += w[j] * dz;
        }
    }

    // affine over time-averaged standardized values
    if !params.norm_affine.is_empty() {
        for ch in 0..m {
            let gamma = params.norm_affine[ch];
            let mut d_gamma = 0.0;
            let mut d_beta = 0.0;
            for b in 0..k {
                let j = ch * k + b;
                d_gamma += d_pooled[j] * cache.means[j];
                d_beta += d_pooled[j];
                d_pooled[j] *= gamma;
            }
            grads.norm_affine[ch] = d_gamma;
            grads.norm_affine[m + ch] = d_beta;
        }
    }
    if !front_end {
        return Ok(grads);
    }

    // time average
    let per_channel = k * t2;
    let mut d_mod = vec![0.0; m * per_channel];
    for (j, row) in d_mod.chunks_mut(t2).enumerate() {
        let g = d_pooled[j] / t2 as f64;
        row.iter_mut().for_each(|v| *v = g);
    }

    // instance normalization
    if config.norm == Normalization::Instance {
        for ch in 0..m {
            let s = cache.inv_std[ch];
            let dz = &mut d_mod[ch * per_channel..(ch + 1) * per_channel];
            let z = &cache.normalized[ch * per_channel..(ch + 1) * per_channel];
            let n = per_channel as f64;
            let mean_d = dz.iter().sum::<f64>() / n;
            let mean_dz = dz.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() / n;
            for (d, &zv) in dz.iter_mut().zip(z) {
                *d = s * (*d - mean_d - zv * mean_dz);
            }
        }
    }

    // second nonlinearity
    for (d, &v) in d_mod.iter_mut().zip(&cache.mod_pre) {
        *d *= config.r2.derivative(v);
    }

    // modulation stage
    let t = cache.n_frames;
    let mut d_tf = vec![0.0; k * t];
    match config.mode {
        ModMode::MaxPool => {
            for (&idx, &d) in cache.pool_idx.iter().zip(&d_mod) {
                d_tf[idx] += d;
            }
        }
        _ => {
            let l2 = config.mod_kernel_len;
            let mut d_used = vec![vec![0.0; l2]; m];
            for ch in 0..m {
                for b in 0..k {
                    let d_out = &d_mod[(ch * k + b) * t2..(ch * k + b + 1) * t2];
                    let input = &cache.tf_post[b * t..(b + 1) * t];
                    conv::accumulate_kernel_grad(input, d_out, config.mod_stride, &mut d_used[ch]);
                    conv::accumulate_input_grad(
                        &cache.mod_used[ch],
                        d_out,
                        config.mod_stride,
                        &mut d_tf[b * t..(b + 1) * t],
                    );
                }
            }
            let d_raw: Vec<Vec<f64>> = if config.norm == Normalization::Weight {
                d_used
                    .iter()
                    .zip(&cache.mod_used)
                    .zip(&cache.mod_norms)
                    .map(|((d, u), &norm)| {
                        if norm == 0.0 {
                            d.clone()
                        } else {
                            let proj: f64 = d.iter().zip(u).map(|(a, b)| a * b).sum();
                            d.iter().zip(u).map(|(a, b)| (a - b * proj) / norm).collect()
                        }
                    })
                    .collect()
            } else {
                d_used
            };
            match &params.mod_params {
                ModParams::Fir(_) => {
                    let flat: Vec<f64> = d_raw.concat();
                    grads.mod_params.as_mut_slice().copy_from_slice(&flat);
                }
                ModParams::Sinc(c) => {
                    let g = grads.mod_params.as_mut_slice();
                    for (ch, &(f1, f2)) in pairs(c).iter().enumerate() {
                        let (p1, p2) = sinc_kernel_partials(f1, f2, l2, config.mod_window);
                        g[2 * ch] = dot(&d_raw[ch], &p1);
                        g[2 * ch + 1] = dot(&d_raw[ch], &p2);
                    }
                }
                ModParams::None => {}
            }
            debug_assert_eq!(cache.mod_raw.len(), m);
        }
    }

    // first nonlinearity
    for (d, &v) in d_tf.iter_mut().zip(&cache.tf_pre) {
        *d *= config.r1.derivative(v);
    }

    // filter bank cutoffs
    let l1 = config.tf_kernel_len;
    for (b, (f1, f2)) in params.tf_pairs().into_iter().enumerate() {
        let d_row = &d_tf[b * t..(b + 1) * t];
        if d_row.iter().all(|&v| v == 0.0) {
            continue;
        }
        let mut d_kernel = vec![0.0; l1];
        conv::accumulate_kernel_grad(&cache.input, d_row, config.tf_stride, &mut d_kernel);
        let (p1, p2) = sinc_kernel_partials(f1, f2, l1, config.tf_window);
        grads.tf_cutoffs[2 * b] = dot(&d_kernel, &p1);
        grads.tf_cutoffs[2 * b + 1] = dot(&d_kernel, &p2);
    }

    Ok(grads)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
