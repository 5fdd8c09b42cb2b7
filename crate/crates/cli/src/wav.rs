//! WAV reading (PCM16 or float32, mono or stereo) and writing.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use modfront_core::Waveform;

use crate::error::{CliError, CliResult};

/// How to handle a file whose sample rate differs from the configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMismatch {
    Reject,
    /// Linear interpolation onto the target grid.
    ResampleLinear,
}

/// Reads `path` as mono audio at `target_rate`. Stereo channels are
/// averaged; PCM16 samples are scaled by 1/32768.
pub fn read_wav(path: &Path, target_rate: u32, policy: RateMismatch) -> CliResult<Waveform> {
    let file = std::io::BufReader::new(std::fs::File::open(path).map_err(|e| CliError::io(path, e))?);
    let reader = WavReader::new(file).map_err(|e| match e {
        hound::Error::Unsupported => CliError::Io(format!("{}: unsupported WAV encoding", path.display())),
        other => CliError::Io(format!("{}: malformed WAV header ({other})", path.display())),
    })?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 || channels > 2 {
        return Err(CliError::Io(format!(
            "{}: unsupported channel count {channels} (mono or stereo only)",
            path.display()
        )));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<Result<_, _>>(),
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<Result<_, _>>(),
        (fmt, bits) => {
            return Err(CliError::Io(format!(
                "{}: unsupported WAV encoding {bits}-bit {fmt:?} (PCM16 or float32 only)",
                path.display()
            )))
        }
    }
    .map_err(|e| CliError::Io(format!("{}: truncated or corrupt sample data ({e})", path.display())))?;
    let mono: Vec<f64> = interleaved
        .chunks(channels)
        .map(|c| c.iter().sum::<f64>() / channels as f64)
        .collect();
    let samples = if spec.sample_rate == target_rate {
        mono
    } else {
        match policy {
            RateMismatch::Reject => {
                return Err(CliError::Config(format!(
                    "{}: file sample rate {} Hz differs from configured {} Hz (pass --resample-linear to convert)",
                    path.display(),
                    spec.sample_rate,
                    target_rate
                )))
            }
            RateMismatch::ResampleLinear => resample_linear(&mono, spec.sample_rate, target_rate),
        }
    };
    Waveform::new(samples, target_rate)
        .map_err(|_| CliError::Io(format!("{}: no audio samples", path.display())))
}

/// Output sample `i` sits at input position `i * from / to`, interpolated
/// between its two neighbours; the output has `round(n * to / from)`
/// samples and positions past the last input sample hold it.
pub fn resample_linear(x: &[f64], from: u32, to: u32) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let n_out = ((x.len() as u64 * to as u64) as f64 / from as f64).round() as usize;
    let ratio = from as f64 / to as f64;
    (0..n_out)
        .map(|i| {
            let pos = i as f64 * ratio;
            let j = pos.floor() as usize;
            if j + 1 >= x.len() {
                return x[x.len() - 1];
            }
            let frac = pos - j as f64;
            x[j] + frac * (x[j + 1] - x[j])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

/// Writes interleaved samples; PCM16 values are clipped to [-1, 1).
pub fn write_wav(path: &Path, interleaved: &[f64], channels: u16, rate: u32, encoding: WavEncoding) -> CliResult<()> {
    let spec = WavSpec {
        channels,
        sample_rate: rate,
        bits_per_sample: match encoding {
            WavEncoding::Pcm16 => 16,
            WavEncoding::Float32 => 32,
        },
        sample_format: match encoding {
            WavEncoding::Pcm16 => SampleFormat::Int,
            WavEncoding::Float32 => SampleFormat::Float,
        },
    };
    let io = |e: hound::Error| CliError::io(path, e);
    let mut w = WavWriter::create(path, spec).map_err(io)?;
    for &v in interleaved {
        match encoding {
            WavEncoding::Pcm16 => w
                .write_sample((v * 32768.0).round().clamp(-32768.0, 32767.0) as i16)
                .map_err(io)?,
            WavEncoding::Float32 => w.write_sample(v as f32).map_err(io)?,
        }
    }
    w.finalize().map_err(io)
}
