//! Impulse and magnitude responses of every filter, plus band summaries.

use std::path::Path;

use modfront_core::learn::{ModMode, ModParams, Normalization};
use modfront_core::modulation::FrequencyResponse;
use modfront_core::{freq_response, sinc_kernel, weight_norm};

use crate::artifact::write_file;
use crate::commands::{ensure_dir, Model};
use crate::error::CliResult;

/// Frequencies per magnitude response.
pub const RESPONSE_POINTS: usize = 513;

#[derive(Debug, Clone, PartialEq)]
pub struct BandSummary {
    pub f1_hz: f64,
    pub f2_hz: f64,
}

impl BandSummary {
    pub fn center_hz(&self) -> f64 {
        0.5 * (self.f1_hz + self.f2_hz)
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.f2_hz - self.f1_hz
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiltersReport {
    pub tf: Vec<BandSummary>,
    pub modulation: Vec<BandSummary>,
}

/// Edges of the contiguous region within 3 dB of the response peak.
pub fn half_power_band(r: &FrequencyResponse) -> BandSummary {
    let peak = (0..r.magnitude_db.len())
        .max_by(|&a, &b| r.magnitude_db[a].total_cmp(&r.magnitude_db[b]))
        .unwrap_or(0);
    let mut lo = peak;
    while lo > 0 && r.magnitude_db[lo - 1] >= -3.0 {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < r.magnitude_db.len() && r.magnitude_db[hi + 1] >= -3.0 {
        hi += 1;
    }
    BandSummary {
        f1_hz: r.freqs_hz[lo],
        f2_hz: r.freqs_hz[hi],
    }
}

fn write_filter(out: &Path, stem: &str, digest: &str, taps: &[f64], rate: f64) -> CliResult<FrequencyResponse> {
    let mut imp = format!("# config_digest={digest}\ntap,time_s,value\n");
    for (i, v) in taps.iter().enumerate() {
        imp.push_str(&format!("{i},{},{v}\n", i as f64 / rate));
    }
    write_file(&out.join(format!("{stem}_impulse.csv")), imp.as_bytes())?;
    let r = freq_response(taps, RESPONSE_POINTS, rate)?;
    let mut resp = format!("# config_digest={digest}\nfreq_hz,magnitude_db\n");
    for (f, db) in r.freqs_hz.iter().zip(&r.magnitude_db) {
        resp.push_str(&format!("{f},{db}\n"));
    }
    write_file(&out.join(format!("{stem}_response.csv")), resp.as_bytes())?;
    Ok(r)
}

fn write_summary(path: &Path, digest: &str, note: &str, bands: &[BandSummary]) -> CliResult<()> {
    let mut s = format!("# config_digest={digest}\n# {note}\nindex,f1_hz,f2_hz,center_hz,bandwidth_hz\n");
    for (i, b) in bands.iter().enumerate() {
        s.push_str(&format!(
            "{i},{},{},{},{}\n",
            b.f1_hz,
            b.f2_hz,
            b.center_hz(),
            b.bandwidth_hz()
        ));
    }
    write_file(path, s.as_bytes())
}

/// Writes `tf_KKK_{impulse,response}.csv`, `mod_MM_{impulse,response}.csv`
/// and the `tf_summary.csv` / `mod_summary.csv` tables.
pub fn filters(model: &Model, out: &Path) -> CliResult<FiltersReport> {
    ensure_dir(out)?;
    let cfg = &model.config;
    let fe = model.front_end();
    let digest = cfg.digest();
    let sr = cfg.sample_rate as f64;

    let mut tf = Vec::new();
    for (k, (f1, f2)) in model.params.tf_pairs().into_iter().enumerate() {
        let taps = sinc_kernel(f1, f2, fe.tf_kernel_len, fe.tf_window)?;
        write_filter(out, &format!("tf_{k:03}"), &digest, &taps, sr)?;
        tf.push(BandSummary {
            f1_hz: f1 * sr,
            f2_hz: f2 * sr,
        });
    }
    write_summary(&out.join("tf_summary.csv"), &digest, "sinc cutoffs", &tf)?;

    let rate = fe.frame_rate();
    let kernels: Vec<Vec<f64>> = match &model.params.mod_params {
        ModParams::Fir(t) => t.chunks(fe.mod_kernel_len).map(<[f64]>::to_vec).collect(),
        ModParams::Sinc(_) => model
            .params
            .mod_pairs()
            .unwrap_or_default()
            .into_iter()
            .map(|(a, b)| sinc_kernel(a, b, fe.mod_kernel_len, fe.mod_window))
            .collect::<Result<_, _>>()?,
        ModParams::None => Vec::new(),
    };
    let kernels = if fe.norm == Normalization::Weight {
        weight_norm(&kernels).taps
    } else {
        kernels
    };
    let mut modulation = Vec::new();
    for (m, taps) in kernels.iter().enumerate() {
        let r = write_filter(out, &format!("mod_{m:02}"), &digest, taps, rate)?;
        modulation.push(match model.params.mod_pairs() {
            Some(p) => BandSummary {
                f1_hz: p[m].0 * rate,
                f2_hz: p[m].1 * rate,
            },
            None => half_power_band(&r),
        });
    }
    if fe.mode != ModMode::MaxPool {
        let note = if fe.mode == ModMode::Sinc {
            "sinc cutoffs"
        } else {
            "edges of the -3 dB region around the response peak"
        };
        write_summary(&out.join("mod_summary.csv"), &digest, note, &modulation)?;
    }
    Ok(FiltersReport { tf, modulation })
}
