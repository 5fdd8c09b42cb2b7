//! Filter-bank and modulation matrices of an audio file, in fixed-length
//! windows.

use std::path::Path;

use modfront_core::learn::{forward, ModMode};
use modfront_core::{rectify_values, Waveform};

use crate::artifact::{write_file, Axis, MatrixArtifact};
use crate::commands::{ensure_dir, Model};
use crate::error::CliResult;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzedMatrix {
    pub window: usize,
    pub start_s: f64,
    pub stem: String,
    pub rows: usize,
    pub cols: usize,
}

/// Window start offsets in samples: every `hop` from 0 while a full window
/// fits, plus one window ending at the last sample if the hops leave a
/// tail. Inputs no longer than one window are analyzed whole.
pub fn window_starts(len: usize, window: usize, hop: usize) -> Vec<usize> {
    if len <= window {
        return vec![0];
    }
    let mut starts: Vec<usize> = (0..).map(|i| i * hop).take_while(|&s| s + window <= len).collect();
    if starts.last().is_none_or(|&s| s + window < len) {
        starts.push(len - window);
    }
    starts
}

/// Writes `wNNN_tf` and `wNNN_mod_MM` matrices (CSV, binary, graymap) plus
/// an `index.csv` listing them.
pub fn analyze(model: &Model, audio: &Waveform, out: &Path) -> CliResult<Vec<AnalyzedMatrix>> {
    ensure_dir(out)?;
    let cfg = &model.config;
    let fe = model.front_end();
    let digest = cfg.digest();
    let sr = cfg.sample_rate as f64;
    let window = (cfg.analysis_window * sr).round() as usize;
    let hop = ((cfg.analysis_hop * sr).round() as usize).max(1);
    let band_hz: Vec<f64> = model
        .params
        .tf_pairs()
        .iter()
        .map(|&(a, b)| 0.5 * (a + b) * sr)
        .collect();
    let mut written = Vec::new();
    for (w, start) in window_starts(audio.len(), window, hop).into_iter().enumerate() {
        let end = (start + window).min(audio.len());
        let chunk = Waveform::new(audio.samples()[start..end].to_vec(), cfg.sample_rate)?;
        let cache = forward(&chunk, &model.params, &fe)?;
        let start_s = start as f64 / sr;
        let (_, t) = cache.tf_map();
        let tf_times: Vec<f64> = (0..t).map(|i| start_s + (i * cfg.tf_stride) as f64 / sr).collect();
        let tf = MatrixArtifact::new(
            "filter bank output",
            Axis::new("band_center", "Hz", band_hz.clone()),
            Axis::new("time", "s", tf_times),
            false,
            cache.tf_rectified().iter().map(|&v| v as f32).collect(),
            &digest,
        )?;
        let stem = format!("w{w:03}_tf");
        tf.write_all(out, &stem)?;
        written.push(AnalyzedMatrix {
            window: w,
            start_s,
            stem,
            rows: fe.n_bands,
            cols: t,
        });

        let (pre, t2) = cache.modulation();
        let mut post = pre.to_vec();
        rectify_values(&mut post, cfg.r2);
        let hop_s = (cfg.mod_stride * cfg.tf_stride) as f64 / sr;
        let mod_times: Vec<f64> = (0..t2).map(|i| start_s + i as f64 * hop_s).collect();
        let centers = mod_centers(model);
        for (m, channel) in post.chunks(fe.n_bands * t2).enumerate() {
            let name = match (fe.mode, centers.get(m)) {
                (ModMode::MaxPool, _) => "max pooling output".to_string(),
                (_, Some(c)) => format!("modulation filter {m} (center {c:.1} Hz)"),
                _ => format!("modulation filter {m}"),
            };
            let art = MatrixArtifact::new(
                &name,
                Axis::new("band_center", "Hz", band_hz.clone()),
                Axis::new("time", "s", mod_times.clone()),
                false,
                channel.iter().map(|&v| v as f32).collect(),
                &digest,
            )?;
            let stem = format!("w{w:03}_mod_{m:02}");
            art.write_all(out, &stem)?;
            written.push(AnalyzedMatrix {
                window: w,
                start_s,
                stem,
                rows: fe.n_bands,
                cols: t2,
            });
        }
    }
    let mut index = format!("# config_digest={digest}\nwindow,start_s,matrix,rows,cols\n");
    for a in &written {
        index.push_str(&format!("{},{},{},{},{}\n", a.window, a.start_s, a.stem, a.rows, a.cols));
    }
    write_file(&out.join("index.csv"), index.as_bytes())?;
    Ok(written)
}

fn mod_centers(model: &Model) -> Vec<f64> {
    let rate = model.front_end().frame_rate();
    model
        .params
        .mod_pairs()
        .map(|p| p.iter().map(|&(a, b)| 0.5 * (a + b) * rate).collect())
        .unwrap_or_default()
}
