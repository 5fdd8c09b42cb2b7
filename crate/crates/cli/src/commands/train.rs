//! Training on the synthetic task or a labelled WAV manifest, optionally
//! sweeping the modulation stride.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use modfront_core::learn::{
    evaluate, make_am_dataset, train, EpochRecord, Example, SyntheticDataset, TrainOutcome, TrainState,
};
use serde_json::json;

use crate::artifact::write_file;
use crate::checkpoint::Checkpoint;
use crate::commands::{ensure_dir, opt};
use crate::config::{variant_name, Config};
use crate::error::{CliError, CliResult};
use crate::wav::{read_wav, RateMismatch};

#[derive(Debug, Clone)]
pub struct TrainRequest {
    pub config: Config,
    /// CSV with `path,label` columns; the synthetic task is used when absent.
    pub manifest: Option<PathBuf>,
    pub out: PathBuf,
    /// One run per stride; empty means the configured stride only.
    pub mod_strides: Vec<usize>,
    pub rate_mismatch: RateMismatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub mod_stride: usize,
    pub variant: String,
    pub config_digest: String,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub test_loss: f64,
    pub test_roc_auc: Option<f64>,
    pub test_pr_auc: Option<f64>,
    pub test_accuracy: f64,
    pub seconds: f64,
    pub dir: PathBuf,
}

impl RunRecord {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "mod_stride": self.mod_stride,
            "variant": self.variant,
            "config_digest": self.config_digest,
            "best_epoch": self.best_epoch,
            "epochs_run": self.epochs_run,
            "test_loss": self.test_loss,
            "test_roc_auc": self.test_roc_auc,
            "test_pr_auc": self.test_pr_auc,
            "test_accuracy": self.test_accuracy,
            "seconds": self.seconds,
        })
    }
}

/// Reads a `path,label` manifest. Paths are relative to the manifest's
/// directory; classes are the distinct labels in sorted order.
pub fn load_manifest(path: &Path, config: &Config, policy: RateMismatch) -> CliResult<SyntheticDataset> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let headers = reader.headers().map_err(|e| CliError::io(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Config(format!("{}: missing '{name}' column", path.display())))
    };
    let (pc, lc) = (col("path")?, col("label")?);
    let base = path.parent().unwrap_or(Path::new("."));
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        rows.push((base.join(rec[pc].trim()), rec[lc].trim().to_string()));
    }
    let names: Vec<String> = rows
        .iter()
        .map(|(_, l)| l.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let examples = rows
        .iter()
        .map(|(p, l)| {
            Ok(Example {
                waveform: read_wav(p, config.sample_rate, policy)?,
                label: names.iter().position(|n| n == l).expect("label collected"),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(SyntheticDataset::from_examples(examples, names, config.data_seed)?)
}

fn history_csv(digest: &str, history: &[EpochRecord]) -> String {
    let mut s = format!("# config_digest={digest}\nepoch,split,loss,roc_auc,pr_auc,lr\n");
    for r in history {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.epoch,
            r.split.name(),
            r.loss,
            opt(r.roc_auc),
            opt(r.pr_auc),
            r.lr
        ));
    }
    s
}

fn matrix_csv(digest: &str, names: &[String], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut s = format!("# config_digest={digest}\n{}\n", names.join(","));
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn save_checkpoint(dir: &Path, name: &str, config: &Config, classes: &[String], state: &TrainState) -> CliResult<()> {
    Checkpoint {
        config: config.clone(),
        class_names: classes.to_vec(),
        state: state.clone(),
    }
    .save(&dir.join(name))
}

fn run_one(config: &Config, ds: &SyntheticDataset, dir: &Path) -> CliResult<RunRecord> {
    ensure_dir(dir)?;
    let digest = config.digest();
    let fe = config.front_end(ds.n_classes());
    let init = fe.init_params(config.init_seed)?;
    let clock = Instant::now();
    let outcome: TrainOutcome = match train(&fe, &config.training(), ds, init) {
        Ok(o) => o,
        Err(abort) => {
            write_file(&dir.join("history.csv"), history_csv(&digest, &abort.history).as_bytes())?;
            save_checkpoint(dir, "checkpoint_last_good.bin", config, &ds.class_names, &abort.last_good)?;
            return Err(match abort.error {
                modfront_core::Error::NonFinite { .. } | modfront_core::Error::Internal(_) => CliError::Numeric(
                    format!("{abort}; last good state saved to {}", dir.join("checkpoint_last_good.bin").display()),
                ),
                _ => CliError::from(abort.error),
            });
        }
    };
    let seconds = clock.elapsed().as_secs_f64();
    write_file(&dir.join("history.csv"), history_csv(&digest, &outcome.history).as_bytes())?;
    save_checkpoint(dir, "checkpoint.bin", config, &ds.class_names, &outcome.state)?;

    let test = evaluate(ds, &ds.test, &outcome.state.params, &fe)?;
    let c = ds.n_classes();
    let scores = test
        .scores
        .chunks(c)
        .map(|r| r.iter().map(|v| v.to_string()).collect());
    write_file(
        &dir.join("test_scores.csv"),
        matrix_csv(&digest, &ds.class_names, scores).as_bytes(),
    )?;
    let labels = test
        .labels
        .iter()
        .map(|&y| (0..c).map(|k| if k == y { "1" } else { "0" }.to_string()).collect());
    write_file(
        &dir.join("test_labels.csv"),
        matrix_csv(&digest, &ds.class_names, labels).as_bytes(),
    )?;
    Ok(RunRecord {
        mod_stride: config.mod_stride,
        variant: variant_name(config.variant).into(),
        config_digest: digest,
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.epochs_run,
        test_loss: test.loss,
        test_roc_auc: test.roc_auc,
        test_pr_auc: test.pr_auc,
        test_accuracy: test.accuracy,
        seconds,
        dir: dir.to_path_buf(),
    })
}

/// Runs every requested stride and writes `metrics.jsonl` (one record per
/// run) into the output directory. With several strides each run gets a
/// `stride_<s>` subdirectory.
pub fn train_cmd(req: &TrainRequest) -> CliResult<Vec<RunRecord>> {
    ensure_dir(&req.out)?;
    let ds = match &req.manifest {
        Some(m) => load_manifest(m, &req.config, req.rate_mismatch)?,
        None => make_am_dataset(&req.config.task())?,
    };
    let strides = if req.mod_strides.is_empty() {
        vec![req.config.mod_stride]
    } else {
        req.mod_strides.clone()
    };
    let mut records = Vec::new();
    let mut lines = String::new();
    for &s in &strides {
        let mut cfg = req.config.clone();
        cfg.mod_stride = s;
        cfg.validate()?;
        let dir = if strides.len() == 1 {
            req.out.clone()
        } else {
            req.out.join(format!("stride_{s}"))
        };
        let rec = run_one(&cfg, &ds, &dir)?;
        lines.push_str(&rec.to_json().to_string());
        lines.push('\n');
        write_file(&req.out.join("metrics.jsonl"), lines.as_bytes())?;
        records.push(rec);
    }
    Ok(records)
}
