//! End-to-end runs of the five verbs through the argument parser.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;

use modfront_cli::artifact::MatrixArtifact;
use modfront_cli::cli::run;
use modfront_cli::config::Config;
use modfront_cli::wav::{write_wav, WavEncoding};
use modfront_cli::CliError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn modfront(args: &[&str]) -> Result<String, CliError> {
    run(std::iter::once("modfront").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// A 6400 Hz tone amplitude modulated at `rate` Hz. The carrier is a whole
/// multiple of the 1600 Hz frame rate, so the strided filter bank samples it
/// at the same phase every frame and only the envelope survives.
fn am_tone(seconds: f64, rate: f64) -> Vec<f64> {
    (0..(seconds * 16_000.0) as usize)
        .map(|i| {
            let t = i as f64 / 16_000.0;
            0.5 * (1.0 + 0.9 * (2.0 * PI * rate * t).cos()) * (2.0 * PI * 6400.0 * t).cos()
        })
        .collect()
}

fn wav(dir: &Path, name: &str, x: &[f64]) -> PathBuf {
    let path = dir.join(name);
    write_wav(&path, x, 1, 16_000, WavEncoding::Float32).unwrap();
    path
}

fn load(dir: &Path, stem: &str) -> MatrixArtifact {
    MatrixArtifact::from_bytes(&std::fs::read(dir.join(format!("{stem}.bin"))).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const TINY: &[&str] = &["--n-bands", "8", "--n-mod", "4", "--n-per-class", "6", "--duration", "1.0"];

/// A seconds-scale training setup; two epochs unless `extra` says otherwise.
fn tiny(extra: &[&str]) -> Vec<String> {
    let epochs: &[&str] = if extra.contains(&"--epochs") { &[] } else { &["--epochs", "2"] };
    TINY.iter().chain(epochs).chain(extra).map(|s| s.to_string()).collect()
}

fn modfront_owned(args: &[String]) -> Result<String, CliError> {
    let v: Vec<&str> = args.iter().map(String::as_str).collect();
    modfront(&v)
}

#[test]
fn five_second_clip_has_default_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let audio = wav(dir.path(), "a.wav", &noise(80_000, 1));
    let out = dir.path().join("an");
    modfront(&["analyze", p(&audio), "--out", p(&out)]).unwrap();
    let index = read_csv(&out.join("index.csv"));
    assert_eq!(index.len(), 21);
    let tf = load(&out, "w000_tf");
    assert_eq!(tf.shape(), (80, 7975));
    assert_eq!(tf.config_digest, Config::default().digest());
    for m in 0..20 {
        assert_eq!(load(&out, &format!("w000_mod_{m:02}")).shape(), (80, 50));
    }
    assert!(out.join("w000_mod_19.pgm").exists() && out.join("w000_tf.csv").exists());
}

#[test]
fn long_files_are_windowed() {
    let dir = tempfile::tempdir().unwrap();
    let audio = wav(dir.path(), "long.wav", &noise(12 * 16_000, 2));
    let out = dir.path().join("an");
    modfront(&["analyze", p(&audio), "--out", p(&out), "--n-mod", "2"]).unwrap();
    let starts: Vec<String> = read_csv(&out.join("index.csv"))
        .into_iter()
        .filter(|r| r[2].ends_with("_tf"))
        .map(|r| r[1].clone())
        .collect();
    assert_eq!(starts, ["0", "2.5", "5", "7"]);
}

#[test]
fn silence_renders_dark() {
    let dir = tempfile::tempdir().unwrap();
    let audio = wav(dir.path(), "s.wav", &vec![0.0; 16_000]);
    let out = dir.path().join("an");
    modfront(&["analyze", p(&audio), "--out", p(&out)]).unwrap();
    for stem in ["w000_tf", "w000_mod_00", "w000_mod_07"] {
        let pgm = std::fs::read(out.join(format!("{stem}.pgm"))).unwrap();
        let (h, w) = load(&out, stem).shape();
        assert!(pgm[pgm.len() - h * w..].iter().all(|&b| b == 0), "{stem}");
    }
}

#[test]
fn modulation_energy_peaks_in_matching_filter() {
    let dir = tempfile::tempdir().unwrap();
    // Default linear init: filter 3 spans 120-160 Hz. The rate is chosen
    // off the 10 Hz output grid so successive frames see different phases.
    let audio = wav(dir.path(), "am.wav", &am_tone(3.0, 137.0));
    let out = dir.path().join("an");
    modfront(&["analyze", p(&audio), "--out", p(&out)]).unwrap();
    // Energy about each row's mean, so the DC term passed by filter 0 does not count.
    let energy: Vec<f64> = (0..20)
        .map(|m| {
            let a = load(&out, &format!("w000_mod_{m:02}"));
            let (_, cols) = a.shape();
            a.payload
                .chunks(cols)
                .map(|row| {
                    let mean = row.iter().map(|&v| v as f64).sum::<f64>() / cols as f64;
                    row.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>()
                })
                .sum()
        })
        .collect();
    let best = (0..20).max_by(|&a, &b| energy[a].total_cmp(&energy[b])).unwrap();
    assert_eq!(best, 3, "{energy:?}");
}

#[test]
fn rate_mismatch_is_a_config_error_unless_resampling() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.wav");
    write_wav(&path, &noise(22_050, 3), 1, 22_050, WavEncoding::Pcm16).unwrap();
    let out = dir.path().join("an");
    let err = modfront(&["analyze", p(&path), "--out", p(&out)]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    modfront(&["analyze", p(&path), "--out", p(&out), "--resample-linear"]).unwrap();
    assert_eq!(load(&out, "w000_tf").shape(), (80, 1575));
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_modfront");
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(code(&["init-config"]), Some(0));
    assert_eq!(code(&["filters", "--out", p(dir.path()), "--n-bands", "0"]), Some(2));
    assert_eq!(code(&["filters", "--out", p(dir.path()), "--bogus", "1"]), Some(2));
    assert_eq!(code(&["analyze", "/does/not/exist.wav", "--out", p(dir.path())]), Some(3));
}

#[test]
fn init_config_round_trips_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.txt");
    modfront(&["init-config", "--out", p(&path), "--n-mod", "5", "--set", "r1=none"]).unwrap();
    let cfg = Config::load(&path).unwrap();
    assert_eq!(cfg.n_mod, 5);
    assert_eq!(cfg.get("r1").as_deref(), Some("none"));
    let text = modfront(&["init-config", "--config", p(&path)]).unwrap();
    assert_eq!(Config::parse(&text).unwrap(), cfg);
}

fn summary(dir: &Path, name: &str) -> Vec<(f64, f64)> {
    read_csv(&dir.join(name))
        .iter()
        .map(|r| (r[1].parse().unwrap(), r[2].parse().unwrap()))
        .collect()
}

#[test]
fn fresh_filters_follow_their_initializers() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f");
    modfront(&["filters", "--out", p(&out)]).unwrap();
    let tf = summary(&out, "tf_summary.csv");
    assert_eq!(tf.len(), 80);
    let centers: Vec<f64> = tf.iter().map(|(a, b)| 0.5 * (a + b)).collect();
    assert!(centers.windows(2).all(|w| w[0] < w[1]));
    let modc: Vec<f64> = summary(&out, "mod_summary.csv").iter().map(|(a, b)| 0.5 * (a + b)).collect();
    let expect: Vec<f64> = (0..20).map(|m| 20.0 + 40.0 * m as f64).collect();
    for (c, e) in modc.iter().zip(&expect) {
        assert!((c - e).abs() < 1e-6, "{modc:?}");
    }
    let resp = read_csv(&out.join("mod_03_response.csv"));
    assert_eq!(resp.len(), 513);
    let impulse = read_csv(&out.join("tf_000_impulse.csv"));
    assert_eq!(impulse.len(), 256);
}

#[test]
fn trained_checkpoint_filters_and_digest_guard() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    let mut args = vec!["train".to_string(), "--out".into(), p(&run_dir).into()];
    args.extend(tiny(&["--lr", "0.01"]));
    modfront_owned(&args).unwrap();
    let ckpt = run_dir.join("checkpoint.bin");

    let fresh = dir.path().join("fresh");
    let mut fa = vec!["filters".to_string(), "--out".into(), p(&fresh).into()];
    fa.extend(tiny(&["--lr", "0.01"]));
    modfront_owned(&fa).unwrap();
    let trained = dir.path().join("trained");
    modfront(&["filters", "--out", p(&trained), "--checkpoint", p(&ckpt)]).unwrap();
    assert_ne!(summary(&fresh, "mod_summary.csv"), summary(&trained, "mod_summary.csv"));
    assert_ne!(summary(&fresh, "tf_summary.csv"), summary(&trained, "tf_summary.csv"));

    // Same configuration given explicitly is accepted; any change is refused.
    fa[2] = p(&dir.path().join("again")).into();
    fa.extend(["--checkpoint".to_string(), p(&ckpt).into()]);
    modfront_owned(&fa).unwrap();
    let nb = fa.iter().position(|a| a == "--n-bands").unwrap();
    fa[nb + 1] = "9".into();
    let err = modfront_owned(&fa).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("digest"), "{err}");
}

#[test]
fn training_is_deterministic_and_supports_both_variants() {
    let dir = tempfile::tempdir().unwrap();
    let mut histories = Vec::new();
    for (name, variant) in [("a", "sinc"), ("b", "sinc"), ("c", "fir"), ("d", "maxpool")] {
        let out = dir.path().join(name);
        let mut args = vec!["train".to_string(), "--out".into(), p(&out).into(), "--variant".into(), variant.into()];
        args.extend(tiny(&[]));
        let line = modfront_owned(&args).unwrap();
        let rec: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(rec["variant"], variant);
        assert!(rec["test_accuracy"].as_f64().is_some());
        histories.push(std::fs::read_to_string(out.join("history.csv")).unwrap());
        assert!(out.join("test_scores.csv").exists());
    }
    assert_eq!(histories[0], histories[1]);
    let a = dir.path().join("a");
    let (s, l) = (a.join("test_scores.csv"), a.join("test_labels.csv"));
    modfront(&["eval", "--scores", p(&s), "--labels", p(&l), "--out", p(&a.join("eval"))]).unwrap();
    assert!(histories[0].lines().any(|l| l == "epoch,split,loss,roc_auc,pr_auc,lr"));
    assert_ne!(histories[0], histories[2]);
}

#[test]
fn stride_sweep_writes_one_record_per_stride() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep");
    let mut args = vec!["train".to_string(), "--out".into(), p(&out).into(), "--mod-stride".into(), "32,160,320".into()];
    args.extend(tiny(&["--epochs", "1"]));
    modfront_owned(&args).unwrap();
    let lines: Vec<serde_json::Value> = std::fs::read_to_string(out.join("metrics.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let strides: Vec<u64> = lines.iter().map(|r| r["mod_stride"].as_u64().unwrap()).collect();
    assert_eq!(strides, [32, 160, 320]);
    for s in [32, 160, 320] {
        assert!(out.join(format!("stride_{s}")).join("history.csv").exists());
    }
}

#[test]
fn manifest_training_reads_labelled_wavs() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = String::from("path,label\n");
    for i in 0..8 {
        let (label, rate) = if i % 2 == 0 { ("slow", 4.0) } else { ("fast", 40.0) };
        let x: Vec<f64> = noise(16_000, 20 + i)
            .iter()
            .enumerate()
            .map(|(n, v)| 0.3 * v * (1.0 + 0.9 * (2.0 * PI * rate * n as f64 / 16_000.0).cos()))
            .collect();
        wav(dir.path(), &format!("{i}.wav"), &x);
        manifest.push_str(&format!("{i}.wav,{label}\n"));
    }
    let m = dir.path().join("m.csv");
    std::fs::write(&m, manifest).unwrap();
    let out = dir.path().join("run");
    let mut args = vec!["train".to_string(), "--out".into(), p(&out).into(), "--manifest".into(), p(&m).into()];
    args.extend(tiny(&[]));
    modfront_owned(&args).unwrap();
    let header = std::fs::read_to_string(out.join("test_scores.csv")).unwrap();
    assert!(header.lines().any(|l| l == "fast,slow"), "{header}");
}

fn table(dir: &Path, name: &str, header: &str, rows: &[Vec<f64>]) -> PathBuf {
    let mut s = format!("{header}\n");
    for r in rows {
        s.push_str(&r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    let path = dir.join(name);
    std::fs::write(&path, s).unwrap();
    path
}

#[test]
fn eval_on_perfect_scores_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let labels: Vec<Vec<f64>> = (0..10).map(|i| vec![(i % 2) as f64, (i % 3 == 0) as u8 as f64]).collect();
    let scores: Vec<Vec<f64>> = labels.iter().map(|r| r.iter().map(|v| 0.1 + 0.8 * v).collect()).collect();
    let l = table(dir.path(), "l.csv", "a,b", &labels);
    let s = table(dir.path(), "s.csv", "a,b", &scores);
    let out = dir.path().join("e");
    modfront(&["eval", "--scores", p(&s), "--labels", p(&l), "--out", p(&out)]).unwrap();
    let rows = read_csv(&out.join("metrics.csv"));
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert_eq!((r[1].as_str(), r[2].as_str()), ("1", "1"), "{r:?}");
    }
}

#[test]
fn eval_on_random_scores_is_chance() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let labels: Vec<Vec<f64>> = (0..10_000).map(|_| vec![rng.gen_bool(0.3) as u8 as f64]).collect();
    let scores: Vec<Vec<f64>> = (0..10_000).map(|_| vec![rng.gen::<f64>()]).collect();
    let l = table(dir.path(), "l.csv", "t", &labels);
    let s = table(dir.path(), "s.csv", "t", &scores);
    let out = dir.path().join("e");
    modfront(&["eval", "--scores", p(&s), "--labels", p(&l), "--out", p(&out)]).unwrap();
    let roc: f64 = read_csv(&out.join("metrics.csv"))[0][1].parse().unwrap();
    assert!((roc - 0.5).abs() <= 0.02, "{roc}");
}

#[test]
fn eval_flags_single_class_tags_and_rejects_mismatched_columns() {
    let dir = tempfile::tempdir().unwrap();
    let labels: Vec<Vec<f64>> = (0..6).map(|i| vec![(i % 2) as f64, 1.0]).collect();
    let scores: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 10.0, 0.5]).collect();
    let l = table(dir.path(), "l.csv", "a,always", &labels);
    let s = table(dir.path(), "s.csv", "a,always", &scores);
    let out = dir.path().join("e");
    let text = modfront(&["eval", "--scores", p(&s), "--labels", p(&l), "--out", p(&out)]).unwrap();
    assert!(text.contains("always"), "{text}");
    let rows = read_csv(&out.join("metrics.csv"));
    let always = rows.iter().find(|r| r[0] == "always").unwrap();
    assert_eq!(always[3], "false");

    let s2 = table(dir.path(), "s2.csv", "a,other", &scores);
    let err = modfront(&["eval", "--scores", p(&s2), "--labels", p(&l), "--out", p(&out)]).unwrap_err();
    assert!(err.to_string().contains("other") && err.to_string().contains("always"), "{err}");
}
