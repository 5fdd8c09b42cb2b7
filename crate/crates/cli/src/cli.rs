//! Argument parsing and dispatch. Every configuration key is also a flag
//! (`n_bands` becomes `--n-bands`); flags override the `--config` file and
//! `--set key=value` overrides both.

use std::path::{Path, PathBuf};

use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::commands::analyze::analyze;
use crate::commands::eval::eval;
use crate::commands::filters::filters;
use crate::commands::train::{train_cmd, TrainRequest};
use crate::commands::Model;
use crate::config::{Config, KEYS};
use crate::error::{CliError, CliResult};
use crate::wav::{read_wav, RateMismatch};

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

fn with_config_args(mut cmd: Command) -> Command {
    cmd = cmd
        .arg(Arg::new("config").long("config").value_name("FILE").help("key = value configuration file"))
        .arg(
            Arg::new("set")
                .long("set")
                .value_name("KEY=VALUE")
                .action(ArgAction::Append)
                .help("override one configuration key"),
        );
    for (key, doc) in KEYS {
        let help = if *key == "mod_stride" {
            format!("{doc} (train accepts a comma-separated list, one run per stride)")
        } else {
            doc.to_string()
        };
        cmd = cmd.arg(Arg::new(*key).long(flag_name(key)).value_name("VALUE").help(help));
    }
    cmd
}

pub fn command() -> Command {
    let out = || Arg::new("out").long("out").value_name("DIR").required(true).help("output directory");
    let resample = || {
        Arg::new("resample-linear")
            .long("resample-linear")
            .action(ArgAction::SetTrue)
            .help("linearly resample audio whose rate differs from sample_rate")
    };
    let checkpoint = || Arg::new("checkpoint").long("checkpoint").value_name("FILE").help("trained checkpoint");
    Command::new("modfront")
        .about("Learnable sinc filter bank and modulation front-end")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(
            with_config_args(Command::new("init-config").about("write the default configuration"))
                .arg(Arg::new("out").long("out").value_name("FILE").help("destination (stdout when omitted)")),
        )
        .subcommand(
            with_config_args(Command::new("analyze").about("export filter-bank and modulation matrices"))
                .arg(Arg::new("audio").required(true).value_name("WAV"))
                .arg(out())
                .arg(checkpoint())
                .arg(resample()),
        )
        .subcommand(
            with_config_args(Command::new("filters").about("export filter impulse and frequency responses"))
                .arg(out())
                .arg(checkpoint()),
        )
        .subcommand(
            with_config_args(Command::new("train").about("train on the synthetic task or a WAV manifest"))
                .arg(out())
                .arg(
                    Arg::new("manifest")
                        .long("manifest")
                        .value_name("CSV")
                        .help("path,label manifest of WAV files"),
                )
                .arg(resample()),
        )
        .subcommand(
            Command::new("eval")
                .about("per-tag and overall ROC-AUC / PR-AUC")
                .arg(Arg::new("scores").long("scores").value_name("CSV").required(true))
                .arg(Arg::new("labels").long("labels").value_name("CSV").required(true))
                .arg(out()),
        )
}

struct Resolved {
    config: Config,
    /// True when anything beyond the defaults was supplied.
    explicit: bool,
    mod_strides: Vec<usize>,
}

fn resolve_config(m: &ArgMatches, allow_stride_list: bool) -> CliResult<Resolved> {
    let mut explicit = false;
    let mut config = match m.get_one::<String>("config") {
        Some(p) => {
            explicit = true;
            Config::load(Path::new(p))?
        }
        None => Config::default(),
    };
    let mut mod_strides = Vec::new();
    for (key, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            explicit = true;
            if *key == "mod_stride" && v.contains(',') {
                if !allow_stride_list {
                    return Err(CliError::Config("a list of strides is only accepted by train".into()));
                }
                mod_strides = v
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<usize>()
                            .map_err(|_| CliError::Config(format!("mod_stride: cannot parse '{s}'")))
                    })
                    .collect::<CliResult<_>>()?;
                config.mod_stride = mod_strides[0];
            } else {
                config.set(key, v)?;
            }
        }
    }
    for kv in m.get_many::<String>("set").into_iter().flatten() {
        explicit = true;
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        config.set(k.trim(), v)?;
    }
    config.validate()?;
    Ok(Resolved {
        config,
        explicit,
        mod_strides,
    })
}

fn model_for(m: &ArgMatches) -> CliResult<Model> {
    let r = resolve_config(m, false)?;
    match m.get_one::<String>("checkpoint") {
        Some(p) => Model::from_checkpoint(Path::new(p), r.explicit.then_some(&r.config)),
        None => Model::fresh(r.config),
    }
}

fn policy(m: &ArgMatches) -> RateMismatch {
    if m.get_flag("resample-linear") {
        RateMismatch::ResampleLinear
    } else {
        RateMismatch::Reject
    }
}

fn path_arg(m: &ArgMatches, name: &str) -> PathBuf {
    PathBuf::from(m.get_one::<String>(name).expect("required argument"))
}

/// Parses `args` (including the program name), runs the verb and returns
/// the text to print on success.
pub fn run<I, T>(args: I) -> CliResult<String>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = command()
        .try_get_matches_from(args)
        .map_err(|e| CliError::Config(e.to_string()))?;
    match matches.subcommand() {
        Some(("init-config", m)) => {
            let cfg = resolve_config(m, false)?.config;
            let text = cfg.to_annotated_text();
            match m.get_one::<String>("out") {
                Some(p) => {
                    crate::artifact::write_file(Path::new(p), text.as_bytes())?;
                    Ok(format!("wrote {p} (config digest {})", cfg.digest()))
                }
                None => Ok(text),
            }
        }
        Some(("analyze", m)) => {
            let model = model_for(m)?;
            let audio = read_wav(&path_arg(m, "audio"), model.config.sample_rate, policy(m))?;
            let out = path_arg(m, "out");
            let written = analyze(&model, &audio, &out)?;
            let windows = written.last().map_or(0, |a| a.window + 1);
            Ok(format!(
                "wrote {} matrices from {windows} window(s) to {}",
                written.len(),
                out.display()
            ))
        }
        Some(("filters", m)) => {
            let model = model_for(m)?;
            let out = path_arg(m, "out");
            let report = filters(&model, &out)?;
            Ok(format!(
                "wrote {} filter-bank and {} modulation filters to {}",
                report.tf.len(),
                report.modulation.len(),
                out.display()
            ))
        }
        Some(("train", m)) => {
            let r = resolve_config(m, true)?;
            let req = TrainRequest {
                config: r.config,
                manifest: m.get_one::<String>("manifest").map(PathBuf::from),
                out: path_arg(m, "out"),
                mod_strides: r.mod_strides,
                rate_mismatch: policy(m),
            };
            let records = train_cmd(&req)?;
            Ok(records
                .iter()
                .map(|r| r.to_json().to_string())
                .collect::<Vec<_>>()
                .join("\n"))
        }
        Some(("eval", m)) => {
            let report = eval(&path_arg(m, "scores"), &path_arg(m, "labels"), &path_arg(m, "out"))?;
            let mut s = format!(
                "overall roc_auc {} pr_auc {}",
                report.overall_roc_auc, report.overall_pr_auc
            );
            if !report.undefined.is_empty() {
                s.push_str(&format!("\nundefined (excluded): {}", report.undefined.join(", ")));
            }
            Ok(s)
        }
        _ => unreachable!("subcommand required"),
    }
}
