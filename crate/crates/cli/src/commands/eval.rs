//! Per-tag and macro-averaged ROC-AUC / PR-AUC from a score file and a
//! label file.

use std::path::Path;

use modfront_core::metrics::{macro_average, Metric, PredictionTable};

use crate::artifact::write_file;
use crate::commands::{ensure_dir, opt};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub tags: Vec<String>,
    pub roc_auc: Vec<Option<f64>>,
    pub pr_auc: Vec<Option<f64>>,
    pub overall_roc_auc: f64,
    pub overall_pr_auc: f64,
    pub undefined: Vec<String>,
}

/// Header of tag names and the numeric rows of a CSV; `#` lines are skipped.
pub fn read_table(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))?;
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::io(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        let row = rec
            .iter()
            .map(|v| match v {
                "true" => Ok(1.0),
                "false" => Ok(0.0),
                _ => v.parse::<f64>().map_err(|_| {
                    CliError::Config(format!("{}: row {}: '{v}' is not a number", path.display(), i + 1))
                }),
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((names, rows))
}

/// Writes `metrics.csv` with one line per tag and a final `overall` line.
pub fn eval(scores_path: &Path, labels_path: &Path, out: &Path) -> CliResult<EvalReport> {
    let (score_names, scores) = read_table(scores_path)?;
    let (label_names, labels) = read_table(labels_path)?;
    if score_names != label_names {
        let n = score_names.len().max(label_names.len());
        let offending: Vec<String> = (0..n)
            .filter(|&i| score_names.get(i) != label_names.get(i))
            .map(|i| {
                format!(
                    "column {}: scores '{}' vs labels '{}'",
                    i + 1,
                    score_names.get(i).map_or("<missing>", String::as_str),
                    label_names.get(i).map_or("<missing>", String::as_str)
                )
            })
            .collect();
        return Err(CliError::Config(format!(
            "score and label columns differ: {}",
            offending.join("; ")
        )));
    }
    if scores.len() != labels.len() {
        return Err(CliError::Config(format!(
            "{} score rows vs {} label rows",
            scores.len(),
            labels.len()
        )));
    }
    let c = score_names.len();
    for (file, table) in [(scores_path, &scores), (labels_path, &labels)] {
        if let Some(i) = table.iter().position(|r| r.len() != c) {
            return Err(CliError::Config(format!(
                "{}: row {} has {} values for {c} columns",
                file.display(),
                i + 1,
                table[i].len()
            )));
        }
    }
    for (i, row) in labels.iter().enumerate() {
        if let Some(j) = row.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(CliError::Config(format!(
                "{}: row {} column '{}' is not 0 or 1",
                labels_path.display(),
                i + 1,
                score_names[j]
            )));
        }
    }
    let table = PredictionTable::new(
        scores.concat(),
        labels.concat().into_iter().map(|v| v == 1.0).collect(),
        score_names.clone(),
    )?;
    let roc = macro_average(&table, Metric::RocAuc)?;
    let pr = macro_average(&table, Metric::PrAuc)?;
    let undefined: Vec<String> = roc
        .undefined_classes()
        .into_iter()
        .chain(pr.undefined_classes())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .map(|i| score_names[i].clone())
        .collect();

    ensure_dir(out)?;
    let mut s = String::from("tag,roc_auc,pr_auc,defined\n");
    for (i, name) in score_names.iter().enumerate() {
        let defined = roc.per_class[i].is_some() && pr.per_class[i].is_some();
        s.push_str(&format!(
            "{name},{},{},{defined}\n",
            opt(roc.per_class[i]),
            opt(pr.per_class[i])
        ));
    }
    s.push_str(&format!("overall,{},{},true\n", roc.overall, pr.overall));
    write_file(&out.join("metrics.csv"), s.as_bytes())?;
    Ok(EvalReport {
        tags: score_names,
        roc_auc: roc.per_class,
        pr_auc: pr.per_class,
        overall_roc_auc: roc.overall,
        overall_pr_auc: pr.overall,
        undefined,
    })
}
