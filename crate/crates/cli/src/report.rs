//! Text tables and structured records for evaluation results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use csi_har_core::metrics::{MeanStd, TaskSummary};

use crate::archive::write_atomic;
use crate::eval::{EvalReport, PredictionRecord};
use crate::CliError;

pub const TEXT_FILE: &str = "report.txt";
pub const JSON_FILE: &str = "report.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";

fn task_cells(t: &TaskSummary) -> [String; 4] {
    [t.acc.percent(), t.bacc.percent(), t.f1_macro.percent(), t.mcc.percent()]
}

fn table(out: &mut String, header: &[String], rows: &[Vec<String>]) {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].chars().count())
                .chain([header[c].chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |out: &mut String, cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        writeln!(out, "{}", padded.join("  ").trim_end()).expect("writing to a String");
    };
    line(out, header);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(out, &rule);
    for r in rows {
        line(out, r);
    }
}

/// Summary table (mean±std of each metric) followed by the per-class table,
/// all in percent.
pub fn render_text(report: &EvalReport) -> String {
    let runs = report.rows.first().map_or(0, |r| r.summary.runs);
    let mut out = String::new();
    writeln!(out, "Recognition performance, mean±std over {runs} run(s), %").expect("writing to a String");
    writeln!(out).expect("writing to a String");
    let mut header = vec!["Model".to_string()];
    for task in ["Activity", "Orientation"] {
        for m in ["Acc", "BAcc", "F1", "MCC"] {
            header.push(format!("{task} {m}"));
        }
    }
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.label.clone()];
            cells.extend(task_cells(&r.summary.activity));
            cells.extend(task_cells(&r.summary.orientation));
            cells
        })
        .collect();
    table(&mut out, &header, &rows);

    writeln!(out).expect("writing to a String");
    writeln!(out, "Per-class accuracy, mean±std over {runs} run(s), %").expect("writing to a String");
    writeln!(out).expect("writing to a String");
    let mut header = vec!["Model".to_string()];
    header.extend(report.activity_names.iter().cloned());
    header.extend(report.orientation_names.iter().cloned());
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.label.clone()];
            cells.extend(r.summary.activity.per_class_acc.iter().map(MeanStd::percent));
            cells.extend(r.summary.orientation.per_class_acc.iter().map(MeanStd::percent));
            cells
        })
        .collect();
    table(&mut out, &header, &rows);
    out
}

pub fn render_predictions(records: &[PredictionRecord]) -> String {
    let mut out = String::from("run,model,sample_id,activity_true,activity_pred,orientation_true,orientation_pred\n");
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.run, r.model, r.sample_id, r.activity_true, r.activity_pred, r.orientation_true, r.orientation_pred
        )
        .expect("writing to a String");
    }
    out
}

/// Writes the text report, JSON records and prediction log into `dir`.
pub fn write_reports(dir: &Path, report: &EvalReport, records: &[PredictionRecord]) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let json = serde_json::to_string_pretty(report).expect("reports always serialize") + "\n";
    let files = [
        (TEXT_FILE, render_text(report)),
        (JSON_FILE, json),
        (PREDICTIONS_FILE, render_predictions(records)),
    ];
    files
        .iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            write_atomic(&path, body.as_bytes()).map_err(|e| CliError::io(&path, e))?;
            Ok(path)
        })
        .collect()
}
