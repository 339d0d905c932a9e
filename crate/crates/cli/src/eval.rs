//! Multi-run evaluation.
//!
//! Each run draws a fresh stratified split and seeds the banks and folds with
//! `seed + run`. Per-AP features are extracted once per run and shared by
//! every topology row; an AMAP model reuses the SAP heads of its APs, which
//! are the same models it would fit on its own.

use std::time::Instant;

use csi_har_core::dataset::{split, Dataset, MultiApSample};
use csi_har_core::features::{extract_matrix, FittedBank};
use csi_har_core::fusion::{
    collect_views, concat_features, fit_ap_bank, fit_task_heads, FusionModel, LabelMaps, Prediction, Topology,
};
use csi_har_core::metrics::{aggregate, ConfusionMatrix, RunReport, Summary, TaskMetrics};
use csi_har_core::ridge::RidgeModel;
use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowReport {
    pub label: String,
    pub topology: Topology,
    pub ap_ids: Vec<u32>,
    pub runs: Vec<RunReport>,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: RunConfig,
    pub activity_names: Vec<String>,
    pub orientation_names: Vec<String>,
    pub rows: Vec<RowReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub run: usize,
    pub model: String,
    pub sample_id: u64,
    pub activity_true: usize,
    pub activity_pred: usize,
    pub orientation_true: usize,
    pub orientation_pred: usize,
}

/// One model row of the report: label, topology and AP set.
#[derive(Debug, Clone)]
struct RowSpec {
    label: String,
    topology: Topology,
    ap_ids: Vec<u32>,
}

fn row_specs(topologies: &[Topology], aps: &[u32]) -> Vec<RowSpec> {
    let mut topologies = topologies.to_vec();
    topologies.sort_unstable();
    topologies.dedup();
    let mut rows = Vec::new();
    for t in topologies {
        match t {
            Topology::Sap => rows.extend(aps.iter().map(|&a| RowSpec {
                label: format!("SAP (AP {a})"),
                topology: t,
                ap_ids: vec![a],
            })),
            _ => rows.push(RowSpec {
                label: t.to_string(),
                topology: t,
                ap_ids: aps.to_vec(),
            }),
        }
    }
    rows
}

struct RunOutcome {
    reports: Vec<RunReport>,
    predictions: Vec<PredictionRecord>,
}

fn task_metrics(truth: &[usize], pred: &[usize], classes: usize) -> Result<TaskMetrics, CliError> {
    let cm = ConfusionMatrix::from_labels(truth, pred, (0..classes).collect())?;
    Ok(TaskMetrics::from_confusion(&cm)?)
}

fn score_row(
    dataset: &Dataset,
    test: &[&MultiApSample],
    preds: &[Prediction],
    run: usize,
    run_seed: u64,
    label: &str,
    records: &mut Vec<PredictionRecord>,
) -> Result<RunReport, CliError> {
    let act_true: Vec<usize> = test.iter().map(|s| s.activity).collect();
    let ori_true: Vec<usize> = test.iter().map(|s| s.orientation).collect();
    let act_pred: Vec<usize> = preds.iter().map(|p| p.activity).collect();
    let ori_pred: Vec<usize> = preds.iter().map(|p| p.orientation).collect();
    records.extend(test.iter().zip(preds).map(|(s, p)| PredictionRecord {
        run,
        model: label.to_string(),
        sample_id: s.sample_id,
        activity_true: s.activity,
        activity_pred: p.activity,
        orientation_true: s.orientation,
        orientation_pred: p.orientation,
    }));
    Ok(RunReport {
        run_seed,
        activity: task_metrics(&act_true, &act_pred, dataset.num_activities())?,
        orientation: task_metrics(&ori_true, &ori_pred, dataset.num_orientations())?,
    })
}

fn run_once(
    dataset: &Dataset,
    cfg: &RunConfig,
    aps: &[u32],
    rows: &[RowSpec],
    run: usize,
) -> Result<RunOutcome, CliError> {
    let started = Instant::now();
    let seed = cfg.run_seed(run);
    let parts = split(dataset, &cfg.split(seed))?;
    let train = dataset.subset(&parts.train);
    let test = dataset.subset(&parts.test);
    let fusion = cfg.fusion(seed);
    let labels = LabelMaps {
        activities: dataset.activity_names.clone(),
        orientations: dataset.orientation_names.clone(),
    };
    let act: Vec<usize> = train.iter().map(|s| s.activity).collect();
    let ori: Vec<usize> = train.iter().map(|s| s.orientation).collect();

    let train_views = collect_views(&train, aps)?;
    let test_views = collect_views(&test, aps)?;
    let mut banks: Vec<FittedBank> = Vec::with_capacity(aps.len());
    let mut train_features: Vec<Array2<f64>> = Vec::with_capacity(aps.len());
    let mut test_features: Vec<Array2<f64>> = Vec::with_capacity(aps.len());
    for (i, &ap) in aps.iter().enumerate() {
        let bank = fit_ap_bank(&train_views[i], ap, &fusion)?;
        train_features.push(extract_matrix(&train_views[i], &bank)?);
        test_features.push(extract_matrix(&test_views[i], &bank)?);
        banks.push(bank);
    }

    let needs_ap_heads = rows.iter().any(|r| r.topology != Topology::Cmap);
    let mut ap_heads: Vec<Option<(RidgeModel, RidgeModel)>> = vec![None; aps.len()];
    if needs_ap_heads {
        for (i, slot) in ap_heads.iter_mut().enumerate() {
            *slot = Some(fit_task_heads(train_features[i].clone(), &act, &ori, &fusion.ridge)?);
        }
    }
    let cmap_heads = if rows.iter().any(|r| r.topology == Topology::Cmap) {
        let views: Vec<ArrayView2<'_, f64>> = train_features.iter().map(|m| m.view()).collect();
        let joined = concat_features(views)?;
        train_features.clear();
        Some(fit_task_heads(joined, &act, &ori, &fusion.ridge)?)
    } else {
        None
    };
    drop(train_features);

    let mut reports = Vec::with_capacity(rows.len());
    let mut predictions = Vec::new();
    for row in rows {
        let idx: Vec<usize> = row
            .ap_ids
            .iter()
            .map(|a| aps.iter().position(|b| b == a).expect("rows use selected APs"))
            .collect();
        let (activity_heads, orientation_heads) = match row.topology {
            Topology::Cmap => {
                let (a, o) = cmap_heads.clone().expect("fitted above");
                (vec![a], vec![o])
            }
            _ => idx
                .iter()
                .map(|&i| ap_heads[i].clone().expect("fitted above"))
                .unzip(),
        };
        let model = FusionModel {
            topology: row.topology,
            ap_ids: row.ap_ids.clone(),
            banks: idx.iter().map(|&i| banks[i].clone()).collect(),
            activity_heads,
            orientation_heads,
            labels: labels.clone(),
        };
        let views: Vec<ArrayView2<'_, f64>> = idx.iter().map(|&i| test_features[i].view()).collect();
        let preds = model.predict_feature_rows(&views)?;
        reports.push(score_row(dataset, &test, &preds, run, seed, &row.label, &mut predictions)?);
    }
    eprintln!("run {} (seed {seed}) finished in {:.1?}", run + 1, started.elapsed());
    Ok(RunOutcome { reports, predictions })
}

/// Runs the full protocol; returns the report and the per-sample log.
pub fn evaluate(dataset: &Dataset, cfg: &RunConfig) -> Result<(EvalReport, Vec<PredictionRecord>), CliError> {
    cfg.validate()?;
    let aps = cfg.resolve_aps(dataset)?;
    let rows = row_specs(&cfg.topologies, &aps);
    let outcomes: Vec<RunOutcome> = if cfg.parallel_runs {
        (0..cfg.runs)
            .into_par_iter()
            .map(|r| run_once(dataset, cfg, &aps, &rows, r))
            .collect::<Result<_, _>>()?
    } else {
        (0..cfg.runs)
            .map(|r| run_once(dataset, cfg, &aps, &rows, r))
            .collect::<Result<_, _>>()?
    };

    let mut reports = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let runs: Vec<RunReport> = outcomes.iter().map(|o| o.reports[i].clone()).collect();
        reports.push(RowReport {
            label: row.label.clone(),
            topology: row.topology,
            ap_ids: row.ap_ids.clone(),
            summary: aggregate(&runs)?,
            runs,
        });
    }
    let predictions = outcomes.into_iter().flat_map(|o| o.predictions).collect();
    Ok((
        EvalReport {
            // output locations do not influence results and are left out so
            // that identical runs give identical report bytes
            config: RunConfig {
                model_out: None,
                report_dir: None,
                ..cfg.clone()
            },
            activity_names: dataset.activity_names.clone(),
            orientation_names: dataset.orientation_names.clone(),
            rows: reports,
        },
        predictions,
    ))
}
