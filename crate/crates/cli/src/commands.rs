use std::fs;
use std::path::{Path, PathBuf};

use csi_har_core::dataset::{load, read_amplitudes, split, synth_write, CsiSample, Dataset, SynthConfig, MANIFEST_FILE};
use csi_har_core::features::extract_into;
use csi_har_core::fusion::{collect_views, train_amap, train_cmap, train_sap, LabelMaps, Prediction, Topology};
use serde::Serialize;

use crate::archive::{save_model, ModelArchive};
use crate::config::RunConfig;
use crate::eval::{evaluate, EvalReport};
use crate::report::{render_text, write_reports};
use crate::CliError;

/// Writes a synthetic dataset; returns the manifest path.
pub fn cmd_synth(cfg: &SynthConfig, out: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let (_, manifest) = synth_write(cfg, out)?;
    Ok(manifest)
}

/// Loads a dataset from its directory or its manifest file.
pub fn load_dataset(data: &Path) -> Result<Dataset, CliError> {
    let manifest = if data.is_dir() { data.join(MANIFEST_FILE) } else { data.to_path_buf() };
    Ok(load(&manifest)?)
}

fn label_maps(dataset: &Dataset) -> LabelMaps {
    LabelMaps {
        activities: dataset.activity_names.clone(),
        orientations: dataset.orientation_names.clone(),
    }
}

/// Trains one model on the training split of `cfg.seed` and writes it to
/// `cfg.model_out`.
pub fn cmd_train(cfg: &RunConfig) -> Result<ModelArchive, CliError> {
    cfg.validate()?;
    let topology = match cfg.topologies.as_slice() {
        [t] => *t,
        _ => return Err(CliError::Usage("train needs exactly one topology (--topology sap|cmap|amap)".into())),
    };
    let out = cfg
        .model_out
        .as_ref()
        .ok_or_else(|| CliError::Usage("no model output path given".into()))?;
    let dataset = load_dataset(&cfg.data)?;
    let aps = cfg.resolve_aps(&dataset)?;
    let seed = cfg.run_seed(0);
    let parts = split(&dataset, &cfg.split(seed))?;
    let train = dataset.subset(&parts.train);
    let fusion = cfg.fusion(seed);

    let model = match topology {
        Topology::Sap => {
            let [ap] = aps.as_slice() else {
                return Err(CliError::Usage(format!(
                    "SAP trains on exactly one AP, {} selected (use --ap)",
                    aps.len()
                )));
            };
            let views = collect_views(&train, &[*ap])?.remove(0);
            train_sap(&views, label_maps(&dataset), &fusion)?
        }
        Topology::Cmap => train_cmap(&train, &aps, label_maps(&dataset), &fusion)?,
        Topology::Amap => train_amap(&train, &aps, label_maps(&dataset), &fusion)?,
    };
    let archive = ModelArchive {
        config: cfg.clone(),
        model,
    };
    save_model(out, &archive)?;
    Ok(archive)
}

pub struct EvalOutcome {
    pub report: EvalReport,
    pub text: String,
    pub files: Vec<PathBuf>,
}

pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalOutcome, CliError> {
    cfg.validate()?;
    let dataset = load_dataset(&cfg.data)?;
    let (report, records) = evaluate(&dataset, cfg)?;
    let files = match &cfg.report_dir {
        Some(dir) => write_reports(dir, &report, &records)?,
        None => Vec::new(),
    };
    Ok(EvalOutcome {
        text: render_text(&report),
        report,
        files,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictInput {
    /// May be omitted for single-AP models.
    pub ap_id: Option<u32>,
    pub path: PathBuf,
}

impl std::str::FromStr for PredictInput {
    type Err = CliError;

    /// `AP=PATH` or a bare `PATH`.
    fn from_str(s: &str) -> Result<Self, CliError> {
        if let Some((ap, path)) = s.split_once('=') {
            if let Ok(ap_id) = ap.trim().parse() {
                return Ok(Self {
                    ap_id: Some(ap_id),
                    path: PathBuf::from(path),
                });
            }
        }
        Ok(Self {
            ap_id: None,
            path: PathBuf::from(s),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeadScores {
    pub task: &'static str,
    pub ap_ids: Vec<u32>,
    pub classes: Vec<String>,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictOutput {
    pub activity: String,
    pub orientation: String,
    pub prediction: Prediction,
    pub heads: Vec<HeadScores>,
}

/// Assigns each input to one of the model's APs, in model order.
fn match_inputs<'a>(model_aps: &[u32], inputs: &'a [PredictInput]) -> Result<Vec<&'a Path>, CliError> {
    if let ([ap], [only]) = (model_aps, inputs) {
        if only.ap_id.is_none() || only.ap_id == Some(*ap) {
            return Ok(vec![only.path.as_path()]);
        }
    }
    if let Some(bare) = inputs.iter().find(|i| i.ap_id.is_none()) {
        return Err(CliError::Usage(format!(
            "input {} needs an AP id (AP=PATH) for a model over APs {model_aps:?}",
            bare.path.display()
        )));
    }
    if let Some(extra) = inputs.iter().find(|i| !model_aps.contains(&i.ap_id.expect("checked"))) {
        return Err(CliError::Usage(format!(
            "model has no AP {} (expects {model_aps:?})",
            extra.ap_id.expect("checked")
        )));
    }
    model_aps
        .iter()
        .map(|ap| {
            let mut given = inputs.iter().filter(|i| i.ap_id == Some(*ap));
            match (given.next(), given.next()) {
                (Some(i), None) => Ok(i.path.as_path()),
                (None, _) => Err(CliError::Usage(format!("missing input for AP {ap}"))),
                (Some(_), Some(_)) => Err(CliError::Usage(format!("AP {ap} given more than once"))),
            }
        })
        .collect()
}

pub fn cmd_predict(archive: &ModelArchive, inputs: &[PredictInput]) -> Result<PredictOutput, CliError> {
    let model = &archive.model;
    let paths = match_inputs(&model.ap_ids, inputs)?;
    let mut features = Vec::with_capacity(paths.len());
    for ((path, bank), &ap_id) in paths.iter().zip(&model.banks).zip(&model.ap_ids) {
        let sample = CsiSample {
            ap_id,
            sample_id: 0,
            amplitudes: read_amplitudes(path, bank.subcarriers, bank.input_length())?,
            activity: 0,
            orientation: 0,
            user_id: None,
        };
        let mut f = vec![0.0; bank.num_features()];
        extract_into(sample.amplitudes.view(), bank, &mut f)?;
        features.push(f);
    }
    let slices: Vec<&[f64]> = features.iter().map(Vec::as_slice).collect();
    let prediction = model.predict_features(&slices)?;

    let inputs_per_head: Vec<(Vec<u32>, Vec<f64>)> = match model.topology {
        Topology::Amap => model.ap_ids.iter().map(|&a| vec![a]).zip(features).collect(),
        _ => vec![(model.ap_ids.clone(), features.concat())],
    };
    let mut heads = Vec::new();
    for (i, (ap_ids, f)) in inputs_per_head.iter().enumerate() {
        for (task, head, names) in [
            ("activity", &model.activity_heads[i], &model.labels.activities),
            ("orientation", &model.orientation_heads[i], &model.labels.orientations),
        ] {
            heads.push(HeadScores {
                task,
                ap_ids: ap_ids.clone(),
                classes: head.class_labels.iter().map(|&c| names[c].clone()).collect(),
                scores: head.decision_scores(f)?,
            });
        }
    }
    Ok(PredictOutput {
        activity: model.labels.activities[prediction.activity].clone(),
        orientation: model.labels.orientations[prediction.orientation].clone(),
        prediction,
        heads,
    })
}
