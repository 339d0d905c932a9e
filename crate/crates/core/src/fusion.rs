//! SAP, CMAP and AMAP model assembly.
//!
//! Every topology fits one kernel bank per access point, seeded from the
//! base seed and the AP id, so the same AP yields the same bank whichever
//! topology it is part of. SAP and CMAP feed (concatenated) features to one
//! activity head and one orientation head; AMAP keeps a pair of heads per AP
//! and combines their hard predictions by majority vote.

use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{CsiSample, MultiApSample};
use crate::error::{Error, Result};
use crate::features::{extract_into, extract_matrix, fit_bank, FittedBank};
use crate::kernel_bank::KernelBankConfig;
use crate::ridge::{fit_heads, RidgeConfig, RidgeModel};
use crate::seed::{derive_seed, streams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Sap,
    Cmap,
    Amap,
}

impl Topology {
    pub const ALL: [Topology; 3] = [Topology::Sap, Topology::Cmap, Topology::Amap];
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::Sap => "SAP",
            Topology::Cmap => "CMAP",
            Topology::Amap => "AMAP",
        })
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sap" => Ok(Topology::Sap),
            "cmap" => Ok(Topology::Cmap),
            "amap" => Ok(Topology::Amap),
            other => Err(Error::Config(format!("unknown topology {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub bank: KernelBankConfig,
    pub ridge: RidgeConfig,
}

impl FusionConfig {
    /// Bank configuration for one AP; its seed depends only on the base seed
    /// and the AP id.
    pub fn bank_for(&self, ap_id: u32) -> KernelBankConfig {
        KernelBankConfig {
            seed: derive_seed(self.bank.seed, streams::BANK, u64::from(ap_id)),
            ..self.bank
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMaps {
    pub activities: Vec<String>,
    pub orientations: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub activity: usize,
    pub orientation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionModel {
    pub topology: Topology,
    /// Ascending.
    pub ap_ids: Vec<u32>,
    pub banks: Vec<FittedBank>,
    pub activity_heads: Vec<RidgeModel>,
    pub orientation_heads: Vec<RidgeModel>,
    pub labels: LabelMaps,
}

/// Majority vote with ties going to the class listed first in `class_order`.
pub fn vote(predictions: &[usize], class_order: &[usize]) -> Result<usize> {
    if predictions.is_empty() {
        return Err(Error::Data("cannot vote over zero predictions".into()));
    }
    let mut counts = vec![0usize; class_order.len()];
    for p in predictions {
        let slot = class_order
            .iter()
            .position(|c| c == p)
            .ok_or_else(|| Error::Data(format!("predicted class {p} is not in the class order")))?;
        counts[slot] += 1;
    }
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    Ok(class_order[best])
}

/// Fits the bank for one AP from that AP's training views.
pub fn fit_ap_bank(views: &[&CsiSample], ap_id: u32, config: &FusionConfig) -> Result<FittedBank> {
    if let Some(other) = views.iter().find(|v| v.ap_id != ap_id) {
        return Err(Error::Data(format!(
            "sample {} comes from AP {}, expected AP {ap_id}",
            other.sample_id, other.ap_id
        )));
    }
    fit_bank(views, &config.bank_for(ap_id))
}

/// Fits the activity and orientation heads on one feature matrix.
pub fn fit_task_heads(
    features: Array2<f64>,
    activities: &[usize],
    orientations: &[usize],
    ridge: &RidgeConfig,
) -> Result<(RidgeModel, RidgeModel)> {
    let mut heads = fit_heads(features, &[activities, orientations], ridge)?.into_iter();
    match (heads.next(), heads.next()) {
        (Some(a), Some(o)) => Ok((a, o)),
        _ => unreachable!("fit_heads returns one model per label set"),
    }
}

/// Per-AP views of aligned samples, in the order of `ap_ids`.
pub fn collect_views<'a>(samples: &[&'a MultiApSample], ap_ids: &[u32]) -> Result<Vec<Vec<&'a CsiSample>>> {
    for s in samples {
        for v in &s.views {
            if v.activity != s.activity || v.orientation != s.orientation {
                return Err(Error::Alignment(format!(
                    "AP {} view of sample {} disagrees on labels",
                    v.ap_id, s.sample_id
                )));
            }
        }
    }
    ap_ids
        .iter()
        .map(|&ap| {
            samples
                .iter()
                .map(|s| {
                    s.view(ap).ok_or_else(|| {
                        Error::Alignment(format!("sample {} has no view from AP {ap}", s.sample_id))
                    })
                })
                .collect()
        })
        .collect()
}

fn canonical_aps(ap_ids: &[u32]) -> Result<Vec<u32>> {
    let mut aps = ap_ids.to_vec();
    aps.sort_unstable();
    aps.dedup();
    if aps.is_empty() {
        return Err(Error::Config("at least one AP is required".into()));
    }
    Ok(aps)
}

fn task_labels(samples: impl Iterator<Item = (usize, usize)>) -> (Vec<usize>, Vec<usize>) {
    samples.unzip()
}

/// Single-AP model on the views of one AP.
pub fn train_sap(train: &[&CsiSample], labels: LabelMaps, config: &FusionConfig) -> Result<FusionModel> {
    let ap_id = train
        .first()
        .ok_or_else(|| Error::Fit("empty training set".into()))?
        .ap_id;
    let bank = fit_ap_bank(train, ap_id, config)?;
    let features = extract_matrix(train, &bank)?;
    let (act, ori) = task_labels(train.iter().map(|s| (s.activity, s.orientation)));
    let (a, o) = fit_task_heads(features, &act, &ori, &config.ridge)?;
    Ok(FusionModel {
        topology: Topology::Sap,
        ap_ids: vec![ap_id],
        banks: vec![bank],
        activity_heads: vec![a],
        orientation_heads: vec![o],
        labels,
    })
}

fn fit_banks_and_features(
    views: &[Vec<&CsiSample>],
    ap_ids: &[u32],
    config: &FusionConfig,
) -> Result<Vec<(FittedBank, Array2<f64>)>> {
    views
        .par_iter()
        .zip(ap_ids.par_iter())
        .map(|(v, &ap)| {
            let bank = fit_ap_bank(v, ap, config)?;
            let features = extract_matrix(v, &bank)?;
            Ok((bank, features))
        })
        .collect()
}

/// Concatenated-feature model over the given APs (ascending id order).
pub fn train_cmap(
    train: &[&MultiApSample],
    ap_ids: &[u32],
    labels: LabelMaps,
    config: &FusionConfig,
) -> Result<FusionModel> {
    let aps = canonical_aps(ap_ids)?;
    let views = collect_views(train, &aps)?;
    let fitted = fit_banks_and_features(&views, &aps, config)?;
    let (banks, matrices): (Vec<_>, Vec<_>) = fitted.into_iter().unzip();
    let features = concat_features(matrices.iter().map(|m| m.view()).collect())?;
    drop(matrices);
    let (act, ori) = task_labels(train.iter().map(|s| (s.activity, s.orientation)));
    let (a, o) = fit_task_heads(features, &act, &ori, &config.ridge)?;
    Ok(FusionModel {
        topology: Topology::Cmap,
        ap_ids: aps,
        banks,
        activity_heads: vec![a],
        orientation_heads: vec![o],
        labels,
    })
}

/// Per-AP heads combined by majority vote.
pub fn train_amap(
    train: &[&MultiApSample],
    ap_ids: &[u32],
    labels: LabelMaps,
    config: &FusionConfig,
) -> Result<FusionModel> {
    let aps = canonical_aps(ap_ids)?;
    let views = collect_views(train, &aps)?;
    let (act, ori) = task_labels(train.iter().map(|s| (s.activity, s.orientation)));
    let fitted = fit_banks_and_features(&views, &aps, config)?;
    let mut banks = Vec::with_capacity(aps.len());
    let mut activity_heads = Vec::with_capacity(aps.len());
    let mut orientation_heads = Vec::with_capacity(aps.len());
    for (bank, features) in fitted {
        let (a, o) = fit_task_heads(features, &act, &ori, &config.ridge)?;
        banks.push(bank);
        activity_heads.push(a);
        orientation_heads.push(o);
    }
    Ok(FusionModel {
        topology: Topology::Amap,
        ap_ids: aps,
        banks,
        activity_heads,
        orientation_heads,
        labels,
    })
}

/// Column-wise concatenation in the given AP order.
pub fn concat_features(per_ap: Vec<ArrayView2<'_, f64>>) -> Result<Array2<f64>> {
    if per_ap.len() == 1 {
        return Ok(per_ap[0].to_owned());
    }
    concatenate(Axis(1), &per_ap).map_err(|e| Error::Shape(format!("cannot concatenate AP features: {e}")))
}

impl FusionModel {
    pub fn num_aps(&self) -> usize {
        self.ap_ids.len()
    }

    fn activity_order(&self) -> Vec<usize> {
        (0..self.labels.activities.len()).collect()
    }

    fn orientation_order(&self) -> Vec<usize> {
        (0..self.labels.orientations.len()).collect()
    }

    /// Predicts from pre-extracted features, one slice per AP in `ap_ids`
    /// order.
    pub fn predict_features(&self, per_ap: &[&[f64]]) -> Result<Prediction> {
        if per_ap.len() != self.num_aps() {
            return Err(Error::Shape(format!(
                "{} feature vectors for a model over {} APs",
                per_ap.len(),
                self.num_aps()
            )));
        }
        match self.topology {
            Topology::Sap | Topology::Cmap => {
                let joined;
                let f: &[f64] = if per_ap.len() == 1 {
                    per_ap[0]
                } else {
                    joined = per_ap.concat();
                    &joined
                };
                Ok(Prediction {
                    activity: self.activity_heads[0].predict(f)?,
                    orientation: self.orientation_heads[0].predict(f)?,
                })
            }
            Topology::Amap => {
                let mut acts = Vec::with_capacity(per_ap.len());
                let mut oris = Vec::with_capacity(per_ap.len());
                for ((f, a), o) in per_ap.iter().zip(&self.activity_heads).zip(&self.orientation_heads) {
                    acts.push(a.predict(f)?);
                    oris.push(o.predict(f)?);
                }
                Ok(Prediction {
                    activity: vote(&acts, &self.activity_order())?,
                    orientation: vote(&oris, &self.orientation_order())?,
                })
            }
        }
    }

    /// Row-wise [`Self::predict_features`] over per-AP feature matrices.
    pub fn predict_feature_rows(&self, per_ap: &[ArrayView2<'_, f64>]) -> Result<Vec<Prediction>> {
        let rows = per_ap.first().map_or(0, |m| m.nrows());
        if per_ap.iter().any(|m| m.nrows() != rows) {
            return Err(Error::Shape("per-AP feature matrices differ in row count".into()));
        }
        let per_ap: Vec<Array2<f64>> = per_ap.iter().map(|m| m.as_standard_layout().into_owned()).collect();
        (0..rows)
            .into_par_iter()
            .map(|r| {
                let slices: Vec<&[f64]> = per_ap
                    .iter()
                    .map(|m| m.row(r).to_slice().expect("standard layout"))
                    .collect();
                self.predict_features(&slices)
            })
            .collect()
    }

    /// Predicts one logical sample from its per-AP views (any order).
    pub fn predict(&self, views: &[&CsiSample]) -> Result<Prediction> {
        if views.len() != self.num_aps() {
            return Err(Error::Shape(format!(
                "{} views given, {} model needs {}",
                views.len(),
                self.topology,
                self.num_aps()
            )));
        }
        let features: Vec<Vec<f64>> = self
            .ap_ids
            .par_iter()
            .zip(self.banks.par_iter())
            .map(|(&ap, bank)| {
                let view = views
                    .iter()
                    .find(|v| v.ap_id == ap)
                    .ok_or_else(|| Error::Alignment(format!("no view from AP {ap}")))?;
                let mut out = vec![0.0; bank.num_features()];
                extract_into(view.amplitudes.view(), bank, &mut out)?;
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let slices: Vec<&[f64]> = features.iter().map(Vec::as_slice).collect();
        self.predict_features(&slices)
    }

    /// Predicts many aligned samples, extracting each AP's features in bulk.
    pub fn predict_batch(&self, samples: &[&MultiApSample]) -> Result<Vec<Prediction>> {
        let views = collect_views(samples, &self.ap_ids)?;
        let matrices: Vec<Array2<f64>> = views
            .iter()
            .zip(&self.banks)
            .map(|(v, bank)| extract_matrix(v, bank))
            .collect::<Result<_>>()?;
        let views: Vec<ArrayView2<'_, f64>> = matrices.iter().map(|m| m.view()).collect();
        self.predict_feature_rows(&views)
    }
}
