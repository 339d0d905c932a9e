//! CSI sample model, on-disk dataset layout, stratified splits and a
//! synthetic generator.

mod io;
mod split;
mod synth;

use ndarray::Array2;

use crate::error::{Error, Result};

pub use io::{load, read_amplitudes, write_amplitudes, write_dataset, DatasetManifest, ManifestEntry, MANIFEST_FILE, MANIFEST_VERSION};
pub use split::{split, Split, SplitSpec};
pub use synth::{synth_generate, synth_write, SynthConfig};

pub const DEFAULT_ACTIVITIES: [&str; 4] = ["Circle", "Left-Right", "Push-Pull", "Up-Down"];
pub const DEFAULT_ORIENTATIONS: [&str; 4] = ["0°", "45°", "90°", "180°"];

/// One `S x T` amplitude matrix observed at one access point.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiSample {
    pub ap_id: u32,
    pub sample_id: u64,
    pub amplitudes: Array2<f64>,
    pub activity: usize,
    pub orientation: usize,
    pub user_id: Option<u32>,
}

/// A logical sample: the synchronous views of every access point.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiApSample {
    pub sample_id: u64,
    pub activity: usize,
    pub orientation: usize,
    pub user_id: Option<u32>,
    /// Sorted by ascending `ap_id`.
    pub views: Vec<CsiSample>,
}

impl MultiApSample {
    pub fn view(&self, ap_id: u32) -> Option<&CsiSample> {
        self.views
            .binary_search_by_key(&ap_id, |v| v.ap_id)
            .ok()
            .map(|i| &self.views[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub subcarriers: usize,
    pub length: usize,
    pub ap_ids: Vec<u32>,
    pub activity_names: Vec<String>,
    pub orientation_names: Vec<String>,
    pub samples: Vec<MultiApSample>,
}

impl Dataset {
    pub fn num_activities(&self) -> usize {
        self.activity_names.len()
    }

    pub fn num_orientations(&self) -> usize {
        self.orientation_names.len()
    }

    /// All views recorded by one access point, in sample order.
    pub fn ap_samples(&self, ap_id: u32) -> Result<Vec<&CsiSample>> {
        self.samples
            .iter()
            .map(|s| {
                s.view(ap_id).ok_or_else(|| {
                    Error::Alignment(format!("sample {} has no view for AP {ap_id}", s.sample_id))
                })
            })
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Vec<&MultiApSample> {
        indices.iter().map(|&i| &self.samples[i]).collect()
    }

    /// Checks labels, shapes and amplitude domain for every sample.
    pub fn validate(&self) -> Result<()> {
        let mut ap_ids = self.ap_ids.clone();
        ap_ids.sort_unstable();
        ap_ids.dedup();
        if ap_ids != self.ap_ids || ap_ids.is_empty() {
            return Err(Error::Data("ap_ids must be non-empty, unique and ascending".into()));
        }
        for s in &self.samples {
            if s.activity >= self.num_activities() || s.orientation >= self.num_orientations() {
                return Err(Error::Data(format!(
                    "sample {} has labels ({}, {}) outside the declared classes",
                    s.sample_id, s.activity, s.orientation
                )));
            }
            let view_ids: Vec<u32> = s.views.iter().map(|v| v.ap_id).collect();
            if view_ids != self.ap_ids {
                return Err(Error::Alignment(format!(
                    "sample {} has views {view_ids:?}, expected {:?}",
                    s.sample_id, self.ap_ids
                )));
            }
            for v in &s.views {
                if v.amplitudes.dim() != (self.subcarriers, self.length) {
                    return Err(Error::Shape(format!(
                        "sample {} AP {} is {:?}, expected {}x{}",
                        s.sample_id,
                        v.ap_id,
                        v.amplitudes.dim(),
                        self.subcarriers,
                        self.length
                    )));
                }
                if v.activity != s.activity || v.orientation != s.orientation {
                    return Err(Error::Alignment(format!(
                        "sample {} AP {} disagrees on labels",
                        s.sample_id, v.ap_id
                    )));
                }
                check_amplitudes(&v.amplitudes)
                    .map_err(|e| Error::Data(format!("sample {} AP {}: {e}", s.sample_id, v.ap_id)))?;
            }
        }
        Ok(())
    }
}

pub(crate) fn check_amplitudes(amplitudes: &Array2<f64>) -> std::result::Result<(), String> {
    match amplitudes.iter().find(|v| !v.is_finite() || **v < 0.0) {
        Some(v) if !v.is_finite() => Err(format!("non-finite amplitude {v}")),
        Some(v) => Err(format!("negative amplitude {v}")),
        None => Ok(()),
    }
}
