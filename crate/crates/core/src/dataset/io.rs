use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_amplitudes, CsiSample, Dataset, MultiApSample};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub subcarriers: usize,
    pub length: usize,
    pub ap_ids: Vec<u32>,
    pub activity_names: Vec<String>,
    pub orientation_names: Vec<String>,
    pub samples: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sample_id: u64,
    pub activity: usize,
    pub orientation: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_id: Option<u32>,
    /// Amplitude file per AP, relative to the manifest directory.
    pub files: BTreeMap<u32, String>,
}

impl DatasetManifest {
    fn validate(&self, path: &Path) -> Result<()> {
        if self.version > MANIFEST_VERSION {
            return Err(Error::format(
                path,
                format!("manifest version {} is newer than supported {MANIFEST_VERSION}", self.version),
            ));
        }
        if self.subcarriers == 0 || self.length == 0 {
            return Err(Error::format(path, "subcarriers and length must be positive"));
        }
        let expected: Vec<u32> = self.ap_ids.clone();
        for s in &self.samples {
            let listed: Vec<u32> = s.files.keys().copied().collect();
            let mut sorted = expected.clone();
            sorted.sort_unstable();
            if listed != sorted {
                return Err(Error::format(
                    path,
                    format!("sample {} lists files for APs {listed:?}, expected {sorted:?}", s.sample_id),
                ));
            }
            if s.activity >= self.activity_names.len() || s.orientation >= self.orientation_names.len() {
                return Err(Error::format(
                    path,
                    format!("sample {} has a class id outside the declared names", s.sample_id),
                ));
            }
        }
        Ok(())
    }
}

/// Parses one amplitude file: `rows` lines of `cols` whitespace-separated values.
pub fn read_amplitudes(path: &Path, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.len() != rows {
        return Err(Error::format(
            path,
            format!("expected S = {rows} rows, found {}", lines.len()),
        ));
    }
    let mut values = Vec::with_capacity(rows * cols);
    for (r, line) in lines.iter().enumerate() {
        let before = values.len();
        for token in line.split_whitespace() {
            let v: f64 = token
                .parse()
                .map_err(|_| Error::format(path, format!("row {r}: cannot parse {token:?}")))?;
            values.push(v);
        }
        if values.len() - before != cols {
            return Err(Error::format(
                path,
                format!("row {r}: expected T = {cols} values, found {}", values.len() - before),
            ));
        }
    }
    let amplitudes = Array2::from_shape_vec((rows, cols), values).expect("shape checked above");
    check_amplitudes(&amplitudes).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    Ok(amplitudes)
}

/// Shortest round-trip decimal per value, so reading back is bit-exact.
pub fn write_amplitudes(path: &Path, amplitudes: &Array2<f64>) -> Result<()> {
    let mut text = String::with_capacity(amplitudes.len() * 8);
    for row in amplitudes.rows() {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                text.push(' ');
            }
            write!(text, "{v}").expect("writing to a String cannot fail");
        }
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load(manifest_path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
    let manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| Error::format(manifest_path, e.to_string()))?;
    manifest.validate(manifest_path)?;
    let root = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut ap_ids = manifest.ap_ids.clone();
    ap_ids.sort_unstable();

    let samples = manifest
        .samples
        .par_iter()
        .map(|entry| {
            let views = entry
                .files
                .iter()
                .map(|(&ap_id, rel)| {
                    let amplitudes =
                        read_amplitudes(&root.join(rel), manifest.subcarriers, manifest.length)?;
                    Ok(CsiSample {
                        ap_id,
                        sample_id: entry.sample_id,
                        amplitudes,
                        activity: entry.activity,
                        orientation: entry.orientation,
                        user_id: entry.user_id,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(MultiApSample {
                sample_id: entry.sample_id,
                activity: entry.activity,
                orientation: entry.orientation,
                user_id: entry.user_id,
                views,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let dataset = Dataset {
        subcarriers: manifest.subcarriers,
        length: manifest.length,
        ap_ids,
        activity_names: manifest.activity_names,
        orientation_names: manifest.orientation_names,
        samples,
    };
    dataset.validate()?;
    Ok(dataset)
}

fn sample_file(ap_id: u32, sample_id: u64) -> String {
    format!("ap{ap_id}/s{sample_id:06}.txt")
}

/// Writes the manifest and one amplitude file per (sample, AP) under `dir`.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf> {
    dataset.validate()?;
    for &ap in &dataset.ap_ids {
        let sub = dir.join(format!("ap{ap}"));
        fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    }
    dataset.samples.par_iter().try_for_each(|s| {
        s.views
            .iter()
            .try_for_each(|v| write_amplitudes(&dir.join(sample_file(v.ap_id, s.sample_id)), &v.amplitudes))
    })?;

    let manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        subcarriers: dataset.subcarriers,
        length: dataset.length,
        ap_ids: dataset.ap_ids.clone(),
        activity_names: dataset.activity_names.clone(),
        orientation_names: dataset.orientation_names.clone(),
        samples: dataset
            .samples
            .iter()
            .map(|s| ManifestEntry {
                sample_id: s.sample_id,
                activity: s.activity,
                orientation: s.orientation,
                user_id: s.user_id,
                files: s
                    .views
                    .iter()
                    .map(|v| (v.ap_id, sample_file(v.ap_id, s.sample_id)))
                    .collect(),
            })
            .collect(),
    };
    let path = dir.join(MANIFEST_FILE);
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
