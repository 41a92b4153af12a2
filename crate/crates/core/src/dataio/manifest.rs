//! On-disk dataset artifacts: the stream manifest emitted by `generate` and
//! the window-set files exchanged between `split`, `augment`, `train`, and
//! `eval`.

use crate::dataio::{Label, LabeledDataset, TimeWindow, AXES};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamEntry {
    pub path: String,
    pub label: Label,
    pub samples: usize,
}

/// Index of generated stream CSVs plus per-class sample counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StreamManifest {
    pub version: u32,
    pub sample_rate: f64,
    pub streams: Vec<StreamEntry>,
    pub class_sample_counts: BTreeMap<String, usize>,
}

impl StreamManifest {
    pub fn new(sample_rate: f64, streams: Vec<StreamEntry>) -> StreamManifest {
        let mut counts = BTreeMap::new();
        for s in &streams {
            *counts.entry(s.label.name().to_string()).or_insert(0) += s.samples;
        }
        StreamManifest {
            version: 1,
            sample_rate,
            streams,
            class_sample_counts: counts,
        }
    }
}

/// One labeled window with optional oversampling provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowRecord {
    pub label: Label,
    #[serde(default)]
    pub synthetic: bool,
    /// Indices of the two interpolation parents within the originating
    /// dataset, for synthetic windows only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parents: Option<[usize; 2]>,
    pub values: Vec<f32>,
}

/// A windowed dataset file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowSet {
    pub version: u32,
    pub v_l: usize,
    pub windows: Vec<WindowRecord>,
}

impl WindowSet {
    pub fn from_dataset(ds: &LabeledDataset) -> WindowSet {
        let v_l = ds.v_l().unwrap_or(0);
        WindowSet {
            version: 1,
            v_l,
            windows: ds
                .windows()
                .iter()
                .map(|w| WindowRecord {
                    label: w.label.expect("dataset windows are labeled"),
                    synthetic: false,
                    parents: None,
                    values: w.values().to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_dataset(&self) -> Result<LabeledDataset> {
        let mut windows = Vec::with_capacity(self.windows.len());
        for rec in &self.windows {
            if self.v_l == 0 || rec.values.len() != self.v_l * AXES {
                return Err(Error::Config(format!(
                    "window set record has {} values, expected {}",
                    rec.values.len(),
                    self.v_l * AXES
                )));
            }
            windows.push(TimeWindow::new(rec.values.clone(), self.v_l, Some(rec.label))?);
        }
        LabeledDataset::new(windows)
    }
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Invariant(format!("json serialization failed: {e}")))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!(
        "failed to parse {}: {e}",
        path.display()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_set_roundtrip() {
        let windows = vec![
            TimeWindow::new(vec![0.5; 12], 4, Some(Label::Forklift)).unwrap(),
            TimeWindow::new(vec![-1.5; 12], 4, Some(Label::Truck)).unwrap(),
        ];
        let ds = LabeledDataset::new(windows).unwrap();
        let set = WindowSet::from_dataset(&ds);
        let back = set.to_dataset().unwrap();
        assert_eq!(ds.windows(), back.windows());
    }

    #[test]
    fn manifest_counts() {
        let m = StreamManifest::new(
            20.0,
            vec![
                StreamEntry {
                    path: "a.csv".into(),
                    label: Label::Truck,
                    samples: 100,
                },
                StreamEntry {
                    path: "b.csv".into(),
                    label: Label::Truck,
                    samples: 50,
                },
            ],
        );
        assert_eq!(m.class_sample_counts["Truck"], 150);
    }
}
