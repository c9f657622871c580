//! JSON documents exchanged between pipeline stages.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmentation::ActionSegment;

/// Images written by `encode`. Paths are relative to the manifest file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub segments: Vec<SegmentEntry>,
    pub errors: Vec<ErrorEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentEntry {
    pub segment_id: String,
    pub source_id: String,
    pub start: usize,
    pub end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u32>,
    /// `ddi_fwd`, `ddi_bwd`, ... to image file.
    pub images: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub segment_id: String,
    pub channel: String,
    pub error: String,
    pub message: String,
}

/// A manifest together with the directory its image paths resolve against.
#[derive(Clone, Debug)]
pub struct LoadedManifest {
    pub manifest: Manifest,
    pub base: PathBuf,
}

impl LoadedManifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(LoadedManifest {
            manifest: read_json(path, "manifest")?,
            base: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    pub fn image_path(&self, relative: &str) -> PathBuf {
        self.base.join(relative)
    }
}

/// One external classifier output: `{"segment_id", "channel", "scores"}`,
/// where `channel` is `ddi_fwd`, `ddni_bwd`, ...
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub segment_id: String,
    pub channel: String,
    pub scores: Vec<f64>,
}

/// Ground truth: labelled spans per sequence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub sequences: Vec<SequenceTruth>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceTruth {
    pub sequence_id: String,
    pub length: usize,
    pub segments: Vec<ActionSegment>,
}

impl TruthFile {
    pub fn sequence(&self, id: &str) -> Option<&SequenceTruth> {
        self.sequences.iter().find(|s| s.sequence_id == id)
    }

    /// Label of the true segment overlapping `[start, end]` most (earliest
    /// on ties).
    pub fn label_for(&self, sequence_id: &str, start: usize, end: usize) -> Option<u32> {
        let seq = self.sequence(sequence_id)?;
        let mut best: Option<(usize, u32)> = None;
        for s in &seq.segments {
            let overlap = (end.min(s.end) + 1).saturating_sub(start.max(s.start));
            if let (true, Some(label)) = (overlap > 0, s.label) {
                if best.is_none_or(|(o, _)| overlap > o) {
                    best = Some((overlap, label));
                }
            }
        }
        best.map(|(_, l)| l)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub segment_id: String,
    pub source_id: String,
    pub start: usize,
    pub end: usize,
    pub label: u32,
    pub fused: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceMetrics {
    pub sequence_id: String,
    pub jaccard: f64,
    pub levenshtein: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub recognition_rate: f64,
    /// Absent when the truth has no sequences to score frame-wise.
    pub mean_jaccard: Option<f64>,
    pub per_sequence: Vec<SequenceMetrics>,
}

pub fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(what, e))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("documents serialise");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_by_largest_overlap() {
        let truth = TruthFile {
            sequences: vec![SequenceTruth {
                sequence_id: "a".into(),
                length: 30,
                segments: vec![ActionSegment::labelled(1, 12, 4), ActionSegment::labelled(12, 30, 7)],
            }],
        };
        assert_eq!(truth.label_for("a", 1, 13), Some(4));
        assert_eq!(truth.label_for("a", 10, 30), Some(7));
        assert_eq!(truth.label_for("b", 1, 3), None);
    }

    #[test]
    fn score_record_shape() {
        let r: Vec<ScoreRecord> =
            serde_json::from_str(r#"[{"segment_id": "s1", "channel": "ddi_fwd", "scores": [0.2, 0.8]}]"#).unwrap();
        assert_eq!(r[0].scores, vec![0.2, 0.8]);
    }
}
