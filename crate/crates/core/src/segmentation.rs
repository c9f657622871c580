//! Action segmentation of continuous depth streams by quantity of movement
//! (QOM), and Levenshtein scoring of predicted label sequences.
//!
//! The QOM of frame `t` counts the pixels whose depth differs from the
//! stream's first frame by at least `threshold_qom`. Frames with low QOM are
//! rest poses. Candidates below the learned `threshold_inter` are thinned by
//! a sliding window of `L / window_divisor` frames that keeps only the
//! minimum-QOM frame of each window; the survivors delimit actions.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depth_io::DepthSequence;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QomParams {
    /// Per-pixel depth change counted as movement (inclusive).
    pub threshold_qom: u32,
    /// Fraction of the mean action length, at each end of a labelled
    /// segment, whose QOMs feed the candidate threshold.
    pub tail_fraction: f64,
    /// Sliding window is `floor(L / window_divisor)` frames.
    pub window_divisor: f64,
}

impl Default for QomParams {
    fn default() -> Self {
        QomParams {
            threshold_qom: 60,
            tail_fraction: 0.125,
            window_divisor: 2.0,
        }
    }
}

impl QomParams {
    pub fn validate(&self) -> Result<()> {
        if self.threshold_qom == 0 {
            return Err(Error::InvalidParameter("threshold_qom must be > 0".into()));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 0.5) {
            return Err(Error::InvalidParameter("tail_fraction must lie in (0, 0.5)".into()));
        }
        if !(self.window_divisor >= 1.0) {
            return Err(Error::InvalidParameter("window_divisor must be >= 1".into()));
        }
        Ok(())
    }
}

/// A 1-based inclusive frame span, optionally labelled.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSegment {
    pub start: usize,
    pub end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u32>,
}

impl ActionSegment {
    pub fn new(start: usize, end: usize) -> Self {
        ActionSegment {
            start,
            end,
            label: None,
        }
    }

    pub fn labelled(start: usize, end: usize, label: u32) -> Self {
        ActionSegment {
            start,
            end,
            label: Some(label),
        }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn validate(&self, seq_len: usize) -> Result<()> {
        if self.start == 0 || self.start > self.end || self.end > seq_len {
            return Err(Error::FrameOutOfRange {
                index: self.end.max(self.start),
                len: seq_len,
            });
        }
        Ok(())
    }
}

pub fn load_segments(path: &Path) -> Result<Vec<ActionSegment>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format("segment file", e))
}

pub fn save_segments(segments: &[ActionSegment], path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(segments).expect("segments serialize");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentationModel {
    /// Mean labelled action length `L`, in frames.
    pub avg_length: f64,
    /// Frames with QOM strictly below this are boundary candidates.
    pub threshold_inter: f64,
}

impl SegmentationModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.avg_length >= 1.0) || !(self.threshold_inter >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "segmentation model needs avg_length >= 1 and threshold_inter >= 0, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn window(&self, params: &QomParams) -> usize {
        ((self.avg_length / params.window_divisor).floor() as usize).max(1)
    }
}

fn qom_against(reference: &[u16], frame: &[u16], threshold: u32) -> u64 {
    reference
        .iter()
        .zip(frame)
        .filter(|(&a, &b)| u32::from(a.abs_diff(b)) >= threshold)
        .count() as u64
}

/// Number of pixels of frame `t` (1-based) that moved at least
/// `threshold_qom` relative to the first frame.
pub fn compute_qom(seq: &DepthSequence, t: usize, threshold_qom: u32) -> Result<u64> {
    let frame = seq.frame(t)?;
    Ok(qom_against(seq.frames()[0].values(), frame.values(), threshold_qom))
}

/// QOM of every frame, index 0 holding frame 1.
pub fn qom_profile(seq: &DepthSequence, threshold_qom: u32) -> Vec<u64> {
    let reference = seq.frames()[0].values();
    seq.frames()
        .par_iter()
        .map(|f| qom_against(reference, f.values(), threshold_qom))
        .collect()
}

/// Mean plus twice the population standard deviation.
pub fn mean_plus_two_sigma(values: &[u64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    Some(mean + 2.0 * var.sqrt())
}

pub fn fit_segmentation_model(
    training: &[(DepthSequence, Vec<ActionSegment>)],
    params: &QomParams,
) -> Result<SegmentationModel> {
    params.validate()?;
    let lengths: Vec<usize> = training
        .iter()
        .flat_map(|(_, segs)| segs.iter().map(ActionSegment::len))
        .collect();
    if lengths.is_empty() {
        return Err(Error::NoTrainingData);
    }
    for (seq, segs) in training {
        for s in segs {
            s.validate(seq.len())?;
        }
    }
    let avg_length = lengths.iter().sum::<usize>() as f64 / lengths.len() as f64;
    let tail = ((params.tail_fraction * avg_length).ceil() as usize).max(1);

    let mut tail_qoms = Vec::new();
    for (seq, segs) in training {
        let profile = qom_profile(seq, params.threshold_qom);
        for s in segs {
            let head_end = (s.start + tail - 1).min(s.end);
            let tail_start = (s.end + 1).saturating_sub(tail).max(head_end + 1);
            for t in (s.start..=head_end).chain(tail_start..=s.end) {
                tail_qoms.push(profile[t - 1]);
            }
        }
    }
    let threshold_inter = mean_plus_two_sigma(&tail_qoms).ok_or(Error::NoTrainingData)?;
    Ok(SegmentationModel {
        avg_length,
        threshold_inter,
    })
}

/// Boundary frames (1-based, sorted, always including 1 and the last frame)
/// selected from a QOM profile.
pub fn boundaries_from_profile(profile: &[u64], model: &SegmentationModel, params: &QomParams) -> Vec<usize> {
    let n = profile.len();
    if n <= 1 {
        return vec![1; n.max(1)];
    }
    let reach = model.window(params) - 1;
    let candidates: Vec<usize> = (1..=n)
        .filter(|&t| (profile[t - 1] as f64) < model.threshold_inter)
        .collect();

    // The stream ends are fixed boundaries and dominate every window they
    // fall in; otherwise lower QOM wins and ties go to the earlier frame.
    let key = |t: usize| -> (u8, u64, usize) {
        if t == 1 || t == n {
            (0, 0, t)
        } else {
            (1, profile[t - 1], t)
        }
    };

    let mut bounds = vec![1];
    for &f in &candidates {
        if f == 1 || f == n {
            continue;
        }
        let lo = f.saturating_sub(reach).max(1);
        let hi = (f + reach).min(n);
        let dominated = f - 1 <= reach
            || n - f <= reach
            || candidates
                .iter()
                .filter(|&&g| g != f && g >= lo && g <= hi)
                .any(|&g| key(g) < key(f));
        if !dominated {
            bounds.push(f);
        }
    }
    bounds.push(n);
    bounds
}

pub fn segment_actions(
    seq: &DepthSequence,
    model: &SegmentationModel,
    params: &QomParams,
) -> Result<Vec<ActionSegment>> {
    params.validate()?;
    model.validate()?;
    let profile = qom_profile(seq, params.threshold_qom);
    let bounds = boundaries_from_profile(&profile, model, params);
    if bounds.len() == 1 {
        return Ok(vec![ActionSegment::new(1, 1)]);
    }
    Ok(bounds
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| ActionSegment::new(w[0], w[1]))
        .collect())
}

pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `100 * (1 - distance / max(len))` over the segments' label strings.
pub fn levenshtein_segmentation_score(pred: &[ActionSegment], truth: &[ActionSegment]) -> f64 {
    let p: Vec<Option<u32>> = pred.iter().map(|s| s.label).collect();
    let t: Vec<Option<u32>> = truth.iter().map(|s| s.label).collect();
    let longest = p.len().max(t.len());
    if longest == 0 {
        return 100.0;
    }
    100.0 * (1.0 - levenshtein(&p, &t) as f64 / longest as f64)
}
