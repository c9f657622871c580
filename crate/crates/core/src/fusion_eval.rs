//! Multiplicative late fusion of per-channel class scores, and the
//! recognition-rate and Jaccard metrics.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::segmentation::ActionSegment;

/// Nonnegative per-class scores with at least one positive entry.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        if scores.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "score vectors need at least 2 classes, got {}",
                scores.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidParameter("scores must be finite and nonnegative".into()));
        }
        if scores.iter().all(|&s| s == 0.0) {
            return Err(Error::ZeroVector);
        }
        Ok(ScoreVector(scores))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn l1_normalize(v: &ScoreVector) -> Result<ScoreVector> {
    let sum: f64 = v.0.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok(ScoreVector(v.0.iter().map(|s| s / sum).collect()))
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Two-stage product fusion. Consecutive channels form forward/backward
/// pairs (`DDI_f, DDI_b, DDNI_f, ...`); each pair's element-wise product is
/// L1-normalised, then the pair results are multiplied. A trailing unpaired
/// channel is normalised on its own. Returns the label and the final,
/// unnormalised product.
pub fn product_fuse(channels: &[ScoreVector]) -> Result<(usize, Vec<f64>)> {
    let first = channels.first().ok_or(Error::EmptyInput)?;
    for c in channels {
        if c.len() != first.len() {
            return Err(Error::LengthMismatch(first.len(), c.len()));
        }
    }
    let mut fused = vec![1.0; first.len()];
    for group in channels.chunks(2) {
        let product: Vec<f64> = match group {
            [a, b] => a.0.iter().zip(&b.0).map(|(x, y)| x * y).collect(),
            [a] => a.0.clone(),
            _ => unreachable!(),
        };
        let sum: f64 = product.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::ZeroVector);
        }
        for (f, p) in fused.iter_mut().zip(&product) {
            *f *= p / sum;
        }
    }
    Ok((argmax(&fused), fused))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PredictionRecord {
    pub predicted: u32,
    pub truth: u32,
}

pub fn recognition_rate(records: &[PredictionRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hits = records.iter().filter(|r| r.predicted == r.truth).count();
    Ok(hits as f64 / records.len() as f64)
}

/// A class label (or none) for every frame of a sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameLabeling {
    pub labels: Vec<Option<u32>>,
}

impl FrameLabeling {
    pub fn new(labels: Vec<Option<u32>>) -> Self {
        FrameLabeling { labels }
    }

    /// Paints labelled segments in order onto `length` frames; a frame shared
    /// by two segments takes the later one's label.
    pub fn from_segments(length: usize, segments: &[ActionSegment]) -> Result<Self> {
        let mut labels = vec![None; length];
        for s in segments {
            s.validate(length)?;
            for l in &mut labels[s.start - 1..s.end] {
                *l = s.label;
            }
        }
        Ok(FrameLabeling { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> BTreeSet<u32> {
        self.labels.iter().flatten().copied().collect()
    }
}

/// Frame-level intersection over union for one class; 0 when the class is
/// absent from both labelings.
pub fn jaccard_class(truth: &FrameLabeling, pred: &FrameLabeling, class_id: u32) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch(truth.len(), pred.len()));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (t, p) in truth.labels.iter().zip(&pred.labels) {
        let (g, q) = (*t == Some(class_id), *p == Some(class_id));
        inter += usize::from(g && q);
        union += usize::from(g || q);
    }
    Ok(if union == 0 { 0.0 } else { inter as f64 / union as f64 })
}

/// Sum of per-class Jaccard over every class in either labeling, divided by
/// the number of distinct true classes. A sequence without true labels
/// scores 0.
pub fn jaccard_sequence(truth: &FrameLabeling, pred: &FrameLabeling) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch(truth.len(), pred.len()));
    }
    let true_classes = truth.classes();
    if true_classes.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for class in true_classes.union(&pred.classes()) {
        sum += jaccard_class(truth, pred, *class)?;
    }
    Ok(sum / true_classes.len() as f64)
}

pub fn mean_jaccard(per_sequence: &[f64]) -> Result<f64> {
    if per_sequence.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(per_sequence.iter().sum::<f64>() / per_sequence.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(v: &[f64]) -> ScoreVector {
        ScoreVector::new(v.to_vec()).unwrap()
    }

    fn span(len: usize, spans: &[(usize, usize, u32)]) -> FrameLabeling {
        let segs: Vec<_> = spans
            .iter()
            .map(|&(s, e, l)| ActionSegment::labelled(s, e, l))
            .collect();
        FrameLabeling::from_segments(len, &segs).unwrap()
    }

    #[test]
    fn l1_examples() {
        assert_eq!(l1_normalize(&sv(&[1.0, 1.0, 2.0])).unwrap(), sv(&[0.25, 0.25, 0.5]));
        let n = sv(&[0.2, 0.8]);
        assert_eq!(l1_normalize(&n).unwrap(), n);
        assert!(matches!(ScoreVector::new(vec![0.0; 3]), Err(Error::ZeroVector)));
    }

    #[test]
    fn fusion_examples() {
        assert_eq!(product_fuse(&[sv(&[0.1, 0.7, 0.2])]).unwrap().0, 1);

        let (label, fused) = product_fuse(&[sv(&[0.5, 0.5]), sv(&[0.9, 0.1])]).unwrap();
        assert_eq!(label, 0);
        assert!((fused[0] / fused[1] - 9.0).abs() < 1e-12);

        assert!(matches!(
            product_fuse(&[sv(&[0.5, 0.5]), sv(&[0.2, 0.3, 0.5])]),
            Err(Error::LengthMismatch(2, 3))
        ));
        assert!(matches!(
            product_fuse(&[sv(&[1.0, 0.0]), sv(&[0.0, 1.0])]),
            Err(Error::ZeroVector)
        ));
        assert!(matches!(product_fuse(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn uniform_channels_pick_class_zero() {
        let u = sv(&[0.25; 4]);
        assert_eq!(product_fuse(&vec![u; 6]).unwrap().0, 0);
    }

    #[test]
    fn recognition_examples() {
        let r = |p, t| PredictionRecord { predicted: p, truth: t };
        assert_eq!(recognition_rate(&[r(1, 1), r(2, 2)]).unwrap(), 1.0);
        assert_eq!(recognition_rate(&[r(1, 0), r(2, 1)]).unwrap(), 0.0);
        assert_eq!(recognition_rate(&[r(1, 1), r(2, 2), r(0, 0), r(0, 3)]).unwrap(), 0.75);
        assert!(matches!(recognition_rate(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn jaccard_examples() {
        let a = span(20, &[(1, 10, 4)]);
        assert_eq!(jaccard_class(&a, &a, 4).unwrap(), 1.0);
        assert_eq!(jaccard_class(&a, &span(20, &[(11, 20, 4)]), 4).unwrap(), 0.0);
        let shifted = span(20, &[(6, 15, 4)]);
        assert!((jaccard_class(&a, &shifted, 4).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(jaccard_class(&a, &a, 9).unwrap(), 0.0);

        let truth = span(20, &[(1, 10, 0), (11, 20, 1)]);
        assert_eq!(jaccard_sequence(&truth, &truth).unwrap(), 1.0);
        let half = span(20, &[(1, 10, 0)]);
        assert_eq!(jaccard_sequence(&truth, &half).unwrap(), 0.5);
        let spurious = FrameLabeling::new(
            half.labels
                .iter()
                .enumerate()
                .map(|(i, l)| if i == 15 { Some(7) } else { *l })
                .collect(),
        );
        assert_eq!(jaccard_sequence(&truth, &spurious).unwrap(), 0.5);

        assert!(matches!(
            jaccard_sequence(&truth, &span(5, &[])),
            Err(Error::LengthMismatch(20, 5))
        ));
    }

    #[test]
    fn mean_examples() {
        assert_eq!(mean_jaccard(&[1.0]).unwrap(), 1.0);
        assert_eq!(mean_jaccard(&[0.0, 1.0]).unwrap(), 0.5);
        assert!((mean_jaccard(&[0.2, 0.3, 0.4]).unwrap() - 0.3).abs() < 1e-15);
        assert!(matches!(mean_jaccard(&[]), Err(Error::EmptyInput)));
    }

    proptest! {
        #[test]
        fn jaccard_class_symmetric_sequence_not(
            a in proptest::collection::vec(proptest::option::of(0u32..3), 12),
            b in proptest::collection::vec(proptest::option::of(0u32..3), 12),
        ) {
            let (a, b) = (FrameLabeling::new(a), FrameLabeling::new(b));
            for c in 0..3 {
                prop_assert_eq!(jaccard_class(&a, &b, c).unwrap(), jaccard_class(&b, &a, c).unwrap());
            }
            for v in [jaccard_sequence(&a, &b).unwrap(), jaccard_sequence(&b, &a).unwrap()] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn jaccard_sequence_depends_on_truth_side() {
        let truth = span(10, &[(1, 5, 0), (6, 10, 1)]);
        let pred = span(10, &[(1, 10, 0)]);
        // (5/10 + 0) / 2 vs (5/10 + 0) / 1
        assert_eq!(jaccard_sequence(&truth, &pred).unwrap(), 0.25);
        assert_eq!(jaccard_sequence(&pred, &truth).unwrap(), 0.5);
    }
}
