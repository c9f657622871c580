//! Nearest-centroid classifier over downsampled dynamic images. Scores are
//! a softmax of negative Euclidean distances to the class centroids, so
//! every score vector is strictly positive.

use std::collections::BTreeMap;
use std::path::Path;

use image::imageops::{resize, FilterType};
use image::{GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::depth_io::{load_dynamic_image, DynamicImage};
use crate::error::{Error, Result};
use crate::fusion_eval::ScoreVector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CentroidModel {
    pub size: u32,
    pub classes: usize,
    /// Per view (`ddi_fwd`, ...): one centroid per class.
    pub centroids: BTreeMap<String, Vec<Vec<f64>>>,
}

/// Bilinear resample to `size x size`, scaled to `[0, 1]`, channels
/// interleaved.
pub fn image_features(img: &DynamicImage, size: u32) -> Vec<f64> {
    let (w, h) = (img.width as u32, img.height as u32);
    let raw = match img.channels {
        1 => {
            let buf = GrayImage::from_raw(w, h, img.pixels.clone()).expect("valid image");
            resize(&buf, size, size, FilterType::Triangle).into_raw()
        }
        _ => {
            let buf = RgbImage::from_raw(w, h, img.pixels.clone()).expect("valid image");
            resize(&buf, size, size, FilterType::Triangle).into_raw()
        }
    };
    raw.into_iter().map(|v| f64::from(v) / 255.0).collect()
}

impl CentroidModel {
    /// `examples` maps each view to `(features, class)` pairs.
    pub fn fit(size: u32, examples: &BTreeMap<String, Vec<(Vec<f64>, u32)>>) -> Result<Self> {
        let classes = examples
            .values()
            .flatten()
            .map(|(_, c)| *c as usize + 1)
            .max()
            .unwrap_or(0);
        let mut centroids = BTreeMap::new();
        for (view, items) in examples {
            let dim = items.first().map(|(f, _)| f.len()).unwrap_or(0);
            let mut sums = vec![vec![0.0; dim]; classes.max(2)];
            let mut counts = vec![0usize; classes.max(2)];
            for (f, c) in items {
                if f.len() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        got: f.len(),
                    });
                }
                for (s, v) in sums[*c as usize].iter_mut().zip(f) {
                    *s += v;
                }
                counts[*c as usize] += 1;
            }
            if let Some(class) = counts.iter().position(|&n| n == 0) {
                return Err(Error::MissingClassExamples {
                    channel: view.clone(),
                    class,
                });
            }
            for (s, n) in sums.iter_mut().zip(&counts) {
                s.iter_mut().for_each(|v| *v /= *n as f64);
            }
            centroids.insert(view.clone(), sums);
        }
        if centroids.is_empty() {
            return Err(Error::NoTrainingData);
        }
        Ok(CentroidModel {
            size,
            classes: classes.max(2),
            centroids,
        })
    }

    pub fn score(&self, view: &str, features: &[f64]) -> Result<ScoreVector> {
        let centroids = self.centroids.get(view).ok_or_else(|| Error::MissingScores {
            segment_id: String::new(),
            channel: view.to_string(),
        })?;
        let mut dists = Vec::with_capacity(centroids.len());
        for c in centroids {
            if c.len() != features.len() {
                return Err(Error::DimensionMismatch {
                    expected: c.len(),
                    got: features.len(),
                });
            }
            dists.push(c.iter().zip(features).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt());
        }
        let nearest = dists.iter().copied().fold(f64::INFINITY, f64::min);
        let expd: Vec<f64> = dists.iter().map(|d| (nearest - d).exp()).collect();
        let total: f64 = expd.iter().sum();
        ScoreVector::new(expd.into_iter().map(|e| e / total).collect())
    }

    pub fn score_image(&self, view: &str, path: &Path) -> Result<ScoreVector> {
        let img = load_dynamic_image(path)?;
        self.score(view, &image_features(&img, self.size))
    }
}
