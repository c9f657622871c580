//! Per-pixel adaptive Gaussian mixture background model over depth.
//!
//! Each pixel keeps `components` weighted 1-D Gaussians. A sample matches the
//! first component (in order of decreasing `weight / sigma`) within the
//! squared-distance threshold; the match is pulled toward the sample and
//! gains weight. Unmatched samples replace the least likely component. The
//! leading components whose cumulative weight first exceeds
//! `background_ratio` model the background; samples matched elsewhere, or
//! not at all, are foreground.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depth_io::DepthSequence;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmParams {
    pub components: usize,
    pub learning_rate: f64,
    /// Squared normalised distance at or below which a sample matches.
    pub mahalanobis_threshold: f64,
    pub background_ratio: f64,
    /// Seeds the means of the initially unused components.
    pub seed: u64,
    pub initial_variance: f64,
    pub min_variance: f64,
    /// Weight given to a component created for an unmatched sample.
    pub initial_weight: f64,
}

impl Default for GmmParams {
    fn default() -> Self {
        GmmParams {
            components: 3,
            learning_rate: 0.01,
            mahalanobis_threshold: 6.25,
            background_ratio: 0.7,
            seed: 0,
            initial_variance: 900.0,
            min_variance: 16.0,
            initial_weight: 0.05,
        }
    }
}

impl GmmParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.components >= 1
            && self.learning_rate > 0.0
            && self.learning_rate <= 1.0
            && self.mahalanobis_threshold > 0.0
            && self.background_ratio > 0.0
            && self.background_ratio <= 1.0
            && self.initial_variance > 0.0
            && self.min_variance > 0.0
            && self.initial_weight > 0.0
            && self.initial_weight < 1.0;
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid GMM parameters {self:?}")));
        }
        Ok(())
    }
}

/// Per-pixel moving-foreground flags for one frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForegroundMask {
    pub width: usize,
    pub height: usize,
    pub mask: Vec<bool>,
}

impl ForegroundMask {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

#[derive(Clone, Copy, Debug)]
struct Component {
    weight: f64,
    mean: f64,
    variance: f64,
}

struct PixelModel {
    comps: Vec<Component>,
    order: Vec<usize>,
}

impl PixelModel {
    fn new(first: f64, spare_means: &[f64], params: &GmmParams) -> PixelModel {
        let mut comps = vec![Component {
            weight: 1.0,
            mean: first,
            variance: params.initial_variance,
        }];
        comps.extend(spare_means.iter().map(|&mean| Component {
            weight: 0.0,
            mean,
            variance: params.initial_variance,
        }));
        PixelModel {
            order: (0..comps.len()).collect(),
            comps,
        }
    }

    fn sort(&mut self) {
        let comps = &self.comps;
        // stable: equal fitness keeps the lower index first
        self.order.sort_by(|&a, &b| {
            let fa = comps[a].weight / comps[a].variance.sqrt();
            let fb = comps[b].weight / comps[b].variance.sqrt();
            fb.total_cmp(&fa)
        });
    }

    /// Returns true when `x` is foreground, then adapts the model.
    fn observe(&mut self, x: f64, params: &GmmParams) -> bool {
        self.sort();
        let mut cumulative = 0.0;
        let mut background_count = self.order.len();
        for (rank, &k) in self.order.iter().enumerate() {
            cumulative += self.comps[k].weight;
            if cumulative > params.background_ratio {
                background_count = rank + 1;
                break;
            }
        }

        let matched = self.order.iter().position(|&k| {
            let c = &self.comps[k];
            (x - c.mean).powi(2) / c.variance <= params.mahalanobis_threshold
        });

        let alpha = params.learning_rate;
        match matched {
            Some(rank) => {
                let k = self.order[rank];
                for (j, c) in self.comps.iter_mut().enumerate() {
                    c.weight = (1.0 - alpha) * c.weight + if j == k { alpha } else { 0.0 };
                }
                let c = &mut self.comps[k];
                c.mean += alpha * (x - c.mean);
                c.variance = ((1.0 - alpha) * c.variance + alpha * (x - c.mean).powi(2)).max(params.min_variance);
                rank >= background_count
            }
            None => {
                let weakest = *self.order.last().expect("at least one component");
                self.comps[weakest] = Component {
                    weight: params.initial_weight,
                    mean: x,
                    variance: params.initial_variance,
                };
                let total: f64 = self.comps.iter().map(|c| c.weight).sum();
                for c in &mut self.comps {
                    c.weight /= total;
                }
                true
            }
        }
    }
}

/// One mask per frame. The model is seeded from the first frame, whose mask
/// is therefore empty.
pub fn gmm_foreground(seq: &DepthSequence, params: &GmmParams) -> Result<Vec<ForegroundMask>> {
    params.validate()?;
    if seq.len() < 2 {
        return Err(Error::TooFewFrames {
            needed: 2,
            got: seq.len(),
        });
    }
    let (w, h) = (seq.width(), seq.height());
    let pixels = w * h;
    let spares = params.components - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let spare_means: Vec<f64> = (0..pixels * spares)
        .map(|_| rng.gen_range(0.0..f64::from(u16::MAX)))
        .collect();

    let frames = seq.frames();
    let per_pixel: Vec<Vec<bool>> = (0..pixels)
        .into_par_iter()
        .map(|p| {
            let sample = |t: usize| f64::from(frames[t].values()[p]);
            let mut model = PixelModel::new(sample(0), &spare_means[p * spares..(p + 1) * spares], params);
            let mut flags = Vec::with_capacity(frames.len());
            flags.push(false);
            for t in 1..frames.len() {
                flags.push(model.observe(sample(t), params));
            }
            flags
        })
        .collect();

    Ok((0..frames.len())
        .map(|t| ForegroundMask {
            width: w,
            height: h,
            mask: per_pixel.iter().map(|flags| flags[t]).collect(),
        })
        .collect())
}
