//! The three dynamic-image pairs of a depth segment.
//!
//! * DDI: hierarchical bidirectional rank pooling of the raw depth pixels.
//! * DDNI: the same over surface-normal channels after background removal.
//! * DDMNI: normals restricted to GMM-detected moving foreground.
//!
//! Every backward image is the forward encoding of the time-reversed
//! segment; for DDMNI this means the foreground model also runs backwards.

mod background;
mod gmm;
mod normals;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use background::{background_threshold, remove_background, BackgroundParams};
pub use gmm::{gmm_foreground, ForegroundMask, GmmParams};
pub use normals::{compute_normals, NormalField};

use crate::depth_io::{quantize_field, DepthSequence, DynamicImage};
use crate::error::{Error, Result};
use crate::rank_pooling::{hierarchical_rank_pool, Direction, FeatureSequence, HierarchyConfig, RankPoolParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Ddi,
    Ddni,
    Ddmni,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Ddi, Channel::Ddni, Channel::Ddmni];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Ddi => "ddi",
            Channel::Ddni => "ddni",
            Channel::Ddmni => "ddmni",
        }
    }

    pub fn image_channels(self) -> usize {
        match self {
            Channel::Ddi => 1,
            _ => 3,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ddi" => Ok(Channel::Ddi),
            "ddni" => Ok(Channel::Ddni),
            "ddmni" => Ok(Channel::Ddmni),
            other => Err(Error::InvalidParameter(format!("unknown channel `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DynamicImageSet {
    pub ddi_fwd: DynamicImage,
    pub ddi_bwd: DynamicImage,
    pub ddni_fwd: DynamicImage,
    pub ddni_bwd: DynamicImage,
    pub ddmni_fwd: DynamicImage,
    pub ddmni_bwd: DynamicImage,
}

/// Flattened depth pixels, one row per frame.
pub fn depth_features(seq: &DepthSequence) -> Result<FeatureSequence> {
    let d = seq.width() * seq.height();
    let mut data = Array2::zeros((seq.len(), d));
    for (mut row, frame) in data.rows_mut().into_iter().zip(seq.frames()) {
        for (dst, &v) in row.iter_mut().zip(frame.values()) {
            *dst = f64::from(v);
        }
    }
    FeatureSequence::new(data)
}

/// Planar `(Nx, Ny, Nz)` per frame, optionally restricted to a mask per frame.
pub fn normal_features(seq: &DepthSequence, masks: Option<&[ForegroundMask]>) -> Result<FeatureSequence> {
    let d = 3 * seq.width() * seq.height();
    let mut data = Array2::zeros((seq.len(), d));
    for (t, (mut row, frame)) in data.rows_mut().into_iter().zip(seq.frames()).enumerate() {
        let mut field = compute_normals(frame);
        if let Some(masks) = masks {
            field.mask(&masks[t].mask);
        }
        for (dst, v) in row.iter_mut().zip(field.into_planar()) {
            *dst = v;
        }
    }
    FeatureSequence::new(data)
}

fn pool_and_render(
    features: &FeatureSequence,
    seq: &DepthSequence,
    channels: usize,
    config: &HierarchyConfig,
    params: &RankPoolParams,
) -> Result<DynamicImage> {
    let weights = hierarchical_rank_pool(features, &config.with_direction(Direction::Forward), params)?;
    quantize_field(
        weights.as_slice().expect("contiguous"),
        seq.width(),
        seq.height(),
        channels,
    )
}

pub fn build_ddi(
    segment: &DepthSequence,
    config: &HierarchyConfig,
    params: &RankPoolParams,
) -> Result<(DynamicImage, DynamicImage)> {
    let forward = depth_features(segment)?;
    let backward = forward.reversed();
    Ok((
        pool_and_render(&forward, segment, 1, config, params)?,
        pool_and_render(&backward, segment, 1, config, params)?,
    ))
}

pub fn build_ddni(
    segment: &DepthSequence,
    bg: &BackgroundParams,
    config: &HierarchyConfig,
    params: &RankPoolParams,
) -> Result<(DynamicImage, DynamicImage)> {
    let cleaned = remove_background(segment, bg)?;
    let forward = normal_features(&cleaned, None)?;
    let backward = forward.reversed();
    Ok((
        pool_and_render(&forward, segment, 3, config, params)?,
        pool_and_render(&backward, segment, 3, config, params)?,
    ))
}

/// Normals of the moving foreground only.
pub fn motion_normal_features(segment: &DepthSequence, gmm: &GmmParams) -> Result<FeatureSequence> {
    let masks = gmm_foreground(segment, gmm)?;
    normal_features(segment, Some(&masks))
}

pub fn build_ddmni(
    segment: &DepthSequence,
    gmm: &GmmParams,
    config: &HierarchyConfig,
    params: &RankPoolParams,
) -> Result<(DynamicImage, DynamicImage)> {
    let forward = motion_normal_features(segment, gmm)?;
    let backward = motion_normal_features(&segment.reversed(), gmm)?;
    Ok((
        pool_and_render(&forward, segment, 3, config, params)?,
        pool_and_render(&backward, segment, 3, config, params)?,
    ))
}

pub fn build_channel(
    channel: Channel,
    segment: &DepthSequence,
    bg: &BackgroundParams,
    gmm: &GmmParams,
    config: &HierarchyConfig,
    params: &RankPoolParams,
) -> Result<(DynamicImage, DynamicImage)> {
    match channel {
        Channel::Ddi => build_ddi(segment, config, params),
        Channel::Ddni => build_ddni(segment, bg, config, params),
        Channel::Ddmni => build_ddmni(segment, gmm, config, params),
    }
}

pub fn build_all(
    segment: &DepthSequence,
    bg: &BackgroundParams,
    gmm: &GmmParams,
    config: &HierarchyConfig,
    params: &RankPoolParams,
) -> Result<DynamicImageSet> {
    let (ddi_fwd, ddi_bwd) = build_ddi(segment, config, params)?;
    let (ddni_fwd, ddni_bwd) = build_ddni(segment, bg, config, params)?;
    let (ddmni_fwd, ddmni_bwd) = build_ddmni(segment, gmm, config, params)?;
    Ok(DynamicImageSet {
        ddi_fwd,
        ddi_bwd,
        ddni_fwd,
        ddni_bwd,
        ddmni_fwd,
        ddmni_bwd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depth_io::DepthFrame;
    use crate::rank_pooling::rank_pool;

    fn sequence(frames: Vec<DepthFrame>) -> DepthSequence {
        DepthSequence::new(frames, 30.0, "seg").unwrap()
    }

    fn defaults() -> (HierarchyConfig, RankPoolParams) {
        (HierarchyConfig::default(), RankPoolParams::default())
    }

    #[test]
    fn static_segment_renders_mid_gray() {
        let (cfg, p) = defaults();
        let seg = sequence((0..6).map(|_| DepthFrame::filled(6, 6, 1500).unwrap()).collect());
        let (f, b) = build_ddi(&seg, &cfg, &p).unwrap();
        assert!(f.pixels.iter().chain(&b.pixels).all(|&v| v == 128));
        let (f, b) = build_ddmni(&seg, &GmmParams::default(), &cfg, &p).unwrap();
        assert_eq!(f.channels, 3);
        assert!(f.pixels.iter().chain(&b.pixels).all(|&v| v == 128));
    }

    fn ramp_segment(profile: impl Fn(usize) -> u16) -> DepthSequence {
        let frames = (0..7)
            .map(|t| {
                let mut f = DepthFrame::filled(5, 5, 1000).unwrap();
                f.set(3, 1, profile(t));
                f
            })
            .collect();
        sequence(frames)
    }

    /// Index of the unique pixel that differs from the rest, which all share
    /// the rendered zero level.
    fn lone_extreme(img: &DynamicImage) -> Option<usize> {
        let odd: Vec<usize> = (0..img.pixels.len())
            .filter(|&i| img.pixels[i] != img.pixels[0])
            .collect();
        match odd.as_slice() {
            [i] => Some(*i),
            [] => None,
            _ if odd.len() == img.pixels.len() - 1 => Some(0),
            _ => None,
        }
    }

    #[test]
    fn linearly_ramping_pixel_is_the_extreme() {
        let p = RankPoolParams::default();
        let one_layer = HierarchyConfig {
            layers: 1,
            ..Default::default()
        };
        let seg = ramp_segment(|t| 1000 + 40 * t as u16);
        let (f, _) = build_ddi(&seg, &one_layer, &p).unwrap();
        let target = 5 + 3;
        assert_eq!(lone_extreme(&f), Some(target));
        assert_eq!(f.pixels[target], 255);

        let w = rank_pool(&depth_features(&seg).unwrap(), &p).unwrap();
        let oracle_best = (0..25).max_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs())).unwrap();
        assert_eq!(oracle_best, target);
        assert!(w[target] > 0.0);
    }

    #[test]
    fn two_layers_see_changes_of_dynamics() {
        let (cfg, p) = defaults();
        // identical windows pool identically, so the top layer sees a constant
        let (f, b) = build_ddi(&ramp_segment(|t| 1000 + 40 * t as u16), &cfg, &p).unwrap();
        assert!(f.pixels.iter().chain(&b.pixels).all(|&v| v == 128));

        let seg = ramp_segment(|t| 1000 + 10 * (t * t) as u16);
        let (f, _) = build_ddi(&seg, &cfg, &p).unwrap();
        assert_eq!(lone_extreme(&f), Some(5 + 3));
        let w = hierarchical_rank_pool(&depth_features(&seg).unwrap(), &cfg, &p).unwrap();
        assert!(w[5 + 3] != 0.0);
        assert!((0..25).filter(|&i| i != 8).all(|i| w[i] == 0.0));
    }

    #[test]
    fn reversal_swaps_ddi() {
        let (cfg, p) = defaults();
        let frames = (0..6)
            .map(|t| {
                let values = (0..16).map(|i| 900 + ((i * 13 + t * t * 7) % 50) as u16).collect();
                DepthFrame::new(4, 4, values).unwrap()
            })
            .collect();
        let seg = sequence(frames);
        let (f, b) = build_ddi(&seg, &cfg, &p).unwrap();
        let (rf, rb) = build_ddi(&seg.reversed(), &cfg, &p).unwrap();
        assert_eq!(f, rb);
        assert_eq!(b, rf);
    }

    #[test]
    fn flat_plane_ddni_has_no_foreground() {
        let (cfg, p) = defaults();
        let seg = sequence((0..4).map(|_| DepthFrame::filled(6, 6, 2000).unwrap()).collect());
        assert!(matches!(
            build_ddni(&seg, &BackgroundParams::default(), &cfg, &p),
            Err(Error::NoForeground)
        ));
    }

    fn plane(slope_x: f64, slope_y: f64) -> DepthFrame {
        // a near slanted plate in front of a far wall
        let mut f = DepthFrame::filled(12, 12, 4000).unwrap();
        for y in 2..10 {
            for x in 2..10 {
                let z = 1000.0 + slope_x * x as f64 + slope_y * y as f64;
                f.set(x, y, z.round() as u16);
            }
        }
        f
    }

    #[test]
    fn static_tilted_plane_ddni_is_flat() {
        let (cfg, p) = defaults();
        let seg = sequence((0..5).map(|_| plane(3.0, 1.0)).collect());
        let (f, b) = build_ddni(&seg, &BackgroundParams::default(), &cfg, &p).unwrap();
        assert!(f.pixels.iter().chain(&b.pixels).all(|&v| v == 128));
    }

    /// Sum of |pixel - rendered zero| over one interleaved channel.
    fn channel_energy(img: &DynamicImage, weights: &[f64], c: usize) -> f64 {
        let zero = zero_level(weights);
        img.pixels
            .iter()
            .skip(c)
            .step_by(3)
            .map(|&v| (f64::from(v) - zero).abs())
            .sum()
    }

    #[test]
    fn tilt_about_vertical_axis_lands_in_nx() {
        let (cfg, p) = defaults();
        let seg = sequence((0..7).map(|t| plane(t as f64 * 0.3, 0.0)).collect());
        let (f, _) = build_ddni(&seg, &BackgroundParams::default(), &cfg, &p).unwrap();

        // interior normals only change in x and z
        let feats = normal_features(&remove_background(&seg, &BackgroundParams::default()).unwrap(), None).unwrap();
        let w = hierarchical_rank_pool(&feats, &cfg, &p).unwrap();
        let plane_len = 144;
        let norm = |c: usize| {
            w.slice(ndarray::s![c * plane_len..(c + 1) * plane_len])
                .mapv(f64::abs)
                .sum()
        };
        assert!(norm(0) > 0.0);
        assert_eq!(norm(1), 0.0);

        let w = w.as_slice().unwrap();
        let (ex, ey) = (channel_energy(&f, w, 0), channel_energy(&f, w, 1));
        assert!(ex > 0.0);
        assert_eq!(ey, 0.0, "nx energy {ex}, ny energy {ey}");
    }

    fn zero_level(weights: &[f64]) -> f64 {
        let min = weights.iter().copied().fold(f64::INFINITY, f64::min);
        let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ((0.0 - min) / (max - min) * 255.0).round()
    }

    #[test]
    fn ddmni_backward_runs_gmm_on_reversed_segment() {
        let (cfg, p) = defaults();
        let gmm = GmmParams::default();
        let frames = (0..8)
            .map(|t| {
                let mut f = DepthFrame::filled(10, 10, 2500).unwrap();
                for y in 3..6 {
                    for x in t..t + 3 {
                        f.set(x.min(9), y, 1200);
                    }
                }
                f
            })
            .collect();
        let seg = sequence(frames);
        let (_, b) = build_ddmni(&seg, &gmm, &cfg, &p).unwrap();
        let feats = motion_normal_features(&seg.reversed(), &gmm).unwrap();
        let w = hierarchical_rank_pool(&feats, &cfg, &p).unwrap();
        let expected = quantize_field(w.as_slice().unwrap(), 10, 10, 3).unwrap();
        assert_eq!(b, expected);

        let single = sequence(vec![DepthFrame::filled(4, 4, 100).unwrap()]);
        assert!(matches!(
            build_ddmni(&single, &gmm, &cfg, &p),
            Err(Error::TooFewFrames { .. })
        ));
    }

    #[test]
    fn channel_names_round_trip() {
        for c in Channel::ALL {
            assert_eq!(c.name().parse::<Channel>().unwrap(), c);
        }
        assert!("rgb".parse::<Channel>().is_err());
    }
}
