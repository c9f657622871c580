use serde::{Deserialize, Serialize};

use crate::depth_io::DepthSequence;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundParams {
    pub hist_bins: usize,
    /// Depth units subtracted from the far peak's lower bin edge.
    pub tolerance: f64,
    /// Minimum fraction of valid pixels for a bin to qualify as a peak.
    pub min_peak_mass: f64,
}

impl Default for BackgroundParams {
    fn default() -> Self {
        BackgroundParams {
            hist_bins: 256,
            tolerance: 50.0,
            min_peak_mass: 0.01,
        }
    }
}

impl BackgroundParams {
    pub fn validate(&self) -> Result<()> {
        if self.hist_bins < 8 || !(self.tolerance >= 0.0) || !(self.min_peak_mass > 0.0 && self.min_peak_mass < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "background removal needs hist_bins >= 8, tolerance >= 0, 0 < min_peak_mass < 1; got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Depth above which pixels count as background: the lower edge of the
/// farthest histogram peak minus the tolerance.
pub fn background_threshold(seq: &DepthSequence, params: &BackgroundParams) -> Result<f64> {
    params.validate()?;
    let valid = || {
        seq.frames()
            .iter()
            .flat_map(|f| f.values().iter().copied())
            .filter(|&v| v != 0)
    };
    let (min, max) = valid().fold((u16::MAX, 0u16), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if max == 0 {
        return Err(Error::NoForeground);
    }

    let bins = params.hist_bins;
    let width = (f64::from(max) - f64::from(min) + 1.0) / bins as f64;
    let mut counts = vec![0u64; bins];
    let mut total = 0u64;
    for v in valid() {
        let b = ((f64::from(v) - f64::from(min)) / width) as usize;
        counts[b.min(bins - 1)] += 1;
        total += 1;
    }

    let min_mass = params.min_peak_mass * total as f64;
    let at = |b: isize| -> u64 {
        if b < 0 || b as usize >= bins {
            0
        } else {
            counts[b as usize]
        }
    };
    let peak = (0..bins as isize)
        .rev()
        .find(|&b| {
            let c = at(b);
            c > 0 && c as f64 >= min_mass && c >= at(b - 1) && c >= at(b + 1)
        })
        .expect("the fullest bin is always a qualifying peak") as f64;

    Ok(f64::from(min) + peak * width - params.tolerance)
}

/// Zeroes every pixel deeper than [`background_threshold`] in every frame.
pub fn remove_background(seq: &DepthSequence, params: &BackgroundParams) -> Result<DepthSequence> {
    let threshold = background_threshold(seq, params)?;
    let mut out = seq.clone();
    let mut kept = false;
    for frame in out.frames_mut() {
        for v in frame.values_mut() {
            if f64::from(*v) > threshold {
                *v = 0;
            } else if *v != 0 {
                kept = true;
            }
        }
    }
    if !kept {
        return Err(Error::NoForeground);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::depth_io::DepthFrame;

    fn two_plane_scene(frames: usize) -> DepthSequence {
        let frames = (0..frames)
            .map(|_| {
                let mut f = DepthFrame::filled(10, 10, 3000).unwrap();
                for y in 3..7 {
                    for x in 3..7 {
                        f.set(x, y, 1000 + (x + y) as u16);
                    }
                }
                f
            })
            .collect();
        DepthSequence::new(frames, 30.0, "scene").unwrap()
    }

    #[test]
    fn bimodal_scene_drops_the_wall() {
        let seq = two_plane_scene(3);
        let out = remove_background(&seq, &BackgroundParams::default()).unwrap();
        for (before, after) in seq.frames().iter().zip(out.frames()) {
            for (&b, &a) in before.values().iter().zip(after.values()) {
                if b >= 2000 {
                    assert_eq!(a, 0);
                } else {
                    assert_eq!(a, b);
                }
            }
        }
        let thr = background_threshold(&seq, &BackgroundParams::default()).unwrap();
        assert!(thr > 2900.0 && thr < 3000.0 - 49.0, "{thr}");
    }

    #[test]
    fn single_flat_plane_is_all_background() {
        let seq = DepthSequence::new(vec![DepthFrame::filled(4, 4, 1500).unwrap()], 30.0, "f").unwrap();
        assert!(matches!(
            remove_background(&seq, &BackgroundParams::default()),
            Err(Error::NoForeground)
        ));
    }

    #[test]
    fn sparse_near_pixels_survive_single_peak() {
        // 1 near pixel out of 400 is below the peak mass; the wall is the only peak
        let mut f = DepthFrame::filled(20, 20, 2500).unwrap();
        f.set(4, 4, 900);
        let seq = DepthSequence::new(vec![f], 30.0, "s").unwrap();
        let out = remove_background(&seq, &BackgroundParams::default()).unwrap();
        assert_eq!(out.frames()[0].get(4, 4), 900);
        assert_eq!(out.frames()[0].values().iter().filter(|&&v| v != 0).count(), 1);
    }

    #[test]
    fn all_zero_frames_have_no_foreground() {
        let seq = DepthSequence::new(vec![DepthFrame::filled(4, 4, 0).unwrap()], 30.0, "z").unwrap();
        assert!(matches!(
            remove_background(&seq, &BackgroundParams::default()),
            Err(Error::NoForeground)
        ));
    }

    #[test]
    fn larger_tolerance_zeroes_a_superset() {
        let frames = (0..4)
            .map(|i| {
                let values = (0..64).map(|p| 800 + ((p * 37 + i * 11) % 64) as u16 * 40).collect();
                DepthFrame::new(8, 8, values).unwrap()
            })
            .collect();
        let seq = DepthSequence::new(frames, 30.0, "g").unwrap();
        let mut previous: Option<DepthSequence> = None;
        for tol in [0.0, 50.0, 200.0, 600.0, 1200.0] {
            let params = BackgroundParams {
                tolerance: tol,
                ..Default::default()
            };
            let Ok(out) = remove_background(&seq, &params) else {
                break;
            };
            let thr = background_threshold(&seq, &params).unwrap();
            for (a, b) in seq.frames().iter().zip(out.frames()) {
                for (&v, &o) in a.values().iter().zip(b.values()) {
                    if f64::from(v) <= thr {
                        assert_eq!(v, o);
                    }
                }
            }
            if let Some(prev) = &previous {
                for (p, o) in prev.frames().iter().zip(out.frames()) {
                    for (&pv, &ov) in p.values().iter().zip(o.values()) {
                        if pv == 0 {
                            assert_eq!(ov, 0);
                        }
                    }
                }
            }
            previous = Some(out);
        }
    }
}
