//! Programmatic depth fixtures: a flat wall with a near rectangular
//! "subject" that performs gestures away from a rest position.
//!
//! Gesture class `c` moves the subject along direction `c` (horizontal,
//! vertical, then the two diagonals) and back, following half a sine period.
//! Consecutive gestures are separated by short runs of rest frames, so every
//! gesture starts and ends in the same pose.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::depth_io::{DepthFrame, DepthSequence};
use crate::segmentation::ActionSegment;

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub background: u16,
    pub subject: u16,
    pub block: usize,
    /// Uniform per-pixel noise amplitude in depth units.
    pub noise: u16,
    /// Peak displacement in pixels.
    pub amplitude: f64,
    /// Nominal gesture length in frames.
    pub gesture_len: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            width: 24,
            height: 24,
            background: 2500,
            subject: 1200,
            block: 6,
            noise: 4,
            amplitude: 7.0,
            gesture_len: 30,
        }
    }
}

const D: f64 = std::f64::consts::FRAC_1_SQRT_2;
const DIRECTIONS: [(f64, f64); 4] = [(1.0, 0.0), (0.0, 1.0), (D, D), (D, -D)];

pub fn render(spec: &SceneSpec, block_x: f64, block_y: f64, rng: &mut ChaCha8Rng) -> DepthFrame {
    let (bx, by) = (block_x.round() as i64, block_y.round() as i64);
    let mut values = Vec::with_capacity(spec.width * spec.height);
    for y in 0..spec.height as i64 {
        for x in 0..spec.width as i64 {
            let inside = x >= bx && x < bx + spec.block as i64 && y >= by && y < by + spec.block as i64;
            let base = if inside { spec.subject } else { spec.background };
            let jitter = if spec.noise > 0 {
                rng.gen_range(0..=2 * spec.noise) as i32 - spec.noise as i32
            } else {
                0
            };
            values.push((base as i32 + jitter).clamp(1, u16::MAX as i32) as u16);
        }
    }
    DepthFrame::new(spec.width, spec.height, values).expect("scene dimensions are valid")
}

/// A continuous stream with ground truth.
#[derive(Clone, Debug)]
pub struct GestureStream {
    pub sequence: DepthSequence,
    /// Labelled spans between consecutive true boundaries.
    pub truth: Vec<ActionSegment>,
    /// Interior boundary frames (1-based), one per rest run between gestures.
    pub boundaries: Vec<usize>,
}

pub fn gesture_stream(spec: &SceneSpec, labels: &[u32], seed: u64, name: &str) -> GestureStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let home_x = (spec.width - spec.block) as f64 / 2.0 + rng.gen_range(-1.0..=1.0);
    let home_y = (spec.height - spec.block) as f64 / 2.0 + rng.gen_range(-1.0..=1.0);

    let mut frames = Vec::new();
    let mut rest_runs = Vec::new();
    let rest = |frames: &mut Vec<DepthFrame>, rng: &mut ChaCha8Rng| {
        let run = rng.gen_range(1..=3);
        let start = frames.len() + 1;
        for _ in 0..run {
            frames.push(render(spec, home_x, home_y, rng));
        }
        (start, start + run - 1)
    };

    rest_runs.push(rest(&mut frames, &mut rng));
    for &label in labels {
        let (dx, dy) = DIRECTIONS[label as usize % DIRECTIONS.len()];
        let len = (spec.gesture_len as f64 * rng.gen_range(0.8..=1.2)).round() as usize;
        let amp = spec.amplitude * rng.gen_range(0.85..=1.15);
        for s in 1..len {
            let d = amp * (std::f64::consts::PI * s as f64 / len as f64).sin();
            frames.push(render(spec, home_x + d * dx, home_y + d * dy, &mut rng));
        }
        rest_runs.push(rest(&mut frames, &mut rng));
    }

    let n = frames.len();
    let mut bounds = vec![1];
    for &(a, b) in &rest_runs[1..rest_runs.len() - 1] {
        bounds.push((a + b) / 2);
    }
    bounds.push(n);
    let truth = bounds
        .windows(2)
        .zip(labels)
        .map(|(w, &l)| ActionSegment::labelled(w[0], w[1], l))
        .collect();

    GestureStream {
        sequence: DepthSequence::new(frames, 30.0, name).expect("nonempty stream"),
        truth,
        boundaries: bounds[1..bounds.len() - 1].to_vec(),
    }
}

/// `per_class` streams for each of `classes` classes; each stream repeats its
/// class's gesture `gestures_per_stream` times. Ordered class-major.
pub fn gesture_dataset(
    spec: &SceneSpec,
    classes: u32,
    per_class: usize,
    gestures_per_stream: usize,
    seed: u64,
) -> Vec<GestureStream> {
    let mut out = Vec::new();
    for class in 0..classes {
        for i in 0..per_class {
            let labels = vec![class; gestures_per_stream];
            let stream_seed = seed
                .wrapping_mul(1_000_003)
                .wrapping_add(u64::from(class) * 1000 + i as u64);
            out.push(gesture_stream(spec, &labels, stream_seed, &format!("c{class}_s{i:02}")));
        }
    }
    out
}

/// Static scene for `burn_in` frames, then the subject enters from the left
/// edge and crosses one pixel per frame. Returns the sequence and the
/// subject's footprint in every frame.
pub fn moving_block(spec: &SceneSpec, burn_in: usize, moving: usize, seed: u64) -> (DepthSequence, Vec<Vec<bool>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y0 = (spec.height - spec.block) as f64 / 2.0;
    let mut frames = Vec::new();
    let mut truth = Vec::new();
    for t in 0..burn_in + moving {
        let x = if t < burn_in {
            -(spec.block as f64) - 10.0
        } else {
            (t - burn_in) as f64 - spec.block as f64 + 1.0
        };
        let frame = render(spec, x, y0, &mut rng);
        let footprint = (0..spec.width * spec.height)
            .map(|i| {
                let (px, py) = ((i % spec.width) as i64, (i / spec.width) as i64);
                let (bx, by) = (x.round() as i64, y0.round() as i64);
                px >= bx && px < bx + spec.block as i64 && py >= by && py < by + spec.block as i64
            })
            .collect();
        frames.push(frame);
        truth.push(footprint);
    }
    (
        DepthSequence::new(frames, 30.0, "moving_block").expect("nonempty"),
        truth,
    )
}
