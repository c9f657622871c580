//! Rank pooling: a sequence of feature vectors is summarised by the weights
//! of a linear ranker that orders its frames in time.
//!
//! [`rank_pool`] solves a single sequence; [`rank_pool_layer`] slides it over
//! windows to build a shorter sequence of pooled vectors, and
//! [`hierarchical_rank_pool`] stacks layers and finishes with one pool.
//! Backward pooling ranks the frames in reverse temporal order, which is
//! forward pooling of the reversed sequence.

mod solver;

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use solver::{Solution, SolverKind};

use crate::error::{Error, Result};

/// `k` frames of dimension `D`, stored as a `k x D` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    data: Array2<f64>,
}

impl FeatureSequence {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::EmptySequence);
        }
        if data.ncols() == 0 {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        Ok(FeatureSequence { data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().ok_or(Error::EmptySequence)?.len();
        let k = rows.len();
        let mut flat = Vec::with_capacity(k * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            flat.extend(row);
        }
        Self::new(Array2::from_shape_vec((k, dim), flat).expect("shape checked"))
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn frame(&self, t: usize) -> ArrayView1<'_, f64> {
        self.data.row(t)
    }

    pub fn reversed(&self) -> FeatureSequence {
        FeatureSequence {
            data: self.data.slice(s![..;-1, ..]).to_owned(),
        }
    }

    /// Frames `start..start + len` (0-based).
    pub fn window(&self, start: usize, len: usize) -> FeatureSequence {
        FeatureSequence {
            data: self.data.slice(s![start..start + len, ..]).to_owned(),
        }
    }

    fn check_finite(&self) -> Result<()> {
        for ((frame, component), v) in self.data.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFiniteFeature { frame, component });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankPoolParams {
    /// Weight of the pairwise hinge terms against the `1/2 |w|^2` regulariser.
    pub lambda: f64,
    pub max_iters: usize,
    /// Dual coordinate descent: relative duality gap. Subgradient: minimum
    /// objective decrease per iteration.
    pub tol: f64,
    /// Rank the running means of the frames rather than the raw frames.
    pub use_smoothing: bool,
    pub solver: SolverKind,
    /// Initial subgradient step.
    pub step0: f64,
}

impl Default for RankPoolParams {
    fn default() -> Self {
        RankPoolParams {
            lambda: 1.0,
            max_iters: 2000,
            tol: 1e-7,
            use_smoothing: true,
            solver: SolverKind::DualCoordinate,
            step0: 1.0,
        }
    }
}

impl RankPoolParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !(self.tol > 0.0) || self.max_iters == 0 || !(self.step0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rank pooling needs lambda > 0, tol > 0, max_iters >= 1, step0 > 0; got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Forward,
    Backward,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierarchyConfig {
    pub layers: usize,
    pub window: usize,
    pub stride: usize,
    pub direction: Direction,
    /// Apply running-mean smoothing to the pooled sequences of higher
    /// layers as well as to the input.
    pub smooth_intermediate: bool,
    /// Multiplies the input features before the first layer. The hinge
    /// margin is absolute, so this sets which regime the pooling works in
    /// for a given feature unit.
    pub input_scale: f64,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        HierarchyConfig {
            layers: 2,
            window: 3,
            stride: 1,
            direction: Direction::Forward,
            smooth_intermediate: true,
            input_scale: 1.0,
        }
    }
}

impl HierarchyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.window < 2 || self.stride == 0 {
            return Err(Error::InvalidParameter(format!(
                "hierarchy needs layers >= 1, window >= 2, stride >= 1; got {self:?}"
            )));
        }
        if !(self.input_scale > 0.0 && self.input_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "input_scale must be positive and finite, got {}",
                self.input_scale
            )));
        }
        Ok(())
    }

    pub fn with_direction(&self, direction: Direction) -> HierarchyConfig {
        HierarchyConfig {
            direction,
            ..self.clone()
        }
    }
}

/// Time-varying mean: frame `t` becomes the average of frames `1..=t`.
pub fn smoothed_features(raw: &FeatureSequence) -> FeatureSequence {
    let mut data = raw.data.clone();
    let mut running = Array1::<f64>::zeros(raw.dim());
    for (t, mut row) in data.axis_iter_mut(Axis(0)).enumerate() {
        running += &row;
        row.assign(&(&running / (t + 1) as f64));
    }
    FeatureSequence { data }
}

/// Full solver output for one sequence.
pub fn rank_pool_solution(features: &FeatureSequence, params: &RankPoolParams) -> Result<Solution> {
    params.validate()?;
    features.check_finite()?;
    if features.len() == 1 {
        return Ok(Solution {
            weights: Array1::zeros(features.dim()),
            objective: 0.0,
            iterations: 0,
            gap: 0.0,
        });
    }
    let smoothed;
    let input = if params.use_smoothing {
        smoothed = smoothed_features(features);
        &smoothed
    } else {
        features
    };
    let view = input.data.view();
    Ok(match params.solver {
        SolverKind::DualCoordinate => solver::dual_coordinate(view, params.lambda, params.max_iters, params.tol),
        SolverKind::Subgradient => solver::subgradient(view, params.lambda, params.max_iters, params.tol, params.step0),
    })
}

pub fn rank_pool(features: &FeatureSequence, params: &RankPoolParams) -> Result<Array1<f64>> {
    rank_pool_solution(features, params).map(|s| s.weights)
}

pub fn rank_pool_bidirectional(
    features: &FeatureSequence,
    params: &RankPoolParams,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let forward = rank_pool(features, params)?;
    let backward = rank_pool(&features.reversed(), params)?;
    Ok((forward, backward))
}

/// Output length of a layer over `n` inputs.
pub fn layer_output_len(n: usize, window: usize, stride: usize) -> usize {
    if n >= window {
        (n - window) / stride + 1
    } else {
        1
    }
}

/// Pools every window `[t, t + window)` for `t = 0, stride, 2 * stride, ...`;
/// inputs shorter than one window are pooled whole.
pub fn rank_pool_layer(
    input: &FeatureSequence,
    window: usize,
    stride: usize,
    params: &RankPoolParams,
) -> Result<FeatureSequence> {
    if window == 0 || stride == 0 {
        return Err(Error::InvalidParameter("window and stride must be >= 1".into()));
    }
    let n = input.len();
    if n < window {
        let w = rank_pool(input, params)?;
        return FeatureSequence::new(w.insert_axis(Axis(0)));
    }
    let count = layer_output_len(n, window, stride);
    let pooled = (0..count)
        .into_par_iter()
        .map(|i| rank_pool(&input.window(i * stride, window), params))
        .collect::<Result<Vec<_>>>()?;

    let mut data = Array2::zeros((count, input.dim()));
    for (mut row, w) in data.axis_iter_mut(Axis(0)).zip(pooled) {
        row.assign(&w);
    }
    FeatureSequence::new(data)
}

pub fn hierarchical_rank_pool(
    features: &FeatureSequence,
    config: &HierarchyConfig,
    params: &RankPoolParams,
) -> Result<Array1<f64>> {
    config.validate()?;
    params.validate()?;
    let mut seq = match config.direction {
        Direction::Forward => features.clone(),
        Direction::Backward => features.reversed(),
    };
    if config.input_scale != 1.0 {
        seq.data.mapv_inplace(|v| v * config.input_scale);
    }
    let upper = RankPoolParams {
        use_smoothing: params.use_smoothing && config.smooth_intermediate,
        ..params.clone()
    };
    for layer in 1..config.layers {
        let p = if layer == 1 { params } else { &upper };
        seq = rank_pool_layer(&seq, config.window, config.stride, p)?;
    }
    let last = if config.layers == 1 { params } else { &upper };
    rank_pool(&seq, last)
}

/// Forward and backward hierarchical descriptors.
pub fn hierarchical_bidirectional(
    features: &FeatureSequence,
    config: &HierarchyConfig,
    params: &RankPoolParams,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let forward = hierarchical_rank_pool(features, &config.with_direction(Direction::Forward), params)?;
    let backward = hierarchical_rank_pool(features, &config.with_direction(Direction::Backward), params)?;
    Ok((forward, backward))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn seq(rows: &[&[f64]]) -> FeatureSequence {
        FeatureSequence::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn running_mean_examples() {
        let s = smoothed_features(&seq(&[&[2.0], &[4.0], &[6.0]]));
        assert_eq!(s.as_array(), &array![[2.0], [3.0], [4.0]]);

        let v = seq(&[&[1.5, -2.0], &[1.5, -2.0], &[1.5, -2.0]]);
        assert_eq!(smoothed_features(&v), v);

        let one = seq(&[&[9.0, 1.0]]);
        assert_eq!(smoothed_features(&one), one);
    }

    #[test]
    fn constant_sequence_pools_to_zero() {
        let v = seq(&[&[3.0, 1.0], &[3.0, 1.0], &[3.0, 1.0]]);
        let w = rank_pool(&v, &RankPoolParams::default()).unwrap();
        assert!(w.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_frame_is_zero_vector() {
        let w = rank_pool(&seq(&[&[1.0, 2.0, 3.0]]), &RankPoolParams::default()).unwrap();
        assert_eq!(w, Array1::<f64>::zeros(3));
    }

    #[test]
    fn inactive_coordinate_stays_zero() {
        let v = seq(&[&[0.0, 4.0], &[1.0, 4.0], &[2.0, 4.0], &[3.0, 4.0]]);
        let params = RankPoolParams::default();
        let w = rank_pool(&v, &params).unwrap();
        assert!(w[0] > 0.0);
        assert!(w[1].abs() <= params.tol);
    }

    #[test]
    fn dimension_and_finiteness_errors() {
        let err = FeatureSequence::from_rows(vec![vec![1.0, 2.0], vec![1.0]]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, got: 1 }));

        let v = seq(&[&[1.0], &[f64::INFINITY]]);
        assert!(matches!(
            rank_pool(&v, &RankPoolParams::default()),
            Err(Error::NonFiniteFeature { frame: 1, component: 0 })
        ));
    }

    #[test]
    fn backward_is_forward_of_reversed() {
        let v = seq(&[&[0.0, 1.0], &[2.0, 0.5], &[1.0, 3.0], &[4.0, 2.0]]);
        let p = RankPoolParams::default();
        let (f, b) = rank_pool_bidirectional(&v, &p).unwrap();
        assert_eq!(b, rank_pool(&v.reversed(), &p).unwrap());
        assert_eq!(f, rank_pool(&v, &p).unwrap());
    }

    #[test]
    fn palindrome_pools_equal_both_ways() {
        let v = seq(&[&[0.0], &[1.0], &[3.0], &[1.0], &[0.0]]);
        let p = RankPoolParams::default();
        let (f, b) = rank_pool_bidirectional(&v, &p).unwrap();
        assert_eq!(f, b);
    }

    #[test]
    fn layer_lengths() {
        let p = RankPoolParams::default();
        let input = |n: usize| FeatureSequence::from_rows((0..n).map(|t| vec![t as f64, 1.0]).collect()).unwrap();
        assert_eq!(rank_pool_layer(&input(5), 3, 1, &p).unwrap().len(), 3);
        assert_eq!(rank_pool_layer(&input(3), 3, 1, &p).unwrap().len(), 1);
        let short = rank_pool_layer(&input(2), 3, 1, &p).unwrap();
        assert_eq!(short.len(), 1);
        assert_eq!(short.frame(0), rank_pool(&input(2), &p).unwrap());
    }

    #[test]
    fn hierarchy_degenerates_and_cascades() {
        let p = RankPoolParams::default();
        let v = FeatureSequence::from_rows((0..5).map(|t| vec![(t * t) as f64, 1.0 - t as f64]).collect()).unwrap();
        let one = HierarchyConfig {
            layers: 1,
            ..Default::default()
        };
        assert_eq!(
            hierarchical_rank_pool(&v, &one, &p).unwrap(),
            rank_pool(&v, &p).unwrap()
        );

        let two = HierarchyConfig::default();
        let mid = rank_pool_layer(&v, 3, 1, &p).unwrap();
        assert_eq!(mid.len(), 3);
        assert_eq!(
            hierarchical_rank_pool(&v, &two, &p).unwrap(),
            rank_pool(&mid, &p).unwrap()
        );

        let flat = FeatureSequence::new(Array2::from_elem((6, 4), 7.0)).unwrap();
        let w = hierarchical_rank_pool(&flat, &two, &p).unwrap();
        assert!(w.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn invalid_configs_rejected() {
        let v = seq(&[&[0.0], &[1.0]]);
        let bad = HierarchyConfig {
            window: 1,
            ..Default::default()
        };
        assert!(hierarchical_rank_pool(&v, &bad, &RankPoolParams::default()).is_err());
        let bad = RankPoolParams {
            lambda: 0.0,
            ..Default::default()
        };
        assert!(rank_pool(&v, &bad).is_err());
    }

    #[test]
    fn input_scale_matches_prescaled_features() {
        let x = seq(&[&[10.0, 3.0], &[14.0, 2.0], &[13.0, 7.0], &[20.0, 1.0]]);
        let scaled = FeatureSequence::new(x.as_array() * 0.25).unwrap();
        let params = RankPoolParams::default();
        let config = HierarchyConfig {
            input_scale: 0.25,
            ..Default::default()
        };
        let a = hierarchical_rank_pool(&x, &config, &params).unwrap();
        let b = hierarchical_rank_pool(&scaled, &HierarchyConfig::default(), &params).unwrap();
        assert_eq!(a, b);
        for bad in [0.0, -1.0, f64::NAN] {
            let config = HierarchyConfig {
                input_scale: bad,
                ..Default::default()
            };
            assert!(hierarchical_rank_pool(&x, &config, &params).is_err());
        }
    }
}
