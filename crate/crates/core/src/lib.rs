//! Depth-video action encoding: QOM-based segmentation, hierarchical
//! bidirectional rank pooling into dynamic images (depth, normals, motion
//! normals), multiplicative score fusion and the usual metrics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod depth_io;
pub mod error;
pub mod fusion_eval;
pub mod pipeline;
pub mod rank_pooling;
pub mod representations;
pub mod segmentation;
pub mod synth;

pub use depth_io::{DepthFrame, DepthSequence, DynamicImage, SequenceFormat};
pub use error::{Error, Result};
pub use fusion_eval::{FrameLabeling, PredictionRecord, ScoreVector};
pub use pipeline::{CentroidModel, PipelineConfig};
pub use rank_pooling::{Direction, FeatureSequence, HierarchyConfig, RankPoolParams, SolverKind};
pub use representations::{BackgroundParams, Channel, DynamicImageSet, ForegroundMask, GmmParams, NormalField};
pub use segmentation::{ActionSegment, QomParams, SegmentationModel};
