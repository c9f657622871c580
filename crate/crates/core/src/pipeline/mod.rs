//! End-to-end stages behind the CLI: segment, encode, train the baseline,
//! classify with fusion, evaluate. Every stage reads and writes plain files
//! so runs can be resumed or mixed with external tools.

mod baseline;
mod config;
mod manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

pub use baseline::{image_features, CentroidModel};
pub use config::PipelineConfig;
pub use manifest::{
    read_json, write_json, ErrorEntry, LoadedManifest, Manifest, MetricsReport, Prediction, ScoreRecord, SegmentEntry,
    SequenceMetrics, SequenceTruth, TruthFile,
};

use crate::depth_io::{load_depth_sequence, save_dynamic_image, DepthSequence, SequenceFormat};
use crate::error::{Error, Result};
use crate::fusion_eval::{
    jaccard_sequence, mean_jaccard, product_fuse, recognition_rate, FrameLabeling, PredictionRecord, ScoreVector,
};
use crate::representations::{build_channel, Channel};
use crate::segmentation::{
    fit_segmentation_model, levenshtein_segmentation_score, load_segments, save_segments, segment_actions,
    ActionSegment, SegmentationModel,
};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Runs `f` on a pool of `jobs` threads (0: one per core). Results never
/// depend on the thread count.
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// `ddi_fwd`, `ddi_bwd`, ... for the enabled channels, in fusion order.
pub fn view_names(channels: &[Channel]) -> Vec<String> {
    Channel::ALL
        .iter()
        .filter(|c| channels.contains(c))
        .flat_map(|c| [format!("{}_fwd", c.name()), format!("{}_bwd", c.name())])
        .collect()
}

pub fn segment_id(source_id: &str, index: usize) -> String {
    format!("{source_id}_{index:03}")
}

pub fn load_sequence(path: &Path) -> Result<DepthSequence> {
    if !path.exists() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    load_depth_sequence(path, SequenceFormat::detect(path))
}

/// Fits the boundary model from sequences whose true segments are listed in
/// `truth` under their file stem.
pub fn fit_segmenter(inputs: &[PathBuf], truth: &TruthFile, config: &PipelineConfig) -> Result<SegmentationModel> {
    let mut training = Vec::new();
    for path in inputs {
        let seq = load_sequence(path)?;
        let segs = truth
            .sequence(&seq.source_id)
            .map(|t| t.segments.clone())
            .unwrap_or_default();
        training.push((seq, segs));
    }
    fit_segmentation_model(&training, &config.qom)
}

/// Segments each input and writes `<output_dir>/<source_id>.segments.json`.
/// Returns the written paths.
pub fn run_segment(inputs: &[PathBuf], model: &SegmentationModel, config: &PipelineConfig) -> Result<Vec<PathBuf>> {
    create_dir(&config.output_dir)?;
    let mut written = Vec::new();
    for path in inputs {
        let seq = load_sequence(path)?;
        let segments = with_jobs(config.jobs, || segment_actions(&seq, model, &config.qom))??;
        let out = config.output_dir.join(format!("{}.segments.json", seq.source_id));
        save_segments(&segments, &out)?;
        written.push(out);
    }
    Ok(written)
}

/// Encodes every (segment, channel) pair of every input into forward and
/// backward PNGs under `config.output_dir`, plus a manifest. A failing pair
/// is recorded in the manifest and the rest of the batch proceeds.
pub fn run_encode(
    inputs: &[(PathBuf, PathBuf)],
    truth: Option<&TruthFile>,
    config: &PipelineConfig,
) -> Result<Manifest> {
    config.validate()?;
    create_dir(&config.output_dir)?;
    let gmm = config.gmm_params();
    let channels: Vec<Channel> = Channel::ALL
        .into_iter()
        .filter(|c| config.channels.contains(c))
        .collect();

    let mut entries = Vec::new();
    let mut errors = Vec::new();
    for (seq_path, seg_path) in inputs {
        let seq = load_sequence(seq_path)?;
        let segments = load_segments(seg_path)?;
        let mut tasks = Vec::new();
        for (i, s) in segments.iter().enumerate() {
            s.validate(seq.len())?;
            for &c in &channels {
                tasks.push((i, c));
            }
        }
        let results = with_jobs(config.jobs, || {
            tasks
                .par_iter()
                .map(|&(i, c)| {
                    let s = &segments[i];
                    let clip = seq.slice(s.start, s.end)?;
                    build_channel(
                        c,
                        &clip,
                        &config.background,
                        &gmm,
                        &config.hierarchy_for(c),
                        &config.pool,
                    )
                })
                .collect::<Vec<_>>()
        })?;

        let mut images: Vec<BTreeMap<String, String>> = vec![BTreeMap::new(); segments.len()];
        for (&(i, c), result) in tasks.iter().zip(results) {
            let id = segment_id(&seq.source_id, i + 1);
            match result {
                Ok((fwd, bwd)) => {
                    for (dir, img) in [("fwd", fwd), ("bwd", bwd)] {
                        let name = format!("{id}_{}_{dir}.png", c.name());
                        save_dynamic_image(&img, &config.output_dir.join(&name))?;
                        images[i].insert(format!("{}_{dir}", c.name()), name);
                    }
                }
                Err(e) => errors.push(ErrorEntry {
                    segment_id: id,
                    channel: c.name().to_string(),
                    error: e.tag().to_string(),
                    message: e.to_string(),
                }),
            }
        }
        for (i, (s, images)) in segments.iter().zip(images).enumerate() {
            let label = s
                .label
                .or_else(|| truth.and_then(|t| t.label_for(&seq.source_id, s.start, s.end)));
            entries.push(SegmentEntry {
                segment_id: segment_id(&seq.source_id, i + 1),
                source_id: seq.source_id.clone(),
                start: s.start,
                end: s.end,
                label,
                images,
            });
        }
    }
    let manifest = Manifest {
        segments: entries,
        errors,
    };
    write_json(&manifest, &config.output_dir.join(MANIFEST_NAME))?;
    Ok(manifest)
}

fn segment_label(entry: &SegmentEntry, labels: Option<&TruthFile>) -> Option<u32> {
    labels
        .and_then(|t| t.label_for(&entry.source_id, entry.start, entry.end))
        .or(entry.label)
}

/// Fits one nearest-centroid model per enabled view on the labelled segments
/// of a manifest. Labels come from `labels` when given, else the manifest.
pub fn train_baseline(
    manifest: &LoadedManifest,
    labels: Option<&TruthFile>,
    config: &PipelineConfig,
) -> Result<CentroidModel> {
    let views = view_names(&config.channels);
    let mut jobs = Vec::new();
    for entry in &manifest.manifest.segments {
        let Some(label) = segment_label(entry, labels) else {
            continue;
        };
        for view in &views {
            if let Some(file) = entry.images.get(view) {
                jobs.push((view.clone(), manifest.image_path(file), label));
            }
        }
    }
    if jobs.is_empty() {
        return Err(Error::NoTrainingData);
    }
    let size = config.baseline_size;
    let features = with_jobs(config.jobs, || {
        jobs.par_iter()
            .map(|(_, path, _)| crate::depth_io::load_dynamic_image(path).map(|img| image_features(&img, size)))
            .collect::<Result<Vec<_>>>()
    })??;

    let mut examples: BTreeMap<String, Vec<(Vec<f64>, u32)>> = views.iter().map(|v| (v.clone(), Vec::new())).collect();
    for ((view, _, label), f) in jobs.into_iter().zip(features) {
        examples.get_mut(&view).expect("known view").push((f, label));
    }
    for (view, items) in &examples {
        if items.is_empty() {
            return Err(Error::MissingClassExamples {
                channel: view.clone(),
                class: 0,
            });
        }
    }
    CentroidModel::fit(size, &examples)
}

/// Where per-view scores come from.
pub enum ScoreSource<'a> {
    Model(&'a CentroidModel),
    External(&'a [ScoreRecord]),
}

/// Scores every segment on every enabled view and fuses them.
pub fn classify(
    manifest: &LoadedManifest,
    source: ScoreSource<'_>,
    config: &PipelineConfig,
) -> Result<Vec<Prediction>> {
    let views = view_names(&config.channels);
    let external: BTreeMap<(&str, &str), &ScoreRecord> = match &source {
        ScoreSource::External(records) => records
            .iter()
            .map(|r| ((r.segment_id.as_str(), r.channel.as_str()), r))
            .collect(),
        ScoreSource::Model(_) => BTreeMap::new(),
    };
    let missing = |entry: &SegmentEntry, view: &str| Error::MissingScores {
        segment_id: entry.segment_id.clone(),
        channel: view.to_string(),
    };

    with_jobs(config.jobs, || {
        manifest
            .manifest
            .segments
            .par_iter()
            .map(|entry| {
                let mut scores = Vec::with_capacity(views.len());
                for view in &views {
                    let s = match &source {
                        ScoreSource::Model(model) => {
                            let file = entry.images.get(view).ok_or_else(|| missing(entry, view))?;
                            model.score_image(view, &manifest.image_path(file))?
                        }
                        ScoreSource::External(_) => {
                            let record = external
                                .get(&(entry.segment_id.as_str(), view.as_str()))
                                .ok_or_else(|| missing(entry, view))?;
                            ScoreVector::new(record.scores.clone())?
                        }
                    };
                    scores.push(s);
                }
                let (label, fused) = product_fuse(&scores)?;
                Ok(Prediction {
                    segment_id: entry.segment_id.clone(),
                    source_id: entry.source_id.clone(),
                    start: entry.start,
                    end: entry.end,
                    label: label as u32,
                    fused,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?
}

/// Recognition rate over predictions that overlap a labelled true segment,
/// plus frame-level Jaccard and the segmentation Levenshtein score per truth
/// sequence.
pub fn evaluate(predictions: &[Prediction], truth: &TruthFile) -> Result<MetricsReport> {
    let records: Vec<PredictionRecord> = predictions
        .iter()
        .filter_map(|p| {
            truth.label_for(&p.source_id, p.start, p.end).map(|t| PredictionRecord {
                predicted: p.label,
                truth: t,
            })
        })
        .collect();
    let recognition_rate = recognition_rate(&records)?;

    let mut per_sequence = Vec::new();
    for seq in &truth.sequences {
        let predicted: Vec<ActionSegment> = predictions
            .iter()
            .filter(|p| p.source_id == seq.sequence_id)
            .map(|p| ActionSegment::labelled(p.start, p.end, p.label))
            .collect();
        let t = FrameLabeling::from_segments(seq.length, &seq.segments)?;
        let p = FrameLabeling::from_segments(seq.length, &predicted)?;
        per_sequence.push(SequenceMetrics {
            sequence_id: seq.sequence_id.clone(),
            jaccard: jaccard_sequence(&t, &p)?,
            levenshtein: levenshtein_segmentation_score(&predicted, &seq.segments),
        });
    }
    let jaccards: Vec<f64> = per_sequence.iter().map(|s| s.jaccard).collect();
    Ok(MetricsReport {
        recognition_rate,
        mean_jaccard: mean_jaccard(&jaccards).ok(),
        per_sequence,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}
