//! `ddimg`: segment depth streams, encode dynamic images, classify, evaluate.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use ddimg_core::depth_io::save_dseq;
use ddimg_core::pipeline::{
    self, read_json, write_json, CentroidModel, LoadedManifest, Prediction, ScoreRecord, ScoreSource, SequenceTruth,
    TruthFile, MANIFEST_NAME,
};
use ddimg_core::synth::{gesture_dataset, SceneSpec};
use ddimg_core::{Channel, Error, PipelineConfig, SegmentationModel};

#[derive(Parser)]
#[command(
    name = "ddimg",
    version,
    about = "Dynamic depth images from continuous depth streams"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// TOML configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Comma-separated subset of ddi,ddni,ddmni.
    #[arg(long, global = true, value_delimiter = ',')]
    channels: Option<Vec<Channel>>,
    /// Worker threads (0: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic gesture dataset and its truth file.
    Synth {
        #[arg(long, default_value_t = 2)]
        classes: u32,
        #[arg(long, default_value_t = 10)]
        per_class: usize,
        #[arg(long, default_value_t = 2)]
        gestures: usize,
    },
    /// Fit the boundary model from annotated sequences.
    FitSegmenter {
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Split sequences into action segments.
    Segment {
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        /// Boundary model written by `fit-segmenter`.
        #[arg(long)]
        model: PathBuf,
    },
    /// Render forward/backward dynamic images for every segment.
    Encode {
        /// Sequences; pair each with a `--segments` file in the same order.
        #[arg(long, required = true)]
        input: Vec<PathBuf>,
        #[arg(long, required = true)]
        segments: Vec<PathBuf>,
        /// Truth file used to label segments in the manifest.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Fit the nearest-centroid baseline on an encoded manifest.
    TrainBaseline {
        #[arg(long)]
        manifest: PathBuf,
        /// Truth file; defaults to the labels stored in the manifest.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Score and fuse every segment of a manifest.
    Classify {
        #[arg(long)]
        manifest: PathBuf,
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Compute recognition rate, Jaccard and Levenshtein metrics.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        /// Predictions from `classify`; or classify on the fly with
        /// `--manifest` and a score source.
        #[arg(long, conflicts_with = "manifest")]
        predictions: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        source: SourceArgs,
    },
    /// Show the effective configuration.
    Config {
        #[arg(long)]
        dump: bool,
    },
}

#[derive(Args)]
struct SourceArgs {
    /// Baseline model from `train-baseline`.
    #[arg(long, conflicts_with = "scores")]
    model: Option<PathBuf>,
    /// External scores: `[{"segment_id", "channel", "scores"}]`.
    #[arg(long)]
    scores: Option<PathBuf>,
}

/// Bad invocation rather than bad data.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn load_config(global: &GlobalArgs) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match &global.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(channels) = &global.channels {
        cfg.channels = channels.clone();
    }
    if let Some(jobs) = global.jobs {
        cfg.jobs = jobs;
    }
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &global.output_dir {
        cfg.output_dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_output_dir(cfg: &PipelineConfig) -> anyhow::Result<()> {
    std::fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("cannot create output directory {}", cfg.output_dir.display()))
}

fn classify(manifest: &Path, source: &SourceArgs, cfg: &PipelineConfig) -> anyhow::Result<Vec<Prediction>> {
    let manifest = LoadedManifest::load(manifest)?;
    Ok(match (&source.model, &source.scores) {
        (Some(path), None) => {
            let model: CentroidModel = read_json(path, "baseline model")?;
            pipeline::classify(&manifest, ScoreSource::Model(&model), cfg)?
        }
        (None, Some(path)) => {
            let records: Vec<ScoreRecord> = read_json(path, "scores")?;
            pipeline::classify(&manifest, ScoreSource::External(&records), cfg)?
        }
        _ => bail!(usage("one of --model or --scores is required")),
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(&cli.global)?;
    match cli.command {
        Command::Synth {
            classes,
            per_class,
            gestures,
        } => {
            create_output_dir(&cfg)?;
            let mut truth = TruthFile::default();
            for stream in gesture_dataset(&SceneSpec::default(), classes, per_class, gestures, cfg.seed) {
                let id = stream.sequence.source_id.clone();
                save_dseq(&stream.sequence, &cfg.output_dir.join(format!("{id}.dseq")))?;
                truth.sequences.push(SequenceTruth {
                    sequence_id: id,
                    length: stream.sequence.len(),
                    segments: stream.truth,
                });
            }
            write_json(&truth, &cfg.output_dir.join("truth.json"))?;
            println!(
                "{} sequences written to {}",
                truth.sequences.len(),
                cfg.output_dir.display()
            );
        }
        Command::FitSegmenter { input, truth } => {
            let truth: TruthFile = read_json(&truth, "truth")?;
            let model = pipeline::fit_segmenter(&input, &truth, &cfg)?;
            create_output_dir(&cfg)?;
            let out = cfg.output_dir.join("segmenter.json");
            write_json(&model, &out)?;
            println!("{}", out.display());
        }
        Command::Segment { input, model } => {
            let model: SegmentationModel = read_json(&model, "segmentation model")?;
            for path in pipeline::run_segment(&input, &model, &cfg)? {
                println!("{}", path.display());
            }
        }
        Command::Encode { input, segments, truth } => {
            if input.len() != segments.len() {
                bail!(usage(format!(
                    "{} --input but {} --segments; give one segment file per sequence",
                    input.len(),
                    segments.len()
                )));
            }
            let truth: Option<TruthFile> = truth.map(|p| read_json(&p, "truth")).transpose()?;
            let pairs: Vec<_> = input.into_iter().zip(segments).collect();
            let manifest = pipeline::run_encode(&pairs, truth.as_ref(), &cfg)?;
            println!(
                "{} segments, {} failed (segment, channel) pairs; {}",
                manifest.segments.len(),
                manifest.errors.len(),
                cfg.output_dir.join(MANIFEST_NAME).display()
            );
        }
        Command::TrainBaseline { manifest, labels } => {
            let manifest = LoadedManifest::load(&manifest)?;
            let labels: Option<TruthFile> = labels.map(|p| read_json(&p, "labels")).transpose()?;
            let model = pipeline::train_baseline(&manifest, labels.as_ref(), &cfg)?;
            create_output_dir(&cfg)?;
            let out = cfg.output_dir.join("baseline.json");
            write_json(&model, &out)?;
            println!("{}", out.display());
        }
        Command::Classify { manifest, source } => {
            let predictions = classify(&manifest, &source, &cfg)?;
            create_output_dir(&cfg)?;
            let out = cfg.output_dir.join("predictions.json");
            write_json(&predictions, &out)?;
            println!("{}", out.display());
        }
        Command::Eval {
            truth,
            predictions,
            manifest,
            source,
        } => {
            let truth: TruthFile = read_json(&truth, "truth")?;
            let predictions: Vec<Prediction> = match (predictions, manifest) {
                (Some(p), None) => read_json(&p, "predictions")?,
                (None, Some(m)) => classify(&m, &source, &cfg)?,
                _ => bail!(usage(
                    "eval needs --predictions, or --manifest with --model or --scores"
                )),
            };
            let metrics = pipeline::evaluate(&predictions, &truth)?;
            create_output_dir(&cfg)?;
            let out = cfg.output_dir.join("metrics.json");
            write_json(&metrics, &out)?;
            println!("recognition_rate {:.4}", metrics.recognition_rate);
            if let Some(j) = metrics.mean_jaccard {
                println!("mean_jaccard {j:.4}");
            }
        }
        Command::Config { dump } => {
            if !dump {
                bail!(usage("config needs --dump"));
            }
            print!("{}", cfg.to_toml());
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 1;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidParameter(_)) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(3)
        }
    }
}
