//! Depth sequence containers, their on-disk formats, and rendering of
//! real-valued weight fields into 8-bit dynamic images.
//!
//! Two sequence formats are supported:
//!
//! * `png_dir`: a directory of `frame_%06d.png` files, 1-indexed, each a
//!   single-channel 16-bit grayscale PNG (8-bit grayscale is widened).
//! * `dseq`: the bytes `DSEQ`, then little-endian `u32` width, height and
//!   frame count, then `count * width * height` little-endian `u16` samples,
//!   frame-major and row-major.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use image::{DynamicImage as AnyImage, GrayImage, ImageBuffer, Luma, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DSEQ_MAGIC: &[u8; 4] = b"DSEQ";

/// One depth map. Samples are millimetres; 0 means no reading.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepthFrame {
    width: usize,
    height: usize,
    values: Vec<u16>,
}

impl DepthFrame {
    pub fn new(width: usize, height: usize, values: Vec<u16>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::InvalidParameter(format!(
                "depth frames must be at least 2x2, got {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(Error::LengthMismatch(values.len(), width * height));
        }
        Ok(DepthFrame { width, height, values })
    }

    pub fn filled(width: usize, height: usize, value: u16) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u16] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [u16] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.values[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u16) {
        self.values[y * self.width + x] = v;
    }
}

/// An ordered stack of equally sized depth frames.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthSequence {
    frames: Vec<DepthFrame>,
    pub frame_rate: f64,
    pub source_id: String,
}

impl DepthSequence {
    pub fn new(frames: Vec<DepthFrame>, frame_rate: f64, source_id: impl Into<String>) -> Result<Self> {
        let first = frames.first().ok_or(Error::EmptySequence)?;
        let (w, h) = (first.width, first.height);
        for (i, f) in frames.iter().enumerate() {
            if f.width != w || f.height != h {
                return Err(Error::CorruptFrame {
                    path: format!("frame {}", i + 1).into(),
                    reason: format!("{}x{} differs from {w}x{h}", f.width, f.height),
                });
            }
        }
        Ok(DepthSequence {
            frames,
            frame_rate,
            source_id: source_id.into(),
        })
    }

    pub fn frames(&self) -> &[DepthFrame] {
        &self.frames
    }

    pub fn frames_mut(&mut self) -> &mut [DepthFrame] {
        &mut self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    /// Frame by 1-based index.
    pub fn frame(&self, t: usize) -> Result<&DepthFrame> {
        if t == 0 || t > self.frames.len() {
            return Err(Error::FrameOutOfRange {
                index: t,
                len: self.frames.len(),
            });
        }
        Ok(&self.frames[t - 1])
    }

    /// Frames `start..=end` (1-based, inclusive) as a new sequence.
    pub fn slice(&self, start: usize, end: usize) -> Result<DepthSequence> {
        if start == 0 || start > end || end > self.frames.len() {
            return Err(Error::FrameOutOfRange {
                index: if start == 0 { 0 } else { end },
                len: self.frames.len(),
            });
        }
        Ok(DepthSequence {
            frames: self.frames[start - 1..end].to_vec(),
            frame_rate: self.frame_rate,
            source_id: self.source_id.clone(),
        })
    }

    /// Same frames in reverse temporal order.
    pub fn reversed(&self) -> DepthSequence {
        DepthSequence {
            frames: self.frames.iter().rev().cloned().collect(),
            frame_rate: self.frame_rate,
            source_id: self.source_id.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceFormat {
    PngDir,
    Dseq,
}

impl SequenceFormat {
    /// `Dseq` for files, `PngDir` for directories.
    pub fn detect(path: &Path) -> SequenceFormat {
        if path.is_dir() {
            SequenceFormat::PngDir
        } else {
            SequenceFormat::Dseq
        }
    }
}

impl FromStr for SequenceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "png_dir" => Ok(SequenceFormat::PngDir),
            "dseq" => Ok(SequenceFormat::Dseq),
            other => Err(Error::InvalidParameter(format!("unknown sequence format `{other}`"))),
        }
    }
}

pub fn load_depth_sequence(path: &Path, format: SequenceFormat) -> Result<DepthSequence> {
    if !path.exists() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    let source_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match format {
        SequenceFormat::Dseq => load_dseq(path, source_id),
        SequenceFormat::PngDir => load_png_dir(path, source_id),
    }
}

fn frame_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix("frame_")?.strip_suffix(".png")?;
    if digits.len() != 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn load_png_dir(dir: &Path, source_id: String) -> Result<DepthSequence> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut indexed = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        if let Some(idx) = frame_index(&name.to_string_lossy()) {
            indexed.push((idx, entry.path()));
        }
    }
    if indexed.is_empty() {
        return Err(Error::EmptySequence);
    }
    indexed.sort();

    let mut frames = Vec::with_capacity(indexed.len());
    for (_, path) in &indexed {
        let corrupt = |reason: String| Error::CorruptFrame {
            path: path.clone(),
            reason,
        };
        let img = image::open(path).map_err(|e| corrupt(e.to_string()))?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let values: Vec<u16> = match img {
            AnyImage::ImageLuma16(buf) => buf.into_raw(),
            AnyImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(u16::from).collect(),
            other => {
                return Err(corrupt(format!(
                    "expected single-channel image, got {:?}",
                    other.color()
                )))
            }
        };
        if let Some(first) = frames.first() {
            let first: &DepthFrame = first;
            if first.width != w || first.height != h {
                return Err(corrupt(format!(
                    "{w}x{h} differs from {}x{}",
                    first.width, first.height
                )));
            }
        }
        frames.push(DepthFrame::new(w, h, values).map_err(|e| corrupt(e.to_string()))?);
    }
    DepthSequence::new(frames, 30.0, source_id)
}

fn load_dseq(path: &Path, source_id: String) -> Result<DepthSequence> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let corrupt = |reason: &str| Error::CorruptFrame {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };

    let mut header = [0u8; 16];
    reader
        .read_exact(&mut header)
        .map_err(|_| corrupt("truncated header"))?;
    if &header[0..4] != DSEQ_MAGIC {
        return Err(corrupt("missing DSEQ magic"));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
    let (width, height, count) = (word(4), word(8), word(12));
    if count == 0 {
        return Err(Error::EmptySequence);
    }

    let mut buf = vec![0u8; width * height * 2];
    let mut frames = Vec::with_capacity(count);
    for _ in 0..count {
        reader
            .read_exact(&mut buf)
            .map_err(|_| corrupt("truncated sample data"))?;
        let values = buf.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect();
        frames.push(DepthFrame::new(width, height, values).map_err(|e| corrupt(&e.to_string()))?);
    }
    DepthSequence::new(frames, 30.0, source_id)
}

pub fn save_dseq(seq: &DepthSequence, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
    write(DSEQ_MAGIC)?;
    write(&(seq.width() as u32).to_le_bytes())?;
    write(&(seq.height() as u32).to_le_bytes())?;
    write(&(seq.len() as u32).to_le_bytes())?;
    for frame in seq.frames() {
        let bytes: Vec<u8> = frame.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        write(&bytes)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `frame_000001.png`, ... into `dir`, creating it if needed.
pub fn save_png_dir(seq: &DepthSequence, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, frame) in seq.frames().iter().enumerate() {
        let path = dir.join(format!("frame_{:06}.png", i + 1));
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(frame.width as u32, frame.height as u32, frame.values.clone())
                .expect("frame buffer matches its dimensions");
        buf.save(&path).map_err(|e| image_error(&path, e))?;
    }
    Ok(())
}

fn image_error(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::ImageFailure {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    }
}

/// An 8-bit rendered weight field; 1 channel for DDI, 3 for DDNI/DDMNI.
/// Pixels are row-major with channels interleaved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DynamicImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub pixels: Vec<u8>,
}

impl DynamicImage {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParameter(format!(
                "dynamic images have 1 or 3 channels, got {channels}"
            )));
        }
        if pixels.len() != width * height * channels {
            return Err(Error::LengthMismatch(pixels.len(), width * height * channels));
        }
        Ok(DynamicImage {
            width,
            height,
            channels,
            pixels,
        })
    }
}

/// Min-max maps a real field jointly over all channels onto `0..=255`.
///
/// `field` is channel-planar: `channels` consecutive `width * height`
/// row-major planes. A constant field renders as mid-gray 128.
pub fn quantize_field(field: &[f64], width: usize, height: usize, channels: usize) -> Result<DynamicImage> {
    let plane = width * height;
    if field.len() != plane * channels {
        return Err(Error::LengthMismatch(field.len(), plane * channels));
    }
    if let Some(i) = field.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteField(i));
    }
    let (min, max) = field.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });

    let mut pixels = vec![128u8; field.len()];
    if max > min {
        let range = max - min;
        for c in 0..channels {
            for p in 0..plane {
                let v = field[c * plane + p];
                pixels[p * channels + c] = ((v - min) / range * 255.0).round() as u8;
            }
        }
    }
    DynamicImage::new(width, height, channels, pixels)
}

pub fn save_dynamic_image(img: &DynamicImage, path: &Path) -> Result<()> {
    let (w, h) = (img.width as u32, img.height as u32);
    let result = match img.channels {
        1 => GrayImage::from_raw(w, h, img.pixels.clone())
            .expect("validated buffer")
            .save(path),
        _ => RgbImage::from_raw(w, h, img.pixels.clone())
            .expect("validated buffer")
            .save(path),
    };
    result.map_err(|e| image_error(path, e))
}

pub fn load_dynamic_image(path: &Path) -> Result<DynamicImage> {
    if !path.exists() {
        return Err(Error::MissingPath(path.to_path_buf()));
    }
    let img = image::open(path).map_err(|e| image_error(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        AnyImage::ImageLuma8(buf) => DynamicImage::new(w, h, 1, buf.into_raw()),
        AnyImage::ImageRgb8(buf) => DynamicImage::new(w, h, 3, buf.into_raw()),
        other => Err(Error::ImageFailure {
            path: path.to_path_buf(),
            reason: format!("unsupported colour type {:?}", other.color()),
        }),
    }
}
