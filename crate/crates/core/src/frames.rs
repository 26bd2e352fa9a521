//! 8-bit intensity frames and the on-disk frame-sequence layout: a directory
//! of binary PGM (or PPM) images, read in file-name order, plus a
//! `timestamps.txt` holding one integer microsecond timestamp per frame.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};

use crate::sim::IntensityFrame;

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("image decode failed: {0}")]
    Decode(String),
    #[error("{0}")]
    Layout(String),
    #[error("timestamps.txt line {line}: {msg}")]
    Timestamp { line: usize, msg: String },
}

/// Interleaved 8-bit image with 1 (gray) or 3 (RGB) channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageFrame {
    pub width: u32,
    pub height: u32,
    pub channels: u8,
    pub data: Vec<u8>,
}

impl ImageFrame {
    pub fn gray(width: u32, height: u32, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), width as usize * height as usize);
        Self { width, height, channels: 1, data }
    }

    pub fn rgb(width: u32, height: u32, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), 3 * width as usize * height as usize);
        Self { width, height, channels: 3, data }
    }

    /// Grayscale intensities (Rec. 601 luma for RGB input).
    pub fn luma(&self) -> Vec<u8> {
        match self.channels {
            1 => self.data.clone(),
            _ => self
                .data
                .chunks_exact(3)
                .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64).round() as u8)
                .collect(),
        }
    }

    pub fn to_intensity(&self, t: u64) -> IntensityFrame {
        IntensityFrame {
            t,
            width: self.width,
            height: self.height,
            pixels: self.luma().into_iter().map(f64::from).collect(),
        }
    }
}

/// Decode a PGM/PPM image (binary or ASCII). Higher bit depths are reduced to 8 bits.
pub fn decode_pnm(bytes: &[u8]) -> Result<ImageFrame, FrameError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Pnm)
        .map_err(|e| FrameError::Decode(e.to_string()))?;
    Ok(match img {
        DynamicImage::ImageLuma8(b) => ImageFrame::gray(b.width(), b.height(), b.into_raw()),
        DynamicImage::ImageRgb8(b) => ImageFrame::rgb(b.width(), b.height(), b.into_raw()),
        other if other.color().has_color() => {
            let b = other.to_rgb8();
            ImageFrame::rgb(b.width(), b.height(), b.into_raw())
        }
        other => {
            let b = other.to_luma8();
            ImageFrame::gray(b.width(), b.height(), b.into_raw())
        }
    })
}

/// Encode as binary PGM (gray) or PPM (RGB).
pub fn encode_pnm(frame: &ImageFrame) -> Result<Vec<u8>, FrameError> {
    let mut out = Vec::new();
    let (subtype, color) = match frame.channels {
        1 => (PnmSubtype::Graymap(SampleEncoding::Binary), ExtendedColorType::L8),
        _ => (PnmSubtype::Pixmap(SampleEncoding::Binary), ExtendedColorType::Rgb8),
    };
    PnmEncoder::new(Cursor::new(&mut out))
        .with_subtype(subtype)
        .write_image(&frame.data, frame.width, frame.height, color)
        .map_err(|e| FrameError::Decode(e.to_string()))?;
    Ok(out)
}

pub fn parse_timestamps(text: &str) -> Result<Vec<u64>, FrameError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let t: u64 = s.parse().map_err(|_| FrameError::Timestamp {
            line: i + 1,
            msg: format!("not an integer microsecond value: {s:?}"),
        })?;
        if let Some(&prev) = out.last() {
            if t <= prev {
                return Err(FrameError::Timestamp {
                    line: i + 1,
                    msg: format!("{t} is not after {prev}"),
                });
            }
        }
        out.push(t);
    }
    Ok(out)
}

/// A loaded frame sequence.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    pub frames: Vec<ImageFrame>,
    pub timestamps: Vec<u64>,
}

impl FrameSequence {
    pub fn resolution(&self) -> Option<(u32, u32)> {
        self.frames.first().map(|f| (f.width, f.height))
    }

    pub fn intensity_frames(&self) -> Vec<IntensityFrame> {
        self.frames.iter().zip(&self.timestamps).map(|(f, &t)| f.to_intensity(t)).collect()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FrameError + '_ {
    move |source| FrameError::Io { path: path.to_path_buf(), source }
}

/// Sorted paths of the `.pgm`/`.ppm` files in `dir`.
pub fn list_frame_files(dir: &Path) -> Result<Vec<PathBuf>, FrameError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("pgm") || e.eq_ignore_ascii_case("ppm"))
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn load_frame_dir(dir: &Path) -> Result<FrameSequence, FrameError> {
    let files = list_frame_files(dir)?;
    if files.is_empty() {
        return Err(FrameError::Layout(format!("{}: no .pgm/.ppm frames", dir.display())));
    }
    let ts_path = dir.join("timestamps.txt");
    let ts_text = std::fs::read_to_string(&ts_path).map_err(io_err(&ts_path))?;
    let timestamps = parse_timestamps(&ts_text)?;
    if timestamps.len() != files.len() {
        return Err(FrameError::Layout(format!(
            "{} frames but {} timestamps",
            files.len(),
            timestamps.len()
        )));
    }
    let mut frames = Vec::with_capacity(files.len());
    for path in &files {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        let frame = decode_pnm(&bytes).map_err(|e| FrameError::Layout(format!("{}: {e}", path.display())))?;
        if let Some(first) = frames.first() {
            let first: &ImageFrame = first;
            if (first.width, first.height) != (frame.width, frame.height) {
                return Err(FrameError::Layout(format!(
                    "{}: resolution {}x{} differs from {}x{}",
                    path.display(),
                    frame.width,
                    frame.height,
                    first.width,
                    first.height
                )));
            }
        }
        frames.push(frame);
    }
    Ok(FrameSequence { frames, timestamps })
}

/// Write frames as `frame_00000.pgm`, ... plus `timestamps.txt`.
pub fn write_frame_dir(dir: &Path, seq: &FrameSequence) -> Result<(), FrameError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (i, f) in seq.frames.iter().enumerate() {
        let ext = if f.channels == 1 { "pgm" } else { "ppm" };
        let path = dir.join(format!("frame_{i:05}.{ext}"));
        std::fs::write(&path, encode_pnm(f)?).map_err(io_err(&path))?;
    }
    let ts: String = seq.timestamps.iter().map(|t| format!("{t}\n")).collect();
    let path = dir.join("timestamps.txt");
    std::fs::write(&path, ts).map_err(io_err(&path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let f = ImageFrame::gray(3, 2, vec![0, 1, 2, 128, 254, 255]);
        let bytes = encode_pnm(&f).unwrap();
        assert!(bytes.starts_with(b"P5"));
        assert_eq!(decode_pnm(&bytes).unwrap(), f);
    }

    #[test]
    fn ascii_pgm_decodes() {
        let f = decode_pnm(b"P2\n2 1\n255\n7 200\n").unwrap();
        assert_eq!(f, ImageFrame::gray(2, 1, vec![7, 200]));
    }

    #[test]
    fn ppm_luma() {
        let f = decode_pnm(&encode_pnm(&ImageFrame::rgb(1, 1, vec![255, 255, 255])).unwrap()).unwrap();
        assert_eq!(f.channels, 3);
        assert_eq!(f.luma(), vec![255]);
    }

    #[test]
    fn garbage_is_an_error() {
        assert!(decode_pnm(b"P5\n99999999 99999999\n255\n").is_err());
        assert!(decode_pnm(b"hello").is_err());
    }

    #[test]
    fn timestamps_must_increase() {
        assert_eq!(parse_timestamps("0\n10\n\n20\n").unwrap(), vec![0, 10, 20]);
        assert!(parse_timestamps("0\n0\n").is_err());
        assert!(parse_timestamps("x\n").is_err());
    }

    #[test]
    fn frame_dir_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let seq = FrameSequence {
            frames: vec![ImageFrame::gray(2, 2, vec![1, 2, 3, 4]), ImageFrame::gray(2, 2, vec![5, 6, 7, 8])],
            timestamps: vec![0, 33_333],
        };
        write_frame_dir(dir.path(), &seq).unwrap();
        let back = load_frame_dir(dir.path()).unwrap();
        assert_eq!(back.frames, seq.frames);
        assert_eq!(back.timestamps, seq.timestamps);
    }
}
