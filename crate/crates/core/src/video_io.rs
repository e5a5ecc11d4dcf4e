//! Raw video ingestion and emission: binary PGM directories and planar
//! 8-bit luma files.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum VideoIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: malformed PGM: {reason}")]
    MalformedPgm { path: PathBuf, reason: String },
    #[error("{path}: frame is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch {
        path: PathBuf,
        want_w: usize,
        want_h: usize,
        got_w: usize,
        got_h: usize,
    },
    #[error("{0}: no .pgm files found")]
    NoFrames(PathBuf),
    #[error("{path}: {len} bytes is not a whole number of {frame}-byte frames")]
    PlanarSize { path: PathBuf, len: usize, frame: usize },
    #[error("planar input needs width and height")]
    MissingGeometry,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> VideoIoError + '_ {
    move |source| VideoIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

/// Source container for [`read_frames`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VideoFormat {
    /// Directory of binary PGM (P5) files, read in lexicographic order.
    PgmDir,
    /// One file of concatenated 8-bit luma planes.
    Planar { width: usize, height: usize, count: Option<usize> },
}

/// Parses a binary PGM with `maxval <= 255`. `#` comments are allowed in
/// the header.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage, String> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("header ends early".into());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| "non-ASCII header")?);
    }
    if fields[0] != "P5" {
        return Err(format!("magic `{}` is not P5", fields[0]));
    }
    let num = |s: &str, what: &str| s.parse::<usize>().map_err(|_| format!("bad {what} `{s}`"));
    let width = num(fields[1], "width")?;
    let height = num(fields[2], "height")?;
    let maxval = num(fields[3], "maxval")?;
    if width == 0 || height == 0 {
        return Err("zero dimension".into());
    }
    if maxval == 0 || maxval > 255 {
        return Err(format!("maxval {maxval} unsupported (8-bit only)"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = width * height;
    let raster = bytes
        .get(pos..pos + need)
        .ok_or_else(|| format!("raster has {} bytes, need {need}", bytes.len().saturating_sub(pos)))?;
    if bytes.len() > pos + need {
        return Err("trailing bytes after raster".into());
    }
    Ok(GrayImage {
        width,
        height,
        data: raster.to_vec(),
    })
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn read_pgm(path: &Path) -> Result<GrayImage, VideoIoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    parse_pgm(&bytes).map_err(|reason| VideoIoError::MalformedPgm {
        path: path.to_path_buf(),
        reason,
    })
}

pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<(), VideoIoError> {
    fs::write(path, encode_pgm(img)).map_err(io_err(path))
}

fn check_dims(path: &Path, first: &GrayImage, img: &GrayImage) -> Result<(), VideoIoError> {
    if (img.width, img.height) != (first.width, first.height) {
        return Err(VideoIoError::DimensionMismatch {
            path: path.to_path_buf(),
            want_w: first.width,
            want_h: first.height,
            got_w: img.width,
            got_h: img.height,
        });
    }
    Ok(())
}

pub fn read_frames(path: &Path, format: &VideoFormat) -> Result<Vec<GrayImage>, VideoIoError> {
    match *format {
        VideoFormat::PgmDir => {
            let mut files: Vec<PathBuf> = fs::read_dir(path)
                .map_err(io_err(path))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
                .collect();
            files.sort();
            if files.is_empty() {
                return Err(VideoIoError::NoFrames(path.to_path_buf()));
            }
            let mut frames: Vec<GrayImage> = Vec::with_capacity(files.len());
            for file in &files {
                let img = read_pgm(file)?;
                if let Some(first) = frames.first() {
                    check_dims(file, first, &img)?;
                }
                frames.push(img);
            }
            Ok(frames)
        }
        VideoFormat::Planar { width, height, count } => {
            if width == 0 || height == 0 {
                return Err(VideoIoError::MissingGeometry);
            }
            let bytes = fs::read(path).map_err(io_err(path))?;
            let frame = width * height;
            let available = bytes.len() / frame;
            let count = count.unwrap_or(available);
            if bytes.len() != count * frame {
                return Err(VideoIoError::PlanarSize {
                    path: path.to_path_buf(),
                    len: bytes.len(),
                    frame,
                });
            }
            Ok(bytes
                .chunks_exact(frame)
                .map(|c| GrayImage {
                    width,
                    height,
                    data: c.to_vec(),
                })
                .collect())
        }
    }
}

/// Writes `frame_00000.pgm`, `frame_00001.pgm`, ... into `dir` (created if needed).
pub fn write_frames(dir: &Path, frames: &[GrayImage]) -> Result<Vec<PathBuf>, VideoIoError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    frames
        .iter()
        .enumerate()
        .map(|(i, img)| {
            let p = dir.join(format!("frame_{i:05}.pgm"));
            write_pgm(&p, img)?;
            Ok(p)
        })
        .collect()
}
