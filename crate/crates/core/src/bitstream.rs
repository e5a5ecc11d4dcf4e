//! Binary stream of adaptive block measurements.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! header (31 bytes)
//!   magic       4  "BACS"
//!   version     u8 = 1
//!   width       u16
//!   height      u16
//!   block_size  u16
//!   high_sr     f32
//!   target_sr   f32
//!   frames      u32
//!   seed        u64
//! per frame
//!   index       u32
//!   threshold   f32
//!   sr_m        f32   rows per transmitted block = round(sr_m * B²)
//!   bitmap      ceil(l/8) bytes, block i at bit (i % 8) of byte i / 8
//!   moving      u32   number of set bits
//!   payload     f32 * moving * rows, moving blocks in raster order
//! ```
//!
//! Frame 0 is the key frame: every bitmap bit is set and every block is sent.

use thiserror::Error;

use crate::frame::{BlockGrid, FrameError};
use crate::measurement::{BlockMap, MeasurementSet};

pub const MAGIC: [u8; 4] = *b"BACS";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 31;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StreamError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported stream version {0} (expected {VERSION})")]
    UnsupportedVersion(u8),
    #[error("truncated header")]
    TruncatedHeader,
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("truncated frame {0}")]
    TruncatedFrame(u32),
    #[error("corrupt frame {index}: {reason}")]
    CorruptFrame { index: u32, reason: String },
    #[error("{0} trailing bytes after the last frame")]
    TrailingBytes(usize),
    #[error("cannot encode frame {index}: {reason}")]
    Inconsistent { index: usize, reason: String },
}

impl StreamError {
    /// Stable identifier for each failure class.
    pub fn code(&self) -> &'static str {
        match self {
            Self::BadMagic => "bad_magic",
            Self::UnsupportedVersion(_) => "version_mismatch",
            Self::TruncatedHeader => "truncated_header",
            Self::InvalidHeader(_) => "invalid_header",
            Self::TruncatedFrame(_) => "truncated_frame",
            Self::CorruptFrame { .. } => "corrupt_frame",
            Self::TrailingBytes(_) => "trailing_bytes",
            Self::Inconsistent { .. } => "inconsistent_input",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamHeader {
    pub width: u16,
    pub height: u16,
    pub block_size: u16,
    pub high_sr: f32,
    pub target_sr: f32,
    pub frame_count: u32,
    pub seed: u64,
}

impl StreamHeader {
    pub fn grid(&self) -> Result<BlockGrid, FrameError> {
        BlockGrid::new(self.width.into(), self.height.into(), self.block_size.into())
    }

    pub fn block_pixels(&self) -> usize {
        usize::from(self.block_size) * usize::from(self.block_size)
    }

    /// Rows per transmitted block implied by a frame's `sr_m` field.
    pub fn rows_for(&self, sr_m: f32) -> Option<usize> {
        if !sr_m.is_finite() || sr_m < 0.0 {
            return None;
        }
        let rows = (f64::from(sr_m) * self.block_pixels() as f64).round();
        (rows <= self.block_pixels() as f64).then_some(rows as usize)
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&self.width.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.block_size.to_le_bytes());
        out.extend_from_slice(&self.high_sr.to_le_bytes());
        out.extend_from_slice(&self.target_sr.to_le_bytes());
        out.extend_from_slice(&self.frame_count.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
    }
}

/// The `sr_m` value to transmit for a given row count: `rows / B²`.
pub fn sr_for_rows(rows: usize, block_size: usize) -> f32 {
    (rows as f64 / (block_size * block_size) as f64) as f32
}

fn bitmap_len(blocks: usize) -> usize {
    blocks.div_ceil(8)
}

fn check_frame(header: &StreamHeader, blocks: usize, pos: usize, set: &MeasurementSet, key_rows: usize) -> Result<usize, StreamError> {
    let bad = |reason: String| StreamError::Inconsistent { index: pos, reason };
    if set.frame_index as usize != pos {
        return Err(bad(format!("frame_index {} out of sequence", set.frame_index)));
    }
    if set.per_block.len() != blocks || set.block_map.len() != blocks {
        return Err(bad(format!(
            "{} blocks, header geometry has {blocks}",
            set.per_block.len()
        )));
    }
    let rows = header
        .rows_for(set.sr_m)
        .ok_or_else(|| bad(format!("invalid sr_m {}", set.sr_m)))?;
    if pos == 0 {
        if set.block_map.moving_count() != blocks {
            return Err(bad("key frame must send every block".into()));
        }
        if rows == 0 {
            return Err(bad("key frame has zero rows".into()));
        }
    } else if rows > key_rows {
        return Err(bad(format!("{rows} rows exceed key frame's {key_rows}")));
    }
    for (b, y) in set.per_block.iter().enumerate() {
        let expected = if set.block_map.is_moving(b) { rows } else { 0 };
        if y.len() != expected {
            return Err(bad(format!("block {b} has {} values, expected {expected}", y.len())));
        }
    }
    Ok(rows)
}

/// Serializes a whole sequence. `header.frame_count` must equal `frames.len()`.
pub fn write_stream(header: &StreamHeader, frames: &[MeasurementSet]) -> Result<Vec<u8>, StreamError> {
    let grid = header
        .grid()
        .map_err(|e| StreamError::InvalidHeader(e.to_string()))?;
    if header.frame_count as usize != frames.len() {
        return Err(StreamError::Inconsistent {
            index: frames.len(),
            reason: format!("header declares {} frames", header.frame_count),
        });
    }
    let blocks = grid.block_count();
    let payload: usize = frames.iter().map(MeasurementSet::scalar_count).sum();
    let mut out = Vec::with_capacity(HEADER_LEN + frames.len() * (16 + bitmap_len(blocks)) + 4 * payload);
    header.write(&mut out);
    let mut key_rows = 0;
    for (pos, set) in frames.iter().enumerate() {
        let rows = check_frame(header, blocks, pos, set, key_rows)?;
        if pos == 0 {
            key_rows = rows;
        }
        out.extend_from_slice(&set.frame_index.to_le_bytes());
        out.extend_from_slice(&set.threshold_used.to_le_bytes());
        out.extend_from_slice(&set.sr_m.to_le_bytes());
        let mut bitmap = vec![0u8; bitmap_len(blocks)];
        for (i, _) in set.block_map.flags().iter().enumerate().filter(|(_, &f)| f) {
            bitmap[i / 8] |= 1 << (i % 8);
        }
        out.extend_from_slice(&bitmap);
        out.extend_from_slice(&(set.block_map.moving_count() as u32).to_le_bytes());
        for v in set.per_block.iter().flatten() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let s = self.data.get(self.pos..self.pos.checked_add(n)?)?;
        self.pos += n;
        Some(s)
    }

    fn array<const N: usize>(&mut self) -> Option<[u8; N]> {
        self.take(N).map(|s| s.try_into().expect("length checked"))
    }

    fn u16(&mut self) -> Option<u16> {
        self.array().map(u16::from_le_bytes)
    }

    fn u32(&mut self) -> Option<u32> {
        self.array().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Option<u64> {
        self.array().map(u64::from_le_bytes)
    }

    fn f32(&mut self) -> Option<f32> {
        self.array().map(f32::from_le_bytes)
    }
}

pub fn read_header(bytes: &[u8]) -> Result<StreamHeader, StreamError> {
    let mut cur = Cursor { data: bytes, pos: 0 };
    read_header_from(&mut cur)
}

fn read_header_from(cur: &mut Cursor<'_>) -> Result<StreamHeader, StreamError> {
    let magic = cur.take(4);
    match magic {
        Some(m) if m == MAGIC => {}
        Some(_) => return Err(StreamError::BadMagic),
        None if cur.data.len() < 4 && !MAGIC.starts_with(cur.data) => return Err(StreamError::BadMagic),
        None => return Err(StreamError::TruncatedHeader),
    }
    let version = cur.array::<1>().ok_or(StreamError::TruncatedHeader)?[0];
    if version != VERSION {
        return Err(StreamError::UnsupportedVersion(version));
    }
    let mut field = || -> Option<StreamHeader> {
        Some(StreamHeader {
            width: cur.u16()?,
            height: cur.u16()?,
            block_size: cur.u16()?,
            high_sr: cur.f32()?,
            target_sr: cur.f32()?,
            frame_count: cur.u32()?,
            seed: cur.u64()?,
        })
    };
    let header = field().ok_or(StreamError::TruncatedHeader)?;
    header
        .grid()
        .map_err(|e| StreamError::InvalidHeader(e.to_string()))?;
    if !(header.high_sr > 0.0 && header.high_sr <= 1.0) {
        return Err(StreamError::InvalidHeader(format!("high_sr {}", header.high_sr)));
    }
    if !(header.target_sr > 0.0 && header.target_sr < 1.0) {
        return Err(StreamError::InvalidHeader(format!("target_sr {}", header.target_sr)));
    }
    Ok(header)
}

/// One frame record as laid out in the stream, payload still encoded.
struct RawFrame<'a> {
    index: u32,
    threshold_used: f32,
    sr_m: f32,
    bitmap: &'a [u8],
    blocks: usize,
    moving: usize,
    rows: usize,
    payload: &'a [u8],
}

impl RawFrame<'_> {
    fn flags(&self) -> Vec<bool> {
        (0..self.blocks).map(|i| self.bitmap[i / 8] >> (i % 8) & 1 == 1).collect()
    }

    fn decode(&self) -> MeasurementSet {
        let map = BlockMap::from_flags(self.flags());
        let mut blocks_in = self.payload.chunks_exact(4 * self.rows.max(1));
        let per_block = map
            .flags()
            .iter()
            .map(|&f| match (f, self.rows) {
                (true, 1..) => blocks_in
                    .next()
                    .expect("payload length checked")
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
                    .collect(),
                _ => Vec::new(),
            })
            .collect();
        MeasurementSet {
            frame_index: self.index,
            per_block,
            block_map: map,
            sr_m: self.sr_m,
            threshold_used: self.threshold_used,
        }
    }
}

/// Validates the whole stream, handing each frame record to `visit`.
fn walk<'a>(bytes: &'a [u8], mut visit: impl FnMut(RawFrame<'a>)) -> Result<StreamHeader, StreamError> {
    let mut cur = Cursor { data: bytes, pos: 0 };
    let header = read_header_from(&mut cur)?;
    let blocks = header.grid().expect("validated").block_count();
    let mut key_rows = 0;
    for index in 0..header.frame_count {
        let truncated = StreamError::TruncatedFrame(index);
        let corrupt = |reason: String| StreamError::CorruptFrame { index, reason };
        let stored_index = cur.u32().ok_or(truncated.clone())?;
        if stored_index != index {
            return Err(corrupt(format!("stored index {stored_index}")));
        }
        let threshold_used = cur.f32().ok_or(truncated.clone())?;
        let sr_m = cur.f32().ok_or(truncated.clone())?;
        let bitmap = cur.take(bitmap_len(blocks)).ok_or(truncated.clone())?;
        let moving = cur.u32().ok_or(truncated.clone())? as usize;

        let set_bits = bitmap.iter().map(|b| b.count_ones() as usize).sum::<usize>();
        let in_range = (0..blocks).filter(|&i| bitmap[i / 8] >> (i % 8) & 1 == 1).count();
        if set_bits != in_range {
            return Err(corrupt("bitmap padding bits set".into()));
        }
        if moving != in_range {
            return Err(corrupt(format!("moving count {moving} disagrees with bitmap ({in_range})")));
        }
        let rows = header
            .rows_for(sr_m)
            .ok_or_else(|| corrupt(format!("invalid sr_m {sr_m}")))?;
        if index == 0 {
            if moving != blocks {
                return Err(corrupt("key frame must carry every block".into()));
            }
            if rows == 0 {
                return Err(corrupt("key frame has zero rows".into()));
            }
            key_rows = rows;
        } else if rows > key_rows {
            return Err(corrupt(format!("{rows} rows exceed key frame's {key_rows}")));
        }
        let payload = cur.take(moving * rows * 4).ok_or(truncated)?;
        visit(RawFrame {
            index,
            threshold_used,
            sr_m,
            bitmap,
            blocks,
            moving,
            rows,
            payload,
        });
    }
    let rest = bytes.len() - cur.pos;
    if rest != 0 {
        return Err(StreamError::TrailingBytes(rest));
    }
    Ok(header)
}

/// Exact inverse of [`write_stream`].
pub fn read_stream(bytes: &[u8]) -> Result<(StreamHeader, Vec<MeasurementSet>), StreamError> {
    let mut frames = Vec::new();
    let header = walk(bytes, |raw| frames.push(raw.decode()))?;
    Ok((header, frames))
}

/// Validates a stream and returns its header and audited average rate
/// without decoding the payload. Equal to [`audited_sr`] on the parsed frames.
pub fn audit_stream(bytes: &[u8]) -> Result<(StreamHeader, f64), StreamError> {
    let mut scalars = 0usize;
    let header = walk(bytes, |raw| scalars += raw.moving * raw.rows)?;
    let grid = header.grid().expect("validated");
    let sr = if header.frame_count == 0 {
        0.0
    } else {
        scalars as f64 / (header.frame_count as usize * grid.block_count() * grid.block_pixels()) as f64
    };
    Ok((header, sr))
}

/// Average sampling rate audited from a stream: measurement scalars over
/// `n · l · B²`.
pub fn audited_sr(header: &StreamHeader, frames: &[MeasurementSet]) -> f64 {
    let grid = match header.grid() {
        Ok(g) => g,
        Err(_) => return 0.0,
    };
    if frames.is_empty() {
        return 0.0;
    }
    let scalars: usize = frames.iter().map(MeasurementSet::scalar_count).sum();
    scalars as f64 / (frames.len() * grid.block_count() * grid.block_pixels()) as f64
}
