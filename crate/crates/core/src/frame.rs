//! Luma frames and block geometry.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("frame has zero size ({width}x{height})")]
    Empty { width: usize, height: usize },
    #[error("expected {expected} samples, got {actual}")]
    SampleCount { expected: usize, actual: usize },
    #[error("sample {index} = {value} is outside [0, 255]")]
    SampleRange { index: usize, value: f64 },
    #[error("block size must be positive")]
    BlockSize,
    #[error("block index {index} out of range (frame has {count} blocks)")]
    BlockIndex { index: usize, count: usize },
    #[error("frame geometry mismatch: {0}")]
    Geometry(String),
}

/// Smallest multiple of `block` that is `>= len`.
pub fn padded_len(len: usize, block: usize) -> usize {
    len.div_ceil(block) * block
}

/// Geometry shared by every frame of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockGrid {
    pub width: usize,
    pub height: usize,
    pub block_size: usize,
}

impl BlockGrid {
    pub fn new(width: usize, height: usize, block_size: usize) -> Result<Self, FrameError> {
        if width == 0 || height == 0 {
            return Err(FrameError::Empty { width, height });
        }
        if block_size == 0 {
            return Err(FrameError::BlockSize);
        }
        Ok(Self { width, height, block_size })
    }

    pub fn padded_width(&self) -> usize {
        padded_len(self.width, self.block_size)
    }

    pub fn padded_height(&self) -> usize {
        padded_len(self.height, self.block_size)
    }

    pub fn blocks_x(&self) -> usize {
        self.padded_width() / self.block_size
    }

    pub fn blocks_y(&self) -> usize {
        self.padded_height() / self.block_size
    }

    /// Number of blocks `l`.
    pub fn block_count(&self) -> usize {
        self.blocks_x() * self.blocks_y()
    }

    pub fn block_pixels(&self) -> usize {
        self.block_size * self.block_size
    }

    /// Top-left pixel of block `idx` in the padded frame.
    pub fn block_origin(&self, idx: usize) -> (usize, usize) {
        let bx = idx % self.blocks_x();
        let by = idx / self.blocks_x();
        (bx * self.block_size, by * self.block_size)
    }
}

/// A grayscale frame padded to whole blocks.
///
/// `pixels` holds the padded image, row-major, `padded_width` samples per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    grid: BlockGrid,
    pixels: Vec<f64>,
}

impl Frame {
    /// Pads a raw `width x height` image to block multiples by replicating
    /// the last row and column.
    pub fn pad(width: usize, height: usize, raw: &[f64], block_size: usize) -> Result<Self, FrameError> {
        let grid = BlockGrid::new(width, height, block_size)?;
        if raw.len() != width * height {
            return Err(FrameError::SampleCount {
                expected: width * height,
                actual: raw.len(),
            });
        }
        if let Some((index, &value)) = raw
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=255.0).contains(*v))
        {
            return Err(FrameError::SampleRange { index, value });
        }
        let pw = grid.padded_width();
        let ph = grid.padded_height();
        let mut pixels = Vec::with_capacity(pw * ph);
        for y in 0..ph {
            let src = &raw[y.min(height - 1) * width..][..width];
            pixels.extend_from_slice(src);
            let edge = src[width - 1];
            pixels.extend(std::iter::repeat_n(edge, pw - width));
        }
        Ok(Self { grid, pixels })
    }

    pub fn from_u8(width: usize, height: usize, raw: &[u8], block_size: usize) -> Result<Self, FrameError> {
        let samples: Vec<f64> = raw.iter().map(|&v| f64::from(v)).collect();
        Self::pad(width, height, &samples, block_size)
    }

    /// Builds a frame directly from padded pixels (no range check; used by
    /// the reconstruction path, which clamps on its own).
    pub fn from_padded(grid: BlockGrid, pixels: Vec<f64>) -> Result<Self, FrameError> {
        let expected = grid.padded_width() * grid.padded_height();
        if pixels.len() != expected {
            return Err(FrameError::SampleCount {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Self { grid, pixels })
    }

    /// Reassembles a frame from per-block raster vectors.
    pub fn from_blocks(grid: BlockGrid, blocks: &[Vec<f64>]) -> Result<Self, FrameError> {
        if blocks.len() != grid.block_count() {
            return Err(FrameError::Geometry(format!(
                "{} blocks for a grid of {}",
                blocks.len(),
                grid.block_count()
            )));
        }
        let pw = grid.padded_width();
        let b = grid.block_size;
        let mut pixels = vec![0.0; pw * grid.padded_height()];
        for (idx, block) in blocks.iter().enumerate() {
            if block.len() != b * b {
                return Err(FrameError::SampleCount {
                    expected: b * b,
                    actual: block.len(),
                });
            }
            let (x0, y0) = grid.block_origin(idx);
            for (r, row) in block.chunks_exact(b).enumerate() {
                pixels[(y0 + r) * pw + x0..][..b].copy_from_slice(row);
            }
        }
        Ok(Self { grid, pixels })
    }

    pub fn grid(&self) -> BlockGrid {
        self.grid
    }

    pub fn width(&self) -> usize {
        self.grid.width
    }

    pub fn height(&self) -> usize {
        self.grid.height
    }

    pub fn padded_width(&self) -> usize {
        self.grid.padded_width()
    }

    pub fn padded_height(&self) -> usize {
        self.grid.padded_height()
    }

    pub fn block_size(&self) -> usize {
        self.grid.block_size
    }

    pub fn block_count(&self) -> usize {
        self.grid.block_count()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.padded_width() + x]
    }

    /// Raster-order contents of block `idx`; blocks are numbered row-major
    /// over the block grid.
    pub fn block_view(&self, idx: usize) -> Result<Vec<f64>, FrameError> {
        let count = self.block_count();
        if idx >= count {
            return Err(FrameError::BlockIndex { index: idx, count });
        }
        let b = self.block_size();
        let pw = self.padded_width();
        let (x0, y0) = self.grid.block_origin(idx);
        let mut out = Vec::with_capacity(b * b);
        for r in 0..b {
            out.extend_from_slice(&self.pixels[(y0 + r) * pw + x0..][..b]);
        }
        Ok(out)
    }

    pub fn blocks(&self) -> Vec<Vec<f64>> {
        (0..self.block_count())
            .map(|i| self.block_view(i).expect("index in range"))
            .collect()
    }

    /// The original (unpadded) region, row-major.
    pub fn crop(&self) -> Vec<f64> {
        let pw = self.padded_width();
        let mut out = Vec::with_capacity(self.width() * self.height());
        for y in 0..self.height() {
            out.extend_from_slice(&self.pixels[y * pw..][..self.width()]);
        }
        out
    }

    /// Cropped region rounded to 8-bit samples.
    pub fn to_u8(&self) -> Vec<u8> {
        self.crop()
            .into_iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

/// BT.601 luma from interleaved 8-bit RGB.
pub fn rgb_to_luma(rgb: &[u8]) -> Vec<f64> {
    rgb.chunks_exact(3)
        .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(w: usize, h: usize) -> Vec<f64> {
        (0..w * h).map(|i| (i % 251) as f64).collect()
    }

    #[test]
    fn hd_frame_padding() {
        let raw = vec![0.0; 1280 * 720];
        let f = Frame::pad(1280, 720, &raw, 32).unwrap();
        assert_eq!((f.padded_width(), f.padded_height()), (1280, 736));
        assert_eq!(f.block_count(), 920);
    }

    #[test]
    fn aligned_frame_unchanged() {
        let raw = ramp(64, 64);
        let f = Frame::pad(64, 64, &raw, 32).unwrap();
        assert_eq!(f.block_count(), 4);
        assert_eq!(f.pixels(), &raw[..]);
    }

    #[test]
    fn edge_replication() {
        let raw = ramp(33, 33);
        let f = Frame::pad(33, 33, &raw, 32).unwrap();
        assert_eq!((f.padded_width(), f.padded_height()), (64, 64));
        assert_eq!(f.pixel(40, 40), raw[32 * 33 + 32]);
        assert_eq!(f.pixel(10, 50), raw[32 * 33 + 10]);
        assert_eq!(f.pixel(50, 10), raw[10 * 33 + 32]);
    }

    #[test]
    fn zero_size_rejected() {
        assert!(matches!(Frame::pad(0, 10, &[], 32), Err(FrameError::Empty { .. })));
    }

    #[test]
    fn out_of_range_sample_rejected() {
        let mut raw = vec![1.0; 16];
        raw[5] = 256.0;
        assert!(matches!(
            Frame::pad(4, 4, &raw, 8),
            Err(FrameError::SampleRange { index: 5, .. })
        ));
        raw[5] = f64::NAN;
        assert!(Frame::pad(4, 4, &raw, 8).is_err());
    }

    #[test]
    fn constant_block_view() {
        let f = Frame::pad(64, 64, &vec![128.0; 4096], 32).unwrap();
        assert!(f.block_view(2).unwrap().iter().all(|&v| v == 128.0));
    }

    #[test]
    fn block_three_is_bottom_right() {
        let raw = ramp(64, 64);
        let f = Frame::pad(64, 64, &raw, 32).unwrap();
        let b = f.block_view(3).unwrap();
        assert_eq!(b[0], raw[32 * 64 + 32]);
        assert_eq!(b[1023], raw[63 * 64 + 63]);
        assert!(matches!(f.block_view(4), Err(FrameError::BlockIndex { index: 4, count: 4 })));
    }

    #[test]
    fn luma_weights() {
        let y = rgb_to_luma(&[255, 0, 0, 0, 255, 0, 0, 0, 255, 255, 255, 255]);
        assert!((y[0] - 76.245).abs() < 1e-9);
        assert!((y[1] - 149.685).abs() < 1e-9);
        assert!((y[2] - 29.07).abs() < 1e-9);
        assert!((y[3] - 255.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn pad_then_crop_is_identity(w in 1usize..80, h in 1usize..80, b in 1usize..20) {
            let raw = ramp(w, h);
            let f = Frame::pad(w, h, &raw, b).unwrap();
            prop_assert_eq!(f.padded_width() % b, 0);
            prop_assert!(f.padded_width() >= w && f.padded_width() < w + b);
            prop_assert!(f.padded_height() >= h && f.padded_height() < h + b);
            prop_assert_eq!(f.crop(), raw);
        }

        #[test]
        fn block_partition_is_exact(w in 1usize..70, h in 1usize..70, b in 1usize..17) {
            let raw = ramp(w, h);
            let f = Frame::pad(w, h, &raw, b).unwrap();
            let back = Frame::from_blocks(f.grid(), &f.blocks()).unwrap();
            prop_assert_eq!(back.pixels(), f.pixels());
            let total: usize = f.blocks().iter().map(Vec::len).sum();
            prop_assert_eq!(total, f.pixels().len());
        }
    }
}
