//! Per-frame transmitted measurements and block classification.

/// Moving/non-moving flag per block, raster order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockMap {
    flags: Vec<bool>,
    moving: usize,
}

impl BlockMap {
    pub fn from_flags(flags: Vec<bool>) -> Self {
        let moving = flags.iter().filter(|&&f| f).count();
        Self { flags, moving }
    }

    pub fn all(len: usize) -> Self {
        Self::from_flags(vec![true; len])
    }

    pub fn none(len: usize) -> Self {
        Self::from_flags(vec![false; len])
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn is_moving(&self, idx: usize) -> bool {
        self.flags[idx]
    }

    /// Number of moving blocks `m`.
    pub fn moving_count(&self) -> usize {
        self.moving
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }
}

/// What one frame puts on the wire.
///
/// Values are stored as `f32` because that is their transmitted precision;
/// a stream round-trip reproduces this struct bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub frame_index: u32,
    /// One vector per block. Non-moving blocks of inter frames are empty;
    /// moving blocks share one length.
    pub per_block: Vec<Vec<f32>>,
    pub block_map: BlockMap,
    /// Ratio actually applied to moving blocks, `rows / B²`.
    pub sr_m: f32,
    pub threshold_used: f32,
}

impl MeasurementSet {
    pub fn block_count(&self) -> usize {
        self.per_block.len()
    }

    /// Rows carried by each transmitted block (0 when nothing is sent).
    pub fn rows_per_block(&self) -> usize {
        self.per_block.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Measurement scalars carried by this frame.
    pub fn scalar_count(&self) -> usize {
        self.per_block.iter().map(Vec::len).sum()
    }

    /// Frame-level sampling rate: transmitted scalars over frame pixels.
    pub fn frame_sr(&self, block_pixels: usize) -> f64 {
        self.scalar_count() as f64 / (self.block_count() * block_pixels) as f64
    }
}
