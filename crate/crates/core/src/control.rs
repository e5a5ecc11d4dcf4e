//! Sampling-rate control: block storage budget and dynamic threshold.
//!
//! The storage `b` is a bank of full-rate blocks. It starts at `b_ini`,
//! gains `b_add` before each inter frame and is drained by that frame's
//! moving blocks. When the frame wants more than the bank holds, every
//! moving block is down-rated to `SR_h · b / m` and the bank empties.
//! `b_ini` and `b_add` are chosen so that draining the whole bank over the
//! sequence lands exactly on the target average rate.

use thiserror::Error;

use crate::config::CodecConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("rate control needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("budget infeasible: n * target_sr = {total} does not exceed high_sr = {high}")]
    Infeasible { total: f64, high: f64 },
    #[error("initial storage {b_ini} exceeds the whole inter-frame budget (b_add = {b_add})")]
    InitialStorageTooLarge { b_ini: f64, b_add: f64 },
}

/// `(b_ini, b_add)` for a sequence of `n` frames with `l` blocks each.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetConstants {
    pub b_ini: f64,
    pub b_add: f64,
}

impl BudgetConstants {
    pub fn new(
        blocks: usize,
        frames: usize,
        target_sr: f64,
        high_sr: f64,
        initial_storage_fraction: f64,
    ) -> Result<Self, ControlError> {
        if frames < 2 {
            return Err(ControlError::TooFewFrames(frames));
        }
        let n = frames as f64;
        let l = blocks as f64;
        let total = n * target_sr;
        if total <= high_sr {
            return Err(ControlError::Infeasible { total, high: high_sr });
        }
        let b_ini = initial_storage_fraction * l;
        let b_add = (l * (total - high_sr) - b_ini * high_sr) / (high_sr * (n - 1.0));
        if b_add < 0.0 {
            return Err(ControlError::InitialStorageTooLarge { b_ini, b_add });
        }
        Ok(Self { b_ini, b_add })
    }

    pub fn from_config(cfg: &CodecConfig, blocks: usize, frames: usize) -> Result<Self, ControlError> {
        Self::new(blocks, frames, cfg.target_sr, cfg.high_sr, cfg.initial_storage_fraction)
    }

    /// Total block budget over the inter frames, `b_ini + b_add (n − 1)`.
    pub fn total_blocks(&self, frames: usize) -> f64 {
        self.b_ini + self.b_add * (frames as f64 - 1.0)
    }
}

/// `M_m = floor(SR_m · B²)`.
pub fn quantize_rows(sr_m: f64, block_size: usize) -> usize {
    (sr_m * (block_size * block_size) as f64).floor().max(0.0) as usize
}

/// Multiplicative threshold update driven by storage pressure `p = m / (b + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdLaw {
    pub gamma: f64,
    pub min: f64,
    pub max: f64,
}

impl ThresholdLaw {
    pub fn from_config(cfg: &CodecConfig) -> Self {
        Self {
            gamma: cfg.threshold_gamma,
            min: cfg.threshold_min,
            max: cfg.threshold_max,
        }
    }

    pub fn pressure(moving: usize, storage_after: f64) -> f64 {
        moving as f64 / (storage_after + 1.0)
    }

    /// `θ' = clamp(θ (1 + γ (p − 1)), θ_min, θ_max)`.
    pub fn update(&self, threshold: f64, moving: usize, storage_after: f64) -> f64 {
        let p = Self::pressure(moving, storage_after);
        (threshold * (1.0 + self.gamma * (p - 1.0))).clamp(self.min, self.max)
    }
}

/// Controller state between frames. Cheap to copy; every transition
/// returns a new value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub storage: f64,
    pub budget: BudgetConstants,
    pub threshold: f64,
    /// Index of the next inter frame to allocate (starts at 1).
    pub frame: usize,
    pub blocks: usize,
    pub frames: usize,
    pub high_sr: f64,
    pub target_sr: f64,
    pub law: ThresholdLaw,
    pub block_storage: bool,
    pub dynamic_threshold: bool,
}

/// Outcome of one inter frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlStep {
    pub frame: usize,
    pub moving: usize,
    /// Storage after this frame's consumption.
    pub storage: f64,
    /// Threshold that was used to classify this frame.
    pub threshold: f64,
    pub sr_m: f64,
    /// Threshold for the next frame.
    pub next_threshold: f64,
}

impl ControllerState {
    pub fn new(cfg: &CodecConfig, blocks: usize, frames: usize) -> Result<Self, ControlError> {
        let budget = BudgetConstants::from_config(cfg, blocks, frames)?;
        Ok(Self {
            storage: budget.b_ini,
            budget,
            threshold: cfg.threshold_init,
            frame: 1,
            blocks,
            frames,
            high_sr: cfg.high_sr,
            target_sr: cfg.target_sr,
            law: ThresholdLaw::from_config(cfg),
            block_storage: cfg.block_storage,
            dynamic_threshold: cfg.dynamic_threshold,
        })
    }

    /// Refills the bank by `b_add`, then serves `moving` blocks from it.
    /// Without block storage every moving block is served at `SR_h` and the
    /// bank is left untouched.
    pub fn allocate(&self, moving: usize) -> (f64, Self) {
        let mut next = *self;
        next.frame += 1;
        if !self.block_storage {
            return (self.high_sr, next);
        }
        let b = self.storage + self.budget.b_add;
        let m = moving as f64;
        let sr_m = if m <= b {
            next.storage = b - m;
            self.high_sr
        } else {
            next.storage = 0.0;
            self.high_sr * b / m
        };
        (sr_m, next)
    }

    /// Threshold for the next frame given this frame's load and the storage
    /// left after serving it.
    pub fn update_threshold(&self, moving: usize, storage_after: f64) -> f64 {
        if self.dynamic_threshold {
            self.law.update(self.threshold, moving, storage_after)
        } else {
            self.threshold
        }
    }

    /// `allocate` followed by `update_threshold`.
    pub fn step(&self, moving: usize) -> (ControlStep, Self) {
        let (sr_m, mut next) = self.allocate(moving);
        let next_threshold = self.update_threshold(moving, next.storage);
        next.threshold = next_threshold;
        let step = ControlStep {
            frame: self.frame,
            moving,
            storage: next.storage,
            threshold: self.threshold,
            sr_m,
            next_threshold,
        };
        (step, next)
    }
}
