//! End-to-end encode, decode, metrics and rate sweeps.

use std::fmt::Write as _;

use crate::bitstream::{audited_sr, read_stream, sr_for_rows, write_stream, StreamHeader};
use crate::config::CodecConfig;
use crate::control::{quantize_rows, ControllerState};
use crate::detect::DetectionInput;
use crate::error::{Error, Result};
use crate::frame::{BlockGrid, Frame};
use crate::measurement::{BlockMap, MeasurementSet};
use crate::metrics::{psnr, ssim};
use crate::recon::{ReferenceBuffer, SolverParams, Solver};
use crate::sensing::SamplingOperator;
use crate::video_io::GrayImage;

/// One per-frame line of the controller trace / run report.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub frame: usize,
    pub moving: usize,
    pub storage: f64,
    pub threshold: f64,
    /// Frame sampling rate actually transmitted.
    pub sr: f64,
    /// Rate applied to each moving block.
    pub sr_m: f64,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
}

pub const TRACE_HEADER: &str = "frame,m,storage,threshold,sr,psnr,ssim";

fn fmt_metric(v: Option<f64>, digits: usize) -> String {
    match v {
        None => String::new(),
        Some(x) if x.is_infinite() => "inf".into(),
        Some(x) => format!("{x:.digits$}"),
    }
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.8},{},{}",
            r.frame,
            r.moving,
            r.storage,
            r.threshold,
            r.sr,
            fmt_metric(r.psnr, 4),
            fmt_metric(r.ssim, 6)
        );
    }
    out
}

/// Converts 8-bit images to padded frames, checking that all share one size.
pub fn frames_from_images(images: &[GrayImage], block_size: usize) -> Result<Vec<Frame>> {
    let Some(first) = images.first() else {
        return Ok(Vec::new());
    };
    images
        .iter()
        .enumerate()
        .map(|(i, img)| {
            if (img.width, img.height) != (first.width, first.height) {
                return Err(Error::Input(format!(
                    "frame {i} is {}x{}, expected {}x{}",
                    img.width, img.height, first.width, first.height
                )));
            }
            Ok(Frame::from_u8(img.width, img.height, &img.data, block_size)?)
        })
        .collect()
}

/// Stateful sensing side: measures, detects, budgets and emits one
/// [`MeasurementSet`] per frame.
#[derive(Debug, Clone)]
pub struct Encoder {
    cfg: CodecConfig,
    grid: BlockGrid,
    op: SamplingOperator,
    controller: ControllerState,
    prev: Option<Vec<Vec<f64>>>,
    next_index: usize,
}

impl Encoder {
    pub fn new(cfg: &CodecConfig, grid: BlockGrid, frames: usize) -> Result<Self> {
        cfg.validate()?;
        if grid.block_size != cfg.block_size {
            return Err(Error::Input("grid block size differs from config".into()));
        }
        let controller = ControllerState::new(cfg, grid.block_count(), frames)?;
        Ok(Self {
            cfg: cfg.clone(),
            grid,
            op: SamplingOperator::from_config(cfg)?,
            controller,
            prev: None,
            next_index: 0,
        })
    }

    pub fn operator(&self) -> &SamplingOperator {
        &self.op
    }

    pub fn controller(&self) -> &ControllerState {
        &self.controller
    }

    fn quantize(values: &[f64]) -> Vec<f32> {
        values.iter().map(|&v| v as f32).collect()
    }

    pub fn push(&mut self, frame: &Frame) -> Result<(MeasurementSet, TraceRow)> {
        if frame.grid() != self.grid {
            return Err(Error::Input(format!(
                "frame {} geometry {:?} differs from {:?}",
                self.next_index,
                frame.grid(),
                self.grid
            )));
        }
        if self.next_index >= self.controller.frames {
            return Err(Error::Input("more frames than the budget was sized for".into()));
        }
        let full = self.op.measure_blocks(&frame.blocks())?;
        let l = self.grid.block_count();
        let n_pix = self.grid.block_pixels();
        let index = self.next_index;
        let (set, row) = match self.prev.take() {
            None => {
                let rows = self.op.max_rows();
                let set = MeasurementSet {
                    frame_index: 0,
                    per_block: full.iter().map(|y| Self::quantize(y)).collect(),
                    block_map: BlockMap::all(l),
                    sr_m: sr_for_rows(rows, self.cfg.block_size),
                    threshold_used: self.controller.threshold as f32,
                };
                let row = TraceRow {
                    frame: 0,
                    moving: l,
                    storage: self.controller.storage,
                    threshold: self.controller.threshold,
                    sr: set.frame_sr(n_pix),
                    sr_m: rows as f64 / n_pix as f64,
                    psnr: None,
                    ssim: None,
                };
                (set, row)
            }
            Some(prev) => {
                let threshold = self.controller.threshold;
                let detection = DetectionInput::from_full(&prev, &full, self.cfg.cut_fraction, threshold);
                let (_, map) = detection.run(self.cfg.block_size)?;
                let (step, next) = self.controller.step(map.moving_count());
                self.controller = next;
                let rows = quantize_rows(step.sr_m, self.cfg.block_size).min(self.op.max_rows());
                let per_block = full
                    .iter()
                    .zip(map.flags())
                    .map(|(y, &moving)| if moving { Self::quantize(&y[..rows]) } else { Vec::new() })
                    .collect();
                let set = MeasurementSet {
                    frame_index: index as u32,
                    per_block,
                    block_map: map,
                    sr_m: sr_for_rows(rows, self.cfg.block_size),
                    threshold_used: threshold as f32,
                };
                let row = TraceRow {
                    frame: index,
                    moving: step.moving,
                    storage: step.storage,
                    threshold,
                    sr: set.frame_sr(n_pix),
                    sr_m: rows as f64 / n_pix as f64,
                    psnr: None,
                    ssim: None,
                };
                (set, row)
            }
        };
        self.prev = Some(full);
        self.next_index += 1;
        Ok((set, row))
    }
}

#[derive(Debug, Clone)]
pub struct EncodeOutput {
    pub header: StreamHeader,
    pub sets: Vec<MeasurementSet>,
    pub trace: Vec<TraceRow>,
}

impl EncodeOutput {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        Ok(write_stream(&self.header, &self.sets)?)
    }
}

pub fn stream_header(cfg: &CodecConfig, width: usize, height: usize, frames: usize) -> Result<StreamHeader> {
    let dim = |v: usize, what: &str| {
        u16::try_from(v).map_err(|_| Error::Input(format!("{what} {v} exceeds the stream limit")))
    };
    Ok(StreamHeader {
        width: dim(width, "width")?,
        height: dim(height, "height")?,
        block_size: dim(cfg.block_size, "block size")?,
        high_sr: cfg.high_sr as f32,
        target_sr: cfg.target_sr as f32,
        frame_count: u32::try_from(frames).map_err(|_| Error::Input("too many frames".into()))?,
        seed: cfg.seed,
    })
}

/// Encodes a whole sequence. The budget is sized for `frames.len()` frames.
pub fn encode_frames(frames: &[Frame], cfg: &CodecConfig) -> Result<EncodeOutput> {
    cfg.validate()?;
    let Some(first) = frames.first() else {
        return Err(crate::control::ControlError::TooFewFrames(0).into());
    };
    let mut enc = Encoder::new(cfg, first.grid(), frames.len())?;
    let header = stream_header(cfg, first.width(), first.height(), frames.len())?;
    let mut sets = Vec::with_capacity(frames.len());
    let mut trace = Vec::with_capacity(frames.len());
    for f in frames {
        let (set, row) = enc.push(f)?;
        sets.push(set);
        trace.push(row);
    }
    Ok(EncodeOutput { header, sets, trace })
}

pub fn encode(images: &[GrayImage], cfg: &CodecConfig) -> Result<EncodeOutput> {
    encode_frames(&frames_from_images(images, cfg.block_size)?, cfg)
}

/// Reconstructs every frame of a stream in order. Solver settings come
/// from `cfg`; everything else from the stream itself.
pub fn decode_sets(header: &StreamHeader, sets: &[MeasurementSet], cfg: &CodecConfig) -> Result<Vec<Frame>> {
    let grid = header.grid()?;
    let Some(key) = sets.first() else {
        return Ok(Vec::new());
    };
    let op = SamplingOperator::build(grid.block_size, key.rows_per_block(), header.seed)?;
    let solver = Solver::new(&op, grid, SolverParams::from_config(cfg))?;
    let mut reference = ReferenceBuffer::new(grid.block_count());
    let mut out: Vec<Frame> = Vec::with_capacity(sets.len());
    for set in sets {
        let changed = reference.apply(set)?;
        let frame = match out.last() {
            // identical y′ gives an identical reconstruction
            Some(prev) if !changed => prev.clone(),
            _ => solver.reconstruct(reference.measurements())?,
        };
        out.push(frame);
    }
    Ok(out)
}

pub fn decode(bytes: &[u8], cfg: &CodecConfig) -> Result<(StreamHeader, Vec<Frame>)> {
    let (header, sets) = read_stream(bytes)?;
    let frames = decode_sets(&header, &sets, cfg)?;
    Ok((header, frames))
}

/// Per-frame PSNR and SSIM of `decoded` against `original`.
pub fn metrics(original: &[Frame], decoded: &[Frame]) -> Result<Vec<(f64, f64)>> {
    if original.len() != decoded.len() {
        return Err(Error::Input(format!(
            "{} original frames vs {} decoded",
            original.len(),
            decoded.len()
        )));
    }
    original
        .iter()
        .zip(decoded)
        .map(|(a, b)| Ok((psnr(a, b)?, ssim(a, b)?)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub rows: Vec<TraceRow>,
    /// Audited from the serialized stream.
    pub average_sr: f64,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub stream_bytes: usize,
}

impl RunReport {
    pub fn to_csv(&self) -> String {
        trace_csv(&self.rows)
    }
}

/// Encode, serialize, parse back, decode and score.
pub fn run_frames(frames: &[Frame], cfg: &CodecConfig) -> Result<(RunReport, Vec<Frame>)> {
    let encoded = encode_frames(frames, cfg)?;
    let bytes = encoded.to_bytes()?;
    let (header, sets) = read_stream(&bytes)?;
    let average_sr = audited_sr(&header, &sets);
    let decoded = decode_sets(&header, &sets, cfg)?;
    let scores = metrics(frames, &decoded)?;
    let mut rows = encoded.trace;
    for (row, (p, s)) in rows.iter_mut().zip(&scores) {
        row.psnr = Some(*p);
        row.ssim = Some(*s);
    }
    let n = scores.len().max(1) as f64;
    let report = RunReport {
        rows,
        average_sr,
        mean_psnr: scores.iter().map(|s| s.0).sum::<f64>() / n,
        mean_ssim: scores.iter().map(|s| s.1).sum::<f64>() / n,
        stream_bytes: bytes.len(),
    };
    Ok((report, decoded))
}

pub fn run(images: &[GrayImage], cfg: &CodecConfig) -> Result<(RunReport, Vec<Frame>)> {
    run_frames(&frames_from_images(images, cfg.block_size)?, cfg)
}

/// How a sweep picks the key-frame rate for each target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPlan {
    /// `SR_h = max(floor, factor · SR_t)`, capped at 1.
    pub high_sr_floor: f64,
    pub high_sr_factor: f64,
    /// Also decode and score each point (otherwise only rates are reported).
    pub with_quality: bool,
}

impl Default for SweepPlan {
    fn default() -> Self {
        Self {
            high_sr_floor: 0.2,
            high_sr_factor: 2.0,
            with_quality: true,
        }
    }
}

impl SweepPlan {
    pub fn high_sr_for(&self, target: f64) -> f64 {
        self.high_sr_floor.max(self.high_sr_factor * target).min(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub target_sr: f64,
    pub high_sr: f64,
    pub achieved_sr: f64,
    pub mean_psnr: Option<f64>,
    pub mean_ssim: Option<f64>,
}

pub const SWEEP_HEADER: &str = "target_sr,high_sr,achieved_sr,psnr,ssim";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.8},{},{}",
            r.target_sr,
            r.high_sr,
            r.achieved_sr,
            fmt_metric(r.mean_psnr, 4),
            fmt_metric(r.mean_ssim, 6)
        );
    }
    out
}

/// Re-runs the codec at each target rate; rows come back sorted by target.
pub fn sweep(frames: &[Frame], cfg: &CodecConfig, targets: &[f64], plan: &SweepPlan) -> Result<Vec<SweepRow>> {
    let mut targets = targets.to_vec();
    targets.sort_by(f64::total_cmp);
    targets
        .into_iter()
        .map(|target| {
            let mut point = cfg.clone();
            point.target_sr = target;
            point.high_sr = plan.high_sr_for(target);
            if plan.with_quality {
                let (report, _) = run_frames(frames, &point)?;
                Ok(SweepRow {
                    target_sr: target,
                    high_sr: point.high_sr,
                    achieved_sr: report.average_sr,
                    mean_psnr: Some(report.mean_psnr),
                    mean_ssim: Some(report.mean_ssim),
                })
            } else {
                let encoded = encode_frames(frames, &point)?;
                let (header, sets) = read_stream(&encoded.to_bytes()?)?;
                Ok(SweepRow {
                    target_sr: target,
                    high_sr: point.high_sr,
                    achieved_sr: audited_sr(&header, &sets),
                    mean_psnr: None,
                    mean_ssim: None,
                })
            }
        })
        .collect()
}
