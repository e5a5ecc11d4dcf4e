use bacs::control::quantize_rows;
use bacs::metrics::{psnr, ssim};
use bacs::pipeline::{encode_frames, frames_from_images, trace_csv};
use bacs::recon::{Solver, SolverParams};
use bacs::synth::{synthetic_sequence, test_image, SyntheticClip, SyntheticSpec};
use bacs::{CodecConfig, Error, Frame, Result, SamplingOperator};
use wasm_bindgen::prelude::*;

pub const IMAGE_SIZE: usize = 128;
const CLIP_SIZE: usize = 128;

pub fn original_image() -> Vec<u8> {
    test_image(IMAGE_SIZE).data
}

/// A recovered still picture and how close it came.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pixels: Vec<u8>,
    psnr: f64,
    ssim: f64,
    rows: usize,
}

#[wasm_bindgen]
impl Reconstruction {
    #[wasm_bindgen(getter)]
    pub fn pixels(&self) -> Vec<u8> {
        self.pixels.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn psnr(&self) -> f64 {
        self.psnr
    }

    #[wasm_bindgen(getter)]
    pub fn ssim(&self) -> f64 {
        self.ssim
    }

    /// Measurements taken per block.
    #[wasm_bindgen(getter)]
    pub fn rows(&self) -> usize {
        self.rows
    }
}

pub fn reconstruct_image(rate: f64, block_size: usize, iterations: usize) -> Result<Reconstruction> {
    let cfg = CodecConfig {
        block_size,
        high_sr: rate,
        iterations,
        ..CodecConfig::default()
    };
    if !(rate > 0.0 && rate <= 1.0) || iterations == 0 {
        return Err(Error::Input(format!("rate {rate} / iterations {iterations} out of range")));
    }
    let img = test_image(IMAGE_SIZE);
    let frame = Frame::from_u8(img.width, img.height, &img.data, block_size)?;
    let rows = quantize_rows(rate, block_size).max(1);
    let op = SamplingOperator::build(block_size, rows, cfg.seed)?;
    let y: Vec<Vec<f32>> = op
        .measure_blocks(&frame.blocks())?
        .into_iter()
        .map(|v| v.into_iter().map(|x| x as f32).collect())
        .collect();
    let out = Solver::new(&op, frame.grid(), SolverParams::from_config(&cfg))?.reconstruct(&y)?;
    Ok(Reconstruction {
        pixels: out.to_u8(),
        psnr: psnr(&frame, &out)?,
        ssim: ssim(&frame, &out)?,
        rows,
    })
}

fn clip(frames: usize) -> SyntheticClip {
    synthetic_sequence(&SyntheticSpec {
        width: CLIP_SIZE,
        height: CLIP_SIZE,
        frames,
        ..SyntheticSpec::default()
    })
}

pub fn controller_trace(
    frames: usize,
    target_sr: f64,
    threshold_init: f64,
    block_storage: bool,
    dynamic_threshold: bool,
) -> Result<String> {
    let cfg = CodecConfig {
        target_sr,
        threshold_init,
        block_storage,
        dynamic_threshold,
        ..CodecConfig::default()
    };
    cfg.validate()?;
    let originals = frames_from_images(&clip(frames).frames, cfg.block_size)?;
    Ok(trace_csv(&encode_frames(&originals, &cfg)?.trace))
}

/// One clip frame with the blocks the encoder flagged as moving.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct MotionFrame {
    pixels: Vec<u8>,
    moving: Vec<u8>,
    blocks_x: usize,
    block_size: usize,
}

#[wasm_bindgen]
impl MotionFrame {
    #[wasm_bindgen(getter)]
    pub fn pixels(&self) -> Vec<u8> {
        self.pixels.clone()
    }

    /// One byte per block, raster order, 1 = moving.
    #[wasm_bindgen(getter)]
    pub fn moving(&self) -> Vec<u8> {
        self.moving.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn blocks_x(&self) -> usize {
        self.blocks_x
    }

    #[wasm_bindgen(getter)]
    pub fn block_size(&self) -> usize {
        self.block_size
    }

    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        CLIP_SIZE
    }
}

pub fn motion_frame(frames: usize, index: usize, target_sr: f64) -> Result<MotionFrame> {
    if index >= frames {
        return Err(Error::Input(format!("frame {index} outside a {frames}-frame clip")));
    }
    let cfg = CodecConfig {
        target_sr,
        ..CodecConfig::default()
    };
    cfg.validate()?;
    let clip = clip(frames);
    let originals = frames_from_images(&clip.frames, cfg.block_size)?;
    let encoded = encode_frames(&originals, &cfg)?;
    Ok(MotionFrame {
        pixels: clip.frames[index].data.clone(),
        moving: encoded.sets[index].block_map.flags().iter().map(|&f| u8::from(f)).collect(),
        blocks_x: originals[0].grid().blocks_x(),
        block_size: cfg.block_size,
    })
}
