//! Browser demo bindings.
//!
//! The logic lives in [`demo`] as plain Rust so it can be tested natively;
//! the `#[wasm_bindgen]` exports below only convert errors.

use wasm_bindgen::prelude::*;

pub mod demo;

pub use demo::{MotionFrame, Reconstruction};

fn js_err(e: bacs::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Side length of the demo still picture.
#[wasm_bindgen]
pub fn image_size() -> usize {
    demo::IMAGE_SIZE
}

/// Gray bytes of the demo still picture.
#[wasm_bindgen]
pub fn original_image() -> Vec<u8> {
    demo::original_image()
}

/// Senses the still picture at `rate` and recovers it.
#[wasm_bindgen]
pub fn reconstruct_image(rate: f64, block_size: usize, iterations: usize) -> Result<Reconstruction, JsError> {
    demo::reconstruct_image(rate, block_size, iterations).map_err(js_err)
}

/// Controller trace CSV for the synthetic clip.
#[wasm_bindgen]
pub fn controller_trace(
    frames: usize,
    target_sr: f64,
    threshold_init: f64,
    block_storage: bool,
    dynamic_threshold: bool,
) -> Result<String, JsError> {
    demo::controller_trace(frames, target_sr, threshold_init, block_storage, dynamic_threshold).map_err(js_err)
}

/// Synthetic frame `index` with the encoder's moving-block map.
#[wasm_bindgen]
pub fn motion_frame(frames: usize, index: usize, target_sr: f64) -> Result<MotionFrame, JsError> {
    demo::motion_frame(frames, index, target_sr).map_err(js_err)
}
