//! Decoder side: measurement assembly and cooperative frame recovery.
//!
//! Recovery is proximal gradient descent on
//! `½ Σ_b ‖Φ_{M_b} x_b − y′_b‖² + λ ‖DCT(x)‖₁`, where the gradient step
//! works block by block with each block's own row count and the shrinkage
//! step is a single DCT over the whole padded frame. Because the transform
//! straddles block boundaries the blocks are recovered jointly rather than
//! independently.

use ndarray::{s, Array2, ArrayView2, LinalgScalar};
use rustfft::num_traits::Zero;
use thiserror::Error;

use crate::config::CodecConfig;
use crate::dct::{soft_threshold, Dct2d};
use crate::frame::{BlockGrid, Frame, FrameError};
use crate::measurement::MeasurementSet;
use crate::sensing::SamplingOperator;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconError {
    #[error("measurement set has {actual} blocks, reference has {expected}")]
    BlockCount { expected: usize, actual: usize },
    #[error("block {0} has no measurements")]
    EmptyBlock(usize),
    #[error("block {block} has {rows} rows, operator has {max}")]
    TooManyRows { block: usize, rows: usize, max: usize },
    #[error("block {0} carries a non-finite measurement")]
    NonFinite(usize),
    #[error("operator block size {op} does not match frame block size {grid}")]
    BlockSize { op: usize, grid: usize },
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// The decoder's `y′` memory: the most recent transmitted measurements
/// for each block position.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReferenceBuffer {
    blocks: Vec<Vec<f32>>,
}

impl ReferenceBuffer {
    /// An empty buffer for `blocks` positions, to be filled by the key frame.
    pub fn new(blocks: usize) -> Self {
        Self {
            blocks: vec![Vec::new(); blocks],
        }
    }

    pub fn measurements(&self) -> &[Vec<f32>] {
        &self.blocks
    }

    pub fn rows(&self, block: usize) -> usize {
        self.blocks[block].len()
    }

    /// Moving blocks take the frame's vectors, the rest keep the reference.
    /// A moving block that arrived with zero rows keeps its reference too.
    /// The returned buffer is both `y′` for this frame and the reference for
    /// the next one.
    pub fn assemble(&self, set: &MeasurementSet) -> Result<Self, ReconError> {
        let mut next = self.clone();
        next.apply(set)?;
        Ok(next)
    }

    /// In-place [`ReferenceBuffer::assemble`]. Returns whether any block changed.
    pub fn apply(&mut self, set: &MeasurementSet) -> Result<bool, ReconError> {
        if set.per_block.len() != self.blocks.len() || set.block_map.len() != self.blocks.len() {
            return Err(ReconError::BlockCount {
                expected: self.blocks.len(),
                actual: set.per_block.len(),
            });
        }
        let mut changed = false;
        for (idx, (slot, y)) in self.blocks.iter_mut().zip(&set.per_block).enumerate() {
            if set.block_map.is_moving(idx) && !y.is_empty() {
                if slot != y {
                    changed = true;
                }
                slot.clone_from(y);
            }
        }
        Ok(changed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub iterations: usize,
    pub step_size: f64,
    pub lambda_init: f64,
    pub lambda_decay: f64,
}

impl SolverParams {
    pub fn from_config(cfg: &CodecConfig) -> Self {
        Self {
            iterations: cfg.iterations,
            step_size: cfg.step_size,
            lambda_init: cfg.lambda_init,
            lambda_decay: cfg.lambda_decay,
        }
    }
}

impl Default for SolverParams {
    fn default() -> Self {
        Self::from_config(&CodecConfig::default())
    }
}

/// Packed per-block measurements: row `b` holds block `b`'s vector,
/// zero past its row count.
struct Packed<T> {
    y: Array2<T>,
    rows: Vec<usize>,
}

/// Proximal-gradient recovery for one frame geometry.
///
/// The iteration runs in `f32`; [`Solver::residual_norm`] is evaluated in
/// `f64` against the operator's exact rows.
#[derive(Debug, Clone)]
pub struct Solver<'a> {
    op: &'a SamplingOperator,
    phi: Array2<f32>,
    grid: BlockGrid,
    params: SolverParams,
    dct: Dct2d<f32>,
    /// Padded-image index of pixel `r` of block `b`, at `b * B² + r`.
    layout: Vec<usize>,
}

/// Padded image to one row per block.
fn gather<T: Copy + Zero>(layout: &[usize], blocks: usize, image: &[T]) -> Array2<T> {
    let mut x = Array2::<T>::zeros((blocks, layout.len() / blocks));
    for (dst, &src) in x.as_slice_mut().expect("standard layout").iter_mut().zip(layout) {
        *dst = image[src];
    }
    x
}

fn scatter<T: Copy>(layout: &[usize], x: &Array2<T>, image: &mut [T]) {
    for (&v, &dst) in x.as_slice().expect("standard layout").iter().zip(layout) {
        image[dst] = v;
    }
}

/// Masked residual `Φ_{M_b} x_b − y_b`, one row per block.
fn residual<T: LinalgScalar>(phi: ArrayView2<'_, T>, x: &Array2<T>, packed: &Packed<T>) -> Array2<T> {
    let top = packed.y.ncols();
    let mut r = x.dot(&phi.slice(s![..top, ..]).t());
    r.zip_mut_with(&packed.y, |a, &b| *a = *a - b);
    for (mut row, &m) in r.rows_mut().into_iter().zip(&packed.rows) {
        row.slice_mut(s![m..]).fill(T::zero());
    }
    r
}

fn norm<T: Copy + Into<f64>>(r: &Array2<T>) -> f64 {
    r.iter().map(|&v| v.into() * v.into()).sum::<f64>().sqrt()
}

impl<'a> Solver<'a> {
    pub fn new(op: &'a SamplingOperator, grid: BlockGrid, params: SolverParams) -> Result<Self, ReconError> {
        if op.block_size() != grid.block_size {
            return Err(ReconError::BlockSize {
                op: op.block_size(),
                grid: grid.block_size,
            });
        }
        let pw = grid.padded_width();
        let b = grid.block_size;
        let mut layout = Vec::with_capacity(grid.block_count() * b * b);
        for idx in 0..grid.block_count() {
            let (x0, y0) = grid.block_origin(idx);
            for r in 0..b {
                for c in 0..b {
                    layout.push((y0 + r) * pw + x0 + c);
                }
            }
        }
        Ok(Self {
            op,
            phi: op.rows().mapv(|v| v as f32),
            grid,
            params,
            dct: Dct2d::new(pw, grid.padded_height()),
            layout,
        })
    }

    pub fn grid(&self) -> BlockGrid {
        self.grid
    }

    fn pack<T: Copy + Zero + From<f32>>(&self, y: &[Vec<f32>]) -> Result<Packed<T>, ReconError> {
        let l = self.grid.block_count();
        if y.len() != l {
            return Err(ReconError::BlockCount {
                expected: l,
                actual: y.len(),
            });
        }
        let max = self.op.max_rows();
        let mut rows = Vec::with_capacity(l);
        for (b, v) in y.iter().enumerate() {
            if v.is_empty() {
                return Err(ReconError::EmptyBlock(b));
            }
            if v.len() > max {
                return Err(ReconError::TooManyRows {
                    block: b,
                    rows: v.len(),
                    max,
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(ReconError::NonFinite(b));
            }
            rows.push(v.len());
        }
        let top = rows.iter().copied().max().unwrap_or(1);
        let mut packed = Array2::<T>::zeros((l, top));
        for (mut row, v) in packed.rows_mut().into_iter().zip(y) {
            for (dst, &x) in row.iter_mut().zip(v) {
                *dst = T::from(x);
            }
        }
        Ok(Packed { y: packed, rows })
    }

    fn check_image(&self, image: &[f64]) {
        assert_eq!(
            image.len(),
            self.grid.padded_width() * self.grid.padded_height(),
            "image must cover the padded frame"
        );
    }

    /// `Φ_{M_b}ᵀ (Φ_{M_b} x_b − y_b)` for every block, as a padded image.
    /// Computed with the same single-precision kernels as the iteration.
    pub fn fidelity_gradient(&self, image: &[f64], y: &[Vec<f32>]) -> Result<Vec<f64>, ReconError> {
        self.check_image(image);
        let packed = self.pack::<f32>(y)?;
        let image32: Vec<f32> = image.iter().map(|&v| v as f32).collect();
        let x = gather(&self.layout, self.grid.block_count(), &image32);
        let r = residual(self.phi.view(), &x, &packed);
        let g = r.dot(&self.phi.slice(s![..packed.y.ncols(), ..]));
        let mut out = vec![0.0f32; image.len()];
        scatter(&self.layout, &g, &mut out);
        Ok(out.into_iter().map(f64::from).collect())
    }

    /// `‖Φx − y′‖₂` over all blocks, in double precision.
    pub fn residual_norm(&self, image: &[f64], y: &[Vec<f32>]) -> Result<f64, ReconError> {
        self.check_image(image);
        let packed = self.pack::<f64>(y)?;
        let x = gather(&self.layout, self.grid.block_count(), image);
        Ok(norm(&residual(self.op.rows(), &x, &packed)))
    }

    pub fn reconstruct(&self, y: &[Vec<f32>]) -> Result<Frame, ReconError> {
        self.reconstruct_traced(y).map(|(f, _)| f)
    }

    /// Runs the solver and also returns `‖Φx^k − y′‖₂` for `k = 0..=K`
    /// (before the final clamp to `[0, 255]`).
    pub fn reconstruct_traced(&self, y: &[Vec<f32>]) -> Result<(Frame, Vec<f64>), ReconError> {
        let packed = self.pack::<f32>(y)?;
        let phi = self.phi.slice(s![..packed.y.ncols(), ..]);
        let blocks = self.grid.block_count();
        let mut image = vec![0.0f32; self.grid.padded_width() * self.grid.padded_height()];

        // x⁰ = Φᵀ y′
        let mut x = packed.y.dot(&phi);
        let mut lambda = self.params.lambda_init;
        let step = self.params.step_size as f32;
        let mut residuals = Vec::with_capacity(self.params.iterations + 1);
        for _ in 0..self.params.iterations {
            let r = residual(phi, &x, &packed);
            residuals.push(norm(&r));
            x.scaled_add(-step, &r.dot(&phi));

            scatter(&self.layout, &x, &mut image);
            self.dct.forward(&mut image);
            soft_threshold(&mut image, lambda as f32);
            self.dct.inverse(&mut image);
            x = gather(&self.layout, blocks, &image);
            lambda *= self.params.lambda_decay;
        }
        residuals.push(norm(&residual(phi, &x, &packed)));

        scatter(&self.layout, &x, &mut image);
        let pixels = image.iter().map(|&v| f64::from(v).clamp(0.0, 255.0)).collect();
        Ok((Frame::from_padded(self.grid, pixels)?, residuals))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::BlockMap;

    fn set(per_block: Vec<Vec<f32>>, flags: Vec<bool>) -> MeasurementSet {
        MeasurementSet {
            frame_index: 1,
            per_block,
            block_map: BlockMap::from_flags(flags),
            sr_m: 0.0,
            threshold_used: 0.04,
        }
    }

    #[test]
    fn assemble_static_keeps_reference() {
        let reference = ReferenceBuffer {
            blocks: vec![vec![1.0, 2.0], vec![3.0, 4.0]],
        };
        let next = reference
            .assemble(&set(vec![vec![], vec![]], vec![false, false]))
            .unwrap();
        assert_eq!(next, reference);
    }

    #[test]
    fn assemble_full_refresh() {
        let reference = ReferenceBuffer {
            blocks: vec![vec![1.0, 2.0], vec![3.0, 4.0]],
        };
        let fresh = vec![vec![5.0, 6.0], vec![7.0, 8.0]];
        let next = reference.assemble(&set(fresh.clone(), vec![true, true])).unwrap();
        assert_eq!(next.measurements(), &fresh[..]);
    }

    #[test]
    fn assemble_single_moving_block() {
        let reference = ReferenceBuffer {
            blocks: vec![vec![1.0; 4], vec![2.0; 4], vec![3.0; 4]],
        };
        let next = reference
            .assemble(&set(vec![vec![], vec![9.0], vec![]], vec![false, true, false]))
            .unwrap();
        let differing: Vec<usize> = (0..3)
            .filter(|&i| next.measurements()[i] != reference.measurements()[i])
            .collect();
        assert_eq!(differing, vec![1]);
        assert_eq!(next.rows(1), 1);
    }

    #[test]
    fn zero_row_moving_block_keeps_reference() {
        let mut reference = ReferenceBuffer {
            blocks: vec![vec![1.0; 4]],
        };
        let changed = reference.apply(&set(vec![vec![]], vec![true])).unwrap();
        assert!(!changed);
        assert_eq!(reference.rows(0), 4);
    }

    #[test]
    fn assemble_rejects_wrong_size() {
        let reference = ReferenceBuffer::new(3);
        assert!(matches!(
            reference.assemble(&set(vec![vec![]], vec![false])),
            Err(ReconError::BlockCount { .. })
        ));
    }

    #[test]
    fn solver_input_validation() {
        let op = SamplingOperator::build(8, 16, 1).unwrap();
        let grid = BlockGrid::new(16, 8, 8).unwrap();
        let solver = Solver::new(&op, grid, SolverParams::default()).unwrap();
        assert_eq!(
            solver.reconstruct(&[vec![1.0; 4], vec![]]).unwrap_err(),
            ReconError::EmptyBlock(1)
        );
        assert!(matches!(
            solver.reconstruct(&[vec![1.0; 4], vec![1.0; 17]]),
            Err(ReconError::TooManyRows { block: 1, .. })
        ));
        assert_eq!(
            solver.reconstruct(&[vec![1.0; 4], vec![f32::NAN; 4]]).unwrap_err(),
            ReconError::NonFinite(1)
        );
        let wrong = BlockGrid::new(16, 16, 16).unwrap();
        assert!(Solver::new(&op, wrong, SolverParams::default()).is_err());
    }

    #[test]
    fn constant_frame_recovered() {
        let op = SamplingOperator::build(16, 40, 3).unwrap();
        let grid = BlockGrid::new(48, 32, 16).unwrap();
        let solver = Solver::new(&op, grid, SolverParams::default()).unwrap();
        let frame = Frame::pad(48, 32, &vec![93.0; 48 * 32], 16).unwrap();
        let y: Vec<Vec<f32>> = frame
            .blocks()
            .iter()
            .map(|b| op.measure_block(b, 40).unwrap().into_iter().map(|v| v as f32).collect())
            .collect();
        let out = solver.reconstruct(&y).unwrap();
        let err = out.pixels().iter().map(|v| (v - 93.0).abs()).fold(0.0, f64::max);
        assert!(err < 0.5, "max error {err}");
    }
}
