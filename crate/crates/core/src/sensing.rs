//! Seeded block sampling operator with nested (prefix-ordered) rows.

use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::config::CodecConfig;
use crate::measurement::MeasurementSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensingError {
    #[error("operator needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("row count {requested} outside 1..={available}")]
    RowCount { requested: usize, available: usize },
    #[error("block has {actual} samples, operator expects {expected}")]
    BlockLength { expected: usize, actual: usize },
    #[error("block {0} has no measurements to cut")]
    EmptyMeasurement(usize),
}

/// Number of entries kept by the low-frequency cut: `max(1, floor(ρ·M))`.
pub fn cut_length(rows: usize, cut_fraction: f64) -> usize {
    ((cut_fraction * rows as f64).floor() as usize).clamp(1, rows.max(1))
}

/// Orthonormal `M_h x B²` sampling matrix. Row 0 is the constant DC row;
/// the operator at any lower rate is a prefix of these rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingOperator {
    seed: u64,
    block_size: usize,
    rows: Array2<f64>,
}

impl SamplingOperator {
    pub fn from_config(cfg: &CodecConfig) -> Result<Self, SensingError> {
        Self::build(cfg.block_size, cfg.high_rows(), cfg.seed)
    }

    /// Gaussian rows 1..M_h drawn from a ChaCha stream seeded by `seed`,
    /// orthonormalized in order against the fixed DC row. Modified
    /// Gram-Schmidt is run twice per row, which keeps `ΦΦᵀ` at identity to
    /// machine precision.
    pub fn build(block_size: usize, rows: usize, seed: u64) -> Result<Self, SensingError> {
        if rows < 2 {
            return Err(SensingError::TooFewRows(rows));
        }
        let n = block_size * block_size;
        if rows > n {
            return Err(SensingError::RowCount { requested: rows, available: n });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mat = Array2::<f64>::zeros((rows, n));
        mat.row_mut(0).fill(1.0 / block_size as f64);
        let mut v = vec![0.0f64; n];
        let mut j = 1;
        while j < rows {
            for x in v.iter_mut() {
                *x = StandardNormal.sample(&mut rng);
            }
            for _pass in 0..2 {
                for i in 0..j {
                    let row = mat.row(i);
                    let row = row.as_slice().expect("standard layout");
                    let proj: f64 = row.iter().zip(&v).map(|(a, b)| a * b).sum();
                    for (x, r) in v.iter_mut().zip(row) {
                        *x -= proj * r;
                    }
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            // a draw nearly inside the span of earlier rows is discarded
            if norm < 1e-8 {
                continue;
            }
            for (dst, x) in mat.row_mut(j).iter_mut().zip(&v) {
                *dst = x / norm;
            }
            j += 1;
        }
        Ok(Self { seed, block_size, rows: mat })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn block_pixels(&self) -> usize {
        self.block_size * self.block_size
    }

    /// `M_h`.
    pub fn max_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn rows(&self) -> ArrayView2<'_, f64> {
        self.rows.view()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let start = i * self.block_pixels();
        &self.rows.as_slice().expect("standard layout")[start..start + self.block_pixels()]
    }

    fn check(&self, block_len: usize, rows: usize) -> Result<(), SensingError> {
        if block_len != self.block_pixels() {
            return Err(SensingError::BlockLength {
                expected: self.block_pixels(),
                actual: block_len,
            });
        }
        if rows == 0 || rows > self.max_rows() {
            return Err(SensingError::RowCount {
                requested: rows,
                available: self.max_rows(),
            });
        }
        Ok(())
    }

    /// `y = Φ_M x` using the first `rows` rows.
    pub fn measure_block(&self, block: &[f64], rows: usize) -> Result<Vec<f64>, SensingError> {
        self.check(block.len(), rows)?;
        Ok((0..rows)
            .map(|i| self.row(i).iter().zip(block).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `Φ_Mᵀ y` for a measurement vector of length `M`.
    pub fn adjoint(&self, measurement: &[f64]) -> Result<Vec<f64>, SensingError> {
        self.check(self.block_pixels(), measurement.len())?;
        let mut out = vec![0.0; self.block_pixels()];
        for (i, &y) in measurement.iter().enumerate() {
            for (o, r) in out.iter_mut().zip(self.row(i)) {
                *o += y * r;
            }
        }
        Ok(out)
    }

    /// Measures every block at the full rate `M_h` in one matrix product.
    pub fn measure_blocks(&self, blocks: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, SensingError> {
        let n = self.block_pixels();
        let mut x = Array2::<f64>::zeros((n, blocks.len()));
        for (c, block) in blocks.iter().enumerate() {
            self.check(block.len(), self.max_rows())?;
            for (r, &v) in block.iter().enumerate() {
                x[[r, c]] = v;
            }
        }
        let y = self.rows.dot(&x);
        Ok(y.columns().into_iter().map(|c| c.to_vec()).collect())
    }

    /// Largest entry of `|ΦΦᵀ − I|`.
    pub fn orthonormality_residual(&self) -> f64 {
        let g = self.rows.dot(&self.rows.t());
        g.indexed_iter()
            .map(|((i, j), &v)| (v - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }
}

/// Low-frequency prefix of one measurement vector.
pub fn cut_prefix<T>(measurement: &[T], cut_fraction: f64) -> Option<&[T]> {
    if measurement.is_empty() {
        return None;
    }
    Some(&measurement[..cut_length(measurement.len(), cut_fraction)])
}

/// The first `max(1, floor(ρ·M_b))` entries of each block's measurements.
pub fn cut_measurements(set: &MeasurementSet, cut_fraction: f64) -> Result<Vec<Vec<f32>>, SensingError> {
    set.per_block
        .iter()
        .enumerate()
        .map(|(b, y)| {
            cut_prefix(y, cut_fraction)
                .map(<[f32]>::to_vec)
                .ok_or(SensingError::EmptyMeasurement(b))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::BlockMap;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_block(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(0.0..255.0)).collect()
    }

    #[test]
    fn default_operator_shape() {
        let op = SamplingOperator::from_config(&CodecConfig::default()).unwrap();
        assert_eq!(op.max_rows(), 204);
        assert_eq!(op.rows().ncols(), 1024);
        assert!(op.row(0).iter().all(|&v| v == 1.0 / 32.0));
        assert!(op.orthonormality_residual() <= 1e-6);
    }

    #[test]
    fn constant_block_hits_dc_only() {
        let op = SamplingOperator::build(32, 204, 7).unwrap();
        let y = op.measure_block(&vec![100.0; 1024], 204).unwrap();
        assert!((y[0] - 100.0 * 32.0).abs() < 1e-9);
        assert!(y[1..].iter().all(|v| v.abs() < 1e-5));
    }

    #[test]
    fn same_seed_same_rows() {
        let a = SamplingOperator::build(16, 60, 42).unwrap();
        let b = SamplingOperator::build(16, 60, 42).unwrap();
        assert_eq!(a, b);
        let c = SamplingOperator::build(16, 60, 43).unwrap();
        assert_ne!(a.rows(), c.rows());
    }

    #[test]
    fn lower_rate_operator_is_a_prefix() {
        let big = SamplingOperator::build(16, 100, 9).unwrap();
        let small = SamplingOperator::build(16, 37, 9).unwrap();
        for i in 0..37 {
            assert_eq!(big.row(i), small.row(i));
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert_eq!(SamplingOperator::build(8, 1, 0), Err(SensingError::TooFewRows(1)));
        let op = SamplingOperator::build(8, 10, 0).unwrap();
        assert!(matches!(op.measure_block(&[0.0; 64], 0), Err(SensingError::RowCount { .. })));
        assert!(matches!(op.measure_block(&[0.0; 64], 11), Err(SensingError::RowCount { .. })));
        assert!(matches!(op.measure_block(&[0.0; 63], 5), Err(SensingError::BlockLength { .. })));
    }

    #[test]
    fn zero_block_measures_zero() {
        let op = SamplingOperator::build(8, 20, 1).unwrap();
        assert!(op.measure_block(&[0.0; 64], 20).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_dense_matvec_oracle() {
        for seed in 0..5u64 {
            let op = SamplingOperator::build(8, 32, seed).unwrap();
            // independent dense product over an explicit copy of the matrix
            let dense: Vec<Vec<f64>> = op.rows().outer_iter().map(|r| r.to_vec()).collect();
            let x = random_block(64, seed + 100);
            let mut expect = vec![0.0; 32];
            for i in 0..32 {
                for j in 0..64 {
                    expect[i] += dense[i][j] * x[j];
                }
            }
            assert_eq!(op.measure_block(&x, 32).unwrap(), expect);
        }
    }

    #[test]
    fn batched_measurement_agrees() {
        let op = SamplingOperator::build(8, 24, 3).unwrap();
        let blocks: Vec<Vec<f64>> = (0..5).map(|s| random_block(64, s)).collect();
        let batched = op.measure_blocks(&blocks).unwrap();
        for (b, y) in blocks.iter().zip(&batched) {
            let single = op.measure_block(b, 24).unwrap();
            for (p, q) in single.iter().zip(y) {
                assert!((p - q).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn adjoint_is_transpose() {
        let op = SamplingOperator::build(8, 16, 5).unwrap();
        let x = random_block(64, 1);
        let y: Vec<f64> = random_block(16, 2);
        let lhs: f64 = op.measure_block(&x, 16).unwrap().iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = op.adjoint(&y).unwrap().iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0));
    }

    #[test]
    fn cut_lengths() {
        assert_eq!(cut_length(204, 0.25), 51);
        assert_eq!(cut_length(3, 0.25), 1);
        assert_eq!(cut_length(1, 1.0), 1);
        let v: Vec<f32> = (0..204).map(|i| i as f32).collect();
        let first = cut_prefix(&v, 0.25).unwrap();
        let second = cut_prefix(first, 0.25).unwrap();
        assert_eq!(second, &first[..second.len()]);
        assert!(cut_prefix::<f32>(&[], 0.5).is_none());
    }

    #[test]
    fn cut_of_set_rejects_empty_block() {
        let set = MeasurementSet {
            frame_index: 1,
            per_block: vec![vec![1.0; 8], vec![]],
            block_map: BlockMap::from_flags(vec![true, false]),
            sr_m: 0.125,
            threshold_used: 0.04,
        };
        assert_eq!(cut_measurements(&set, 0.25), Err(SensingError::EmptyMeasurement(1)));
        let set = MeasurementSet {
            per_block: vec![vec![1.0; 8], vec![2.0; 8]],
            ..set
        };
        assert_eq!(cut_measurements(&set, 0.25).unwrap(), vec![vec![1.0; 2], vec![2.0; 2]]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let op = SamplingOperator::build(8, 30, seed % 7).unwrap();
            let u = random_block(64, seed);
            let v = random_block(64, seed + 1);
            let mix: Vec<f64> = u.iter().zip(&v).map(|(p, q)| a * p + b * q).collect();
            let lhs = op.measure_block(&mix, 30).unwrap();
            let yu = op.measure_block(&u, 30).unwrap();
            let yv = op.measure_block(&v, 30).unwrap();
            let rhs: Vec<f64> = yu.iter().zip(&yv).map(|(p, q)| a * p + b * q).collect();
            let num: f64 = lhs.iter().zip(&rhs).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            let den: f64 = rhs.iter().map(|q| q * q).sum::<f64>().sqrt().max(1e-12);
            prop_assert!(num / den <= 1e-5);
        }

        #[test]
        fn nested_prefix_and_energy(seed in 0u64..1000, m1 in 1usize..40, extra in 0usize..24) {
            let op = SamplingOperator::build(8, 64, 11).unwrap();
            let x = random_block(64, seed);
            let m2 = (m1 + extra).min(64);
            let y1 = op.measure_block(&x, m1).unwrap();
            let y2 = op.measure_block(&x, m2).unwrap();
            prop_assert_eq!(&y1[..], &y2[..m1]);
            let ey: f64 = y2.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ex: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(ey <= ex * (1.0 + 1e-5));
        }
    }
}
