//! Moving-block detection in the measurement domain.
//!
//! A block's score is the mean absolute difference between the
//! low-frequency prefixes of its measurements in consecutive frames,
//! divided by `B` so that a DC change reads as a change of block mean.

use thiserror::Error;

use crate::measurement::BlockMap;
use crate::sensing::cut_prefix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("previous frame has {prev} blocks, current has {curr}")]
    BlockCount { prev: usize, curr: usize },
    #[error("block {block}: prefix lengths differ ({prev} vs {curr})")]
    PrefixLength { block: usize, prev: usize, curr: usize },
    #[error("block {0} has an empty prefix")]
    Empty(usize),
}

/// Cut measurements of two consecutive frames plus the threshold to apply.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionInput {
    pub prev_cut: Vec<Vec<f64>>,
    pub curr_cut: Vec<Vec<f64>>,
    pub threshold: f64,
}

impl DetectionInput {
    /// Cuts full-rate measurements of both frames to their low-frequency prefix.
    pub fn from_full(prev: &[Vec<f64>], curr: &[Vec<f64>], cut_fraction: f64, threshold: f64) -> Self {
        let cut = |set: &[Vec<f64>]| {
            set.iter()
                .map(|y| cut_prefix(y, cut_fraction).map(<[f64]>::to_vec).unwrap_or_default())
                .collect()
        };
        Self {
            prev_cut: cut(prev),
            curr_cut: cut(curr),
            threshold,
        }
    }

    pub fn run(&self, block_size: usize) -> Result<(Vec<f64>, BlockMap), DetectError> {
        let scores = block_scores(&self.prev_cut, &self.curr_cut, block_size)?;
        let map = classify(&scores, self.threshold);
        Ok((scores, map))
    }
}

/// `score_b = (1/k) Σ_j |curr_b[j] − prev_b[j]| / B`.
pub fn block_scores(prev_cut: &[Vec<f64>], curr_cut: &[Vec<f64>], block_size: usize) -> Result<Vec<f64>, DetectError> {
    if prev_cut.len() != curr_cut.len() {
        return Err(DetectError::BlockCount {
            prev: prev_cut.len(),
            curr: curr_cut.len(),
        });
    }
    let scale = block_size as f64;
    prev_cut
        .iter()
        .zip(curr_cut)
        .enumerate()
        .map(|(block, (p, c))| {
            if p.len() != c.len() {
                return Err(DetectError::PrefixLength {
                    block,
                    prev: p.len(),
                    curr: c.len(),
                });
            }
            if p.is_empty() {
                return Err(DetectError::Empty(block));
            }
            let sum: f64 = p.iter().zip(c).map(|(a, b)| (b - a).abs()).sum();
            Ok(sum / (p.len() as f64 * scale))
        })
        .collect()
}

/// Strict comparison: a score equal to the threshold is not moving.
pub fn classify(scores: &[f64], threshold: f64) -> BlockMap {
    BlockMap::from_flags(scores.iter().map(|&s| s > threshold).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vecs(blocks: usize, k: usize, f: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
        (0..blocks).map(|b| (0..k).map(|j| f(b, j)).collect()).collect()
    }

    #[test]
    fn identical_frames_score_zero() {
        let p = vecs(6, 51, |b, j| (b * 31 + j) as f64);
        assert!(block_scores(&p, &p, 32).unwrap().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn dc_perturbation() {
        let p = vecs(4, 51, |b, j| (b + j) as f64);
        let mut c = p.clone();
        c[2][0] += 8.0;
        let s = block_scores(&p, &c, 32).unwrap();
        assert_eq!(s[2], 8.0 / (51.0 * 32.0));
        assert_eq!(s.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn symmetric() {
        let p = vecs(5, 9, |b, j| ((b * 7 + j * 3) % 11) as f64);
        let c = vecs(5, 9, |b, j| ((b * 5 + j * 2) % 13) as f64);
        assert_eq!(block_scores(&p, &c, 16).unwrap(), block_scores(&c, &p, 16).unwrap());
    }

    #[test]
    fn mismatches_rejected() {
        let p = vecs(2, 4, |_, _| 0.0);
        assert!(matches!(block_scores(&p, &p[..1], 8), Err(DetectError::BlockCount { .. })));
        let mut c = p.clone();
        c[1].pop();
        assert!(matches!(block_scores(&p, &c, 8), Err(DetectError::PrefixLength { block: 1, .. })));
    }

    #[test]
    fn classify_edges() {
        assert_eq!(classify(&[0.0; 5], 0.04).moving_count(), 0);
        let m = classify(&[0.0, 1e-12, 0.04], 0.0);
        assert_eq!(m.flags(), &[false, true, true]);
        // ties are not moving
        assert_eq!(classify(&[0.04], 0.04).moving_count(), 0);
    }

    #[test]
    fn detection_ignores_entries_past_the_cut() {
        let prev = vecs(3, 40, |b, j| (b * 40 + j) as f64);
        let mut curr = prev.clone();
        curr[1][0] += 100.0;
        let k = crate::sensing::cut_length(40, 0.25);
        let base = DetectionInput::from_full(&prev, &curr, 0.25, 0.01).run(8).unwrap();
        for blk in curr.iter_mut() {
            for v in blk[k..].iter_mut() {
                *v += 1e6;
            }
        }
        let perturbed = DetectionInput::from_full(&prev, &curr, 0.25, 0.01).run(8).unwrap();
        assert_eq!(base, perturbed);
        assert_eq!(base.1.flags(), &[false, true, false]);
    }

    proptest! {
        #[test]
        fn raising_threshold_never_adds_moving_blocks(
            scores in proptest::collection::vec(0.0f64..1.0, 1..80),
            t1 in 0.0f64..1.0,
            dt in 0.0f64..1.0,
        ) {
            prop_assert!(classify(&scores, t1 + dt).moving_count() <= classify(&scores, t1).moving_count());
        }
    }
}
