//! PSNR and SSIM on the unpadded region of two frames.

use thiserror::Error;

use crate::frame::Frame;

const PEAK: f64 = 255.0;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const C1: f64 = (K1 * PEAK) * (K1 * PEAK);
const C2: f64 = (K2 * PEAK) * (K2 * PEAK);
const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("frame sizes differ: {0}x{1} vs {2}x{3}")]
    SizeMismatch(usize, usize, usize, usize),
    #[error("frame {0}x{1} is smaller than the {WINDOW}x{WINDOW} SSIM window")]
    TooSmall(usize, usize),
}

fn check(a: &Frame, b: &Frame) -> Result<(), MetricsError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricsError::SizeMismatch(a.width(), a.height(), b.width(), b.height()));
    }
    Ok(())
}

pub fn mse(reference: &Frame, test: &Frame) -> Result<f64, MetricsError> {
    check(reference, test)?;
    let a = reference.crop();
    let b = test.crop();
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// `10 log10(255² / MSE)`; `+inf` for identical frames.
pub fn psnr(reference: &Frame, test: &Frame) -> Result<f64, MetricsError> {
    let e = mse(reference, test)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (PEAK * PEAK / e).log10())
}

fn gaussian_kernel() -> [f64; WINDOW] {
    let mut k = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-(d * d) / (2.0 * SIGMA * SIGMA)).exp();
    }
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable Gaussian filter over all fully-contained 11x11 windows.
fn filter_valid(img: &[f64], w: usize, h: usize, k: &[f64; WINDOW]) -> Vec<f64> {
    let ow = w - WINDOW + 1;
    let oh = h - WINDOW + 1;
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &img[y * w..][..w];
        for x in 0..ow {
            horiz[y * ow + x] = row[x..x + WINDOW].iter().zip(k).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..WINDOW).map(|j| horiz[(y + j) * ow + x] * k[j]).sum();
        }
    }
    out
}

/// Mean SSIM over 11x11 Gaussian windows (σ = 1.5, K1 = 0.01, K2 = 0.03, L = 255).
pub fn ssim(reference: &Frame, test: &Frame) -> Result<f64, MetricsError> {
    check(reference, test)?;
    let (w, h) = (reference.width(), reference.height());
    if w < WINDOW || h < WINDOW {
        return Err(MetricsError::TooSmall(w, h));
    }
    let a = reference.crop();
    let b = test.crop();
    if a == b {
        return Ok(1.0);
    }
    let k = gaussian_kernel();
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    let mu_a = filter_valid(&a, w, h, &k);
    let mu_b = filter_valid(&b, w, h, &k);
    let s_aa = filter_valid(&aa, w, h, &k);
    let s_bb = filter_valid(&bb, w, h, &k);
    let s_ab = filter_valid(&ab, w, h, &k);
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = s_aa[i] - ma * ma;
            let vb = s_bb[i] - mb * mb;
            let cov = s_ab[i] - ma * mb;
            ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2))
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textured(w: usize, h: usize, seed: usize) -> Frame {
        let px: Vec<f64> = (0..w * h)
            .map(|i| (((i * 7919 + seed * 104_729) % 997) as f64 / 997.0 * 200.0 + 20.0).floor())
            .collect();
        Frame::pad(w, h, &px, 8).unwrap()
    }

    #[test]
    fn identical_frames() {
        let f = textured(40, 30, 1);
        assert_eq!(psnr(&f, &f).unwrap(), f64::INFINITY);
        assert_eq!(ssim(&f, &f).unwrap(), 1.0);
    }

    #[test]
    fn unit_offset_psnr() {
        let f = Frame::pad(20, 20, &vec![100.0; 400], 8).unwrap();
        let g = Frame::pad(20, 20, &vec![101.0; 400], 8).unwrap();
        let p = psnr(&f, &g).unwrap();
        assert!((p - 20.0 * 255f64.log10()).abs() < 1e-12);
        assert!((p - 48.13).abs() < 0.005);
    }

    #[test]
    fn ssim_symmetric_and_bounded() {
        let a = textured(40, 33, 1);
        let b = textured(40, 33, 2);
        let ab = ssim(&a, &b).unwrap();
        assert_eq!(ab, ssim(&b, &a).unwrap());
        assert!((-1.0..=1.0).contains(&ab));
        assert!(ab < 0.9);
    }

    #[test]
    fn ssim_matches_direct_window_sum() {
        // brute force over every window without separability
        let a = textured(13, 12, 3);
        let b = textured(13, 12, 4);
        let k = gaussian_kernel();
        let (pa, pb) = (a.crop(), b.crop());
        let mut total = 0.0;
        let mut count = 0.0;
        for y0 in 0..=12 - WINDOW {
            for x0 in 0..=13 - WINDOW {
                let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for j in 0..WINDOW {
                    for i in 0..WINDOW {
                        let wgt = k[i] * k[j];
                        let x = pa[(y0 + j) * 13 + x0 + i];
                        let z = pb[(y0 + j) * 13 + x0 + i];
                        ma += wgt * x;
                        mb += wgt * z;
                        saa += wgt * x * x;
                        sbb += wgt * z * z;
                        sab += wgt * x * z;
                    }
                }
                let va = saa - ma * ma;
                let vb = sbb - mb * mb;
                let cv = sab - ma * mb;
                total += ((2.0 * ma * mb + C1) * (2.0 * cv + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
                count += 1.0;
            }
        }
        assert!((ssim(&a, &b).unwrap() - total / count).abs() < 1e-9);
    }

    #[test]
    fn size_errors() {
        let a = textured(16, 16, 1);
        let b = textured(16, 17, 1);
        assert!(matches!(psnr(&a, &b), Err(MetricsError::SizeMismatch(..))));
        let tiny = textured(8, 8, 1);
        assert!(matches!(ssim(&tiny, &tiny), Err(MetricsError::TooSmall(8, 8))));
    }
}
