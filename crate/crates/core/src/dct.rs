//! Orthonormal DCT-II / DCT-III in one and two dimensions, computed with a
//! single same-length complex FFT (Makhoul's reordering).

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::num_traits::Float;
use rustfft::{Fft, FftNum, FftPlanner};

/// Sample types the transforms run on (`f32` or `f64`).
pub trait Real: FftNum + Float {}

impl<T: FftNum + Float> Real for T {}

fn real<T: Real>(v: f64) -> T {
    T::from_f64(v).expect("representable constant")
}

#[derive(Clone)]
pub struct Dct1d<T = f64> {
    len: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    /// `s_k · exp(-iπk / 2N)`, applied after the forward FFT.
    post: Vec<Complex<T>>,
    /// `exp(iπk / 2N) / (s_k · N)`, applied before the inverse FFT.
    pre: Vec<Complex<T>>,
}

impl<T> std::fmt::Debug for Dct1d<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dct1d").field("len", &self.len).finish()
    }
}

impl<T: Real> Dct1d<T> {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "DCT length must be positive");
        let mut planner = FftPlanner::new();
        let n = len as f64;
        let scale = |k: usize| if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        let twiddle = |k: usize| Complex::from_polar(1.0, -PI * k as f64 / (2.0 * n));
        let cast = |z: Complex<f64>| Complex::new(real(z.re), real(z.im));
        Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            post: (0..len).map(|k| cast(twiddle(k) * scale(k))).collect(),
            pre: (0..len).map(|k| cast(twiddle(k).conj() / (scale(k) * n))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn split<'b>(&self, buf: &'b mut Vec<Complex<T>>, fft: &dyn Fft<T>) -> (&'b mut [Complex<T>], &'b mut [Complex<T>]) {
        let need = self.len + fft.get_inplace_scratch_len();
        if buf.len() != need {
            buf.clear();
            buf.resize(need, Complex::new(T::zero(), T::zero()));
        }
        buf.split_at_mut(self.len)
    }

    /// In-place orthonormal DCT-II. `buf` is reusable workspace.
    pub fn forward(&self, data: &mut [T], buf: &mut Vec<Complex<T>>) {
        let n = self.len;
        debug_assert_eq!(data.len(), n);
        let (buf, scratch) = self.split(buf, self.forward.as_ref());
        for k in 0..n.div_ceil(2) {
            buf[k] = Complex::new(data[2 * k], T::zero());
        }
        for k in 0..n / 2 {
            buf[n - 1 - k] = Complex::new(data[2 * k + 1], T::zero());
        }
        self.forward.process_with_scratch(buf, scratch);
        for ((d, z), p) in data.iter_mut().zip(buf.iter()).zip(&self.post) {
            *d = z.re * p.re - z.im * p.im;
        }
    }

    /// In-place orthonormal DCT-III (inverse of [`Dct1d::forward`]).
    pub fn inverse(&self, data: &mut [T], buf: &mut Vec<Complex<T>>) {
        let n = self.len;
        debug_assert_eq!(data.len(), n);
        let (buf, scratch) = self.split(buf, self.inverse.as_ref());
        buf[0] = self.pre[0] * data[0];
        for k in 1..n {
            buf[k] = Complex::new(data[k], -data[n - k]) * self.pre[k];
        }
        self.inverse.process_with_scratch(buf, scratch);
        for k in 0..n.div_ceil(2) {
            data[2 * k] = buf[k].re;
        }
        for k in 0..n / 2 {
            data[2 * k + 1] = buf[n - 1 - k].re;
        }
    }

    /// Forward transform of two lines with one complex FFT.
    pub fn forward_pair(&self, a: &mut [T], b: &mut [T], buf: &mut Vec<Complex<T>>) {
        let n = self.len;
        debug_assert!(a.len() == n && b.len() == n);
        let (buf, scratch) = self.split(buf, self.forward.as_ref());
        for k in 0..n.div_ceil(2) {
            buf[k] = Complex::new(a[2 * k], b[2 * k]);
        }
        for k in 0..n / 2 {
            buf[n - 1 - k] = Complex::new(a[2 * k + 1], b[2 * k + 1]);
        }
        self.forward.process_with_scratch(buf, scratch);
        // spectra of the real and imaginary inputs separate by symmetry
        let half: T = real(0.5);
        for k in 0..n {
            let z = buf[k];
            let zc = buf[if k == 0 { 0 } else { n - k }].conj();
            let p = self.post[k];
            a[k] = half * ((z + zc) * p).re;
            b[k] = half * ((z - zc) * p).im;
        }
    }

    /// Inverse transform of two lines with one complex FFT.
    pub fn inverse_pair(&self, a: &mut [T], b: &mut [T], buf: &mut Vec<Complex<T>>) {
        let n = self.len;
        debug_assert!(a.len() == n && b.len() == n);
        let (buf, scratch) = self.split(buf, self.inverse.as_ref());
        buf[0] = self.pre[0] * Complex::new(a[0], b[0]);
        for k in 1..n {
            buf[k] = Complex::new(a[k] + b[n - k], b[k] - a[n - k]) * self.pre[k];
        }
        self.inverse.process_with_scratch(buf, scratch);
        for k in 0..n.div_ceil(2) {
            a[2 * k] = buf[k].re;
            b[2 * k] = buf[k].im;
        }
        for k in 0..n / 2 {
            a[2 * k + 1] = buf[n - 1 - k].re;
            b[2 * k + 1] = buf[n - 1 - k].im;
        }
    }
}

/// Separable 2-D orthonormal DCT over a row-major `width x height` image.
#[derive(Debug, Clone)]
pub struct Dct2d<T = f64> {
    width: usize,
    height: usize,
    rows: Dct1d<T>,
    cols: Dct1d<T>,
}

impl<T: Real> Dct2d<T> {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            rows: Dct1d::new(width),
            cols: Dct1d::new(height),
        }
    }

    pub fn forward(&self, data: &mut [T]) {
        self.apply(data, false);
    }

    pub fn inverse(&self, data: &mut [T]) {
        self.apply(data, true);
    }

    fn apply(&self, data: &mut [T], inverse: bool) {
        let (w, h) = (self.width, self.height);
        assert_eq!(data.len(), w * h);
        let mut buf = Vec::new();
        let pass = |d: &mut [T], t: &Dct1d<T>, buf: &mut Vec<Complex<T>>| {
            let mut pairs = d.chunks_exact_mut(2 * t.len());
            for two in &mut pairs {
                let (a, b) = two.split_at_mut(t.len());
                if inverse {
                    t.inverse_pair(a, b, buf);
                } else {
                    t.forward_pair(a, b, buf);
                }
            }
            let rest = pairs.into_remainder();
            if !rest.is_empty() {
                if inverse {
                    t.inverse(rest, buf);
                } else {
                    t.forward(rest, buf);
                }
            }
        };
        pass(data, &self.rows, &mut buf);
        let mut cols = vec![T::zero(); w * h];
        transpose(data, &mut cols, w, h);
        pass(&mut cols, &self.cols, &mut buf);
        transpose(&cols, data, h, w);
    }
}

/// `src` is `h` rows of `w`; `dst` receives `w` rows of `h`.
fn transpose<T: Copy>(src: &[T], dst: &mut [T], w: usize, h: usize) {
    const TILE: usize = 32;
    for y0 in (0..h).step_by(TILE) {
        for x0 in (0..w).step_by(TILE) {
            for y in y0..(y0 + TILE).min(h) {
                for x in x0..(x0 + TILE).min(w) {
                    dst[x * h + y] = src[y * w + x];
                }
            }
        }
    }
}

/// `sign(x) · max(|x| − λ, 0)`, coefficient-wise.
pub fn soft_threshold<T: Float>(data: &mut [T], lambda: T) {
    for v in data.iter_mut() {
        let mag = v.abs() - lambda;
        *v = if mag > T::zero() { mag.copysign(*v) } else { T::zero() };
    }
}
