//! Seeded synthetic content: a fixed-camera clip with moving textured
//! objects, and a still test picture.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::video_io::GrayImage;

/// Parameters of the built-in surveillance-style clip.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub seed: u64,
    /// Sensor noise standard deviation, in gray levels.
    pub noise_sigma: f64,
    pub objects: usize,
    /// Object edge length as a fraction of the shorter frame side.
    pub object_scale: f64,
    /// Pixels per frame at normal speed.
    pub speed: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            frames: 100,
            seed: 1,
            noise_sigma: 0.8,
            objects: 3,
            object_scale: 0.22,
            speed: 3.0,
        }
    }
}

/// Generated frames plus the ground-truth share of blocks whose clean
/// content changed since the previous frame.
#[derive(Debug, Clone)]
pub struct SyntheticClip {
    pub frames: Vec<GrayImage>,
    pub moving_fraction: Vec<f64>,
}

/// Speed multiplier over the clip: move, pause, then move faster.
pub fn speed_profile(frame: usize, frames: usize) -> f64 {
    let t = frame as f64 / frames.max(1) as f64;
    if t < 0.3 {
        1.0
    } else if t < 0.45 {
        0.0
    } else {
        1.6
    }
}

struct Object {
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    size: f64,
    base: f64,
    amp: f64,
    freq: (f64, f64),
    phase: f64,
}

fn background(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let waves: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.random_range(0.5..4.0),
                rng.random_range(0.5..4.0),
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(6.0..18.0),
            )
        })
        .collect();
    let mut px = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let u = x as f64 / w as f64;
            let v = y as f64 / h as f64;
            let mut val = 70.0 + 60.0 * u + 30.0 * v;
            for &(fx, fy, ph, a) in &waves {
                val += a * (2.0 * PI * (fx * u + fy * v) + ph).sin();
            }
            // fine stationary texture
            val += 6.0 * ((x as f64 * 0.9).sin() * (y as f64 * 1.3).cos());
            px.push(val);
        }
    }
    px
}

fn render(bg: &[f64], w: usize, h: usize, objects: &[Object]) -> Vec<f64> {
    let mut px = bg.to_vec();
    for o in objects {
        let x0 = o.x.round() as isize;
        let y0 = o.y.round() as isize;
        let s = o.size as isize;
        for dy in 0..s {
            for dx in 0..s {
                let (x, y) = (x0 + dx, y0 + dy);
                if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                    continue;
                }
                let (u, v) = (dx as f64, dy as f64);
                let tex = (2.0 * PI * (o.freq.0 * u + o.freq.1 * v) / o.size + o.phase).sin();
                px[y as usize * w + x as usize] = o.base + o.amp * tex;
            }
        }
    }
    px
}

/// Generates the clip described by `spec`.
pub fn synthetic_sequence(spec: &SyntheticSpec) -> SyntheticClip {
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let bg = background(w, h, &mut rng);
    let size = (spec.object_scale * w.min(h) as f64).round().max(2.0);
    let mut objects: Vec<Object> = (0..spec.objects)
        .map(|_| {
            let angle: f64 = rng.random_range(0.0..2.0 * PI);
            Object {
                x: rng.random_range(0.0..(w as f64 - size).max(1.0)),
                y: rng.random_range(0.0..(h as f64 - size).max(1.0)),
                vx: spec.speed * angle.cos(),
                vy: spec.speed * angle.sin(),
                size,
                base: rng.random_range(40.0..210.0),
                amp: rng.random_range(15.0..40.0),
                freq: (rng.random_range(1.0..4.0), rng.random_range(1.0..4.0)),
                phase: rng.random_range(0.0..2.0 * PI),
            }
        })
        .collect();

    let noise = Normal::new(0.0, spec.noise_sigma.max(0.0)).expect("finite sigma");
    let block = 32usize;
    let bx = w.div_ceil(block);
    let by = h.div_ceil(block);
    let mut frames = Vec::with_capacity(spec.frames);
    let mut moving_fraction = Vec::with_capacity(spec.frames);
    let mut prev_clean: Option<Vec<f64>> = None;
    for i in 0..spec.frames {
        if i > 0 {
            let k = speed_profile(i, spec.frames);
            for o in objects.iter_mut() {
                o.x += o.vx * k;
                o.y += o.vy * k;
                let max_x = w as f64 - o.size;
                let max_y = h as f64 - o.size;
                if o.x < 0.0 || o.x > max_x {
                    o.vx = -o.vx;
                    o.x = o.x.clamp(0.0, max_x.max(0.0));
                }
                if o.y < 0.0 || o.y > max_y {
                    o.vy = -o.vy;
                    o.y = o.y.clamp(0.0, max_y.max(0.0));
                }
            }
        }
        let clean = render(&bg, w, h, &objects);
        let fraction = match &prev_clean {
            None => 0.0,
            Some(prev) => {
                let mut changed = vec![false; bx * by];
                for (idx, (a, b)) in clean.iter().zip(prev).enumerate() {
                    if (a - b).abs() > 0.5 {
                        changed[(idx / w / block) * bx + (idx % w) / block] = true;
                    }
                }
                changed.iter().filter(|&&c| c).count() as f64 / changed.len() as f64
            }
        };
        moving_fraction.push(fraction);
        let data = clean
            .iter()
            .map(|&v| (v + noise.sample(&mut rng)).round().clamp(0.0, 255.0) as u8)
            .collect();
        frames.push(GrayImage {
            width: w,
            height: h,
            data,
        });
        prev_clean = Some(clean);
    }
    SyntheticClip {
        frames,
        moving_fraction,
    }
}

fn smoothstep(edge: f64, softness: f64, d: f64) -> f64 {
    let t = ((edge - d) / softness + 0.5).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// A deterministic still picture with smooth shading, soft-edged shapes
/// and a band of periodic texture.
pub fn test_image(size: usize) -> GrayImage {
    let s = size as f64;
    let mut data = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let u = x as f64 / s;
            let v = y as f64 / s;
            // sky-to-ground shading
            let mut val = 150.0 - 70.0 * v + 25.0 * (2.0 * PI * u).sin() * (1.0 - v);
            // large disc
            let d = ((u - 0.32).powi(2) + (v - 0.38).powi(2)).sqrt();
            let shade = 200.0 - 90.0 * d;
            val += (shade - val) * smoothstep(0.2, 0.02, d);
            // ellipse
            let e = (((u - 0.7) / 0.18).powi(2) + ((v - 0.62) / 0.1).powi(2)).sqrt();
            val += (55.0 + 40.0 * u - val) * smoothstep(1.0, 0.1, e);
            // textured band
            if (0.78..0.92).contains(&v) {
                val += 18.0 * (2.0 * PI * 10.0 * u).sin() * (PI * (v - 0.78) / 0.14).sin();
            }
            // small bright square
            let sq = ((u - 0.78).abs()).max((v - 0.2).abs());
            val += (235.0 - val) * smoothstep(0.06, 0.01, sq);
            data.push(val.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage {
        width: size,
        height: size,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let spec = SyntheticSpec {
            width: 64,
            height: 48,
            frames: 6,
            ..Default::default()
        };
        let a = synthetic_sequence(&spec);
        let b = synthetic_sequence(&spec);
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.frames.len(), 6);
        assert_eq!(a.frames[0].data.len(), 64 * 48);
    }

    #[test]
    fn pause_span_is_static() {
        let spec = SyntheticSpec {
            width: 96,
            height: 96,
            frames: 40,
            noise_sigma: 0.0,
            ..Default::default()
        };
        let clip = synthetic_sequence(&spec);
        for i in 1..40 {
            let paused = speed_profile(i, 40) == 0.0;
            assert_eq!(paused, clip.moving_fraction[i] == 0.0, "frame {i}");
            if paused {
                assert_eq!(clip.frames[i], clip.frames[i - 1]);
            }
        }
    }

    #[test]
    fn test_image_uses_the_range() {
        let img = test_image(128);
        let min = *img.data.iter().min().unwrap();
        let max = *img.data.iter().max().unwrap();
        assert!(min < 80 && max > 220);
    }
}
