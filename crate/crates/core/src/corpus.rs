//! Deterministic procedural test imagery.
//!
//! No photographs ship with the crate, so tests and benchmarks draw from a
//! seeded generator that mimics natural-image statistics: a smooth colour
//! gradient, multi-octave 1/f value noise, soft-edged occluding shapes and
//! sensor-like grain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::imagecore::{quantize, ImageBuffer};

struct ValueNoise {
    cell: f64,
    cols: usize,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new(width: usize, height: usize, cell: usize, rng: &mut ChaCha8Rng) -> Self {
        let cols = width / cell + 2;
        let rows = height / cell + 2;
        let lattice = (0..cols * rows).map(|_| rng.random_range(-1.0..1.0)).collect();
        Self { cell: cell as f64, cols, lattice }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let (gx, gy) = (x / self.cell, y / self.cell);
        let (ix, iy) = (gx.floor() as usize, gy.floor() as usize);
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let (tx, ty) = (smooth(gx - ix as f64), smooth(gy - iy as f64));
        let v = |cx: usize, cy: usize| self.lattice[cy * self.cols + cx];
        let top = v(ix, iy) * (1.0 - tx) + v(ix + 1, iy) * tx;
        let bottom = v(ix, iy + 1) * (1.0 - tx) + v(ix + 1, iy + 1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

struct Blob {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    cos: f64,
    sin: f64,
    color: [f64; 3],
    opacity: f64,
}

/// A seeded RGB image with natural-image-like structure, values mostly in `[16, 240]`.
pub fn natural_image(width: usize, height: usize, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6e61_7475_7261_6c00);
    let (w, h) = (width as f64, height as f64);

    let c0: [f64; 3] = std::array::from_fn(|_| rng.random_range(50.0..200.0));
    let c1: [f64; 3] = std::array::from_fn(|_| rng.random_range(50.0..200.0));
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (gdx, gdy) = (angle.cos(), angle.sin());

    let octaves: Vec<(ValueNoise, f64)> = [128usize, 64, 32, 16, 8, 4]
        .iter()
        .map(|&cell| {
            let amp = 34.0 * (cell as f64 / 128.0).powf(0.7);
            (ValueNoise::new(width, height, cell, &mut rng), amp)
        })
        .collect();
    let tint: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.7..1.3));
    let chroma_noise = ValueNoise::new(width, height, 48, &mut rng);
    let chroma_dir: [f64; 3] = std::array::from_fn(|_| rng.random_range(-12.0..12.0));

    let blobs: Vec<Blob> = (0..rng.random_range(5..12))
        .map(|_| {
            let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
            Blob {
                cx: rng.random_range(0.0..w),
                cy: rng.random_range(0.0..h),
                rx: rng.random_range(0.05..0.3) * w,
                ry: rng.random_range(0.05..0.3) * h,
                cos: theta.cos(),
                sin: theta.sin(),
                color: std::array::from_fn(|_| rng.random_range(40.0..215.0)),
                opacity: rng.random_range(0.35..0.8),
            }
        })
        .collect();

    let grain = Normal::new(0.0, 2.0).expect("valid sigma");
    let mut data = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64, y as f64);
            let t = (((fx / w - 0.5) * gdx + (fy / h - 0.5) * gdy) + 0.75).clamp(0.0, 1.5) / 1.5;
            let mut px: [f64; 3] = std::array::from_fn(|c| c0[c] * (1.0 - t) + c1[c] * t);

            let lum: f64 = octaves.iter().map(|(n, a)| a * n.at(fx, fy)).sum();
            let chroma = chroma_noise.at(fx, fy);
            for c in 0..3 {
                px[c] += lum * tint[c] + chroma * chroma_dir[c];
            }

            for b in &blobs {
                let (dx, dy) = (fx - b.cx, fy - b.cy);
                let u = (dx * b.cos + dy * b.sin) / b.rx;
                let v = (-dx * b.sin + dy * b.cos) / b.ry;
                let r = (u * u + v * v).sqrt();
                // soft edge a few pixels wide
                let edge = 3.0 / b.rx.min(b.ry);
                let cover = ((1.0 - r) / edge + 0.5).clamp(0.0, 1.0) * b.opacity;
                if cover > 0.0 {
                    let shade = 1.0 + 0.25 * (0.5 - r);
                    for (v, col) in px.iter_mut().zip(b.color) {
                        *v = *v * (1.0 - cover) + col * shade * cover;
                    }
                }
            }

            for v in px {
                let noisy = v + grain.sample(&mut rng);
                data.push(quantize(noisy.clamp(16.0, 240.0)));
            }
        }
    }
    ImageBuffer::new(width, height, 3, data).expect("consistent dimensions")
}

/// Grayscale variant (BT.601 luma of [`natural_image`]).
pub fn natural_gray(width: usize, height: usize, seed: u64) -> ImageBuffer {
    natural_image(width, height, seed).luma().to_gray().expect("consistent dimensions")
}

/// `count` images with seeds `seed, seed + 1, ...`, generated in parallel.
pub fn natural_corpus(count: usize, width: usize, height: usize, seed: u64) -> Vec<ImageBuffer> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| natural_image(width, height, seed.wrapping_add(i)))
        .collect()
}
