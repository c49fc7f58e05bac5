use crate::imagecore::{self, quantize, ImageBuffer, ImageError, SaveFormat};

fn map_samples(img: &ImageBuffer, f: impl Fn(f64) -> f64) -> ImageBuffer {
    let data = img.data().iter().map(|&v| quantize(f(f64::from(v)))).collect();
    ImageBuffer::new(img.width(), img.height(), img.channels(), data).expect("shape preserved")
}

/// Bilinear read at a fractional position, clamping to the border.
fn bilinear(img: &ImageBuffer, x: f64, y: f64, c: usize) -> f64 {
    let (w, h) = (img.width() as f64, img.height() as f64);
    let x = x.clamp(0.0, w - 1.0);
    let y = y.clamp(0.0, h - 1.0);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let x1 = (x0 + 1).min(img.width() - 1);
    let y1 = (y0 + 1).min(img.height() - 1);
    let (tx, ty) = (x - x0 as f64, y - y0 as f64);
    let p = |xx, yy| f64::from(img.sample(xx, yy, c));
    let top = p(x0, y0) * (1.0 - tx) + p(x1, y0) * tx;
    let bottom = p(x0, y1) * (1.0 - tx) + p(x1, y1) * tx;
    top * (1.0 - ty) + bottom * ty
}

/// Resample the window `(x0, y0, win_w, win_h)` of `img` onto a `dst_w x dst_h` grid,
/// aligning pixel centres.
fn resample_window(img: &ImageBuffer, window: (f64, f64, f64, f64), dst_w: usize, dst_h: usize) -> ImageBuffer {
    let (x0, y0, win_w, win_h) = window;
    let (sx, sy) = (win_w / dst_w as f64, win_h / dst_h as f64);
    let ch = img.channels();
    let mut data = Vec::with_capacity(dst_w * dst_h * ch);
    for j in 0..dst_h {
        let fy = y0 + (j as f64 + 0.5) * sy - 0.5;
        for i in 0..dst_w {
            let fx = x0 + (i as f64 + 0.5) * sx - 0.5;
            for c in 0..ch {
                data.push(quantize(bilinear(img, fx, fy, c)));
            }
        }
    }
    ImageBuffer::new(dst_w, dst_h, ch, data).expect("consistent dimensions")
}

fn full_window(img: &ImageBuffer) -> (f64, f64, f64, f64) {
    (0.0, 0.0, img.width() as f64, img.height() as f64)
}

pub(crate) fn jpeg(img: &ImageBuffer, quality: u8) -> Result<ImageBuffer, ImageError> {
    imagecore::decode_image(&imagecore::encode_image(img, SaveFormat::Jpeg(quality))?)
}

fn gaussian_kernel(sigma: f64, size: usize) -> Vec<f64> {
    let r = (size / 2) as f64;
    let mut k: Vec<f64> = (0..size).map(|i| (-(i as f64 - r).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Mirror an out-of-range index back into `0..n` (reflect-101, edge not repeated).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - m }) as usize
}

pub(crate) fn gaussian_blur(img: &ImageBuffer, sigma: f64, size: usize) -> ImageBuffer {
    let kernel = gaussian_kernel(sigma, size);
    let r = (size / 2) as isize;
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let src: Vec<f64> = img.data().iter().map(|&v| f64::from(v)).collect();
    let mut tmp = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                tmp[(y * w + x) * ch + c] = kernel
                    .iter()
                    .enumerate()
                    .map(|(k, kv)| kv * src[(y * w + reflect(x as isize + k as isize - r, w)) * ch + c])
                    .sum();
            }
        }
    }
    let mut data = Vec::with_capacity(src.len());
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let v: f64 = kernel
                    .iter()
                    .enumerate()
                    .map(|(k, kv)| kv * tmp[(reflect(y as isize + k as isize - r, h) * w + x) * ch + c])
                    .sum();
                data.push(quantize(v));
            }
        }
    }
    ImageBuffer::new(w, h, ch, data).expect("shape preserved")
}

pub(crate) fn brightness(img: &ImageBuffer, factor: f64) -> ImageBuffer {
    map_samples(img, |v| v * factor)
}

pub(crate) fn contrast(img: &ImageBuffer, factor: f64) -> ImageBuffer {
    let luma = img.luma();
    let mean = luma.data.iter().sum::<f64>() / luma.data.len() as f64;
    map_samples(img, |v| (v - mean) * factor + mean)
}

pub(crate) fn hue(img: &ImageBuffer, degrees: f64) -> Result<ImageBuffer, ImageError> {
    if !img.is_rgb() {
        return Ok(img.clone());
    }
    let (y, mut u, mut v) = imagecore::rgb_to_yuv(img)?;
    let (s, c) = degrees.to_radians().sin_cos();
    for (pu, pv) in u.data.iter_mut().zip(v.data.iter_mut()) {
        let (a, b) = (*pu - 128.0, *pv - 128.0);
        *pu = 128.0 + a * c - b * s;
        *pv = 128.0 + a * s + b * c;
    }
    imagecore::yuv_to_rgb(&y, &u, &v)
}

pub(crate) fn center_crop(img: &ImageBuffer, keep: f64) -> ImageBuffer {
    let side = keep.sqrt();
    let (w, h) = (img.width() as f64, img.height() as f64);
    let cw = (w * side).round().max(1.0);
    let ch = (h * side).round().max(1.0);
    let x0 = ((w - cw) / 2.0).floor();
    let y0 = ((h - ch) / 2.0).floor();
    resample_window(img, (x0, y0, cw, ch), img.width(), img.height())
}

pub(crate) fn resize_round_trip(img: &ImageBuffer, scale: f64) -> ImageBuffer {
    let dw = ((img.width() as f64 * scale).round() as usize).max(1);
    let dh = ((img.height() as f64 * scale).round() as usize).max(1);
    let small = resample_window(img, full_window(img), dw, dh);
    resample_window(&small, full_window(&small), img.width(), img.height())
}

/// Rotate about the image centre; samples falling outside the frame replicate the border.
pub(crate) fn rotate(img: &ImageBuffer, degrees: f64) -> ImageBuffer {
    let (s, c) = degrees.to_radians().sin_cos();
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let mut data = Vec::with_capacity(w * h * ch);
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            // inverse rotation maps each output pixel back into the source
            let sx = cx + dx * c + dy * s;
            let sy = cy - dx * s + dy * c;
            for k in 0..ch {
                data.push(quantize(bilinear(img, sx, sy, k)));
            }
        }
    }
    ImageBuffer::new(w, h, ch, data).expect("shape preserved")
}

pub(crate) fn meme(img: &ImageBuffer, band: f64) -> ImageBuffer {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let rows = ((h as f64 * band).round() as usize).min(h / 2);
    let mut out = img.clone();
    let data = out.data_mut();
    for y in (0..rows).chain(h - rows..h) {
        data[y * w * ch..(y + 1) * w * ch].fill(255);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::natural_image;

    #[test]
    fn reflect_indices() {
        let got: Vec<usize> = (-3..8).map(|i| reflect(i, 5)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 4, 3, 2, 1]);
        assert_eq!(reflect(-4, 1), 0);
    }

    #[test]
    fn blur_preserves_constant_and_smooths() {
        let flat = ImageBuffer::filled(20, 10, 3, 77).unwrap();
        assert_eq!(gaussian_blur(&flat, 1.5, 7), flat);
        let mut data = vec![0u8; 9 * 9];
        data[4 * 9 + 4] = 255;
        let spike = ImageBuffer::new(9, 9, 1, data).unwrap();
        let out = gaussian_blur(&spike, 1.0, 5);
        assert!(out.sample(4, 4, 0) < 255 && out.sample(5, 4, 0) > 0);
        assert_eq!(out.sample(3, 4, 0), out.sample(5, 4, 0));
    }

    #[test]
    fn identity_parameters_are_identity() {
        let img = natural_image(64, 48, 1);
        assert_eq!(brightness(&img, 1.0), img);
        assert_eq!(contrast(&img, 1.0), img);
        assert_eq!(rotate(&img, 0.0), img);
        assert_eq!(center_crop(&img, 1.0), img);
        assert_eq!(resize_round_trip(&img, 1.0), img);
        assert!(imagecore::psnr(&hue(&img, 0.0).unwrap(), &img).unwrap() > 45.0);
    }

    #[test]
    fn rotation_by_full_turn_and_quarter() {
        let img = natural_image(32, 32, 2);
        assert_eq!(rotate(&img, 360.0), img);
        // a square rotated by 90 degrees is an exact permutation of pixels
        let r = rotate(&img, 90.0);
        assert_eq!(r.sample(0, 0, 1), img.sample(0, 31, 1));
        assert_eq!(r.sample(31, 0, 0), img.sample(0, 0, 0));
    }

    #[test]
    fn meme_bands_are_white() {
        let img = natural_image(40, 100, 3);
        let out = meme(&img, 0.1);
        assert!((0..40).all(|x| out.sample(x, 0, 0) == 255 && out.sample(x, 9, 2) == 255 && out.sample(x, 90, 1) == 255));
        assert_eq!(out.sample(5, 10, 0), img.sample(5, 10, 0));
        assert_eq!(out.sample(5, 89, 0), img.sample(5, 89, 0));
    }

    #[test]
    fn brightness_clamps() {
        let img = ImageBuffer::filled(4, 4, 1, 200).unwrap();
        assert!(brightness(&img, 2.0).data().iter().all(|&v| v == 255));
    }

    #[test]
    fn hue_keeps_luma_and_grayscale() {
        let img = natural_image(48, 48, 4);
        let out = hue(&img, 30.0).unwrap();
        let diff = img.luma().data.iter().zip(&out.luma().data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        // only clipping and rounding disturb luma
        assert!(diff < 3.0, "{diff}");
        let gray = img.luma().to_gray().unwrap();
        assert_eq!(hue(&gray, 90.0).unwrap(), gray);
    }
}
