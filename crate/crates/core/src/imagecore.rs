//! Image buffers, BT.601 colour conversion, PSNR and raster file I/O.
//!
//! Pixels are kept as 8-bit samples. Frequency-domain work happens on
//! [`PlanarF64`] planes and is quantized back to 8 bits exactly once, in
//! [`yuv_to_rgb`] or [`PlanarF64::to_gray`].

use std::io::Cursor;
use std::path::Path;

use image::codecs::jpeg::JpegEncoder;
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat as RasterFormat};
use thiserror::Error;

/// Smallest width/height accepted by the watermark codecs.
pub const MIN_WATERMARK_DIM: usize = 64;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("file not found: {0}")]
    FileNotFound(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image: {0}")]
    CorruptImage(String),
    #[error("expected {expected} channels, got {got}")]
    WrongChannelCount { expected: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid buffer: {0}")]
    InvalidBuffer(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Row-major interleaved 8-bit image with one (gray) or three (RGB) channels.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish()
    }
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self, ImageError> {
        if channels != 1 && channels != 3 {
            return Err(ImageError::InvalidBuffer(format!("{channels} channels")));
        }
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidBuffer("zero-sized image".into()));
        }
        if data.len() != width * height * channels {
            return Err(ImageError::InvalidBuffer(format!(
                "data length {} != {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        Ok(Self { width, height, channels, data })
    }

    /// Image with every sample set to `value`.
    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Result<Self, ImageError> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn is_rgb(&self) -> bool {
        self.channels == 3
    }

    #[inline]
    pub fn sample(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Extracts channel `c` as a real-valued plane.
    pub fn channel_plane(&self, c: usize) -> PlanarF64 {
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| f64::from(px[c]))
            .collect();
        PlanarF64 { width: self.width, height: self.height, data }
    }

    /// Luma plane: Y of BT.601 for RGB, the single channel for gray.
    pub fn luma(&self) -> PlanarF64 {
        if self.channels == 1 {
            self.channel_plane(0)
        } else {
            let data = self
                .data
                .chunks_exact(3)
                .map(|px| luma_of(f64::from(px[0]), f64::from(px[1]), f64::from(px[2])))
                .collect();
            PlanarF64 { width: self.width, height: self.height, data }
        }
    }

    fn to_dynamic(&self) -> DynamicImage {
        let (w, h) = (self.width as u32, self.height as u32);
        if self.channels == 1 {
            DynamicImage::ImageLuma8(image::GrayImage::from_raw(w, h, self.data.clone()).expect("validated buffer"))
        } else {
            DynamicImage::ImageRgb8(image::RgbImage::from_raw(w, h, self.data.clone()).expect("validated buffer"))
        }
    }

    fn from_dynamic(img: DynamicImage) -> Result<Self, ImageError> {
        let gray = !img.color().has_color();
        let (w, h) = (img.width() as usize, img.height() as usize);
        // `to_luma8`/`to_rgb8` downconvert 16-bit sources with rounding and drop alpha.
        if gray {
            Self::new(w, h, 1, img.to_luma8().into_raw())
        } else {
            Self::new(w, h, 3, img.to_rgb8().into_raw())
        }
    }
}

/// One real-valued plane, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarF64 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl PlanarF64 {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if data.len() != width * height {
            return Err(ImageError::DimensionMismatch(format!(
                "plane data length {} != {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// Rounds and clamps into a single-channel 8-bit image.
    pub fn to_gray(&self) -> Result<ImageBuffer, ImageError> {
        let data = self.data.iter().map(|&v| quantize(v)).collect();
        ImageBuffer::new(self.width, self.height, 1, data)
    }
}

#[inline]
pub(crate) fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

// BT.601 full range (JFIF) constants.
const KR: f64 = 0.299;
const KG: f64 = 0.587;
const KB: f64 = 0.114;
const CHROMA_OFFSET: f64 = 128.0;

#[inline]
pub(crate) fn luma_of(r: f64, g: f64, b: f64) -> f64 {
    KR * r + KG * g + KB * b
}

#[inline]
pub(crate) fn rgb_to_yuv_px(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let y = luma_of(r, g, b);
    let u = -0.168_736 * r - 0.331_264 * g + 0.5 * b + CHROMA_OFFSET;
    let v = 0.5 * r - 0.418_688 * g - 0.081_312 * b + CHROMA_OFFSET;
    (y, u, v)
}

#[inline]
pub(crate) fn yuv_to_rgb_px(y: f64, u: f64, v: f64) -> (f64, f64, f64) {
    let u = u - CHROMA_OFFSET;
    let v = v - CHROMA_OFFSET;
    let r = y + 1.402 * v;
    let g = y - 0.344_136 * u - 0.714_136 * v;
    let b = y + 1.772 * u;
    (r, g, b)
}

/// Splits an RGB image into BT.601 full-range Y, U, V planes (U and V centred on 128).
pub fn rgb_to_yuv(img: &ImageBuffer) -> Result<(PlanarF64, PlanarF64, PlanarF64), ImageError> {
    if img.channels != 3 {
        return Err(ImageError::WrongChannelCount { expected: 3, got: img.channels });
    }
    let n = img.width * img.height;
    let (mut y, mut u, mut v) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for px in img.data.chunks_exact(3) {
        let (py, pu, pv) = rgb_to_yuv_px(f64::from(px[0]), f64::from(px[1]), f64::from(px[2]));
        y.push(py);
        u.push(pu);
        v.push(pv);
    }
    let plane = |data| PlanarF64 { width: img.width, height: img.height, data };
    Ok((plane(y), plane(u), plane(v)))
}

/// Inverse of [`rgb_to_yuv`]; rounds to nearest and clamps to `[0, 255]`.
pub fn yuv_to_rgb(y: &PlanarF64, u: &PlanarF64, v: &PlanarF64) -> Result<ImageBuffer, ImageError> {
    if (y.width, y.height) != (u.width, u.height) || (y.width, y.height) != (v.width, v.height) {
        return Err(ImageError::DimensionMismatch(format!(
            "Y {}x{}, U {}x{}, V {}x{}",
            y.width, y.height, u.width, u.height, v.width, v.height
        )));
    }
    let mut data = Vec::with_capacity(y.data.len() * 3);
    for ((&py, &pu), &pv) in y.data.iter().zip(&u.data).zip(&v.data) {
        let (r, g, b) = yuv_to_rgb_px(py, pu, pv);
        data.extend_from_slice(&[quantize(r), quantize(g), quantize(b)]);
    }
    ImageBuffer::new(y.width, y.height, 3, data)
}

/// Peak signal-to-noise ratio in dB; `f64::INFINITY` for identical images.
pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64, ImageError> {
    if !a.same_shape(b) {
        return Err(ImageError::DimensionMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width, a.height, a.channels, b.width, b.height, b.channels
        )));
    }
    let sse: u64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&p, &q)| {
            let d = i64::from(p) - i64::from(q);
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse as f64 / a.data.len() as f64;
    Ok(10.0 * (255.0f64 * 255.0 / mse).log10())
}

/// Output encodings supported by [`save_image`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaveFormat {
    Png,
    /// Baseline JPEG at quality 1..=100.
    Jpeg(u8),
}

impl SaveFormat {
    /// Picks PNG or JPEG (quality 95) from a file extension.
    pub fn from_extension(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "png" => Some(Self::Png),
            "jpg" | "jpeg" => Some(Self::Jpeg(95)),
            _ => None,
        }
    }
}

/// Loads a PNG, JPEG or BMP file as 8-bit gray or RGB.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageBuffer, ImageError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(ImageError::FileNotFound(path.display().to_string()));
    }
    let bytes = std::fs::read(path)?;
    decode_image(&bytes)
}

/// Decodes an in-memory PNG, JPEG or BMP stream.
pub fn decode_image(bytes: &[u8]) -> Result<ImageBuffer, ImageError> {
    let format = image::guess_format(bytes).map_err(|e| ImageError::UnsupportedFormat(e.to_string()))?;
    if !matches!(format, RasterFormat::Png | RasterFormat::Jpeg | RasterFormat::Bmp) {
        return Err(ImageError::UnsupportedFormat(format!("{format:?}")));
    }
    let img = image::load_from_memory_with_format(bytes, format).map_err(|e| ImageError::CorruptImage(e.to_string()))?;
    ImageBuffer::from_dynamic(img)
}

/// Encodes to PNG or baseline JPEG bytes.
pub fn encode_image(img: &ImageBuffer, format: SaveFormat) -> Result<Vec<u8>, ImageError> {
    let mut out = Vec::new();
    match format {
        SaveFormat::Png => {
            img.to_dynamic()
                .write_to(&mut Cursor::new(&mut out), RasterFormat::Png)
                .map_err(|e| ImageError::Io(std::io::Error::other(e)))?;
        }
        SaveFormat::Jpeg(q) => {
            if !(1..=100).contains(&q) {
                return Err(ImageError::UnsupportedFormat(format!("jpeg quality {q} outside 1..=100")));
            }
            let color = if img.channels == 1 { ExtendedColorType::L8 } else { ExtendedColorType::Rgb8 };
            JpegEncoder::new_with_quality(&mut out, q)
                .write_image(&img.data, img.width as u32, img.height as u32, color)
                .map_err(|e| ImageError::Io(std::io::Error::other(e)))?;
        }
    }
    Ok(out)
}

pub fn save_image(img: &ImageBuffer, path: impl AsRef<Path>, format: SaveFormat) -> Result<(), ImageError> {
    let bytes = encode_image(img, format)?;
    std::fs::write(path, bytes)?;
    Ok(())
}
