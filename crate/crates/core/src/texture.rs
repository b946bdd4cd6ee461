//! Scalar and RGB rasters over UV space, PNG interchange, and the 8-bit
//! normal-map encoding.
//!
//! Row 0 of a texture is the top of the image, which is `v = 1` in UV space.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::{Vec2, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct TextureMap {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub data: Vec<f64>,
}

/// Quantizes a unit-interval value to a byte, rounding halves up.
pub fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

impl TextureMap {
    pub fn new(width: u32, height: u32, channels: u32) -> Self {
        Self::constant(width, height, &vec![0.0; channels as usize])
    }

    pub fn constant(width: u32, height: u32, value: &[f64]) -> Self {
        assert!(value.len() == 1 || value.len() == 3, "channels must be 1 or 3");
        let data = value
            .iter()
            .map(|v| v.clamp(0.0, 1.0))
            .collect::<Vec<_>>()
            .repeat((width * height) as usize);
        TextureMap {
            width,
            height,
            channels: value.len() as u32,
            data,
        }
    }

    /// Builds a texture, clamping every value to [0, 1].
    pub fn from_data(width: u32, height: u32, channels: u32, mut data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!("unsupported channel count {channels}")));
        }
        if data.len() != (width * height * channels) as usize {
            return Err(Error::invalid("texture data length mismatch"));
        }
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Ok(TextureMap {
            width,
            height,
            channels,
            data,
        })
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        ((y * self.width + x) * self.channels) as usize
    }

    pub fn texel(&self, x: u32, y: u32) -> &[f64] {
        let o = self.offset(x, y);
        &self.data[o..o + self.channels as usize]
    }

    pub fn set_texel(&mut self, x: u32, y: u32, value: &[f64]) {
        let o = self.offset(x, y);
        for (d, v) in self.data[o..o + self.channels as usize].iter_mut().zip(value) {
            *d = v.clamp(0.0, 1.0);
        }
    }

    /// Texel containing `uv` (nearest lookup).
    pub fn texel_of_uv(&self, uv: &Vec2) -> (u32, u32) {
        let x = (uv.x * self.width as f64).floor() as i64;
        let y = ((1.0 - uv.y) * self.height as f64).floor() as i64;
        (
            x.clamp(0, self.width as i64 - 1) as u32,
            y.clamp(0, self.height as i64 - 1) as u32,
        )
    }

    pub fn sample_nearest(&self, uv: &Vec2) -> &[f64] {
        let (x, y) = self.texel_of_uv(uv);
        self.texel(x, y)
    }

    /// Bilinear lookup with repeat addressing. Returns up to 3 channels in
    /// `out[..channels]`.
    pub fn sample_bilinear(&self, uv: &Vec2) -> [f64; 3] {
        let fx = uv.x * self.width as f64 - 0.5;
        let fy = (1.0 - uv.y) * self.height as f64 - 0.5;
        let x0 = fx.floor();
        let y0 = fy.floor();
        let tx = fx - x0;
        let ty = fy - y0;
        let wrap = |v: f64, n: u32| (v as i64).rem_euclid(n as i64) as u32;
        let (xa, xb) = (wrap(x0, self.width), wrap(x0 + 1.0, self.width));
        let (ya, yb) = (wrap(y0, self.height), wrap(y0 + 1.0, self.height));
        let mut out = [0.0; 3];
        let c = self.channels as usize;
        for (x, y, w) in [
            (xa, ya, (1.0 - tx) * (1.0 - ty)),
            (xb, ya, tx * (1.0 - ty)),
            (xa, yb, (1.0 - tx) * ty),
            (xb, yb, tx * ty),
        ] {
            let t = self.texel(x, y);
            for k in 0..c {
                out[k] += w * t[k];
            }
        }
        out
    }

    /// Rounds every value to the nearest 8-bit level, matching what a PNG
    /// save/load cycle produces.
    pub fn quantized(&self) -> TextureMap {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = to_byte(*v) as f64 / 255.0;
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| to_byte(v)).collect()
    }

    pub fn from_bytes(width: u32, height: u32, channels: u32, bytes: &[u8]) -> Result<Self> {
        Self::from_data(
            width,
            height,
            channels,
            bytes.iter().map(|&b| b as f64 / 255.0).collect(),
        )
    }

    pub fn to_image(&self) -> DynamicImage {
        let bytes = self.to_bytes();
        if self.channels == 1 {
            DynamicImage::ImageLuma8(
                GrayImage::from_raw(self.width, self.height, bytes).expect("length checked"),
            )
        } else {
            DynamicImage::ImageRgb8(
                RgbImage::from_raw(self.width, self.height, bytes).expect("length checked"),
            )
        }
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.to_image()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Image {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let mut buf = std::io::Cursor::new(Vec::new());
        self.to_image()
            .write_to(&mut buf, image::ImageFormat::Png)
            .expect("in-memory PNG encoding");
        buf.into_inner()
    }

    /// Loads an 8-bit PNG. Gray images become 1-channel maps, everything else
    /// is converted to RGB.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(Self::from_image(&img))
    }

    pub fn from_image(img: &DynamicImage) -> Self {
        use image::ColorType::*;
        match img.color() {
            L8 | L16 | La8 | La16 => {
                let g = img.to_luma8();
                Self::from_bytes(g.width(), g.height(), 1, g.as_raw()).expect("sized")
            }
            _ => {
                let c = img.to_rgb8();
                Self::from_bytes(c.width(), c.height(), 3, c.as_raw()).expect("sized")
            }
        }
    }
}

/// Maps one normal component from [-1, 1] to an 8-bit level in [0, 1].
#[inline]
pub fn encode_component(c: f64) -> f64 {
    to_byte((c + 1.0) * 0.5) as f64 / 255.0
}

/// Encodes unit normals to an RGB map via `round_half_up((c + 1) / 2 * 255) / 255`.
/// `None` pixels are written as the flat normal `(0, 0, 1)`.
pub fn encode_normal_map(normals: &[Option<Vec3>], width: u32, height: u32) -> TextureMap {
    assert_eq!(normals.len(), (width * height) as usize);
    let mut data = Vec::with_capacity(normals.len() * 3);
    for n in normals {
        let n = n.unwrap_or_else(Vec3::z);
        data.extend(n.iter().map(|&c| encode_component(c)));
    }
    TextureMap {
        width,
        height,
        channels: 3,
        data,
    }
}

/// Inverse of the byte encoding. Not renormalized.
#[inline]
pub fn decode_normal(rgb: &[f64]) -> Vec3 {
    Vec3::new(rgb[0] * 2.0 - 1.0, rgb[1] * 2.0 - 1.0, rgb[2] * 2.0 - 1.0)
}

pub fn decode_normal_map(map: &TextureMap) -> Vec<Vec3> {
    map.data.chunks(3).map(decode_normal).collect()
}

/// Writes a single-channel map as 16-bit grayscale.
pub fn save_gray16(path: &Path, width: u32, height: u32, values: &[u16]) -> Result<()> {
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(width, height, values.to_vec())
            .ok_or_else(|| Error::invalid("gray16 length mismatch"))?;
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

pub fn load_gray16(path: &Path) -> Result<(u32, u32, Vec<u16>)> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let g = img.to_luma16();
    Ok((g.width(), g.height(), g.into_raw()))
}

/// RGB image from per-pixel colors (for rendered previews).
pub fn rgb_image(width: u32, height: u32, pixels: &[[f64; 3]]) -> RgbImage {
    let mut img = RgbImage::new(width, height);
    for (i, p) in pixels.iter().enumerate() {
        let x = i as u32 % width;
        let y = i as u32 / width;
        img.put_pixel(x, y, Rgb(p.map(to_byte)));
    }
    img
}
