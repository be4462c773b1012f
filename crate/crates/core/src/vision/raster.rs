use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, RgbImage, RgbaImage};

use super::VisionError;

/// 8-bit RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Raster {
    pub fn new(width: u32, height: u32, fill: [u8; 3]) -> Result<Self, VisionError> {
        if width == 0 || height == 0 {
            return Err(VisionError::InvalidRaster(format!(
                "dimensions must be positive, got {width} x {height}"
            )));
        }
        let pixels = fill
            .iter()
            .copied()
            .cycle()
            .take(3 * width as usize * height as usize)
            .collect();
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, VisionError> {
        if width == 0 || height == 0 || pixels.len() != 3 * width as usize * height as usize {
            return Err(VisionError::InvalidRaster(format!(
                "{} bytes do not make a {width} x {height} RGB image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        3 * (y as usize * self.width as usize + x as usize)
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = self.offset(x, y);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = self.offset(x, y);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self, VisionError> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
            .map_err(|e| VisionError::Image(e.to_string()))?
            .to_rgb8();
        let (w, h) = img.dimensions();
        Self::from_pixels(w, h, img.into_raw())
    }

    pub fn to_png_bytes(&self) -> Vec<u8> {
        let img = RgbImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("buffer length checked at construction");
        encode_png(|c| img.write_to(c, ImageFormat::Png))
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self, VisionError> {
        let bytes = std::fs::read(path.as_ref()).map_err(|e| VisionError::Io(e.to_string()))?;
        Self::from_png_bytes(&bytes)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), VisionError> {
        std::fs::write(path.as_ref(), self.to_png_bytes())
            .map_err(|e| VisionError::Io(e.to_string()))
    }
}

fn encode_png(write: impl FnOnce(&mut Cursor<Vec<u8>>) -> image::ImageResult<()>) -> Vec<u8> {
    let mut cursor = Cursor::new(Vec::new());
    write(&mut cursor).expect("png encoding into memory cannot fail");
    cursor.into_inner()
}

/// Encodes straight RGBA bytes as PNG.
pub fn rgba_png_bytes(width: u32, height: u32, rgba: Vec<u8>) -> Vec<u8> {
    let img = RgbaImage::from_raw(width, height, rgba).expect("rgba buffer length");
    encode_png(|c| img.write_to(c, ImageFormat::Png))
}

/// Binary image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    /// Builds a mask from rows of `'1'` / `'#'` (set) and anything else (unset).
    pub fn from_rows(rows: &[&str]) -> Self {
        let height = rows.len() as u32;
        let width = rows.first().map_or(0, |r| r.len()) as u32;
        let mut m = Self::new(width, height);
        for (y, row) in rows.iter().enumerate() {
            for (x, c) in row.chars().enumerate() {
                if c == '1' || c == '#' {
                    m.set(x as u32, y as u32, true);
                }
            }
        }
        m
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    /// Out-of-bounds coordinates read as unset.
    pub fn get(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            return false;
        }
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Set pixels in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(move |(i, _)| ((i % w) as u32, (i / w) as u32))
    }

    pub fn intersects(&self, other: &Mask) -> bool {
        self.bits.iter().zip(&other.bits).any(|(a, b)| *a && *b)
    }

    /// Set pixels white on black.
    pub fn to_png_bytes(&self) -> Vec<u8> {
        let data = self.bits.iter().map(|b| if *b { 255 } else { 0 }).collect();
        let img = image::GrayImage::from_raw(self.width, self.height, data).expect("mask size");
        encode_png(|c| img.write_to(c, ImageFormat::Png))
    }

    /// Renders rows of `1`/`0`, for debugging tests.
    pub fn to_rows(&self) -> Vec<String> {
        (0..self.height as i64)
            .map(|y| {
                (0..self.width as i64)
                    .map(|x| if self.get(x, y) { '1' } else { '0' })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip() {
        let mut r = Raster::new(4, 3, [255, 255, 255]).unwrap();
        r.set(2, 1, [10, 20, 30]);
        let back = Raster::from_png_bytes(&r.to_png_bytes()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn rejects_bad_buffers() {
        assert!(Raster::new(0, 3, [0, 0, 0]).is_err());
        assert!(Raster::from_pixels(2, 2, vec![0; 11]).is_err());
        assert!(Raster::from_png_bytes(b"not a png").is_err());
    }

    #[test]
    fn mask_rows() {
        let m = Mask::from_rows(&["010", "111"]);
        assert_eq!(m.count(), 4);
        assert!(!m.get(-1, 0));
        assert_eq!(m.to_rows(), vec!["010", "111"]);
        assert_eq!(m.iter_set().next(), Some((1, 0)));
    }
}
