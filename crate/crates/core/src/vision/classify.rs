//! Per-pixel channel classification in hue / saturation / value space.

use serde::{Deserialize, Serialize};

use crate::stroke::PlayerChannel;

use super::{Mask, Raster, VisionError};

/// Reference colors and decision thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColorPalette {
    pub black: [u8; 3],
    pub red: [u8; 3],
    pub green: [u8; 3],
    pub blue: [u8; 3],
    pub background: [u8; 3],
    /// Max hue distance, in degrees, to a reference color.
    pub hue_tolerance: f64,
    /// Pixels below this saturation are achromatic.
    pub min_saturation: f64,
    /// Achromatic pixels at or below this value are black ink.
    pub black_max_value: f64,
    /// Chromatic pixels below this value are treated as black ink.
    pub min_value: f64,
}

impl Default for ColorPalette {
    fn default() -> Self {
        Self {
            black: PlayerChannel::Black.rgb(),
            red: PlayerChannel::Red.rgb(),
            green: PlayerChannel::Green.rgb(),
            blue: PlayerChannel::Blue.rgb(),
            background: [255, 255, 255],
            hue_tolerance: 45.0,
            min_saturation: 0.35,
            black_max_value: 0.45,
            min_value: 0.15,
        }
    }
}

/// `(hue degrees, saturation, value)`, each of saturation and value in [0, 1].
pub fn hsv(rgb: [u8; 3]) -> (f64, f64, f64) {
    let [r, g, b] = rgb.map(|v| v as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    (h, s, max)
}

fn hue_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

impl ColorPalette {
    fn chromatic(&self) -> [(PlayerChannel, f64); 3] {
        [
            (PlayerChannel::Red, hsv(self.red).0),
            (PlayerChannel::Green, hsv(self.green).0),
            (PlayerChannel::Blue, hsv(self.blue).0),
        ]
    }

    /// Reference colors must classify as their own channel and be pairwise
    /// distinguishable by hue.
    pub fn validate(&self) -> Result<(), VisionError> {
        let refs = self.chromatic();
        for (i, (a, ha)) in refs.iter().enumerate() {
            for (b, hb) in &refs[i + 1..] {
                if hue_distance(*ha, *hb) <= self.hue_tolerance {
                    return Err(VisionError::Palette(format!(
                        "{a} and {b} hues are within the {} degree tolerance",
                        self.hue_tolerance
                    )));
                }
            }
        }
        for (ch, rgb) in [
            (Some(PlayerChannel::Black), self.black),
            (Some(PlayerChannel::Red), self.red),
            (Some(PlayerChannel::Green), self.green),
            (Some(PlayerChannel::Blue), self.blue),
            (None, self.background),
        ] {
            if self.classify_pixel(rgb) != ch {
                return Err(VisionError::Palette(format!(
                    "reference color {rgb:?} does not classify as {ch:?}"
                )));
            }
        }
        Ok(())
    }

    /// Channel of one pixel, or `None` for background.
    pub fn classify_pixel(&self, rgb: [u8; 3]) -> Option<PlayerChannel> {
        let (h, s, v) = hsv(rgb);
        if s < self.min_saturation {
            return (v <= self.black_max_value).then_some(PlayerChannel::Black);
        }
        if v < self.min_value {
            return Some(PlayerChannel::Black);
        }
        self.chromatic()
            .into_iter()
            .map(|(ch, href)| (ch, hue_distance(h, href)))
            .filter(|(_, d)| *d <= self.hue_tolerance)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(ch, _)| ch)
    }
}

/// One binary mask per channel. Masks are pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelMasks {
    masks: [Mask; 4],
}

impl ChannelMasks {
    pub fn get(&self, channel: PlayerChannel) -> &Mask {
        &self.masks[channel.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (PlayerChannel, &Mask)> {
        PlayerChannel::ALL.into_iter().zip(self.masks.iter())
    }
}

pub fn classify_channels(img: &Raster, palette: &ColorPalette) -> ChannelMasks {
    let (w, h) = (img.width(), img.height());
    let mut masks = [
        Mask::new(w, h),
        Mask::new(w, h),
        Mask::new(w, h),
        Mask::new(w, h),
    ];
    for y in 0..h {
        for x in 0..w {
            if let Some(ch) = palette.classify_pixel(img.get(x, y)) {
                masks[ch.index()].set(x, y, true);
            }
        }
    }
    ChannelMasks { masks }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_pixels() {
        let p = ColorPalette::default();
        assert_eq!(p.classify_pixel([200, 0, 0]), Some(PlayerChannel::Red));
        assert_eq!(p.classify_pixel([30, 30, 30]), Some(PlayerChannel::Black));
        assert_eq!(p.classify_pixel([0, 0, 255]), Some(PlayerChannel::Blue));
        assert_eq!(p.classify_pixel([0, 200, 0]), Some(PlayerChannel::Green));
        assert_eq!(p.classify_pixel([250, 250, 250]), None);
        assert_eq!(p.classify_pixel([180, 180, 180]), None);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn hsv_known_values() {
        assert_eq!(hsv([255, 0, 0]), (0.0, 1.0, 1.0));
        assert_eq!(hsv([0, 255, 0]).0, 120.0);
        assert_eq!(hsv([0, 0, 255]).0, 240.0);
        assert_eq!(hsv([255, 0, 255]).0, 300.0);
        assert_eq!(hsv([0, 0, 0]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn palette_with_colliding_hues_is_invalid() {
        let p = ColorPalette {
            green: [200, 40, 40],
            ..ColorPalette::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn four_squares_recall() {
        let mut img = Raster::new(40, 40, [255, 255, 255]).unwrap();
        let squares = [
            (PlayerChannel::Black, 2u32, 2u32),
            (PlayerChannel::Red, 22, 2),
            (PlayerChannel::Green, 2, 22),
            (PlayerChannel::Blue, 22, 22),
        ];
        for (ch, x0, y0) in squares {
            for y in y0..y0 + 15 {
                for x in x0..x0 + 15 {
                    img.set(x, y, ch.rgb());
                }
            }
        }
        let masks = classify_channels(&img, &ColorPalette::default());
        for (ch, x0, y0) in squares {
            let m = masks.get(ch);
            let hits = (y0..y0 + 15)
                .flat_map(|y| (x0..x0 + 15).map(move |x| (x, y)))
                .filter(|(x, y)| m.get(*x as i64, *y as i64))
                .count();
            assert!(hits as f64 / 225.0 >= 0.99, "{ch} recall {hits}/225");
            assert_eq!(m.count(), 225, "{ch} has spurious pixels");
        }
    }
}
