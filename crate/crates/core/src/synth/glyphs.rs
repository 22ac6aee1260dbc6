use std::collections::BTreeMap;

use image::{GrayImage, Luma};
use rand::Rng;

use crate::error::{Error, Result};

use super::stream_rng;

/// Grayscale glyph rasters per symbol, dark ink on a light background.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphSet {
    glyphs: BTreeMap<char, Vec<GrayImage>>,
}

impl GlyphSet {
    pub fn new(glyphs: BTreeMap<char, Vec<GrayImage>>) -> Result<Self> {
        for (symbol, variants) in &glyphs {
            if variants.is_empty() {
                return Err(Error::invalid("glyph set", format!("symbol {symbol:?} has no glyphs")));
            }
            if variants.iter().any(|g| g.width() == 0 || g.height() == 0) {
                return Err(Error::invalid("glyph set", format!("symbol {symbol:?} has an empty raster")));
            }
            if symbol.is_whitespace() {
                return Err(Error::invalid("glyph set", "whitespace cannot have glyphs"));
            }
        }
        Ok(Self { glyphs })
    }

    /// Random-stroke glyphs, `variants` per symbol, roughly `size` pixels
    /// square. Widths vary by ±30% so lines are irregular.
    pub fn procedural(symbols: &str, variants: usize, size: u32, seed: u64) -> Result<Self> {
        if variants == 0 || size < 4 {
            return Err(Error::contract("need at least one variant of at least 4 px"));
        }
        let mut glyphs = BTreeMap::new();
        for (si, symbol) in symbols.chars().filter(|c| !c.is_whitespace()).enumerate() {
            let mut rng = stream_rng(seed, si as u64);
            let rasters = (0..variants)
                .map(|_| {
                    let w = ((size as f64) * rng.random_range(0.7..1.3)).round().max(4.0) as u32;
                    stroke_glyph(&mut rng, w, size)
                })
                .collect();
            glyphs.insert(symbol, rasters);
        }
        Self::new(glyphs)
    }

    pub fn get(&self, symbol: char) -> Option<&[GrayImage]> {
        self.glyphs.get(&symbol).map(Vec::as_slice)
    }

    pub fn contains(&self, symbol: char) -> bool {
        self.glyphs.contains_key(&symbol)
    }

    pub fn symbols(&self) -> impl Iterator<Item = char> + '_ {
        self.glyphs.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (char, &[GrayImage])> {
        self.glyphs.iter().map(|(c, v)| (*c, v.as_slice()))
    }
}

fn stroke_glyph(rng: &mut impl Rng, w: u32, h: u32) -> GrayImage {
    let mut img = GrayImage::from_pixel(w, h, Luma([255]));
    let strokes = rng.random_range(2..=4);
    for _ in 0..strokes {
        let (x0, y0) = (rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
        let (x1, y1) = (rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
        let ink: u8 = rng.random_range(0..64);
        let steps = ((x1 - x0).abs().max((y1 - y0).abs()) * 2.0).ceil().max(1.0) as u32;
        for s in 0..=steps {
            let t = s as f64 / steps as f64;
            let (x, y) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
            for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let (px, py) = (x as u32 + dx, y as u32 + dy);
                if px < w && py < h {
                    img.put_pixel(px, py, Luma([ink]));
                }
            }
        }
    }
    img
}
