use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use image::{GrayImage, Luma};
use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{BBox, GroundTruthLine, GroundTruthOccurrence, NGramClass, QueryLineId};

use super::{stream_rng, GlyphSet};

/// Layout parameters for synthetic lines.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSpec {
    /// Target symbol count per generated line (corpus generation only).
    pub symbols_per_line: RangeInclusive<usize>,
    /// Chance that a glyph backs up over its predecessor in the same word.
    pub overlap_probability: f64,
    /// Fraction of the previous glyph's width covered when overlapping.
    pub overlap_fraction: (f64, f64),
    /// Gap in pixels between non-overlapping glyphs of a word.
    pub gap: RangeInclusive<u32>,
    /// Gap in pixels between words.
    pub word_gap: RangeInclusive<u32>,
    pub margin: u32,
    /// N-gram sizes annotated in the ground truth.
    pub ngram_sizes: Vec<usize>,
    pub seed: u64,
}

impl Default for LineSpec {
    fn default() -> Self {
        Self {
            symbols_per_line: 20..=40,
            overlap_probability: 0.7,
            overlap_fraction: (0.1, 0.4),
            gap: 1..=4,
            word_gap: 8..=14,
            margin: 4,
            ngram_sizes: vec![2, 3],
            seed: 0,
        }
    }
}

impl LineSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |d: String| Err(Error::invalid("line spec", d));
        if self.symbols_per_line.is_empty() {
            return bad("empty symbols_per_line range".into());
        }
        if !(0.0..=1.0).contains(&self.overlap_probability) {
            return bad(format!("overlap_probability {} not in [0, 1]", self.overlap_probability));
        }
        let (lo, hi) = self.overlap_fraction;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return bad(format!("overlap_fraction ({lo}, {hi}) must be a range inside (0, 1)"));
        }
        if self.gap.is_empty() || *self.gap.start() == 0 {
            return bad("gap range must be non-empty and at least 1 px".into());
        }
        if self.word_gap.is_empty() {
            return bad("empty word_gap range".into());
        }
        if self.ngram_sizes.is_empty() || self.ngram_sizes.contains(&0) {
            return bad(format!("ngram_sizes {:?} must be positive and non-empty", self.ngram_sizes));
        }
        Ok(())
    }
}

/// A rendered line with its annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedLine {
    pub image: GrayImage,
    /// One box per non-space symbol, in text order.
    pub symbol_boxes: Vec<(char, BBox)>,
    /// Ground truth per n-gram size; each box is the union of its symbols' boxes.
    pub ngrams: BTreeMap<usize, Vec<GroundTruthOccurrence>>,
}

impl ComposedLine {
    /// All n-gram occurrences (sizes ascending, then text order) as one line.
    pub fn ground_truth(&self, id: &str) -> Result<GroundTruthLine> {
        let line = QueryLineId::new(id, self.image.width(), self.image.height())?;
        GroundTruthLine::new(line, self.ngrams.values().flatten().cloned().collect())
    }
}

/// Places the glyphs of `text` left to right. Spaces separate words and get
/// no glyph. Within a word, each glyph overlaps its predecessor with
/// probability `overlap_probability`; otherwise it follows after a small gap.
/// Ink is composited by per-pixel minimum on a white background.
pub fn compose_line(glyphs: &GlyphSet, text: &str, spec: &LineSpec) -> Result<ComposedLine> {
    compose_with(glyphs, text, spec, &mut stream_rng(spec.seed, 0))
}

fn compose_with(glyphs: &GlyphSet, text: &str, spec: &LineSpec, rng: &mut impl Rng) -> Result<ComposedLine> {
    spec.validate()?;
    if let Some(c) = text.chars().find(|c| !c.is_whitespace() && !glyphs.contains(*c)) {
        return Err(Error::contract(format!("no glyph for symbol {c:?}")));
    }

    struct Placed<'a> {
        symbol: char,
        glyph: &'a GrayImage,
        x: u32,
    }
    let margin = spec.margin;
    let mut words: Vec<Vec<Placed>> = Vec::new();
    let mut prev: Option<(u32, u32)> = None; // (x, width) of the previous glyph
    for word in text.split_whitespace() {
        let mut placed = Vec::new();
        for (i, symbol) in word.chars().enumerate() {
            let variants = glyphs.get(symbol).expect("checked above");
            let glyph = variants.choose(rng).expect("non-empty variants");
            let x = match prev {
                None => margin,
                Some((px, pw)) if i == 0 => px + pw + rng.random_range(spec.word_gap.clone()),
                Some((px, pw)) => {
                    if rng.random_bool(spec.overlap_probability) {
                        let frac = rng.random_range(spec.overlap_fraction.0..=spec.overlap_fraction.1);
                        let back = ((pw as f64) * frac).floor() as u32;
                        (px + pw - back).max(px + 1)
                    } else {
                        px + pw + rng.random_range(spec.gap.clone())
                    }
                }
            };
            prev = Some((x, glyph.width()));
            placed.push(Placed { symbol, glyph, x });
        }
        words.push(placed);
    }

    let all = || words.iter().flatten();
    let max_h = all().map(|p| p.glyph.height()).max().unwrap_or(1);
    let right = all().map(|p| p.x + p.glyph.width()).max().unwrap_or(margin);
    let (width, height) = (right + margin, max_h + 2 * margin);
    let mut image = GrayImage::from_pixel(width, height, Luma([255]));
    let mut symbol_boxes = Vec::new();
    let mut word_boxes: Vec<Vec<(char, BBox)>> = Vec::new();
    for word in &words {
        let mut boxes = Vec::new();
        for p in word {
            let y = margin + (max_h - p.glyph.height()) / 2;
            for (gx, gy, px) in p.glyph.enumerate_pixels() {
                let dst = image.get_pixel_mut(p.x + gx, y + gy);
                dst.0[0] = dst.0[0].min(px.0[0]);
            }
            let b = BBox::new(
                p.x as f64,
                y as f64,
                (p.x + p.glyph.width()) as f64,
                (y + p.glyph.height()) as f64,
            )?;
            boxes.push((p.symbol, b));
        }
        symbol_boxes.extend(boxes.iter().copied());
        word_boxes.push(boxes);
    }

    let mut ngrams: BTreeMap<usize, Vec<GroundTruthOccurrence>> = BTreeMap::new();
    for &n in &spec.ngram_sizes {
        let entry = ngrams.entry(n).or_default();
        for boxes in &word_boxes {
            for window in boxes.windows(n) {
                let label: String = window.iter().map(|(c, _)| *c).collect();
                let bbox = window[1..].iter().fold(window[0].1, |acc, (_, b)| acc.union(b));
                entry.push(GroundTruthOccurrence {
                    cls: NGramClass::new(&label)?,
                    bbox,
                });
            }
        }
    }
    Ok(ComposedLine {
        image,
        symbol_boxes,
        ngrams,
    })
}

/// One generated corpus line.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthLine {
    pub id: String,
    pub text: String,
    pub composed: ComposedLine,
}

/// Generates `n_lines` lines from words of `word_pool` restricted to words the
/// glyph set can render. Line `i` uses stream `i` of `spec.seed`, so the output
/// does not depend on how many threads run the generation.
pub fn generate_corpus<S: AsRef<str> + Sync>(
    glyphs: &GlyphSet,
    word_pool: &[S],
    n_lines: usize,
    spec: &LineSpec,
) -> Result<Vec<SynthLine>> {
    spec.validate()?;
    let words: Vec<&str> = word_pool
        .iter()
        .flat_map(|s| s.as_ref().split_whitespace())
        .filter(|w| w.chars().all(|c| glyphs.contains(c)))
        .collect();
    if words.is_empty() {
        return Err(Error::contract("no word in the text source can be rendered with the glyph set"));
    }
    let width = n_lines.max(1).to_string().len().max(5);
    (0..n_lines)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(spec.seed, i as u64);
            let target = rng.random_range(spec.symbols_per_line.clone());
            let mut picked: Vec<&str> = Vec::new();
            let mut count = 0;
            while count < target.max(1) {
                let w = *words.choose(&mut rng).expect("non-empty pool");
                count += w.chars().count();
                picked.push(w);
            }
            let text = picked.join(" ");
            let composed = compose_with(glyphs, &text, spec, &mut rng)?;
            Ok(SynthLine {
                id: format!("line_{i:0width$}"),
                text,
                composed,
            })
        })
        .collect()
}
