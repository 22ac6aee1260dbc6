use std::collections::BTreeSet;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{BBox, Detection, GroundTruthLine, ModalityId, NGramClass, Vocabulary};

use super::{fnv1a, stream_rng};

/// Error profile of a simulated detector branch.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// Probability of missing a detectable occurrence.
    pub miss_rate: f64,
    /// Expected false positives per line.
    pub fp_rate: f64,
    pub tp_score_mean: f64,
    pub tp_score_spread: f64,
    pub fp_score_mean: f64,
    pub fp_score_spread: f64,
    /// Standard deviation (pixels) of the uniform jitter applied to each box edge.
    pub box_jitter: f64,
    /// Classes this branch never detects.
    pub blind_classes: BTreeSet<String>,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            miss_rate: 0.2,
            fp_rate: 2.0,
            tp_score_mean: 0.7,
            tp_score_spread: 0.2,
            fp_score_mean: 0.3,
            fp_score_spread: 0.2,
            box_jitter: 1.0,
            blind_classes: BTreeSet::new(),
            seed: 0,
        }
    }
}

impl NoiseModel {
    /// No misses, no false positives, no jitter, every score exactly 1.
    pub fn noiseless(seed: u64) -> Self {
        Self {
            miss_rate: 0.0,
            fp_rate: 0.0,
            tp_score_mean: 1.0,
            tp_score_spread: 0.0,
            fp_score_mean: 0.0,
            fp_score_spread: 0.0,
            box_jitter: 0.0,
            blind_classes: BTreeSet::new(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |d: String| Err(Error::invalid("noise model", d));
        if !(0.0..=1.0).contains(&self.miss_rate) {
            return bad(format!("miss_rate {} not in [0, 1]", self.miss_rate));
        }
        for (name, v) in [
            ("fp_rate", self.fp_rate),
            ("tp_score_spread", self.tp_score_spread),
            ("fp_score_spread", self.fp_score_spread),
            ("box_jitter", self.box_jitter),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} {v} must be a non-negative number"));
            }
        }
        for (name, v) in [("tp_score_mean", self.tp_score_mean), ("fp_score_mean", self.fp_score_mean)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} {v} not in [0, 1]"));
            }
        }
        Ok(())
    }
}

fn draw_score(rng: &mut impl Rng, mean: f64, spread: f64) -> f64 {
    if spread == 0.0 {
        return mean;
    }
    rng.random_range(mean - spread..=mean + spread).clamp(0.0, 1.0)
}

fn jitter_box(rng: &mut impl Rng, b: &BBox, sigma: f64, width: f64, height: f64) -> BBox {
    if sigma == 0.0 {
        return *b;
    }
    // uniform on [-a, a] has standard deviation a / sqrt(3)
    let a = sigma * 3f64.sqrt();
    let mut d = || rng.random_range(-a..=a);
    let x0 = (b.x0() + d()).clamp(0.0, width);
    let y0 = (b.y0() + d()).clamp(0.0, height);
    let x1 = (b.x1() + d()).clamp(0.0, width);
    let y1 = (b.y1() + d()).clamp(0.0, height);
    BBox::new(x0, y0, x1, y1).unwrap_or(*b)
}

/// Simulated detector output for one line.
///
/// Each in-vocabulary occurrence whose class is not blind is found with
/// probability `1 - miss_rate`, with a jittered box and a true-positive
/// score. Then `fp_rate` false positives on average (the integer part always,
/// one more with probability equal to the fractional part) are added with
/// random visible classes and positions. Out-of-vocabulary occurrences are
/// never detected. The random stream depends on the seed, the modality and
/// the line id only.
pub fn simulate_detector(
    gt: &GroundTruthLine,
    vocab: &Vocabulary,
    noise: &NoiseModel,
    modality: &ModalityId,
) -> Result<Vec<Detection>> {
    noise.validate()?;
    let line = gt.line();
    let (width, height) = (line.width() as f64, line.height() as f64);
    let mut rng = stream_rng(noise.seed, fnv1a(&[modality.as_str(), line.id()]));
    let mut out = Vec::new();
    for occ in gt.occurrences() {
        let label = occ.cls.label();
        if !vocab.contains(label) || noise.blind_classes.contains(label) {
            continue;
        }
        if noise.miss_rate > 0.0 && rng.random_bool(noise.miss_rate) {
            continue;
        }
        let bbox = jitter_box(&mut rng, &occ.bbox, noise.box_jitter, width, height);
        let score = draw_score(&mut rng, noise.tp_score_mean, noise.tp_score_spread);
        out.push(Detection::new(occ.cls.clone(), bbox, score, modality.clone())?);
    }

    let visible: Vec<&NGramClass> = vocab
        .classes()
        .iter()
        .filter(|c| !noise.blind_classes.contains(c.label()))
        .collect();
    if visible.is_empty() || noise.fp_rate == 0.0 {
        return Ok(out);
    }
    let whole = noise.fp_rate.floor();
    let extra = noise.fp_rate - whole;
    let count = whole as usize + usize::from(extra > 0.0 && rng.random_bool(extra));
    for _ in 0..count {
        let cls = visible[rng.random_range(0..visible.len())];
        let w = (height * 0.6 * cls.n() as f64 * rng.random_range(0.75..1.25)).clamp(1.0, width);
        let x0 = if width > w { rng.random_range(0.0..width - w) } else { 0.0 };
        let bbox = BBox::new(x0, 0.0, x0 + w, height)?;
        let score = draw_score(&mut rng, noise.fp_score_mean, noise.fp_score_spread);
        out.push(Detection::new(cls.clone(), bbox, score, modality.clone())?);
    }
    Ok(out)
}

/// Simulates every line, in parallel, keyed by line id.
pub fn simulate_corpus(
    gts: &[GroundTruthLine],
    vocab: &Vocabulary,
    noise: &NoiseModel,
    modality: &ModalityId,
) -> Result<Vec<(String, Vec<Detection>)>> {
    gts.par_iter()
        .map(|gt| Ok((gt.line().id().to_string(), simulate_detector(gt, vocab, noise, modality)?)))
        .collect()
}
