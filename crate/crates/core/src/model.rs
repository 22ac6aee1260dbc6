//! Domain types shared by fusion, metrics, search and synthesis.
//!
//! Every type validates its invariants at construction, so downstream code
//! can take them as given.

use std::borrow::Borrow;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::error::{Error, Result};

/// An n-gram class such as `"the"`. `n` is the number of symbols (chars).
#[derive(Clone)]
pub struct NGramClass {
    label: Arc<str>,
    n: usize,
}

impl NGramClass {
    pub fn new(label: &str) -> Result<Self> {
        if label.is_empty() {
            return Err(Error::invalid("n-gram class", "empty label"));
        }
        Ok(Self {
            n: label.chars().count(),
            label: Arc::from(label),
        })
    }

    /// Constructs a class and checks that the declared length agrees with the label.
    pub fn with_len(label: &str, n: usize) -> Result<Self> {
        let cls = Self::new(label)?;
        if cls.n != n {
            return Err(Error::invalid(
                "n-gram class",
                format!("label {label:?} has {} symbols but n = {n}", cls.n),
            ));
        }
        Ok(cls)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

impl PartialEq for NGramClass {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.label, &other.label) || self.label == other.label
    }
}

impl Eq for NGramClass {}

impl PartialOrd for NGramClass {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for NGramClass {
    fn cmp(&self, other: &Self) -> Ordering {
        self.label.cmp(&other.label)
    }
}

impl Hash for NGramClass {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.label.hash(state)
    }
}

impl Borrow<str> for NGramClass {
    fn borrow(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for NGramClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.label)
    }
}

impl fmt::Display for NGramClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

/// Name of the feature-space branch that produced a detection.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModalityId(Arc<str>);

impl ModalityId {
    pub fn new(name: &str) -> Result<Self> {
        if name.is_empty() {
            return Err(Error::invalid("modality id", "empty name"));
        }
        Ok(Self(Arc::from(name)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ModalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for ModalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Axis-aligned box in line-image pixel coordinates, `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl BBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let coords = [x0, y0, x1, y1];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("box", format!("non-finite coordinate in {coords:?}")));
        }
        if coords.iter().any(|&c| c < 0.0) {
            return Err(Error::invalid("box", format!("negative coordinate in {coords:?}")));
        }
        if x0 >= x1 || y0 >= y1 {
            return Err(Error::invalid(
                "box",
                format!("need x0 < x1 and y0 < y1, got ({x0}, {y0}, {x1}, {y1})"),
            ));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn y0(&self) -> f64 {
        self.y0
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }

    pub fn y1(&self) -> f64 {
        self.y1
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Smallest box containing both.
    pub fn union(&self, other: &BBox) -> BBox {
        BBox {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    pub fn within(&self, width: f64, height: f64) -> bool {
        self.x1 <= width && self.y1 <= height
    }
}

fn interval_intersection(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// Intersection over union of two boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = interval_intersection(a.x0, a.x1, b.x0, b.x1)
        * interval_intersection(a.y0, a.y1, b.y0, b.y1);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// 1-D intersection over union of the `[x0, x1)` intervals; y is ignored.
pub fn horizontal_overlap(a: &BBox, b: &BBox) -> f64 {
    let inter = interval_intersection(a.x0, a.x1, b.x0, b.x1);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.x1.max(b.x1) - a.x0.min(b.x0);
    (inter / union).clamp(0.0, 1.0)
}

/// Which overlap measure decides "same region" for fusion and matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverlapMode {
    #[default]
    Horizontal,
    Iou,
}

impl OverlapMode {
    pub fn measure(self, a: &BBox, b: &BBox) -> f64 {
        match self {
            OverlapMode::Horizontal => horizontal_overlap(a, b),
            OverlapMode::Iou => iou(a, b),
        }
    }
}

/// One candidate interpretation proposed by a detector branch.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub cls: NGramClass,
    pub bbox: BBox,
    score: f64,
    pub modality: ModalityId,
}

impl Detection {
    pub fn new(cls: NGramClass, bbox: BBox, score: f64, modality: ModalityId) -> Result<Self> {
        check_score(score)?;
        Ok(Self {
            cls,
            bbox,
            score,
            modality,
        })
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    /// Same detection with the score multiplied by `weight` (expected in `[0, 1]`).
    pub(crate) fn scaled(&self, weight: f64) -> Detection {
        Detection {
            score: (self.score * weight).clamp(0.0, 1.0),
            ..self.clone()
        }
    }
}

pub(crate) fn check_score(score: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&score) {
        return Err(Error::invalid("score", format!("{score} is outside [0, 1]")));
    }
    Ok(())
}

/// Identity and pixel size of a query text-line image.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QueryLineId {
    id: String,
    width: u32,
    height: u32,
}

impl QueryLineId {
    pub fn new(id: &str, width: u32, height: u32) -> Result<Self> {
        if id.is_empty() {
            return Err(Error::invalid("line id", "empty id"));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid(
                "line id",
                format!("line {id:?} has zero size {width}x{height}"),
            ));
        }
        Ok(Self {
            id: id.to_string(),
            width,
            height,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }
}

/// How `retrieved_ngrams` is counted: one per area, or one per option.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RetrievedCount {
    #[default]
    Areas,
    Options,
}

/// Knobs for fusion and evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    /// Weight applied to branch 1 scores.
    pub w1: f64,
    /// Weight applied to branch 2 scores.
    pub w2: f64,
    /// Maximum gain increment awarded when two solutions agree.
    pub delta: f64,
    /// Overlap needed for two same-class solutions to be fused, and for
    /// two solutions to share an area.
    pub tau_overlap: f64,
    /// Overlap needed for an option to hit a ground-truth occurrence.
    pub tau_match: f64,
    /// Weighted scores below this are dropped.
    pub epsilon_prune: f64,
    pub overlap: OverlapMode,
    pub retrieved: RetrievedCount,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            w1: 0.5,
            w2: 0.5,
            delta: 0.1,
            tau_overlap: 0.5,
            tau_match: 0.5,
            epsilon_prune: 1e-9,
            overlap: OverlapMode::Horizontal,
            retrieved: RetrievedCount::Areas,
        }
    }
}

impl FusionConfig {
    pub fn with_weights(self, w1: f64, w2: f64) -> Self {
        Self { w1, w2, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| -> Result<()> {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid("fusion config", format!("{name} = {v} not in [0, 1]")));
            }
            Ok(())
        };
        let half_open = |name: &str, v: f64| -> Result<()> {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid("fusion config", format!("{name} = {v} not in (0, 1]")));
            }
            Ok(())
        };
        unit("w1", self.w1)?;
        unit("w2", self.w2)?;
        half_open("delta", self.delta)?;
        half_open("tau_overlap", self.tau_overlap)?;
        half_open("tau_match", self.tau_match)?;
        if !(self.epsilon_prune > 0.0 && self.epsilon_prune < 1.0) {
            return Err(Error::invalid(
                "fusion config",
                format!("epsilon_prune = {} must be a small positive number", self.epsilon_prune),
            ));
        }
        Ok(())
    }

    pub(crate) fn overlaps(&self, a: &BBox, b: &BBox) -> bool {
        self.overlap.measure(a, b) >= self.tau_overlap
    }

    pub(crate) fn matches(&self, a: &BBox, b: &BBox) -> bool {
        self.overlap.measure(a, b) >= self.tau_match
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthOccurrence {
    pub cls: NGramClass,
    pub bbox: BBox,
}

/// Annotated n-gram occurrences of one query line.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthLine {
    line: QueryLineId,
    occurrences: Vec<GroundTruthOccurrence>,
}

impl GroundTruthLine {
    pub fn new(line: QueryLineId, occurrences: Vec<GroundTruthOccurrence>) -> Result<Self> {
        let (w, h) = (line.width() as f64, line.height() as f64);
        if let Some((i, occ)) = occurrences
            .iter()
            .enumerate()
            .find(|(_, o)| !o.bbox.within(w, h))
        {
            return Err(Error::invalid(
                "ground truth",
                format!(
                    "occurrence {i} ({}) of line {:?} lies outside the {w}x{h} image",
                    occ.cls,
                    line.id()
                ),
            ));
        }
        Ok(Self { line, occurrences })
    }

    pub fn line(&self) -> &QueryLineId {
        &self.line
    }

    pub fn occurrences(&self) -> &[GroundTruthOccurrence] {
        &self.occurrences
    }
}

/// In-vocabulary class set with per-class support counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    classes: BTreeSet<NGramClass>,
    support_counts: BTreeMap<NGramClass, u64>,
}

impl Vocabulary {
    pub fn new(
        classes: BTreeSet<NGramClass>,
        support_counts: BTreeMap<NGramClass, u64>,
    ) -> Result<Self> {
        for (cls, &count) in &support_counts {
            if !classes.contains(cls) {
                return Err(Error::invalid(
                    "vocabulary",
                    format!("support count for {cls} which is not a vocabulary class"),
                ));
            }
            if count == 0 {
                return Err(Error::invalid("vocabulary", format!("zero support count for {cls}")));
            }
        }
        Ok(Self {
            classes,
            support_counts,
        })
    }

    /// Vocabulary where every class has a recorded support count.
    pub fn from_counts(support_counts: BTreeMap<NGramClass, u64>) -> Result<Self> {
        let classes = support_counts.keys().cloned().collect();
        Self::new(classes, support_counts)
    }

    pub fn classes(&self) -> &BTreeSet<NGramClass> {
        &self.classes
    }

    pub fn support_counts(&self) -> &BTreeMap<NGramClass, u64> {
        &self.support_counts
    }

    pub fn support(&self, label: &str) -> Option<u64> {
        self.support_counts.get(label).copied()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.classes.contains(label)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}
