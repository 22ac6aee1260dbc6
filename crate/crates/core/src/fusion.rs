//! Multi-modal combination of two detector branches.
//!
//! The pipeline for one line is: weight and concatenate both branches, fuse
//! overlapping same-class solutions with a score gain (clamping at 1 and
//! taking the overshoot out of competing interpretations), then group the
//! survivors into areas holding at most one option per class.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{check_score, BBox, Detection, FusionConfig, ModalityId, NGramClass, QueryLineId};

/// A (possibly fused) interpretation with the branch scores it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedSolution {
    pub cls: NGramClass,
    pub bbox: BBox,
    score: f64,
    provenance: Vec<(ModalityId, f64)>,
}

impl FusedSolution {
    pub fn new(
        cls: NGramClass,
        bbox: BBox,
        score: f64,
        provenance: Vec<(ModalityId, f64)>,
    ) -> Result<Self> {
        check_score(score)?;
        if provenance.is_empty() {
            return Err(Error::invalid("fused solution", "empty provenance"));
        }
        Ok(Self {
            cls,
            bbox,
            score,
            provenance,
        })
    }

    pub fn from_detection(d: &Detection) -> Self {
        Self {
            cls: d.cls.clone(),
            bbox: d.bbox,
            score: d.score(),
            provenance: vec![(d.modality.clone(), d.score())],
        }
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    /// `(modality, original detector score)` for every detection merged in.
    pub fn provenance(&self) -> &[(ModalityId, f64)] {
        &self.provenance
    }
}

/// A region of the line with its ranked options, one per class.
#[derive(Debug, Clone, PartialEq)]
pub struct Area {
    pub area_id: usize,
    pub extent: BBox,
    options: Vec<FusedSolution>,
}

impl Area {
    /// Builds an area; options must be non-empty, one per class, inside the
    /// extent, and sorted by descending score with ties ordered by label.
    pub fn new(area_id: usize, extent: BBox, options: Vec<FusedSolution>) -> Result<Self> {
        if options.is_empty() {
            return Err(Error::invalid("area", format!("area {area_id} has no options")));
        }
        let mut seen = BTreeSet::new();
        for o in &options {
            if !seen.insert(o.cls.label()) {
                return Err(Error::invalid(
                    "area",
                    format!("area {area_id} has more than one option of class {}", o.cls),
                ));
            }
        }
        if let Some(o) = options.iter().find(|o| o.bbox.union(&extent) != extent) {
            return Err(Error::invalid(
                "area",
                format!("area {area_id} extent does not contain its {} option", o.cls),
            ));
        }
        for w in options.windows(2) {
            if option_order(&w[0], &w[1]) != std::cmp::Ordering::Less {
                return Err(Error::invalid(
                    "area",
                    format!("area {area_id} options are not sorted by descending score"),
                ));
            }
        }
        Ok(Self {
            area_id,
            extent,
            options,
        })
    }

    pub fn options(&self) -> &[FusedSolution] {
        &self.options
    }

    pub fn top_k(&self, k: usize) -> &[FusedSolution] {
        &self.options[..k.min(self.options.len())]
    }
}

fn option_order(a: &FusedSolution, b: &FusedSolution) -> std::cmp::Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.cls.label().cmp(b.cls.label()))
}

/// Fused areas for one query line.
#[derive(Debug, Clone, PartialEq)]
pub struct LineResult {
    pub line: QueryLineId,
    pub areas: Vec<Area>,
}

impl LineResult {
    pub fn option_count(&self) -> usize {
        self.areas.iter().map(|a| a.options.len()).sum()
    }
}

fn single_modality<'a>(branch: &'a [Detection], which: &str) -> Result<Option<&'a ModalityId>> {
    let Some(first) = branch.first() else {
        return Ok(None);
    };
    if let Some(d) = branch.iter().find(|d| d.modality != first.modality) {
        return Err(Error::contract(format!(
            "{which} mixes modalities {} and {}",
            first.modality, d.modality
        )));
    }
    Ok(Some(&first.modality))
}

/// Weighted detections paired with their unweighted scores.
fn weighted_entries(
    y1: &[Detection],
    y2: &[Detection],
    cfg: &FusionConfig,
) -> Result<Vec<(Detection, f64)>> {
    cfg.validate()?;
    let m1 = single_modality(y1, "branch 1")?;
    let m2 = single_modality(y2, "branch 2")?;
    if let (Some(a), Some(b)) = (m1, m2) {
        if a == b {
            return Err(Error::contract(format!("both branches use modality {a}")));
        }
    }
    let mut weighted = Vec::with_capacity(y1.len() + y2.len());
    for (branch, w) in [(y1, cfg.w1), (y2, cfg.w2)] {
        for d in branch {
            if d.score() * w >= cfg.epsilon_prune {
                weighted.push((d.scaled(w), d.score()));
            }
        }
    }
    Ok(weighted)
}

/// Scales branch 1 by `w1` and branch 2 by `w2`, concatenates them (branch 1
/// first) and drops entries whose weighted score falls below the prune floor.
pub fn weighted_concat(
    y1: &[Detection],
    y2: &[Detection],
    cfg: &FusionConfig,
) -> Result<Vec<Detection>> {
    Ok(weighted_entries(y1, y2, cfg)?
        .into_iter()
        .map(|(d, _)| d)
        .collect())
}

/// Agreement bonus `delta * (1 - |s1 - s2| / max(s1, s2))`.
pub fn gain(s1: f64, s2: f64, delta: f64) -> Result<f64> {
    check_score(s1)?;
    check_score(s2)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid("delta", format!("{delta} not in (0, 1]")));
    }
    let hi = s1.max(s2);
    if hi == 0.0 {
        return Err(Error::UndefinedGain);
    }
    Ok(delta * (1.0 - (s1 - s2).abs() / hi))
}

/// Fuses two overlapping same-class solutions. Returns the fused solution and
/// the amount by which the raw fused score overshot 1 (zero if it did not).
pub fn fuse_pair(
    a: &FusedSolution,
    b: &FusedSolution,
    cfg: &FusionConfig,
) -> Result<(FusedSolution, f64)> {
    if a.cls != b.cls {
        return Err(Error::contract(format!(
            "cannot fuse different classes {} and {}",
            a.cls, b.cls
        )));
    }
    let ov = cfg.overlap.measure(&a.bbox, &b.bbox);
    if ov < cfg.tau_overlap {
        return Err(Error::contract(format!(
            "overlap {ov} of {} solutions is below {}",
            a.cls, cfg.tau_overlap
        )));
    }
    let raw = a.score.max(b.score) + gain(a.score, b.score, cfg.delta)?;
    let (score, excess) = if raw <= 1.0 { (raw, 0.0) } else { (1.0, raw - 1.0) };
    let bbox = if a.score > b.score {
        a.bbox
    } else if b.score > a.score {
        b.bbox
    } else {
        a.bbox.union(&b.bbox)
    };
    let mut provenance = a.provenance.clone();
    provenance.extend(b.provenance.iter().cloned());
    Ok((
        FusedSolution {
            cls: a.cls.clone(),
            bbox,
            score,
            provenance,
        },
        excess,
    ))
}

/// Lowers every member except `fused` itself by `excess`, flooring at zero.
pub fn redistribute_excess(
    members: &[FusedSolution],
    fused: &FusedSolution,
    excess: f64,
) -> Vec<FusedSolution> {
    members
        .iter()
        .map(|m| {
            let mut m = m.clone();
            if excess > 0.0 && m != *fused {
                m.score = (m.score - excess).max(0.0);
            }
            m
        })
        .collect()
}

struct DisjointSets(Vec<usize>);

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so the representative is stable
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Connected components of the overlap graph over `items`, each component
/// listed in ascending index order, components ordered by smallest index.
fn overlap_components(items: &[usize], boxes: impl Fn(usize) -> BBox, cfg: &FusionConfig) -> Vec<Vec<usize>> {
    let mut by_x: Vec<usize> = (0..items.len()).collect();
    by_x.sort_by(|&a, &b| boxes(items[a]).x0().total_cmp(&boxes(items[b]).x0()).then(a.cmp(&b)));
    let mut sets = DisjointSets::new(items.len());
    for (pos, &i) in by_x.iter().enumerate() {
        let bi = boxes(items[i]);
        for &j in &by_x[pos + 1..] {
            let bj = boxes(items[j]);
            // both overlap measures are zero once the x intervals separate
            if bj.x0() >= bi.x1() {
                break;
            }
            if cfg.overlaps(&bi, &bj) {
                sets.union(i, j);
            }
        }
    }
    // roots are the smallest member, so first sight of a root is in index order
    let mut slot_of_root = vec![usize::MAX; items.len()];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &item) in items.iter().enumerate() {
        let root = sets.find(i);
        if slot_of_root[root] == usize::MAX {
            slot_of_root[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot_of_root[root]].push(item);
    }
    groups
}

/// Fuses both branches of one line into areas.
pub fn fuse_line(
    line: &QueryLineId,
    y1: &[Detection],
    y2: &[Detection],
    cfg: &FusionConfig,
) -> Result<LineResult> {
    let entries = weighted_entries(y1, y2, cfg)?;
    let mut slots: Vec<Option<FusedSolution>> = entries
        .into_iter()
        .map(|(d, original)| {
            Some(FusedSolution {
                provenance: vec![(d.modality.clone(), original)],
                score: d.score(),
                cls: d.cls,
                bbox: d.bbox,
            })
        })
        .collect();

    let label = |i: usize| slots[i].as_ref().expect("all slots filled").cls.label();
    let mut by_label: Vec<usize> = (0..slots.len()).collect();
    by_label.sort_by(|&a, &b| label(a).cmp(label(b)).then(a.cmp(&b)));
    let bbox_of = |slots: &[Option<FusedSolution>], i: usize| slots[i].as_ref().expect("live").bbox;
    let mut components: Vec<Vec<usize>> = Vec::new();
    for members in by_label.chunk_by(|&a, &b| label(a) == label(b)).filter(|m| m.len() > 1) {
        components.extend(
            overlap_components(members, |i| bbox_of(&slots, i), cfg)
                .into_iter()
                .filter(|c| c.len() > 1),
        );
    }
    let max_score = |c: &[usize]| {
        c.iter()
            .map(|&i| slots[i].as_ref().expect("live").score)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut ordered: Vec<(f64, Vec<usize>)> = components
        .into_iter()
        .map(|c| (max_score(&c), c))
        .collect();
    // descending max score; ties by first index (class-order independent of labels)
    ordered.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1[0].cmp(&b.1[0])));

    for (_, component) in ordered {
        fuse_component(&mut slots, &component, cfg)?;
    }

    let live: Vec<usize> = (0..slots.len()).filter(|&i| slots[i].is_some()).collect();
    let groups = overlap_components(&live, |i| bbox_of(&slots, i), cfg);
    let mut areas: Vec<(BBox, Vec<FusedSolution>)> = groups
        .into_iter()
        .map(|g| {
            let mut all: Vec<FusedSolution> = g.iter().map(|&i| slots[i].take().expect("live")).collect();
            all.sort_by(|a, b| option_order(a, b).then_with(|| a.bbox.x0().total_cmp(&b.bbox.x0())));
            let mut members: Vec<FusedSolution> = Vec::with_capacity(all.len());
            for m in all {
                if !members.iter().any(|k| k.cls == m.cls) {
                    members.push(m);
                }
            }
            let extent = members
                .iter()
                .skip(1)
                .fold(members[0].bbox, |acc, m| acc.union(&m.bbox));
            (extent, members)
        })
        .collect();
    areas.sort_by(|a, b| {
        let (ea, eb) = (&a.0, &b.0);
        ea.x0()
            .total_cmp(&eb.x0())
            .then(ea.x1().total_cmp(&eb.x1()))
            .then(ea.y0().total_cmp(&eb.y0()))
            .then(ea.y1().total_cmp(&eb.y1()))
            .then_with(|| a.1[0].cls.cmp(&b.1[0].cls))
    });
    let areas = areas
        .into_iter()
        .enumerate()
        .map(|(area_id, (extent, options))| Area {
            area_id,
            extent,
            options,
        })
        .collect();
    Ok(LineResult {
        line: line.clone(),
        areas,
    })
}

/// Both branches of one line, ready for fusion.
#[derive(Debug, Clone, PartialEq)]
pub struct LineInput {
    pub line: QueryLineId,
    pub y1: Vec<Detection>,
    pub y2: Vec<Detection>,
}

/// Fuses every line in parallel; results keep the input order.
pub fn fuse_corpus(inputs: &[LineInput], cfg: &FusionConfig) -> Result<Vec<LineResult>> {
    cfg.validate()?;
    inputs
        .par_iter()
        .map(|l| fuse_line(&l.line, &l.y1, &l.y2, cfg))
        .collect()
}

/// Repeatedly fuses the highest-ranked overlapping pair inside one same-class
/// component until no member overlaps another.
fn fuse_component(
    slots: &mut [Option<FusedSolution>],
    component: &[usize],
    cfg: &FusionConfig,
) -> Result<()> {
    loop {
        let mut live: Vec<usize> = component.iter().copied().filter(|&i| slots[i].is_some()).collect();
        if live.len() < 2 {
            return Ok(());
        }
        live.sort_by(|&a, &b| {
            let (sa, sb) = (slots[a].as_ref().unwrap(), slots[b].as_ref().unwrap());
            sb.score.total_cmp(&sa.score).then(a.cmp(&b))
        });
        let pair = live.iter().enumerate().find_map(|(p, &i)| {
            let bi = slots[i].as_ref().unwrap().bbox;
            live[p + 1..]
                .iter()
                .find(|&&j| cfg.overlaps(&bi, &slots[j].as_ref().unwrap().bbox))
                .map(|&j| (i, j))
        });
        let Some((keep, drop)) = pair else {
            return Ok(());
        };
        let (fused, excess) = fuse_pair(
            slots[keep].as_ref().unwrap(),
            slots[drop].as_ref().unwrap(),
            cfg,
        )?;
        slots[drop] = None;
        if excess > 0.0 {
            for (j, slot) in slots.iter_mut().enumerate() {
                if j == keep {
                    continue;
                }
                if let Some(other) = slot {
                    if cfg.overlaps(&fused.bbox, &other.bbox) {
                        other.score = (other.score - excess).max(0.0);
                        if other.score < cfg.epsilon_prune {
                            *slot = None;
                        }
                    }
                }
            }
        }
        slots[keep] = Some(fused);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cls(s: &str) -> NGramClass {
        NGramClass::new(s).unwrap()
    }

    fn bx(x0: f64, x1: f64) -> BBox {
        BBox::new(x0, 0.0, x1, 10.0).unwrap()
    }

    fn det(label: &str, x0: f64, x1: f64, score: f64, modality: &str) -> Detection {
        Detection::new(cls(label), bx(x0, x1), score, ModalityId::new(modality).unwrap()).unwrap()
    }

    fn sol(label: &str, x0: f64, x1: f64, score: f64) -> FusedSolution {
        FusedSolution::from_detection(&det(label, x0, x1, score, "m"))
    }

    fn line() -> QueryLineId {
        QueryLineId::new("l", 200, 10).unwrap()
    }

    fn cfg(w1: f64, w2: f64) -> FusionConfig {
        FusionConfig::default().with_weights(w1, w2)
    }

    #[test]
    fn concat_degenerate_weight_prunes_branch() {
        let y1 = vec![det("a", 0., 10., 0.8, "v"), det("b", 20., 30., 0.3, "v")];
        let y2 = vec![det("a", 0., 10., 0.6, "p")];
        let out = weighted_concat(&y1, &y2, &cfg(1.0, 0.0)).unwrap();
        assert_eq!(out, y1);
    }

    #[test]
    fn concat_halves_scores() {
        let y1 = vec![det("a", 0., 10., 0.8, "v")];
        let y2 = vec![det("b", 0., 10., 0.6, "p")];
        let out = weighted_concat(&y1, &y2, &cfg(0.5, 0.5)).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].score(), 0.4);
        assert_eq!(out[1].score(), 0.3);
        assert_eq!(out[0].cls.label(), "a");
    }

    #[test]
    fn concat_uneven_weights() {
        let y1 = vec![det("a", 0., 10., 0.9, "v")];
        let y2 = vec![det("a", 0., 10., 0.9, "p")];
        let out = weighted_concat(&y1, &y2, &cfg(0.7, 0.3)).unwrap();
        assert!((out[0].score() - 0.63).abs() < 1e-12);
        assert!((out[1].score() - 0.27).abs() < 1e-12);
    }

    #[test]
    fn concat_rejects_mixed_modalities() {
        let y1 = vec![det("a", 0., 10., 0.9, "v"), det("a", 0., 10., 0.9, "p")];
        assert!(matches!(
            weighted_concat(&y1, &[], &cfg(0.5, 0.5)),
            Err(Error::Contract(_))
        ));
        let y2 = vec![det("a", 0., 10., 0.9, "v")];
        assert!(weighted_concat(&y1[..1], &y2, &cfg(0.5, 0.5)).is_err());
    }

    #[test]
    fn gain_examples() {
        assert!((gain(0.5, 0.5, 0.1).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(gain(0.9, 0.0, 0.1).unwrap(), 0.0);
        assert!((gain(0.8, 0.6, 0.1).unwrap() - 0.075).abs() < 1e-12);
        assert!(matches!(gain(0.0, 0.0, 0.1), Err(Error::UndefinedGain)));
    }

    #[test]
    fn fuse_pair_examples() {
        let (f, e) = fuse_pair(&sol("a", 0., 10., 0.5), &sol("a", 0., 10., 0.5), &cfg(1., 1.)).unwrap();
        assert!((f.score() - 0.6).abs() < 1e-12);
        assert_eq!(e, 0.0);
        assert_eq!(f.provenance().len(), 2);

        let (f, e) = fuse_pair(&sol("a", 0., 10., 0.8), &sol("a", 1., 11., 0.6), &cfg(1., 1.)).unwrap();
        assert!((f.score() - 0.875).abs() < 1e-12);
        assert_eq!(e, 0.0);
        assert_eq!(f.bbox, bx(0., 10.));

        let (f, e) = fuse_pair(&sol("a", 0., 10., 0.98), &sol("a", 0., 10., 0.94), &cfg(1., 1.)).unwrap();
        let raw = 0.98 + 0.1 * (1.0 - 0.04 / 0.98);
        assert_eq!(f.score(), 1.0);
        assert!((e - (raw - 1.0)).abs() < 1e-12);
        assert!((e - 0.0759183673).abs() < 1e-9);
    }

    #[test]
    fn fuse_pair_tie_unions_boxes() {
        let (f, _) = fuse_pair(&sol("a", 0., 10., 0.5), &sol("a", 2., 12., 0.5), &cfg(1., 1.)).unwrap();
        assert_eq!(f.bbox, bx(0., 12.));
    }

    #[test]
    fn fuse_pair_contract() {
        let c = cfg(1., 1.);
        assert!(fuse_pair(&sol("a", 0., 10., 0.5), &sol("b", 0., 10., 0.5), &c).is_err());
        assert!(fuse_pair(&sol("a", 0., 10., 0.5), &sol("a", 8., 18., 0.5), &c).is_err());
    }

    #[test]
    fn redistribute_examples() {
        let fused = sol("a", 0., 10., 1.0);
        let members = vec![sol("x", 0., 10., 0.30), sol("y", 0., 10., 0.05)];
        assert_eq!(redistribute_excess(&members, &fused, 0.0), members);
        let out = redistribute_excess(&members, &fused, 0.0759);
        assert!((out[0].score() - 0.2241).abs() < 1e-12);
        assert_eq!(out[1].score(), 0.0);
        assert!(redistribute_excess(&[], &fused, 0.5).is_empty());
        let with_self = redistribute_excess(&[fused.clone()], &fused, 0.5);
        assert_eq!(with_self[0].score(), 1.0);
    }

    #[test]
    fn single_detection_passes_through() {
        let y1 = vec![det("the", 0., 10., 0.8, "v")];
        let r = fuse_line(&line(), &y1, &[], &cfg(0.5, 0.5)).unwrap();
        assert_eq!(r.areas.len(), 1);
        assert_eq!(r.areas[0].options().len(), 1);
        assert!((r.areas[0].options()[0].score() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn two_branch_agreement_raises_score() {
        let y1 = vec![det("the", 0., 30., 0.7, "visual")];
        let y2 = vec![det("the", 2., 31., 0.55, "phoc")];
        let r = fuse_line(&line(), &y1, &y2, &cfg(1., 1.)).unwrap();
        assert_eq!(r.areas.len(), 1);
        let opts = r.areas[0].options();
        assert_eq!(opts.len(), 1);
        assert!(opts[0].score() > 0.7);
        assert_eq!(opts[0].provenance().len(), 2);
    }

    #[test]
    fn three_way_chain() {
        let y1 = vec![det("a", 0., 10., 0.5, "v"), det("a", 0., 10., 0.5, "v")];
        let y2 = vec![det("a", 0., 10., 0.5, "p")];
        let r = fuse_line(&line(), &y1, &y2, &cfg(1., 1.)).unwrap();
        let opts = r.areas[0].options();
        assert_eq!(opts.len(), 1);
        let expected = 0.6 + 0.1 * (1.0 - 0.1 / 0.6);
        assert!((opts[0].score() - expected).abs() < 1e-12);
        assert!((opts[0].score() - 0.683333333333).abs() < 1e-9);
    }

    #[test]
    fn clamp_redistributes_to_competitors() {
        let y1 = vec![det("a", 0., 10., 0.98, "v"), det("b", 0., 10., 0.30, "v")];
        let y2 = vec![det("a", 0., 10., 0.94, "p"), det("c", 0., 10., 0.05, "p")];
        let r = fuse_line(&line(), &y1, &y2, &cfg(1., 1.)).unwrap();
        let opts = r.areas[0].options();
        let excess = 0.98 + 0.1 * (1.0 - 0.04 / 0.98) - 1.0;
        assert_eq!(opts.len(), 2, "c is pushed to zero and pruned");
        assert_eq!(opts[0].cls.label(), "a");
        assert_eq!(opts[0].score(), 1.0);
        assert!((opts[1].score() - (0.30 - excess)).abs() < 1e-12);
    }

    #[test]
    fn areas_hold_one_option_per_class() {
        // two b's that do not overlap each other but are bridged by an a
        let y1 = vec![
            det("b", 0., 6., 0.6, "v"),
            det("a", 0., 10., 0.7, "v"),
            det("b", 5., 10., 0.4, "v"),
        ];
        let r = fuse_line(&line(), &y1, &[], &cfg(1., 0.)).unwrap();
        assert_eq!(r.areas.len(), 1);
        let labels: Vec<&str> = r.areas[0].options().iter().map(|o| o.cls.label()).collect();
        assert_eq!(labels, ["a", "b"]);
        assert_eq!(r.areas[0].options()[1].score(), 0.6);
    }

    #[test]
    fn ties_sorted_by_label() {
        let y1 = vec![det("zz", 0., 10., 0.5, "v"), det("aa", 0., 10., 0.5, "v")];
        let r = fuse_line(&line(), &y1, &[], &cfg(1., 0.)).unwrap();
        let labels: Vec<&str> = r.areas[0].options().iter().map(|o| o.cls.label()).collect();
        assert_eq!(labels, ["aa", "zz"]);
    }

    #[test]
    fn area_ids_follow_position() {
        let y1 = vec![det("a", 50., 60., 0.5, "v"), det("b", 0., 10., 0.9, "v")];
        let r = fuse_line(&line(), &y1, &[], &cfg(1., 0.)).unwrap();
        assert_eq!(r.areas[0].options()[0].cls.label(), "b");
        assert_eq!(r.areas[1].area_id, 1);
    }

    fn arb_branch(modality: &'static str) -> impl Strategy<Value = Vec<Detection>> {
        prop::collection::vec(
            (0usize..4, 0u32..150, 5u32..40, 0.0f64..=1.0),
            0..12,
        )
        .prop_map(move |v| {
            v.into_iter()
                .map(|(c, x, w, s)| det(["a", "b", "c", "d"][c], x as f64, (x + w) as f64, s, modality))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn gain_laws(s1 in 0.0f64..=1.0, s2 in 0.0f64..=1.0, delta in 0.001f64..=1.0) {
            prop_assume!(s1 > 0.0 || s2 > 0.0);
            let g = gain(s1, s2, delta).unwrap();
            prop_assert!((0.0..=delta).contains(&g));
            prop_assert_eq!(g, gain(s2, s1, delta).unwrap());
        }

        #[test]
        fn gain_shrinks_with_disagreement(hi in 0.01f64..=1.0, d1 in 0.0f64..=1.0, d2 in 0.0f64..=1.0) {
            let (lo_gap, hi_gap) = if d1 <= d2 { (d1 * hi, d2 * hi) } else { (d2 * hi, d1 * hi) };
            let near = gain(hi, hi - lo_gap, 0.1).unwrap();
            let far = gain(hi, hi - hi_gap, 0.1).unwrap();
            prop_assert!(near >= far);
        }

        #[test]
        fn fuse_line_invariants(y1 in arb_branch("v"), y2 in arb_branch("p"), w1 in 0.0f64..=1.0, w2 in 0.0f64..=1.0) {
            let c = cfg(w1, w2);
            let r = fuse_line(&line(), &y1, &y2, &c).unwrap();
            for (i, area) in r.areas.iter().enumerate() {
                prop_assert_eq!(area.area_id, i);
                prop_assert!(Area::new(area.area_id, area.extent, area.options().to_vec()).is_ok());
                for o in area.options() {
                    prop_assert!((0.0..=1.0).contains(&o.score()));
                }
            }
            let again = fuse_line(&line(), &y1, &y2, &c).unwrap();
            prop_assert_eq!(r, again);
        }

        #[test]
        fn degenerate_weights_match_single_branch(y1 in arb_branch("v"), y2 in arb_branch("p")) {
            let both = fuse_line(&line(), &y1, &y2, &cfg(1.0, 0.0)).unwrap();
            let alone = fuse_line(&line(), &y1, &[], &cfg(1.0, 1.0)).unwrap();
            prop_assert_eq!(both, alone);
        }

        #[test]
        fn uniform_rescaling_keeps_unfused_ranking(y1 in arb_branch("v"), c in 0.05f64..=1.0) {
            // no fusion happens when every class occurs once
            let mut seen = BTreeSet::new();
            let y1: Vec<Detection> = y1.into_iter().filter(|d| seen.insert(d.cls.clone())).collect();
            let base = fuse_line(&line(), &y1, &[], &cfg(1.0, 1.0)).unwrap();
            let scaled = fuse_line(&line(), &y1, &[], &cfg(c, c)).unwrap();
            let labels = |r: &LineResult| -> Vec<Vec<String>> {
                r.areas.iter().map(|a| a.options().iter().map(|o| o.cls.to_string()).collect()).collect()
            };
            let all_kept = y1.iter().all(|d| d.score() * c >= 1e-9);
            if all_kept {
                prop_assert_eq!(labels(&base), labels(&scaled));
            }
        }
    }
}
