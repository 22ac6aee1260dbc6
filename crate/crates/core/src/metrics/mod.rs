//! Precision and recall at k for spotting results.
//!
//! A line contributes four counts: ground-truth occurrences hit within the
//! top-k options of some area (`true_relevant_at_k`), the number of
//! retrieved n-grams (areas by default), all ground-truth occurrences, and
//! the in-vocabulary ground-truth occurrences. Corpus figures are computed
//! from summed counts.

mod matching;

use std::collections::{BTreeMap, BTreeSet};
use std::ops::AddAssign;

pub use matching::{brute_force_max_matching, lex_min_max_matching};

use crate::error::{Error, Result};
use crate::fusion::LineResult;
use crate::model::{FusionConfig, GroundTruthLine, RetrievedCount, Vocabulary};

/// Rank cutoff, at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KParam(usize);

impl KParam {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("k", "rank cutoff must be at least 1"));
        }
        Ok(Self(k))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LineCounts {
    pub true_relevant_at_k: usize,
    pub retrieved: usize,
    pub relevant: usize,
    pub relevant_invoc: usize,
}

impl AddAssign for LineCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.true_relevant_at_k += rhs.true_relevant_at_k;
        self.retrieved += rhs.retrieved;
        self.relevant += rhs.relevant;
        self.relevant_invoc += rhs.relevant_invoc;
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn precision_at_k(counts: &LineCounts) -> f64 {
    ratio(counts.true_relevant_at_k, counts.retrieved)
}

pub fn recall_at_k(counts: &LineCounts) -> f64 {
    ratio(counts.true_relevant_at_k, counts.relevant)
}

pub fn recall_at_k_invoc(counts: &LineCounts) -> f64 {
    ratio(counts.true_relevant_at_k, counts.relevant_invoc)
}

/// Metrics and underlying counts at one cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMetrics {
    pub counts: LineCounts,
    pub precision: f64,
    pub recall: f64,
    pub recall_invoc: f64,
}

impl KMetrics {
    pub fn from_counts(counts: LineCounts) -> Self {
        Self {
            counts,
            precision: precision_at_k(&counts),
            recall: recall_at_k(&counts),
            recall_invoc: recall_at_k_invoc(&counts),
        }
    }

    pub fn get(&self, metric: MetricKind) -> f64 {
        match metric {
            MetricKind::Precision => self.precision,
            MetricKind::Recall => self.recall,
            MetricKind::RecallInVoc => self.recall_invoc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetricKind {
    Precision,
    Recall,
    RecallInVoc,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::Precision, MetricKind::Recall, MetricKind::RecallInVoc];

    /// Column name such as `p@1` or `r@5_InVoc`.
    pub fn column(self, k: usize) -> String {
        match self {
            MetricKind::Precision => format!("p@{k}"),
            MetricKind::Recall => format!("r@{k}"),
            MetricKind::RecallInVoc => format!("r@{k}_InVoc"),
        }
    }

    /// Parses a column name back into `(metric, k)`.
    pub fn parse_column(name: &str) -> Option<(MetricKind, usize)> {
        let (head, tail) = name.split_once('@')?;
        let (k, invoc) = match tail.strip_suffix("_InVoc") {
            Some(k) => (k, true),
            None => (tail, false),
        };
        let k: usize = k.parse().ok().filter(|&k| k > 0)?;
        match (head, invoc) {
            ("p", false) => Some((MetricKind::Precision, k)),
            ("r", false) => Some((MetricKind::Recall, k)),
            ("r", true) => Some((MetricKind::RecallInVoc, k)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    Line(String),
    Corpus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub scope: Scope,
    pub per_k: BTreeMap<usize, KMetrics>,
    /// Zero-denominator conditions, e.g. `no_retrieved`.
    pub flags: Vec<String>,
}

impl MetricsReport {
    pub fn from_counts(scope: Scope, per_k: BTreeMap<usize, LineCounts>) -> Self {
        let flags = per_k
            .values()
            .next()
            .map(|c| {
                let mut flags = Vec::new();
                if c.retrieved == 0 {
                    flags.push("no_retrieved".to_string());
                }
                if c.relevant == 0 {
                    flags.push("no_relevant".to_string());
                }
                if c.relevant_invoc == 0 {
                    flags.push("no_relevant_invoc".to_string());
                }
                flags
            })
            .unwrap_or_default();
        Self {
            scope,
            per_k: per_k
                .into_iter()
                .map(|(k, c)| (k, KMetrics::from_counts(c)))
                .collect(),
            flags,
        }
    }

    pub fn metric(&self, metric: MetricKind, k: usize) -> Option<f64> {
        self.per_k.get(&k).map(|m| m.get(metric))
    }
}

/// Corpus report together with the per-line reports (sorted by line id).
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusReport {
    pub corpus: MetricsReport,
    pub lines: Vec<MetricsReport>,
}

fn check_same_line(result: &LineResult, gt: &GroundTruthLine) -> Result<()> {
    if result.line.id() != gt.line().id() {
        return Err(Error::contract(format!(
            "result for line {:?} compared with ground truth of line {:?}",
            result.line.id(),
            gt.line().id()
        )));
    }
    Ok(())
}

/// For each area, the adjacent occurrences with the best (1-based) rank at
/// which one of the area's options hits them.
fn eligibility_ranks(result: &LineResult, gt: &GroundTruthLine, cfg: &FusionConfig) -> Vec<Vec<(usize, usize)>> {
    let occurrences = gt.occurrences();
    result
        .areas
        .iter()
        .map(|area| {
            let mut edges: Vec<(usize, usize)> = Vec::new();
            for (g, occ) in occurrences.iter().enumerate() {
                // no shared columns means zero overlap under either measure
                if occ.bbox.x1() <= area.extent.x0() || occ.bbox.x0() >= area.extent.x1() {
                    continue;
                }
                let hit = area
                    .options()
                    .iter()
                    .position(|o| o.cls == occ.cls && cfg.matches(&o.bbox, &occ.bbox));
                if let Some(rank0) = hit {
                    edges.push((g, rank0 + 1));
                }
            }
            edges
        })
        .collect()
}

fn adjacency_at(ranks: &[Vec<(usize, usize)>], k: usize) -> Vec<Vec<usize>> {
    ranks
        .iter()
        .map(|edges| edges.iter().filter(|&&(_, r)| r <= k).map(|&(g, _)| g).collect())
        .collect()
}

/// Maximum one-to-one assignment of areas to ground-truth occurrences, where
/// an area may take an occurrence if one of its top-k options has the
/// occurrence's class and overlaps it by at least `tau_match`.
///
/// Returns `(area_id, occurrence index)` pairs; among maximum matchings the
/// lexicographically smallest is chosen.
pub fn match_at_k(
    result: &LineResult,
    gt: &GroundTruthLine,
    k: KParam,
    cfg: &FusionConfig,
) -> Result<BTreeSet<(usize, usize)>> {
    check_same_line(result, gt)?;
    let adj = adjacency_at(&eligibility_ranks(result, gt, cfg), k.get());
    Ok(lex_min_max_matching(&adj, gt.occurrences().len())
        .into_iter()
        .map(|(a, g)| (result.areas[a].area_id, g))
        .collect())
}

fn check_vocabulary(result: &LineResult, vocab: &Vocabulary) -> Result<()> {
    for area in &result.areas {
        if let Some(o) = area.options().iter().find(|o| !vocab.contains(o.cls.label())) {
            return Err(Error::contract(format!(
                "line {:?} predicts class {} which is not in the vocabulary",
                result.line.id(),
                o.cls
            )));
        }
    }
    Ok(())
}

fn static_counts(result: &LineResult, gt: &GroundTruthLine, vocab: &Vocabulary, cfg: &FusionConfig) -> LineCounts {
    LineCounts {
        true_relevant_at_k: 0,
        retrieved: match cfg.retrieved {
            RetrievedCount::Areas => result.areas.len(),
            RetrievedCount::Options => result.option_count(),
        },
        relevant: gt.occurrences().len(),
        relevant_invoc: gt
            .occurrences()
            .iter()
            .filter(|o| vocab.contains(o.cls.label()))
            .count(),
    }
}

/// Counts for every requested cutoff, sharing the eligibility computation.
pub(crate) fn line_counts_multi(
    result: &LineResult,
    gt: &GroundTruthLine,
    vocab: &Vocabulary,
    ks: &[KParam],
    cfg: &FusionConfig,
) -> Vec<LineCounts> {
    let base = static_counts(result, gt, vocab, cfg);
    let ranks = eligibility_ranks(result, gt, cfg);
    let n_gt = gt.occurrences().len();
    ks.iter()
        .map(|k| LineCounts {
            true_relevant_at_k: lex_min_max_matching(&adjacency_at(&ranks, k.get()), n_gt).len(),
            ..base
        })
        .collect()
}

/// Per-line counts at cutoff `k`. Every predicted class must belong to `vocab`.
pub fn line_counts(
    result: &LineResult,
    gt: &GroundTruthLine,
    vocab: &Vocabulary,
    k: KParam,
    cfg: &FusionConfig,
) -> Result<LineCounts> {
    check_same_line(result, gt)?;
    check_vocabulary(result, vocab)?;
    Ok(line_counts_multi(result, gt, vocab, &[k], cfg)[0])
}

/// Pairs results with ground truth by line id, sorted by id.
pub(crate) fn align<'a, T>(
    items: &'a [T],
    item_id: impl Fn(&T) -> &str,
    gts: &'a [GroundTruthLine],
) -> Result<Vec<(&'a T, &'a GroundTruthLine)>> {
    let mut by_id: BTreeMap<&str, &T> = BTreeMap::new();
    let mut offenders: BTreeSet<String> = BTreeSet::new();
    for item in items {
        if by_id.insert(item_id(item), item).is_some() {
            offenders.insert(format!("{} (duplicate result)", item_id(item)));
        }
    }
    let mut gt_by_id: BTreeMap<&str, &GroundTruthLine> = BTreeMap::new();
    for gt in gts {
        if gt_by_id.insert(gt.line().id(), gt).is_some() {
            offenders.insert(format!("{} (duplicate ground truth)", gt.line().id()));
        }
    }
    for id in by_id.keys() {
        if !gt_by_id.contains_key(id) {
            offenders.insert(format!("{id} (no ground truth)"));
        }
    }
    for id in gt_by_id.keys() {
        if !by_id.contains_key(id) {
            offenders.insert(format!("{id} (no result)"));
        }
    }
    if !offenders.is_empty() {
        let list: Vec<String> = offenders.into_iter().collect();
        return Err(Error::contract(format!("unaligned line ids: {}", list.join(", "))));
    }
    Ok(gt_by_id
        .into_iter()
        .map(|(id, gt)| (by_id[id], gt))
        .collect())
}

fn sorted_ks(ks: &[KParam]) -> Result<Vec<KParam>> {
    let ks: Vec<KParam> = ks.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if ks.is_empty() {
        return Err(Error::contract("no rank cutoffs requested"));
    }
    Ok(ks)
}

/// Micro-averaged corpus metrics plus per-line reports.
pub fn evaluate_corpus(
    results: &[LineResult],
    gts: &[GroundTruthLine],
    vocab: &Vocabulary,
    ks: &[KParam],
    cfg: &FusionConfig,
) -> Result<CorpusReport> {
    cfg.validate()?;
    let ks = sorted_ks(ks)?;
    let pairs = align(results, |r| r.line.id(), gts)?;
    let mut totals = vec![LineCounts::default(); ks.len()];
    let mut lines = Vec::with_capacity(pairs.len());
    for (result, gt) in pairs {
        check_vocabulary(result, vocab)?;
        let counts = line_counts_multi(result, gt, vocab, &ks, cfg);
        for (t, c) in totals.iter_mut().zip(&counts) {
            *t += *c;
        }
        lines.push(MetricsReport::from_counts(
            Scope::Line(gt.line().id().to_string()),
            ks.iter().map(|k| k.get()).zip(counts).collect(),
        ));
    }
    let corpus = MetricsReport::from_counts(Scope::Corpus, ks.iter().map(|k| k.get()).zip(totals).collect());
    Ok(CorpusReport { corpus, lines })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::{Area, FusedSolution};
    use crate::model::{BBox, Detection, GroundTruthOccurrence, ModalityId, NGramClass, QueryLineId};

    fn cls(s: &str) -> NGramClass {
        NGramClass::new(s).unwrap()
    }

    fn bx(x0: f64) -> BBox {
        BBox::new(x0, 0.0, x0 + 10.0, 10.0).unwrap()
    }

    fn opt(label: &str, x0: f64, score: f64) -> FusedSolution {
        let d = Detection::new(cls(label), bx(x0), score, ModalityId::new("m").unwrap()).unwrap();
        FusedSolution::from_detection(&d)
    }

    fn line() -> QueryLineId {
        QueryLineId::new("line-1", 100, 10).unwrap()
    }

    /// A, B, C in vocabulary at x = 0, 20, 40; D out of vocabulary at x = 60.
    fn scenario() -> (LineResult, GroundTruthLine, Vocabulary) {
        let gt = GroundTruthLine::new(
            line(),
            [("A", 0.), ("B", 20.), ("C", 40.), ("D", 60.)]
                .iter()
                .map(|&(l, x)| GroundTruthOccurrence { cls: cls(l), bbox: bx(x) })
                .collect(),
        )
        .unwrap();
        let areas = vec![
            Area::new(0, bx(0.), vec![opt("A", 0., 0.9), opt("B", 0., 0.4)]).unwrap(),
            Area::new(1, bx(20.), vec![opt("C", 20., 0.7), opt("B", 20., 0.6)]).unwrap(),
            Area::new(2, bx(60.), vec![opt("C", 60., 0.5)]).unwrap(),
        ];
        let vocab = Vocabulary::from_counts(["A", "B", "C"].iter().map(|l| (cls(l), 5)).collect()).unwrap();
        (LineResult { line: line(), areas }, gt, vocab)
    }

    fn k(k: usize) -> KParam {
        KParam::new(k).unwrap()
    }

    #[test]
    fn scenario_counts() {
        let (r, gt, v) = scenario();
        let cfg = FusionConfig::default();
        let c1 = line_counts(&r, &gt, &v, k(1), &cfg).unwrap();
        assert_eq!(
            c1,
            LineCounts { true_relevant_at_k: 1, retrieved: 3, relevant: 4, relevant_invoc: 3 }
        );
        let c5 = line_counts(&r, &gt, &v, k(5), &cfg).unwrap();
        assert_eq!(c5.true_relevant_at_k, 2);
        assert!((precision_at_k(&c1) - 1.0 / 3.0).abs() < 1e-12);
        assert!((recall_at_k(&c1) - 0.25).abs() < 1e-12);
        assert!((recall_at_k(&c5) - 0.5).abs() < 1e-12);
        assert!((recall_at_k_invoc(&c1) - 1.0 / 3.0).abs() < 1e-12);
        assert!((recall_at_k_invoc(&c5) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(
            match_at_k(&r, &gt, k(5), &cfg).unwrap(),
            BTreeSet::from([(0, 0), (1, 1)])
        );
    }

    #[test]
    fn empty_prediction() {
        let (_, gt, v) = scenario();
        let empty = LineResult { line: line(), areas: vec![] };
        let c = line_counts(&empty, &gt, &v, k(1), &FusionConfig::default()).unwrap();
        assert_eq!(c, LineCounts { true_relevant_at_k: 0, retrieved: 0, relevant: 4, relevant_invoc: 3 });
        assert_eq!(precision_at_k(&c), 0.0);
        assert!(match_at_k(&empty, &gt, k(1), &FusionConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn guarded_zero_denominators() {
        let c = LineCounts::default();
        assert_eq!(precision_at_k(&c), 0.0);
        assert_eq!(recall_at_k(&c), 0.0);
        assert_eq!(recall_at_k_invoc(&c), 0.0);
        let hit = LineCounts { true_relevant_at_k: 1, retrieved: 1, relevant: 1, relevant_invoc: 1 };
        assert_eq!(precision_at_k(&hit), 1.0);
    }

    #[test]
    fn retrieved_can_count_options() {
        let (r, gt, v) = scenario();
        let cfg = FusionConfig { retrieved: RetrievedCount::Options, ..Default::default() };
        assert_eq!(line_counts(&r, &gt, &v, k(1), &cfg).unwrap().retrieved, 5);
    }

    #[test]
    fn mismatched_line_is_contract_error() {
        let (r, _, v) = scenario();
        let other = GroundTruthLine::new(QueryLineId::new("other", 100, 10).unwrap(), vec![]).unwrap();
        assert!(matches!(match_at_k(&r, &other, k(1), &FusionConfig::default()), Err(Error::Contract(_))));
        assert!(line_counts(&r, &other, &v, k(1), &FusionConfig::default()).is_err());
    }

    #[test]
    fn out_of_vocabulary_prediction_rejected() {
        let (r, gt, _) = scenario();
        let v = Vocabulary::from_counts([(cls("A"), 1)].into_iter().collect()).unwrap();
        assert!(line_counts(&r, &gt, &v, k(1), &FusionConfig::default()).is_err());
    }

    #[test]
    fn corpus_micro_average() {
        let (r, gt, v) = scenario();
        let cfg = FusionConfig::default();
        let one = evaluate_corpus(&[r.clone()], &[gt.clone()], &v, &[k(1), k(5)], &cfg).unwrap();
        assert_eq!(one.corpus.per_k, one.lines[0].per_k);

        let mut r2 = r.clone();
        r2.line = QueryLineId::new("line-2", 100, 10).unwrap();
        let gt2 = GroundTruthLine::new(r2.line.clone(), gt.occurrences().to_vec()).unwrap();
        let two = evaluate_corpus(&[r2, r], &[gt, gt2], &v, &[k(5), k(1)], &cfg).unwrap();
        assert_eq!(two.corpus.per_k[&1].precision, one.corpus.per_k[&1].precision);
        assert_eq!(two.corpus.per_k[&5].recall_invoc, one.corpus.per_k[&5].recall_invoc);
        assert_eq!(two.lines[0].scope, Scope::Line("line-1".into()));
    }

    #[test]
    fn summed_count_division() {
        let mut total = LineCounts { true_relevant_at_k: 1, retrieved: 2, relevant: 2, relevant_invoc: 2 };
        total += LineCounts { true_relevant_at_k: 0, retrieved: 2, relevant: 2, relevant_invoc: 2 };
        assert_eq!(precision_at_k(&total), 0.25);
    }

    #[test]
    fn unaligned_ids_listed() {
        let (r, _, v) = scenario();
        let gt = GroundTruthLine::new(QueryLineId::new("zzz", 100, 10).unwrap(), vec![]).unwrap();
        let err = evaluate_corpus(&[r], &[gt], &v, &[k(1)], &FusionConfig::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line-1") && msg.contains("zzz"), "{msg}");
    }

    #[test]
    fn column_names_round_trip() {
        for m in MetricKind::ALL {
            for k in [1, 5, 12] {
                assert_eq!(MetricKind::parse_column(&m.column(k)), Some((m, k)));
            }
        }
        assert_eq!(MetricKind::RecallInVoc.column(5), "r@5_InVoc");
        assert_eq!(MetricKind::parse_column("q@1"), None);
        assert_eq!(MetricKind::parse_column("p@0"), None);
    }

    #[test]
    fn zero_denominator_flags() {
        let empty = LineResult { line: line(), areas: vec![] };
        let gt = GroundTruthLine::new(line(), vec![]).unwrap();
        let rep = evaluate_corpus(&[empty], &[gt], &Vocabulary::default(), &[k(1)], &FusionConfig::default()).unwrap();
        assert_eq!(rep.lines[0].flags, ["no_retrieved", "no_relevant", "no_relevant_invoc"]);
    }
}
