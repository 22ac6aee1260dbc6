//! Grid search over the two branch weights.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fusion::fuse_line;
use crate::metrics::{line_counts_multi, KParam, LineCounts, MetricKind, MetricsReport, Scope};
use crate::model::{Detection, FusionConfig, GroundTruthLine, Vocabulary};

/// Inclusive weight lattice `w_min, w_min + step, …, w_max`, used for both weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub w_min: f64,
    pub w_max: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            w_min: 0.0,
            w_max: 1.0,
            step: 0.1,
        }
    }
}

const LATTICE_TOL: f64 = 1e-9;

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |detail: String| Err(Error::invalid("grid spec", detail));
        if !(self.w_min.is_finite() && self.w_max.is_finite() && self.step.is_finite()) {
            return bad(format!("non-finite value in {self:?}"));
        }
        if self.w_min < 0.0 || self.w_max > 1.0 {
            return bad(format!("weights must stay in [0, 1], got [{}, {}]", self.w_min, self.w_max));
        }
        if self.w_min > self.w_max {
            return bad(format!("w_min {} exceeds w_max {}", self.w_min, self.w_max));
        }
        if self.step <= 0.0 {
            return bad(format!("step {} must be positive", self.step));
        }
        let span = (self.w_max - self.w_min) / self.step;
        if (span - span.round()).abs() > LATTICE_TOL {
            return bad(format!(
                "range [{}, {}] is not a whole number of {} steps",
                self.w_min, self.w_max, self.step
            ));
        }
        Ok(())
    }

    /// Lattice values, rounded to 12 decimals so that e.g. `3 × 0.1` is `0.3`.
    pub fn values(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let n = ((self.w_max - self.w_min) / self.step).round() as usize;
        Ok((0..=n)
            .map(|i| {
                let w = if i == n { self.w_max } else { self.w_min + i as f64 * self.step };
                (w * 1e12).round() / 1e12
            })
            .collect())
    }
}

/// Metrics of one `(w1, w2)` lattice point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub w1: f64,
    pub w2: f64,
    pub report: MetricsReport,
}

/// Per-line detections of one branch, keyed by line id.
pub type BranchCorpus = BTreeMap<String, Vec<Detection>>;

/// Lines in id order with both branches' detections.
pub(crate) struct PreparedCorpus<'a> {
    lines: Vec<(&'a GroundTruthLine, &'a [Detection], &'a [Detection])>,
}

pub(crate) fn prepare<'a>(
    y1: &'a BranchCorpus,
    y2: &'a BranchCorpus,
    gts: &'a [GroundTruthLine],
    vocab: &Vocabulary,
) -> Result<PreparedCorpus<'a>> {
    let mut by_id: BTreeMap<&str, &GroundTruthLine> = BTreeMap::new();
    for gt in gts {
        if by_id.insert(gt.line().id(), gt).is_some() {
            return Err(Error::contract(format!("duplicate ground truth line {:?}", gt.line().id())));
        }
    }
    for (name, corpus) in [("branch 1", y1), ("branch 2", y2)] {
        let unknown: Vec<&str> = corpus
            .keys()
            .filter(|id| !by_id.contains_key(id.as_str()))
            .map(String::as_str)
            .collect();
        if !unknown.is_empty() {
            return Err(Error::contract(format!(
                "{name} has detections for lines without ground truth: {}",
                unknown.join(", ")
            )));
        }
        for (id, dets) in corpus {
            if let Some(d) = dets.iter().find(|d| !vocab.contains(d.cls.label())) {
                return Err(Error::contract(format!(
                    "{name} line {id:?} detects class {} which is not in the vocabulary",
                    d.cls
                )));
            }
        }
    }
    let lines = by_id
        .into_values()
        .map(|gt| {
            let id = gt.line().id();
            let a = y1.get(id).map(Vec::as_slice).unwrap_or(&[]);
            let b = y2.get(id).map(Vec::as_slice).unwrap_or(&[]);
            (gt, a, b)
        })
        .collect();
    Ok(PreparedCorpus { lines })
}

/// Fuses and scores the whole corpus at one weight setting.
pub(crate) fn evaluate_weights(
    corpus: &PreparedCorpus<'_>,
    vocab: &Vocabulary,
    ks: &[KParam],
    cfg: &FusionConfig,
) -> Result<MetricsReport> {
    let mut totals = vec![LineCounts::default(); ks.len()];
    for &(gt, a, b) in &corpus.lines {
        let result = fuse_line(gt.line(), a, b, cfg)?;
        for (t, c) in totals.iter_mut().zip(line_counts_multi(&result, gt, vocab, ks, cfg)) {
            *t += c;
        }
    }
    Ok(MetricsReport::from_counts(
        Scope::Corpus,
        ks.iter().map(|k| k.get()).zip(totals).collect(),
    ))
}

/// Evaluates every `(w1, w2)` pair of the lattice, `w1` major.
///
/// Lines are those of `gts`; a line missing from a branch has no detections
/// in that branch. Cells are evaluated in parallel on the current rayon pool
/// and returned in lattice order.
pub fn run_grid(
    y1: &BranchCorpus,
    y2: &BranchCorpus,
    gts: &[GroundTruthLine],
    vocab: &Vocabulary,
    ks: &[KParam],
    base_cfg: &FusionConfig,
    spec: &GridSpec,
) -> Result<Vec<GridCell>> {
    let values = spec.values()?;
    let ks: Vec<KParam> = ks.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if ks.is_empty() {
        return Err(Error::contract("no rank cutoffs requested"));
    }
    base_cfg.validate()?;
    let corpus = prepare(y1, y2, gts, vocab)?;
    let lattice: Vec<(f64, f64)> = values
        .iter()
        .flat_map(|&w1| values.iter().map(move |&w2| (w1, w2)))
        .collect();
    lattice
        .par_iter()
        .map(|&(w1, w2)| {
            let cfg = base_cfg.with_weights(w1, w2);
            let report = evaluate_weights(&corpus, vocab, &ks, &cfg)?;
            Ok(GridCell { w1, w2, report })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestRow {
    pub metric: MetricKind,
    pub k: usize,
    pub value: f64,
    pub w1: f64,
    pub w2: f64,
}

impl BestRow {
    pub fn name(&self) -> String {
        self.metric.column(self.k)
    }
}

/// Best value of each metric with the weights attaining it, ordered by k
/// and then p, r, r_InVoc.
#[derive(Debug, Clone, PartialEq)]
pub struct BestTable {
    pub rows: Vec<BestRow>,
}

impl BestTable {
    pub fn get(&self, metric: MetricKind, k: usize) -> Option<&BestRow> {
        self.rows.iter().find(|r| r.metric == metric && r.k == k)
    }
}

fn report_ks(cells: &[GridCell]) -> Result<Vec<usize>> {
    let first = cells
        .first()
        .ok_or_else(|| Error::contract("no grid cells"))?;
    let ks: Vec<usize> = first.report.per_k.keys().copied().collect();
    if let Some(c) = cells
        .iter()
        .find(|c| !c.report.per_k.keys().copied().eq(ks.iter().copied()))
    {
        return Err(Error::contract(format!(
            "cell ({}, {}) reports different cutoffs than ({}, {})",
            c.w1, c.w2, first.w1, first.w2
        )));
    }
    Ok(ks)
}

/// Maximum of every metric over the cells. Ties go to the lexicographically
/// smallest `(w1, w2)`.
pub fn best_per_metric(cells: &[GridCell]) -> Result<BestTable> {
    let ks = report_ks(cells)?;
    let mut rows = Vec::new();
    for &k in &ks {
        for metric in MetricKind::ALL {
            let mut best: Option<BestRow> = None;
            for c in cells {
                let value = c.report.per_k[&k].get(metric);
                let better = match &best {
                    None => true,
                    Some(b) => {
                        value > b.value
                            || (value == b.value
                                && (c.w1, c.w2).partial_cmp(&(b.w1, b.w2)) == Some(std::cmp::Ordering::Less))
                    }
                };
                if better {
                    best = Some(BestRow {
                        metric,
                        k,
                        value,
                        w1: c.w1,
                        w2: c.w2,
                    });
                }
            }
            rows.extend(best);
        }
    }
    Ok(BestTable { rows })
}

/// Dense metric matrix over the weight lattice: `values[i][j]` is the metric
/// at `(w1_values[i], w2_values[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub metric: MetricKind,
    pub k: usize,
    pub w1_values: Vec<f64>,
    pub w2_values: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl Heatmap {
    pub fn name(&self) -> String {
        self.metric.column(self.k)
    }
}

fn distinct_sorted(it: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = it.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

pub fn heatmap_matrix(cells: &[GridCell], metric: MetricKind, k: usize) -> Result<Heatmap> {
    if cells.is_empty() {
        return Err(Error::contract("no grid cells"));
    }
    let w1_values = distinct_sorted(cells.iter().map(|c| c.w1));
    let w2_values = distinct_sorted(cells.iter().map(|c| c.w2));
    let mut values: Vec<Vec<Option<f64>>> = vec![vec![None; w2_values.len()]; w1_values.len()];
    for c in cells {
        let i = w1_values.iter().position(|&w| w == c.w1).expect("collected above");
        let j = w2_values.iter().position(|&w| w == c.w2).expect("collected above");
        let v = c
            .report
            .metric(metric, k)
            .ok_or_else(|| Error::contract(format!("cell ({}, {}) has no k = {k}", c.w1, c.w2)))?;
        if values[i][j].replace(v).is_some() {
            return Err(Error::contract(format!("duplicate cell ({}, {})", c.w1, c.w2)));
        }
    }
    let values = values
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            row.into_iter()
                .enumerate()
                .map(|(j, v)| {
                    v.ok_or_else(|| {
                        Error::contract(format!(
                            "incomplete lattice: missing cell ({}, {})",
                            w1_values[i], w2_values[j]
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Heatmap {
        metric,
        k,
        w1_values,
        w2_values,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::LineCounts;

    fn report(counts: &[(usize, LineCounts)]) -> MetricsReport {
        MetricsReport::from_counts(Scope::Corpus, counts.iter().copied().collect())
    }

    fn counts(tp: usize, retrieved: usize, relevant: usize, invoc: usize) -> LineCounts {
        LineCounts {
            true_relevant_at_k: tp,
            retrieved,
            relevant,
            relevant_invoc: invoc,
        }
    }

    fn cell(w1: f64, w2: f64, tp1: usize, tp5: usize) -> GridCell {
        GridCell {
            w1,
            w2,
            report: report(&[(1, counts(tp1, 10, 20, 10)), (5, counts(tp5, 10, 20, 10))]),
        }
    }

    #[test]
    fn default_lattice() {
        let v = GridSpec::default().values().unwrap();
        assert_eq!(v.len(), 11);
        assert_eq!(v[3], 0.3);
        assert_eq!(v[10], 1.0);
    }

    #[test]
    fn degenerate_lattice() {
        let spec = GridSpec { w_min: 0.0, w_max: 0.0, step: 0.3 };
        assert_eq!(spec.values().unwrap(), vec![0.0]);
    }

    #[test]
    fn bad_specs() {
        assert!(GridSpec { step: 0.3, ..Default::default() }.validate().is_err());
        assert!(GridSpec { step: 0.0, ..Default::default() }.validate().is_err());
        assert!(GridSpec { w_min: 0.6, w_max: 0.5, step: 0.1 }.validate().is_err());
        assert!(GridSpec { w_max: 1.5, ..Default::default() }.validate().is_err());
        assert!(GridSpec { step: 0.25, ..Default::default() }.validate().is_ok());
    }

    #[test]
    fn single_cell_wins_everything() {
        let t = best_per_metric(&[cell(0.3, 0.4, 2, 5)]).unwrap();
        assert_eq!(t.rows.len(), 6);
        assert!(t.rows.iter().all(|r| r.w1 == 0.3 && r.w2 == 0.4));
        assert_eq!(t.rows[0].name(), "p@1");
        assert_eq!(t.rows[5].name(), "r@5_InVoc");
    }

    #[test]
    fn ties_go_to_smallest_weights() {
        let t = best_per_metric(&[cell(0.5, 0.1, 3, 4), cell(0.2, 0.9, 3, 4), cell(0.2, 0.3, 1, 4)]).unwrap();
        let r = t.get(MetricKind::Precision, 1).unwrap();
        assert_eq!((r.w1, r.w2), (0.2, 0.9));
        let r = t.get(MetricKind::RecallInVoc, 5).unwrap();
        assert_eq!((r.w1, r.w2), (0.2, 0.3));
    }

    #[test]
    fn hand_checked_argmax() {
        let cells = [cell(0.0, 1.0, 2, 3), cell(0.5, 0.5, 4, 6), cell(1.0, 0.0, 3, 7)];
        let t = best_per_metric(&cells).unwrap();
        let p1 = t.get(MetricKind::Precision, 1).unwrap();
        assert_eq!((p1.value, p1.w1, p1.w2), (0.4, 0.5, 0.5));
        let r5 = t.get(MetricKind::Recall, 5).unwrap();
        assert_eq!((r5.value, r5.w1, r5.w2), (7.0 / 20.0, 1.0, 0.0));
        assert!(best_per_metric(&[]).is_err());
    }

    #[test]
    fn heatmap_indexing() {
        let vals = GridSpec::default().values().unwrap();
        let mut cells = Vec::new();
        for (i, &w1) in vals.iter().enumerate() {
            for (j, &w2) in vals.iter().enumerate() {
                cells.push(cell(w1, w2, i, j));
            }
        }
        let h = heatmap_matrix(&cells, MetricKind::Precision, 1).unwrap();
        assert_eq!(h.values.len(), 11);
        assert!(h.values.iter().all(|r| r.len() == 11));
        for (i, row) in h.values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, cells[i * 11 + j].report.per_k[&1].precision);
            }
        }
        cells.remove(17);
        assert!(heatmap_matrix(&cells, MetricKind::Precision, 1).is_err());
    }
}
