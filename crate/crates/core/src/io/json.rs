//! JSON file formats. Every file carries a top-level `schema_version`;
//! floats are written in shortest round-trip form and records are emitted in
//! line-id order, which is the canonical form.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{Area, FusedSolution, LineResult};
use crate::metrics::{CorpusReport, KMetrics, LineCounts, MetricsReport, Scope};
use crate::model::{
    BBox, Detection, GroundTruthLine, GroundTruthOccurrence, ModalityId, NGramClass, QueryLineId,
    Vocabulary,
};

use super::{read_text, write_text};

pub const SCHEMA_VERSION: &str = "1";

/// Detections of one line from one branch.
#[derive(Debug, Clone, PartialEq)]
pub struct LineDetections {
    pub line: QueryLineId,
    pub modality: ModalityId,
    pub detections: Vec<Detection>,
}

/// Contents of a detection file keyed by line id.
pub type DetectionSet = BTreeMap<String, LineDetections>;

#[derive(Deserialize)]
struct Header {
    schema_version: String,
}

#[derive(Serialize, Deserialize)]
struct DetectionFile {
    schema_version: String,
    lines: Vec<DetectionLineRec>,
}

#[derive(Serialize, Deserialize)]
struct DetectionLineRec {
    line_id: String,
    width: u32,
    height: u32,
    modality: String,
    detections: Vec<DetectionRec>,
}

#[derive(Serialize, Deserialize)]
struct DetectionRec {
    cls: String,
    n: usize,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    score: f64,
}

#[derive(Serialize, Deserialize)]
struct GroundTruthFile {
    schema_version: String,
    lines: Vec<GroundTruthLineRec>,
}

#[derive(Serialize, Deserialize)]
struct GroundTruthLineRec {
    line_id: String,
    width: u32,
    height: u32,
    occurrences: Vec<OccurrenceRec>,
}

#[derive(Serialize, Deserialize)]
struct OccurrenceRec {
    cls: String,
    n: usize,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    schema_version: String,
    classes: Vec<VocabClassRec>,
}

#[derive(Serialize, Deserialize)]
struct VocabClassRec {
    cls: String,
    n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    support: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct ResultFile {
    schema_version: String,
    lines: Vec<ResultLineRec>,
}

#[derive(Serialize, Deserialize)]
struct ResultLineRec {
    line_id: String,
    width: u32,
    height: u32,
    areas: Vec<AreaRec>,
}

#[derive(Serialize, Deserialize)]
struct AreaRec {
    area_id: usize,
    extent: BoxRec,
    options: Vec<OptionRec>,
}

#[derive(Serialize, Deserialize)]
struct BoxRec {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

#[derive(Serialize, Deserialize)]
struct OptionRec {
    cls: String,
    n: usize,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    score: f64,
    provenance: Vec<ProvenanceRec>,
}

#[derive(Serialize, Deserialize)]
struct ProvenanceRec {
    modality: String,
    score: f64,
}

#[derive(Serialize, Deserialize)]
struct ReportFile {
    schema_version: String,
    corpus: ReportRec,
    lines: Vec<ReportRec>,
}

#[derive(Serialize, Deserialize)]
struct ReportRec {
    scope: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    line_id: Option<String>,
    per_k: Vec<KRec>,
    flags: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct KRec {
    k: usize,
    true_relevant: usize,
    retrieved: usize,
    relevant: usize,
    relevant_invoc: usize,
    p: f64,
    r: f64,
    r_invoc: f64,
}

fn parse<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    let syntax = |e: serde_json::Error| Error::Syntax {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };
    let header: Header = serde_json::from_str(text).map_err(syntax)?;
    if header.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            found: header.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    serde_json::from_str(text).map_err(syntax)
}

fn to_text<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

/// Turns domain-constructor failures into a record error with its location.
struct Locator<'a> {
    path: &'a Path,
    index: usize,
}

impl Locator<'_> {
    fn at<T>(&self, field: impl Into<String>, r: Result<T>) -> Result<T> {
        r.map_err(|e| {
            let message = match e {
                Error::Invalid { detail, .. } => detail,
                other => other.to_string(),
            };
            Error::Record {
                path: self.path.to_path_buf(),
                index: self.index,
                field: field.into(),
                message,
            }
        })
    }
}

fn bbox(loc: &Locator, field: &str, x0: f64, y0: f64, x1: f64, y1: f64, line: &QueryLineId) -> Result<BBox> {
    let b = loc.at(format!("{field}.x0"), BBox::new(x0, y0, x1, y1))?;
    if !b.within(line.width() as f64, line.height() as f64) {
        return loc.at(
            format!("{field}.x1"),
            Err(Error::invalid(
                "box",
                format!("({x0}, {y0}, {x1}, {y1}) exceeds the {}x{} line", line.width(), line.height()),
            )),
        );
    }
    Ok(b)
}

fn check_unique_ids<'a>(path: &Path, ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for (index, id) in ids.enumerate() {
        if !seen.insert(id) {
            return Err(Error::Record {
                path: path.to_path_buf(),
                index,
                field: "line_id".into(),
                message: format!("duplicate line id {id:?}"),
            });
        }
    }
    Ok(())
}

pub fn parse_detections(path: &Path, text: &str) -> Result<DetectionSet> {
    let file: DetectionFile = parse(path, text)?;
    check_unique_ids(path, file.lines.iter().map(|l| l.line_id.as_str()))?;
    let mut out = BTreeMap::new();
    for (index, rec) in file.lines.into_iter().enumerate() {
        let loc = Locator { path, index };
        let line = loc.at("line_id", QueryLineId::new(&rec.line_id, rec.width, rec.height))?;
        let modality = loc.at("modality", ModalityId::new(&rec.modality))?;
        let mut detections = Vec::with_capacity(rec.detections.len());
        for (j, d) in rec.detections.iter().enumerate() {
            let field = format!("detections[{j}]");
            let cls = loc.at(format!("{field}.cls"), NGramClass::with_len(&d.cls, d.n))?;
            let b = bbox(&loc, &field, d.x0, d.y0, d.x1, d.y1, &line)?;
            let det = loc.at(format!("{field}.score"), Detection::new(cls, b, d.score, modality.clone()))?;
            detections.push(det);
        }
        out.insert(
            rec.line_id,
            LineDetections {
                line,
                modality,
                detections,
            },
        );
    }
    Ok(out)
}

pub fn detections_to_string(set: &DetectionSet) -> String {
    let lines = set
        .values()
        .map(|l| DetectionLineRec {
            line_id: l.line.id().to_string(),
            width: l.line.width(),
            height: l.line.height(),
            modality: l.modality.as_str().to_string(),
            detections: l
                .detections
                .iter()
                .map(|d| DetectionRec {
                    cls: d.cls.label().to_string(),
                    n: d.cls.n(),
                    x0: d.bbox.x0(),
                    y0: d.bbox.y0(),
                    x1: d.bbox.x1(),
                    y1: d.bbox.y1(),
                    score: d.score(),
                })
                .collect(),
        })
        .collect();
    to_text(&DetectionFile {
        schema_version: SCHEMA_VERSION.into(),
        lines,
    })
}

pub fn load_detections(path: &Path) -> Result<DetectionSet> {
    parse_detections(path, &read_text(path)?)
}

pub fn save_detections(set: &DetectionSet, path: &Path) -> Result<()> {
    write_text(path, &detections_to_string(set))
}

/// Ground-truth lines, sorted by line id.
pub fn parse_ground_truth(path: &Path, text: &str) -> Result<Vec<GroundTruthLine>> {
    let file: GroundTruthFile = parse(path, text)?;
    check_unique_ids(path, file.lines.iter().map(|l| l.line_id.as_str()))?;
    let mut lines = Vec::with_capacity(file.lines.len());
    for (index, rec) in file.lines.iter().enumerate() {
        let loc = Locator { path, index };
        let line = loc.at("line_id", QueryLineId::new(&rec.line_id, rec.width, rec.height))?;
        let mut occurrences = Vec::with_capacity(rec.occurrences.len());
        for (j, o) in rec.occurrences.iter().enumerate() {
            let field = format!("occurrences[{j}]");
            let cls = loc.at(format!("{field}.cls"), NGramClass::with_len(&o.cls, o.n))?;
            let b = bbox(&loc, &field, o.x0, o.y0, o.x1, o.y1, &line)?;
            occurrences.push(GroundTruthOccurrence { cls, bbox: b });
        }
        lines.push(loc.at("occurrences", GroundTruthLine::new(line, occurrences))?);
    }
    lines.sort_by(|a, b| a.line().id().cmp(b.line().id()));
    Ok(lines)
}

pub fn ground_truth_to_string(lines: &[GroundTruthLine]) -> String {
    let mut sorted: Vec<&GroundTruthLine> = lines.iter().collect();
    sorted.sort_by(|a, b| a.line().id().cmp(b.line().id()));
    let lines = sorted
        .into_iter()
        .map(|g| GroundTruthLineRec {
            line_id: g.line().id().to_string(),
            width: g.line().width(),
            height: g.line().height(),
            occurrences: g
                .occurrences()
                .iter()
                .map(|o| OccurrenceRec {
                    cls: o.cls.label().to_string(),
                    n: o.cls.n(),
                    x0: o.bbox.x0(),
                    y0: o.bbox.y0(),
                    x1: o.bbox.x1(),
                    y1: o.bbox.y1(),
                })
                .collect(),
        })
        .collect();
    to_text(&GroundTruthFile {
        schema_version: SCHEMA_VERSION.into(),
        lines,
    })
}

pub fn load_ground_truth(path: &Path) -> Result<Vec<GroundTruthLine>> {
    parse_ground_truth(path, &read_text(path)?)
}

pub fn save_ground_truth(lines: &[GroundTruthLine], path: &Path) -> Result<()> {
    write_text(path, &ground_truth_to_string(lines))
}

pub fn parse_vocabulary(path: &Path, text: &str) -> Result<Vocabulary> {
    let file: VocabularyFile = parse(path, text)?;
    let mut classes = BTreeSet::new();
    let mut counts = BTreeMap::new();
    for (index, rec) in file.classes.iter().enumerate() {
        let loc = Locator { path, index };
        let cls = loc.at("cls", NGramClass::with_len(&rec.cls, rec.n))?;
        if let Some(s) = rec.support {
            if s == 0 {
                return loc.at("support", Err(Error::invalid("vocabulary", "support count must be positive")));
            }
            counts.insert(cls.clone(), s);
        }
        if !classes.insert(cls) {
            return loc.at("cls", Err(Error::invalid("vocabulary", format!("duplicate class {:?}", rec.cls))));
        }
    }
    Vocabulary::new(classes, counts)
}

pub fn vocabulary_to_string(vocab: &Vocabulary) -> String {
    let classes = vocab
        .classes()
        .iter()
        .map(|c| VocabClassRec {
            cls: c.label().to_string(),
            n: c.n(),
            support: vocab.support(c.label()),
        })
        .collect();
    to_text(&VocabularyFile {
        schema_version: SCHEMA_VERSION.into(),
        classes,
    })
}

pub fn load_vocabulary(path: &Path) -> Result<Vocabulary> {
    parse_vocabulary(path, &read_text(path)?)
}

pub fn save_vocabulary(vocab: &Vocabulary, path: &Path) -> Result<()> {
    write_text(path, &vocabulary_to_string(vocab))
}

/// Line results, sorted by line id.
pub fn parse_results(path: &Path, text: &str) -> Result<Vec<LineResult>> {
    let file: ResultFile = parse(path, text)?;
    check_unique_ids(path, file.lines.iter().map(|l| l.line_id.as_str()))?;
    let mut out = Vec::with_capacity(file.lines.len());
    for (index, rec) in file.lines.iter().enumerate() {
        let loc = Locator { path, index };
        let line = loc.at("line_id", QueryLineId::new(&rec.line_id, rec.width, rec.height))?;
        let mut areas = Vec::with_capacity(rec.areas.len());
        for (a, area) in rec.areas.iter().enumerate() {
            let field = format!("areas[{a}]");
            let e = &area.extent;
            let extent = bbox(&loc, &format!("{field}.extent"), e.x0, e.y0, e.x1, e.y1, &line)?;
            let mut options = Vec::with_capacity(area.options.len());
            for (o, opt) in area.options.iter().enumerate() {
                let field = format!("{field}.options[{o}]");
                let cls = loc.at(format!("{field}.cls"), NGramClass::with_len(&opt.cls, opt.n))?;
                let b = bbox(&loc, &field, opt.x0, opt.y0, opt.x1, opt.y1, &line)?;
                let mut provenance = Vec::with_capacity(opt.provenance.len());
                for (p, prov) in opt.provenance.iter().enumerate() {
                    let pf = format!("{field}.provenance[{p}]");
                    let m = loc.at(format!("{pf}.modality"), ModalityId::new(&prov.modality))?;
                    loc.at(format!("{pf}.score"), crate::model::check_score(prov.score))?;
                    provenance.push((m, prov.score));
                }
                options.push(loc.at(field.clone(), FusedSolution::new(cls, b, opt.score, provenance))?);
            }
            areas.push(loc.at(field, Area::new(area.area_id, extent, options))?);
        }
        out.push(LineResult { line, areas });
    }
    out.sort_by(|a, b| a.line.id().cmp(b.line.id()));
    Ok(out)
}

pub fn results_to_string(results: &[LineResult]) -> String {
    let mut sorted: Vec<&LineResult> = results.iter().collect();
    sorted.sort_by(|a, b| a.line.id().cmp(b.line.id()));
    let lines = sorted
        .into_iter()
        .map(|r| ResultLineRec {
            line_id: r.line.id().to_string(),
            width: r.line.width(),
            height: r.line.height(),
            areas: r
                .areas
                .iter()
                .map(|a| AreaRec {
                    area_id: a.area_id,
                    extent: BoxRec {
                        x0: a.extent.x0(),
                        y0: a.extent.y0(),
                        x1: a.extent.x1(),
                        y1: a.extent.y1(),
                    },
                    options: a
                        .options()
                        .iter()
                        .map(|o| OptionRec {
                            cls: o.cls.label().to_string(),
                            n: o.cls.n(),
                            x0: o.bbox.x0(),
                            y0: o.bbox.y0(),
                            x1: o.bbox.x1(),
                            y1: o.bbox.y1(),
                            score: o.score(),
                            provenance: o
                                .provenance()
                                .iter()
                                .map(|(m, s)| ProvenanceRec {
                                    modality: m.as_str().to_string(),
                                    score: *s,
                                })
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        })
        .collect();
    to_text(&ResultFile {
        schema_version: SCHEMA_VERSION.into(),
        lines,
    })
}

pub fn load_results(path: &Path) -> Result<Vec<LineResult>> {
    parse_results(path, &read_text(path)?)
}

pub fn save_results(results: &[LineResult], path: &Path) -> Result<()> {
    write_text(path, &results_to_string(results))
}

fn report_rec(r: &MetricsReport) -> ReportRec {
    let (scope, line_id) = match &r.scope {
        Scope::Corpus => ("corpus".to_string(), None),
        Scope::Line(id) => ("line".to_string(), Some(id.clone())),
    };
    ReportRec {
        scope,
        line_id,
        per_k: r
            .per_k
            .iter()
            .map(|(&k, m)| KRec {
                k,
                true_relevant: m.counts.true_relevant_at_k,
                retrieved: m.counts.retrieved,
                relevant: m.counts.relevant,
                relevant_invoc: m.counts.relevant_invoc,
                p: m.precision,
                r: m.recall,
                r_invoc: m.recall_invoc,
            })
            .collect(),
        flags: r.flags.clone(),
    }
}

fn report_from_rec(loc: &Locator, rec: ReportRec) -> Result<MetricsReport> {
    let scope = match (rec.scope.as_str(), rec.line_id) {
        ("corpus", None) => Scope::Corpus,
        ("line", Some(id)) => Scope::Line(id),
        (other, _) => {
            return loc.at(
                "scope",
                Err(Error::invalid("report", format!("scope {other:?} needs line_id exactly when it is \"line\""))),
            )
        }
    };
    let mut per_k = BTreeMap::new();
    for (j, k) in rec.per_k.into_iter().enumerate() {
        let field = format!("per_k[{j}]");
        let counts = LineCounts {
            true_relevant_at_k: k.true_relevant,
            retrieved: k.retrieved,
            relevant: k.relevant,
            relevant_invoc: k.relevant_invoc,
        };
        if k.k == 0 || counts.true_relevant_at_k > counts.retrieved.min(counts.relevant) || counts.relevant_invoc > counts.relevant {
            return loc.at(field, Err(Error::invalid("report", "inconsistent counts")));
        }
        let m = KMetrics::from_counts(counts);
        if (m.precision, m.recall, m.recall_invoc) != (k.p, k.r, k.r_invoc) {
            return loc.at(field, Err(Error::invalid("report", "metric values disagree with counts")));
        }
        if per_k.insert(k.k, m).is_some() {
            return loc.at(field, Err(Error::invalid("report", format!("duplicate k = {}", k.k))));
        }
    }
    Ok(MetricsReport {
        scope,
        per_k,
        flags: rec.flags,
    })
}

pub fn parse_report(path: &Path, text: &str) -> Result<CorpusReport> {
    let file: ReportFile = parse(path, text)?;
    let corpus = report_from_rec(&Locator { path, index: 0 }, file.corpus)?;
    let lines = file
        .lines
        .into_iter()
        .enumerate()
        .map(|(index, r)| report_from_rec(&Locator { path, index }, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(CorpusReport { corpus, lines })
}

pub fn report_to_string(report: &CorpusReport) -> String {
    to_text(&ReportFile {
        schema_version: SCHEMA_VERSION.into(),
        corpus: report_rec(&report.corpus),
        lines: report.lines.iter().map(report_rec).collect(),
    })
}

pub fn load_report(path: &Path) -> Result<CorpusReport> {
    parse_report(path, &read_text(path)?)
}

pub fn save_report(report: &CorpusReport, path: &Path) -> Result<()> {
    write_text(path, &report_to_string(report))
}
