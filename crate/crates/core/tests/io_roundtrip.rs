use std::path::Path;

use proptest::prelude::*;

use ngspot::fusion::fuse_line;
use ngspot::io::*;
use ngspot::metrics::{evaluate_corpus, KParam};
use ngspot::model::*;

const W: u32 = 200;
const H: u32 = 20;
const LABELS: [&str; 5] = ["ab", "bc", "abc", "é", "q"];

fn bbox() -> impl Strategy<Value = BBox> {
    (0.0..190.0f64, 0.1..10.0f64, 0.0..10.0f64, 0.1..10.0f64)
        .prop_map(|(x0, w, y0, h)| BBox::new(x0, y0, x0 + w, y0 + h).unwrap())
}

fn detections(modality: &'static str) -> impl Strategy<Value = Vec<Detection>> {
    prop::collection::vec((0..LABELS.len(), bbox(), 0.0..=1.0f64), 0..8).prop_map(move |v| {
        let m = ModalityId::new(modality).unwrap();
        v.into_iter()
            .map(|(l, b, s)| Detection::new(NGramClass::new(LABELS[l]).unwrap(), b, s, m.clone()).unwrap())
            .collect()
    })
}

fn line(i: usize) -> QueryLineId {
    QueryLineId::new(&format!("line {i}"), W, H).unwrap()
}

fn ground_truth() -> impl Strategy<Value = Vec<GroundTruthLine>> {
    prop::collection::vec(prop::collection::vec((0..LABELS.len(), bbox()), 0..6), 1..4).prop_map(|lines| {
        lines
            .into_iter()
            .enumerate()
            .map(|(i, occ)| {
                let occ = occ
                    .into_iter()
                    .map(|(l, bbox)| GroundTruthOccurrence { cls: NGramClass::new(LABELS[l]).unwrap(), bbox })
                    .collect();
                GroundTruthLine::new(line(i), occ).unwrap()
            })
            .collect()
    })
}

fn vocab() -> Vocabulary {
    Vocabulary::from_counts(LABELS.iter().enumerate().map(|(i, l)| (NGramClass::new(l).unwrap(), i as u64 + 1)).collect())
        .unwrap()
}

fn path() -> &'static Path {
    Path::new("mem.json")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn detections_round_trip(dets in prop::collection::vec(detections("visual"), 0..4)) {
        let m = ModalityId::new("visual").unwrap();
        let set: DetectionSet = dets
            .into_iter()
            .enumerate()
            .map(|(i, d)| (line(i).id().to_string(), LineDetections { line: line(i), modality: m.clone(), detections: d }))
            .collect();
        let text = detections_to_string(&set);
        let back = parse_detections(path(), &text).unwrap();
        prop_assert_eq!(&back, &set);
        prop_assert_eq!(detections_to_string(&back), text);
    }

    #[test]
    fn ground_truth_round_trip(gts in ground_truth()) {
        let text = ground_truth_to_string(&gts);
        let back = parse_ground_truth(path(), &text).unwrap();
        prop_assert_eq!(&back, &gts);
        prop_assert_eq!(ground_truth_to_string(&back), text);
    }

    #[test]
    fn results_and_report_round_trip(
        y1 in prop::collection::vec(detections("visual"), 1..4),
        y2 in prop::collection::vec(detections("phoc"), 1..4),
        gts in ground_truth(),
        w1 in 0.0..=1.0f64,
        w2 in 0.0..=1.0f64,
    ) {
        let cfg = FusionConfig::default().with_weights(w1, w2);
        let empty = Vec::new();
        let results: Vec<_> = gts
            .iter()
            .enumerate()
            .map(|(i, g)| fuse_line(g.line(), y1.get(i).unwrap_or(&empty), y2.get(i).unwrap_or(&empty), &cfg).unwrap())
            .collect();
        let text = results_to_string(&results);
        let back = parse_results(path(), &text).unwrap();
        prop_assert_eq!(&back, &results);
        prop_assert_eq!(results_to_string(&back), text);

        let ks = [KParam::new(1).unwrap(), KParam::new(3).unwrap()];
        let report = evaluate_corpus(&results, &gts, &vocab(), &ks, &cfg).unwrap();
        let text = report_to_string(&report);
        let back = parse_report(path(), &text).unwrap();
        prop_assert_eq!(&back, &report);
        prop_assert_eq!(report_to_string(&back), text);
    }
}

#[test]
fn vocabulary_round_trip() {
    let v = vocab();
    let text = vocabulary_to_string(&v);
    assert_eq!(parse_vocabulary(path(), &text).unwrap(), v);
    let bare = r#"{"schema_version": "1", "classes": [{"cls": "ab", "n": 2}]}"#;
    let parsed = parse_vocabulary(path(), bare).unwrap();
    assert!(parsed.contains("ab"));
}

#[test]
fn rejects_unknown_schema_and_bad_records() {
    let err = parse_vocabulary(path(), r#"{"schema_version": "2", "classes": []}"#).unwrap_err();
    assert!(err.to_string().contains("schema_version"), "{err}");

    let bad_score = r#"{"schema_version": "1", "lines": [{"line_id": "l", "width": 10, "height": 10,
        "modality": "m", "detections": [{"cls": "ab", "n": 2, "x0": 0, "y0": 0, "x1": 5, "y1": 5, "score": 1.5}]}]}"#;
    let err = parse_detections(path(), bad_score).unwrap_err();
    assert!(err.to_string().contains("detections[0].score"), "{err}");

    let outside = r#"{"schema_version": "1", "lines": [{"line_id": "l", "width": 10, "height": 10,
        "occurrences": [{"cls": "ab", "n": 2, "x0": 0, "y0": 0, "x1": 50, "y1": 5}]}]}"#;
    assert!(parse_ground_truth(path(), outside).is_err());

    let wrong_n = r#"{"schema_version": "1", "classes": [{"cls": "abc", "n": 2}]}"#;
    assert!(parse_vocabulary(path(), wrong_n).is_err());
}

#[test]
fn files_are_sorted_by_line_id() {
    let gts: Vec<GroundTruthLine> = ["b", "a", "c"]
        .iter()
        .map(|id| GroundTruthLine::new(QueryLineId::new(id, 10, 10).unwrap(), vec![]).unwrap())
        .collect();
    let back = parse_ground_truth(path(), &ground_truth_to_string(&gts)).unwrap();
    let ids: Vec<&str> = back.iter().map(|g| g.line().id()).collect();
    assert_eq!(ids, ["a", "b", "c"]);
}
