use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fusion::LineInput;
use crate::model::{Detection, GroundTruthLine, ModalityId};
use crate::search::BranchCorpus;
use crate::synth::SynthLine;

use super::json::{save_ground_truth, DetectionSet, LineDetections};
use super::raster::save_pgm;
use super::{read_text, write_text};

/// Pairs two detection files line by line. A line present in only one file
/// gets an empty detection list for the other branch; a line present in both
/// must have the same size in both.
pub fn pair_branches(a: &DetectionSet, b: Option<&DetectionSet>) -> Result<Vec<LineInput>> {
    let empty = BTreeMap::new();
    let b = b.unwrap_or(&empty);
    let mut ids: Vec<&String> = a.keys().chain(b.keys()).collect();
    ids.sort();
    ids.dedup();
    ids.into_iter()
        .map(|id| {
            let (la, lb) = (a.get(id), b.get(id));
            if let (Some(x), Some(y)) = (la, lb) {
                if x.line != y.line {
                    return Err(Error::contract(format!(
                        "line {id:?} is {}x{} in branch A but {}x{} in branch B",
                        x.line.width(),
                        x.line.height(),
                        y.line.width(),
                        y.line.height()
                    )));
                }
            }
            let line = la.or(lb).expect("id came from one of the sets").line.clone();
            let dets = |l: Option<&LineDetections>| l.map(|l| l.detections.clone()).unwrap_or_default();
            Ok(LineInput {
                line,
                y1: dets(la),
                y2: dets(lb),
            })
        })
        .collect()
}

pub fn branch_corpus(set: &DetectionSet) -> BranchCorpus {
    set.iter()
        .map(|(id, l)| (id.clone(), l.detections.clone()))
        .collect()
}

/// Wraps per-line detections of one modality into a detection file, taking
/// line sizes from the ground truth.
pub fn detection_set(
    gts: &[GroundTruthLine],
    modality: &ModalityId,
    per_line: Vec<(String, Vec<Detection>)>,
) -> Result<DetectionSet> {
    let lines: BTreeMap<&str, &GroundTruthLine> = gts.iter().map(|g| (g.line().id(), g)).collect();
    per_line
        .into_iter()
        .map(|(id, detections)| {
            let gt = lines
                .get(id.as_str())
                .ok_or_else(|| Error::contract(format!("no ground truth for line {id:?}")))?;
            let entry = LineDetections {
                line: gt.line().clone(),
                modality: modality.clone(),
                detections,
            };
            Ok((id, entry))
        })
        .collect()
}

/// Non-empty lines of a text file.
pub fn load_text_lines(path: &Path) -> Result<Vec<String>> {
    Ok(read_text(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

/// Writes `<id>.pgm` per line, `gt.json` and `transcripts.txt` (one line of
/// text per raster, in id order) into `dir`, creating it if needed.
pub fn save_synth_corpus(lines: &[SynthLine], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut gts = Vec::with_capacity(lines.len());
    let mut transcripts = String::new();
    for l in lines {
        save_pgm(&l.composed.image, &dir.join(format!("{}.pgm", l.id)))?;
        gts.push(l.composed.ground_truth(&l.id)?);
        transcripts.push_str(&l.text);
        transcripts.push('\n');
    }
    save_ground_truth(&gts, &dir.join("gt.json"))?;
    write_text(&dir.join("transcripts.txt"), &transcripts)
}
