#![allow(dead_code)]

use std::path::{Path, PathBuf};

pub const WORDS: &str = "the quick brown fox jumps over the lazy dog
a bad cab faced a big dead bee in the hedge
judge my vow sphinx of black quartz
many wizards box quickly while jaded zebras jump
the dog and the fox are not friends at all";

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

/// Runs the built binary and returns its exit status; stderr is echoed on failure.
pub fn ngspot(args: &[&str]) -> i32 {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_ngspot"))
        .args(args)
        .output()
        .expect("spawn ngspot");
    let code = out.status.code().unwrap_or(-1);
    if code != 0 {
        eprint!("{}", String::from_utf8_lossy(&out.stderr));
    }
    code
}

pub fn ok(args: &[&str]) {
    assert_eq!(ngspot(args), 0, "ngspot {}", args.join(" "));
}

/// `synth` with procedural glyphs, then `vocab` over the transcripts.
/// Writes `corpus/`, `vocab.json` and `words.txt` under `dir`.
pub fn synth_corpus(dir: &Path, lines: usize, overlap_prob: f64, n: &str, extra: &[&str]) {
    let words = dir.join("words.txt");
    std::fs::write(&words, WORDS).unwrap();
    let corpus = dir.join("corpus");
    let (lines, overlap) = (lines.to_string(), overlap_prob.to_string());
    let mut args = vec![
        "synth",
        "--procedural",
        "abcdefghijklmnopqrstuvwxyz",
        "--lines",
        &lines,
        "--text-source",
        p(&words),
        "--overlap-prob",
        &overlap,
        "--n",
        n,
        "--seed",
        "7",
        "--out",
        p(&corpus),
    ];
    args.extend_from_slice(extra);
    ok(&args);
    ok(&[
        "vocab",
        "--transcripts",
        p(&corpus.join("transcripts.txt")),
        "--n",
        n,
        "--min-count",
        "4",
        "--out",
        p(&dir.join("vocab.json")),
    ]);
}

pub fn simulate(dir: &Path, modality: &str, seed: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(format!("{modality}.json"));
    let (gt, vocab) = (dir.join("corpus/gt.json"), dir.join("vocab.json"));
    let mut args = vec![
        "simulate",
        "--gt",
        p(&gt),
        "--vocab",
        p(&vocab),
        "--modality",
        modality,
        "--seed",
        seed,
        "--out",
        p(&out),
    ];
    args.extend_from_slice(extra);
    ok(&args);
    out
}
