//! Command-line entry point.
//!
//! Exit status: 0 on success, 1 when the data or a file is at fault, 2 when a
//! flag is malformed or out of range. Flags are checked before any file is
//! read.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::fusion::fuse_corpus;
use crate::io;
use crate::metrics::{evaluate_corpus, CorpusReport, KParam, MetricKind, MetricsReport, Scope};
use crate::model::{FusionConfig, ModalityId, OverlapMode, RetrievedCount};
use crate::search::{best_per_metric, heatmap_matrix, run_grid, BestTable, GridSpec};
use crate::synth::{build_vocabulary, generate_corpus, simulate_corpus, GlyphSet, LineSpec, NoiseModel};

const FORMATS: &str = "\
File formats (all JSON files carry \"schema_version\": \"1\"):
  detections    {lines: [{line_id, width, height, modality,
                 detections: [{cls, n, x0, y0, x1, y1, score}]}]}
  ground truth  {lines: [{line_id, width, height, occurrences: [{cls, n, x0, y0, x1, y1}]}]}
  vocabulary    {classes: [{cls, n, support}]}
  results       {lines: [{line_id, width, height, areas: [{area_id, extent,
                 options: [{cls, n, x0, y0, x1, y1, score, provenance: [{modality, score}]}]}]}]}
  report        {corpus: {...}, lines: [{scope, line_id, per_k: [{k, true_relevant,
                 retrieved, relevant, relevant_invoc, p, r, r_invoc}], flags}]}
  grid CSV      w1,w2,p@k,r@k,r@k_InVoc,... with six decimals, 121 rows for step 0.1
  glyph dir     <dir>/<symbol>/*.pgm, symbol directories named by the symbol or U+XXXX

Exit status: 0 success, 1 data or file error, 2 invalid flags.";

#[derive(Debug, Parser)]
#[command(
    name = "ngspot",
    version,
    about = "Fuse, evaluate and tune two-branch n-gram spotting results on text lines",
    after_help = FORMATS
)]
struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fuse two detection files into a results file
    Fuse(FuseArgs),
    /// Score a results file against ground truth
    Eval(EvalArgs),
    /// Sweep both branch weights and write the metric grid
    Grid(GridArgs),
    /// Render synthetic lines with n-gram ground truth
    Synth(SynthArgs),
    /// Build an n-gram vocabulary from transcripts
    Vocab(VocabArgs),
    /// Produce detections of a simulated detector from ground truth
    Simulate(SimulateArgs),
    /// Print a report file as a table
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OverlapArg {
    /// IoU of the x-intervals only
    Horizontal,
    /// Area IoU of the boxes
    Iou,
}

impl From<OverlapArg> for OverlapMode {
    fn from(o: OverlapArg) -> Self {
        match o {
            OverlapArg::Horizontal => OverlapMode::Horizontal,
            OverlapArg::Iou => OverlapMode::Iou,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RetrievedArg {
    /// Number of areas in the line
    Areas,
    /// Number of options over all areas
    Options,
}

impl From<RetrievedArg> for RetrievedCount {
    fn from(r: RetrievedArg) -> Self {
        match r {
            RetrievedArg::Areas => RetrievedCount::Areas,
            RetrievedArg::Options => RetrievedCount::Options,
        }
    }
}

#[derive(Debug, Args)]
struct FusionFlags {
    /// Gain awarded to two agreeing solutions, in (0, 1]
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Overlap at which solutions fuse and share an area, in (0, 1]
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    /// Overlap measure
    #[arg(long, value_enum, default_value = "horizontal")]
    overlap: OverlapArg,
}

#[derive(Debug, Args)]
struct FuseArgs {
    /// Detections of branch A
    #[arg(long, value_name = "FILE")]
    branch_a: PathBuf,
    /// Detections of branch B (absent: branch A alone)
    #[arg(long, value_name = "FILE")]
    branch_b: Option<PathBuf>,
    /// Weight of branch A, in [0, 1]
    #[arg(long, default_value_t = 0.5)]
    w1: f64,
    /// Weight of branch B, in [0, 1]
    #[arg(long, default_value_t = 0.5)]
    w2: f64,
    #[command(flatten)]
    fusion: FusionFlags,
    /// Results file to write
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalFlags {
    /// Rank cutoffs, comma separated
    #[arg(long, value_delimiter = ',', default_value = "1,5", value_name = "LIST")]
    k: Vec<usize>,
    /// Overlap at which an option hits a ground-truth occurrence, in (0, 1]
    #[arg(long, default_value_t = 0.5)]
    tau_match: f64,
    /// What counts as retrieved in p@k
    #[arg(long, value_enum, default_value = "areas")]
    retrieved: RetrievedArg,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Results file
    #[arg(long, value_name = "FILE")]
    pred: PathBuf,
    /// Ground-truth file
    #[arg(long, value_name = "FILE")]
    gt: PathBuf,
    /// Vocabulary file
    #[arg(long, value_name = "FILE")]
    vocab: PathBuf,
    #[command(flatten)]
    eval: EvalFlags,
    /// Overlap measure
    #[arg(long, value_enum, default_value = "horizontal")]
    overlap: OverlapArg,
    /// Report file to write
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long, value_name = "FILE")]
    branch_a: PathBuf,
    #[arg(long, value_name = "FILE")]
    branch_b: PathBuf,
    #[arg(long, value_name = "FILE")]
    gt: PathBuf,
    #[arg(long, value_name = "FILE")]
    vocab: PathBuf,
    #[command(flatten)]
    eval: EvalFlags,
    #[command(flatten)]
    fusion: FusionFlags,
    /// Lattice step for both weights over [0, 1]
    #[arg(long, default_value_t = 0.1)]
    step: f64,
    /// Grid CSV to write
    #[arg(long, value_name = "FILE")]
    out_csv: PathBuf,
    /// Directory for one SVG heatmap per metric
    #[arg(long, value_name = "DIR")]
    heatmaps: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Glyph directory
    #[arg(long, value_name = "DIR", required_unless_present = "procedural")]
    glyphs: Option<PathBuf>,
    /// Draw random glyphs for these symbols instead of loading a directory
    #[arg(long, value_name = "SYMBOLS", conflicts_with = "glyphs")]
    procedural: Option<String>,
    /// Variants per procedural glyph
    #[arg(long, default_value_t = 3)]
    glyph_variants: usize,
    /// Procedural glyph size in pixels
    #[arg(long, default_value_t = 24)]
    glyph_size: u32,
    /// Number of lines to generate
    #[arg(long, value_name = "N")]
    lines: usize,
    /// Text file whose words fill the lines
    #[arg(long, value_name = "FILE")]
    text_source: PathBuf,
    /// Chance that a glyph overlaps its predecessor, in [0, 1]
    #[arg(long, default_value_t = 0.7)]
    overlap_prob: f64,
    /// N-gram sizes annotated in the ground truth
    #[arg(long, value_delimiter = ',', default_value = "2,3", value_name = "LIST")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (line rasters, gt.json, transcripts.txt)
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct VocabArgs {
    /// Text file, one transcript per line
    #[arg(long, value_name = "FILE")]
    transcripts: PathBuf,
    /// N-gram sizes
    #[arg(long, value_delimiter = ',', default_value = "2,3", value_name = "LIST")]
    n: Vec<usize>,
    /// Minimum number of occurrences kept
    #[arg(long, default_value_t = 1)]
    min_count: u64,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_name = "FILE")]
    gt: PathBuf,
    #[arg(long, value_name = "FILE")]
    vocab: PathBuf,
    /// Modality name stamped on every detection
    #[arg(long, value_name = "NAME")]
    modality: String,
    /// Probability of missing an occurrence, in [0, 1]
    #[arg(long, default_value_t = 0.2)]
    miss_rate: f64,
    /// Expected false positives per line
    #[arg(long, default_value_t = 2.0)]
    fp_rate: f64,
    /// Box edge jitter (standard deviation, pixels)
    #[arg(long, default_value_t = 1.0, value_name = "PX")]
    jitter: f64,
    #[arg(long, default_value_t = 0.7)]
    tp_mean: f64,
    #[arg(long, default_value_t = 0.2)]
    tp_spread: f64,
    #[arg(long, default_value_t = 0.3)]
    fp_mean: f64,
    #[arg(long, default_value_t = 0.2)]
    fp_spread: f64,
    /// Classes this detector never finds, comma separated
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    blind: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Report file
    file: PathBuf,
    /// Also print one row per line
    #[arg(long)]
    lines: bool,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type Outcome = std::result::Result<(), Failure>;

fn usage<T>(r: crate::Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| Failure::Usage(e.to_string()))
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match cli.jobs {
        Some(0) => Err(Failure::Usage("--jobs must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(cli.command)),
            Err(e) => Err(Failure::Usage(format!("cannot start {n} worker threads: {e}"))),
        },
        None => dispatch(cli.command),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(command: Command) -> Outcome {
    match command {
        Command::Fuse(a) => fuse(a),
        Command::Eval(a) => eval(a),
        Command::Grid(a) => grid(a),
        Command::Synth(a) => synth(a),
        Command::Vocab(a) => vocab(a),
        Command::Simulate(a) => simulate(a),
        Command::Report(a) => report(a),
    }
}

fn fusion_config(f: &FusionFlags) -> FusionConfig {
    FusionConfig {
        delta: f.delta,
        tau_overlap: f.tau,
        overlap: f.overlap.into(),
        ..FusionConfig::default()
    }
}

fn ks(list: &[usize]) -> std::result::Result<Vec<KParam>, Failure> {
    if list.is_empty() {
        return Err(Failure::Usage("--k needs at least one cutoff".into()));
    }
    usage(list.iter().map(|&k| KParam::new(k)).collect())
}

fn fuse(a: FuseArgs) -> Outcome {
    let cfg = fusion_config(&a.fusion).with_weights(a.w1, a.w2);
    usage(cfg.validate())?;

    let branch_a = io::load_detections(&a.branch_a)?;
    let branch_b = a.branch_b.as_deref().map(io::load_detections).transpose()?;
    let inputs = io::pair_branches(&branch_a, branch_b.as_ref())?;
    let results = fuse_corpus(&inputs, &cfg)?;
    io::save_results(&results, &a.out)?;
    Ok(())
}

fn eval(a: EvalArgs) -> Outcome {
    let ks = ks(&a.eval.k)?;
    let cfg = FusionConfig {
        tau_match: a.eval.tau_match,
        overlap: a.overlap.into(),
        retrieved: a.eval.retrieved.into(),
        ..FusionConfig::default()
    };
    usage(cfg.validate())?;

    let results = io::load_results(&a.pred)?;
    let gts = io::load_ground_truth(&a.gt)?;
    let vocab = io::load_vocabulary(&a.vocab)?;
    let report = evaluate_corpus(&results, &gts, &vocab, &ks, &cfg)?;
    io::save_report(&report, &a.out)?;
    print!("{}", format_report(&report, false));
    Ok(())
}

fn grid(a: GridArgs) -> Outcome {
    let ks = ks(&a.eval.k)?;
    let cfg = FusionConfig {
        tau_match: a.eval.tau_match,
        retrieved: a.eval.retrieved.into(),
        ..fusion_config(&a.fusion)
    };
    usage(cfg.validate())?;
    let spec = GridSpec {
        step: a.step,
        ..GridSpec::default()
    };
    usage(spec.validate())?;

    let y1 = io::branch_corpus(&io::load_detections(&a.branch_a)?);
    let y2 = io::branch_corpus(&io::load_detections(&a.branch_b)?);
    let gts = io::load_ground_truth(&a.gt)?;
    let vocab = io::load_vocabulary(&a.vocab)?;
    let cells = run_grid(&y1, &y2, &gts, &vocab, &ks, &cfg, &spec)?;
    io::save_grid_csv(&cells, &a.out_csv)?;
    if let Some(dir) = &a.heatmaps {
        create_dir(dir)?;
        for k in &ks {
            for metric in MetricKind::ALL {
                let h = heatmap_matrix(&cells, metric, k.get())?;
                io::save_heatmap_svg(&h, &dir.join(format!("{}.svg", h.name())))?;
            }
        }
    }
    print!("{}", format_best(&best_per_metric(&cells)?));
    Ok(())
}

fn synth(a: SynthArgs) -> Outcome {
    let spec = LineSpec {
        overlap_probability: a.overlap_prob,
        ngram_sizes: a.n.clone(),
        seed: a.seed,
        ..LineSpec::default()
    };
    usage(spec.validate())?;
    if a.lines == 0 {
        return Err(Failure::Usage("--lines must be at least 1".into()));
    }
    let glyphs = match (&a.glyphs, &a.procedural) {
        (_, Some(symbols)) => usage(GlyphSet::procedural(symbols, a.glyph_variants, a.glyph_size, a.seed))?,
        (Some(dir), None) => io::load_glyph_dir(dir)?,
        (None, None) => unreachable!("clap requires one of --glyphs and --procedural"),
    };

    let words = io::load_text_lines(&a.text_source)?;
    let lines = generate_corpus(&glyphs, &words, a.lines, &spec)?;
    io::save_synth_corpus(&lines, &a.out)?;
    Ok(())
}

fn vocab(a: VocabArgs) -> Outcome {
    if a.n.is_empty() || a.n.contains(&0) {
        return Err(Failure::Usage(format!("--n sizes must be positive, got {:?}", a.n)));
    }
    if a.min_count == 0 {
        return Err(Failure::Usage("--min-count must be at least 1".into()));
    }
    let transcripts = io::load_text_lines(&a.transcripts)?;
    let vocab = build_vocabulary(&transcripts, &a.n, a.min_count)?;
    io::save_vocabulary(&vocab, &a.out)?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> Outcome {
    let modality = usage(ModalityId::new(&a.modality))?;
    let noise = NoiseModel {
        miss_rate: a.miss_rate,
        fp_rate: a.fp_rate,
        tp_score_mean: a.tp_mean,
        tp_score_spread: a.tp_spread,
        fp_score_mean: a.fp_mean,
        fp_score_spread: a.fp_spread,
        box_jitter: a.jitter,
        blind_classes: a.blind.iter().cloned().collect(),
        seed: a.seed,
    };
    usage(noise.validate())?;

    let gts = io::load_ground_truth(&a.gt)?;
    let vocab = io::load_vocabulary(&a.vocab)?;
    let per_line = simulate_corpus(&gts, &vocab, &noise, &modality)?;
    io::save_detections(&io::detection_set(&gts, &modality, per_line)?, &a.out)?;
    Ok(())
}

fn report(a: ReportArgs) -> Outcome {
    let report = io::load_report(&a.file)?;
    print!("{}", format_report(&report, a.lines));
    Ok(())
}

fn create_dir(dir: &Path) -> crate::Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn report_rows(out: &mut String, r: &MetricsReport) {
    let name = match &r.scope {
        Scope::Corpus => "corpus".to_string(),
        Scope::Line(id) => id.clone(),
    };
    for (k, m) in &r.per_k {
        let _ = writeln!(
            out,
            "{name:<16} {k:>3} {:>8.4} {:>8.4} {:>10.4} {:>6}/{:<6} {}",
            m.precision,
            m.recall,
            m.recall_invoc,
            m.counts.true_relevant_at_k,
            m.counts.relevant_invoc,
            r.flags.join(",")
        );
    }
}

fn format_report(report: &CorpusReport, lines: bool) -> String {
    let mut out = format!(
        "{:<16} {:>3} {:>8} {:>8} {:>10} {:>13} flags\n",
        "scope", "k", "p@k", "r@k", "r@k_InVoc", "tp/in-vocab"
    );
    report_rows(&mut out, &report.corpus);
    if lines {
        for l in &report.lines {
            report_rows(&mut out, l);
        }
    }
    out
}

fn format_best(table: &BestTable) -> String {
    let mut out = format!("{:<12} {:>8} {:>6} {:>6}\n", "metric", "best", "w1", "w2");
    for row in &table.rows {
        let _ = writeln!(out, "{:<12} {:>8.4} {:>6.2} {:>6.2}", row.name(), row.value, row.w1, row.w2);
    }
    out
}
