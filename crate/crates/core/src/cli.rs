//! The `lingomotion` command line.
//!
//! Every subcommand reads and writes the formats in [`crate::io`]. Failures
//! print one line, `error: <kind>: <message>`, to stderr and exit with 1;
//! command-line usage errors exit with 2.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::{learn_codebook_set, normalize_segment, DEFAULT_SHAPE_LEN};
use crate::codec::{decode, decode_channel, encode, EncodedMotion};
use crate::error::{Error, Result};
use crate::io::{self, AngleSequence, EvalReport, MotionSequence};
use crate::kinematics::{angles_to_positions, positions_to_angles, SkeletonDef};
use crate::lexicon::{mine_words, MiningParams};
use crate::metrics::{evaluate_pipeline, EvalConfig, SplitSpec};
use crate::segmenter::{boundaries, segment_channel, SegmentationParams};
use crate::synth::{generate, GaitTemplate, BUILTIN_TEMPLATES};
use crate::SCHEMA;

/// Settings shared by the pipeline subcommands, read from a TOML file.
/// Relative paths are resolved against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Skeleton definition; the built-in 22-joint skeleton when absent.
    pub skeleton: Option<PathBuf>,
    /// Base directory for outputs given as relative paths.
    pub output_dir: Option<PathBuf>,
    pub shape_len: usize,
    pub k_range: (usize, usize),
    pub kmeans_seed: u64,
    pub segmentation: SegmentationParams,
    pub split: SplitSpec,
    pub words: MiningParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            skeleton: None,
            output_dir: None,
            shape_len: DEFAULT_SHAPE_LEN,
            k_range: (8, 24),
            kmeans_seed: 0,
            segmentation: SegmentationParams::default(),
            split: SplitSpec::default(),
            words: MiningParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("pipeline config: {}", e.message())))?;
        cfg.skeleton = cfg.skeleton.map(|p| base.join(p));
        cfg.output_dir = cfg.output_dir.map(|p| base.join(p));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        self.segmentation.validate()?;
        self.split.validate()?;
        self.words.validate()?;
        if self.shape_len < 2 {
            return Err(Error::Config(format!("shape_len must be >= 2, got {}", self.shape_len)));
        }
        let (lo, hi) = self.k_range;
        if lo < 1 || hi < lo {
            return Err(Error::Config(format!("invalid k_range ({lo}, {hi})")));
        }
        if let Some(p) = &self.skeleton {
            if !p.is_file() {
                return Err(Error::Config(format!("skeleton file {} not found", p.display())));
            }
        }
        if let Some(d) = &self.output_dir {
            if !d.is_dir() && !d.parent().is_some_and(|p| p.as_os_str().is_empty() || p.is_dir()) {
                return Err(Error::Config(format!("output_dir {} cannot be created", d.display())));
            }
        }
        Ok(())
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            segmentation: self.segmentation,
            shape_len: self.shape_len,
            k_range: self.k_range,
            kmeans_seed: self.kmeans_seed,
            split: self.split,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "lingomotion", version, about = "Joint-angle motion letters: convert, segment, learn, encode, decode, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Skeleton definition; overrides the configuration.
    #[arg(long, global = true)]
    skeleton: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic motion corpus.
    Synth(SynthArgs),
    /// Convert joint positions to joint angles.
    Angles(InOut),
    /// Convert joint angles to joint positions.
    Positions(InOut),
    /// List the segments of every channel of an angle file.
    Segment(SegmentArgs),
    /// Learn per-channel codebooks from angle files.
    Learn(LearnArgs),
    /// Encode angle files as letter tokens.
    Encode(EncodeArgs),
    /// Decode token files back to angles (or positions).
    Decode(DecodeArgs),
    /// Run the train/test evaluation on a motion corpus.
    Eval(EvalArgs),
    /// Mine co-occurring letters from token files.
    Words(WordsArgs),
    /// Write a channel's signal, boundaries and reconstruction as CSV and SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Built-in template name or a template file.
    #[arg(long)]
    template: String,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Override the template's noise, degrees.
    #[arg(long)]
    noise: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct InOut {
    /// Input file, or a directory of CSV files.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output file, or a directory when the input is one.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Restrict to one channel.
    #[arg(long)]
    channel: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct LearnArgs {
    /// Angle file or directory of angle files.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    shape_len: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    codebooks: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    /// Token file or directory of token files.
    #[arg(long)]
    tokens: PathBuf,
    #[arg(long)]
    codebooks: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Write joint positions instead of angles.
    #[arg(long)]
    positions: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Motion file or directory of motion files.
    #[arg(long)]
    corpus: PathBuf,
    /// Report path; a per-channel CSV is written next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct WordsArgs {
    /// Token file or directory of token files.
    #[arg(long)]
    tokens: PathBuf,
    #[arg(long)]
    min_support: Option<usize>,
    #[arg(long)]
    overlap: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Angle file.
    #[arg(long)]
    angles: PathBuf,
    #[arg(long)]
    channel: String,
    /// Tokens and codebooks for a reconstruction overlay.
    #[arg(long, requires = "codebooks")]
    tokens: Option<PathBuf>,
    #[arg(long, requires = "tokens")]
    codebooks: Option<PathBuf>,
    /// Output path prefix; `.csv` and `.svg` are appended.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

/// Parses `argv` (program name first), runs the command and returns the exit
/// status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                print!("{e}");
                return if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 };
            }
            let msg = e.to_string();
            let line = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: usage: {line}");
            return 2;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.kind());
            1
        }
    }
}

struct Context {
    cfg: PipelineConfig,
    sk: SkeletonDef,
}

impl Context {
    fn new(common: &Common) -> Result<Self> {
        let cfg = match &common.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        let sk = match common.skeleton.as_ref().or(cfg.skeleton.as_ref()) {
            Some(p) => SkeletonDef::load(p)?,
            None => SkeletonDef::smpl22(),
        };
        Ok(Self { cfg, sk })
    }

    fn out(&self, p: &Path) -> PathBuf {
        match &self.cfg.output_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Angles(a) => convert(a, true),
        Command::Positions(a) => convert(a, false),
        Command::Segment(a) => segment(a),
        Command::Learn(a) => learn(a),
        Command::Encode(a) => encode_cmd(a),
        Command::Decode(a) => decode_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Words(a) => words(a),
        Command::Plot(a) => plot(a),
    }
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn write_file(p: &Path, text: &str) -> Result<()> {
    if let Some(d) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(d)?;
    }
    fs::write(p, text).map_err(|e| Error::io(p, e))
}

/// Files in `dir` with extension `ext`, sorted by name.
fn list(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_file() && p.extension().is_some_and(|x| x == ext) {
            out.push(p);
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::InsufficientData(format!("no .{ext} files in {}", dir.display())));
    }
    Ok(out)
}

fn inputs(p: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    if p.is_dir() {
        list(p, ext)
    } else {
        Ok(vec![p.to_path_buf()])
    }
}

/// Output path for `input` when mapping a directory to a directory.
fn mapped(out_dir: &Path, input: &Path, ext: &str) -> PathBuf {
    let stem = input.file_stem().unwrap_or_default();
    out_dir.join(stem).with_extension(ext)
}

fn synth(a: SynthArgs) -> Result<()> {
    let ctx = Context::new(&a.common)?;
    let mut template = if BUILTIN_TEMPLATES.contains(&a.template.as_str()) {
        GaitTemplate::builtin(&a.template)?
    } else {
        GaitTemplate::load(&a.template)?
    };
    if let Some(n) = a.noise {
        template.noise_deg = n;
    }
    let corpus = generate(&template, &ctx.sk, a.n, a.seed)?;
    let out = ctx.out(&a.out);
    create_dir(&out)?;
    for (i, m) in corpus.iter().enumerate() {
        write_file(&out.join(format!("{}_{i:04}.csv", template.name)), &io::write_motion(m))?;
    }
    info!("wrote {} sequences to {}", corpus.len(), out.display());
    Ok(())
}

fn convert(a: InOut, to_angles: bool) -> Result<()> {
    let ctx = Context::new(&a.common)?;
    let files = inputs(&a.input, "csv")?;
    let out = ctx.out(&a.out);
    let dir_mode = a.input.is_dir();
    if dir_mode {
        create_dir(&out)?;
    }
    files.par_iter().try_for_each(|f| {
        let text = if to_angles {
            let m = io::load_motion(f, &ctx.sk)?;
            let conv = positions_to_angles(&m, &ctx.sk)?;
            if !conv.warnings.is_empty() {
                warn!("{}: {} samples outside channel ranges", f.display(), conv.warnings.len());
            }
            io::write_angles(&conv.angles)
        } else {
            let ang = io::load_angles(f, &ctx.sk)?;
            io::write_motion(&angles_to_positions(&ang, &ctx.sk)?)
        };
        let target = if dir_mode { mapped(&out, f, "csv") } else { out.clone() };
        write_file(&target, &text)
    })
}

fn segment(a: SegmentArgs) -> Result<()> {
    let ctx = Context::new(&a.common)?;
    let ang = io::load_angles(&a.input, &ctx.sk)?;
    let channels: Vec<usize> = match &a.channel {
        Some(c) => vec![ang.channel_index(c).ok_or_else(|| Error::UnknownChannel(c.clone()))?],
        None => (0..ang.n_channels()).collect(),
    };
    let mut csv = String::from("channel,start,end,length,scale,bias\n");
    for c in channels {
        for seg in segment_channel(&ang.channel(c), &ctx.cfg.segmentation)? {
            let shape = normalize_segment(&seg, ctx.cfg.shape_len);
            writeln!(
                csv,
                "{},{},{},{},{},{}",
                ang.channels[c], seg.start, seg.end, shape.length, shape.scale, shape.bias
            )
            .expect("writing to a String");
        }
    }
    write_file(&ctx.out(&a.out), &csv)
}

fn load_angle_corpus(p: &Path, sk: &SkeletonDef) -> Result<Vec<AngleSequence>> {
    inputs(p, "csv")?
        .par_iter()
        .map(|f| io::load_angles(f, sk))
        .collect()
}

fn learn(a: LearnArgs) -> Result<()> {
    let ctx = Context::new(&a.common)?;
    let corpus = load_angle_corpus(&a.corpus, &ctx.sk)?;
    let k_range = (
        a.k_min.unwrap_or(ctx.cfg.k_range.0),
        a.k_max.unwrap_or(ctx.cfg.k_range.1),
    );
    let learned = learn_codebook_set(
        &corpus,
        &ctx.cfg.segmentation,
        a.shape_len.unwrap_or(ctx.cfg.shape_len),
        k_range,
        a.seed.unwrap_or(ctx.cfg.kmeans_seed),
    )?;
    for ch in &learned.flagged {
        warn!("channel `{ch}` had too few shapes for k_range {k_range:?}");
    }
    write_file(&ctx.out(&a.out), &io::write_codebooks(&learned.codebooks))
}

fn encode_cmd(a: EncodeArgs) -> Result<()> {
    let ctx = Context::new(&a.common)?;
    let cbs = io::load_codebooks(&a.codebooks)?;
    let files = inputs(&a.input, "csv")?;
    let out = ctx.out(&a.out);
    let dir_mode = a.input.is_dir();
    if dir_mode {
        create_dir(&out)?;
    }
    files.par_iter().try_for_each(|f| {
        let ang = io::load_angles(f, &ctx.sk)?;
        let e = encode(&ang, &cbs, &ctx.cfg.segmentation)?;
        let target = if dir_mode { mapped(&out, f, "jsonl") } else { out.clone() };
        write_file(&target, &io::write_tokens(&e))
    })
}

fn decode_cmd(a: DecodeArgs) -> Result<()> {
    let ctx = Context::new(&a.common)?;
    let cbs = io::load_codebooks(&a.codebooks)?;
    let files = inputs(&a.tokens, "jsonl")?;
    let out = ctx.out(&a.out);
    let dir_mode = a.tokens.is_dir();
    if dir_mode {
        create_dir(&out)?;
    }
    files.par_iter().try_for_each(|f| {
        let e = io::load_tokens_checked(f, Some(&cbs))?;
        let ang = decode(&e, &cbs)?;
        let text = if a.positions {
            io::write_motion(&angles_to_positions(&ang, &ctx.sk)?)
        } else {
            ang.validate(&ctx.sk)?;
            io::write_angles(&ang)
        };
        let target = if dir_mode { mapped(&out, f, "csv") } else { out.clone() };
        write_file(&target, &text)
    })
}

fn report_csv(r: &EvalReport) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    let mut csv = String::from("channel,rmse,nmse,r2,n_samples,k\n");
    for (ch, s) in &r.per_channel {
        let k = r.codebook_sizes.get(ch).copied().unwrap_or(0);
        writeln!(csv, "{ch},{},{},{},{},{k}", s.rmse, opt(s.nmse), opt(s.r2), s.n_samples).expect("String");
    }
    for (name, s) in [("codec", &r.aggregate), ("kinematic", &r.kinematic)] {
        writeln!(csv, "{name},{},{},{},{},", s.rmse, opt(s.nmse), opt(s.r2), s.n_samples).expect("String");
    }
    csv
}

fn eval(a: EvalArgs) -> Result<()> {
    let ctx = Context::new(&a.common)?;
    let corpus: Vec<MotionSequence> = inputs(&a.corpus, "csv")?
        .par_iter()
        .map(|f| io::load_motion(f, &ctx.sk))
        .collect::<Result<_>>()?;
    let mut cfg = ctx.cfg.eval_config();
    if let Some(s) = a.seed {
        cfg.split.seed = s;
    }
    let report = evaluate_pipeline(&corpus, &ctx.sk, &cfg)?;
    let out = ctx.out(&a.out);
    write_file(&out, &io::write_report(&report))?;
    write_file(&out.with_extension("csv"), &report_csv(&report))?;
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!(
        "codec: rmse {:.4} deg, nmse {}, r2 {}",
        report.aggregate.rmse,
        fmt(report.aggregate.nmse),
        fmt(report.aggregate.r2)
    );
    println!(
        "kinematic: rmse {:.3e} m, nmse {}, r2 {}",
        report.kinematic.rmse,
        fmt(report.kinematic.nmse),
        fmt(report.kinematic.r2)
    );
    Ok(())
}

#[derive(Serialize)]
struct WordsDoc<'a> {
    schema: &'a str,
    params: MiningParams,
    sequences: usize,
    candidates: Vec<crate::lexicon::WordCandidate>,
}

fn words(a: WordsArgs) -> Result<()> {
    let ctx = Context::new(&a.common)?;
    let mut params = ctx.cfg.words;
    if let Some(m) = a.min_support {
        params.min_support = m;
    }
    if let Some(o) = a.overlap {
        params.overlap_threshold = o;
    }
    let corpus: Vec<EncodedMotion> = inputs(&a.tokens, "jsonl")?
        .par_iter()
        .map(io::load_tokens)
        .collect::<Result<_>>()?;
    let candidates = mine_words(&corpus, &params)?;
    let doc = WordsDoc {
        schema: SCHEMA,
        params,
        sequences: corpus.len(),
        candidates,
    };
    let text = serde_json::to_string_pretty(&doc).expect("serializable") + "\n";
    write_file(&ctx.out(&a.out), &text)
}

fn plot(a: PlotArgs) -> Result<()> {
    let ctx = Context::new(&a.common)?;
    let ang = io::load_angles(&a.angles, &ctx.sk)?;
    let c = ang
        .channel_index(&a.channel)
        .ok_or_else(|| Error::UnknownChannel(a.channel.clone()))?;
    let signal = ang.channel(c);
    let bounds = boundaries(&signal, &ctx.cfg.segmentation)?;
    let recon = match (&a.tokens, &a.codebooks) {
        (Some(t), Some(cb)) => {
            let cbs = io::load_codebooks(cb)?;
            let e = io::load_tokens_checked(t, Some(&cbs))?;
            let toks = e
                .streams
                .get(&a.channel)
                .ok_or_else(|| Error::UnknownChannel(a.channel.clone()))?;
            if e.frames != signal.len() {
                return Err(Error::LengthMismatch {
                    expected: signal.len(),
                    actual: e.frames,
                });
            }
            Some(decode_channel(&a.channel, toks, e.frames, &cbs)?)
        }
        _ => None,
    };

    let mut csv = String::from("frame,signal,boundary,reconstruction\n");
    for (t, v) in signal.iter().enumerate() {
        let b = u8::from(bounds.binary_search(&t).is_ok());
        let r = recon.as_ref().map_or(String::new(), |r| r[t].to_string());
        writeln!(csv, "{t},{v},{b},{r}").expect("String");
    }
    let prefix = ctx.out(&a.out);
    let with_ext = |ext: &str| {
        let mut s = prefix.clone().into_os_string();
        s.push(ext);
        PathBuf::from(s)
    };
    write_file(&with_ext(".csv"), &csv)?;
    write_file(&with_ext(".svg"), &svg_chart(&a.channel, &signal, &bounds, recon.as_deref()))
}

/// A plain line chart: signal in black, reconstruction dashed red, segment
/// boundaries as grey verticals.
fn svg_chart(title: &str, signal: &[f64], bounds: &[usize], recon: Option<&[f64]>) -> String {
    const W: f64 = 800.0;
    const H: f64 = 300.0;
    const PAD: f64 = 40.0;
    let all = signal.iter().chain(recon.unwrap_or(&[]));
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    let (lo, hi) = if hi - lo < 1e-9 { (lo - 1.0, hi + 1.0) } else { (lo, hi) };
    let n = signal.len().max(2) - 1;
    let x = |t: usize| PAD + (W - 2.0 * PAD) * t as f64 / n as f64;
    let y = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - lo) / (hi - lo);
    let poly = |s: &[f64]| {
        s.iter()
            .enumerate()
            .map(|(t, v)| format!("{:.2},{:.2}", x(t), y(*v)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut svg = String::new();
    writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#).expect("String");
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).expect("String");
    writeln!(svg, r#"<text x="{PAD}" y="20" font-family="sans-serif" font-size="14">{title}</text>"#).expect("String");
    writeln!(
        svg,
        r#"<text x="4" y="{:.2}" font-family="sans-serif" font-size="10">{hi:.1}</text><text x="4" y="{:.2}" font-family="sans-serif" font-size="10">{lo:.1}</text>"#,
        y(hi) + 4.0,
        y(lo) + 4.0
    )
    .expect("String");
    for &b in bounds {
        writeln!(
            svg,
            r##"<line x1="{0:.2}" y1="{PAD}" x2="{0:.2}" y2="{1}" stroke="#bbbbbb" stroke-width="1"/>"##,
            x(b),
            H - PAD
        )
        .expect("String");
    }
    writeln!(svg, r#"<polyline fill="none" stroke="black" stroke-width="1.5" points="{}"/>"#, poly(signal)).expect("String");
    if let Some(r) = recon {
        writeln!(
            svg,
            r#"<polyline fill="none" stroke="red" stroke-width="1.5" stroke-dasharray="4 3" points="{}"/>"#,
            poly(r)
        )
        .expect("String");
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_rejections() {
        let dir = Path::new(".");
        let cfg = PipelineConfig::from_toml("", dir).unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        let cfg = PipelineConfig::from_toml("k_range = [4, 6]\n[segmentation]\nsmooth_window = 3\n", dir).unwrap();
        assert_eq!(cfg.k_range, (4, 6));
        assert_eq!(cfg.segmentation.smooth_window, 3);
        assert!(PipelineConfig::from_toml("k_range = [6, 4]", dir).is_err());
        assert!(PipelineConfig::from_toml("bogus = 1", dir).is_err());
        assert!(PipelineConfig::from_toml("skeleton = \"missing.cfg\"", dir).is_err());
        let shipped = include_str!("../assets/pipeline.cfg");
        assert_eq!(PipelineConfig::from_toml(shipped, dir).unwrap(), PipelineConfig::default());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["lingomotion", "frobnicate"]), 2);
        assert_eq!(run(["lingomotion", "angles"]), 2);
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let s = svg_chart("x", &[0.0, 1.0, 0.0], &[0, 1, 2], Some(&[0.0, 0.9, 0.0]));
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<polyline").count(), 2);
        assert_eq!(s.matches("<line").count(), 3);
    }
}
