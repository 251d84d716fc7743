use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{EvalReport, RootTrack};
use crate::codebook::{Codebook, CodebookSet, TrainingInfo, HOLD};
use crate::codec::{EncodedMotion, LetterToken};
use crate::error::{Error, Result};
use crate::SCHEMA;

fn check_schema(found: &str) -> Result<()> {
    if found != SCHEMA {
        return Err(Error::Schema(format!("expected schema `{SCHEMA}`, found `{found}`")));
    }
    Ok(())
}

fn json_err(e: serde_json::Error) -> Error {
    Error::parse(e.line(), e.column(), e.to_string())
}

#[derive(Serialize, Deserialize)]
struct TrainingDoc {
    n_segments: usize,
    seed: u64,
    inertia: f64,
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct CodebookDoc {
    schema: String,
    skeleton: String,
    channel: String,
    L: usize,
    K: usize,
    centroids: Vec<Vec<f64>>,
    training: TrainingDoc,
}

#[derive(Serialize, Deserialize)]
struct BundleDoc {
    schema: String,
    skeleton: String,
    codebooks: IndexMap<String, CodebookDoc>,
}

impl From<&Codebook> for CodebookDoc {
    fn from(cb: &Codebook) -> Self {
        CodebookDoc {
            schema: SCHEMA.into(),
            skeleton: cb.skeleton.clone(),
            channel: cb.channel.clone(),
            L: cb.shape_len,
            K: cb.k(),
            centroids: cb.centroids.clone(),
            training: TrainingDoc {
                n_segments: cb.training.n_segments,
                seed: cb.training.seed,
                inertia: cb.training.inertia,
            },
        }
    }
}

impl TryFrom<CodebookDoc> for Codebook {
    type Error = Error;

    fn try_from(d: CodebookDoc) -> Result<Self> {
        check_schema(&d.schema)?;
        if d.centroids.len() != d.K {
            return Err(Error::Schema(format!(
                "codebook `{}` declares K = {} but holds {} centroids",
                d.channel,
                d.K,
                d.centroids.len()
            )));
        }
        if let Some(c) = d.centroids.iter().find(|c| c.len() != d.L) {
            return Err(Error::LengthMismatch {
                expected: d.L,
                actual: c.len(),
            });
        }
        let cb = Codebook {
            skeleton: d.skeleton,
            channel: d.channel,
            shape_len: d.L,
            centroids: d.centroids,
            training: TrainingInfo {
                n_segments: d.training.n_segments,
                seed: d.training.seed,
                inertia: d.training.inertia,
            },
        };
        cb.validate()?;
        Ok(cb)
    }
}

pub fn write_codebooks(set: &CodebookSet) -> String {
    let doc = BundleDoc {
        schema: SCHEMA.into(),
        skeleton: set.skeleton.clone(),
        codebooks: set
            .codebooks
            .iter()
            .map(|(k, cb)| (k.clone(), CodebookDoc::from(cb)))
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("codebook bundle serializes");
    s.push('\n');
    s
}

/// Parses either a bundle document or a single-channel codebook document.
pub fn parse_codebooks(text: &str) -> Result<CodebookSet> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(json_err)?;
    if value.get("codebooks").is_some() {
        let doc: BundleDoc = serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
        check_schema(&doc.schema)?;
        let mut codebooks = IndexMap::new();
        for (channel, d) in doc.codebooks {
            let cb = Codebook::try_from(d)?;
            if cb.channel != channel || cb.skeleton != doc.skeleton {
                return Err(Error::Schema(format!(
                    "bundle entry `{channel}` describes `{}` on skeleton `{}`",
                    cb.channel, cb.skeleton
                )));
            }
            codebooks.insert(channel, cb);
        }
        Ok(CodebookSet {
            skeleton: doc.skeleton,
            codebooks,
        })
    } else {
        let doc: CodebookDoc = serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
        let cb = Codebook::try_from(doc)?;
        Ok(CodebookSet {
            skeleton: cb.skeleton.clone(),
            codebooks: [(cb.channel.clone(), cb)].into_iter().collect(),
        })
    }
}

pub fn save_codebooks(set: &CodebookSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_codebooks(set)).map_err(|e| Error::io(path, e))
}

pub fn load_codebooks(path: impl AsRef<Path>) -> Result<CodebookSet> {
    let path = path.as_ref();
    parse_codebooks(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

#[derive(Serialize, Deserialize)]
struct TokenHeader {
    schema: String,
    kind: String,
    skeleton: String,
    fps: f64,
    frames: usize,
    channels: Vec<String>,
    root: RootTrack,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TokenLine {
    channel: String,
    s: i64,
    scale: f64,
    bias: f64,
    length: i64,
    start: i64,
}

/// Header line followed by one token per line, channel by channel.
pub fn write_tokens(e: &EncodedMotion) -> String {
    let header = TokenHeader {
        schema: SCHEMA.into(),
        kind: "tokens".into(),
        skeleton: e.skeleton.clone(),
        fps: e.fps,
        frames: e.frames,
        channels: e.streams.keys().cloned().collect(),
        root: e.root.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("token header serializes");
    out.push('\n');
    for tok in e.streams.values().flatten() {
        let line = serde_json::to_string(tok).expect("token serializes");
        let _ = writeln!(out, "{line}");
    }
    out
}

/// Parses a token stream. When `codebooks` is supplied, every letter index
/// is checked against its channel's codebook.
pub fn parse_tokens(text: &str, codebooks: Option<&CodebookSet>) -> Result<EncodedMotion> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or_else(|| Error::parse(1, 1, "empty token file"))?;
    let header: TokenHeader = serde_json::from_str(first).map_err(|e| Error::parse(1, e.column(), e.to_string()))?;
    check_schema(&header.schema)?;
    if header.kind != "tokens" {
        return Err(Error::Schema(format!("expected a tokens file, found `{}`", header.kind)));
    }
    if header.root.translation.len() != header.frames || header.root.orientation.len() != header.frames {
        return Err(Error::Schema("root track length differs from frame count".into()));
    }
    if let Some(cbs) = codebooks {
        if cbs.skeleton != header.skeleton {
            return Err(Error::Schema(format!(
                "tokens are for skeleton `{}`, codebooks for `{}`",
                header.skeleton, cbs.skeleton
            )));
        }
    }
    let mut streams: IndexMap<String, Vec<LetterToken>> =
        header.channels.iter().map(|c| (c.clone(), Vec::new())).collect();
    let mut last_start: HashMap<String, usize> = HashMap::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let t: TokenLine = serde_json::from_str(line).map_err(|e| Error::parse(line_no, e.column(), e.to_string()))?;
        let stream = streams
            .get_mut(&t.channel)
            .ok_or_else(|| Error::UnknownChannel(t.channel.clone()))?;
        if t.length < 0 || t.start < 0 {
            return Err(Error::parse(line_no, 1, format!("negative length or start in `{line}`")));
        }
        let s = i32::try_from(t.s).map_err(|_| Error::parse(line_no, 1, format!("letter {} out of range", t.s)))?;
        if s < HOLD {
            return Err(Error::parse(line_no, 1, format!("letter {s} below hold id {HOLD}")));
        }
        if let Some(cbs) = codebooks {
            let cb = cbs.get(&t.channel)?;
            if s != HOLD && s as usize >= cb.k() {
                return Err(Error::InvalidLetter {
                    channel: t.channel,
                    s: t.s,
                    k: cb.k(),
                });
            }
        }
        let start = t.start as usize;
        if let Some(&prev) = last_start.get(&t.channel) {
            if start <= prev {
                return Err(Error::Ordering {
                    channel: t.channel,
                    start,
                    previous: prev,
                });
            }
        }
        last_start.insert(t.channel.clone(), start);
        stream.push(LetterToken {
            channel: t.channel,
            s,
            scale: t.scale,
            bias: t.bias,
            length: t.length as usize,
            start,
        });
    }
    Ok(EncodedMotion {
        fps: header.fps,
        frames: header.frames,
        skeleton: header.skeleton,
        root: header.root,
        streams,
    })
}

pub fn save_tokens(e: &EncodedMotion, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_tokens(e)).map_err(|e| Error::io(path, e))
}

pub fn load_tokens(path: impl AsRef<Path>) -> Result<EncodedMotion> {
    load_tokens_checked(path, None)
}

pub fn load_tokens_checked(path: impl AsRef<Path>, codebooks: Option<&CodebookSet>) -> Result<EncodedMotion> {
    let path = path.as_ref();
    parse_tokens(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?, codebooks)
}

pub fn write_report(r: &EvalReport) -> String {
    let mut s = serde_json::to_string_pretty(r).expect("report serializes");
    s.push('\n');
    s
}

pub fn save_report(r: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_report(r)).map_err(|e| Error::io(path, e))
}

pub fn parse_report(text: &str) -> Result<EvalReport> {
    let r: EvalReport = serde_json::from_str(text).map_err(json_err)?;
    check_schema(&r.schema)?;
    Ok(r)
}

pub fn load_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    let path = path.as_ref();
    parse_report(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
