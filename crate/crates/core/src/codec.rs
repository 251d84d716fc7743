//! Letter tokens: encoding angle channels against codebooks and decoding
//! them back into continuous signals.

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::{normalize_segment, resample, CodebookSet, HOLD};
use crate::error::{Error, Result};
use crate::io::{AngleSequence, MotionSequence, RootTrack};
use crate::kinematics::{angles_to_positions, SkeletonDef};
use crate::segmenter::{segment_channel, SegmentationParams};

/// One motion letter with its continuous attributes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LetterToken {
    pub channel: String,
    /// Codebook index, or [`HOLD`] for a flat segment.
    pub s: i32,
    /// Amplitude σ in degrees.
    pub scale: f64,
    /// Minimum μ in degrees.
    pub bias: f64,
    /// Frames covered, including both boundary frames.
    pub length: usize,
    pub start: usize,
}

impl LetterToken {
    /// Last frame covered (shared with the next token).
    pub fn end(&self) -> usize {
        self.start + self.length - 1
    }

    pub fn is_hold(&self) -> bool {
        self.s == HOLD
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMotion {
    pub fps: f64,
    pub frames: usize,
    pub skeleton: String,
    pub root: RootTrack,
    pub streams: IndexMap<String, Vec<LetterToken>>,
}

impl EncodedMotion {
    pub fn empty(skeleton: &str, fps: f64) -> Self {
        Self {
            fps,
            frames: 0,
            skeleton: skeleton.to_string(),
            root: RootTrack::default(),
            streams: IndexMap::new(),
        }
    }

    pub fn n_tokens(&self) -> usize {
        self.streams.values().map(Vec::len).sum()
    }

    /// Checks that every stream tiles frames `0..frames` with shared
    /// boundaries and that hold letters carry zero scale.
    pub fn check_tiling(&self) -> Result<()> {
        if self.frames < 2 {
            return Err(Error::Tiling {
                channel: String::new(),
                message: format!("encoded motion must span at least 2 frames, got {}", self.frames),
            });
        }
        for (channel, tokens) in &self.streams {
            let fail = |message: String| Error::Tiling {
                channel: channel.clone(),
                message,
            };
            let mut expected_start = 0;
            for (i, tok) in tokens.iter().enumerate() {
                if tok.length < 2 {
                    return Err(fail(format!("token {i} has length {}", tok.length)));
                }
                if tok.start != expected_start {
                    return Err(fail(format!(
                        "token {i} starts at {}, expected {expected_start}",
                        tok.start
                    )));
                }
                if tok.is_hold() != (tok.scale == 0.0) {
                    return Err(fail(format!(
                        "token {i}: hold letter iff zero scale (s = {}, scale = {})",
                        tok.s, tok.scale
                    )));
                }
                expected_start = tok.end();
            }
            if tokens.is_empty() || expected_start + 1 != self.frames {
                return Err(fail(format!(
                    "tokens cover frames 0..={expected_start}, motion has {} frames",
                    self.frames
                )));
            }
        }
        Ok(())
    }
}

/// Encodes one channel signal.
pub fn encode_channel(
    channel: &str,
    signal: &[f64],
    cbs: &CodebookSet,
    params: &SegmentationParams,
) -> Result<Vec<LetterToken>> {
    let cb = cbs.get(channel)?;
    segment_channel(signal, params)?
        .iter()
        .map(|seg| {
            let shape = normalize_segment(seg, cb.shape_len);
            let s = if shape.is_flat() {
                HOLD
            } else {
                cb.assign(&shape.values)?.0 as i32
            };
            Ok(LetterToken {
                channel: channel.to_string(),
                s,
                scale: shape.scale,
                bias: shape.bias,
                length: shape.length,
                start: seg.start,
            })
        })
        .collect()
}

pub fn encode(a: &AngleSequence, cbs: &CodebookSet, params: &SegmentationParams) -> Result<EncodedMotion> {
    if cbs.skeleton != a.skeleton {
        return Err(Error::Schema(format!(
            "codebooks are for skeleton `{}`, angles for `{}`",
            cbs.skeleton, a.skeleton
        )));
    }
    let streams: Vec<Vec<LetterToken>> = (0..a.n_channels())
        .into_par_iter()
        .map(|c| encode_channel(&a.channels[c], &a.channel(c), cbs, params))
        .collect::<Result<_>>()?;
    Ok(EncodedMotion {
        fps: a.fps,
        frames: a.frames(),
        skeleton: a.skeleton.clone(),
        root: a.root.clone(),
        streams: a.channels.iter().cloned().zip(streams).collect(),
    })
}

/// Reconstructs one channel; on shared boundary frames the later token wins.
pub fn decode_channel(channel: &str, tokens: &[LetterToken], frames: usize, cbs: &CodebookSet) -> Result<Vec<f64>> {
    let cb = cbs.get(channel)?;
    let mut out = vec![0.0; frames];
    for tok in tokens {
        if tok.end() >= frames {
            return Err(Error::Tiling {
                channel: channel.to_string(),
                message: format!("token ends at {} beyond frame count {frames}", tok.end()),
            });
        }
        let dst = &mut out[tok.start..=tok.end()];
        if tok.is_hold() {
            dst.fill(tok.bias);
            continue;
        }
        let centroid = usize::try_from(tok.s)
            .ok()
            .and_then(|s| cb.centroids.get(s))
            .ok_or_else(|| Error::InvalidLetter {
                channel: channel.to_string(),
                s: tok.s.into(),
                k: cb.k(),
            })?;
        for (d, v) in dst.iter_mut().zip(resample(centroid, tok.length)) {
            *d = tok.scale * v + tok.bias;
        }
    }
    Ok(out)
}

pub fn decode(e: &EncodedMotion, cbs: &CodebookSet) -> Result<AngleSequence> {
    e.check_tiling()?;
    if cbs.skeleton != e.skeleton {
        return Err(Error::Schema(format!(
            "codebooks are for skeleton `{}`, tokens for `{}`",
            cbs.skeleton, e.skeleton
        )));
    }
    if e.root.frames() != e.frames {
        return Err(Error::Invalid("root track length differs from frame count".into()));
    }
    let channels: Vec<String> = e.streams.keys().cloned().collect();
    let streams: Vec<_> = e.streams.iter().collect();
    let signals: Vec<Vec<f64>> = streams
        .par_iter()
        .map(|(ch, toks)| decode_channel(ch, toks, e.frames, cbs))
        .collect::<Result<_>>()?;
    let c = channels.len();
    let mut values = vec![0.0; e.frames * c];
    for (ci, sig) in signals.iter().enumerate() {
        for (t, v) in sig.iter().enumerate() {
            values[t * c + ci] = *v;
        }
    }
    Ok(AngleSequence {
        fps: e.fps,
        skeleton: e.skeleton.clone(),
        channels,
        values,
        root: e.root.clone(),
    })
}

pub fn decode_to_positions(e: &EncodedMotion, cbs: &CodebookSet, sk: &SkeletonDef) -> Result<MotionSequence> {
    let a = decode(e, cbs)?;
    a.validate(sk)?;
    angles_to_positions(&a, sk)
}
