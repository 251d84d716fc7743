//! Persistent file formats and the sequence types they carry.
//!
//! Motion and angle data are CSV with a one-line self-describing header;
//! codebooks and reports are JSON documents; token streams are JSON lines.
//! Floats are always written in shortest round-trip decimal form, so every
//! save/load pair is an exact inverse on valid data.

mod csv;
mod docs;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::SkeletonDef;
use crate::metrics::{Score, SplitSpec};

pub use self::csv::{
    load_angles, load_motion, read_angles, read_motion, save_angles, save_motion, write_angles,
    write_motion,
};
pub use self::docs::{
    load_codebooks, load_report, load_tokens, load_tokens_checked, parse_codebooks, parse_report,
    parse_tokens, save_codebooks, save_report, save_tokens, write_codebooks, write_report,
    write_tokens,
};

/// Allowed excursion beyond a channel's physiological range before a warning.
pub const RANGE_SLACK_DEG: f64 = 10.0;

/// Global joint positions over time.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    pub fps: f64,
    pub skeleton: String,
    pub joint_names: Vec<String>,
    /// Row-major `frames × joints` positions in meters.
    pub positions: Vec<[f64; 3]>,
}

impl MotionSequence {
    pub fn frames(&self) -> usize {
        if self.joint_names.is_empty() {
            0
        } else {
            self.positions.len() / self.joint_names.len()
        }
    }

    pub fn joints(&self) -> usize {
        self.joint_names.len()
    }

    /// All joint positions of frame `t`.
    pub fn frame(&self, t: usize) -> &[[f64; 3]] {
        let j = self.joints();
        &self.positions[t * j..(t + 1) * j]
    }

    pub fn position(&self, t: usize, joint: usize) -> [f64; 3] {
        self.positions[t * self.joints() + joint]
    }

    /// Checks the sequence against a skeleton: joint names and order, frame
    /// count, finiteness.
    pub fn validate(&self, sk: &SkeletonDef) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Invalid(format!("fps must be positive, got {}", self.fps)));
        }
        check_joint_names(&self.joint_names, sk)?;
        if self.positions.len() != self.frames() * self.joints() {
            return Err(Error::Invalid("position buffer is not frames × joints".into()));
        }
        if self.frames() < 2 {
            return Err(Error::Invalid(format!(
                "motion needs at least 2 frames, got {}",
                self.frames()
            )));
        }
        if let Some(i) = self.positions.iter().position(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::Invalid(format!(
                "non-finite position at frame {}, joint {}",
                i / self.joints(),
                self.joint_names[i % self.joints()]
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_joint_names(names: &[String], sk: &SkeletonDef) -> Result<()> {
    let expected: Vec<&str> = sk.joints.iter().map(|j| j.name.as_str()).collect();
    if names.len() != expected.len() {
        let missing: Vec<&str> = expected
            .iter()
            .copied()
            .filter(|e| !names.iter().any(|n| n == e))
            .collect();
        let extra: Vec<&str> = names
            .iter()
            .map(String::as_str)
            .filter(|n| !expected.contains(n))
            .collect();
        return Err(Error::JointMismatch(format!(
            "skeleton `{}` has {} joints, data has {}; missing: [{}]; unexpected: [{}]",
            sk.name,
            expected.len(),
            names.len(),
            missing.join(", "),
            extra.join(", ")
        )));
    }
    for (i, (n, e)) in names.iter().zip(&expected).enumerate() {
        if n != e {
            return Err(Error::JointMismatch(format!(
                "joint {i} is `{n}`, skeleton `{}` expects `{e}`",
                sk.name
            )));
        }
    }
    Ok(())
}

/// Global pelvis translation (m) and orientation (degrees, `rx, ry, rz`
/// composed in the skeleton's Euler order) per frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RootTrack {
    pub translation: Vec<[f64; 3]>,
    pub orientation: Vec<[f64; 3]>,
}

impl RootTrack {
    pub fn frames(&self) -> usize {
        self.translation.len()
    }
}

/// Joint-angle channels over time.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSequence {
    pub fps: f64,
    pub skeleton: String,
    pub channels: Vec<String>,
    /// Row-major `frames × channels` angles in degrees.
    pub values: Vec<f64>,
    pub root: RootTrack,
}

/// A channel value outside its declared range plus [`RANGE_SLACK_DEG`].
#[derive(Debug, Clone, PartialEq)]
pub struct RangeWarning {
    pub frame: usize,
    pub channel: String,
    pub value: f64,
    pub range: (f64, f64),
}

impl AngleSequence {
    pub fn frames(&self) -> usize {
        self.root.frames()
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn value(&self, t: usize, c: usize) -> f64 {
        self.values[t * self.n_channels() + c]
    }

    /// Copies channel `c` out as a contiguous signal.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        let n = self.n_channels();
        self.values.iter().skip(c).step_by(n).copied().collect()
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    /// Overwrites channel `c` with `signal`.
    pub fn set_channel(&mut self, c: usize, signal: &[f64]) {
        let n = self.n_channels();
        for (t, v) in signal.iter().enumerate() {
            self.values[t * n + c] = *v;
        }
    }

    /// Structural validation; range excursions are reported by
    /// [`AngleSequence::range_warnings`] instead.
    pub fn validate(&self, sk: &SkeletonDef) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Invalid(format!("fps must be positive, got {}", self.fps)));
        }
        let expected: Vec<&str> = sk.channels.iter().map(|c| c.name.as_str()).collect();
        if self.channels.len() != expected.len()
            || self.channels.iter().zip(&expected).any(|(a, b)| a != b)
        {
            return Err(Error::JointMismatch(format!(
                "channels [{}] do not match skeleton `{}` channel table [{}]",
                self.channels.join(", "),
                sk.name,
                expected.join(", ")
            )));
        }
        let t = self.frames();
        if t < 2 {
            return Err(Error::Invalid(format!("angles need at least 2 frames, got {t}")));
        }
        if self.root.orientation.len() != t || self.values.len() != t * self.n_channels() {
            return Err(Error::Invalid("root track and channel matrix disagree on frame count".into()));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!(
                "non-finite angle at frame {}, channel {}",
                i / self.n_channels(),
                self.channels[i % self.n_channels()]
            )));
        }
        let root_ok = self
            .root
            .translation
            .iter()
            .chain(&self.root.orientation)
            .all(|p| p.iter().all(|v| v.is_finite()));
        if !root_ok {
            return Err(Error::Invalid("non-finite root track value".into()));
        }
        Ok(())
    }

    pub fn range_warnings(&self, sk: &SkeletonDef) -> Vec<RangeWarning> {
        let mut out = Vec::new();
        for (c, def) in sk.channels.iter().enumerate().take(self.n_channels()) {
            let (lo, hi) = def.range;
            for t in 0..self.frames() {
                let v = self.value(t, c);
                if v < lo - RANGE_SLACK_DEG || v > hi + RANGE_SLACK_DEG {
                    out.push(RangeWarning {
                        frame: t,
                        channel: def.name.clone(),
                        value: v,
                        range: def.range,
                    });
                }
            }
        }
        out
    }
}

/// Metrics for one channel; `nmse`/`r2` are `None` when the reference has
/// zero variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelScore {
    pub rmse: f64,
    pub nmse: Option<f64>,
    pub r2: Option<f64>,
    pub degenerate: bool,
    pub n_samples: usize,
}

impl From<Score> for ChannelScore {
    fn from(s: Score) -> Self {
        ChannelScore {
            rmse: s.rmse,
            nmse: s.nmse,
            r2: s.r2,
            degenerate: s.nmse.is_none(),
            n_samples: s.n,
        }
    }
}

/// Evaluation output: the codec row (per channel and pooled) plus the
/// kinematic round-trip row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub skeleton: String,
    pub per_channel: IndexMap<String, ChannelScore>,
    pub aggregate: ChannelScore,
    /// positions → angles → positions over the whole corpus (meters).
    pub kinematic: ChannelScore,
    pub split: SplitSpec,
    pub codebook_sizes: IndexMap<String, usize>,
    pub train_sequences: Vec<usize>,
    pub test_sequences: Vec<usize>,
    /// Channels that produced no test segments.
    pub flagged_channels: Vec<String>,
}
