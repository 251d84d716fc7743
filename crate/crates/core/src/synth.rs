//! Deterministic synthetic motion built from periodic joint-angle waveforms.
//!
//! A [`GaitTemplate`] describes every channel as a short sum of harmonics of
//! one cycle. Each generated sequence draws its own amplitude scale, cycle
//! length, phase and heading once and applies them to all channels alike, so
//! channels stay phase-locked. Angles are rendered to positions by forward
//! kinematics.

use std::f64::consts::TAU;
use std::path::Path;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{AngleSequence, MotionSequence, RootTrack};
use crate::kinematics::{angles_to_positions, DofKind, SkeletonDef};

/// Names accepted by [`GaitTemplate::builtin`].
pub const BUILTIN_TEMPLATES: [&str; 4] = ["walk", "walk_fast", "jump", "idle"];

const WALK: &str = include_str!("../assets/templates/walk.toml");
const WALK_FAST: &str = include_str!("../assets/templates/walk_fast.toml");
const JUMP: &str = include_str!("../assets/templates/jump.toml");
const IDLE: &str = include_str!("../assets/templates/idle.toml");

/// Grid used to find a waveform's extremes for normalization.
const GRID: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    /// Multiple of the base frequency.
    pub k: u32,
    pub weight: f64,
    /// Fraction of one cycle of this harmonic.
    #[serde(default)]
    pub phase: f64,
}

/// `offset + amplitude · w(t)` where `w` is the harmonic sum rescaled to
/// [−1, 1] over one cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waveform {
    #[serde(default)]
    pub offset: f64,
    pub amplitude: f64,
    /// Fraction of the gait cycle.
    #[serde(default)]
    pub phase: f64,
    pub harmonics: Vec<Harmonic>,
}

impl Waveform {
    fn raw(&self, cycle: f64) -> f64 {
        self.harmonics
            .iter()
            .map(|h| h.weight * (TAU * (h.k as f64 * cycle + h.phase)).sin())
            .sum()
    }

    fn check(&self, what: &str) -> Result<(f64, f64)> {
        let bad = |m: String| Error::Config(format!("{what}: {m}"));
        if self.harmonics.is_empty() || self.harmonics.len() > 3 {
            return Err(bad(format!("needs 1 to 3 harmonics, got {}", self.harmonics.len())));
        }
        if self.harmonics.iter().any(|h| h.k == 0 || !h.weight.is_finite() || !h.phase.is_finite()) {
            return Err(bad("harmonics need k >= 1 and finite weight and phase".into()));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite() && self.offset.is_finite() && self.phase.is_finite()) {
            return Err(bad("offset, phase and a non-negative amplitude must be finite".into()));
        }
        let (lo, hi) = (0..GRID)
            .map(|i| self.raw(i as f64 / GRID as f64))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if !(hi - lo > 1e-9) {
            return Err(bad("harmonic sum is constant".into()));
        }
        Ok((lo, hi))
    }
}

/// A waveform with its normalization constants resolved.
#[derive(Debug, Clone)]
struct Prepared {
    wave: Waveform,
    lo: f64,
    hi: f64,
}

impl Prepared {
    fn new(wave: &Waveform, what: &str) -> Result<Self> {
        let (lo, hi) = wave.check(what)?;
        Ok(Self {
            wave: wave.clone(),
            lo,
            hi,
        })
    }

    fn unit(&self, cycle: f64) -> f64 {
        2.0 * (self.wave.raw(cycle + self.wave.phase) - self.lo) / (self.hi - self.lo) - 1.0
    }

    fn sample(&self, cycle: f64, gain: f64) -> f64 {
        self.wave.offset + self.wave.amplitude * gain * self.unit(cycle)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RootMotion {
    /// Pelvis height above the ground, meters.
    pub height: f64,
    /// Forward speed, m/s.
    pub speed: f64,
    /// Vertical oscillation added to `height`, meters.
    pub bob: Option<Waveform>,
}

impl Default for RootMotion {
    fn default() -> Self {
        Self {
            height: 0.93,
            speed: 0.0,
            bob: None,
        }
    }
}

/// Per-sequence random variation, shared by all channels of a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Variation {
    /// Relative amplitude change, drawn from ±`amplitude`.
    pub amplitude: f64,
    /// Relative cycle-length change, drawn from ±`period`.
    pub period: f64,
    /// Start phase drawn from [0, `phase`) cycles.
    pub phase: f64,
    /// Heading about the vertical axis drawn from ±`heading_deg`.
    pub heading_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaitTemplate {
    pub name: String,
    pub fps: f64,
    /// Sequence length, seconds.
    pub duration: f64,
    /// Gait cycle, seconds.
    pub period: f64,
    /// Standard deviation of Gaussian noise added to every channel, degrees.
    #[serde(default)]
    pub noise_deg: f64,
    /// Mixed into the generation seed.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub root: RootMotion,
    #[serde(default)]
    pub variation: Variation,
    /// Channels left out stay at zero.
    pub channels: IndexMap<String, Waveform>,
}

impl GaitTemplate {
    pub fn builtin(name: &str) -> Result<Self> {
        let text = match name {
            "walk" => WALK,
            "walk_fast" => WALK_FAST,
            "jump" => JUMP,
            "idle" => IDLE,
            _ => {
                return Err(Error::Config(format!(
                    "unknown template `{name}` (built-in: {})",
                    BUILTIN_TEMPLATES.join(", ")
                )))
            }
        };
        Self::from_toml(text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("template: {}", e.message())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// The same template with per-sequence variation and noise switched off.
    pub fn fixed(&self) -> Self {
        Self {
            variation: Variation::default(),
            noise_deg: 0.0,
            ..self.clone()
        }
    }

    pub fn frames(&self) -> usize {
        (self.duration * self.fps).round() as usize
    }

    /// Checks timing, waveforms and that every channel stays inside its range
    /// under the largest amplitude variation. Bend channels must stay strictly
    /// positive so twist channels above them remain observable.
    pub fn validate(&self, sk: &SkeletonDef) -> Result<()> {
        self.prepare(sk).map(|_| ())
    }

    fn prepare(&self, sk: &SkeletonDef) -> Result<(Vec<Option<Prepared>>, Option<Prepared>)> {
        let cfg = |m: String| Error::Config(format!("template `{}`: {m}", self.name));
        if !(self.fps > 0.0 && self.period > 0.0 && self.duration > 0.0) {
            return Err(cfg("fps, period and duration must be positive".into()));
        }
        if self.frames() < 2 {
            return Err(cfg("duration covers fewer than 2 frames".into()));
        }
        if !(self.noise_deg >= 0.0 && self.noise_deg.is_finite()) {
            return Err(cfg("noise_deg must be >= 0".into()));
        }
        let v = &self.variation;
        if !(0.0..1.0).contains(&v.amplitude) || !(0.0..1.0).contains(&v.period) || !(v.phase >= 0.0) || !(v.heading_deg >= 0.0) {
            return Err(cfg("variation amplitude and period must lie in [0, 1), phase and heading >= 0".into()));
        }
        for name in self.channels.keys() {
            if sk.channel_index(name).is_none() {
                return Err(Error::UnknownChannel(name.clone()));
            }
        }
        let gain = 1.0 + v.amplitude;
        let mut out = Vec::with_capacity(sk.channels.len());
        for ch in &sk.channels {
            let Some(w) = self.channels.get(&ch.name) else {
                if ch.dof_kind == DofKind::Bend {
                    return Err(cfg(format!("bend channel `{}` must be given a positive waveform", ch.name)));
                }
                out.push(None);
                continue;
            };
            let p = Prepared::new(w, &ch.name)?;
            let (lo, hi) = (w.offset - w.amplitude * gain, w.offset + w.amplitude * gain);
            if lo < ch.range.0 || hi > ch.range.1 {
                return Err(cfg(format!(
                    "`{}` reaches [{lo}, {hi}] outside its range [{}, {}]",
                    ch.name, ch.range.0, ch.range.1
                )));
            }
            if ch.dof_kind == DofKind::Bend && lo <= 0.0 {
                return Err(cfg(format!("bend channel `{}` must stay above 0, reaches {lo}", ch.name)));
            }
            out.push(Some(p));
        }
        let bob = self
            .root
            .bob
            .as_ref()
            .map(|w| Prepared::new(w, "root bob"))
            .transpose()?;
        Ok((out, bob))
    }
}

/// Joint-angle sequences drawn from `template`; sequence `i` depends only on
/// (`template`, `seed`, `i`).
pub fn generate_angles(template: &GaitTemplate, sk: &SkeletonDef, n: usize, seed: u64) -> Result<Vec<AngleSequence>> {
    let (waves, bob) = template.prepare(sk)?;
    let frames = template.frames();
    let noise = Normal::new(0.0, template.noise_deg).expect("validated noise");
    let v = template.variation;
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ template.seed.rotate_left(32));
            rng.set_stream(i as u64);
            let mut draw = |r: f64| if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
            let gain = 1.0 + draw(v.amplitude);
            let period = template.period * (1.0 + draw(v.period));
            let heading = draw(v.heading_deg);
            let start = if v.phase > 0.0 { rng.random_range(0.0..v.phase) } else { 0.0 };

            let c = sk.channels.len();
            let mut values = Vec::with_capacity(frames * c);
            let mut root = RootTrack::default();
            let (sin_h, cos_h) = heading.to_radians().sin_cos();
            for f in 0..frames {
                let t = f as f64 / template.fps;
                let cycle = start + t / period;
                for w in &waves {
                    let mut a = w.as_ref().map_or(0.0, |p| p.sample(cycle, gain));
                    if template.noise_deg > 0.0 && w.is_some() {
                        a += noise.sample(&mut rng);
                    }
                    values.push(a);
                }
                let dist = template.root.speed * t;
                let y = template.root.height + bob.as_ref().map_or(0.0, |p| p.sample(cycle, 1.0));
                root.translation.push([dist * sin_h, y, dist * cos_h]);
                root.orientation.push([0.0, heading, 0.0]);
            }
            AngleSequence {
                fps: template.fps,
                skeleton: sk.name.clone(),
                channels: sk.channel_names(),
                values,
                root,
            }
        })
        .collect())
}

/// Position sequences rendered from [`generate_angles`].
pub fn generate(template: &GaitTemplate, sk: &SkeletonDef, n: usize, seed: u64) -> Result<Vec<MotionSequence>> {
    generate_angles(template, sk, n, seed)?
        .par_iter()
        .map(|a| angles_to_positions(a, sk))
        .collect()
}
