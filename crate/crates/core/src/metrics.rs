//! Reconstruction metrics, corpus splitting and the evaluation protocol.
//!
//! NMSE divides the residual sum of squares by the reference's sum of squares
//! about its mean, and R² is `1 − NMSE` over the same pool. When several
//! channels are pooled each one is centered on its own mean, so a pooled R²
//! never credits a reconstruction for merely getting channel offsets right.

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codebook::{learn_codebook_set, DEFAULT_SHAPE_LEN};
use crate::codec::{decode, encode};
use crate::error::{Error, Result};
use crate::io::{AngleSequence, ChannelScore, EvalReport, MotionSequence};
use crate::kinematics::{angles_to_positions, positions_to_angles, SkeletonDef};
use crate::segmenter::SegmentationParams;
use crate::SCHEMA;

/// RMSE, NMSE and R² of one pool of samples. `nmse` and `r2` are `None` when
/// the reference has zero variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub rmse: f64,
    pub nmse: Option<f64>,
    pub r2: Option<f64>,
    pub n: usize,
}

/// Sufficient statistics of one column (a channel, or one joint axis).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sums {
    pub ss_res: f64,
    pub ss_tot: f64,
    pub n: usize,
}

impl Sums {
    pub fn of(y: &[f64], y_hat: &[f64]) -> Result<Sums> {
        if y.len() != y_hat.len() {
            return Err(Error::LengthMismatch {
                expected: y.len(),
                actual: y_hat.len(),
            });
        }
        if y.is_empty() {
            return Err(Error::InsufficientData("cannot score an empty signal".into()));
        }
        if let Some(i) = y.iter().chain(y_hat).position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite sample at index {}", i % y.len())));
        }
        let ss_res = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum();
        let ss_tot = if y.iter().all(|v| *v == y[0]) {
            0.0
        } else {
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            y.iter().map(|v| (v - mean) * (v - mean)).sum()
        };
        Ok(Sums {
            ss_res,
            ss_tot,
            n: y.len(),
        })
    }

    pub fn add(self, other: Sums) -> Sums {
        Sums {
            ss_res: self.ss_res + other.ss_res,
            ss_tot: self.ss_tot + other.ss_tot,
            n: self.n + other.n,
        }
    }

    pub fn score(&self) -> Score {
        let nmse = (self.ss_tot > 0.0).then(|| self.ss_res / self.ss_tot);
        Score {
            rmse: (self.ss_res / self.n as f64).sqrt(),
            nmse,
            r2: nmse.map(|v| 1.0 - v),
            n: self.n,
        }
    }
}

/// Scores one reference/reconstruction pair.
pub fn score(y: &[f64], y_hat: &[f64]) -> Result<Score> {
    if y.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "scoring needs at least 2 samples, got {}",
            y.len()
        )));
    }
    Ok(Sums::of(y, y_hat)?.score())
}

/// Scores several columns as one pool, each column centered on its own mean.
pub fn score_pooled(columns: &[(&[f64], &[f64])]) -> Result<Score> {
    let mut total = Sums::default();
    for (y, y_hat) in columns {
        total = total.add(Sums::of(y, y_hat)?);
    }
    if total.n < 2 {
        return Err(Error::InsufficientData("scoring needs at least 2 samples".into()));
    }
    Ok(total.score())
}

/// Train/test partition by whole sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// Seeded shuffle of `0..n`; the first `round(fraction · n)` ids (clamped so
/// both sides are non-empty) train. Both id lists are returned sorted.
pub fn split_corpus(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    if n < 2 {
        return Err(Error::InsufficientData(format!("cannot split {n} sequences")));
    }
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let n_train = ((spec.train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut train = ids[..n_train].to_vec();
    let mut test = ids[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Everything the evaluation protocol needs besides the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub segmentation: SegmentationParams,
    pub shape_len: usize,
    pub k_range: (usize, usize),
    pub kmeans_seed: u64,
    pub split: SplitSpec,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            segmentation: SegmentationParams::default(),
            shape_len: DEFAULT_SHAPE_LEN,
            k_range: (8, 24),
            kmeans_seed: 0,
            split: SplitSpec::default(),
        }
    }
}

/// positions → angles → positions over a corpus, pooled per joint axis.
pub fn kinematic_score(corpus: &[MotionSequence], angles: &[AngleSequence], sk: &SkeletonDef) -> Result<Score> {
    let rebuilt: Vec<MotionSequence> = angles
        .par_iter()
        .map(|a| angles_to_positions(a, sk))
        .collect::<Result<_>>()?;
    let j = sk.joints.len();
    let column = |ms: &[MotionSequence], col: usize| -> Vec<f64> {
        ms.iter()
            .flat_map(|m| m.positions.iter().skip(col / 3).step_by(j).map(move |p| p[col % 3]))
            .collect()
    };
    let sums: Vec<Sums> = (0..3 * j)
        .into_par_iter()
        .map(|col| Sums::of(&column(corpus, col), &column(&rebuilt, col)))
        .collect::<Result<_>>()?;
    Ok(sums.into_iter().fold(Sums::default(), Sums::add).score())
}

/// Codec half of the protocol on an angle corpus. The kinematic row of the
/// returned report is left at zero error; [`evaluate_pipeline`] fills it in.
pub fn evaluate_angles(angles: &[AngleSequence], cfg: &EvalConfig) -> Result<EvalReport> {
    let (train, test) = split_corpus(angles.len(), &cfg.split)?;
    let train_set: Vec<AngleSequence> = train.iter().map(|&i| angles[i].clone()).collect();
    let learned = learn_codebook_set(
        &train_set,
        &cfg.segmentation,
        cfg.shape_len,
        cfg.k_range,
        cfg.kmeans_seed,
    )?;
    let cbs = &learned.codebooks;
    // Per test sequence: the reconstruction and which channels used a letter.
    let decoded: Vec<(AngleSequence, Vec<bool>)> = test
        .par_iter()
        .map(|&i| {
            let e = encode(&angles[i], cbs, &cfg.segmentation)?;
            let lettered = e.streams.values().map(|t| t.iter().any(|tok| !tok.is_hold())).collect();
            Ok((decode(&e, cbs)?, lettered))
        })
        .collect::<Result<_>>()?;

    let channels = angles[0].channels.clone();
    let per_channel_sums: Vec<Sums> = (0..channels.len())
        .into_par_iter()
        .map(|c| {
            let y: Vec<f64> = test.iter().flat_map(|&i| angles[i].channel(c)).collect();
            let y_hat: Vec<f64> = decoded.iter().flat_map(|(d, _)| d.channel(c)).collect();
            Sums::of(&y, &y_hat)
        })
        .collect::<Result<_>>()?;
    let aggregate = per_channel_sums
        .iter()
        .copied()
        .fold(Sums::default(), Sums::add);

    let mut flagged = learned.flagged.clone();
    for (c, name) in channels.iter().enumerate() {
        let any_letter = decoded.iter().any(|(_, row)| row[c]);
        if !any_letter && !flagged.contains(name) {
            flagged.push(name.clone());
        }
    }
    flagged.sort_by_key(|n| channels.iter().position(|c| c == n));

    Ok(EvalReport {
        schema: SCHEMA.to_string(),
        skeleton: angles[0].skeleton.clone(),
        per_channel: channels
            .iter()
            .cloned()
            .zip(per_channel_sums.iter().map(|s| ChannelScore::from(s.score())))
            .collect(),
        aggregate: aggregate.score().into(),
        kinematic: ChannelScore::from(Score {
            rmse: 0.0,
            nmse: None,
            r2: None,
            n: 0,
        }),
        split: cfg.split,
        codebook_sizes: cbs
            .codebooks
            .iter()
            .map(|(k, cb)| (k.clone(), cb.k()))
            .collect::<IndexMap<_, _>>(),
        train_sequences: train,
        test_sequences: test,
        flagged_channels: flagged,
    })
}

/// Full protocol on a position corpus: convert to angles, learn codebooks on
/// the training split, reconstruct the test split, and score both the codec
/// and the kinematic round trip.
pub fn evaluate_pipeline(corpus: &[MotionSequence], sk: &SkeletonDef, cfg: &EvalConfig) -> Result<EvalReport> {
    let angles: Vec<AngleSequence> = corpus
        .par_iter()
        .map(|m| positions_to_angles(m, sk).map(|c| c.angles))
        .collect::<Result<_>>()?;
    let mut report = evaluate_angles(&angles, cfg)?;
    report.kinematic = kinematic_score(corpus, &angles, sk)?.into();
    Ok(report)
}
