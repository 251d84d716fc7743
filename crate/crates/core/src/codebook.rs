//! Shape normalization and per-channel k-means codebooks.

use indexmap::IndexMap;
use log::warn;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::AngleSequence;
use crate::segmenter::{segment_channel, Segment, SegmentationParams};

/// Default number of resample points per shape.
pub const DEFAULT_SHAPE_LEN: usize = 32;
/// Amplitudes below this (degrees) are treated as flat.
pub const FLAT_EPS: f64 = 1e-9;
/// Letter id reserved for flat segments.
pub const HOLD: i32 = -1;

const MAX_ITERS: usize = 300;
const REL_TOL: f64 = 1e-8;
const SILHOUETTE_CAP: usize = 2000;

/// Unit-amplitude segment shape and the attributes needed to undo the
/// normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedShape {
    pub values: Vec<f64>,
    /// Amplitude σ (max − min), degrees.
    pub scale: f64,
    /// Minimum μ, degrees.
    pub bias: f64,
    /// Original sample count.
    pub length: usize,
}

impl NormalizedShape {
    pub fn is_flat(&self) -> bool {
        self.scale == 0.0
    }

    /// Maps the shape back to degrees at its original length.
    pub fn denormalize(&self) -> Vec<f64> {
        resample(&self.values, self.length)
            .into_iter()
            .map(|v| self.scale * v + self.bias)
            .collect()
    }
}

/// Linear interpolation of `src` at `n` equispaced parameter points over
/// [0, 1]. Resampling to the source length is the identity.
pub fn resample(src: &[f64], n: usize) -> Vec<f64> {
    let m = src.len();
    if m == 1 || n == 1 {
        return vec![src[0]; n];
    }
    (0..n)
        .map(|i| {
            let num = i * (m - 1);
            let den = n - 1;
            let idx = num / den;
            if num.is_multiple_of(den) {
                return src[idx];
            }
            let frac = (num % den) as f64 / den as f64;
            src[idx] + (src[idx + 1] - src[idx]) * frac
        })
        .collect()
}

pub fn normalize_samples(samples: &[f64], shape_len: usize) -> NormalizedShape {
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = max - min;
    if scale < FLAT_EPS {
        return NormalizedShape {
            values: vec![0.5; shape_len],
            scale: 0.0,
            bias: min,
            length: samples.len(),
        };
    }
    let unit: Vec<f64> = samples.iter().map(|v| (v - min) / scale).collect();
    NormalizedShape {
        values: resample(&unit, shape_len),
        scale,
        bias: min,
        length: samples.len(),
    }
}

pub fn normalize_segment(seg: &Segment, shape_len: usize) -> NormalizedShape {
    normalize_samples(&seg.samples, shape_len)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingInfo {
    pub n_segments: usize,
    pub seed: u64,
    pub inertia: f64,
}

/// The alphabet of one channel: `K` centroid shapes of length `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub skeleton: String,
    pub channel: String,
    pub shape_len: usize,
    pub centroids: Vec<Vec<f64>>,
    pub training: TrainingInfo,
}

impl Codebook {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.centroids.is_empty() {
            return Err(Error::Invalid(format!("codebook `{}` has no letters", self.channel)));
        }
        for (i, c) in self.centroids.iter().enumerate() {
            if c.len() != self.shape_len {
                return Err(Error::LengthMismatch {
                    expected: self.shape_len,
                    actual: c.len(),
                });
            }
            if c.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Invalid(format!(
                    "codebook `{}` centroid {i} leaves [0, 1]",
                    self.channel
                )));
            }
            if self.centroids[..i].contains(c) {
                return Err(Error::Invalid(format!(
                    "codebook `{}` centroid {i} duplicates an earlier one",
                    self.channel
                )));
            }
        }
        Ok(())
    }

    /// Nearest centroid by Euclidean distance; ties go to the lowest index.
    pub fn assign(&self, values: &[f64]) -> Result<(usize, f64)> {
        if values.len() != self.shape_len {
            return Err(Error::LengthMismatch {
                expected: self.shape_len,
                actual: values.len(),
            });
        }
        let (s, d2) = nearest(values, &self.centroids);
        Ok((s, d2.sqrt()))
    }
}

/// Letter for a shape plus its distance to the chosen centroid.
pub fn assign_letter(shape: &NormalizedShape, cb: &Codebook) -> Result<(usize, f64)> {
    cb.assign(&shape.values)
}

/// Per-channel codebooks for one skeleton.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookSet {
    pub skeleton: String,
    pub codebooks: IndexMap<String, Codebook>,
}

impl CodebookSet {
    pub fn get(&self, channel: &str) -> Result<&Codebook> {
        self.codebooks
            .get(channel)
            .ok_or_else(|| Error::MissingCodebook(channel.to_string()))
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(v: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(v, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// One k-means fit.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub inertia: f64,
    /// Inertia after every assignment step, starting with the seeding.
    pub history: Vec<f64>,
}

fn assign_all(data: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    data.par_iter().map(|v| nearest(v, centroids)).unzip()
}

/// Greedy farthest-point seeding: a seeded random first center, then
/// repeatedly the point farthest from all chosen centers.
fn farthest_point_seeds(data: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let first = rng.random_range(0..data.len());
    let mut centroids = vec![data[first].clone()];
    let mut dmin: Vec<f64> = data.par_iter().map(|v| sq_dist(v, &data[first])).collect();
    while centroids.len() < k {
        let (far, _) = dmin
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &d)| if d > best.1 { (i, d) } else { best });
        let c = data[far].clone();
        dmin.par_iter_mut()
            .zip(data.par_iter())
            .for_each(|(d, v)| *d = d.min(sq_dist(v, &c)));
        centroids.push(c);
    }
    centroids
}

/// Lloyd's algorithm from farthest-point seeds. Iteration stops when the
/// relative inertia change drops below 1e-8, after 300 iterations, or if
/// rounding would make inertia rise (the previous state is kept).
pub fn kmeans(data: &[Vec<f64>], k: usize, seed: u64) -> KMeansFit {
    assert!(k >= 1 && k <= data.len(), "k must be in 1..=n");
    let dim = data[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = farthest_point_seeds(data, k, &mut rng);
    let (mut labels, mut dists) = assign_all(data, &centroids);
    let mut inertia: f64 = dists.iter().sum();
    let mut history = vec![inertia];

    for _ in 0..MAX_ITERS {
        if inertia == 0.0 {
            break;
        }
        // Update step: cluster means, accumulated in index order.
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (v, &l) in data.iter().zip(&labels) {
            counts[l] += 1;
            for (s, x) in sums[l].iter_mut().zip(v) {
                *s += x;
            }
        }
        let mut next = centroids.clone();
        let mut taken: Vec<usize> = Vec::new();
        for c in 0..k {
            if counts[c] > 0 {
                next[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                // Empty cluster: reseed at the worst-served point.
                let far = dists
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !taken.contains(i))
                    .fold((0, f64::NEG_INFINITY), |b, (i, &d)| if d > b.1 { (i, d) } else { b })
                    .0;
                taken.push(far);
                next[c] = data[far].clone();
            }
        }
        let (new_labels, new_dists) = assign_all(data, &next);
        let new_inertia: f64 = new_dists.iter().sum();
        if new_inertia > inertia {
            break;
        }
        let rel = (inertia - new_inertia) / inertia;
        centroids = next;
        labels = new_labels;
        dists = new_dists;
        inertia = new_inertia;
        history.push(inertia);
        if rel < REL_TOL {
            break;
        }
    }
    KMeansFit {
        centroids,
        labels,
        inertia,
        history,
    }
}

/// Mean silhouette of `labels` over points whose pairwise distances are in
/// `dist` (row-major `n × n`). Singleton clusters contribute 0.
pub fn silhouette(dist: &[f64], labels: &[usize], k: usize) -> f64 {
    let n = labels.len();
    if k < 2 || n < 2 {
        return 0.0;
    }
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let li = labels[i];
            if sizes[li] <= 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            let row = &dist[i * n..(i + 1) * n];
            for (j, &l) in labels.iter().enumerate() {
                sums[l] += row[j];
            }
            let a = sums[li] / (sizes[li] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != li && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            if !b.is_finite() {
                return 0.0;
            }
            let m = a.max(b);
            if m == 0.0 {
                0.0
            } else {
                (b - a) / m
            }
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    total / n as f64
}

fn dedup_centroids(centroids: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(centroids.len());
    for c in centroids {
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

/// Result of model selection, kept for diagnostics.
#[derive(Debug, Clone)]
pub struct Selection {
    pub codebook: Codebook,
    /// `(K, silhouette, inertia history)` for every candidate K.
    pub candidates: Vec<(usize, f64, Vec<f64>)>,
}

/// Learns a codebook for one channel, selecting K in `k_range` by mean
/// silhouette on a seeded subsample of at most 2000 shapes.
pub fn learn_codebook(
    shapes: &[NormalizedShape],
    skeleton: &str,
    channel: &str,
    k_range: (usize, usize),
    seed: u64,
) -> Result<Codebook> {
    learn_codebook_detailed(shapes, skeleton, channel, k_range, seed).map(|s| s.codebook)
}

pub fn learn_codebook_detailed(
    shapes: &[NormalizedShape],
    skeleton: &str,
    channel: &str,
    k_range: (usize, usize),
    seed: u64,
) -> Result<Selection> {
    let (kmin, kmax) = k_range;
    if kmin < 1 || kmax < kmin {
        return Err(Error::Config(format!("invalid k_range ({kmin}, {kmax})")));
    }
    if shapes.len() < kmin {
        return Err(Error::InsufficientData(format!(
            "channel `{channel}`: {} shapes for kmin = {kmin}",
            shapes.len()
        )));
    }
    let shape_len = shapes[0].values.len();
    if let Some(bad) = shapes.iter().find(|s| s.values.len() != shape_len) {
        return Err(Error::LengthMismatch {
            expected: shape_len,
            actual: bad.values.len(),
        });
    }
    let data: Vec<Vec<f64>> = shapes.iter().map(|s| s.values.clone()).collect();
    let make = |centroids: Vec<Vec<f64>>, inertia: f64| Codebook {
        skeleton: skeleton.to_string(),
        channel: channel.to_string(),
        shape_len,
        centroids,
        training: TrainingInfo {
            n_segments: shapes.len(),
            seed,
            inertia,
        },
    };

    if data.iter().all(|v| *v == data[0]) {
        warn!("channel `{channel}`: all {} shapes identical, using K = 1", data.len());
        return Ok(Selection {
            codebook: make(vec![data[0].clone()], 0.0),
            candidates: vec![(1, 0.0, vec![0.0])],
        });
    }

    let kmax = kmax.min(data.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5111_0e77e);
    let sub: Vec<usize> = if data.len() > SILHOUETTE_CAP {
        let mut idx = index::sample(&mut rng, data.len(), SILHOUETTE_CAP).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..data.len()).collect()
    };
    let m = sub.len();
    let dist: Vec<f64> = (0..m * m)
        .into_par_iter()
        .map(|p| sq_dist(&data[sub[p / m]], &data[sub[p % m]]).sqrt())
        .collect();

    let mut candidates = Vec::new();
    let mut best: Option<(f64, KMeansFit)> = None;
    for k in kmin..=kmax {
        let fit = kmeans(&data, k, seed);
        let sub_labels: Vec<usize> = sub.iter().map(|&i| fit.labels[i]).collect();
        let score = silhouette(&dist, &sub_labels, k);
        candidates.push((k, score, fit.history.clone()));
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, fit));
        }
    }
    let (_, fit) = best.expect("k range is non-empty");
    let k = fit.centroids.len();
    let centroids = dedup_centroids(fit.centroids);
    if centroids.len() < k {
        warn!(
            "channel `{channel}`: {} duplicate centroids collapsed (K {} -> {})",
            k - centroids.len(),
            k,
            centroids.len()
        );
    }
    Ok(Selection {
        codebook: make(centroids, fit.inertia),
        candidates,
    })
}

/// Non-flat normalized shapes of channel `c` across a corpus, in corpus order.
pub fn collect_shapes(
    corpus: &[AngleSequence],
    c: usize,
    params: &SegmentationParams,
    shape_len: usize,
) -> Result<Vec<NormalizedShape>> {
    let mut out = Vec::new();
    for a in corpus {
        for seg in segment_channel(&a.channel(c), params)? {
            let shape = normalize_segment(&seg, shape_len);
            if !shape.is_flat() {
                out.push(shape);
            }
        }
    }
    Ok(out)
}

/// A codebook set plus the channels whose data could not honour `k_range`.
#[derive(Debug, Clone)]
pub struct LearnedSet {
    pub codebooks: CodebookSet,
    pub flagged: Vec<String>,
}

/// Learns one codebook per channel of `corpus`. A channel with fewer non-flat
/// shapes than `kmin` is clamped to what it has; a channel with none gets a
/// single rising-ramp letter. Both cases are flagged.
pub fn learn_codebook_set(
    corpus: &[AngleSequence],
    params: &SegmentationParams,
    shape_len: usize,
    k_range: (usize, usize),
    seed: u64,
) -> Result<LearnedSet> {
    let first = corpus
        .first()
        .ok_or_else(|| Error::InsufficientData("no training sequences".into()))?;
    if shape_len < 2 {
        return Err(Error::Config(format!("shape length must be >= 2, got {shape_len}")));
    }
    if let Some(a) = corpus
        .iter()
        .find(|a| a.channels != first.channels || a.skeleton != first.skeleton)
    {
        return Err(Error::Schema(format!(
            "training sequences disagree on skeleton or channels (`{}` vs `{}`)",
            first.skeleton, a.skeleton
        )));
    }
    let (kmin, kmax) = k_range;
    if kmin < 1 || kmax < kmin {
        return Err(Error::Config(format!("invalid k_range ({kmin}, {kmax})")));
    }
    let learned: Vec<(Codebook, bool)> = (0..first.channels.len())
        .into_par_iter()
        .map(|c| {
            let name = &first.channels[c];
            let shapes = collect_shapes(corpus, c, params, shape_len)?;
            if shapes.is_empty() {
                warn!("channel `{name}`: no non-flat segments, using a single ramp letter");
                let ramp = (0..shape_len).map(|i| i as f64 / (shape_len - 1) as f64).collect();
                let cb = Codebook {
                    skeleton: first.skeleton.clone(),
                    channel: name.clone(),
                    shape_len,
                    centroids: vec![ramp],
                    training: TrainingInfo {
                        n_segments: 0,
                        seed,
                        inertia: 0.0,
                    },
                };
                return Ok((cb, true));
            }
            let short = shapes.len() < kmin;
            let range = if short {
                warn!(
                    "channel `{name}`: {} shapes for kmin = {kmin}, clamping k_range",
                    shapes.len()
                );
                (shapes.len(), shapes.len())
            } else {
                k_range
            };
            let cb = learn_codebook(&shapes, &first.skeleton, name, range, seed)?;
            Ok((cb, short))
        })
        .collect::<Result<_>>()?;
    let flagged = learned
        .iter()
        .filter(|(_, f)| *f)
        .map(|(cb, _)| cb.channel.clone())
        .collect();
    Ok(LearnedSet {
        codebooks: CodebookSet {
            skeleton: first.skeleton.clone(),
            codebooks: learned
                .into_iter()
                .map(|(cb, _)| (cb.channel.clone(), cb))
                .collect(),
        },
        flagged,
    })
}
