//! Cuts a joint-angle channel into monotone segments at its local extrema.
//!
//! Extrema are located on a moving-average-smoothed copy of the signal while
//! the segments themselves carry the raw samples. Low-prominence extrema and
//! boundaries closer than `min_length` are removed in min/max pairs so the
//! surviving boundaries always alternate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationParams {
    /// Odd moving-average width in frames; 1 disables smoothing.
    pub smooth_window: usize,
    /// Minimum prominence (degrees) for an extremum to become a boundary.
    pub min_prominence: f64,
    /// Minimum segment length in frames, counting both boundary frames.
    pub min_length: usize,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            smooth_window: 5,
            min_prominence: 1.0,
            min_length: 3,
        }
    }
}

impl SegmentationParams {
    /// Params that keep every sign change of the raw signal.
    pub fn raw() -> Self {
        Self {
            smooth_window: 1,
            min_prominence: 0.0,
            min_length: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.smooth_window == 0 || self.smooth_window.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "smooth_window must be odd and >= 1, got {}",
                self.smooth_window
            )));
        }
        if !(self.min_prominence >= 0.0 && self.min_prominence.is_finite()) {
            return Err(Error::Config(format!(
                "min_prominence must be >= 0, got {}",
                self.min_prominence
            )));
        }
        if self.min_length < 2 {
            return Err(Error::Config(format!(
                "min_length must be >= 2, got {}",
                self.min_length
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub frame: usize,
    pub kind: ExtremumKind,
    pub prominence: f64,
}

/// A slice of one channel between two consecutive boundaries (inclusive).
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub samples: Vec<f64>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Centered moving average with truncated windows at the edges.
pub fn smooth(signal: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 {
        return signal.to_vec();
    }
    let half = window / 2;
    let n = signal.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let w = &signal[lo..=hi];
            w.iter().sum::<f64>() / w.len() as f64
        })
        .collect()
}

fn check_signal(signal: &[f64]) -> Result<()> {
    if signal.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "signal needs at least 2 frames, got {}",
            signal.len()
        )));
    }
    if let Some(i) = signal.iter().position(|v| !v.is_finite()) {
        return Err(Error::Invalid(format!("non-finite sample at frame {i}")));
    }
    Ok(())
}

/// Sign of a first difference; steps within a few ulps of the operands count
/// as flat so rounding in the moving average cannot fabricate extrema.
fn step_sign(a: f64, b: f64) -> i8 {
    let d = b - a;
    let tol = 4.0 * f64::EPSILON * a.abs().max(b.abs());
    if d > tol {
        1
    } else if d < -tol {
        -1
    } else {
        0
    }
}

/// Interior sign changes of the first difference. A flat run between a rise
/// and a fall is attributed to its midpoint (floor).
fn raw_extrema(s: &[f64]) -> Vec<(usize, ExtremumKind)> {
    let mut out = Vec::new();
    let mut last_sign = 0i8;
    // Index where the current run of zero differences began (a candidate
    // plateau), valid only while last_sign != 0.
    let mut run_start = 0usize;
    for i in 0..s.len() - 1 {
        let sign = step_sign(s[i], s[i + 1]);
        if sign == 0 {
            continue;
        }
        if last_sign != 0 && sign != last_sign {
            let mid = (run_start + i) / 2;
            let kind = if last_sign > 0 {
                ExtremumKind::Max
            } else {
                ExtremumKind::Min
            };
            out.push((mid, kind));
        }
        last_sign = sign;
        run_start = i + 1;
    }
    out
}

/// Working list of boundary candidates: endpoints plus interior extrema.
struct Candidates<'a> {
    values: &'a [f64],
    /// (frame, kind); endpoints have `None`.
    items: Vec<(usize, Option<ExtremumKind>)>,
    tie_tol: f64,
}

impl<'a> Candidates<'a> {
    fn new(values: &'a [f64], extrema: &[(usize, ExtremumKind)]) -> Self {
        let mut items = Vec::with_capacity(extrema.len() + 2);
        items.push((0, None));
        items.extend(extrema.iter().map(|&(f, k)| (f, Some(k))));
        items.push((values.len() - 1, None));
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
        Self {
            values,
            items,
            tie_tol: 1e-9 * (hi - lo),
        }
    }

    fn value(&self, idx: usize) -> f64 {
        self.values[self.items[idx].0]
    }

    fn prominence(&self, idx: usize) -> f64 {
        let v = self.value(idx);
        let left = (v - self.value(idx - 1)).abs();
        let right = (v - self.value(idx + 1)).abs();
        left.min(right)
    }

    fn interior(&self) -> std::ops::Range<usize> {
        1..self.items.len() - 1
    }

    /// Removes interior candidate `idx` together with whichever neighbour
    /// stops being an extremum, so kinds keep alternating. Between two
    /// interior neighbours (same kind once `idx` is gone) the less extreme one
    /// goes; next to an endpoint the interior neighbour goes unless it still
    /// lies beyond the endpoint.
    fn remove(&mut self, idx: usize) {
        let last = self.items.len() - 1;
        let beyond = |kind: Option<ExtremumKind>, a: f64, b: f64| match kind {
            Some(ExtremumKind::Max) => a > b,
            _ => a < b,
        };
        let neighbour = match (idx - 1 == 0, idx + 1 == last) {
            (true, true) => None,
            (false, false) => {
                let (l, r) = (idx - 1, idx + 1);
                let keep_left = beyond(self.items[l].1, self.value(l), self.value(r));
                Some(if keep_left { r } else { l })
            }
            (true, false) => {
                let n = idx + 1;
                (!beyond(self.items[n].1, self.value(n), self.value(0))).then_some(n)
            }
            (false, true) => {
                let n = idx - 1;
                (!beyond(self.items[n].1, self.value(n), self.value(last))).then_some(n)
            }
        };
        match neighbour {
            Some(n) => {
                let (a, b) = if n < idx { (n, idx) } else { (idx, n) };
                self.items.remove(b);
                self.items.remove(a);
            }
            None => {
                self.items.remove(idx);
            }
        }
    }

    fn weakest(&self) -> Option<(usize, f64)> {
        self.interior()
            .map(|i| (i, self.prominence(i)))
            .min_by(|a, b| self.rank(*a, *b))
    }

    /// Orders `(index, prominence)` pairs by prominence, earlier index first
    /// among ties. Prominences within a relative 1e-9 of the signal range tie,
    /// so rounding cannot change the order under an affine change of units.
    fn rank(&self, a: (usize, f64), b: (usize, f64)) -> std::cmp::Ordering {
        if (a.1 - b.1).abs() <= self.tie_tol {
            a.0.cmp(&b.0)
        } else {
            a.1.total_cmp(&b.1)
        }
    }

    fn extrema(&self) -> Vec<Extremum> {
        self.interior()
            .map(|i| Extremum {
                frame: self.items[i].0,
                kind: self.items[i].1.expect("interior candidates are extrema"),
                prominence: self.prominence(i),
            })
            .collect()
    }
}

fn prune(values: &[f64], params: &SegmentationParams) -> Vec<Extremum> {
    let mut cands = Candidates::new(values, &raw_extrema(values));
    while let Some((idx, prom)) = cands.weakest() {
        if prom >= params.min_prominence {
            break;
        }
        cands.remove(idx);
    }
    // Enforce minimum spacing, dropping the lower-prominence interior member
    // of the tightest offending pair first.
    loop {
        let last = cands.items.len() - 1;
        let offending = (0..last)
            .filter(|&i| cands.items[i + 1].0 - cands.items[i].0 + 1 < params.min_length)
            .filter_map(|i| {
                let choices = [i, i + 1]
                    .into_iter()
                    .filter(|&k| k != 0 && k != last)
                    .map(|k| (k, cands.prominence(k)));
                choices.min_by(|a, b| cands.rank(*a, *b))
            })
            .min_by(|a, b| cands.rank(*a, *b));
        match offending {
            Some((idx, _)) => cands.remove(idx),
            None => break,
        }
    }
    cands.extrema()
}

/// Interior extrema of the smoothed signal that survive the prominence and
/// spacing rules, in frame order.
pub fn find_extrema(signal: &[f64], params: &SegmentationParams) -> Result<Vec<Extremum>> {
    check_signal(signal)?;
    params.validate()?;
    let smoothed = smooth(signal, params.smooth_window);
    Ok(prune(&smoothed, params))
}

/// Boundary frames (including both endpoints) for `signal`.
pub fn boundaries(signal: &[f64], params: &SegmentationParams) -> Result<Vec<usize>> {
    let extrema = find_extrema(signal, params)?;
    let mut b = Vec::with_capacity(extrema.len() + 2);
    b.push(0);
    b.extend(extrema.iter().map(|e| e.frame));
    b.push(signal.len() - 1);
    Ok(b)
}

/// Splits `signal` into segments sharing their boundary frames.
pub fn segment_channel(signal: &[f64], params: &SegmentationParams) -> Result<Vec<Segment>> {
    let b = boundaries(signal, params)?;
    Ok(b.windows(2)
        .map(|w| Segment {
            start: w[0],
            end: w[1],
            samples: signal[w[0]..=w[1]].to_vec(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ramp_is_one_segment() {
        let segs = segment_channel(&[0.0, 1.0, 2.0, 3.0, 4.0], &SegmentationParams::default()).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!((segs[0].start, segs[0].end), (0, 4));
    }

    #[test]
    fn single_peak() {
        let e = find_extrema(&[0.0, 1.0, 0.0], &SegmentationParams::raw()).unwrap();
        assert_eq!(
            e,
            vec![Extremum {
                frame: 1,
                kind: ExtremumKind::Max,
                prominence: 1.0
            }]
        );
    }

    #[test]
    fn flat_top_uses_floor_midpoint() {
        let e = find_extrema(&[0.0, 1.0, 1.0, 0.0], &SegmentationParams::raw()).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].frame, 1);
        assert_eq!(e[0].kind, ExtremumKind::Max);
        let e = find_extrema(&[3.0, 1.0, 1.0, 1.0, 3.0], &SegmentationParams::raw()).unwrap();
        assert_eq!((e[0].frame, e[0].kind), (2, ExtremumKind::Min));
    }

    #[test]
    fn plateau_inside_monotone_run_is_not_an_extremum() {
        let e = find_extrema(&[0.0, 1.0, 1.0, 2.0], &SegmentationParams::raw()).unwrap();
        assert!(e.is_empty());
    }

    #[test]
    fn constant_signal_is_one_flat_segment() {
        let segs = segment_channel(&[7.0; 12], &SegmentationParams::default()).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].samples, vec![7.0; 12]);
    }

    #[test]
    fn sine_period_splits_at_quarter_points() {
        let p = 40usize;
        let sig: Vec<f64> = (0..=p)
            .map(|i| 30.0 * (2.0 * PI * i as f64 / p as f64).sin())
            .collect();
        let segs = segment_channel(&sig, &SegmentationParams::default()).unwrap();
        let lens: Vec<usize> = segs.iter().map(|s| s.end - s.start).collect();
        assert_eq!(lens, vec![p / 4, p / 2, p / 4]);
    }

    #[test]
    fn small_prominence_pairs_are_removed() {
        // A 0.5-high ripple on a ramp: the max/min pair goes together.
        let sig = [0.0, 1.0, 2.0, 2.5, 2.0, 3.0, 4.0, 5.0];
        let p = SegmentationParams {
            smooth_window: 1,
            min_prominence: 1.0,
            min_length: 2,
        };
        assert!(find_extrema(&sig, &p).unwrap().is_empty());
        let e = find_extrema(&sig, &SegmentationParams::raw()).unwrap();
        assert_eq!(e.len(), 2);
    }

    #[test]
    fn min_length_merges_close_boundaries() {
        let sig = [0.0, 10.0, 9.0, 20.0, 0.0, 1.0];
        let p = SegmentationParams {
            smooth_window: 1,
            min_prominence: 0.0,
            min_length: 3,
        };
        let b = boundaries(&sig, &p).unwrap();
        for w in b.windows(2) {
            assert!(w[1] - w[0] + 1 >= 3, "{b:?}");
        }
    }

    #[test]
    fn rejects_short_and_non_finite() {
        let p = SegmentationParams::default();
        assert!(segment_channel(&[1.0], &p).is_err());
        assert!(segment_channel(&[1.0, f64::NAN, 2.0], &p).is_err());
        let bad = SegmentationParams {
            smooth_window: 4,
            ..p
        };
        assert!(segment_channel(&[1.0, 2.0], &bad).is_err());
    }
}
