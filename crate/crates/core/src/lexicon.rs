//! Mining co-occurring letters across channels into candidate motion words.
//!
//! Two tokens on different channels are simultaneous when their frame spans
//! overlap by at least `overlap_threshold` of the shorter span. Pairs and
//! triples of letters whose tokens are pairwise simultaneous are counted, as
//! are letters that directly follow each other on one channel. Hold tokens
//! carry no shape and never take part.
//!
//! Support counts distinct tokens: for every member, the number of tokens
//! that took part in at least one occurrence, and the candidate's support is
//! the smallest of these. A token that overlaps two tokens of the same
//! partner letter therefore still counts once, and a triple's support never
//! exceeds that of any pair inside it.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::EncodedMotion;
use crate::error::{Error, Result};

/// One letter of one channel.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Letter {
    pub channel: String,
    pub s: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Relation {
    Simultaneous,
    /// Members follow each other on one channel, `gap` frames apart.
    Sequential { gap: usize },
}

/// Mean and standard deviation of a member's scale and length over the
/// tokens that support it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeStats {
    pub scale_mean: f64,
    pub scale_std: f64,
    pub length_mean: f64,
    pub length_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordCandidate {
    /// Sorted for simultaneous words, in time order for sequential ones.
    pub members: Vec<Letter>,
    pub relation: Relation,
    pub support: usize,
    /// Fraction of corpus frames inside at least one occurrence.
    pub coverage: f64,
    /// Mean overlap of member spans relative to the longer span.
    pub tightness: f64,
    pub attributes: Vec<AttributeStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningParams {
    pub overlap_threshold: f64,
    pub min_support: usize,
    /// 2 for pairs only, 3 to add triples.
    pub max_members: usize,
    pub sequential: bool,
}

impl Default for MiningParams {
    fn default() -> Self {
        Self {
            overlap_threshold: 0.7,
            min_support: 20,
            max_members: 3,
            sequential: true,
        }
    }
}

impl MiningParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.overlap_threshold > 0.0 && self.overlap_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "overlap threshold must lie in (0, 1], got {}",
                self.overlap_threshold
            )));
        }
        if self.min_support == 0 {
            return Err(Error::Config("min_support must be >= 1".into()));
        }
        if !(2..=3).contains(&self.max_members) {
            return Err(Error::Config(format!("max_members must be 2 or 3, got {}", self.max_members)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Tok {
    letter: u32,
    channel: u32,
    start: usize,
    end: usize,
    scale: f64,
}

impl Tok {
    fn span(&self) -> usize {
        self.end - self.start
    }
}

/// Shared frames of two spans, counted as intervals.
fn overlap(a: &Tok, b: &Tok) -> usize {
    a.end.min(b.end).saturating_sub(a.start.max(b.start))
}

fn simultaneous(a: &Tok, b: &Tok, threshold: f64) -> bool {
    let o = overlap(a, b);
    a.channel != b.channel && o > 0 && o as f64 >= threshold * a.span().min(b.span()) as f64
}

fn tightness(a: &Tok, b: &Tok) -> f64 {
    overlap(a, b) as f64 / a.span().max(b.span()) as f64
}

/// Token indices (global) of one occurrence; unused slots are `u32::MAX`.
type Occurrence = [u32; 3];

#[derive(Default)]
struct Tally {
    occurrences: Vec<Occurrence>,
    tight_sum: f64,
}

type Key = (u8, [u32; 3]);
const SIM: u8 = 0;
const SEQ: u8 = 1;
const NONE: u32 = u32::MAX;

/// Ranked word candidates over `corpus`.
pub fn mine_words(corpus: &[EncodedMotion], params: &MiningParams) -> Result<Vec<WordCandidate>> {
    params.validate()?;
    let first = corpus
        .first()
        .ok_or_else(|| Error::InsufficientData("no encoded sequences to mine".into()))?;
    if let Some(e) = corpus.iter().find(|e| e.skeleton != first.skeleton) {
        return Err(Error::Schema(format!(
            "encodings mix skeletons `{}` and `{}`",
            first.skeleton, e.skeleton
        )));
    }

    // Intern letters and flatten tokens, remembering each sequence's range.
    let mut letters: Vec<Letter> = Vec::new();
    let mut letter_ids: HashMap<Letter, u32> = HashMap::new();
    let mut channel_ids: HashMap<&str, u32> = HashMap::new();
    let mut toks: Vec<Tok> = Vec::new();
    let mut lengths: Vec<usize> = Vec::new();
    let mut ranges: Vec<(usize, usize)> = Vec::new();
    let mut total_frames = 0usize;
    for e in corpus {
        let from = toks.len();
        total_frames += e.frames;
        for (ch, stream) in &e.streams {
            let next = channel_ids.len() as u32;
            let channel = *channel_ids.entry(ch.as_str()).or_insert(next);
            for t in stream.iter().filter(|t| !t.is_hold()) {
                let l = Letter {
                    channel: ch.clone(),
                    s: t.s,
                };
                let next = letters.len() as u32;
                let letter = *letter_ids.entry(l.clone()).or_insert_with(|| {
                    letters.push(l);
                    next
                });
                toks.push(Tok {
                    letter,
                    channel,
                    start: t.start,
                    end: t.end(),
                    scale: t.scale,
                });
                lengths.push(t.length);
            }
        }
        ranges.push((from, toks.len()));
    }
    // Lexicographic rank of every letter so member order is by (channel, s).
    let mut order: Vec<u32> = (0..letters.len() as u32).collect();
    order.sort_by(|a, b| letters[*a as usize].cmp(&letters[*b as usize]));
    let mut rank = vec![0u32; letters.len()];
    for (r, l) in order.iter().enumerate() {
        rank[*l as usize] = r as u32;
    }

    let thr = params.overlap_threshold;
    let sorted_members = |ids: &mut [u32]| ids.sort_by_key(|t| rank[toks[*t as usize].letter as usize]);

    // Pairs and sequential pairs, counted per sequence then merged in order.
    let per_seq: Vec<(Vec<(u32, u32)>, HashMap<Key, Tally>)> = ranges
        .par_iter()
        .map(|&(from, to)| {
            let mut idx: Vec<u32> = (from as u32..to as u32).collect();
            idx.sort_by_key(|&i| (toks[i as usize].start, toks[i as usize].channel));
            let mut edges = Vec::new();
            let mut tally: HashMap<Key, Tally> = HashMap::new();
            for (p, &i) in idx.iter().enumerate() {
                let a = &toks[i as usize];
                for &j in &idx[p + 1..] {
                    let b = &toks[j as usize];
                    if b.start > a.end {
                        break;
                    }
                    if b.start == a.end {
                        if params.sequential && b.channel == a.channel {
                            let t = tally.entry((SEQ, [a.letter, b.letter, NONE])).or_default();
                            t.occurrences.push([i, j, NONE]);
                            t.tight_sum += 1.0;
                        }
                        continue;
                    }
                    if simultaneous(a, b, thr) {
                        let mut m = [i, j];
                        sorted_members(&mut m);
                        edges.push((m[0].min(m[1]), m[0].max(m[1])));
                        let key = [toks[m[0] as usize].letter, toks[m[1] as usize].letter, NONE];
                        let t = tally.entry((SIM, key)).or_default();
                        t.occurrences.push([m[0], m[1], NONE]);
                        t.tight_sum += tightness(a, b);
                    }
                }
            }
            (edges, tally)
        })
        .collect();

    let support = |occ: &[Occurrence], slots: usize| -> (usize, Vec<Vec<u32>>) {
        let mut per_member: Vec<Vec<u32>> = (0..slots)
            .map(|m| {
                let mut v: Vec<u32> = occ.iter().map(|o| o[m]).collect();
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
        per_member.iter_mut().for_each(|v| v.shrink_to_fit());
        (per_member.iter().map(Vec::len).min().unwrap_or(0), per_member)
    };

    let mut tallies: HashMap<Key, Tally> = HashMap::new();
    for (_, t) in &per_seq {
        for (k, v) in t {
            let e = tallies.entry(*k).or_default();
            e.occurrences.extend_from_slice(&v.occurrences);
            e.tight_sum += v.tight_sum;
        }
    }

    if params.max_members == 3 {
        let frequent: std::collections::HashSet<[u32; 2]> = tallies
            .iter()
            .filter(|((kind, _), t)| *kind == SIM && support(&t.occurrences, 2).0 >= params.min_support)
            .map(|((_, k), _)| [k[0], k[1]])
            .collect();
        let pair_ok = |a: u32, b: u32| {
            let (x, y) = (toks[a as usize].letter, toks[b as usize].letter);
            let (x, y) = if rank[x as usize] <= rank[y as usize] { (x, y) } else { (y, x) };
            frequent.contains(&[x, y])
        };
        let triples: Vec<HashMap<Key, Tally>> = per_seq
            .par_iter()
            .map(|(edges, _)| {
                let mut adj: HashMap<u32, Vec<u32>> = HashMap::new();
                for &(a, b) in edges {
                    if pair_ok(a, b) {
                        adj.entry(a).or_default().push(b);
                        adj.entry(b).or_default().push(a);
                    }
                }
                adj.values_mut().for_each(|v| v.sort_unstable());
                let mut tally: HashMap<Key, Tally> = HashMap::new();
                let mut nodes: Vec<u32> = adj.keys().copied().collect();
                nodes.sort_unstable();
                for &a in &nodes {
                    let na = &adj[&a];
                    for &b in na.iter().filter(|&&b| b > a) {
                        let nb = &adj[&b];
                        for &c in na.iter().filter(|&&c| c > b) {
                            if nb.binary_search(&c).is_err() {
                                continue;
                            }
                            // Edges only join distinct channels, so a triangle spans three.
                            let (ta, tb, tc) = (&toks[a as usize], &toks[b as usize], &toks[c as usize]);
                            let mut m = [a, b, c];
                            sorted_members(&mut m);
                            let key = m.map(|t| toks[t as usize].letter);
                            let t = tally.entry((SIM, key)).or_default();
                            t.occurrences.push(m);
                            t.tight_sum += (tightness(ta, tb) + tightness(ta, tc) + tightness(tb, tc)) / 3.0;
                        }
                    }
                }
                tally
            })
            .collect();
        for t in triples {
            for (k, v) in t {
                let e = tallies.entry(k).or_default();
                e.occurrences.extend(v.occurrences);
                e.tight_sum += v.tight_sum;
            }
        }
    }

    let seq_of = |tok: u32| ranges.partition_point(|&(_, to)| to <= tok as usize);
    let mut out: Vec<WordCandidate> = tallies
        .into_par_iter()
        .filter_map(|((kind, key), tally)| {
            let slots = key.iter().filter(|&&k| k != NONE).count();
            let (sup, members) = support(&tally.occurrences, slots);
            if sup < params.min_support {
                return None;
            }
            let attributes = members
                .iter()
                .map(|ids| {
                    let scale: Vec<f64> = ids.iter().map(|&t| toks[t as usize].scale).collect();
                    let len: Vec<f64> = ids.iter().map(|&t| lengths[t as usize] as f64).collect();
                    let (scale_mean, scale_std) = mean_std(&scale);
                    let (length_mean, length_std) = mean_std(&len);
                    AttributeStats {
                        scale_mean,
                        scale_std,
                        length_mean,
                        length_std,
                    }
                })
                .collect();
            // Covered frames: the shared interval of each simultaneous
            // occurrence, the joint span of each sequential one.
            let mut spans: Vec<(usize, usize, usize)> = tally
                .occurrences
                .iter()
                .map(|o| {
                    let ts: Vec<&Tok> = o[..slots].iter().map(|&t| &toks[t as usize]).collect();
                    let (lo, hi) = if kind == SIM {
                        (ts.iter().map(|t| t.start).max().unwrap(), ts.iter().map(|t| t.end).min().unwrap())
                    } else {
                        (ts[0].start, ts[slots - 1].end)
                    };
                    (seq_of(o[0]), lo, hi)
                })
                .collect();
            spans.sort_unstable();
            let mut covered = 0usize;
            let mut cur: Option<(usize, usize, usize)> = None;
            for (s, lo, hi) in spans {
                match cur {
                    Some((cs, clo, chi)) if cs == s && lo <= chi => cur = Some((cs, clo, chi.max(hi))),
                    _ => {
                        if let Some((_, clo, chi)) = cur {
                            covered += chi - clo + 1;
                        }
                        cur = Some((s, lo, hi));
                    }
                }
            }
            if let Some((_, clo, chi)) = cur {
                covered += chi - clo + 1;
            }
            Some(WordCandidate {
                members: key[..slots].iter().map(|&l| letters[l as usize].clone()).collect(),
                relation: if kind == SIM {
                    Relation::Simultaneous
                } else {
                    Relation::Sequential { gap: 0 }
                },
                support: sup,
                coverage: covered as f64 / total_frames.max(1) as f64,
                tightness: tally.tight_sum / tally.occurrences.len() as f64,
                attributes,
            })
        })
        .collect();
    out.sort_by(|a, b| {
        b.support
            .cmp(&a.support)
            .then(b.tightness.total_cmp(&a.tightness))
            .then((a.relation != Relation::Simultaneous).cmp(&(b.relation != Relation::Simultaneous)))
            .then(a.members.cmp(&b.members))
    });
    Ok(out)
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
