//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints exactly one PASS/FAIL line; exits non-zero if any fails.

use std::path::Path;
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use lingomotion::cli::run;
use lingomotion::codebook::{
    collect_shapes, learn_codebook_detailed, Codebook, CodebookSet, TrainingInfo,
};
use lingomotion::codec::{decode, encode, EncodedMotion};
use lingomotion::io::{self, AngleSequence, MotionSequence};
use lingomotion::kinematics::{angles_to_positions, positions_to_angles, SkeletonDef};
use lingomotion::lexicon::{mine_words, MiningParams, Relation};
use lingomotion::metrics::{evaluate_pipeline, kinematic_score, score, EvalConfig, SplitSpec};
use lingomotion::segmenter::{find_extrema, segment_channel, ExtremumKind, SegmentationParams};
use lingomotion::synth::{generate_angles, GaitTemplate, BUILTIN_TEMPLATES};
use lingomotion::{codebook, SCHEMA};
use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Angle corpus cycling through `templates`, `per` sequences each.
fn corpus(templates: &[&str], per: usize, noise: f64, seed: u64, sk: &SkeletonDef) -> Vec<AngleSequence> {
    templates
        .iter()
        .enumerate()
        .flat_map(|(i, name)| {
            let mut t = GaitTemplate::builtin(name).unwrap();
            t.noise_deg = noise;
            generate_angles(&t, sk, per, seed.wrapping_add(i as u64)).unwrap()
        })
        .collect()
}

fn kinematic_round_trip() -> Outcome {
    let start = Instant::now();
    let sk = SkeletonDef::smpl22();
    let truth = corpus(&BUILTIN_TEMPLATES, 25, 0.0, 100, &sk);
    let motions: Vec<MotionSequence> = truth
        .iter()
        .map(|a| angles_to_positions(a, &sk))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let back: Vec<AngleSequence> = motions
        .iter()
        .map(|m| positions_to_angles(m, &sk).map(|c| c.angles))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let max_err = truth
        .iter()
        .zip(&back)
        .flat_map(|(a, b)| a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    let pos = kinematic_score(&motions, &back, &sk).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    check(max_err < 1e-4, || format!("max angle error {max_err:e} deg"))?;
    check(pos.rmse < 1e-6, || format!("position RMSE {:e} m", pos.rmse))?;
    check(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} sequences, max angle error {max_err:.2e} deg, position RMSE {:.2e} m, {elapsed:.2?}",
        truth.len(),
        pos.rmse
    ))
}

/// Shared by the fidelity and codebook-size criteria.
fn fidelity_report() -> Result<(lingomotion::EvalReport, Duration), String> {
    let start = Instant::now();
    let sk = SkeletonDef::smpl22();
    let angles = corpus(&BUILTIN_TEMPLATES, 50, 0.5, 200, &sk);
    let motions: Vec<MotionSequence> = angles
        .iter()
        .map(|a| angles_to_positions(a, &sk))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let cfg = EvalConfig {
        split: SplitSpec {
            train_fraction: 0.7,
            seed: 2,
        },
        ..EvalConfig::default()
    };
    let report = evaluate_pipeline(&motions, &sk, &cfg).map_err(|e| e.to_string())?;
    Ok((report, start.elapsed()))
}

fn codec_fidelity(report: &lingomotion::EvalReport, elapsed: Duration) -> Outcome {
    let agg = &report.aggregate;
    let r2 = agg.r2.ok_or("degenerate aggregate")?;
    let nmse = agg.nmse.ok_or("degenerate aggregate")?;
    let detail = format!(
        "{} train / {} test, RMSE {:.3} deg, NMSE {nmse:.4}, R2 {r2:.4}, {elapsed:.2?}",
        report.train_sequences.len(),
        report.test_sequences.len(),
        agg.rmse
    );
    check(r2 >= 0.70, || format!("R2 {r2} < 0.70; {detail}"))?;
    check(nmse <= 0.15, || format!("NMSE {nmse} > 0.15; {detail}"))?;
    check(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(detail)
}

fn in_codebook_exactness() -> Outcome {
    // Dyadic, strictly monotone shapes with integer scale and bias keep every
    // step of normalization and reconstruction exact.
    let l = 32;
    let ramp: Vec<f64> = (0..l).map(|i| if i == l - 1 { 1.0 } else { i as f64 / 32.0 }).collect();
    let square: Vec<f64> = (0..l)
        .map(|i| if i == l - 1 { 1.0 } else { (i * i) as f64 / 1024.0 })
        .collect();
    let rev = |v: &[f64]| v.iter().rev().copied().collect::<Vec<f64>>();
    let centroids = vec![ramp.clone(), rev(&ramp), square.clone(), rev(&square)];
    let cb = Codebook {
        skeleton: "test".into(),
        channel: "ch".into(),
        shape_len: l,
        centroids: centroids.clone(),
        training: TrainingInfo {
            n_segments: 0,
            seed: 0,
            inertia: 0.0,
        },
    };
    let cbs = CodebookSet {
        skeleton: "test".into(),
        codebooks: IndexMap::from([("ch".to_string(), cb)]),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for _ in 0..50 {
        // Alternate rising and falling letters, continuous at the joins.
        let mut signal: Vec<f64> = Vec::new();
        let mut level = rng.random_range(-60..0) as f64;
        for seg in 0..rng.random_range(1..8) {
            let rising = seg % 2 == 0;
            let c = &centroids[if rising { 0 } else { 1 } + 2 * rng.random_range(0..2usize)];
            let sigma = rng.random_range(2..90) as f64;
            let mu = if rising { level } else { level - sigma };
            let piece: Vec<f64> = c.iter().map(|v| sigma * v + mu).collect();
            level = *piece.last().unwrap();
            if signal.is_empty() {
                signal.extend(&piece);
            } else {
                signal.extend(&piece[1..]);
            }
        }
        let a = AngleSequence {
            fps: 30.0,
            skeleton: "test".into(),
            channels: vec!["ch".into()],
            values: signal.clone(),
            root: lingomotion::RootTrack {
                translation: vec![[0.0; 3]; signal.len()],
                orientation: vec![[0.0; 3]; signal.len()],
            },
        };
        let params = SegmentationParams::raw();
        let e = encode(&a, &cbs, &params).map_err(|e| e.to_string())?;
        let d = decode(&e, &cbs).map_err(|e| e.to_string())?;
        let s = score(&a.values, &d.values).map_err(|e| e.to_string())?;
        worst = worst.max(s.rmse);
        checked += 1;
    }
    check(worst == 0.0, || format!("worst RMSE {worst:e}"))?;
    Ok(format!("{checked} signals, RMSE exactly 0"))
}

fn segmentation_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut violations: Vec<String> = Vec::new();
    let n_signals = 1000;
    for case in 0..n_signals {
        let n = rng.random_range(2..300);
        // Half integer random walks (many exact ties), half real-valued.
        let signal: Vec<f64> = if case % 2 == 0 {
            let mut v = 0i64;
            (0..n)
                .map(|_| {
                    v += rng.random_range(-3..=3);
                    v as f64
                })
                .collect()
        } else {
            let mut v = 0.0;
            (0..n)
                .map(|_| {
                    v += rng.random_range(-2.0..2.0);
                    v
                })
                .collect()
        };
        let params = SegmentationParams {
            smooth_window: [1, 3, 5, 7][rng.random_range(0..4)],
            min_prominence: rng.random_range(0.0..5.0),
            min_length: rng.random_range(2..6),
        };
        let mut fail = |what: &str| violations.push(format!("signal {case}: {what}"));

        let segs = segment_channel(&signal, &params).unwrap();
        let mut rebuilt = segs[0].samples.clone();
        for s in &segs[1..] {
            rebuilt.extend(&s.samples[1..]);
        }
        if rebuilt != signal || segs[0].start != 0 || segs.last().unwrap().end != n - 1 {
            fail("coverage");
        }
        if segs.windows(2).any(|w| w[0].end != w[1].start) || segs.iter().any(|s| s.len() < 2) {
            fail("tiling");
        }
        if segs.len() > 1 && segs.iter().any(|s| s.len() < params.min_length) {
            fail("min_length");
        }

        let ext = find_extrema(&signal, &params).unwrap();
        if ext.windows(2).any(|w| w[0].kind == w[1].kind) {
            fail("alternation");
        }
        let sm = lingomotion::segmenter::smooth(&signal, params.smooth_window);
        let mut bounds = vec![0];
        bounds.extend(ext.iter().map(|e| e.frame));
        bounds.push(n - 1);
        for (i, e) in ext.iter().enumerate() {
            let (l, v, r) = (sm[bounds[i]], sm[e.frame], sm[bounds[i + 2]]);
            let ok = match e.kind {
                ExtremumKind::Max => v >= l && v >= r,
                ExtremumKind::Min => v <= l && v <= r,
            };
            if !ok {
                fail("extremum not beyond its neighbours");
            }
        }

        let mut sorted = signal.clone();
        sorted.sort_by(f64::total_cmp);
        if segment_channel(&sorted, &params).unwrap().len() != 1 {
            fail("monotone input split");
        }
        sorted.reverse();
        if segment_channel(&sorted, &params).unwrap().len() != 1 {
            fail("monotone decreasing input split");
        }

        let a = rng.random_range(0.1..10.0);
        let b = rng.random_range(-100.0..100.0);
        let scaled: Vec<f64> = signal.iter().map(|v| a * v + b).collect();
        let p2 = SegmentationParams {
            min_prominence: a * params.min_prominence,
            ..params
        };
        let b1 = lingomotion::segmenter::boundaries(&signal, &params).unwrap();
        let b2 = lingomotion::segmenter::boundaries(&scaled, &p2).unwrap();
        if b1 != b2 {
            fail("affine equivariance");
        }
    }
    check(violations.is_empty(), || {
        format!("{} violations, first: {}", violations.len(), violations[0])
    })?;
    Ok(format!("{n_signals} signals, 0 violations"))
}

fn run_ok(args: &[&str]) -> Result<(), String> {
    let mut argv = vec!["lingomotion"];
    argv.extend_from_slice(args);
    match run(argv) {
        0 => Ok(()),
        code => Err(format!("`{}` exited {code}", args.join(" "))),
    }
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = walk(dir)
        .into_iter()
        .map(|p| {
            let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
            (rel, std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

fn determinism() -> Outcome {
    let sk = SkeletonDef::smpl22();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let angles = corpus(&["walk", "jump"], 6, 0.5, 5, &sk);
    let src = tmp.path().join("angles");
    std::fs::create_dir(&src).unwrap();
    for (i, a) in angles.iter().enumerate() {
        io::save_angles(a, src.join(format!("seq_{i:02}.csv"))).map_err(|e| e.to_string())?;
    }
    let mut outputs = Vec::new();
    for run_id in 0..2 {
        let out = tmp.path().join(format!("run{run_id}"));
        let (cb, tok) = (out.join("codebooks.json"), out.join("tokens"));
        let (src_s, cb_s, tok_s) = (src.to_str().unwrap(), cb.to_str().unwrap(), tok.to_str().unwrap());
        run_ok(&["learn", "--corpus", src_s, "--out", cb_s, "--seed", "9", "--k-min", "4", "--k-max", "10"])?;
        run_ok(&["encode", "--in", src_s, "--codebooks", cb_s, "--out", tok_s])?;
        outputs.push(read_all(&out));
    }
    check(outputs[0] == outputs[1], || "learn/encode outputs differ between runs".into())?;

    // Inertia is non-increasing at every Lloyd iteration of every candidate K.
    let params = SegmentationParams::default();
    let mut histories = 0;
    for c in 0..angles[0].n_channels() {
        let shapes = collect_shapes(&angles, c, &params, codebook::DEFAULT_SHAPE_LEN).unwrap();
        if shapes.len() < 4 {
            continue;
        }
        for seed in [0, 1] {
            let sel = learn_codebook_detailed(&shapes, "smpl22", &angles[0].channels[c], (2, 12), seed)
                .map_err(|e| e.to_string())?;
            for (k, _, hist) in &sel.candidates {
                histories += 1;
                if let Some(w) = hist.windows(2).find(|w| w[1] > w[0]) {
                    return Err(format!("channel {c}, K {k}: inertia rose {} -> {}", w[0], w[1]));
                }
            }
        }
    }
    Ok(format!(
        "{} identical files over two runs, {histories} inertia histories non-increasing",
        outputs[0].len()
    ))
}

fn codebook_sizes(report: &lingomotion::EvalReport, k_range: (usize, usize)) -> Outcome {
    let (lo, hi) = k_range;
    let outside: Vec<String> = report
        .codebook_sizes
        .iter()
        .filter(|(_, k)| **k < lo || **k > hi)
        .map(|(c, k)| format!("{c}={k}"))
        .collect();
    check(report.codebook_sizes.len() == 28, || {
        format!("{} codebooks", report.codebook_sizes.len())
    })?;
    check(outside.is_empty(), || format!("outside {k_range:?}: {}", outside.join(", ")))?;
    let min = report.codebook_sizes.values().min().unwrap();
    let max = report.codebook_sizes.values().max().unwrap();
    Ok(format!("28 channels, K from {min} to {max} within {k_range:?}"))
}

fn metric_identities() -> Outcome {
    let s = score(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 2.0, 4.0]).map_err(|e| e.to_string())?;
    let (nmse, r2) = (s.nmse.unwrap(), s.r2.unwrap());
    check((s.rmse - 0.5).abs() <= 1e-12, || format!("rmse {}", s.rmse))?;
    check((nmse - 0.2).abs() <= 1e-12, || format!("nmse {nmse}"))?;
    check((r2 - 0.8).abs() <= 1e-12, || format!("r2 {r2}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let n = rng.random_range(2..200);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-90.0..90.0)).collect();
        let p = score(&y, &y).unwrap();
        check(p.rmse == 0.0 && p.nmse == Some(0.0) && p.r2 == Some(1.0), || format!("perfect: {p:?}"))?;
        let mean = y.iter().sum::<f64>() / n as f64;
        let c = score(&y, &vec![mean; n]).unwrap();
        check((c.nmse.unwrap() - 1.0).abs() <= 1e-12 && c.r2.unwrap().abs() <= 1e-12, || {
            format!("constant predictor: {c:?}")
        })?;
    }
    Ok("hand example, 100 perfect and 100 constant-predictor cases".into())
}

fn invariance() -> Outcome {
    let sk = SkeletonDef::smpl22();
    let motions: Vec<MotionSequence> = corpus(&BUILTIN_TEMPLATES, 5, 0.5, 8, &sk)
        .iter()
        .map(|a| angles_to_positions(a, &sk).unwrap())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for m in &motions {
        let base = positions_to_angles(m, &sk).map_err(|e| e.to_string())?.angles;
        for mode in 0..3 {
            let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let rot = if mode == 0 {
                Rotation3::identity()
            } else {
                Rotation3::from_scaled_axis(axis.normalize() * rng.random_range(-3.1..3.1))
            };
            let shift = if mode == 1 {
                Vector3::zeros()
            } else {
                Vector3::new(rng.random_range(-50.0..50.0), rng.random_range(-5.0..5.0), rng.random_range(-50.0..50.0))
            };
            let moved = MotionSequence {
                positions: m
                    .positions
                    .iter()
                    .map(|p| {
                        let v = rot * Vector3::from(*p) + shift;
                        [v.x, v.y, v.z]
                    })
                    .collect(),
                ..m.clone()
            };
            let a = positions_to_angles(&moved, &sk).map_err(|e| e.to_string())?.angles;
            for (x, y) in base.values.iter().zip(&a.values) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    check(worst <= 1e-9, || format!("max channel change {worst:e} deg"))?;
    Ok(format!(
        "{} sequences x 3 rigid motions, max channel change {worst:.2e} deg",
        motions.len()
    ))
}

fn cli_pipeline() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = tmp.path().join("pipeline.cfg");
    std::fs::write(&cfg, "k_range = [8, 16]\n[split]\ntrain_fraction = 0.7\nseed = 1\n").unwrap();
    let cfg_s = cfg.to_str().unwrap();
    let mut outputs = Vec::new();
    for run_id in 0..2 {
        let root = tmp.path().join(format!("run{run_id}"));
        let p = |s: &str| root.join(s).to_string_lossy().into_owned();
        run_ok(&["synth", "--template", "walk", "--n", "10", "--seed", "7", "--noise", "0.5", "--out", &p("motion")])?;
        run_ok(&["synth", "--template", "jump", "--n", "4", "--seed", "8", "--noise", "0.5", "--out", &p("motion")])?;
        run_ok(&["synth", "--template", "idle", "--n", "4", "--seed", "9", "--noise", "0.5", "--out", &p("motion")])?;
        run_ok(&["angles", "--in", &p("motion"), "--out", &p("angles")])?;
        run_ok(&["learn", "--config", cfg_s, "--corpus", &p("angles"), "--out", &p("codebooks.json")])?;
        run_ok(&["encode", "--config", cfg_s, "--in", &p("angles"), "--codebooks", &p("codebooks.json"), "--out", &p("tokens")])?;
        run_ok(&["decode", "--tokens", &p("tokens"), "--codebooks", &p("codebooks.json"), "--out", &p("decoded")])?;
        run_ok(&["eval", "--config", cfg_s, "--corpus", &p("motion"), "--out", &p("report.json")])?;
        let report = io::load_report(root.join("report.json")).map_err(|e| e.to_string())?;
        check(report.schema == SCHEMA && report.per_channel.len() == 28, || {
            "report missing schema or channels".into()
        })?;
        check(report.aggregate.r2.is_some() && report.kinematic.r2.is_some(), || "degenerate report rows".into())?;
        outputs.push(read_all(&root));
    }
    check(outputs[0] == outputs[1], || {
        let diff: Vec<&str> = outputs[0]
            .iter()
            .zip(&outputs[1])
            .filter(|(a, b)| a != b)
            .map(|(a, _)| a.0.as_str())
            .collect();
        format!("rerun differs in {diff:?}")
    })?;
    Ok(format!("6 commands exit 0, {} output files byte-identical on rerun", outputs[0].len()))
}

fn lexicon_sanity() -> Outcome {
    let sk = SkeletonDef::smpl22();
    let angles = corpus(&["walk"], 40, 0.0, 10, &sk);
    let learned = codebook::learn_codebook_set(&angles, &SegmentationParams::default(), 32, (8, 24), 0)
        .map_err(|e| e.to_string())?;
    let encoded: Vec<EncodedMotion> = angles
        .iter()
        .map(|a| encode(a, &learned.codebooks, &SegmentationParams::default()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let params = MiningParams {
        overlap_threshold: 0.7,
        min_support: 20,
        max_members: 3,
        sequential: true,
    };
    let words = mine_words(&encoded, &params).map_err(|e| e.to_string())?;
    let top = words
        .iter()
        .find(|w| w.relation == Relation::Simultaneous)
        .ok_or("no simultaneous candidates")?;
    let names: Vec<String> = top.members.iter().map(|m| format!("{}:{}", m.channel, m.s)).collect();
    let hips = top.members.iter().filter(|m| m.channel.ends_with("hip_flex")).count();
    let knees = top.members.iter().filter(|m| m.channel.ends_with("knee_bend")).count();
    check(hips == 1 && knees == 1, || format!("top candidate {names:?}"))?;

    let support: std::collections::HashMap<Vec<String>, usize> = words
        .iter()
        .filter(|w| w.relation == Relation::Simultaneous)
        .map(|w| (w.members.iter().map(|m| format!("{}:{}", m.channel, m.s)).collect(), w.support))
        .collect();
    let mut checked = 0;
    for (members, sup) in &support {
        if members.len() < 3 {
            continue;
        }
        for skip in 0..members.len() {
            let sub: Vec<String> = members.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, m)| m.clone()).collect();
            let sub_sup = support.get(&sub).ok_or_else(|| format!("subset {sub:?} not reported"))?;
            check(sub_sup >= sup, || format!("{members:?} support {sup} > subset {sub_sup}"))?;
            checked += 1;
        }
    }
    Ok(format!(
        "top {names:?} (support {}), {} candidates, {checked} subset checks",
        top.support,
        words.len()
    ))
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "kinematic round trip", kinematic_round_trip()));
    let fidelity = fidelity_report();
    results.push((
        2,
        "codec fidelity",
        fidelity.as_ref().map_err(Clone::clone).and_then(|(r, t)| codec_fidelity(r, *t)),
    ));
    results.push((3, "in-codebook exactness", in_codebook_exactness()));
    results.push((4, "segmentation invariants", segmentation_suite()));
    results.push((5, "determinism", determinism()));
    results.push((
        6,
        "codebook size bounds",
        fidelity
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|(r, _)| codebook_sizes(r, EvalConfig::default().k_range)),
    ));
    results.push((7, "metric identities", metric_identities()));
    results.push((8, "global invariance", invariance()));
    results.push((9, "end-to-end CLI", cli_pipeline()));
    results.push((10, "lexicon sanity", lexicon_sanity()));

    let mut failed = 0;
    results.sort_by_key(|r| r.0);
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS criterion {n:>2} ({name}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {n:>2} ({name}): {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
