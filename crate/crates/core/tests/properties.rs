use indexmap::IndexMap;
use lingomotion::codebook::{normalize_samples, Codebook, CodebookSet, TrainingInfo};
use lingomotion::io::{self, AngleSequence, MotionSequence, RootTrack};
use lingomotion::kinematics::{euler_to_matrix, matrix_to_euler, EulerOrder};
use lingomotion::metrics::{score, score_pooled, Sums};
use lingomotion::segmenter::{boundaries, segment_channel, SegmentationParams};
use lingomotion::SkeletonDef;
use proptest::prelude::*;

fn signal() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, 2..200).prop_map(|steps| {
        let mut v = 0.0;
        steps
            .into_iter()
            .map(|s| {
                v += s;
                v
            })
            .collect()
    })
}

fn params() -> impl Strategy<Value = SegmentationParams> {
    (prop::sample::select(vec![1usize, 3, 5, 9]), 0.0f64..4.0, 2usize..6).prop_map(|(w, p, l)| {
        SegmentationParams {
            smooth_window: w,
            min_prominence: p,
            min_length: l,
        }
    })
}

fn unit_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn segments_tile_the_signal(x in signal(), p in params()) {
        let segs = segment_channel(&x, &p).unwrap();
        prop_assert_eq!(segs[0].start, 0);
        prop_assert_eq!(segs.last().unwrap().end, x.len() - 1);
        for w in segs.windows(2) {
            prop_assert_eq!(w[0].end, w[1].start);
        }
        for s in &segs {
            prop_assert_eq!(&s.samples[..], &x[s.start..=s.end]);
        }
    }

    #[test]
    fn boundaries_are_affine_equivariant(x in signal(), p in params(), a in 0.05f64..20.0, b in -200.0f64..200.0) {
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let q = SegmentationParams { min_prominence: a * p.min_prominence, ..p };
        prop_assert_eq!(boundaries(&x, &p).unwrap(), boundaries(&y, &q).unwrap());
    }

    #[test]
    fn normalized_shape_ignores_scale_and_bias(x in prop::collection::vec(-50.0f64..50.0, 2..80), a in 0.1f64..10.0, b in -100.0f64..100.0) {
        let base = normalize_samples(&x, 32);
        // Relative rounding grows like |b| / scale.
        prop_assume!(base.scale > 1e-3);
        let moved = normalize_samples(&x.iter().map(|v| a * v + b).collect::<Vec<_>>(), 32);
        for (u, v) in base.values.iter().zip(&moved.values) {
            prop_assert!((u - v).abs() < 1e-9);
        }
        prop_assert!((moved.scale - a * base.scale).abs() < 1e-9 * moved.scale.max(1.0));
        prop_assert!((moved.bias - (a * base.bias + b)).abs() < 1e-9 * moved.bias.abs().max(1.0));
        // Lossless only when the shape keeps the original sample count.
        let back = normalize_samples(&x, x.len()).denormalize();
        for (u, v) in back.iter().zip(&x) {
            prop_assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn assign_is_the_brute_force_nearest(centroids in prop::collection::vec(unit_vec(8), 1..12), q in unit_vec(8)) {
        let cb = Codebook {
            skeleton: "test".into(),
            channel: "ch".into(),
            shape_len: 8,
            centroids: centroids.clone(),
            training: TrainingInfo { n_segments: 0, seed: 0, inertia: 0.0 },
        };
        let (s, d) = cb.assign(&q).unwrap();
        let dists: Vec<f64> = centroids
            .iter()
            .map(|c| c.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .collect();
        let best = dists.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!((d - best).abs() < 1e-12);
        prop_assert_eq!(s, dists.iter().position(|v| *v == dists[s]).unwrap());
        prop_assert!(dists[s] <= best);
    }

    #[test]
    fn normalized_scores_are_affine_invariant(
        pairs in prop::collection::vec((-90.0f64..90.0, -90.0f64..90.0), 2..100),
        a in 0.1f64..10.0,
        b in -50.0f64..50.0,
    ) {
        let (y, yh): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let s = score(&y, &yh).unwrap();
        prop_assume!(s.nmse.is_some());
        let t = score(
            &y.iter().map(|v| a * v + b).collect::<Vec<_>>(),
            &yh.iter().map(|v| a * v + b).collect::<Vec<_>>(),
        ).unwrap();
        let (n0, n1) = (s.nmse.unwrap(), t.nmse.unwrap());
        prop_assert!((n0 - n1).abs() <= 1e-9 * n0.max(1.0));
        prop_assert!((t.rmse - a * s.rmse).abs() <= 1e-9 * t.rmse.max(1.0));
    }

    #[test]
    fn pooled_sums_are_additive(
        c1 in prop::collection::vec((-90.0f64..90.0, -90.0f64..90.0), 2..50),
        c2 in prop::collection::vec((-90.0f64..90.0, -90.0f64..90.0), 2..50),
    ) {
        let (y1, h1): (Vec<f64>, Vec<f64>) = c1.into_iter().unzip();
        let (y2, h2): (Vec<f64>, Vec<f64>) = c2.into_iter().unzip();
        let s1 = Sums::of(&y1, &h1).unwrap();
        let s2 = Sums::of(&y2, &h2).unwrap();
        let pooled = score_pooled(&[(&y1, &h1), (&y2, &h2)]).unwrap();
        let total = s1.add(s2);
        prop_assert_eq!(pooled.n, y1.len() + y2.len());
        prop_assert!((pooled.rmse.powi(2) * pooled.n as f64 - total.ss_res).abs() <= 1e-9 * total.ss_res.max(1.0));
        prop_assert_eq!(pooled.nmse, Some(total.ss_res / total.ss_tot));
    }

    #[test]
    fn euler_round_trip(x in -89.0f64..89.0, y in -179.0f64..179.0, z in -179.0f64..179.0) {
        let m = euler_to_matrix([x, y, z], EulerOrder::Zxy);
        let back = matrix_to_euler(&m, EulerOrder::Zxy);
        for (u, v) in back.iter().zip([x, y, z]) {
            prop_assert!((u - v).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn angle_documents_round_trip(frames in 2usize..40, seed in any::<u64>(), fps in prop::sample::select(vec![24.0, 30.0, 59.94, 120.0])) {
        let sk = SkeletonDef::smpl22();
        let channels = sk.channel_names();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        use rand::Rng;
        let a = AngleSequence {
            fps,
            skeleton: sk.name.clone(),
            values: (0..frames * channels.len()).map(|_| rng.random_range(-60.0..60.0)).collect(),
            channels,
            root: RootTrack {
                translation: (0..frames).map(|_| [rng.random_range(-5.0..5.0), rng.random(), rng.random()]).collect(),
                orientation: (0..frames).map(|_| [rng.random_range(-90.0..90.0), rng.random(), rng.random()]).collect(),
            },
        };
        let text = io::write_angles(&a);
        let back = io::read_angles(&text, &sk).unwrap();
        prop_assert_eq!(&back, &a);
        prop_assert_eq!(io::write_angles(&back), text);
    }

    #[test]
    fn motion_documents_round_trip(frames in 2usize..30, seed in any::<u64>()) {
        let sk = SkeletonDef::smpl22();
        let joints = sk.joint_names();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        use rand::Rng;
        let m = MotionSequence {
            fps: 30.0,
            skeleton: sk.name.clone(),
            positions: (0..frames * joints.len())
                .map(|_| [rng.random_range(-2.0..2.0), rng.random_range(0.0..2.0), rng.random_range(-2.0..2.0)])
                .collect(),
            joint_names: joints,
        };
        let text = io::write_motion(&m);
        let back = io::read_motion(&text, &sk).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(io::write_motion(&back), text);
    }

    #[test]
    fn codebook_documents_round_trip(ks in prop::collection::vec(12usize..=20, 28), seed in any::<u64>()) {
        let sk = SkeletonDef::smpl22();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        use rand::Rng;
        let codebooks: IndexMap<String, Codebook> = sk
            .channel_names()
            .into_iter()
            .zip(ks)
            .map(|(ch, k)| {
                let cb = Codebook {
                    skeleton: sk.name.clone(),
                    channel: ch.clone(),
                    shape_len: 32,
                    centroids: (0..k).map(|_| (0..32).map(|_| rng.random_range(0.0..=1.0)).collect()).collect(),
                    training: TrainingInfo { n_segments: rng.random_range(k..5000), seed, inertia: rng.random_range(0.0..100.0) },
                };
                (ch, cb)
            })
            .collect();
        let set = CodebookSet { skeleton: sk.name.clone(), codebooks };
        let text = io::write_codebooks(&set);
        let back = io::parse_codebooks(&text).unwrap();
        prop_assert_eq!(&back, &set);
        prop_assert_eq!(io::write_codebooks(&back), text);
    }
}
