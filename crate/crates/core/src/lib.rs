//! Symbolic representation of human motion built from joint angles.
//!
//! The pipeline turns global joint positions into biomechanical joint-angle
//! channels, cuts every channel at its local extrema, clusters the normalized
//! segment shapes into a per-channel alphabet of "letters", and encodes motion
//! as letter tokens carrying scale, bias and length attributes. Decoding
//! reverses the process and [`metrics`] measures how much fidelity survives.
//!
//! ```no_run
//! use lingomotion::{codec, codebook, kinematics::SkeletonDef, segmenter::SegmentationParams, synth};
//!
//! let sk = SkeletonDef::smpl22();
//! let template = synth::GaitTemplate::builtin("walk").unwrap();
//! let corpus = synth::generate(&template, &sk, 4, 7).unwrap();
//! let angles = lingomotion::kinematics::positions_to_angles(&corpus[0], &sk).unwrap().angles;
//! # let _ = angles;
//! ```

pub mod cli;
pub mod codebook;
pub mod codec;
pub mod error;
pub mod io;
pub mod kinematics;
pub mod lexicon;
pub mod metrics;
pub mod segmenter;
pub mod synth;

pub use codebook::{Codebook, CodebookSet, NormalizedShape};
pub use codec::{EncodedMotion, LetterToken};
pub use error::{Error, Result};
pub use io::{AngleSequence, EvalReport, MotionSequence, RootTrack};
pub use kinematics::SkeletonDef;
pub use segmenter::{Segment, SegmentationParams};

/// Schema tag embedded in every file this crate writes.
pub const SCHEMA: &str = "lingomotion/1";
