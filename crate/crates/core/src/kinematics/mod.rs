//! Joint positions ⇄ joint-angle channels through hierarchical local frames.
//!
//! The pelvis frame is built from the hip line and the first spine joint.
//! Every other joint's frame is its parent's frame rotated by the joint's own
//! channels: plane-angle channels fix the lead segment direction (a minimal
//! swing from the rest direction), an optional twist channel spins the frame
//! about that segment, and bend channels hinge the lead segment toward a
//! fixed rest direction. Forward kinematics rebuilds the same frames from the
//! channel values, so the two directions are exact inverses whenever the
//! unmeasured degrees of freedom are zero.

mod skeleton;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use rayon::prelude::*;

pub use self::skeleton::{
    Axis, ChannelDef, DofKind, EulerOrder, JointDef, Measure, PelvisFrameDef, Plane, SkeletonDef,
    SMPL22_CFG,
};
use self::skeleton::{Rig, TwistRig};
use crate::error::{Error, Result};
use crate::io::{AngleSequence, MotionSequence, RangeWarning, RootTrack};

/// Angular threshold for degenerate geometry, radians.
pub const DEGENERACY_RAD: f64 = 1e-6;
/// Tolerance on the squared norm of a direction rebuilt from plane angles.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Origin plus orthonormal axes (columns = local X, Y, Z in global coordinates).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub origin: Vector3<f64>,
    pub axes: Matrix3<f64>,
}

impl LocalFrame {
    /// `|AᵀA − I|∞`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.axes.transpose() * self.axes - Matrix3::identity()).amax()
    }

    pub fn determinant(&self) -> f64 {
        self.axes.determinant()
    }
}

fn vec3(p: [f64; 3]) -> Vector3<f64> {
    Vector3::new(p[0], p[1], p[2])
}

fn degenerate(frame: usize, reason: impl Into<String>) -> Error {
    Error::DegeneratePose {
        frame,
        reason: reason.into(),
    }
}

/// Pelvis frame from one frame of positions: X = unit(right hip − left hip),
/// Z = unit(X × (spine − pelvis)), Y = Z × X.
pub fn pelvis_frame(positions: &[[f64; 3]], sk: &SkeletonDef) -> Result<LocalFrame> {
    pelvis_frame_at(positions, sk, 0)
}

fn pelvis_frame_at(positions: &[[f64; 3]], sk: &SkeletonDef, frame: usize) -> Result<LocalFrame> {
    let pf = &sk.pelvis_frame;
    let origin = vec3(positions[sk.root_joint]);
    let across = vec3(positions[pf.right]) - vec3(positions[pf.left]);
    let up = vec3(positions[pf.up]) - origin;
    let (al, ul) = (across.norm(), up.norm());
    if !(al > 0.0) {
        return Err(degenerate(frame, "hip joints coincide"));
    }
    if !(ul > 0.0) {
        return Err(degenerate(frame, "spine joint coincides with the pelvis"));
    }
    let x = across / al;
    let z = x.cross(&(up / ul));
    let zl = z.norm();
    if zl < DEGENERACY_RAD.sin() {
        return Err(degenerate(frame, "spine vector parallel to the hip axis"));
    }
    let z = z / zl;
    let y = z.cross(&x);
    Ok(LocalFrame {
        origin,
        axes: Matrix3::from_columns(&[x, y, z]),
    })
}

fn rot_x(a: f64) -> Matrix3<f64> {
    *Rotation3::from_axis_angle(&Vector3::x_axis(), a).matrix()
}

fn rot_y(a: f64) -> Matrix3<f64> {
    *Rotation3::from_axis_angle(&Vector3::y_axis(), a).matrix()
}

fn rot_z(a: f64) -> Matrix3<f64> {
    *Rotation3::from_axis_angle(&Vector3::z_axis(), a).matrix()
}

/// Rotation from `[rx, ry, rz]` degrees in the given order.
pub fn euler_to_matrix(angles: [f64; 3], order: EulerOrder) -> Matrix3<f64> {
    let [x, y, z] = angles.map(f64::to_radians);
    match order {
        EulerOrder::Zxy => rot_z(z) * rot_x(x) * rot_y(y),
    }
}

/// Inverse of [`euler_to_matrix`], with rx in [−90°, 90°].
pub fn matrix_to_euler(m: &Matrix3<f64>, order: EulerOrder) -> [f64; 3] {
    match order {
        EulerOrder::Zxy => {
            let x = m[(2, 1)].clamp(-1.0, 1.0).asin();
            let y = (-m[(2, 0)]).atan2(m[(2, 2)]);
            let z = (-m[(0, 1)]).atan2(m[(1, 1)]);
            [x.to_degrees(), y.to_degrees(), z.to_degrees()]
        }
    }
}

/// Minimal rotation taking unit `from` onto unit `to`.
fn swing(from: &Vector3<f64>, to: &Vector3<f64>) -> Matrix3<f64> {
    let axis = from.cross(to);
    let s = axis.norm();
    let c = from.dot(to);
    if s == 0.0 {
        // Antiparallel is excluded by the rest-sign convention.
        return Matrix3::identity();
    }
    *Rotation3::from_axis_angle(&Unit::new_unchecked(axis / s), s.atan2(c)).matrix()
}

fn axis_angle(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    *Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle).matrix()
}

/// Lead direction in the parent frame implied by a joint's plane-angle
/// channels; unmeasured components are zero and the rest axis keeps its sign.
fn lead_direction(
    rest: &Vector3<f64>,
    components: &[(usize, Vector3<f64>, f64)],
    values: &[f64],
    frame: usize,
    joint: &str,
) -> Result<Vector3<f64>> {
    let mut v = Vector3::zeros();
    let mut sum_sq = 0.0;
    for (c, normal, sign) in components {
        let s = (sign * values[*c]).to_radians().sin();
        v += normal * s;
        sum_sq += s * s;
    }
    if sum_sq > 1.0 + FEASIBILITY_TOL {
        return Err(Error::InfeasibleAngles {
            frame,
            joint: joint.to_string(),
            norm_sq: sum_sq,
        });
    }
    Ok(v + rest * (1.0 - sum_sq).max(0.0).sqrt())
}

/// Local rotation of joint `j` relative to its parent frame.
fn local_rotation(sk: &SkeletonDef, j: usize, values: &[f64], frame: usize) -> Result<Matrix3<f64>> {
    match &sk.rigs[j] {
        Rig::Fixed => Ok(Matrix3::identity()),
        Rig::Bend { channel, axis, .. } => Ok(axis_angle(axis, values[*channel].to_radians())),
        Rig::Segment {
            rest,
            components,
            twist,
            ..
        } => {
            let dir = lead_direction(rest, components, values, frame, &sk.joints[j].name)?;
            let mut r = swing(rest, &dir);
            if let Some(t) = twist {
                r *= axis_angle(rest, (t.sign * values[t.channel]).to_radians());
            }
            Ok(r)
        }
    }
}

fn plane_angle(v: &Vector3<f64>, n: &Vector3<f64>, sign: f64) -> f64 {
    sign * v.dot(n).clamp(-1.0, 1.0).asin().to_degrees()
}

fn measure_twist(
    t: &TwistRig,
    rest: &Vector3<f64>,
    swing_frame: &Matrix3<f64>,
    pos: &[Vector3<f64>],
) -> f64 {
    let q = swing_frame.transpose() * (pos[t.to] - pos[t.from]);
    let p = q - rest * q.dot(rest);
    let pn = p.norm();
    if !(pn > DEGENERACY_RAD * q.norm()) {
        // Reference collinear with the segment: twist is unobservable.
        return 0.0;
    }
    t.sign * p.dot(&t.normal).atan2(p.dot(&t.rest)).to_degrees()
}

/// Per-frame inverse kinematics; returns (root translation, orientation, channels).
fn frame_to_angles(sk: &SkeletonDef, positions: &[[f64; 3]], frame: usize) -> Result<([f64; 3], [f64; 3], Vec<f64>)> {
    let pos: Vec<Vector3<f64>> = positions.iter().map(|p| vec3(*p)).collect();
    let pelvis = pelvis_frame_at(positions, sk, frame)?;
    let mut frames = vec![Matrix3::identity(); sk.joints.len()];
    frames[sk.root_joint] = pelvis.axes;
    let mut values = vec![0.0; sk.channels.len()];
    for j in 0..sk.joints.len() {
        let Some(p) = sk.joints[j].parent else { continue };
        let parent = frames[p];
        match &sk.rigs[j] {
            Rig::Fixed => {}
            Rig::Bend { channel, lead, .. } => {
                let a = pos[j] - pos[p];
                let b = pos[*lead] - pos[j];
                if a.norm() == 0.0 || b.norm() == 0.0 {
                    return Err(degenerate(frame, format!("zero-length segment at `{}`", sk.joints[j].name)));
                }
                values[*channel] = a.cross(&b).norm().atan2(a.dot(&b)).to_degrees();
            }
            Rig::Segment {
                lead,
                rest,
                components,
                twist,
            } => {
                let d = pos[*lead] - pos[j];
                let dl = d.norm();
                if dl == 0.0 {
                    return Err(degenerate(frame, format!("zero-length segment at `{}`", sk.joints[j].name)));
                }
                let local = parent.transpose() * (d / dl);
                for (c, n, sign) in components {
                    values[*c] = plane_angle(&local, n, *sign);
                }
                if let Some(t) = twist {
                    let dir = lead_direction(rest, components, &values, frame, &sk.joints[j].name)?;
                    let swing_frame = parent * swing(rest, &dir);
                    values[t.channel] = measure_twist(t, rest, &swing_frame, &pos);
                }
            }
        }
        frames[j] = parent * local_rotation(sk, j, &values, frame)?;
    }
    let orientation = matrix_to_euler(&pelvis.axes, sk.euler_order);
    Ok((positions[sk.root_joint], orientation, values))
}

/// Per-frame forward kinematics.
fn frame_to_positions(sk: &SkeletonDef, translation: [f64; 3], orientation: [f64; 3], values: &[f64], frame: usize) -> Result<Vec<[f64; 3]>> {
    let n = sk.joints.len();
    let mut pos = vec![Vector3::zeros(); n];
    let mut frames = vec![Matrix3::identity(); n];
    pos[sk.root_joint] = vec3(translation);
    frames[sk.root_joint] = euler_to_matrix(orientation, sk.euler_order);
    for j in 0..n {
        let Some(p) = sk.joints[j].parent else { continue };
        pos[j] = pos[p] + frames[p] * sk.joints[j].offset;
        frames[j] = frames[p] * local_rotation(sk, j, values, frame)?;
    }
    Ok(pos.iter().map(|v| [v.x, v.y, v.z]).collect())
}

/// Output of [`positions_to_angles`].
#[derive(Debug, Clone)]
pub struct AngleConversion {
    pub angles: AngleSequence,
    /// Samples outside their channel's range plus slack; not fatal.
    pub warnings: Vec<RangeWarning>,
}

pub fn positions_to_angles(m: &MotionSequence, sk: &SkeletonDef) -> Result<AngleConversion> {
    m.validate(sk)?;
    let per_frame: Vec<_> = (0..m.frames())
        .into_par_iter()
        .map(|t| frame_to_angles(sk, m.frame(t), t))
        .collect::<Result<_>>()?;
    let mut root = RootTrack::default();
    let mut values = Vec::with_capacity(m.frames() * sk.channels.len());
    for (tr, or, v) in per_frame {
        root.translation.push(tr);
        root.orientation.push(or);
        values.extend(v);
    }
    let angles = AngleSequence {
        fps: m.fps,
        skeleton: sk.name.clone(),
        channels: sk.channel_names(),
        values,
        root,
    };
    let warnings = angles.range_warnings(sk);
    Ok(AngleConversion { angles, warnings })
}

pub fn angles_to_positions(a: &AngleSequence, sk: &SkeletonDef) -> Result<MotionSequence> {
    a.validate(sk)?;
    let c = a.n_channels();
    let per_frame: Vec<Vec<[f64; 3]>> = (0..a.frames())
        .into_par_iter()
        .map(|t| {
            frame_to_positions(
                sk,
                a.root.translation[t],
                a.root.orientation[t],
                &a.values[t * c..(t + 1) * c],
                t,
            )
        })
        .collect::<Result<_>>()?;
    Ok(MotionSequence {
        fps: a.fps,
        skeleton: sk.name.clone(),
        joint_names: sk.joint_names(),
        positions: per_frame.into_iter().flatten().collect(),
    })
}

/// Frames of every joint for one pose, for inspection and tests.
pub fn joint_frames(sk: &SkeletonDef, positions: &[[f64; 3]]) -> Result<Vec<LocalFrame>> {
    let (_, orientation, values) = frame_to_angles(sk, positions, 0)?;
    let mut axes = vec![Matrix3::identity(); sk.joints.len()];
    axes[sk.root_joint] = euler_to_matrix(orientation, sk.euler_order);
    for j in 0..sk.joints.len() {
        if let Some(p) = sk.joints[j].parent {
            axes[j] = axes[p] * local_rotation(sk, j, &values, 0)?;
        }
    }
    Ok(axes
        .into_iter()
        .zip(positions)
        .map(|(axes, p)| LocalFrame {
            origin: vec3(*p),
            axes,
        })
        .collect())
}
