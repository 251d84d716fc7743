use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::SCHEMA;

/// Shipped default skeleton document.
pub const SMPL22_CFG: &str = include_str!("../../assets/skeleton_smpl22.cfg");

/// A principal axis of a local frame, possibly negated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Axis {
    pub index: usize,
    pub negative: bool,
}

impl Axis {
    pub fn vector(self) -> Vector3<f64> {
        let mut v = Vector3::zeros();
        v[self.index] = if self.negative { -1.0 } else { 1.0 };
        v
    }

    fn parse(s: &str) -> Result<Self> {
        let (negative, name) = match s.as_bytes().first() {
            Some(b'-') => (true, &s[1..]),
            Some(b'+') => (false, &s[1..]),
            _ => (false, s),
        };
        let index = match name {
            "X" => 0,
            "Y" => 1,
            "Z" => 2,
            _ => return Err(Error::Skeleton(format!("unknown axis `{s}`"))),
        };
        Ok(Axis { index, negative })
    }

    /// The axis `v` points along, if it is exactly axis-aligned.
    fn of(v: &Vector3<f64>) -> Option<Self> {
        let nz: Vec<usize> = (0..3).filter(|&i| v[i] != 0.0).collect();
        match nz.as_slice() {
            [i] => Some(Axis {
                index: *i,
                negative: v[*i] < 0.0,
            }),
            _ => None,
        }
    }
}

/// An LCS plane, identified by its normal axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    /// Contains X and Y; normal Z.
    XY,
    /// Contains Y and Z; normal X.
    YZ,
    /// Contains Z and X; normal Y.
    ZX,
}

impl Plane {
    pub fn normal_index(self) -> usize {
        match self {
            Plane::YZ => 0,
            Plane::ZX => 1,
            Plane::XY => 2,
        }
    }

    pub fn normal(self) -> Vector3<f64> {
        let mut v = Vector3::zeros();
        v[self.normal_index()] = 1.0;
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofKind {
    /// `sign · asin(v̂ · n̂)` of a measured vector against an LCS plane.
    PlaneAngle,
    /// Unsigned angle between the parent segment and the lead segment.
    Bend,
}

/// What a plane-angle channel measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// The joint's lead segment direction.
    Segment,
    /// The twist reference vector, projected perpendicular to the segment.
    Twist,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDef {
    pub name: String,
    pub joint: usize,
    pub dof_kind: DofKind,
    pub plane: Option<Plane>,
    pub measure: Measure,
    pub sign: f64,
    /// Physiological bounds in degrees.
    pub range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointDef {
    pub name: String,
    pub parent: Option<usize>,
    /// Zero-angle position with the pelvis at the origin.
    pub neutral: Vector3<f64>,
    /// Bone vector from the parent in the neutral pose (zero for the root).
    pub offset: Vector3<f64>,
    pub bone_length: f64,
    pub lead: Option<usize>,
    pub twist_ref: Option<(usize, usize)>,
    pub twist_neutral: Option<Axis>,
    pub bend_toward: Option<Axis>,
}

/// How a joint's local rotation is derived from its channels.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Rig {
    /// No channels: the joint inherits its parent's frame.
    Fixed,
    Segment {
        lead: usize,
        /// Neutral lead direction in the parent frame.
        rest: Vector3<f64>,
        /// `(channel, plane normal, sign)` components of the lead direction.
        components: Vec<(usize, Vector3<f64>, f64)>,
        twist: Option<TwistRig>,
    },
    Bend {
        channel: usize,
        lead: usize,
        axis: Vector3<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TwistRig {
    pub channel: usize,
    pub from: usize,
    pub to: usize,
    pub rest: Vector3<f64>,
    /// `rest_segment × rest_reference`; sine of the twist angle.
    pub normal: Vector3<f64>,
    pub sign: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PelvisFrameDef {
    pub left: usize,
    pub right: usize,
    pub up: usize,
}

/// Euler decomposition order for global orientations. Only `ZXY`
/// (`R = Rz · Rx · Ry`) is implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EulerOrder {
    Zxy,
}

/// Joint hierarchy, bone geometry, and the joint-angle channel table.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonDef {
    pub name: String,
    pub joints: Vec<JointDef>,
    pub channels: Vec<ChannelDef>,
    pub root_joint: usize,
    pub euler_order: EulerOrder,
    pub pelvis_frame: PelvisFrameDef,
    pub(crate) rigs: Vec<Rig>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SkeletonDoc {
    schema: String,
    name: String,
    euler_order: String,
    pelvis_frame: PelvisFrameDoc,
    joints: Vec<JointDoc>,
    channels: Vec<ChannelDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PelvisFrameDoc {
    left: String,
    right: String,
    up: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JointDoc {
    name: String,
    parent: Option<String>,
    neutral: [f64; 3],
    lead: Option<String>,
    twist_ref: Option<[String; 2]>,
    twist_neutral: Option<String>,
    bend_toward: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelDoc {
    name: String,
    joint: String,
    kind: String,
    plane: Option<String>,
    measure: Option<String>,
    sign: f64,
    range: [f64; 2],
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Skeleton(msg.into())
}

impl SkeletonDef {
    /// The shipped 22-joint, 28-channel default.
    pub fn smpl22() -> Self {
        Self::from_toml(SMPL22_CFG).expect("shipped skeleton config is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: SkeletonDoc = toml::from_str(text).map_err(|e| {
            let (line, col) = e
                .span()
                .map(|s| line_col(text, s.start))
                .unwrap_or((0, 0));
            Error::parse(line, col, e.message().to_string())
        })?;
        Self::from_doc(doc)
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.name == name)
    }

    pub fn channel_names(&self) -> Vec<String> {
        self.channels.iter().map(|c| c.name.clone()).collect()
    }

    pub fn joint_names(&self) -> Vec<String> {
        self.joints.iter().map(|j| j.name.clone()).collect()
    }

    /// Neutral-pose joint positions with the pelvis at the origin.
    pub fn neutral_pose(&self) -> Vec<[f64; 3]> {
        self.joints.iter().map(|j| j.neutral.into()).collect()
    }

    /// True when `j` is `ancestor` or lies below it.
    pub fn is_descendant(&self, j: usize, ancestor: usize) -> bool {
        let mut cur = Some(j);
        while let Some(c) = cur {
            if c == ancestor {
                return true;
            }
            cur = self.joints[c].parent;
        }
        false
    }

    fn from_doc(doc: SkeletonDoc) -> Result<Self> {
        if doc.schema != SCHEMA {
            return Err(Error::Schema(format!(
                "expected schema `{SCHEMA}`, found `{}`",
                doc.schema
            )));
        }
        let euler_order = match doc.euler_order.as_str() {
            "ZXY" => EulerOrder::Zxy,
            other => return Err(bad(format!("unsupported euler_order `{other}` (only ZXY)"))),
        };
        let names: Vec<&str> = doc.joints.iter().map(|j| j.name.as_str()).collect();
        let find = |name: &str| -> Result<usize> {
            names
                .iter()
                .position(|n| *n == name)
                .ok_or_else(|| bad(format!("unknown joint `{name}`")))
        };
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(bad(format!("duplicate joint `{n}`")));
            }
        }

        let mut joints = Vec::with_capacity(doc.joints.len());
        let mut root = None;
        for (i, jd) in doc.joints.iter().enumerate() {
            let neutral = Vector3::from(jd.neutral);
            if neutral.iter().any(|v| !v.is_finite()) {
                return Err(bad(format!("joint `{}` has a non-finite position", jd.name)));
            }
            let parent = match &jd.parent {
                None => {
                    if root.replace(i).is_some() {
                        return Err(bad("skeleton has more than one root"));
                    }
                    None
                }
                Some(p) => {
                    let p = find(p)?;
                    if p >= i {
                        return Err(bad(format!(
                            "joint `{}` must come after its parent `{}`",
                            jd.name, names[p]
                        )));
                    }
                    Some(p)
                }
            };
            let offset = parent.map_or(Vector3::zeros(), |p: usize| neutral - joints_neutral(&doc, p));
            let bone_length = offset.norm();
            if parent.is_some() && !(bone_length > 0.0) {
                return Err(bad(format!("joint `{}` has zero bone length", jd.name)));
            }
            joints.push(JointDef {
                name: jd.name.clone(),
                parent,
                neutral,
                offset,
                bone_length,
                lead: jd.lead.as_deref().map(find).transpose()?,
                twist_ref: match &jd.twist_ref {
                    Some([a, b]) => Some((find(a)?, find(b)?)),
                    None => None,
                },
                twist_neutral: jd.twist_neutral.as_deref().map(Axis::parse).transpose()?,
                bend_toward: jd.bend_toward.as_deref().map(Axis::parse).transpose()?,
            });
        }
        let root_joint = root.ok_or_else(|| bad("skeleton has no root joint"))?;
        if root_joint != 0 {
            return Err(bad("the root joint must be listed first"));
        }

        let mut channels = Vec::with_capacity(doc.channels.len());
        for cd in &doc.channels {
            if channels.iter().any(|c: &ChannelDef| c.name == cd.name) {
                return Err(bad(format!("duplicate channel `{}`", cd.name)));
            }
            let dof_kind = match cd.kind.as_str() {
                "plane_angle" => DofKind::PlaneAngle,
                "bend" => DofKind::Bend,
                other => return Err(bad(format!("channel `{}`: unknown kind `{other}`", cd.name))),
            };
            let plane = match (dof_kind, cd.plane.as_deref()) {
                (DofKind::Bend, None) => None,
                (DofKind::Bend, Some(_)) => {
                    return Err(bad(format!("bend channel `{}` must not name a plane", cd.name)))
                }
                (DofKind::PlaneAngle, Some("XY")) => Some(Plane::XY),
                (DofKind::PlaneAngle, Some("YZ")) => Some(Plane::YZ),
                (DofKind::PlaneAngle, Some("ZX")) => Some(Plane::ZX),
                (DofKind::PlaneAngle, p) => {
                    return Err(bad(format!("channel `{}`: plane must be XY, YZ or ZX, got {p:?}", cd.name)))
                }
            };
            let measure = match cd.measure.as_deref() {
                None | Some("segment") => Measure::Segment,
                Some("twist") if dof_kind == DofKind::PlaneAngle => Measure::Twist,
                Some(other) => return Err(bad(format!("channel `{}`: bad measure `{other}`", cd.name))),
            };
            if cd.sign != 1.0 && cd.sign != -1.0 {
                return Err(bad(format!("channel `{}`: sign must be +1 or -1", cd.name)));
            }
            if !(cd.range[0] < cd.range[1]) {
                return Err(bad(format!("channel `{}`: empty range", cd.name)));
            }
            channels.push(ChannelDef {
                name: cd.name.clone(),
                joint: find(&cd.joint)?,
                dof_kind,
                plane,
                measure,
                sign: cd.sign,
                range: (cd.range[0], cd.range[1]),
            });
        }

        let pelvis_frame = PelvisFrameDef {
            left: find(&doc.pelvis_frame.left)?,
            right: find(&doc.pelvis_frame.right)?,
            up: find(&doc.pelvis_frame.up)?,
        };
        let mut sk = SkeletonDef {
            name: doc.name,
            joints,
            channels,
            root_joint,
            euler_order,
            pelvis_frame,
            rigs: Vec::new(),
        };
        sk.check_pelvis_frame()?;
        sk.rigs = (0..sk.joints.len()).map(|j| sk.build_rig(j)).collect::<Result<_>>()?;
        Ok(sk)
    }

    fn check_pelvis_frame(&self) -> Result<()> {
        let pf = &self.pelvis_frame;
        let root = &self.joints[self.root_joint];
        for j in [pf.left, pf.right, pf.up] {
            if self.joints[j].parent != Some(self.root_joint) {
                return Err(bad(format!(
                    "pelvis frame joint `{}` must be a child of the root",
                    self.joints[j].name
                )));
            }
        }
        let across = self.joints[pf.right].neutral - self.joints[pf.left].neutral;
        if Axis::of(&across) != Some(Axis { index: 0, negative: false }) {
            return Err(bad("neutral hips must differ along +X only"));
        }
        let up = self.joints[pf.up].neutral - root.neutral;
        if !(up.y > 0.0 && up.z == 0.0) {
            return Err(bad("neutral up joint must lie above the root in the XY plane"));
        }
        Ok(())
    }

    fn build_rig(&self, j: usize) -> Result<Rig> {
        let joint = &self.joints[j];
        let chans: Vec<usize> = (0..self.channels.len())
            .filter(|&c| self.channels[c].joint == j)
            .collect();
        if chans.is_empty() {
            return Ok(Rig::Fixed);
        }
        if j == self.root_joint {
            return Err(bad("the root's orientation lives in the root track, not in channels"));
        }
        let lead = joint
            .lead
            .ok_or_else(|| bad(format!("joint `{}` has channels but no lead", joint.name)))?;
        if self.joints[lead].parent != Some(j) {
            return Err(bad(format!("lead of `{}` must be its child", joint.name)));
        }
        let rest_vec = self.joints[lead].offset;
        let rest = rest_vec / rest_vec.norm();
        let rest_axis = Axis::of(&rest_vec)
            .ok_or_else(|| bad(format!("lead segment of `{}` must be axis-aligned at rest", joint.name)))?;

        let bends: Vec<usize> = chans
            .iter()
            .copied()
            .filter(|&c| self.channels[c].dof_kind == DofKind::Bend)
            .collect();
        if !bends.is_empty() {
            if chans.len() != 1 {
                return Err(bad(format!("bend joint `{}` must carry exactly one channel", joint.name)));
            }
            let toward = joint
                .bend_toward
                .ok_or_else(|| bad(format!("bend joint `{}` needs bend_toward", joint.name)))?;
            if toward.index == rest_axis.index {
                return Err(bad(format!("bend_toward of `{}` must be perpendicular to the segment", joint.name)));
            }
            let parent_dir = joint.offset / joint.bone_length;
            if (parent_dir - rest).norm() > 1e-12 {
                return Err(bad(format!(
                    "bend joint `{}` must be collinear with its parent segment at rest",
                    joint.name
                )));
            }
            return Ok(Rig::Bend {
                channel: bends[0],
                lead,
                axis: rest.cross(&toward.vector()),
            });
        }

        let mut components = Vec::new();
        let mut twist = None;
        for &c in &chans {
            let ch = &self.channels[c];
            let plane = ch.plane.expect("plane-angle channels carry a plane");
            match ch.measure {
                Measure::Segment => {
                    if plane.normal_index() == rest_axis.index {
                        return Err(bad(format!(
                            "channel `{}`: plane normal is the segment's rest axis",
                            ch.name
                        )));
                    }
                    if components.iter().any(|(_, n, _): &(usize, Vector3<f64>, f64)| *n == plane.normal()) {
                        return Err(bad(format!("channel `{}`: plane measured twice", ch.name)));
                    }
                    components.push((c, plane.normal(), ch.sign));
                }
                Measure::Twist => {
                    if twist.is_some() {
                        return Err(bad(format!("joint `{}` has two twist channels", joint.name)));
                    }
                    let (from, to) = joint
                        .twist_ref
                        .ok_or_else(|| bad(format!("channel `{}` needs a twist_ref on its joint", ch.name)))?;
                    for r in [from, to] {
                        if !self.is_descendant(r, lead) {
                            return Err(bad(format!("twist_ref of `{}` must lie below its lead", joint.name)));
                        }
                    }
                    let ref_axis = joint
                        .twist_neutral
                        .ok_or_else(|| bad(format!("joint `{}` needs twist_neutral", joint.name)))?;
                    if ref_axis.index == rest_axis.index {
                        return Err(bad(format!("twist_neutral of `{}` must be perpendicular to the segment", joint.name)));
                    }
                    let normal = rest.cross(&ref_axis.vector());
                    if plane.normal().dot(&normal).abs() != 1.0 {
                        return Err(bad(format!(
                            "channel `{}`: twist plane normal must be segment × twist_neutral",
                            ch.name
                        )));
                    }
                    twist = Some(TwistRig {
                        channel: c,
                        from,
                        to,
                        rest: ref_axis.vector(),
                        normal,
                        sign: ch.sign,
                    });
                }
            }
        }
        Ok(Rig::Segment {
            lead,
            rest,
            components,
            twist,
        })
    }
}

fn joints_neutral(doc: &SkeletonDoc, i: usize) -> Vector3<f64> {
    Vector3::from(doc.joints[i].neutral)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_skeleton_shape() {
        let sk = SkeletonDef::smpl22();
        assert_eq!(sk.joints.len(), 22);
        assert_eq!(sk.channels.len(), 28);
        assert_eq!(sk.root_joint, 0);
        assert!(sk.joints.iter().skip(1).all(|j| j.bone_length > 0.0));
        for name in ["r_hip_flex", "r_hip_rot", "r_elbow_bend", "r_knee_bend"] {
            assert!(sk.channel_index(name).is_some(), "{name}");
        }
        let bends = sk.channels.iter().filter(|c| c.dof_kind == DofKind::Bend).count();
        assert_eq!(bends, 4);
        assert!(sk.channels.iter().all(|c| (c.dof_kind == DofKind::Bend) == c.plane.is_none()));
    }

    #[test]
    fn rejects_broken_configs() {
        let cases = [
            (SMPL22_CFG.replace("schema = \"lingomotion/1\"", "schema = \"x\""), "schema"),
            (SMPL22_CFG.replace("euler_order = \"ZXY\"", "euler_order = \"XYZ\""), "euler"),
            (SMPL22_CFG.replacen("joint = \"right_hip\"", "joint = \"tail\"", 1), "unknown joint"),
            (SMPL22_CFG.replacen("neutral = [0.06, -0.47, 0.0]", "neutral = [0.06, -0.09, 0.0]", 1), "zero bone"),
            (SMPL22_CFG.replacen("kind = \"bend\"", "kind = \"bend\"\nplane = \"XY\"", 1), "bend plane"),
            (SMPL22_CFG.replacen("sign = 1", "sign = 2", 1), "sign"),
        ];
        for (text, what) in cases {
            assert!(SkeletonDef::from_toml(&text).is_err(), "{what} accepted");
        }
    }

    #[test]
    fn parse_error_has_location() {
        match SkeletonDef::from_toml("schema = \"lingomotion/1\"\nname = [") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
