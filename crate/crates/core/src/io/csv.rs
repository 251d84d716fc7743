use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{check_joint_names, AngleSequence, MotionSequence, RootTrack};
use crate::error::{Error, Result};
use crate::kinematics::SkeletonDef;
use crate::SCHEMA;

const ROOT_COLUMNS: [&str; 6] = ["root_tx", "root_ty", "root_tz", "root_rx", "root_ry", "root_rz"];
const AXES: [&str; 3] = ["x", "y", "z"];

struct Header {
    fps: f64,
    skeleton: String,
}

fn parse_header(line: Option<&str>, kind: &str) -> Result<Header> {
    let line = line.ok_or_else(|| Error::parse(1, 1, "empty file"))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some("#") {
        return Err(Error::parse(1, 1, "expected `#` header line"));
    }
    match parts.next() {
        Some(s) if s == SCHEMA => {}
        other => {
            return Err(Error::Schema(format!(
                "expected schema `{SCHEMA}`, found `{}`",
                other.unwrap_or("")
            )))
        }
    }
    match parts.next() {
        Some(k) if k == kind => {}
        other => {
            return Err(Error::Schema(format!(
                "expected `{kind}` file, found `{}`",
                other.unwrap_or("")
            )))
        }
    }
    let mut fps = None;
    let mut skeleton = None;
    for p in parts {
        if let Some(v) = p.strip_prefix("fps=") {
            fps = Some(
                v.parse::<f64>()
                    .map_err(|_| Error::parse(1, 1, format!("bad fps `{v}`")))?,
            );
        } else if let Some(v) = p.strip_prefix("skeleton=") {
            skeleton = Some(v.to_string());
        }
    }
    let fps = fps.ok_or_else(|| Error::parse(1, 1, "header lacks fps="))?;
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::parse(1, 1, format!("fps must be positive, got {fps}")));
    }
    let skeleton = skeleton.ok_or_else(|| Error::parse(1, 1, "header lacks skeleton="))?;
    Ok(Header { fps, skeleton })
}

/// Parses the data rows after the two header lines. Returns the per-row
/// numeric cells (without the frame column).
fn parse_rows<'a>(
    lines: impl Iterator<Item = &'a str>,
    n_cols: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 3;
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let frame = cells.next().unwrap_or("");
        match frame.parse::<usize>() {
            Ok(f) if f == rows.len() => {}
            Ok(f) => {
                return Err(Error::parse(
                    line_no,
                    1,
                    format!("frame index {f} out of sequence, expected {}", rows.len()),
                ))
            }
            Err(_) => return Err(Error::parse(line_no, 1, format!("bad frame index `{frame}`"))),
        }
        let mut row = Vec::with_capacity(n_cols);
        for (c, cell) in cells.enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::parse(line_no, c + 2, format!("non-numeric cell `{cell}`"))
            })?;
            if !v.is_finite() {
                return Err(Error::parse(line_no, c + 2, format!("non-finite value `{cell}`")));
            }
            row.push(v);
        }
        if row.len() != n_cols {
            return Err(Error::parse(
                line_no,
                row.len() + 2,
                format!("expected {} columns, found {}", n_cols + 1, row.len() + 1),
            ));
        }
        rows.push(row);
    }
    Ok(rows)
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses a motion CSV document and validates it against `sk`.
pub fn read_motion(text: &str, sk: &SkeletonDef) -> Result<MotionSequence> {
    let mut lines = text.lines();
    let header = parse_header(lines.next(), "motion")?;
    if header.skeleton != sk.name {
        return Err(Error::Schema(format!(
            "file declares skeleton `{}`, expected `{}`",
            header.skeleton, sk.name
        )));
    }
    let columns: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::parse(2, 1, "missing column header"))?
        .split(',')
        .collect();
    if columns.first() != Some(&"frame") {
        return Err(Error::parse(2, 1, "first column must be `frame`"));
    }
    let coord_cols = &columns[1..];
    if !coord_cols.len().is_multiple_of(3) {
        return Err(Error::parse(2, columns.len(), "joint columns must come in x,y,z triples"));
    }
    let mut joint_names = Vec::with_capacity(coord_cols.len() / 3);
    for (j, triple) in coord_cols.chunks(3).enumerate() {
        let name = triple[0]
            .strip_suffix("_x")
            .ok_or_else(|| Error::parse(2, 2 + 3 * j, format!("expected `<joint>_x`, got `{}`", triple[0])))?;
        for (k, axis) in AXES.iter().enumerate() {
            if triple[k] != format!("{name}_{axis}") {
                return Err(Error::parse(
                    2,
                    2 + 3 * j + k,
                    format!("expected `{name}_{axis}`, got `{}`", triple[k]),
                ));
            }
        }
        joint_names.push(name.to_string());
    }
    check_joint_names(&joint_names, sk)?;
    let rows = parse_rows(lines, coord_cols.len())?;
    let positions = rows
        .iter()
        .flat_map(|r| r.chunks(3).map(|c| [c[0], c[1], c[2]]))
        .collect();
    let m = MotionSequence {
        fps: header.fps,
        skeleton: header.skeleton,
        joint_names,
        positions,
    };
    m.validate(sk)?;
    Ok(m)
}

pub fn write_motion(m: &MotionSequence) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {SCHEMA} motion fps={} skeleton={}", m.fps, m.skeleton);
    out.push_str("frame");
    for j in &m.joint_names {
        for a in AXES {
            let _ = write!(out, ",{j}_{a}");
        }
    }
    out.push('\n');
    for t in 0..m.frames() {
        let _ = write!(out, "{t}");
        for p in m.frame(t) {
            let _ = write!(out, ",{},{},{}", p[0], p[1], p[2]);
        }
        out.push('\n');
    }
    out
}

pub fn load_motion(path: impl AsRef<Path>, sk: &SkeletonDef) -> Result<MotionSequence> {
    read_motion(&read_file(path.as_ref())?, sk)
}

pub fn save_motion(m: &MotionSequence, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &write_motion(m))
}

/// Parses an angle CSV document and validates it against `sk`.
pub fn read_angles(text: &str, sk: &SkeletonDef) -> Result<AngleSequence> {
    let mut lines = text.lines();
    let header = parse_header(lines.next(), "angles")?;
    if header.skeleton != sk.name {
        return Err(Error::Schema(format!(
            "file declares skeleton `{}`, expected `{}`",
            header.skeleton, sk.name
        )));
    }
    let columns: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::parse(2, 1, "missing column header"))?
        .split(',')
        .collect();
    if columns.len() < 7 || columns[0] != "frame" || columns[1..7] != ROOT_COLUMNS {
        return Err(Error::parse(
            2,
            1,
            format!("column header must start with `frame,{}`", ROOT_COLUMNS.join(",")),
        ));
    }
    let channels: Vec<String> = columns[7..].iter().map(|s| s.to_string()).collect();
    for (i, name) in channels.iter().enumerate() {
        if sk.channel_index(name).is_none() {
            return Err(Error::parse(2, 8 + i, format!("unknown channel `{name}`")));
        }
    }
    let rows = parse_rows(lines, columns.len() - 1)?;
    let mut root = RootTrack::default();
    let mut values = Vec::with_capacity(rows.len() * channels.len());
    for r in &rows {
        root.translation.push([r[0], r[1], r[2]]);
        root.orientation.push([r[3], r[4], r[5]]);
        values.extend_from_slice(&r[6..]);
    }
    let a = AngleSequence {
        fps: header.fps,
        skeleton: header.skeleton,
        channels,
        values,
        root,
    };
    a.validate(sk)?;
    Ok(a)
}

pub fn write_angles(a: &AngleSequence) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {SCHEMA} angles fps={} skeleton={}", a.fps, a.skeleton);
    out.push_str("frame,");
    out.push_str(&ROOT_COLUMNS.join(","));
    for c in &a.channels {
        let _ = write!(out, ",{c}");
    }
    out.push('\n');
    for t in 0..a.frames() {
        let tr = a.root.translation[t];
        let or = a.root.orientation[t];
        let _ = write!(out, "{t},{},{},{},{},{},{}", tr[0], tr[1], tr[2], or[0], or[1], or[2]);
        for c in 0..a.n_channels() {
            let _ = write!(out, ",{}", a.value(t, c));
        }
        out.push('\n');
    }
    out
}

pub fn load_angles(path: impl AsRef<Path>, sk: &SkeletonDef) -> Result<AngleSequence> {
    read_angles(&read_file(path.as_ref())?, sk)
}

pub fn save_angles(a: &AngleSequence, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &write_angles(a))
}
