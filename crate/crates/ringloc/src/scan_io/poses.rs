//! Pose CSV I/O.
//!
//! Two layouts are accepted, distinguished by the header line:
//!
//! * `id,x,y,z,qx,qy,qz,qw` — full 3D pose with a unit quaternion;
//! * `id,x,y,yaw` — planar pose, promoted to 3D with zero z/roll/pitch.
//!
//! Quaternions whose norm deviates from 1 by more than 1e-3 are rejected;
//! smaller deviations are renormalized. Ids must be strictly increasing.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use super::Pose3;
use crate::error::{Error, Result};

const QUAT_NORM_TOL: f64 = 1e-3;

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

pub fn load_poses(path: &Path) -> Result<Vec<(i64, Pose3)>> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let header = loop {
        match lines.next() {
            Some(line) => {
                let line = line?;
                let t = line.trim().to_string();
                if !t.is_empty() && !t.starts_with('#') {
                    break t;
                }
            }
            None => return Err(format_err(path, "empty pose file")),
        }
    };
    let cols: Vec<String> = header
        .split(',')
        .map(|c| c.trim().to_ascii_lowercase())
        .collect();
    let planar = match cols.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["id", "x", "y", "z", "qx", "qy", "qz", "qw"] => false,
        ["id", "x", "y", "yaw"] => true,
        _ => return Err(format_err(path, format!("unrecognized header {header:?}"))),
    };

    let mut out: Vec<(i64, Pose3)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row = lineno + 2;
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        let expected = if planar { 4 } else { 8 };
        if fields.len() != expected {
            return Err(format_err(
                path,
                format!("row {row}: expected {expected} fields, got {}", fields.len()),
            ));
        }
        let id: i64 = fields[0]
            .parse()
            .map_err(|_| format_err(path, format!("row {row}: bad id {:?}", fields[0])))?;
        let nums: Vec<f64> = fields[1..]
            .iter()
            .map(|f| normalize_minus(f).parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| format_err(path, format!("row {row}: bad number")))?;
        let pose = if planar {
            Pose3::from_xy_yaw(nums[0], nums[1], nums[2])
        } else {
            let q = Quaternion::new(nums[6], nums[3], nums[4], nums[5]);
            let norm = q.norm();
            if (norm - 1.0).abs() > QUAT_NORM_TOL {
                return Err(format_err(
                    path,
                    format!("row {row}: quaternion norm {norm} outside unit tolerance"),
                ));
            }
            Pose3::new(
                Vector3::new(nums[0], nums[1], nums[2]),
                UnitQuaternion::from_quaternion(q),
            )
        };
        if let Some((last, _)) = out.last() {
            if id <= *last {
                return Err(format_err(
                    path,
                    format!("row {row}: id {id} is not strictly increasing"),
                ));
            }
        }
        out.push((id, pose));
    }
    Ok(out)
}

/// Accept the Unicode minus sign some tools emit in CSV exports.
fn normalize_minus(s: &str) -> String {
    s.replace('\u{2212}', "-")
}

/// Write poses in the full `id,x,y,z,qx,qy,qz,qw` layout.
pub fn save_poses(path: &Path, poses: &[(i64, Pose3)]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "id,x,y,z,qx,qy,qz,qw")?;
    for (id, pose) in poses {
        let t = pose.translation;
        let q = pose.rotation.quaternion();
        writeln!(
            w,
            "{id},{},{},{},{},{},{},{}",
            t.x, t.y, t.z, q.i, q.j, q.k, q.w
        )?;
    }
    Ok(())
}
