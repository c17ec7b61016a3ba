//! Point cloud file formats.
//!
//! * `xyz` — whitespace-separated ASCII, one `x y z [intensity]` per line.
//! * `bin` — headerless little-endian float32 records of
//!   `(x, y, z, intensity)`, 16 bytes per point.
//! * `pcd` — v0.7 header with `FIELDS x y z [intensity]`, `TYPE F`,
//!   `SIZE 4`, ASCII or binary data sections.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{Point3, PointCloud};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    XyzAscii,
    BinF32,
    /// ASCII data section on save; loading auto-detects from the header.
    PcdAscii,
    PcdBinary,
}

impl CloudFormat {
    /// Guess a format from a file extension.
    pub fn from_path(path: &Path) -> Option<CloudFormat> {
        match path.extension()?.to_str()? {
            "xyz" | "txt" => Some(CloudFormat::XyzAscii),
            "bin" => Some(CloudFormat::BinF32),
            "pcd" => Some(CloudFormat::PcdAscii),
            _ => None,
        }
    }
}

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

/// Load a cloud, dropping non-finite points.
///
/// Returns the cloud and the number of dropped points.
pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<(PointCloud, usize)> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let raw = match format {
        CloudFormat::XyzAscii => load_xyz(path)?,
        CloudFormat::BinF32 => load_bin(path)?,
        CloudFormat::PcdAscii | CloudFormat::PcdBinary => load_pcd(path)?,
    };
    let total = raw.len();
    let points: Vec<Point3> = raw.into_iter().filter(Point3::is_finite).collect();
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let dropped = total - points.len();
    Ok((PointCloud::new(points), dropped))
}

pub fn save_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<()> {
    match format {
        CloudFormat::XyzAscii => save_xyz(cloud, path),
        CloudFormat::BinF32 => save_bin(cloud, path),
        CloudFormat::PcdAscii => save_pcd(cloud, path, false),
        CloudFormat::PcdBinary => save_pcd(cloud, path, true),
    }
}

fn load_xyz(path: &Path) -> Result<Vec<Point3>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut points = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(format_err(
                path,
                format!("line {}: expected 3 or 4 fields", lineno + 1),
            ));
        }
        let mut vals = [0.0f64; 4];
        for (i, f) in fields.iter().enumerate() {
            vals[i] = f.parse::<f64>().map_err(|_| {
                format_err(path, format!("line {}: bad number {f:?}", lineno + 1))
            })?;
        }
        let mut p = Point3::new(vals[0], vals[1], vals[2]);
        if fields.len() == 4 {
            p.intensity = Some(vals[3]);
        }
        points.push(p);
    }
    Ok(points)
}

fn save_xyz(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for p in &cloud.points {
        match p.intensity {
            Some(i) => writeln!(w, "{} {} {} {}", p.x, p.y, p.z, i)?,
            None => writeln!(w, "{} {} {}", p.x, p.y, p.z)?,
        }
    }
    Ok(())
}

fn load_bin(path: &Path) -> Result<Vec<Point3>> {
    let data = fs::read(path)?;
    if data.len() % 16 != 0 {
        return Err(format_err(
            path,
            format!("length {} is not a multiple of 16", data.len()),
        ));
    }
    let mut cursor = std::io::Cursor::new(data);
    let n = cursor.get_ref().len() / 16;
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let x = cursor.read_f32::<LittleEndian>()? as f64;
        let y = cursor.read_f32::<LittleEndian>()? as f64;
        let z = cursor.read_f32::<LittleEndian>()? as f64;
        let i = cursor.read_f32::<LittleEndian>()? as f64;
        points.push(Point3::with_intensity(x, y, z, i));
    }
    Ok(points)
}

fn save_bin(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for p in &cloud.points {
        w.write_f32::<LittleEndian>(p.x as f32)?;
        w.write_f32::<LittleEndian>(p.y as f32)?;
        w.write_f32::<LittleEndian>(p.z as f32)?;
        w.write_f32::<LittleEndian>(p.intensity.unwrap_or(0.0) as f32)?;
    }
    Ok(())
}

fn load_pcd(path: &Path) -> Result<Vec<Point3>> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut fields: Vec<String> = Vec::new();
    let mut n_points: Option<usize> = None;
    let mut data_kind: Option<String> = None;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(format_err(path, "missing DATA section"));
        }
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut it = trimmed.split_whitespace();
        let key = it.next().unwrap_or("");
        let rest: Vec<&str> = it.collect();
        match key {
            "FIELDS" => fields = rest.iter().map(|s| s.to_string()).collect(),
            "SIZE" => {
                if rest.iter().any(|s| *s != "4") {
                    return Err(format_err(path, "only SIZE 4 fields are supported"));
                }
            }
            "TYPE" => {
                if rest.iter().any(|s| *s != "F") {
                    return Err(format_err(path, "only TYPE F fields are supported"));
                }
            }
            "COUNT" => {
                if rest.iter().any(|s| *s != "1") {
                    return Err(format_err(path, "only COUNT 1 fields are supported"));
                }
            }
            "POINTS" => {
                n_points = Some(
                    rest.first()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| format_err(path, "bad POINTS line"))?,
                );
            }
            "DATA" => {
                data_kind = Some(rest.first().unwrap_or(&"").to_string());
                break;
            }
            // VERSION / WIDTH / HEIGHT / VIEWPOINT are accepted and ignored.
            _ => {}
        }
    }

    let has_intensity = match fields.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["x", "y", "z"] => false,
        ["x", "y", "z", "intensity"] => true,
        _ => return Err(format_err(path, format!("unsupported FIELDS {fields:?}"))),
    };
    let n = n_points.ok_or_else(|| format_err(path, "missing POINTS"))?;
    let stride = if has_intensity { 4 } else { 3 };

    match data_kind.as_deref() {
        Some("ascii") => {
            let mut points = Vec::with_capacity(n);
            for (lineno, line) in reader.lines().enumerate() {
                let line = line?;
                let trimmed = line.trim();
                if trimmed.is_empty() {
                    continue;
                }
                let vals: Vec<f64> = trimmed
                    .split_whitespace()
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| format_err(path, format!("bad data row {}", lineno + 1)))?;
                if vals.len() != stride {
                    return Err(format_err(
                        path,
                        format!("row {}: expected {} fields", lineno + 1, stride),
                    ));
                }
                let mut p = Point3::new(vals[0], vals[1], vals[2]);
                if has_intensity {
                    p.intensity = Some(vals[3]);
                }
                points.push(p);
            }
            if points.len() != n {
                return Err(format_err(
                    path,
                    format!("POINTS says {n}, found {}", points.len()),
                ));
            }
            Ok(points)
        }
        Some("binary") => {
            let mut buf = Vec::new();
            reader.read_to_end(&mut buf)?;
            let need = n * stride * 4;
            if buf.len() < need {
                return Err(format_err(
                    path,
                    format!("binary section has {} bytes, need {need}", buf.len()),
                ));
            }
            let mut cursor = std::io::Cursor::new(buf);
            let mut points = Vec::with_capacity(n);
            for _ in 0..n {
                let x = cursor.read_f32::<LittleEndian>()? as f64;
                let y = cursor.read_f32::<LittleEndian>()? as f64;
                let z = cursor.read_f32::<LittleEndian>()? as f64;
                let mut p = Point3::new(x, y, z);
                if has_intensity {
                    p.intensity = Some(cursor.read_f32::<LittleEndian>()? as f64);
                }
                points.push(p);
            }
            Ok(points)
        }
        other => Err(format_err(path, format!("unsupported DATA {other:?}"))),
    }
}

fn save_pcd(cloud: &PointCloud, path: &Path, binary: bool) -> Result<()> {
    let has_intensity = cloud.points.iter().any(|p| p.intensity.is_some());
    let mut w = BufWriter::new(fs::File::create(path)?);
    let (fields, size, typ, count) = if has_intensity {
        ("x y z intensity", "4 4 4 4", "F F F F", "1 1 1 1")
    } else {
        ("x y z", "4 4 4", "F F F", "1 1 1")
    };
    let n = cloud.len();
    writeln!(w, "# .PCD v0.7 - Point Cloud Data file format")?;
    writeln!(w, "VERSION 0.7")?;
    writeln!(w, "FIELDS {fields}")?;
    writeln!(w, "SIZE {size}")?;
    writeln!(w, "TYPE {typ}")?;
    writeln!(w, "COUNT {count}")?;
    writeln!(w, "WIDTH {n}")?;
    writeln!(w, "HEIGHT 1")?;
    writeln!(w, "VIEWPOINT 0 0 0 1 0 0 0")?;
    writeln!(w, "POINTS {n}")?;
    if binary {
        writeln!(w, "DATA binary")?;
        for p in &cloud.points {
            w.write_f32::<LittleEndian>(p.x as f32)?;
            w.write_f32::<LittleEndian>(p.y as f32)?;
            w.write_f32::<LittleEndian>(p.z as f32)?;
            if has_intensity {
                w.write_f32::<LittleEndian>(p.intensity.unwrap_or(0.0) as f32)?;
            }
        }
    } else {
        writeln!(w, "DATA ascii")?;
        for p in &cloud.points {
            // f32 round-trip precision to match the binary variant.
            let (x, y, z) = (p.x as f32, p.y as f32, p.z as f32);
            if has_intensity {
                writeln!(w, "{} {} {} {}", x, y, z, p.intensity.unwrap_or(0.0) as f32)?;
            } else {
                writeln!(w, "{} {} {}", x, y, z)?;
            }
        }
    }
    Ok(())
}
