//! Flat binary tensor files used to persist grids and spectra.
//!
//! Layout: a 16-byte header of four little-endian u32 words — a magic tag
//! identifying the tensor kind, then the three dimensions — followed by the
//! elements as little-endian float32 in row-major `(d0, d1, d2)` order.
//! BEVs store `(H, W, C)`, sinograms `(n_theta, n_tau, C)`, spectra
//! `(n_theta, n_omega, C)`; the in-memory layout is channel-first, so the
//! writer transposes.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array3;

use crate::error::{Error, Result};

/// Tensor kind tags ("RNG" + kind letter).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    Bev,
    Sinogram,
    Ting,
}

impl TensorKind {
    fn magic(self) -> u32 {
        u32::from_le_bytes(match self {
            TensorKind::Bev => *b"RNGB",
            TensorKind::Sinogram => *b"RNGS",
            TensorKind::Ting => *b"RNGT",
        })
    }

    fn from_magic(m: u32) -> Option<TensorKind> {
        [TensorKind::Bev, TensorKind::Sinogram, TensorKind::Ting]
            .into_iter()
            .find(|k| k.magic() == m)
    }
}

/// Write a channel-first `(c, d0, d1)` array as a `(d0, d1, c)` tensor file.
pub fn write_tensor(path: &Path, kind: TensorKind, data: &Array3<f64>) -> Result<()> {
    let shape = data.shape();
    let (c, d0, d1) = (shape[0], shape[1], shape[2]);
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_u32::<LittleEndian>(kind.magic())?;
    w.write_u32::<LittleEndian>(d0 as u32)?;
    w.write_u32::<LittleEndian>(d1 as u32)?;
    w.write_u32::<LittleEndian>(c as u32)?;
    for i in 0..d0 {
        for j in 0..d1 {
            for ch in 0..c {
                w.write_f32::<LittleEndian>(data[[ch, i, j]] as f32)?;
            }
        }
    }
    Ok(())
}

/// Read a tensor file back into channel-first layout, checking the kind tag.
pub fn read_tensor(path: &Path, kind: TensorKind) -> Result<Array3<f64>> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut f = fs::File::open(path)?;
    let magic = f.read_u32::<LittleEndian>()?;
    let found = TensorKind::from_magic(magic).ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        msg: format!("bad magic {magic:#010x}"),
    })?;
    if found != kind {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: format!("expected {kind:?} tensor, found {found:?}"),
        });
    }
    let d0 = f.read_u32::<LittleEndian>()? as usize;
    let d1 = f.read_u32::<LittleEndian>()? as usize;
    let c = f.read_u32::<LittleEndian>()? as usize;
    let n = d0
        .checked_mul(d1)
        .and_then(|v| v.checked_mul(c))
        .ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            msg: "dimension overflow".into(),
        })?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes)?;
    if bytes.len() != n * 4 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            msg: format!("expected {} data bytes, found {}", n * 4, bytes.len()),
        });
    }
    let mut cursor = std::io::Cursor::new(bytes);
    let mut data = Array3::zeros((c, d0, d1));
    for i in 0..d0 {
        for j in 0..d1 {
            for ch in 0..c {
                data[[ch, i, j]] = cursor.read_f32::<LittleEndian>()? as f64;
            }
        }
    }
    Ok(data)
}
