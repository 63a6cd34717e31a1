//! The VVOL v1 volume file format.
//!
//! Layout: one line of JSON header, then raw little-endian f32 intensities
//! (row-major, x fastest), then raw little-endian u16 labels when
//! `has_labels` is set. Round-trips are bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Volume;
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct VvolHeader {
    magic: String,
    version: u32,
    dims: [usize; 3],
    spacing: [f64; 3],
    has_labels: bool,
    volume_id: String,
    family_id: String,
    num_classes: usize,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn save_volume(v: &Volume, path: &Path) -> Result<()> {
    let header = VvolHeader {
        magic: "VVOL".into(),
        version: 1,
        dims: [v.dims().0, v.dims().1, v.dims().2],
        spacing: [v.spacing().0, v.spacing().1, v.spacing().2],
        has_labels: v.has_labels(),
        volume_id: v.volume_id().to_string(),
        family_id: v.family_id().to_string(),
        num_classes: v.num_classes(),
    };
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    for &x in v.intensities() {
        w.write_all(&x.to_le_bytes()).map_err(|e| io_err(path, e))?;
    }
    if let Some(labels) = v.raw_labels() {
        for &l in labels {
            w.write_all(&l.to_le_bytes()).map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn load_volume(path: &Path) -> Result<Volume> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);

    let mut header_bytes = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        let n = r.read(&mut byte).map_err(|e| io_err(path, e))?;
        if n == 0 {
            return Err(Error::Format {
                path: path.display().to_string(),
                detail: "missing header line".into(),
            });
        }
        if byte[0] == b'\n' {
            break;
        }
        header_bytes.push(byte[0]);
    }
    let header: VvolHeader = serde_json::from_slice(&header_bytes)?;
    if header.magic != "VVOL" {
        return Err(Error::Format {
            path: path.display().to_string(),
            detail: format!("bad magic '{}'", header.magic),
        });
    }
    if header.version != 1 {
        return Err(Error::Format {
            path: path.display().to_string(),
            detail: format!("unsupported version {}", header.version),
        });
    }

    let numel = header.dims[0] * header.dims[1] * header.dims[2];
    let mut raw = vec![0u8; numel * 4];
    r.read_exact(&mut raw).map_err(|e| io_err(path, e))?;
    let intensities: Vec<f32> = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();

    let labels = if header.has_labels {
        let mut raw = vec![0u8; numel * 2];
        r.read_exact(&mut raw).map_err(|e| io_err(path, e))?;
        Some(
            raw.chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect(),
        )
    } else {
        None
    };

    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(|e| io_err(path, e))? != 0 {
        return Err(Error::Format {
            path: path.display().to_string(),
            detail: "trailing bytes after payload".into(),
        });
    }

    Volume::new(
        (header.dims[0], header.dims[1], header.dims[2]),
        (header.spacing[0], header.spacing[1], header.spacing[2]),
        intensities,
        labels,
        header.num_classes,
        header.volume_id,
        header.family_id,
    )
}
