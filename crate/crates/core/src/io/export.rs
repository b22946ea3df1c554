//! Inspectable exports: per-slice PGM images and flat CSV.

use crate::synth::{Volume, VolumeKind};
use crate::{Error, Result};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// Flat CSV: a `dims`/`spacing` header, then one value per line in storage
/// order. Values print in shortest round-trip form, so import is exact.
pub fn export_csv(volume: &Volume) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# dims={}x{}x{}",
        volume.dims.0, volume.dims.1, volume.dims.2
    );
    let _ = writeln!(
        out,
        "# spacing_um={},{},{}",
        volume.spacing_um.0, volume.spacing_um.1, volume.spacing_um.2
    );
    for v in &volume.data {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn import_csv(text: &str) -> Result<Volume> {
    let mut dims = None;
    let mut spacing = (1.0, 1.0, 1.0);
    let mut data = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(v) = rest.strip_prefix("dims=") {
                let parts: Vec<usize> = v.split('x').filter_map(|p| p.parse().ok()).collect();
                if parts.len() == 3 {
                    dims = Some((parts[0], parts[1], parts[2]));
                }
            } else if let Some(v) = rest.strip_prefix("spacing_um=") {
                let parts: Vec<f64> = v.split(',').filter_map(|p| p.parse().ok()).collect();
                if parts.len() == 3 {
                    spacing = (parts[0], parts[1], parts[2]);
                }
            }
            continue;
        }
        data.push(
            line.parse::<f64>()
                .map_err(|_| Error::format("csv", format!("bad value '{line}'")))?,
        );
    }
    let dims = dims.ok_or_else(|| Error::format("csv", "missing dims header"))?;
    if dims.0 * dims.1 * dims.2 != data.len() {
        return Err(Error::format(
            "csv",
            format!("dims {dims:?} do not match {} values", data.len()),
        ));
    }
    Ok(Volume {
        dims,
        spacing_um: spacing,
        data,
        kind: VolumeKind::Intensity,
    })
}

/// Write one 8-bit binary PGM per z slice; returns the file paths.
///
/// Binary volumes map to 0/255; intensity volumes scale min..max to 0..255.
pub fn export_pgm_slices(volume: &Volume, dir: &Path, base: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let (nx, ny, nz) = volume.dims;
    let binary = volume.is_binary();
    let (lo, hi) = volume
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let scale = if binary || hi <= lo {
        None
    } else {
        Some((lo, 255.0 / (hi - lo)))
    };

    let mut paths = Vec::with_capacity(nz);
    for z in 0..nz {
        let mut bytes = format!("P5\n{nx} {ny}\n255\n").into_bytes();
        for y in 0..ny {
            for x in 0..nx {
                let v = volume.at(x, y, z);
                let byte = match scale {
                    None => {
                        if v != 0.0 {
                            255u8
                        } else {
                            0u8
                        }
                    }
                    Some((lo, s)) => ((v - lo) * s).round().clamp(0.0, 255.0) as u8,
                };
                bytes.push(byte);
            }
        }
        let path = dir.join(format!("{base}_z{z:03}.pgm"));
        fs::write(&path, &bytes).map_err(|e| Error::io(path.display().to_string(), e))?;
        paths.push(path);
    }
    Ok(paths)
}
