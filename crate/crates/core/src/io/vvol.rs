//! The VVOL volume container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic   4 bytes  "VVOL"
//! version u32      1
//! dims    3 x u32  x, y, z
//! spacing 3 x f32  µm per voxel
//! dtype   u32      0 = f32, 1 = u8 (binary)
//! length  u64      payload bytes = product(dims) * dtype size
//! payload          z-major slices, y rows, x fastest
//! ```

use crate::synth::{Volume, VolumeKind};
use crate::{Error, Result};
use std::fs;
use std::io::Write;
use std::path::Path;

pub const VVOL_MAGIC: &[u8; 4] = b"VVOL";
pub const VVOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VvolDtype {
    F32,
    U8,
}

impl VvolDtype {
    fn code(self) -> u32 {
        match self {
            VvolDtype::F32 => 0,
            VvolDtype::U8 => 1,
        }
    }

    fn from_code(code: u32, path: &Path) -> Result<Self> {
        match code {
            0 => Ok(VvolDtype::F32),
            1 => Ok(VvolDtype::U8),
            other => Err(Error::format(
                path.display().to_string(),
                format!("unknown dtype code {other}"),
            )),
        }
    }

    fn size(self) -> usize {
        match self {
            VvolDtype::F32 => 4,
            VvolDtype::U8 => 1,
        }
    }

    /// Natural dtype for a volume kind: intensities as f32, binary as u8.
    pub fn for_kind(kind: VolumeKind) -> Self {
        match kind {
            VolumeKind::Intensity => VvolDtype::F32,
            VolumeKind::Mask | VolumeKind::Skeleton => VvolDtype::U8,
        }
    }
}

/// Serialize a volume to VVOL bytes.
pub fn vvol_bytes(volume: &Volume, dtype: VvolDtype) -> Vec<u8> {
    let n = volume.len();
    let mut out = Vec::with_capacity(44 + n * dtype.size());
    out.extend_from_slice(VVOL_MAGIC);
    out.extend_from_slice(&VVOL_VERSION.to_le_bytes());
    out.extend_from_slice(&(volume.dims.0 as u32).to_le_bytes());
    out.extend_from_slice(&(volume.dims.1 as u32).to_le_bytes());
    out.extend_from_slice(&(volume.dims.2 as u32).to_le_bytes());
    out.extend_from_slice(&(volume.spacing_um.0 as f32).to_le_bytes());
    out.extend_from_slice(&(volume.spacing_um.1 as f32).to_le_bytes());
    out.extend_from_slice(&(volume.spacing_um.2 as f32).to_le_bytes());
    out.extend_from_slice(&dtype.code().to_le_bytes());
    out.extend_from_slice(&((n * dtype.size()) as u64).to_le_bytes());
    match dtype {
        VvolDtype::F32 => {
            for &v in &volume.data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        VvolDtype::U8 => {
            for &v in &volume.data {
                out.push(u8::from(v != 0.0));
            }
        }
    }
    out
}

pub fn write_vvol(path: &Path, volume: &Volume, dtype: VvolDtype) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
    }
    let bytes = vvol_bytes(volume, dtype);
    let mut file =
        fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(&bytes)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

fn take<'a>(bytes: &'a [u8], at: &mut usize, n: usize, path: &Path) -> Result<&'a [u8]> {
    if *at + n > bytes.len() {
        return Err(Error::format(path.display().to_string(), "truncated file"));
    }
    let slice = &bytes[*at..*at + n];
    *at += n;
    Ok(slice)
}

pub fn read_vvol(path: &Path) -> Result<(Volume, VvolDtype)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut at = 0usize;
    if take(&bytes, &mut at, 4, path)? != VVOL_MAGIC {
        return Err(Error::format(path.display().to_string(), "bad magic"));
    }
    let version = u32::from_le_bytes(take(&bytes, &mut at, 4, path)?.try_into().unwrap());
    if version != VVOL_VERSION {
        return Err(Error::format(
            path.display().to_string(),
            format!("unsupported version {version}"),
        ));
    }
    let mut dims = [0u32; 3];
    for d in &mut dims {
        *d = u32::from_le_bytes(take(&bytes, &mut at, 4, path)?.try_into().unwrap());
    }
    let mut spacing = [0f32; 3];
    for s in &mut spacing {
        *s = f32::from_le_bytes(take(&bytes, &mut at, 4, path)?.try_into().unwrap());
    }
    let dtype_code = u32::from_le_bytes(take(&bytes, &mut at, 4, path)?.try_into().unwrap());
    let dtype = VvolDtype::from_code(dtype_code, path)?;
    let payload_len = u64::from_le_bytes(take(&bytes, &mut at, 8, path)?.try_into().unwrap());
    let n = dims[0] as usize * dims[1] as usize * dims[2] as usize;
    if payload_len as usize != n * dtype.size() {
        return Err(Error::format(
            path.display().to_string(),
            format!(
                "payload length {payload_len} does not match dims {dims:?} x {} bytes",
                dtype.size()
            ),
        ));
    }
    let payload = take(&bytes, &mut at, payload_len as usize, path)?;
    let data: Vec<f64> = match dtype {
        VvolDtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        VvolDtype::U8 => payload.iter().map(|&b| f64::from(b != 0)).collect(),
    };
    let kind = match dtype {
        VvolDtype::F32 => VolumeKind::Intensity,
        VvolDtype::U8 => VolumeKind::Mask,
    };
    Ok((
        Volume {
            dims: (dims[0] as usize, dims[1] as usize, dims[2] as usize),
            spacing_um: (spacing[0] as f64, spacing[1] as f64, spacing[2] as f64),
            data,
            kind,
        },
        dtype,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::DEFAULT_SPACING_UM;
    use tempfile::tempdir;

    #[test]
    fn roundtrip_is_lossless_for_both_dtypes() {
        let dir = tempdir().unwrap();
        let mut intensity = Volume::zeros((4, 3, 2), DEFAULT_SPACING_UM, VolumeKind::Intensity);
        for (i, v) in intensity.data.iter_mut().enumerate() {
            // Values representable in f32 so the f32 container is lossless.
            *v = (i as f32 * 0.125) as f64;
        }
        let p1 = dir.path().join("i.vvol");
        write_vvol(&p1, &intensity, VvolDtype::F32).unwrap();
        let (back, dtype) = read_vvol(&p1).unwrap();
        assert_eq!(dtype, VvolDtype::F32);
        assert_eq!(back.dims, intensity.dims);
        assert_eq!(back.data, intensity.data);

        let mut mask = Volume::zeros((4, 3, 2), DEFAULT_SPACING_UM, VolumeKind::Mask);
        mask.data[5] = 1.0;
        mask.data[11] = 1.0;
        let p2 = dir.path().join("m.vvol");
        write_vvol(&p2, &mask, VvolDtype::U8).unwrap();
        let (mback, mdtype) = read_vvol(&p2).unwrap();
        assert_eq!(mdtype, VvolDtype::U8);
        assert_eq!(mback.data, mask.data);

        // Write-read-write is byte identical.
        let bytes1 = std::fs::read(&p2).unwrap();
        let p3 = dir.path().join("m2.vvol");
        write_vvol(&p3, &mback, VvolDtype::U8).unwrap();
        assert_eq!(bytes1, std::fs::read(&p3).unwrap());
    }

    #[test]
    fn bad_magic_and_truncation_are_rejected() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("bad.vvol");
        std::fs::write(&p, b"NOPE").unwrap();
        assert!(read_vvol(&p).is_err());
        std::fs::write(&p, b"VVOL\x01\x00\x00").unwrap();
        assert!(read_vvol(&p).is_err());
    }
}
