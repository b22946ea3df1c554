//! The VCKPT checkpoint container.
//!
//! Little-endian layout: magic `VCKPT`, version, a UTF-8 network-spec echo,
//! named f64 parameter blobs with shapes, named batch-norm running
//! statistics, and an optional optimizer-state section.

use crate::{Error, Result};
use std::fs;
use std::path::Path;

pub const VCKPT_MAGIC: &[u8; 5] = b"VCKPT";
pub const VCKPT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlob {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnBlob {
    pub name: String,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub initialized: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizerBlob {
    pub t: u64,
    /// First/second moments aligned with the parameter blobs.
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub spec_echo: String,
    pub params: Vec<ParamBlob>,
    pub bn_states: Vec<BnBlob>,
    pub optimizer: Option<OptimizerBlob>,
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u32).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_f64s(out: &mut Vec<u8>, data: &[f64]) {
    out.extend_from_slice(&(data.len() as u64).to_le_bytes());
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn checkpoint_bytes(ck: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(VCKPT_MAGIC);
    out.extend_from_slice(&VCKPT_VERSION.to_le_bytes());
    put_str(&mut out, &ck.spec_echo);
    out.extend_from_slice(&(ck.params.len() as u32).to_le_bytes());
    for p in &ck.params {
        put_str(&mut out, &p.name);
        out.extend_from_slice(&(p.shape.len() as u32).to_le_bytes());
        for d in &p.shape {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
        put_f64s(&mut out, &p.data);
    }
    out.extend_from_slice(&(ck.bn_states.len() as u32).to_le_bytes());
    for b in &ck.bn_states {
        put_str(&mut out, &b.name);
        put_f64s(&mut out, &b.running_mean);
        put_f64s(&mut out, &b.running_var);
        out.push(u8::from(b.initialized));
    }
    match &ck.optimizer {
        None => out.push(0),
        Some(opt) => {
            out.push(1);
            out.extend_from_slice(&opt.t.to_le_bytes());
            out.extend_from_slice(&(opt.m.len() as u32).to_le_bytes());
            for (m, v) in opt.m.iter().zip(&opt.v) {
                put_f64s(&mut out, m);
                put_f64s(&mut out, v);
            }
        }
    }
    out
}

pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
    }
    fs::write(path, checkpoint_bytes(ck)).map_err(|e| Error::io(path.display().to_string(), e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
    path: String,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(Error::format(self.path.clone(), "truncated checkpoint"));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let b = self.take(n)?;
        String::from_utf8(b.to_vec()).map_err(|_| Error::format(self.path.clone(), "bad utf-8"))
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        let b = self.take(n * 8)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = Reader {
        bytes: &bytes,
        at: 0,
        path: path.display().to_string(),
    };
    if r.take(5)? != VCKPT_MAGIC {
        return Err(Error::format(r.path.clone(), "bad magic"));
    }
    let version = r.u32()?;
    if version != VCKPT_VERSION {
        return Err(Error::format(
            r.path.clone(),
            format!("unsupported version {version}"),
        ));
    }
    let spec_echo = r.string()?;
    let n_params = r.u32()? as usize;
    let mut params = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        let name = r.string()?;
        let ndim = r.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32()? as usize);
        }
        let data = r.f64s()?;
        if shape.iter().product::<usize>() != data.len() {
            return Err(Error::format(r.path.clone(), "shape/data mismatch"));
        }
        params.push(ParamBlob { name, shape, data });
    }
    let n_bn = r.u32()? as usize;
    let mut bn_states = Vec::with_capacity(n_bn);
    for _ in 0..n_bn {
        let name = r.string()?;
        let running_mean = r.f64s()?;
        let running_var = r.f64s()?;
        let initialized = r.take(1)?[0] != 0;
        bn_states.push(BnBlob {
            name,
            running_mean,
            running_var,
            initialized,
        });
    }
    let optimizer = if r.take(1)?[0] != 0 {
        let t = r.u64()?;
        let n = r.u32()? as usize;
        let mut m = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            m.push(r.f64s()?);
            v.push(r.f64s()?);
        }
        Some(OptimizerBlob { t, m, v })
    } else {
        None
    };
    Ok(Checkpoint {
        spec_echo,
        params,
        bn_states,
        optimizer,
    })
}
