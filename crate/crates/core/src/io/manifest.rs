//! Run manifests: config echo, seed, and content hashes of every file the
//! run read or wrote.

use crate::{Error, Result};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub seed: u64,
    pub config_hash: String,
    pub config_echo: String,
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl Manifest {
    pub fn new(seed: u64, config_hash: String, config_echo: String) -> Self {
        Manifest {
            seed,
            config_hash,
            config_echo,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn hash_file(path: &Path) -> Result<String> {
        let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(sha256_hex(&bytes))
    }

    /// Record an input file, `name` relative to the run directory.
    pub fn add_input(&mut self, name: &str, path: &Path) -> Result<()> {
        self.inputs.push((name.to_string(), Self::hash_file(path)?));
        Ok(())
    }

    /// Record an output file with its content hash.
    pub fn add_output(&mut self, name: &str, path: &Path) -> Result<()> {
        self.outputs.push((name.to_string(), Self::hash_file(path)?));
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# vesselnet run manifest");
        let _ = writeln!(out, "tool_version={}", crate::VERSION);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "config_hash={}", self.config_hash);
        let _ = writeln!(out, "[config]");
        for line in self.config_echo.lines() {
            let _ = writeln!(out, "  {line}");
        }
        let _ = writeln!(out, "[inputs]");
        let mut inputs = self.inputs.clone();
        inputs.sort();
        for (name, hash) in inputs {
            let _ = writeln!(out, "{name} {hash}");
        }
        let _ = writeln!(out, "[outputs]");
        let mut outputs = self.outputs.clone();
        outputs.sort();
        for (name, hash) in outputs {
            let _ = writeln!(out, "{name} {hash}");
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
        fs::write(path, self.to_text()).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn manifest_lists_outputs_with_hashes() {
        let dir = tempdir().unwrap();
        let f = dir.path().join("out.bin");
        fs::write(&f, b"payload").unwrap();
        let mut m = Manifest::new(7, "cafe".into(), "a=1\n".into());
        m.add_output("out.bin", &f).unwrap();
        let text = m.to_text();
        assert!(text.contains("seed=7"));
        assert!(text.contains("out.bin"));
        assert!(text.contains(&sha256_hex(b"payload")));
    }

    #[test]
    fn text_is_deterministic_under_insertion_order() {
        let dir = tempdir().unwrap();
        let f1 = dir.path().join("a.bin");
        let f2 = dir.path().join("b.bin");
        fs::write(&f1, b"1").unwrap();
        fs::write(&f2, b"2").unwrap();
        let mut m1 = Manifest::new(1, "h".into(), String::new());
        m1.add_output("a.bin", &f1).unwrap();
        m1.add_output("b.bin", &f2).unwrap();
        let mut m2 = Manifest::new(1, "h".into(), String::new());
        m2.add_output("b.bin", &f2).unwrap();
        m2.add_output("a.bin", &f1).unwrap();
        assert_eq!(m1.to_text(), m2.to_text());
    }
}
