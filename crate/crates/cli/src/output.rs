use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::svg::Plot;

/// Provenance stamped into every artifact.
#[derive(Clone, Debug, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Meta {
    /// Hashes the expanded argument list, joined by NUL bytes.
    pub fn new(command: &str, args: &[String], seed: u64) -> Self {
        let mut h = Sha256::new();
        for a in args {
            h.update(a.as_bytes());
            h.update([0u8]);
        }
        Meta {
            tool: "fraclap",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_sha256: hex::encode(h.finalize()),
            seed,
        }
    }

    fn comment_lines(&self) -> Vec<String> {
        vec![
            format!("{} {}", self.tool, self.version),
            format!("command: {}", self.command),
            format!("config_sha256: {}", self.config_sha256),
            format!("seed: {}", self.seed),
        ]
    }
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    meta: &'a Meta,
    result: &'a T,
}

pub struct Output {
    dir: PathBuf,
    pub meta: Meta,
}

impl Output {
    pub fn new(dir: PathBuf, meta: Meta) -> Self {
        Output { dir, meta }
    }

    fn path(&self, name: &Path) -> Result<PathBuf> {
        let p = if name.is_absolute() { name.to_path_buf() } else { self.dir.join(name) };
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        Ok(p)
    }

    fn write(&self, name: &Path, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.path(name)?;
        fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
        println!("wrote {}", p.display());
        Ok(p)
    }

    pub fn write_text(&self, name: &Path, text: &str) -> Result<PathBuf> {
        self.write(name, text.as_bytes())
    }

    /// Comment header with provenance, then a header row and records.
    pub fn csv(&self, name: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut text = String::new();
        for line in self.meta.comment_lines() {
            text.push_str("# ");
            text.push_str(&line);
            text.push('\n');
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        text.push_str(std::str::from_utf8(&w.into_inner()?)?);
        self.write(name, text.as_bytes())
    }

    pub fn json<T: Serialize>(&self, name: &Path, value: &T) -> Result<PathBuf> {
        let mut s = serde_json::to_string_pretty(&Stamped { meta: &self.meta, result: value })?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    pub fn svg(&self, name: &Path, plot: &Plot) -> Result<PathBuf> {
        let body = plot.render(&self.meta.comment_lines().join("; "));
        self.write(name, body.as_bytes())
    }
}
