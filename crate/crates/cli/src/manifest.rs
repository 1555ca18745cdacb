use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteCount {
    pub passed: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// Resolved config as TOML.
    pub config: String,
    pub seed: u64,
    pub version: String,
    /// Unix seconds.
    pub started: f64,
    pub finished: f64,
    pub suites: Vec<(String, SuiteCount)>,
    pub outputs: Vec<OutputFile>,
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(subcommand: &str, config: &Config) -> Self {
        let started = unix_now();
        Self {
            subcommand: subcommand.into(),
            config: toml::to_string(&config.resolved()).unwrap_or_default(),
            seed: config.seed,
            version: env!("CARGO_PKG_VERSION").into(),
            started,
            finished: started,
            suites: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn count(&mut self, suite: &str, passed: bool) {
        let idx = match self.suites.iter().position(|(s, _)| s == suite) {
            Some(i) => i,
            None => {
                self.suites.push((suite.into(), SuiteCount::default()));
                self.suites.len() - 1
            }
        };
        let c = &mut self.suites[idx].1;
        if passed {
            c.passed += 1;
        } else {
            c.failed += 1;
        }
    }

    pub fn failures(&self) -> usize {
        self.suites.iter().map(|(_, c)| c.failed).sum()
    }

    /// Writes `bytes` under `dir` and records it.
    pub fn emit(&mut self, dir: &Path, name: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
        let path = dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(OutputFile { path: path.display().to_string(), sha256: sha256_hex(bytes) });
        Ok(path)
    }

    /// Stamps the end time and writes `<subcommand>.manifest.json`.
    pub fn finish(mut self, dir: &Path) -> anyhow::Result<(Self, PathBuf)> {
        self.finished = unix_now();
        let path = dir.join(format!("{}.manifest.json", self.subcommand));
        let text = serde_json::to_string_pretty(&self)?;
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok((self, path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha_of_empty() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }

    #[test]
    fn counts_accumulate() {
        let mut m = RunManifest::new("x", &Config::default());
        m.count("a", true);
        m.count("a", false);
        m.count("b", true);
        assert_eq!(m.suites[0].1, SuiteCount { passed: 1, failed: 1 });
        assert_eq!(m.failures(), 1);
    }
}
