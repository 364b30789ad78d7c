use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use outagecast::datastore::{LOGS_FILE, OUTAGES_FILE, WEATHER_FILE};
use outagecast::io_util::{sha256_file, write_atomic};
use outagecast::kv::KvFile;
use outagecast::Result;
use serde::Serialize;

#[derive(Serialize, Debug)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Serialize, Debug)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: BTreeMap<String, String>,
    pub data_hashes: BTreeMap<String, String>,
    pub seed: u64,
    pub artifacts: Vec<Artifact>,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub outcome: String,
}

/// Collects what a run read and wrote; finished into `manifest-<subcommand>.json`.
pub struct Recorder {
    pub subcommand: String,
    pub config: BTreeMap<String, String>,
    pub data_hashes: BTreeMap<String, String>,
    pub seed: u64,
    artifacts: Vec<PathBuf>,
    started: Instant,
    started_unix: u64,
}

impl Recorder {
    pub fn new(subcommand: &str) -> Self {
        Recorder {
            subcommand: subcommand.to_string(),
            config: BTreeMap::new(),
            data_hashes: BTreeMap::new(),
            seed: 0,
            artifacts: Vec::new(),
            started: Instant::now(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn set_config(&mut self, kv: &KvFile) {
        for (k, v) in kv.iter() {
            self.config.insert(k.to_string(), v.to_string());
        }
    }

    /// Hash whichever corpus files exist under `dir`.
    pub fn hash_data_dir(&mut self, dir: &Path) -> Result<()> {
        for name in [OUTAGES_FILE, LOGS_FILE, WEATHER_FILE] {
            let p = dir.join(name);
            if p.exists() {
                self.data_hashes.insert(p.display().to_string(), sha256_file(&p)?);
            }
        }
        Ok(())
    }

    pub fn hash_file(&mut self, path: &Path) -> Result<()> {
        if path.exists() {
            self.data_hashes.insert(path.display().to_string(), sha256_file(path)?);
        }
        Ok(())
    }

    pub fn produced(&mut self, path: PathBuf) {
        self.artifacts.push(path);
    }

    pub fn manifest_path(&self, out: &Path) -> PathBuf {
        out.join(format!("manifest-{}.json", self.subcommand))
    }

    pub fn finish(self, out: &Path, outcome: &str) -> Result<PathBuf> {
        let mut artifacts = Vec::new();
        for p in &self.artifacts {
            if p.exists() {
                artifacts.push(Artifact {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                });
            }
        }
        let path = self.manifest_path(out);
        let m = RunManifest {
            subcommand: self.subcommand,
            config: self.config,
            data_hashes: self.data_hashes,
            seed: self.seed,
            artifacts,
            started_unix: self.started_unix,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            outcome: outcome.to_string(),
        };
        let mut text = serde_json::to_string_pretty(&m).expect("manifest serializes");
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}
