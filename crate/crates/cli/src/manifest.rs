//! Run provenance. Timings and wall-clock live here, not in the data files,
//! so data files stay byte-identical across runs.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub toolkit: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub started_unix_s: u64,
    pub wall_clock_s: f64,
    pub stages: Vec<StageTiming>,
    pub files: Vec<String>,
}

/// Collects per-stage timings while a command runs.
#[derive(Debug)]
pub struct Timer {
    start: Instant,
    started_unix_s: u64,
    stages: Vec<StageTiming>,
}

impl Default for Timer {
    fn default() -> Self {
        Self::new()
    }
}

impl Timer {
    pub fn new() -> Self {
        Self {
            start: Instant::now(),
            started_unix_s: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            stages: Vec::new(),
        }
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.stages.push(StageTiming {
            stage: name.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn stages(&self) -> &[StageTiming] {
        &self.stages
    }

    pub fn finish(
        self,
        command: &str,
        config_sha256: &str,
        seed: u64,
        files: Vec<String>,
    ) -> RunManifest {
        RunManifest {
            toolkit: "qnoise".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: config_sha256.into(),
            seed,
            threads: rayon::current_num_threads(),
            started_unix_s: self.started_unix_s,
            wall_clock_s: self.start.elapsed().as_secs_f64(),
            stages: self.stages,
            files,
        }
    }
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}
