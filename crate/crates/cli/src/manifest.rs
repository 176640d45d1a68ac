//! Run manifest: configuration echo, conventions, stage timings, peak and
//! phase records, the solution, and a hash inventory of every emitted file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use dopsar_core::heightsolver::{Solution, UnbMeasurement, WbMeasurement};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

/// The conventions a consumer must know to interpret phases and residuals.
#[derive(Debug, Clone, Serialize)]
pub struct Conventions {
    pub doppler_sign: &'static str,
    pub slow_time: &'static str,
    pub image_phase: &'static str,
    pub interferometric_measurement: &'static str,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            doppler_sign: "f_d = -(omega0/c) L . gamma'",
            slow_time: "seconds, zero at the trajectory midpoint of the shipped configs",
            image_phase: "carrier restored at each pixel's zero-Doppler(-rate) time",
            interferometric_measurement:
                "solver right-hand sides evaluated at the true scatterer state; the \
                 interferometric value uses the measurement-surface relation there",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModalityReport {
    pub image1_peak_m: [f64; 2],
    pub image2_peak_m: [f64; 2],
    pub registration_offset_px: [i64; 2],
    pub interferogram_peak_phase_rad: f64,
    /// Zero-Doppler times (wideband) or zero-Doppler-rate times (unb) used
    /// as phase references, seconds.
    pub reference_times_s: [f64; 2],
    pub fixed_y_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wb_measurement: Option<WbMeasurement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wb_image_measurement: Option<WbMeasurement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unb_measurement: Option<UnbMeasurement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unb_image_measurement: Option<UnbMeasurement>,
    pub solution: Solution,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub software_version: String,
    pub format_version: u32,
    pub config_hash_sha256: String,
    pub seed: u64,
    pub conventions: Conventions,
    pub timings_s: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wideband: Option<ModalityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unb: Option<ModalityReport>,
    pub files: Vec<FileRecord>,
    pub config_echo: RunConfig,
}

impl Manifest {
    pub fn new(config: &RunConfig, config_text: &str) -> Self {
        Manifest {
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            format_version: MANIFEST_FORMAT_VERSION,
            config_hash_sha256: sha256_hex(config_text.as_bytes()),
            seed: config.run.seed,
            conventions: Conventions::default(),
            timings_s: BTreeMap::new(),
            wideband: None,
            unb: None,
            files: Vec::new(),
            config_echo: config.clone(),
        }
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        // Route through a value so tables serialize after scalars
        // regardless of field order.
        let value = toml::Value::try_from(self)?;
        Ok(toml::to_string_pretty(&value)?)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Tracks emitted files and hashes them for the manifest inventory.
#[derive(Debug, Default)]
pub struct FileInventory {
    root: PathBuf,
    records: Vec<FileRecord>,
}

impl FileInventory {
    pub fn new(root: &Path) -> Self {
        FileInventory { root: root.to_path_buf(), records: Vec::new() }
    }

    /// Record a file that was just written below the inventory root.
    pub fn record(&mut self, path: &Path) -> std::io::Result<()> {
        let bytes = std::fs::read(path)?;
        let rel = path
            .strip_prefix(&self.root)
            .unwrap_or(path)
            .to_string_lossy()
            .into_owned();
        self.records.push(FileRecord {
            path: rel,
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn into_records(self) -> Vec<FileRecord> {
        self.records
    }
}
