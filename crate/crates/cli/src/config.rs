//! Run configuration: a TOML file with explicit unit suffixes on every
//! physical quantity. Frequencies are plain hertz in the file and become
//! angular frequencies internally.

use std::path::Path;

use serde::{Deserialize, Serialize};

use dopsar_core::forward::{UnbConfig, WidebandConfig, WindowKind};
use dopsar_core::geometry::{PhysicalConstants, Scatterer, Scene, Trajectory, Vec3};
use dopsar_core::heightsolver::SearchGrid;
use dopsar_core::imaging::ImageGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    Wideband,
    Unb,
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub modality: Modality,
    pub output_dir: String,
    /// Reserved for future noise models; echoed into the manifest.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSection {
    pub propagation_speed_m_per_s: f64,
}

impl Default for ConstantsSection {
    fn default() -> Self {
        ConstantsSection { propagation_speed_m_per_s: 3.0e8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub x_m: f64,
    pub y_m: f64,
    pub height_m: f64,
    /// Complex reflectivity as (re, im).
    #[serde(default = "unit_reflectivity")]
    pub reflectivity: [f64; 2],
}

fn unit_reflectivity() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSection {
    #[serde(default)]
    pub targets: Vec<TargetSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    pub kind: String,
    pub start_position_m: [f64; 3],
    pub velocity_m_per_s: [f64; 3],
    pub slow_time_interval_s: [f64; 2],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidebandSection {
    pub center_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub frequency_samples: usize,
    pub slow_time_samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnbSection {
    pub center_frequency_hz: f64,
    pub window_duration_s: f64,
    pub fast_time_samples: usize,
    pub slow_time_samples: usize,
    pub mu_samples: usize,
    /// Half-width of the scale-factor grid; omitted selects the automatic
    /// span (4x the scene's largest Doppler ratio).
    #[serde(default)]
    pub mu_half_width: Option<f64>,
    #[serde(default = "default_window")]
    pub window: String,
}

fn default_window() -> String {
    "raised-cosine".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageGridSection {
    pub x_extent_m: [f64; 2],
    pub y_extent_m: [f64; 2],
    pub spacing_m: f64,
    #[serde(default)]
    pub reference_height_m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchGridSection {
    pub x_extent_m: [f64; 2],
    pub x_step_m: f64,
    pub height_interval_m: [f64; 2],
    pub height_step_m: f64,
    /// Omitted: taken from the co-registered peak's y.
    #[serde(default)]
    pub fixed_y_m: Option<f64>,
    /// Optional full-volume search: interval and step for y.
    #[serde(default)]
    pub y_interval_m: Option<[f64; 2]>,
    #[serde(default)]
    pub y_step_m: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    #[serde(default)]
    pub constants: Option<ConstantsSection>,
    pub scene: SceneSection,
    pub trajectory1: TrajectorySection,
    pub trajectory2: TrajectorySection,
    #[serde(default)]
    pub wideband: Option<WidebandSection>,
    #[serde(default)]
    pub unb: Option<UnbSection>,
    pub image_grid: ImageGridSection,
    pub search_grid: SearchGridSection,
}

/// A configuration error with the offending section and key named.
#[derive(Debug)]
pub struct ConfigError {
    pub context: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.context, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(context: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { context: context.into(), message: message.into() }
}

impl RunConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<RunConfig, ConfigError> {
        toml::from_str(text).map_err(|e| err(origin, e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<RunConfig, ConfigError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| err(&origin, e.to_string()))?;
        Self::from_toml_str(&text, &origin)
    }

    pub fn constants(&self) -> PhysicalConstants {
        PhysicalConstants {
            c: self
                .constants
                .as_ref()
                .map(|c| c.propagation_speed_m_per_s)
                .unwrap_or(3.0e8),
        }
    }

    pub fn scene(&self) -> Scene {
        Scene {
            scatterers: self
                .scene
                .targets
                .iter()
                .map(|t| Scatterer::new(t.x_m, t.y_m, t.height_m, t.reflectivity))
                .collect(),
        }
    }

    fn trajectory(section: &TrajectorySection, context: &str) -> Result<Trajectory, ConfigError> {
        if section.kind != "linear" {
            return Err(err(context, format!("unsupported trajectory kind \"{}\"", section.kind)));
        }
        let p = section.start_position_m;
        let v = section.velocity_m_per_s;
        Trajectory::linear(
            Vec3::new(p[0], p[1], p[2]),
            Vec3::new(v[0], v[1], v[2]),
            section.slow_time_interval_s,
        )
        .map_err(|e| err(context, e.to_string()))
    }

    pub fn trajectory1(&self) -> Result<Trajectory, ConfigError> {
        Self::trajectory(&self.trajectory1, "[trajectory1]")
    }

    pub fn trajectory2(&self) -> Result<Trajectory, ConfigError> {
        Self::trajectory(&self.trajectory2, "[trajectory2]")
    }

    pub fn wideband_config(&self, halve: bool) -> Result<WidebandConfig, ConfigError> {
        let s = self
            .wideband
            .as_ref()
            .ok_or_else(|| err("[wideband]", "section required for the wideband modality"))?;
        let div = if halve { 2 } else { 1 };
        let cfg = WidebandConfig {
            omega0: std::f64::consts::TAU * s.center_frequency_hz,
            bandwidth: std::f64::consts::TAU * s.bandwidth_hz,
            n_freq: s.frequency_samples / div,
            n_slow: s.slow_time_samples / div,
        };
        cfg.validate().map_err(|e| err("[wideband]", e.to_string()))?;
        Ok(cfg)
    }

    pub fn unb_config(&self, halve: bool) -> Result<UnbConfig, ConfigError> {
        let s = self
            .unb
            .as_ref()
            .ok_or_else(|| err("[unb]", "section required for the unb modality"))?;
        let window = match s.window.as_str() {
            "raised-cosine" => WindowKind::RaisedCosine,
            other => return Err(err("[unb]", format!("unknown window \"{other}\""))),
        };
        let div = if halve { 2 } else { 1 };
        let cfg = UnbConfig {
            omega0: std::f64::consts::TAU * s.center_frequency_hz,
            t_phi: s.window_duration_s,
            n_fast: s.fast_time_samples / div,
            n_slow: s.slow_time_samples / div,
            mu_half_width: s.mu_half_width,
            n_mu: s.mu_samples / div,
            window,
        };
        cfg.validate().map_err(|e| err("[unb]", e.to_string()))?;
        Ok(cfg)
    }

    pub fn image_grid(&self) -> Result<ImageGrid, ConfigError> {
        let g = ImageGrid {
            x_extent: self.image_grid.x_extent_m,
            y_extent: self.image_grid.y_extent_m,
            spacing: self.image_grid.spacing_m,
            reference_height: self.image_grid.reference_height_m,
        };
        g.validate().map_err(|e| err("[image_grid]", e.to_string()))?;
        Ok(g)
    }

    /// Search grid; the fixed y defaults to 0 here and is replaced by the
    /// co-registered peak's y when not pinned in the file.
    pub fn search_grid(&self, fixed_y: f64) -> Result<SearchGrid, ConfigError> {
        let s = &self.search_grid;
        let y_search = match (s.y_interval_m, s.y_step_m) {
            (Some(i), Some(st)) => Some((i, st)),
            (None, None) => None,
            _ => {
                return Err(err(
                    "[search_grid]",
                    "y_interval_m and y_step_m must be given together",
                ))
            }
        };
        let g = SearchGrid {
            x_interval: s.x_extent_m,
            x_step: s.x_step_m,
            height_interval: s.height_interval_m,
            height_step: s.height_step_m,
            fixed_y: s.fixed_y_m.unwrap_or(fixed_y),
            y_search,
        };
        g.validate().map_err(|e| err("[search_grid]", e.to_string()))?;
        Ok(g)
    }

    /// Full validation before any compute: section presence for the chosen
    /// modality, parameter sanity, and for explicit mu grids the Doppler
    /// coverage precondition.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let t1 = self.trajectory1()?;
        let t2 = self.trajectory2()?;
        self.image_grid()?;
        self.search_grid(0.0)?;
        for (i, t) in self.scene.targets.iter().enumerate() {
            if !t.height_m.is_finite() {
                return Err(err("[scene]", format!("target {i}: height must be finite")));
            }
        }

        let wants_wb = matches!(self.run.modality, Modality::Wideband | Modality::Both);
        let wants_unb = matches!(self.run.modality, Modality::Unb | Modality::Both);
        if wants_wb {
            self.wideband_config(false)?;
        }
        if wants_unb {
            let cfg = self.unb_config(false)?;
            if let Some(hw) = cfg.mu_half_width {
                let consts = self.constants();
                let scene = self.scene();
                for (traj, name) in [(&t1, "trajectory1"), (&t2, "trajectory2")] {
                    let ratio =
                        dopsar_core::forward::max_doppler_ratio(&scene, traj, &cfg, &consts)
                            .map_err(|e| err("[unb]", e.to_string()))?;
                    if hw <= ratio {
                        return Err(err(
                            "[unb]",
                            format!(
                                "mu_half_width {hw:.3e} does not cover the scene Doppler \
                                 ratio {ratio:.3e} for {name}"
                            ),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}
