//! Shared fixtures for the pipeline benchmarks.

use dopsar_core::forward::{UnbConfig, WidebandConfig};
use dopsar_core::geometry::{PhysicalConstants, Scene, Trajectory, Vec3};
use dopsar_core::imaging::ImageGrid;

pub fn constants() -> PhysicalConstants {
    PhysicalConstants::default()
}

pub fn scene() -> Scene {
    Scene::single(-20.0, -31.0, 50.0)
}

/// The reference pass geometry at a configurable height and speed.
pub fn pass(height: f64, speed: f64) -> Trajectory {
    let half = 500.0 / speed;
    Trajectory::linear(
        Vec3::new(-7100.0, -speed * half, height),
        Vec3::new(0.0, speed, 0.0),
        [-half, half],
    )
    .unwrap()
}

pub fn wideband_config(n_freq: usize, n_slow: usize) -> WidebandConfig {
    WidebandConfig { n_freq, n_slow, ..WidebandConfig::default() }
}

pub fn unb_config(n_fast: usize, n_slow: usize, n_mu: usize) -> UnbConfig {
    UnbConfig { n_fast, n_slow, n_mu, ..UnbConfig::default() }
}

/// A small imaging window around the wideband layover point.
pub fn window_grid() -> ImageGrid {
    ImageGrid {
        x_extent: [-56.0, -26.0],
        y_extent: [-46.0, -16.0],
        spacing: 1.0,
        reference_height: 0.0,
    }
}
