//! End-to-end command-line behavior: stage decomposition, exit codes and
//! export formats, on a reduced-size configuration.

use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_dopsar");

/// A small single-target acquisition that runs in well under a second.
fn small_config(out_dir: &Path) -> String {
    format!(
        r#"
[run]
modality = "wideband"
output_dir = "{}"

[[scene.targets]]
x_m = -20.0
y_m = -31.0
height_m = 50.0

[trajectory1]
kind = "linear"
start_position_m = [-7100.0, -500.0, 3000.0]
velocity_m_per_s = [0.0, 100.0, 0.0]
slow_time_interval_s = [-5.0, 5.0]

[trajectory2]
kind = "linear"
start_position_m = [-7100.0, -500.0, 4000.0]
velocity_m_per_s = [0.0, 100.0, 0.0]
slow_time_interval_s = [-5.0, 5.0]

[wideband]
center_frequency_hz = 8.0e9
bandwidth_hz = 100.0e6
frequency_samples = 64
slow_time_samples = 128

[image_grid]
x_extent_m = [-54.0, -30.0]
y_extent_m = [-42.0, -20.0]
spacing_m = 1.0

[search_grid]
x_extent_m = [-30.0, -10.0]
x_step_m = 1.0
height_interval_m = [40.0, 60.0]
height_step_m = 0.5
"#,
        out_dir.display().to_string().replace('\\', "/")
    )
}

fn run(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("spawn dopsar")
}

#[test]
fn run_then_stages_reproduce_identical_image() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("small.toml");
    std::fs::write(&cfg_path, small_config(&tmp.path().join("run-out"))).unwrap();
    let cfg = cfg_path.to_str().unwrap();

    // Full run.
    let out = run(&["run", "--config", cfg]);
    assert!(out.status.success(), "run failed: {}", String::from_utf8_lossy(&out.stderr));
    let run_image = tmp.path().join("run-out/wb_image_1.dsar");
    assert!(run_image.exists());

    // Decomposed: simulate, then image the serialized dataset.
    let stage_dir = tmp.path().join("stage-out");
    let out = run(&["simulate", "--config", cfg, "--out", stage_dir.to_str().unwrap()]);
    assert!(out.status.success(), "simulate failed: {}", String::from_utf8_lossy(&out.stderr));
    let ds = stage_dir.join("wb_data_1.dsar");
    assert!(ds.exists());
    let out = run(&[
        "image",
        "--config",
        cfg,
        "--data",
        ds.to_str().unwrap(),
        "--out",
        stage_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "image failed: {}", String::from_utf8_lossy(&out.stderr));

    // Bit-identical image containers.
    let a = std::fs::read(&run_image).unwrap();
    let b = std::fs::read(stage_dir.join("wb_image_1.dsar")).unwrap();
    assert_eq!(a, b, "staged image differs from the single-run image");

    // Interferogram and solve stages run from the serialized images.
    let out = run(&[
        "interferogram",
        "--config",
        cfg,
        "--image1",
        tmp.path().join("run-out/wb_image_1.dsar").to_str().unwrap(),
        "--image2",
        tmp.path().join("run-out/wb_image_2.dsar").to_str().unwrap(),
        "--out",
        stage_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(stage_dir.join("wb_interferogram.dsar").exists());

    let out = run(&[
        "solve",
        "--config",
        cfg,
        "--image1",
        tmp.path().join("run-out/wb_image_1.dsar").to_str().unwrap(),
        "--image2",
        tmp.path().join("run-out/wb_image_2.dsar").to_str().unwrap(),
        "--out",
        stage_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("solution:"), "{text}");
    assert!(stage_dir.join("wb_solution.toml").exists());
}

#[test]
fn manifest_lists_every_file_with_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("small.toml");
    let out_dir = tmp.path().join("run-out");
    std::fs::write(&cfg_path, small_config(&out_dir)).unwrap();
    let out = run(&["run", "--config", cfg_path.to_str().unwrap()]);
    assert!(out.status.success());

    let manifest = std::fs::read_to_string(out_dir.join("manifest.toml")).unwrap();
    for entry in std::fs::read_dir(&out_dir).unwrap() {
        let name = entry.unwrap().file_name().to_string_lossy().into_owned();
        if name != "manifest.toml" {
            assert!(manifest.contains(&name), "manifest missing {name}");
        }
    }
    assert!(manifest.contains("sha256"));
    assert!(manifest.contains("config_hash_sha256"));
}

#[test]
fn missing_config_is_a_validation_error() {
    let out = run(&["run", "--config", "/nonexistent/nope.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn malformed_config_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "this is not = [valid").unwrap();
    let out = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn empty_scene_fails_at_runtime() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("empty.toml");
    let text = small_config(&tmp.path().join("out")).replace(
        "[[scene.targets]]\nx_m = -20.0\ny_m = -31.0\nheight_m = 50.0\n",
        "[scene]\ntargets = []\n",
    );
    std::fs::write(&cfg_path, text).unwrap();
    let out = run(&["run", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("peak"), "unexpected error: {stderr}");
}

#[test]
fn export_formats() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("small.toml");
    let out_dir = tmp.path().join("run-out");
    std::fs::write(&cfg_path, small_config(&out_dir)).unwrap();
    assert!(run(&["run", "--config", cfg_path.to_str().unwrap()]).status.success());

    let image = out_dir.join("wb_image_1.dsar");
    let export_dir = tmp.path().join("exports");
    let out = run(&[
        "export",
        "--input",
        image.to_str().unwrap(),
        "--format",
        "csv",
        "--out",
        export_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(export_dir.join("wb_image_1.csv")).unwrap();
    assert!(csv.starts_with("y_m,x_m,re,im,magnitude,phase_rad"));

    let out = run(&[
        "export",
        "--input",
        image.to_str().unwrap(),
        "--format",
        "pgm",
        "--out",
        export_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(export_dir.join("wb_image_1.magnitude.pgm").exists());

    // Residual maps export too.
    let residual = out_dir.join("wb_residual_range-sphere.dsar");
    let out = run(&[
        "export",
        "--input",
        residual.to_str().unwrap(),
        "--format",
        "csv",
        "--out",
        export_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(export_dir.join("wb_residual_range-sphere.csv")).unwrap();
    assert!(csv.starts_with("height_m,x_m,residual"));

    // Unknown format is an error.
    let out = run(&["export", "--input", image.to_str().unwrap(), "--format", "bmp"]);
    assert!(!out.status.success());
}

#[test]
fn threads_flag_is_accepted_and_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("small.toml");
    std::fs::write(&cfg_path, small_config(&tmp.path().join("default"))).unwrap();
    let cfg = cfg_path.to_str().unwrap();
    let dir_a = tmp.path().join("a");
    let dir_b = tmp.path().join("b");
    let out = run(&["run", "--config", cfg, "--out", dir_a.to_str().unwrap(), "--threads", "1"]);
    assert!(out.status.success());
    let out = run(&["run", "--config", cfg, "--out", dir_b.to_str().unwrap(), "--threads", "2"]);
    assert!(out.status.success());
    let a = std::fs::read(dir_a.join("wb_image_1.dsar")).unwrap();
    let b = std::fs::read(dir_b.join("wb_image_1.dsar")).unwrap();
    assert_eq!(a, b, "thread count changed the output bytes");
}
