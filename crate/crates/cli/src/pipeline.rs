//! End-to-end orchestration: simulate -> image -> interfere -> solve, with
//! artifact files and the run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};

use dopsar_core::forward::{self, UnbDataSet, WidebandDataSet};
use dopsar_core::geometry::{self, PhysicalConstants, Scene, Trajectory, Vec3};
use dopsar_core::heightsolver::{
    measure_unb_from_images, measure_unb_from_truth, measure_wb_from_images,
    measure_wb_from_truth, residuals_unb, residuals_wb, solve_unb, solve_wb, SearchGrid,
};
use dopsar_core::imaging::{
    backproject_unb, backproject_wideband, equalize_doppler_rate_factor, find_peak, ComplexImage,
    ImageGrid,
};
use dopsar_core::interferometry::{coregister, interferogram, Interferogram};
use dopsar_core::io;

use crate::config::{Modality, RunConfig};
use crate::manifest::{FileInventory, Manifest, ModalityReport};

/// Everything a caller (the reference checks, the acceptance suite) needs
/// to examine after a run.
#[derive(Debug)]
pub struct ModalityOutcome {
    pub peak1_m: [f64; 2],
    pub peak2_m: [f64; 2],
    pub interferogram_peak_phase_rad: f64,
    pub solution_position: Vec3,
    pub degenerate: bool,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub wideband: Option<ModalityOutcome>,
    pub unb: Option<ModalityOutcome>,
    pub manifest_path: PathBuf,
}

/// Timer helper recording stage durations into the manifest.
struct Stages {
    timings: std::collections::BTreeMap<String, f64>,
}

impl Stages {
    fn new() -> Self {
        Stages { timings: std::collections::BTreeMap::new() }
    }

    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> anyhow::Result<T>) -> anyhow::Result<T> {
        let t0 = Instant::now();
        let out = f()?;
        self.timings.insert(name.to_string(), t0.elapsed().as_secs_f64());
        Ok(out)
    }
}

fn write_image_artifacts(
    dir: &Path,
    stem: &str,
    img: &ComplexImage,
    inventory: &mut FileInventory,
) -> anyhow::Result<()> {
    let bin = dir.join(format!("{stem}.dsar"));
    io::write_image(&bin, img)?;
    inventory.record(&bin)?;
    let mag = dir.join(format!("{stem}.magnitude.pgm"));
    io::export_magnitude_pgm(&mag, &img.data)?;
    inventory.record(&mag)?;
    let phase = dir.join(format!("{stem}.phase.pgm"));
    io::export_phase_pgm(&phase, &img.data)?;
    inventory.record(&phase)?;
    Ok(())
}

fn write_interferogram_artifacts(
    dir: &Path,
    stem: &str,
    ig: &Interferogram,
    inventory: &mut FileInventory,
) -> anyhow::Result<()> {
    let bin = dir.join(format!("{stem}.dsar"));
    io::write_interferogram(&bin, ig)?;
    inventory.record(&bin)?;
    let phase = dir.join(format!("{stem}.phase.pgm"));
    io::export_phase_pgm(&phase, &ig.data)?;
    inventory.record(&phase)?;
    Ok(())
}

/// The single scatterer the solve stage inverts for. Empty scenes fail the
/// imaging stage earlier (no peak); multi-target scenes solve for the first
/// target, which the manifest records via the configuration echo.
fn solve_target(scene: &Scene) -> anyhow::Result<Vec3> {
    scene
        .scatterers
        .first()
        .map(|s| s.position())
        .ok_or_else(|| anyhow::anyhow!("scene has no targets"))
}

struct CommonInputs {
    scene: Scene,
    traj1: Trajectory,
    traj2: Trajectory,
    consts: PhysicalConstants,
    grid: ImageGrid,
    config_hash: String,
}

fn common_inputs(config: &RunConfig, config_hash: &str) -> anyhow::Result<CommonInputs> {
    Ok(CommonInputs {
        scene: config.scene(),
        traj1: config.trajectory1()?,
        traj2: config.trajectory2()?,
        consts: config.constants(),
        grid: config.image_grid()?,
        config_hash: config_hash.to_string(),
    })
}

fn run_wideband(
    config: &RunConfig,
    inputs: &CommonInputs,
    halve: bool,
    dir: &Path,
    stages: &mut Stages,
    inventory: &mut FileInventory,
) -> anyhow::Result<(ModalityReport, ModalityOutcome)> {
    let cfg = config.wideband_config(halve)?;
    let CommonInputs { scene, traj1, traj2, consts, grid, config_hash } = inputs;
    let omega0 = cfg.omega0;

    let ds1: WidebandDataSet = stages.time("wideband.simulate.antenna1", || {
        Ok(forward::simulate_wideband(scene, traj1, 1, &cfg, consts)?)
    })?;
    let ds2 = stages.time("wideband.simulate.antenna2", || {
        Ok(forward::simulate_wideband(scene, traj2, 2, &cfg, consts)?)
    })?;
    let p = dir.join("wb_data_1.dsar");
    io::write_wideband_dataset(&p, &ds1)?;
    inventory.record(&p)?;
    let p = dir.join("wb_data_2.dsar");
    io::write_wideband_dataset(&p, &ds2)?;
    inventory.record(&p)?;

    let mut img1 = stages.time("wideband.image.antenna1", || {
        Ok(backproject_wideband(&ds1, traj1, grid, consts)?)
    })?;
    let mut img2 = stages.time("wideband.image.antenna2", || {
        Ok(backproject_wideband(&ds2, traj2, grid, consts)?)
    })?;
    img1.meta.config_hash = Some(config_hash.clone());
    img2.meta.config_hash = Some(config_hash.clone());
    write_image_artifacts(dir, "wb_image_1", &img1, inventory)?;
    write_image_artifacts(dir, "wb_image_2", &img2, inventory)?;

    let (reg1, reg2, offset) = coregister(&img1, &img2)?;
    let mut ig = interferogram(&reg1, &reg2)?;
    ig.registration_offset = offset;
    write_interferogram_artifacts(dir, "wb_interferogram", &ig, inventory)?;

    let peak1 = find_peak(&img1)?;
    let peak2 = find_peak(&img2)?;
    let ig_phase = ig.data[(peak1.iy, peak1.ix)].arg();

    let target = solve_target(scene)?;
    let meas = measure_wb_from_truth(target, traj1, traj2, omega0, consts)?;
    let image_meas = measure_wb_from_images(&img1, &img2, traj1, traj2, omega0, consts)?;

    let fixed_y = config.search_grid.fixed_y_m.unwrap_or(peak1.position.y);
    let sgrid: SearchGrid = config.search_grid(fixed_y)?;
    let maps = stages.time("wideband.residuals", || {
        Ok(residuals_wb(&meas, traj1, traj2, &sgrid, omega0, consts)?)
    })?;
    for map in &maps {
        let stem = format!("wb_residual_{}", map.label);
        let p = dir.join(format!("{stem}.dsar"));
        io::write_residual_map(&p, map)?;
        inventory.record(&p)?;
        let p = dir.join(format!("{stem}.pgm"));
        io::export_residual_pgm(&p, &map.values)?;
        inventory.record(&p)?;
    }
    let solution = stages.time("wideband.solve", || {
        Ok(solve_wb(&meas, traj1, traj2, &sgrid, omega0, consts)?)
    })?;

    let report = ModalityReport {
        image1_peak_m: [peak1.position.x, peak1.position.y],
        image2_peak_m: [peak2.position.x, peak2.position.y],
        registration_offset_px: offset,
        interferogram_peak_phase_rad: ig_phase,
        reference_times_s: [meas.s01, meas.s02],
        fixed_y_m: fixed_y,
        wb_measurement: Some(meas.clone()),
        wb_image_measurement: Some(image_meas),
        unb_measurement: None,
        unb_image_measurement: None,
        solution: solution.clone(),
    };
    let outcome = ModalityOutcome {
        peak1_m: [peak1.position.x, peak1.position.y],
        peak2_m: [peak2.position.x, peak2.position.y],
        interferogram_peak_phase_rad: ig_phase,
        solution_position: solution.position,
        degenerate: solution.degenerate,
    };
    Ok((report, outcome))
}

fn run_unb(
    config: &RunConfig,
    inputs: &CommonInputs,
    halve: bool,
    dir: &Path,
    stages: &mut Stages,
    inventory: &mut FileInventory,
) -> anyhow::Result<(ModalityReport, ModalityOutcome)> {
    let cfg = config.unb_config(halve)?;
    let CommonInputs { scene, traj1, traj2, consts, grid, config_hash } = inputs;
    let omega0 = cfg.omega0;

    let ds1: UnbDataSet = stages.time("unb.simulate.antenna1", || {
        Ok(forward::simulate_unb(scene, traj1, 1, &cfg, consts)?)
    })?;
    let ds2 = stages.time("unb.simulate.antenna2", || {
        Ok(forward::simulate_unb(scene, traj2, 2, &cfg, consts)?)
    })?;
    let p = dir.join("unb_data_1.dsar");
    io::write_unb_dataset(&p, &ds1)?;
    inventory.record(&p)?;
    let p = dir.join("unb_data_2.dsar");
    io::write_unb_dataset(&p, &ds2)?;
    inventory.record(&p)?;

    let mut img1 = stages.time("unb.image.antenna1", || {
        Ok(backproject_unb(&ds1, traj1, grid, consts)?)
    })?;
    let mut img2 = stages.time("unb.image.antenna2", || {
        Ok(backproject_unb(&ds2, traj2, grid, consts)?)
    })?;
    img1.meta.config_hash = Some(config_hash.clone());
    img2.meta.config_hash = Some(config_hash.clone());
    write_image_artifacts(dir, "unb_image_1", &img1, inventory)?;
    write_image_artifacts(dir, "unb_image_2", &img2, inventory)?;

    // Equalize the zero-Doppler-rate phase factors before the interferogram.
    let peak1 = find_peak(&img1)?;
    let peak2 = find_peak(&img2)?;
    let t_d1 = geometry::zero_doppler_rate_time(traj1, peak1.position)?;
    let t_d2 = geometry::zero_doppler_rate_time(traj2, peak2.position)?;
    let img2_eq = equalize_doppler_rate_factor(&img2, t_d2, t_d1)?;

    let (reg1, reg2, offset) = coregister(&img1, &img2_eq)?;
    let mut ig = interferogram(&reg1, &reg2)?;
    ig.registration_offset = offset;
    write_interferogram_artifacts(dir, "unb_interferogram", &ig, inventory)?;
    let ig_phase = ig.data[(peak1.iy, peak1.ix)].arg();

    let target = solve_target(scene)?;
    let meas = measure_unb_from_truth(target, traj1, traj2, omega0, consts)?;
    let image_meas = measure_unb_from_images(&img1, &img2, traj1, traj2, omega0, consts)?;

    let fixed_y = config.search_grid.fixed_y_m.unwrap_or(peak1.position.y);
    let sgrid = config.search_grid(fixed_y)?;
    let maps = stages.time("unb.residuals", || {
        Ok(residuals_unb(&meas, traj1, traj2, &sgrid, omega0, consts)?)
    })?;
    for map in &maps {
        let stem = format!("unb_residual_{}", map.label);
        let p = dir.join(format!("{stem}.dsar"));
        io::write_residual_map(&p, map)?;
        inventory.record(&p)?;
        let p = dir.join(format!("{stem}.pgm"));
        io::export_residual_pgm(&p, &map.values)?;
        inventory.record(&p)?;
    }
    let solution = stages.time("unb.solve", || {
        Ok(solve_unb(&meas, traj1, traj2, &sgrid, omega0, consts)?)
    })?;

    let report = ModalityReport {
        image1_peak_m: [peak1.position.x, peak1.position.y],
        image2_peak_m: [peak2.position.x, peak2.position.y],
        registration_offset_px: offset,
        interferogram_peak_phase_rad: ig_phase,
        reference_times_s: [t_d1, t_d2],
        fixed_y_m: fixed_y,
        wb_measurement: None,
        wb_image_measurement: None,
        unb_measurement: Some(meas.clone()),
        unb_image_measurement: Some(image_meas),
        solution: solution.clone(),
    };
    let outcome = ModalityOutcome {
        peak1_m: [peak1.position.x, peak1.position.y],
        peak2_m: [peak2.position.x, peak2.position.y],
        interferogram_peak_phase_rad: ig_phase,
        solution_position: solution.position,
        degenerate: solution.degenerate,
    };
    Ok((report, outcome))
}

/// Execute the configured pipeline into `out_dir` and write the manifest.
///
/// `halve` selects the desk-scale sampling profile (half the configured
/// sample counts in every dimension).
pub fn run(
    config: &RunConfig,
    config_text: &str,
    out_dir: &Path,
    halve: bool,
) -> anyhow::Result<RunOutcome> {
    config.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    let mut manifest = Manifest::new(config, config_text);
    let mut inventory = FileInventory::new(out_dir);
    let mut stages = Stages::new();
    let inputs = common_inputs(config, &manifest.config_hash_sha256)?;

    let mut outcome = RunOutcome { wideband: None, unb: None, manifest_path: PathBuf::new() };
    if matches!(config.run.modality, Modality::Wideband | Modality::Both) {
        let (report, out) =
            run_wideband(config, &inputs, halve, out_dir, &mut stages, &mut inventory)?;
        manifest.wideband = Some(report);
        outcome.wideband = Some(out);
    }
    if matches!(config.run.modality, Modality::Unb | Modality::Both) {
        let (report, out) = run_unb(config, &inputs, halve, out_dir, &mut stages, &mut inventory)?;
        manifest.unb = Some(report);
        outcome.unb = Some(out);
    }

    manifest.timings_s = stages.timings;
    manifest.files = inventory.into_records();
    let manifest_path = out_dir.join("manifest.toml");
    std::fs::write(&manifest_path, manifest.to_toml()?)?;
    outcome.manifest_path = manifest_path;
    Ok(outcome)
}

// --- Individual stages for the subcommands --------------------------------

/// Simulate the configured modality's datasets into `out_dir`.
pub fn stage_simulate(
    config: &RunConfig,
    out_dir: &Path,
    halve: bool,
) -> anyhow::Result<Vec<PathBuf>> {
    config.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
    std::fs::create_dir_all(out_dir)?;
    let scene = config.scene();
    let consts = config.constants();
    let t1 = config.trajectory1()?;
    let t2 = config.trajectory2()?;
    let mut written = Vec::new();
    if matches!(config.run.modality, Modality::Wideband | Modality::Both) {
        let cfg = config.wideband_config(halve)?;
        for (traj, id) in [(&t1, 1u32), (&t2, 2u32)] {
            let ds = forward::simulate_wideband(&scene, traj, id, &cfg, &consts)?;
            let p = out_dir.join(format!("wb_data_{id}.dsar"));
            io::write_wideband_dataset(&p, &ds)?;
            written.push(p);
        }
    }
    if matches!(config.run.modality, Modality::Unb | Modality::Both) {
        let cfg = config.unb_config(halve)?;
        for (traj, id) in [(&t1, 1u32), (&t2, 2u32)] {
            let ds = forward::simulate_unb(&scene, traj, id, &cfg, &consts)?;
            let p = out_dir.join(format!("unb_data_{id}.dsar"));
            io::write_unb_dataset(&p, &ds)?;
            written.push(p);
        }
    }
    Ok(written)
}

/// Backproject one serialized dataset; the trajectory comes from the
/// configuration, selected by the dataset's antenna id. `config_hash` is
/// the provenance hash of the configuration text, matching what a full
/// `run` stamps into its images.
pub fn stage_image(
    config: &RunConfig,
    config_hash: &str,
    dataset_path: &Path,
    out_dir: &Path,
) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let consts = config.constants();
    let grid = config.image_grid()?;
    let container = io::read_container(dataset_path)
        .with_context(|| format!("reading {}", dataset_path.display()))?;
    let (mut img, stem) = match container {
        io::Container::WidebandDataset(ds) => {
            let traj = trajectory_for(config, ds.meta.trajectory_id)?;
            let stem = format!("wb_image_{}", ds.meta.trajectory_id);
            (backproject_wideband(&ds, &traj, &grid, &consts)?, stem)
        }
        io::Container::UnbDataset(ds) => {
            let traj = trajectory_for(config, ds.meta.trajectory_id)?;
            let stem = format!("unb_image_{}", ds.meta.trajectory_id);
            (backproject_unb(&ds, &traj, &grid, &consts)?, stem)
        }
        other => bail!("{} is not a dataset container: {other:?}", dataset_path.display()),
    };
    let mut inventory = FileInventory::new(out_dir);
    img.meta.config_hash = Some(config_hash.to_string());
    write_image_artifacts(out_dir, &stem, &img, &mut inventory)?;
    Ok(out_dir.join(format!("{stem}.dsar")))
}

fn trajectory_for(config: &RunConfig, id: u32) -> anyhow::Result<Trajectory> {
    match id {
        1 => Ok(config.trajectory1()?),
        2 => Ok(config.trajectory2()?),
        other => bail!("dataset names antenna {other}, config defines antennas 1 and 2"),
    }
}

fn read_image(path: &Path) -> anyhow::Result<ComplexImage> {
    match io::read_container(path)? {
        io::Container::Image(img) => Ok(img),
        other => bail!("{} is not an image container: {other:?}", path.display()),
    }
}

/// Co-register two serialized images and write their interferogram.
/// Ultra-narrowband pairs are phase-equalized first.
pub fn stage_interferogram(
    config: &RunConfig,
    image1: &Path,
    image2: &Path,
    out_dir: &Path,
) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let img1 = read_image(image1)?;
    let img2 = read_image(image2)?;
    let unb = img1.meta.modality == dopsar_core::imaging::Modality::Unb;
    let img2 = if unb {
        let t1 = config.trajectory1()?;
        let t2 = config.trajectory2()?;
        let p1 = find_peak(&img1)?;
        let p2 = find_peak(&img2)?;
        let t_d1 = geometry::zero_doppler_rate_time(&t1, p1.position)?;
        let t_d2 = geometry::zero_doppler_rate_time(&t2, p2.position)?;
        equalize_doppler_rate_factor(&img2, t_d2, t_d1)?
    } else {
        img2
    };
    let (reg1, reg2, offset) = coregister(&img1, &img2)?;
    let mut ig = interferogram(&reg1, &reg2)?;
    ig.registration_offset = offset;
    let stem = if unb { "unb_interferogram" } else { "wb_interferogram" };
    let mut inventory = FileInventory::new(out_dir);
    write_interferogram_artifacts(out_dir, stem, &ig, &mut inventory)?;
    Ok(out_dir.join(format!("{stem}.dsar")))
}

/// Height solution from an image pair plus the configured truth scene;
/// writes the residual maps and a solution record.
pub fn stage_solve(
    config: &RunConfig,
    image1: &Path,
    image2: &Path,
    out_dir: &Path,
) -> anyhow::Result<Vec3> {
    std::fs::create_dir_all(out_dir)?;
    let img1 = read_image(image1)?;
    let img2 = read_image(image2)?;
    let consts = config.constants();
    let t1 = config.trajectory1()?;
    let t2 = config.trajectory2()?;
    let target = solve_target(&config.scene())?;
    let peak1 = find_peak(&img1)?;
    let fixed_y = config.search_grid.fixed_y_m.unwrap_or(peak1.position.y);
    let sgrid = config.search_grid(fixed_y)?;
    let mut inventory = FileInventory::new(out_dir);

    let unb = img1.meta.modality == dopsar_core::imaging::Modality::Unb;
    let (solution, prefix) = if unb {
        let cfg = config.unb_config(false)?;
        let meas = measure_unb_from_truth(target, &t1, &t2, cfg.omega0, &consts)?;
        let _ = measure_unb_from_images(&img1, &img2, &t1, &t2, cfg.omega0, &consts)?;
        let maps = residuals_unb(&meas, &t1, &t2, &sgrid, cfg.omega0, &consts)?;
        for map in &maps {
            let p = out_dir.join(format!("unb_residual_{}.dsar", map.label));
            io::write_residual_map(&p, map)?;
            inventory.record(&p)?;
        }
        (solve_unb(&meas, &t1, &t2, &sgrid, cfg.omega0, &consts)?, "unb")
    } else {
        let cfg = config.wideband_config(false)?;
        let meas = measure_wb_from_truth(target, &t1, &t2, cfg.omega0, &consts)?;
        let _ = measure_wb_from_images(&img1, &img2, &t1, &t2, cfg.omega0, &consts)?;
        let maps = residuals_wb(&meas, &t1, &t2, &sgrid, cfg.omega0, &consts)?;
        for map in &maps {
            let p = out_dir.join(format!("wb_residual_{}.dsar", map.label));
            io::write_residual_map(&p, map)?;
            inventory.record(&p)?;
        }
        (solve_wb(&meas, &t1, &t2, &sgrid, cfg.omega0, &consts)?, "wb")
    };

    let record = toml::Value::try_from(&solution)?;
    let path = out_dir.join(format!("{prefix}_solution.toml"));
    std::fs::write(&path, toml::to_string_pretty(&record)?)?;
    Ok(solution.position)
}

/// Convert a container file to CSV or PGM exports next to `out_dir`.
pub fn stage_export(input: &Path, format: &str, out_dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "export".into());
    let container = io::read_container(input)?;
    let mut written = Vec::new();
    match (container, format) {
        (io::Container::Image(img), "csv") => {
            let rows: Vec<f64> = (0..img.grid.ny()).map(|i| img.grid.y_at(i)).collect();
            let cols: Vec<f64> = (0..img.grid.nx()).map(|i| img.grid.x_at(i)).collect();
            let p = out_dir.join(format!("{stem}.csv"));
            io::export_complex_csv(&p, &img.data, ["y_m", "x_m"], &rows, &cols)?;
            written.push(p);
        }
        (io::Container::Image(img), "pgm") => {
            let p = out_dir.join(format!("{stem}.magnitude.pgm"));
            io::export_magnitude_pgm(&p, &img.data)?;
            written.push(p);
            let p = out_dir.join(format!("{stem}.phase.pgm"));
            io::export_phase_pgm(&p, &img.data)?;
            written.push(p);
        }
        (io::Container::Interferogram(ig), "csv") => {
            let rows: Vec<f64> = (0..ig.grid.ny()).map(|i| ig.grid.y_at(i)).collect();
            let cols: Vec<f64> = (0..ig.grid.nx()).map(|i| ig.grid.x_at(i)).collect();
            let p = out_dir.join(format!("{stem}.csv"));
            io::export_complex_csv(&p, &ig.data, ["y_m", "x_m"], &rows, &cols)?;
            written.push(p);
        }
        (io::Container::Interferogram(ig), "pgm") => {
            let p = out_dir.join(format!("{stem}.phase.pgm"));
            io::export_phase_pgm(&p, &ig.data)?;
            written.push(p);
        }
        (io::Container::ResidualMap { height_axis, x_axis, values, .. }, "csv") => {
            let p = out_dir.join(format!("{stem}.csv"));
            io::export_residual_csv(&p, &values, &height_axis, &x_axis)?;
            written.push(p);
        }
        (io::Container::ResidualMap { values, .. }, "pgm") => {
            let p = out_dir.join(format!("{stem}.pgm"));
            io::export_residual_pgm(&p, &values)?;
            written.push(p);
        }
        (io::Container::WidebandDataset(ds), "csv") => {
            let p = out_dir.join(format!("{stem}.csv"));
            io::export_complex_csv(
                &p,
                &ds.data,
                ["omega_prime_rad_per_s", "slow_time_s"],
                &ds.omega_prime,
                &ds.meta.slow_time,
            )?;
            written.push(p);
        }
        (io::Container::UnbDataset(ds), "csv") => {
            let p = out_dir.join(format!("{stem}.csv"));
            io::export_complex_csv(
                &p,
                &ds.data,
                ["mu", "slow_time_s"],
                &ds.mu,
                &ds.meta.slow_time,
            )?;
            written.push(p);
        }
        (_, "pgm") => bail!("pgm export is not defined for raw datasets"),
        (_, other) => bail!("unknown export format \"{other}\" (use csv or pgm)"),
    }
    Ok(written)
}
