//! Backprojection image formation onto a flat reference surface.
//!
//! Both operators are adjoint-style accumulations with unit filters. The
//! matched phase is compensated sample by sample and the carrier phase at
//! the pixel's own reference time is restored afterwards, so the complex
//! image of a scatterer carries the phase the interferometric stage needs:
//!
//! * wideband: `arg I(peak) = 2 (w0/c) R(x, s0)` with `s0` the zero-Doppler
//!   time of the scatterer;
//! * ultra-narrowband: `arg I(peak) = 2 f_d(x, s_d) s_d` with `s_d` the
//!   zero-Doppler-rate time.
//!
//! The restored factor has unit magnitude, so `|I|` is exactly the plain
//! matched-filter magnitude and peaks at the layover position: the flat
//! surface point sharing the scatterer's range history (wideband) or Doppler
//! history (ultra-narrowband).

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{KernelTable, UnbConfig, UnbDataSet, WidebandDataSet, WindowKernel};
use crate::geometry::{self, PhysicalConstants, Trajectory, Vec3};

const COINCIDENCE_EPS: f64 = 1e-9;

/// Raster over the flat reference surface. Pixel centers sit on
/// `x_extent[0] + ix * spacing`, `y_extent[0] + iy * spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageGrid {
    pub x_extent: [f64; 2],
    pub y_extent: [f64; 2],
    pub spacing: f64,
    pub reference_height: f64,
}

impl Default for ImageGrid {
    fn default() -> Self {
        ImageGrid {
            x_extent: [-64.0, 64.0],
            y_extent: [-64.0, 64.0],
            spacing: 1.0,
            reference_height: 0.0,
        }
    }
}

impl ImageGrid {
    pub fn validate(&self) -> Result<()> {
        if self.spacing <= 0.0 || self.spacing.is_nan() {
            return Err(Error::Domain("grid spacing must be positive".into()));
        }
        let extents_ok = self.x_extent[0] < self.x_extent[1] && self.y_extent[0] < self.y_extent[1];
        if !extents_ok {
            return Err(Error::Domain("grid extents must be non-empty".into()));
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        ((self.x_extent[1] - self.x_extent[0]) / self.spacing).round() as usize + 1
    }

    pub fn ny(&self) -> usize {
        ((self.y_extent[1] - self.y_extent[0]) / self.spacing).round() as usize + 1
    }

    pub fn x_at(&self, ix: usize) -> f64 {
        self.x_extent[0] + ix as f64 * self.spacing
    }

    pub fn y_at(&self, iy: usize) -> f64 {
        self.y_extent[0] + iy as f64 * self.spacing
    }

    /// Pixel center in three-space (on the reference surface).
    pub fn position(&self, ix: usize, iy: usize) -> Vec3 {
        Vec3::new(self.x_at(ix), self.y_at(iy), self.reference_height)
    }
}

/// Which acquisition produced an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Modality {
    Wideband,
    Unb,
}

/// Provenance carried with every image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMeta {
    pub modality: Modality,
    pub trajectory_id: u32,
    /// Hash of the configuration that produced the image, when known.
    pub config_hash: Option<String>,
    /// Pixels excluded because backprojection was singular there.
    pub excluded: Vec<[usize; 2]>,
}

/// Complex raster over an [`ImageGrid`]; `data[(iy, ix)]`.
#[derive(Debug, Clone)]
pub struct ComplexImage {
    pub grid: ImageGrid,
    pub data: Array2<Complex64>,
    pub meta: ImageMeta,
}

impl ComplexImage {
    pub fn zeros(grid: ImageGrid, meta: ImageMeta) -> Self {
        let data = Array2::zeros((grid.ny(), grid.nx()));
        ComplexImage { grid, data, meta }
    }
}

/// Location and value of the image magnitude maximum.
#[derive(Debug, Clone, Copy)]
pub struct Peak {
    pub ix: usize,
    pub iy: usize,
    pub value: Complex64,
    pub position: Vec3,
}

/// A peak with sub-pixel refinement of its location and phase.
#[derive(Debug, Clone, Copy)]
pub struct RefinedPeak {
    pub peak: Peak,
    /// Sub-pixel offsets of the magnitude vertex, in pixels.
    pub dx_px: f64,
    pub dy_px: f64,
    /// Image phase interpolated to the refined location, wrapped.
    pub phase: f64,
}

fn parabola_offset(a: f64, b: f64, c: f64) -> f64 {
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        // Not a concave vertex around the middle sample.
        return 0.0;
    }
    (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
}

fn wrap(phi: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let w = phi.rem_euclid(tau);
    if w > std::f64::consts::PI {
        w - tau
    } else {
        w
    }
}

/// Peak with its phase read at the sub-pixel magnitude vertex.
///
/// The integer-pixel peak phase carries a bias proportional to the offset
/// between the true response maximum and the pixel lattice (steep for the
/// ultra-narrowband operator, whose phase reference sits at an aperture
/// endpoint). Fitting a parabola through the magnitude neighbors and
/// following the local phase slope to the vertex removes the bias to first
/// order; the interferometric stage reads phases through this.
pub fn refined_peak(img: &ComplexImage) -> Result<RefinedPeak> {
    let peak = find_peak(img)?;
    let (ny, nx) = img.data.dim();
    let (iy, ix) = (peak.iy, peak.ix);
    let mag = |iy: usize, ix: usize| img.data[(iy, ix)].norm();
    let arg = |iy: usize, ix: usize| img.data[(iy, ix)].arg();

    let mut dx = 0.0;
    let mut slope_x = 0.0;
    if ix > 0 && ix + 1 < nx {
        dx = parabola_offset(mag(iy, ix - 1), mag(iy, ix), mag(iy, ix + 1));
        slope_x = 0.5 * wrap(arg(iy, ix + 1) - arg(iy, ix - 1));
    }
    let mut dy = 0.0;
    let mut slope_y = 0.0;
    if iy > 0 && iy + 1 < ny {
        dy = parabola_offset(mag(iy - 1, ix), mag(iy, ix), mag(iy + 1, ix));
        slope_y = 0.5 * wrap(arg(iy + 1, ix) - arg(iy - 1, ix));
    }
    let phase = wrap(peak.value.arg() + slope_x * dx + slope_y * dy);
    Ok(RefinedPeak { peak, dx_px: dx, dy_px: dy, phase })
}

/// Argmax of `|I|`; ties resolve to the smallest row-major index.
pub fn find_peak(img: &ComplexImage) -> Result<Peak> {
    let mut best: Option<(usize, usize, f64)> = None;
    for ((iy, ix), v) in img.data.indexed_iter() {
        let m = v.norm_sqr();
        match best {
            Some((_, _, bm)) if m <= bm => {}
            _ if m > 0.0 => best = Some((iy, ix, m)),
            _ => {}
        }
    }
    let (iy, ix, _) = best.ok_or_else(|| Error::NotFound("image has no nonzero peak".into()))?;
    Ok(Peak {
        ix,
        iy,
        value: img.data[(iy, ix)],
        position: img.grid.position(ix, iy),
    })
}

/// Backproject wideband data, compensating the full sampled phase
/// `2 (w0 + w') R(z, s) / c` and restoring the carrier phase at the pixel's
/// zero-Doppler time.
pub fn backproject_wideband(
    ds: &WidebandDataSet,
    traj: &Trajectory,
    grid: &ImageGrid,
    consts: &PhysicalConstants,
) -> Result<ComplexImage> {
    grid.validate()?;
    traj.validate()?;
    let n_freq = ds.omega_prime.len();
    let n_slow = ds.meta.slow_time.len();
    if ds.data.dim() != (n_freq, n_slow) {
        return Err(Error::GridMismatch(format!(
            "dataset dims {:?} do not match axes ({}, {})",
            ds.data.dim(),
            n_freq,
            n_slow
        )));
    }

    // Contiguous per-slow-time rows for the inner frequency loop.
    let transposed = ds.data.t().as_standard_layout().into_owned();

    let omega0 = ds.meta.omega0;
    let omega_lo = omega0 + ds.omega_prime[0];
    let omega_step = if n_freq > 1 {
        ds.omega_prime[1] - ds.omega_prime[0]
    } else {
        0.0
    };
    let two_over_c = 2.0 / consts.c;
    let norm = 1.0 / (n_freq as f64 * n_slow as f64);

    let nx = grid.nx();
    let ny = grid.ny();
    let slow_time = &ds.meta.slow_time;

    let results: Vec<(Complex64, bool)> = (0..nx * ny)
        .into_par_iter()
        .map(|p| {
            let (iy, ix) = (p / nx, p % nx);
            let z = grid.position(ix, iy);
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &s) in slow_time.iter().enumerate() {
                let r = match geometry::range(traj, s, z) {
                    Ok(r) => r,
                    Err(_) => return (Complex64::new(0.0, 0.0), true),
                };
                if r < COINCIDENCE_EPS {
                    return (Complex64::new(0.0, 0.0), true);
                }
                let row = transposed.row(k);
                let mut w = Complex64::from_polar(1.0, -omega_lo * two_over_c * r);
                let rot = Complex64::from_polar(1.0, -omega_step * two_over_c * r);
                let mut inner = Complex64::new(0.0, 0.0);
                for &d in row.iter() {
                    inner += d * w;
                    w *= rot;
                }
                acc += inner;
            }
            let s_ref = geometry::zero_doppler_time_clamped(traj, z);
            let r_ref = match geometry::range(traj, s_ref, z) {
                Ok(r) => r,
                Err(_) => return (Complex64::new(0.0, 0.0), true),
            };
            let restore = Complex64::from_polar(1.0, omega0 * two_over_c * r_ref);
            (acc * restore * norm, false)
        })
        .collect();

    let mut data = Array2::zeros((ny, nx));
    let mut excluded = Vec::new();
    for (p, (v, excl)) in results.into_iter().enumerate() {
        let (iy, ix) = (p / nx, p % nx);
        data[(iy, ix)] = v;
        if excl {
            excluded.push([iy, ix]);
        }
    }

    Ok(ComplexImage {
        grid: *grid,
        data,
        meta: ImageMeta {
            modality: Modality::Wideband,
            trajectory_id: ds.meta.trajectory_id,
            config_hash: None,
            excluded,
        },
    })
}

/// Backproject ultra-narrowband data along each pixel's Doppler history,
/// restoring the Doppler phase at the pixel's zero-Doppler-rate time.
pub fn backproject_unb(
    ds: &UnbDataSet,
    traj: &Trajectory,
    grid: &ImageGrid,
    consts: &PhysicalConstants,
) -> Result<ComplexImage> {
    grid.validate()?;
    traj.validate()?;
    let n_mu = ds.mu.len();
    let n_slow = ds.meta.slow_time.len();
    if ds.data.dim() != (n_mu, n_slow) {
        return Err(Error::GridMismatch(format!(
            "dataset dims {:?} do not match axes ({}, {})",
            ds.data.dim(),
            n_mu,
            n_slow
        )));
    }

    let transposed = ds.data.t().as_standard_layout().into_owned();
    let omega0 = ds.meta.omega0;

    // Tabulate the window spectrum over every offset the pixel loop can
    // request: the mu band shifted by up to the largest two-way Doppler,
    // bounded by |L . v| <= |v|.
    let kernel = WindowKernel::new(&UnbConfig {
        omega0,
        t_phi: ds.t_phi,
        n_fast: ds.n_fast,
        n_slow,
        mu_half_width: None,
        n_mu,
        window: ds.window,
    });
    let [s1, s2] = traj.s_interval;
    let vmax = traj
        .velocity_at(s1)
        .map(|v| v.norm())
        .unwrap_or(0.0)
        .max(traj.velocity_at(s2).map(|v| v.norm()).unwrap_or(0.0));
    let f_bound = 2.0 * (omega0 / consts.c) * vmax + 1.0;
    let band_lo = omega0 * (1.0 - ds.mu[n_mu - 1]);
    let band_hi = omega0 * (1.0 - ds.mu[0]);
    let table = KernelTable::build(
        &kernel,
        band_lo - f_bound - 1.0,
        band_hi + f_bound + 1.0,
        1 << 17,
    );

    let mu_delta0 = omega0 * (1.0 - ds.mu[0]);
    let mu_step = if n_mu > 1 {
        omega0 * (ds.mu[0] - ds.mu[1])
    } else {
        0.0
    };
    let norm = 1.0 / (n_mu as f64 * n_slow as f64 * kernel.mass());

    let nx = grid.nx();
    let ny = grid.ny();
    let slow_time = &ds.meta.slow_time;

    let results: Vec<(Complex64, bool)> = (0..nx * ny)
        .into_par_iter()
        .map(|p| {
            let (iy, ix) = (p / nx, p % nx);
            let z = grid.position(ix, iy);
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &s) in slow_time.iter().enumerate() {
                let r = match geometry::range(traj, s, z) {
                    Ok(r) => r,
                    Err(_) => return (Complex64::new(0.0, 0.0), true),
                };
                if r < COINCIDENCE_EPS {
                    return (Complex64::new(0.0, 0.0), true);
                }
                let f_z = match geometry::doppler(traj, s, z, omega0, consts) {
                    Ok(f) => f,
                    Err(_) => return (Complex64::new(0.0, 0.0), true),
                };
                let row = transposed.row(k);
                let mut inner = Complex64::new(0.0, 0.0);
                let mut delta = mu_delta0 - 2.0 * f_z;
                for &d in row.iter() {
                    inner += d * table.eval(delta).conj();
                    delta += mu_step;
                }
                acc += inner * Complex64::from_polar(1.0, -2.0 * f_z * s);
            }
            let s_ref = match geometry::zero_doppler_rate_time(traj, z) {
                Ok(s) => s,
                Err(_) => return (Complex64::new(0.0, 0.0), true),
            };
            let f_ref = match geometry::doppler(traj, s_ref, z, omega0, consts) {
                Ok(f) => f,
                Err(_) => return (Complex64::new(0.0, 0.0), true),
            };
            let restore = Complex64::from_polar(1.0, 2.0 * f_ref * s_ref);
            (acc * restore * norm, false)
        })
        .collect();

    let mut data = Array2::zeros((ny, nx));
    let mut excluded = Vec::new();
    for (p, (v, excl)) in results.into_iter().enumerate() {
        let (iy, ix) = (p / nx, p % nx);
        data[(iy, ix)] = v;
        if excl {
            excluded.push([iy, ix]);
        }
    }

    Ok(ComplexImage {
        grid: *grid,
        data,
        meta: ImageMeta {
            modality: Modality::Unb,
            trajectory_id: ds.meta.trajectory_id,
            config_hash: None,
            excluded,
        },
    })
}

/// Rescale the phase of every pixel by `t_d_ref / t_d_own`, leaving the
/// magnitude unchanged, so that two ultra-narrowband images carry a common
/// zero-Doppler-rate factor before interferogram formation.
///
/// Wrapped phases rescale exactly (mod 2 pi) only for integer ratios; the
/// shipped two-antenna configuration has ratio 4.
pub fn equalize_doppler_rate_factor(
    img: &ComplexImage,
    t_d_own: f64,
    t_d_ref: f64,
) -> Result<ComplexImage> {
    if t_d_own == 0.0 {
        return Err(Error::Domain(
            "phase equalization undefined for a zero reference time".into(),
        ));
    }
    let ratio = t_d_ref / t_d_own;
    let mut out = img.clone();
    out.data.mapv_inplace(|v| Complex64::from_polar(v.norm(), v.arg() * ratio));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{simulate_unb, simulate_wideband, WidebandConfig};
    use crate::geometry::Scene;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn meta(modality: Modality) -> ImageMeta {
        ImageMeta { modality, trajectory_id: 1, config_hash: None, excluded: Vec::new() }
    }

    #[test]
    fn grid_dimensions_and_positions() {
        let g = ImageGrid::default();
        assert_eq!(g.nx(), 129);
        assert_eq!(g.ny(), 129);
        assert_eq!(g.position(0, 0), Vec3::new(-64.0, -64.0, 0.0));
        assert_eq!(g.position(64, 64), Vec3::new(0.0, 0.0, 0.0));
        assert_eq!(g.position(128, 128), Vec3::new(64.0, 64.0, 0.0));
    }

    #[test]
    fn find_peak_delta_and_tie_break() {
        let g = ImageGrid {
            x_extent: [0.0, 3.0],
            y_extent: [0.0, 2.0],
            spacing: 1.0,
            reference_height: 0.0,
        };
        let mut img = ComplexImage::zeros(g, meta(Modality::Wideband));
        img.data[(1, 2)] = Complex64::new(0.0, 3.0);
        let p = find_peak(&img).unwrap();
        assert_eq!((p.ix, p.iy), (2, 1));
        assert_eq!(p.position, Vec3::new(2.0, 1.0, 0.0));

        // Two equal peaks: the smaller row-major index wins.
        img.data[(0, 1)] = Complex64::new(3.0, 0.0);
        let p = find_peak(&img).unwrap();
        assert_eq!((p.ix, p.iy), (1, 0));

        // All-zero image has no peak.
        let img = ComplexImage::zeros(g, meta(Modality::Wideband));
        assert!(matches!(find_peak(&img), Err(Error::NotFound(_))));
    }

    #[test]
    fn equalize_phase_scaling() {
        let g = ImageGrid {
            x_extent: [0.0, 1.0],
            y_extent: [0.0, 1.0],
            spacing: 1.0,
            reference_height: 0.0,
        };
        let mut img = ComplexImage::zeros(g, meta(Modality::Unb));
        img.data[(0, 0)] = Complex64::from_polar(2.0, std::f64::consts::FRAC_PI_4);

        // Identity when the times agree.
        let same = equalize_doppler_rate_factor(&img, 5.0, 5.0).unwrap();
        assert!((same.data[(0, 0)] - img.data[(0, 0)]).norm() < 1e-15);

        // Ratio 2 doubles the phase, magnitude unchanged.
        let scaled = equalize_doppler_rate_factor(&img, 2.5, 5.0).unwrap();
        let v = scaled.data[(0, 0)];
        assert!((v.norm() - 2.0).abs() < 1e-12);
        assert!((v.arg() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);

        assert!(matches!(
            equalize_doppler_rate_factor(&img, 0.0, 5.0),
            Err(Error::Domain(_))
        ));
    }

    fn wb_traj(height: f64) -> Trajectory {
        Trajectory::linear(
            Vec3::new(-7100.0, -500.0, height),
            Vec3::new(0.0, 100.0, 0.0),
            [-5.0, 5.0],
        )
        .unwrap()
    }

    /// Closed-form flat-surface layover abscissa for a side-looking linear
    /// pass: the ground point (at the target's y) with the same
    /// closest-approach range.
    fn layover_x(target: Vec3, antenna_x: f64, antenna_h: f64, reference_h: f64) -> f64 {
        let dx = target.x - antenna_x;
        let dh = target.z - antenna_h;
        let r0_sq = dx * dx + dh * dh;
        let drop = antenna_h - reference_h;
        antenna_x + (r0_sq - drop * drop).sqrt()
    }

    #[test]
    fn wideband_backprojection_layover_and_phase() {
        let traj = wb_traj(3000.0);
        let cfg = WidebandConfig { n_freq: 128, n_slow: 256, ..WidebandConfig::default() };
        let target = Vec3::new(-20.0, -31.0, 50.0);
        let scene = Scene::single(target.x, target.y, target.z);
        let ds = simulate_wideband(&scene, &traj, 1, &cfg, &consts()).unwrap();

        let grid = ImageGrid {
            x_extent: [-60.0, -22.0],
            y_extent: [-46.0, -16.0],
            spacing: 1.0,
            reference_height: 0.0,
        };
        let img = backproject_wideband(&ds, &traj, &grid, &consts()).unwrap();
        let peak = find_peak(&img).unwrap();

        let expected_x = layover_x(target, -7100.0, 3000.0, 0.0);
        assert!((expected_x - -41.04).abs() < 0.01);
        assert!(
            (peak.position.x - expected_x).abs() <= 1.0,
            "peak x {} vs oracle {}",
            peak.position.x,
            expected_x
        );
        assert!((peak.position.y - -31.0).abs() <= 1.0);

        // Phase contract at the peak.
        let s0 = geometry::zero_doppler_time(&traj, target).unwrap();
        let r = geometry::range(&traj, s0, target).unwrap();
        let expected_phase = 2.0 * (cfg.omega0 / consts().c) * r;
        let tau = 2.0 * std::f64::consts::PI;
        let diff = (peak.value.arg() - expected_phase).rem_euclid(tau);
        assert!(diff.min(tau - diff) <= 0.1, "phase residual {}", diff.min(tau - diff));
    }

    #[test]
    fn wideband_backprojection_zero_data_and_linearity() {
        let traj = wb_traj(3000.0);
        let cfg = WidebandConfig { n_freq: 16, n_slow: 16, ..WidebandConfig::default() };
        let scene = Scene::single(-20.0, -31.0, 50.0);
        let mut ds = simulate_wideband(&scene, &traj, 1, &cfg, &consts()).unwrap();
        let grid = ImageGrid {
            x_extent: [-44.0, -38.0],
            y_extent: [-34.0, -28.0],
            spacing: 1.0,
            reference_height: 0.0,
        };
        let img1 = backproject_wideband(&ds, &traj, &grid, &consts()).unwrap();

        let alpha = Complex64::new(0.3, -1.7);
        ds.data.mapv_inplace(|v| v * alpha);
        let img2 = backproject_wideband(&ds, &traj, &grid, &consts()).unwrap();
        let scale: f64 = img2.data.iter().map(|c| c.norm()).sum();
        let err: f64 = img1
            .data
            .iter()
            .zip(img2.data.iter())
            .map(|(a, b)| (b - a * alpha).norm())
            .sum();
        assert!(err <= 1e-12 * scale, "linearity error {err}");

        ds.data.fill(Complex64::new(0.0, 0.0));
        let img0 = backproject_wideband(&ds, &traj, &grid, &consts()).unwrap();
        assert!(img0.data.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn wideband_scatterer_at_reference_height_peaks_at_itself() {
        let traj = wb_traj(3000.0);
        let cfg = WidebandConfig { n_freq: 128, n_slow: 256, ..WidebandConfig::default() };
        let scene = Scene::single(-20.0, -31.0, 0.0);
        let ds = simulate_wideband(&scene, &traj, 1, &cfg, &consts()).unwrap();
        let grid = ImageGrid {
            x_extent: [-36.0, -4.0],
            y_extent: [-46.0, -16.0],
            spacing: 1.0,
            reference_height: 0.0,
        };
        let img = backproject_wideband(&ds, &traj, &grid, &consts()).unwrap();
        let peak = find_peak(&img).unwrap();
        assert!((peak.position.x - -20.0).abs() <= 1.0);
        assert!((peak.position.y - -31.0).abs() <= 1.0);
    }

    fn unb_traj(height: f64, speed: f64) -> Trajectory {
        let half = 500.0 / speed;
        Trajectory::linear(
            Vec3::new(-7100.0, -500.0, height),
            Vec3::new(0.0, speed, 0.0),
            [-half, half],
        )
        .unwrap()
    }

    #[test]
    fn unb_backprojection_layover_and_phase() {
        let traj = unb_traj(2000.0, 100.0);
        let cfg = UnbConfig { n_fast: 256, n_slow: 256, n_mu: 128, ..UnbConfig::default() };
        let target = Vec3::new(-20.0, -31.0, 50.0);
        let scene = Scene::single(target.x, target.y, target.z);
        let ds = simulate_unb(&scene, &traj, 1, &cfg, &consts()).unwrap();

        let grid = ImageGrid {
            x_extent: [-54.0, -14.0],
            y_extent: [-51.0, -11.0],
            spacing: 1.0,
            reference_height: 0.0,
        };
        let img = backproject_unb(&ds, &traj, &grid, &consts()).unwrap();
        let peak = find_peak(&img).unwrap();

        let expected_x = layover_x(target, -7100.0, 2000.0, 0.0);
        assert!((expected_x - -33.96).abs() < 0.01);
        assert!(
            (peak.position.x - expected_x).abs() <= 1.0,
            "peak x {} vs oracle {}",
            peak.position.x,
            expected_x
        );
        assert!((peak.position.y - -31.0).abs() <= 1.0);

        // Phase contract at the peak.
        let s_d = geometry::zero_doppler_rate_time(&traj, target).unwrap();
        let f_d = geometry::doppler(&traj, s_d, target, cfg.omega0, &consts()).unwrap();
        let expected_phase = 2.0 * f_d * s_d;
        let tau = 2.0 * std::f64::consts::PI;
        let diff = (peak.value.arg() - expected_phase).rem_euclid(tau);
        assert!(diff.min(tau - diff) <= 0.1, "phase residual {}", diff.min(tau - diff));
    }

    #[test]
    fn unb_refined_peak_phase_second_antenna() {
        // The fast antenna's layover point lands 0.13 m off the pixel
        // lattice; the raw peak-pixel phase inherits a bias of roughly
        // 0.9 rad per meter of that offset. The sub-pixel-refined reading
        // satisfies the 0.1 rad contract.
        let traj = unb_traj(4000.0, 400.0);
        let cfg = UnbConfig { n_fast: 256, n_slow: 256, n_mu: 128, ..UnbConfig::default() };
        let target = Vec3::new(-20.0, -31.0, 50.0);
        let scene = Scene::single(target.x, target.y, target.z);
        let ds = simulate_unb(&scene, &traj, 2, &cfg, &consts()).unwrap();
        let grid = ImageGrid {
            x_extent: [-68.0, -28.0],
            y_extent: [-51.0, -11.0],
            spacing: 1.0,
            reference_height: 0.0,
        };
        let img = backproject_unb(&ds, &traj, &grid, &consts()).unwrap();
        let refined = refined_peak(&img).unwrap();
        assert!((refined.peak.position.x - -48.13).abs() <= 1.0);

        let s_d = geometry::zero_doppler_rate_time(&traj, target).unwrap();
        let f_d = geometry::doppler(&traj, s_d, target, cfg.omega0, &consts()).unwrap();
        let expected_phase = 2.0 * f_d * s_d;
        let tau = 2.0 * std::f64::consts::PI;
        let diff = (refined.phase - expected_phase).rem_euclid(tau);
        assert!(
            diff.min(tau - diff) <= 0.1,
            "refined phase residual {}",
            diff.min(tau - diff)
        );
    }

    #[test]
    fn refined_peak_interpolates_a_shifted_vertex() {
        // A quadratic magnitude profile with a linear phase ramp: the
        // refinement recovers the off-lattice vertex and the phase there.
        let g = ImageGrid {
            x_extent: [0.0, 6.0],
            y_extent: [0.0, 4.0],
            spacing: 1.0,
            reference_height: 0.0,
        };
        let mut img = ComplexImage::zeros(g, meta(Modality::Unb));
        let vertex = 3.3;
        let slope = 0.4;
        for ix in 0..7 {
            let d = ix as f64 - vertex;
            let mag = (10.0 - d * d).max(0.0);
            img.data[(2, ix)] = Complex64::from_polar(mag, slope * ix as f64);
        }
        let r = refined_peak(&img).unwrap();
        assert_eq!((r.peak.ix, r.peak.iy), (3, 2));
        assert!((r.dx_px - 0.3).abs() < 1e-9, "dx {}", r.dx_px);
        assert!((r.phase - slope * vertex).abs() < 1e-9, "phase {}", r.phase);
    }

    #[test]
    fn equalize_reference_geometry_ratio() {
        // The two reference passes cover 1 km at 100 m/s and 400 m/s, so
        // their zero-Doppler-rate times are 5 s and 1.25 s: ratio 4. For an
        // integer ratio the rescaling of wrapped phases is exact modulo
        // 2 pi: wrap(4 wrap(phi)) == wrap(4 phi).
        let tau = 2.0 * std::f64::consts::PI;
        let wrap = |p: f64| {
            let w = p.rem_euclid(tau);
            if w > std::f64::consts::PI {
                w - tau
            } else {
                w
            }
        };
        let g = ImageGrid {
            x_extent: [0.0, 1.0],
            y_extent: [0.0, 1.0],
            spacing: 1.0,
            reference_height: 0.0,
        };
        for &true_phase in &[10950.55, -317.2, 123.456] {
            let mut img = ComplexImage::zeros(g, meta(Modality::Unb));
            img.data.fill(Complex64::from_polar(1.0, wrap(true_phase)));
            let eq = equalize_doppler_rate_factor(&img, 1.25, 5.0).unwrap();
            let got = eq.data[(0, 0)].arg();
            assert!(
                (wrap(got - 4.0 * true_phase)).abs() < 1e-9,
                "phase {true_phase}: got {got}"
            );
        }
    }

    #[test]
    fn singular_grid_points_are_excluded() {
        // An antenna pass that crosses a grid pixel exactly at a sampled
        // slow time: that pixel is zeroed and flagged.
        let traj = Trajectory::linear(
            Vec3::new(0.0, -0.25, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            [0.0, 1.0],
        )
        .unwrap();
        let cfg = WidebandConfig { n_freq: 4, n_slow: 2, ..WidebandConfig::default() };
        let scene = Scene::single(50.0, 50.0, 0.0);
        let ds = simulate_wideband(&scene, &traj, 1, &cfg, &consts()).unwrap();
        // The first slow-time midpoint s = 0.25 puts the antenna at (0, 0, 0).
        let grid = ImageGrid {
            x_extent: [0.0, 2.0],
            y_extent: [0.0, 2.0],
            spacing: 1.0,
            reference_height: 0.0,
        };
        let img = backproject_wideband(&ds, &traj, &grid, &consts()).unwrap();
        assert!(img.meta.excluded.contains(&[0, 0]), "excluded: {:?}", img.meta.excluded);
        assert_eq!(img.data[(0, 0)], Complex64::new(0.0, 0.0));
        // Other pixels are untouched.
        assert!(img.data[(1, 1)].norm() > 0.0);
    }

    #[test]
    fn unb_backprojection_zero_data() {
        let traj = unb_traj(2000.0, 100.0);
        let cfg = UnbConfig { n_fast: 32, n_slow: 16, n_mu: 8, ..UnbConfig::default() };
        let scene = Scene::single(-20.0, -31.0, 50.0);
        let mut ds = simulate_unb(&scene, &traj, 1, &cfg, &consts()).unwrap();
        ds.data.fill(Complex64::new(0.0, 0.0));
        let grid = ImageGrid {
            x_extent: [-40.0, -30.0],
            y_extent: [-36.0, -26.0],
            spacing: 1.0,
            reference_height: 0.0,
        };
        let img = backproject_unb(&ds, &traj, &grid, &consts()).unwrap();
        assert!(img.data.iter().all(|c| c.norm() == 0.0));
    }
}
