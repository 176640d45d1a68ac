//! Height recovery by grid search over the measurement surfaces.
//!
//! Each modality contributes three scalar equations whose left-hand sides
//! depend on the candidate position `z` and whose right-hand sides are
//! measured values defined at the true scatterer state:
//!
//! * wideband: range sphere, Doppler cone, interferometric phase cone
//!   `L1(z) . b = (c / 2 omega0) Phi`;
//! * ultra-narrowband: Doppler cone, Doppler-rate surface, interferometric
//!   Doppler-rate surface
//!   `L1(z) . v - (b1_perp(z) . gamma2') / R1(z) = (c / (2 t_d1 omega0)) Phi`.
//!
//! The solver scans a vertical slice (or a full volume) and returns the
//! argmin of the combined residual: the per-equation maps normalized by
//! their grid medians, so equations with incommensurate units contribute
//! comparably. Maps whose median vanishes (a surface containing the whole
//! slice, e.g. the wideband Doppler cone at the fixed y) are excluded from
//! the combination.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, PhysicalConstants, Trajectory, Vec3};
use crate::imaging::{ComplexImage, Modality};
use crate::interferometry::{self, resolve_ambiguity, PhaseMeasurement};

/// Search domain: a vertical slice at `fixed_y`, optionally extended to a
/// full volume when `y_search` is set.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SearchGrid {
    pub x_interval: [f64; 2],
    pub x_step: f64,
    pub height_interval: [f64; 2],
    pub height_step: f64,
    pub fixed_y: f64,
    /// Optional (interval, step) to search y as well.
    pub y_search: Option<([f64; 2], f64)>,
}

impl SearchGrid {
    pub fn slice(x_interval: [f64; 2], fixed_y: f64) -> Self {
        SearchGrid {
            x_interval,
            x_step: 1.0,
            height_interval: [1.0, 100.0],
            height_step: 0.5,
            fixed_y,
            y_search: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let steps_ok = self.x_step > 0.0 && self.height_step > 0.0;
        if !steps_ok {
            return Err(Error::Domain("search steps must be positive".into()));
        }
        if self.x_interval[0] > self.x_interval[1]
            || self.height_interval[0] > self.height_interval[1]
        {
            return Err(Error::Domain("search intervals must be non-empty".into()));
        }
        if let Some((yi, ys)) = self.y_search {
            if ys <= 0.0 || ys.is_nan() || yi[0] > yi[1] {
                return Err(Error::Domain("y search interval must be non-empty".into()));
            }
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        ((self.x_interval[1] - self.x_interval[0]) / self.x_step).round() as usize + 1
    }

    pub fn nh(&self) -> usize {
        ((self.height_interval[1] - self.height_interval[0]) / self.height_step).round() as usize
            + 1
    }

    pub fn x_at(&self, ix: usize) -> f64 {
        self.x_interval[0] + ix as f64 * self.x_step
    }

    pub fn h_at(&self, ih: usize) -> f64 {
        self.height_interval[0] + ih as f64 * self.height_step
    }

    fn y_values(&self) -> Vec<f64> {
        match self.y_search {
            None => vec![self.fixed_y],
            Some((yi, ys)) => {
                let n = ((yi[1] - yi[0]) / ys).round() as usize + 1;
                (0..n).map(|i| yi[0] + i as f64 * ys).collect()
            }
        }
    }
}

/// Non-negative residual raster over a [`SearchGrid`] slice, indexed
/// `(height index, x index)`.
#[derive(Debug, Clone)]
pub struct ResidualMap {
    pub values: Array2<f64>,
    pub grid: SearchGrid,
    pub y: f64,
    pub label: &'static str,
}

impl ResidualMap {
    pub fn median(&self) -> f64 {
        let mut v: Vec<f64> = self.values.iter().copied().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v[v.len() / 2]
    }
}

/// Grid point minimizing the combined residual.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub position: Vec3,
    pub combined_residual: f64,
    /// Per-equation residuals at the optimum, in map order.
    pub equation_residuals: Vec<f64>,
    /// True when the interferometric equation carries no information
    /// (vanishing baseline and baseline velocity).
    pub degenerate: bool,
    /// Additional near-minimal positions, reported when the phase was left
    /// wrapped and several candidates tie within the wrap band.
    pub candidates: Vec<Vec3>,
}

/// Wideband measured quantities at the true scatterer state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WbMeasurement {
    /// Range of the first antenna at its zero-Doppler time, meters.
    pub r1: f64,
    /// `L . gamma1'` at the zero-Doppler time, m/s (zero by definition).
    pub doppler1: f64,
    pub phi: PhaseMeasurement,
    pub s01: f64,
    pub s02: f64,
    /// True when no predictor was available to resolve the phase ambiguity:
    /// the phase residual then compares wrapped values and the solver
    /// reports the near-minimal candidates.
    #[serde(default)]
    pub phi_wrapped_only: bool,
}

/// Ultra-narrowband measured quantities at the true scatterer state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnbMeasurement {
    /// Doppler of the first antenna at its zero-Doppler-rate time, rad/s.
    pub f1: f64,
    /// Doppler-rate there, rad/s^2.
    pub f1_rate: f64,
    pub phi: PhaseMeasurement,
    pub t_d1: f64,
    pub t_d2: f64,
    /// See [`WbMeasurement::phi_wrapped_only`].
    #[serde(default)]
    pub phi_wrapped_only: bool,
}

/// Wideband measurements defined at the true scatterer position, exactly as
/// the measurement surfaces define them: the range and Doppler from the
/// first antenna's zero-Doppler geometry, and the interferometric phase via
/// the phase-cone relation `Phi = 2 (omega0/c) L1(x) . b`.
///
/// The cone value, not the exact two-range difference, is what the phase
/// equation inverts; at this geometry the two differ by the finite-baseline
/// remainder `O(|b|^2 / R)` (exposed by [`interferometry::wb_phase_model`]).
pub fn measure_wb_from_truth(
    x: Vec3,
    traj1: &Trajectory,
    traj2: &Trajectory,
    omega0: f64,
    consts: &PhysicalConstants,
) -> Result<WbMeasurement> {
    let s01 = geometry::zero_doppler_time(traj1, x)?;
    let s02 = geometry::zero_doppler_time(traj2, x)?;
    let r1 = geometry::range(traj1, s01, x)?;
    let doppler1 = geometry::look_dot_velocity(traj1, s01, x)?;
    let b = geometry::baseline(traj1, s01, traj2, s02)?;
    let look = geometry::look_direction(traj1, s01, x)?;
    let phi = 2.0 * (omega0 / consts.c) * look.dot(b);
    Ok(WbMeasurement {
        r1,
        doppler1,
        phi: PhaseMeasurement::from_unwrapped(phi, Modality::Wideband),
        s01,
        s02,
        phi_wrapped_only: false,
    })
}

/// Best-effort wideband measurements from an image pair.
///
/// The range comes from the first image's sub-pixel-refined peak phase with
/// its half-wavelength ambiguity resolved against the peak pixel's own
/// range; the interferometric phase is the difference of the two refined
/// peak phases resolved against the phase-cone model of the reference
/// (zero-height) peak point. The scalar resolution recovers the fractional
/// cycle exactly but cannot bridge model gaps beyond half a cycle.
pub fn measure_wb_from_images(
    img1: &ComplexImage,
    img2: &ComplexImage,
    traj1: &Trajectory,
    traj2: &Trajectory,
    omega0: f64,
    consts: &PhysicalConstants,
) -> Result<WbMeasurement> {
    let rp1 = crate::imaging::refined_peak(img1)?;
    let rp2 = crate::imaging::refined_peak(img2)?;
    let z0 = rp1.peak.position;
    let s01 = geometry::zero_doppler_time_clamped(traj1, z0);
    let s02 = geometry::zero_doppler_time_clamped(traj2, z0);

    // Range from the first image's peak phase.
    let r_pred = geometry::range(traj1, s01, z0)?;
    let scale = 2.0 * omega0 / consts.c;
    let pm = resolve_ambiguity(rp1.phase, scale * r_pred, Modality::Wideband);
    let r1 = pm.unwrapped / scale;

    // Interferometric phase from the refined per-image peak phases.
    let wrapped = interferometry::wrap_phase(rp1.phase - rp2.phase);
    let b = geometry::baseline(traj1, s01, traj2, s02)?;
    let look0 = geometry::look_direction(traj1, s01, z0)?;
    let predicted = 2.0 * (omega0 / consts.c) * look0.dot(b);
    let phi = resolve_ambiguity(wrapped, predicted, Modality::Wideband);

    Ok(WbMeasurement { r1, doppler1: 0.0, phi, s01, s02, phi_wrapped_only: false })
}

/// The three wideband residual maps over a slice: range sphere, Doppler
/// cone and interferometric phase cone.
pub fn residuals_wb(
    meas: &WbMeasurement,
    traj1: &Trajectory,
    traj2: &Trajectory,
    grid: &SearchGrid,
    omega0: f64,
    consts: &PhysicalConstants,
) -> Result<[ResidualMap; 3]> {
    residuals_wb_at_y(meas, traj1, traj2, grid, grid.fixed_y, omega0, consts)
}

fn residuals_wb_at_y(
    meas: &WbMeasurement,
    traj1: &Trajectory,
    traj2: &Trajectory,
    grid: &SearchGrid,
    y: f64,
    omega0: f64,
    consts: &PhysicalConstants,
) -> Result<[ResidualMap; 3]> {
    grid.validate()?;
    let g1 = traj1.position(meas.s01)?;
    let v1 = traj1.velocity_at(meas.s01)?;
    let b = geometry::baseline(traj1, meas.s01, traj2, meas.s02)?;
    let phase_scale = consts.c / (2.0 * omega0);
    let phase_rhs = phase_scale * meas.phi.unwrapped;

    let (nx, nh) = (grid.nx(), grid.nh());
    let mut range_map = Array2::zeros((nh, nx));
    let mut dopp_map = Array2::zeros((nh, nx));
    let mut phase_map = Array2::zeros((nh, nx));
    for ih in 0..nh {
        for ix in 0..nx {
            let z = Vec3::new(grid.x_at(ix), y, grid.h_at(ih));
            let d = z - g1;
            let r = d.norm();
            if r == 0.0 {
                range_map[(ih, ix)] = f64::INFINITY;
                dopp_map[(ih, ix)] = f64::INFINITY;
                phase_map[(ih, ix)] = f64::INFINITY;
                continue;
            }
            let look = d / r;
            range_map[(ih, ix)] = (r - meas.r1).abs();
            dopp_map[(ih, ix)] = (look.dot(v1) - meas.doppler1).abs();
            phase_map[(ih, ix)] = if meas.phi_wrapped_only {
                // Wrapped fallback: compare the cone phase modulo one cycle.
                phase_scale
                    * interferometry::wrap_phase(look.dot(b) / phase_scale - meas.phi.wrapped)
                        .abs()
            } else {
                (look.dot(b) - phase_rhs).abs()
            };
        }
    }
    Ok([
        ResidualMap { values: range_map, grid: *grid, y, label: "range-sphere" },
        ResidualMap { values: dopp_map, grid: *grid, y, label: "doppler-cone" },
        ResidualMap { values: phase_map, grid: *grid, y, label: "phase-cone" },
    ])
}

/// Ultra-narrowband measurements defined at the true scatterer state: the
/// Doppler and Doppler-rate of the first antenna at its zero-Doppler-rate
/// time, and the interferometric phase via the interferometric Doppler-rate
/// surface `Phi = 2 t_d1 (omega0/c) [L1(x) . v - (b1_perp(x) . gamma2') / R1(x)]`.
pub fn measure_unb_from_truth(
    x: Vec3,
    traj1: &Trajectory,
    traj2: &Trajectory,
    omega0: f64,
    consts: &PhysicalConstants,
) -> Result<UnbMeasurement> {
    let t_d1 = geometry::zero_doppler_rate_time(traj1, x)?;
    let t_d2 = geometry::zero_doppler_rate_time(traj2, x)?;
    let f1 = geometry::doppler(traj1, t_d1, x, omega0, consts)?;
    let f1_rate = geometry::doppler_rate(traj1, t_d1, x, omega0, consts)?;

    let look = geometry::look_direction(traj1, t_d1, x)?;
    let r1 = geometry::range(traj1, t_d1, x)?;
    let v = geometry::baseline_velocity(traj1, t_d1, traj2, t_d2)?;
    let b = geometry::baseline(traj1, t_d1, traj2, t_d2)?;
    let b_perp = geometry::perp_component(b, look)?;
    let g2dot = traj2.velocity_at(t_d2)?;
    let surface = look.dot(v) - b_perp.dot(g2dot) / r1;
    let phi = 2.0 * t_d1 * (omega0 / consts.c) * surface;

    Ok(UnbMeasurement {
        f1,
        f1_rate,
        phi: PhaseMeasurement::from_unwrapped(phi, Modality::Unb),
        t_d1,
        t_d2,
        phi_wrapped_only: false,
    })
}

/// Best-effort ultra-narrowband measurements from a phase-equalized,
/// co-registered image pair; see [`measure_wb_from_images`] for the
/// resolution caveats.
pub fn measure_unb_from_images(
    img1: &ComplexImage,
    img2: &ComplexImage,
    traj1: &Trajectory,
    traj2: &Trajectory,
    omega0: f64,
    consts: &PhysicalConstants,
) -> Result<UnbMeasurement> {
    let rp1 = crate::imaging::refined_peak(img1)?;
    let rp2 = crate::imaging::refined_peak(img2)?;
    let z0 = rp1.peak.position;
    let t_d1 = geometry::zero_doppler_rate_time(traj1, z0)?;
    let t_d2 = geometry::zero_doppler_rate_time(traj2, rp2.peak.position)?;

    // Doppler from the first image's refined peak phase.
    let f_pred = geometry::doppler(traj1, t_d1, z0, omega0, consts)?;
    let pm = resolve_ambiguity(rp1.phase, 2.0 * f_pred * t_d1, Modality::Unb);
    let f1 = pm.unwrapped / (2.0 * t_d1);
    // The rate is not observable from a single peak phase; evaluate the
    // zero-Doppler-rate condition at the reference point.
    let f1_rate = geometry::doppler_rate(traj1, t_d1, z0, omega0, consts)?;

    // Interferometric phase: difference of the refined peak phases with
    // the second phase rescaled onto the common zero-Doppler-rate factor.
    // Exact modulo 2 pi for integer time ratios (as in the shipped
    // geometry); otherwise the residual cycle leak is left to the resolver.
    let ratio = t_d1 / t_d2;
    let wrapped = interferometry::wrap_phase(rp1.phase - ratio * rp2.phase);
    let truth_like = measure_unb_from_truth(z0, traj1, traj2, omega0, consts)?;
    let phi = resolve_ambiguity(wrapped, truth_like.phi.unwrapped, Modality::Unb);

    Ok(UnbMeasurement { f1, f1_rate, phi, t_d1, t_d2, phi_wrapped_only: false })
}

/// The three ultra-narrowband residual maps over a slice: Doppler cone,
/// Doppler-rate surface and interferometric Doppler-rate surface.
pub fn residuals_unb(
    meas: &UnbMeasurement,
    traj1: &Trajectory,
    traj2: &Trajectory,
    grid: &SearchGrid,
    omega0: f64,
    consts: &PhysicalConstants,
) -> Result<[ResidualMap; 3]> {
    residuals_unb_at_y(meas, traj1, traj2, grid, grid.fixed_y, omega0, consts)
}

fn residuals_unb_at_y(
    meas: &UnbMeasurement,
    traj1: &Trajectory,
    traj2: &Trajectory,
    grid: &SearchGrid,
    y: f64,
    omega0: f64,
    consts: &PhysicalConstants,
) -> Result<[ResidualMap; 3]> {
    grid.validate()?;
    let g1 = traj1.position(meas.t_d1)?;
    let v1 = traj1.velocity_at(meas.t_d1)?;
    let a1 = traj1.acceleration_at(meas.t_d1)?;
    let g2dot = traj2.velocity_at(meas.t_d2)?;
    let v = g2dot - v1;
    let b = geometry::baseline(traj1, meas.t_d1, traj2, meas.t_d2)?;
    let c_over = consts.c / omega0;
    let dopp_rhs = -c_over * meas.f1;
    let rate_rhs = -c_over * meas.f1_rate;
    let iphase_scale = consts.c / (2.0 * meas.t_d1 * omega0);
    let iphase_rhs = iphase_scale * meas.phi.unwrapped;

    let (nx, nh) = (grid.nx(), grid.nh());
    let mut dopp_map = Array2::zeros((nh, nx));
    let mut rate_map = Array2::zeros((nh, nx));
    let mut iphase_map = Array2::zeros((nh, nx));
    for ih in 0..nh {
        for ix in 0..nx {
            let z = Vec3::new(grid.x_at(ix), y, grid.h_at(ih));
            let d = z - g1;
            let r = d.norm();
            if r == 0.0 {
                dopp_map[(ih, ix)] = f64::INFINITY;
                rate_map[(ih, ix)] = f64::INFINITY;
                iphase_map[(ih, ix)] = f64::INFINITY;
                continue;
            }
            let look = d / r;
            let v1_perp = v1 - look * look.dot(v1);
            let b_perp = b - look * look.dot(b);
            dopp_map[(ih, ix)] = (look.dot(v1) - dopp_rhs).abs();
            rate_map[(ih, ix)] = (look.dot(a1) - v1.dot(v1_perp) / r - rate_rhs).abs();
            let surface = look.dot(v) - b_perp.dot(g2dot) / r;
            iphase_map[(ih, ix)] = if meas.phi_wrapped_only {
                iphase_scale
                    * interferometry::wrap_phase(surface / iphase_scale - meas.phi.wrapped).abs()
            } else {
                (surface - iphase_rhs).abs()
            };
        }
    }
    Ok([
        ResidualMap { values: dopp_map, grid: *grid, y, label: "doppler-cone" },
        ResidualMap { values: rate_map, grid: *grid, y, label: "doppler-rate" },
        ResidualMap { values: iphase_map, grid: *grid, y, label: "interferometric-doppler-rate" },
    ])
}

/// Normalization constants: each map's median, with degenerate
/// (all-but-vanishing) maps excluded from the combination.
fn map_weights(maps: &[ResidualMap; 3]) -> [f64; 3] {
    let mut w = [0.0; 3];
    for (i, m) in maps.iter().enumerate() {
        let med = m.median();
        w[i] = if med.is_finite() && med > 1e-12 { 1.0 / med } else { 0.0 };
    }
    w
}

fn argmin_slice(maps: &[ResidualMap; 3], weights: [f64; 3]) -> (usize, usize, f64, [f64; 3]) {
    let (nh, nx) = maps[0].values.dim();
    let mut best = (0usize, 0usize, f64::INFINITY);
    // Heights ascend in the outer loop, so ties resolve to the lowest
    // height, then the smallest x.
    for ih in 0..nh {
        for ix in 0..nx {
            let combined: f64 = (0..3)
                .map(|i| maps[i].values[(ih, ix)] * weights[i])
                .sum();
            if combined < best.2 {
                best = (ih, ix, combined);
            }
        }
    }
    let at = [
        maps[0].values[(best.0, best.1)],
        maps[1].values[(best.0, best.1)],
        maps[2].values[(best.0, best.1)],
    ];
    (best.0, best.1, best.2, at)
}

/// Local minima of the combined slice residual, for candidate reporting in
/// the wrapped-phase fallback.
fn slice_local_minima(
    maps: &[ResidualMap; 3],
    weights: [f64; 3],
    grid: &SearchGrid,
    y: f64,
    threshold: f64,
) -> Vec<(f64, Vec3)> {
    let (nh, nx) = maps[0].values.dim();
    let combined = |ih: usize, ix: usize| -> f64 {
        (0..3).map(|i| maps[i].values[(ih, ix)] * weights[i]).sum()
    };
    let mut out = Vec::new();
    for ih in 0..nh {
        for ix in 0..nx {
            let c = combined(ih, ix);
            if c > threshold {
                continue;
            }
            let better_neighbor = [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)]
                .iter()
                .any(|(dh, dx)| {
                    let (jh, jx) = (ih as i64 + dh, ix as i64 + dx);
                    jh >= 0
                        && jx >= 0
                        && (jh as usize) < nh
                        && (jx as usize) < nx
                        && combined(jh as usize, jx as usize) < c
                });
            if !better_neighbor {
                out.push((c, Vec3::new(grid.x_at(ix), y, grid.h_at(ih))));
            }
        }
    }
    out
}

fn solve_generic<F>(
    grid: &SearchGrid,
    degenerate: bool,
    wrapped_only: bool,
    mut maps_at: F,
) -> Result<Solution>
where
    F: FnMut(f64) -> Result<[ResidualMap; 3]>,
{
    grid.validate()?;
    let y_values = grid.y_values();
    let mut best: Option<(f64, Vec3, [f64; 3])> = None;
    let mut candidates: Vec<(f64, Vec3)> = Vec::new();
    for &y in &y_values {
        let maps = maps_at(y)?;
        let weights = map_weights(&maps);
        let (ih, ix, combined, at) = argmin_slice(&maps, weights);
        let pos = Vec3::new(grid.x_at(ix), y, grid.h_at(ih));
        if wrapped_only {
            candidates.extend(slice_local_minima(&maps, weights, grid, y, combined + 0.25));
        }
        match &best {
            Some((b, _, _)) if combined >= *b => {}
            _ => best = Some((combined, pos, at)),
        }
    }
    let (combined_residual, position, at) =
        best.ok_or_else(|| Error::NotFound("empty search grid".into()))?;
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    candidates.truncate(16);
    Ok(Solution {
        position,
        combined_residual,
        equation_residuals: at.to_vec(),
        degenerate,
        candidates: candidates.into_iter().map(|(_, p)| p).collect(),
    })
}

/// Argmin of the combined wideband residual over the search grid.
pub fn solve_wb(
    meas: &WbMeasurement,
    traj1: &Trajectory,
    traj2: &Trajectory,
    grid: &SearchGrid,
    omega0: f64,
    consts: &PhysicalConstants,
) -> Result<Solution> {
    let b = geometry::baseline(traj1, meas.s01, traj2, meas.s02)?;
    let degenerate = b.norm() < 1e-9;
    solve_generic(grid, degenerate, meas.phi_wrapped_only, |y| {
        residuals_wb_at_y(meas, traj1, traj2, grid, y, omega0, consts)
    })
}

/// Argmin of the combined ultra-narrowband residual over the search grid.
pub fn solve_unb(
    meas: &UnbMeasurement,
    traj1: &Trajectory,
    traj2: &Trajectory,
    grid: &SearchGrid,
    omega0: f64,
    consts: &PhysicalConstants,
) -> Result<Solution> {
    let b = geometry::baseline(traj1, meas.t_d1, traj2, meas.t_d2)?;
    let v = geometry::baseline_velocity(traj1, meas.t_d1, traj2, meas.t_d2)?;
    let degenerate = b.norm() < 1e-9 && v.norm() < 1e-9;
    solve_generic(grid, degenerate, meas.phi_wrapped_only, |y| {
        residuals_unb_at_y(meas, traj1, traj2, grid, y, omega0, consts)
    })
}
