//! Synthetic data generation for both modalities.
//!
//! Wideband data is synthesized directly in the (omega', slow-time) domain
//! with the exact range history,
//!
//! ```text
//! D(w', s) = sum_k V_k exp(+i 2 (w0 + w') R_k(s) / c),
//! ```
//!
//! with unit amplitudes (no beam pattern, no spreading loss). Ultra-narrowband
//! data is the windowed correlation output
//!
//! ```text
//! d(mu, s) = sum_k V_k K(w0 (1 - mu) - 2 f_k(s)) exp(+i 2 f_k(s) s),
//! ```
//!
//! where `K` is the spectrum of the fast-time window, evaluated as a discrete
//! sum over the window samples, and `f_k(s)` is the Doppler of scatterer k.
//! Slow time is in physical seconds in both factors; the window duration
//! `T_phi` only shapes `K`.
//!
//! Data are complex baseband; no conjugate symmetry is assumed or produced.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, PhysicalConstants, Scene, Trajectory};

/// Range below which a scatterer is treated as coincident with the antenna.
const COINCIDENCE_EPS: f64 = 1e-9;

/// Wideband acquisition parameters. Frequencies are angular (rad/s); the
/// band `[-bandwidth/2, +bandwidth/2]` around `omega0` is sampled at
/// `n_freq` midpoints.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WidebandConfig {
    /// Center frequency in rad/s.
    pub omega0: f64,
    /// Total (two-sided) bandwidth in rad/s.
    pub bandwidth: f64,
    /// Number of frequency samples.
    pub n_freq: usize,
    /// Number of slow-time samples.
    pub n_slow: usize,
}

impl Default for WidebandConfig {
    fn default() -> Self {
        WidebandConfig {
            omega0: 2.0 * std::f64::consts::PI * 8.0e9,
            bandwidth: 2.0 * std::f64::consts::PI * 100.0e6,
            n_freq: 512,
            n_slow: 1024,
        }
    }
}

impl WidebandConfig {
    pub fn validate(&self) -> Result<()> {
        let band_ok = self.bandwidth > 0.0 && self.bandwidth < self.omega0;
        if !band_ok {
            return Err(Error::Domain(format!(
                "bandwidth must satisfy 0 < bandwidth < omega0, got {} vs {}",
                self.bandwidth, self.omega0
            )));
        }
        if self.n_freq < 2 || self.n_slow < 2 {
            return Err(Error::Domain("sample counts must be at least 2".into()));
        }
        Ok(())
    }

    /// Frequency offsets sampled across the band (midpoint convention).
    pub fn omega_prime_axis(&self) -> Vec<f64> {
        let step = self.bandwidth / self.n_freq as f64;
        (0..self.n_freq)
            .map(|j| -0.5 * self.bandwidth + (j as f64 + 0.5) * step)
            .collect()
    }
}

/// Fast-time window shapes for the ultra-narrowband correlator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowKind {
    /// 0.5 (1 - cos(2 pi t / T)) on [0, T].
    RaisedCosine,
}

/// Ultra-narrowband acquisition parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct UnbConfig {
    /// Center frequency in rad/s.
    pub omega0: f64,
    /// Window duration in seconds.
    pub t_phi: f64,
    /// Fast-time samples across the window.
    pub n_fast: usize,
    /// Number of slow-time samples.
    pub n_slow: usize,
    /// Half-width of the scale-factor grid around 1. `None` selects
    /// 4x the largest `|2 f_d / omega0|` over the scene.
    pub mu_half_width: Option<f64>,
    /// Number of scale-factor samples.
    pub n_mu: usize,
    pub window: WindowKind,
}

impl Default for UnbConfig {
    fn default() -> Self {
        UnbConfig {
            omega0: 2.0 * std::f64::consts::PI * 8.0e9,
            t_phi: 0.01,
            n_fast: 512,
            n_slow: 1024,
            mu_half_width: None,
            n_mu: 512,
            window: WindowKind::RaisedCosine,
        }
    }
}

impl UnbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_phi <= 0.0 || self.t_phi.is_nan() {
            return Err(Error::Domain("window duration must be positive".into()));
        }
        if self.n_fast < 2 || self.n_slow < 2 || self.n_mu < 2 {
            return Err(Error::Domain("sample counts must be at least 2".into()));
        }
        if let Some(hw) = self.mu_half_width {
            if hw <= 0.0 || hw.is_nan() {
                return Err(Error::Domain("mu half-width must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Window amplitude at fast time `t` (zero outside `[0, T_phi]`).
pub fn window_value(t: f64, cfg: &UnbConfig) -> f64 {
    if t < 0.0 || t > cfg.t_phi {
        return 0.0;
    }
    match cfg.window {
        WindowKind::RaisedCosine => {
            0.5 * (1.0 - (2.0 * std::f64::consts::PI * t / cfg.t_phi).cos())
        }
    }
}

/// Discrete spectrum of the fast-time window:
/// `K(delta) = sum_j phi(t_j) exp(-i t_j delta) dt` over `n_fast` midpoint
/// samples of `[0, T_phi]`. `|K|` is even in `delta` and maximal at 0, where
/// `K(0)` equals the window mass (exactly `T_phi / 2` for the raised cosine).
#[derive(Debug, Clone, Copy)]
pub struct WindowKernel {
    t_phi: f64,
    n_fast: usize,
    kind: WindowKind,
}

impl WindowKernel {
    pub fn new(cfg: &UnbConfig) -> Self {
        WindowKernel { t_phi: cfg.t_phi, n_fast: cfg.n_fast, kind: cfg.window }
    }

    /// Window mass `K(0)`.
    pub fn mass(&self) -> f64 {
        match self.kind {
            WindowKind::RaisedCosine => 0.5 * self.t_phi,
        }
    }

    /// Dirichlet sum `dt * sum_j exp(-i t_j delta)` over the midpoint grid,
    /// in closed form.
    fn dirichlet(&self, delta: f64) -> Complex64 {
        let n = self.n_fast as f64;
        let dt = self.t_phi / n;
        let half = 0.5 * dt * delta;
        let total = n * half;
        let ratio = if half.abs() < 1e-12 {
            // sin(n x)/sin(x) -> n as x -> 0.
            n * (1.0 - (n * n - 1.0) * half * half / 6.0)
        } else {
            total.sin() / half.sin()
        };
        Complex64::from_polar(dt * ratio, -total)
    }

    /// Evaluate `K(delta)`.
    pub fn eval(&self, delta: f64) -> Complex64 {
        match self.kind {
            WindowKind::RaisedCosine => {
                // phi(t) = 1/2 - 1/2 cos(2 pi t / T) splits K into three
                // Dirichlet sums at delta and delta -+ 2 pi / T.
                let w = 2.0 * std::f64::consts::PI / self.t_phi;
                self.dirichlet(delta) * 0.5
                    - (self.dirichlet(delta - w) + self.dirichlet(delta + w)) * 0.25
            }
        }
    }
}

/// Uniformly tabulated `K(delta)` with linear interpolation, for the
/// backprojection inner loop.
#[derive(Debug, Clone)]
pub struct KernelTable {
    delta_min: f64,
    inv_step: f64,
    values: Vec<Complex64>,
}

impl KernelTable {
    pub fn build(kernel: &WindowKernel, delta_min: f64, delta_max: f64, n: usize) -> Self {
        assert!(n >= 2 && delta_max > delta_min);
        let step = (delta_max - delta_min) / (n - 1) as f64;
        let values = (0..n)
            .map(|i| kernel.eval(delta_min + i as f64 * step))
            .collect();
        KernelTable { delta_min, inv_step: 1.0 / step, values }
    }

    #[inline]
    pub fn eval(&self, delta: f64) -> Complex64 {
        let pos = (delta - self.delta_min) * self.inv_step;
        if pos <= 0.0 {
            return self.values[0];
        }
        let last = self.values.len() - 1;
        if pos >= last as f64 {
            return self.values[last];
        }
        let idx = pos as usize;
        let frac = pos - idx as f64;
        self.values[idx] * (1.0 - frac) + self.values[idx + 1] * frac
    }
}

/// Axis and provenance metadata shared by both dataset kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// Which antenna produced the data (1-based).
    pub trajectory_id: u32,
    /// Center frequency in rad/s.
    pub omega0: f64,
    /// Slow-time sample instants in seconds.
    pub slow_time: Vec<f64>,
    /// Non-fatal synthesis warnings (e.g. Doppler support exceeding the
    /// mu grid).
    pub warnings: Vec<String>,
}

/// Complex measurement matrix indexed (omega' sample, slow-time sample).
#[derive(Debug, Clone)]
pub struct WidebandDataSet {
    pub data: Array2<Complex64>,
    pub omega_prime: Vec<f64>,
    pub meta: DatasetMeta,
}

/// Complex measurement matrix indexed (mu sample, slow-time sample).
#[derive(Debug, Clone)]
pub struct UnbDataSet {
    pub data: Array2<Complex64>,
    pub mu: Vec<f64>,
    pub t_phi: f64,
    pub n_fast: usize,
    pub window: WindowKind,
    pub meta: DatasetMeta,
}

/// Slow-time sample instants: `n_slow` midpoints of the trajectory interval.
pub fn slow_time_axis(traj: &Trajectory, n_slow: usize) -> Vec<f64> {
    let [s1, s2] = traj.s_interval;
    let step = (s2 - s1) / n_slow as f64;
    (0..n_slow).map(|k| s1 + (k as f64 + 0.5) * step).collect()
}

/// Synthesize demodulated wideband data for a point-scatterer scene.
pub fn simulate_wideband(
    scene: &Scene,
    traj: &Trajectory,
    trajectory_id: u32,
    cfg: &WidebandConfig,
    consts: &PhysicalConstants,
) -> Result<WidebandDataSet> {
    cfg.validate()?;
    traj.validate()?;
    let omega_prime = cfg.omega_prime_axis();
    let slow_time = slow_time_axis(traj, cfg.n_slow);

    // Ranges per (scatterer, slow-time); fails on coincidence.
    let mut ranges = vec![0.0f64; scene.scatterers.len() * cfg.n_slow];
    for (i, sc) in scene.scatterers.iter().enumerate() {
        let x = sc.position();
        for (k, &s) in slow_time.iter().enumerate() {
            let r = geometry::range(traj, s, x)?;
            if r < COINCIDENCE_EPS {
                return Err(Error::Singularity(format!(
                    "scatterer {i} coincides with the antenna at s = {s}"
                )));
            }
            ranges[i * cfg.n_slow + k] = r;
        }
    }

    let omega_lo = cfg.omega0 - 0.5 * cfg.bandwidth + 0.5 * cfg.bandwidth / cfg.n_freq as f64;
    let omega_step = cfg.bandwidth / cfg.n_freq as f64;
    let two_over_c = 2.0 / consts.c;

    let mut data = Array2::<Complex64>::zeros((cfg.n_freq, cfg.n_slow));
    // Columns are independent; synthesize them in parallel.
    let mut columns: Vec<Vec<Complex64>> = (0..cfg.n_slow)
        .into_par_iter()
        .map(|k| {
            let mut col = vec![Complex64::new(0.0, 0.0); cfg.n_freq];
            for (i, sc) in scene.scatterers.iter().enumerate() {
                let v = Complex64::new(sc.reflectivity[0], sc.reflectivity[1]);
                let r = ranges[i * cfg.n_slow + k];
                // exp(i 2 (omega_lo + j step) R / c) via one rotation per step.
                let mut term = v * Complex64::from_polar(1.0, omega_lo * two_over_c * r);
                let rot = Complex64::from_polar(1.0, omega_step * two_over_c * r);
                for cell in col.iter_mut() {
                    *cell += term;
                    term *= rot;
                }
            }
            col
        })
        .collect();
    for (k, col) in columns.drain(..).enumerate() {
        for (j, val) in col.into_iter().enumerate() {
            data[(j, k)] = val;
        }
    }

    Ok(WidebandDataSet {
        data,
        omega_prime,
        meta: DatasetMeta {
            trajectory_id,
            omega0: cfg.omega0,
            slow_time,
            warnings: Vec::new(),
        },
    })
}

/// Largest `|2 f_d / omega0|` over the scene and slow-time samples.
pub fn max_doppler_ratio(
    scene: &Scene,
    traj: &Trajectory,
    cfg: &UnbConfig,
    consts: &PhysicalConstants,
) -> Result<f64> {
    let slow_time = slow_time_axis(traj, cfg.n_slow);
    let mut max_ratio = 0.0f64;
    for sc in &scene.scatterers {
        let x = sc.position();
        for &s in &slow_time {
            let f = geometry::doppler(traj, s, x, cfg.omega0, consts)?;
            max_ratio = max_ratio.max((2.0 * f / cfg.omega0).abs());
        }
    }
    Ok(max_ratio)
}

/// The mu axis actually used for a scene: explicit half-width when
/// configured, otherwise 4x the scene's largest Doppler ratio.
pub fn mu_axis(
    scene: &Scene,
    traj: &Trajectory,
    cfg: &UnbConfig,
    consts: &PhysicalConstants,
) -> Result<(Vec<f64>, Option<String>)> {
    let max_ratio = max_doppler_ratio(scene, traj, cfg, consts)?;
    let mut warning = None;
    let hw = match cfg.mu_half_width {
        Some(hw) => {
            if hw < max_ratio && max_ratio > 0.0 {
                warning = Some(format!(
                    "mu half-width {hw:.3e} below the scene Doppler ratio {max_ratio:.3e}; data will alias"
                ));
            }
            hw
        }
        None => {
            if max_ratio > 0.0 {
                4.0 * max_ratio
            } else {
                // Empty or static scene: any small grid serves.
                1e-6
            }
        }
    };
    let step = 2.0 * hw / cfg.n_mu as f64;
    let axis = (0..cfg.n_mu)
        .map(|m| 1.0 - hw + (m as f64 + 0.5) * step)
        .collect();
    Ok((axis, warning))
}

/// Synthesize correlated ultra-narrowband data for a point-scatterer scene.
pub fn simulate_unb(
    scene: &Scene,
    traj: &Trajectory,
    trajectory_id: u32,
    cfg: &UnbConfig,
    consts: &PhysicalConstants,
) -> Result<UnbDataSet> {
    cfg.validate()?;
    traj.validate()?;
    let slow_time = slow_time_axis(traj, cfg.n_slow);
    let (mu, warning) = mu_axis(scene, traj, cfg, consts)?;
    let mut warnings = Vec::new();
    if let Some(w) = warning {
        log::warn!("{w}");
        warnings.push(w);
    }

    // Doppler histories per (scatterer, slow-time); fails on coincidence.
    let mut dopplers = vec![0.0f64; scene.scatterers.len() * cfg.n_slow];
    for (i, sc) in scene.scatterers.iter().enumerate() {
        let x = sc.position();
        for (k, &s) in slow_time.iter().enumerate() {
            if geometry::range(traj, s, x)? < COINCIDENCE_EPS {
                return Err(Error::Singularity(format!(
                    "scatterer {i} coincides with the antenna at s = {s}"
                )));
            }
            dopplers[i * cfg.n_slow + k] = geometry::doppler(traj, s, x, cfg.omega0, consts)?;
        }
    }

    let kernel = WindowKernel::new(cfg);
    let mut data = Array2::<Complex64>::zeros((cfg.n_mu, cfg.n_slow));
    let mu_ref = &mu;
    let dop_ref = &dopplers;
    let mut columns: Vec<Vec<Complex64>> = (0..cfg.n_slow)
        .into_par_iter()
        .map(|k| {
            let s = slow_time[k];
            let mut col = vec![Complex64::new(0.0, 0.0); cfg.n_mu];
            for (i, sc) in scene.scatterers.iter().enumerate() {
                let v = Complex64::new(sc.reflectivity[0], sc.reflectivity[1]);
                let f = dop_ref[i * cfg.n_slow + k];
                let phase = v * Complex64::from_polar(1.0, 2.0 * f * s);
                for (m, cell) in col.iter_mut().enumerate() {
                    let delta = cfg.omega0 * (1.0 - mu_ref[m]) - 2.0 * f;
                    *cell += phase * kernel.eval(delta);
                }
            }
            col
        })
        .collect();
    for (k, col) in columns.drain(..).enumerate() {
        for (m, val) in col.into_iter().enumerate() {
            data[(m, k)] = val;
        }
    }

    Ok(UnbDataSet {
        data,
        mu,
        t_phi: cfg.t_phi,
        n_fast: cfg.n_fast,
        window: cfg.window,
        meta: DatasetMeta {
            trajectory_id,
            omega0: cfg.omega0,
            slow_time,
            warnings,
        },
    })
}
