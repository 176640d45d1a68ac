//! Interferogram formation and interferometric phase models.
//!
//! The interferometric phase conventions, derived once from the Doppler
//! definition `f_d = -(omega0/c) L . gamma'` and used consistently by the
//! synthesis, the imaging and the solver:
//!
//! * wideband: `Phi = 2 (omega0/c) (R1(x, s0_1) - R2(x, s0_2))`;
//! * ultra-narrowband: `Phi = 2 t_d1 (f1(x, t_d1) - f2(x, t_d2))`, with
//!   `t_d_i` the zero-Doppler-rate times in seconds.
//!
//! Phase flattening subtracts the phase of a reference point of known
//! height; the first-order forms `2 (omega0/c) (b1_perp . l) / R1` and
//! `2 (omega0/c) t_d1 (v1_perp . l) / R1` use the look-direction expansion
//! around the reference point.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, PhysicalConstants, Trajectory, Vec3};
use crate::imaging::{find_peak, ComplexImage, Modality};

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Wrap a phase to `(-pi, pi]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w > std::f64::consts::PI {
        w - TAU
    } else {
        w
    }
}

/// A scalar interferometric phase with its integer ambiguity resolved.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PhaseMeasurement {
    /// Wrapped value in `(-pi, pi]`.
    pub wrapped: f64,
    /// `wrapped + 2 pi * ambiguity_index`.
    pub unwrapped: f64,
    pub ambiguity_index: i64,
    pub modality: Modality,
}

impl PhaseMeasurement {
    /// Measurement from an already-unwrapped (real-valued) phase.
    pub fn from_unwrapped(unwrapped: f64, modality: Modality) -> Self {
        let wrapped = wrap_phase(unwrapped);
        let ambiguity_index = ((unwrapped - wrapped) / TAU).round() as i64;
        PhaseMeasurement { wrapped, unwrapped, ambiguity_index, modality }
    }
}

/// Pick the integer `k` minimizing `|wrapped + 2 pi k - predicted|`.
/// Exact midpoint ties resolve toward the smaller `|k|`.
pub fn resolve_ambiguity(wrapped: f64, predicted: f64, modality: Modality) -> PhaseMeasurement {
    let q = (predicted - wrapped) / TAU;
    let lo = q.floor() as i64;
    let hi = lo + 1;
    let d_lo = (wrapped + TAU * lo as f64 - predicted).abs();
    let d_hi = (wrapped + TAU * hi as f64 - predicted).abs();
    let k = if d_lo < d_hi {
        lo
    } else if d_hi < d_lo {
        hi
    } else if lo.abs() <= hi.abs() {
        lo
    } else {
        hi
    };
    PhaseMeasurement {
        wrapped,
        unwrapped: wrapped + TAU * k as f64,
        ambiguity_index: k,
        modality,
    }
}

/// Pixelwise product of one image with the conjugate of the other.
#[derive(Debug, Clone)]
pub struct Interferogram {
    pub data: ndarray::Array2<Complex64>,
    pub grid: crate::imaging::ImageGrid,
    /// Integer-pixel shift that was applied to the second image.
    pub registration_offset: [i64; 2],
}

/// Integer-pixel co-registration: translate the second image so the two
/// magnitude peaks coincide. Out-of-range pixels are zero-filled. The
/// returned offset is `(peak1 - peak2)` in pixels.
pub fn coregister(
    img1: &ComplexImage,
    img2: &ComplexImage,
) -> Result<(ComplexImage, ComplexImage, [i64; 2])> {
    if img1.grid != img2.grid {
        return Err(Error::GridMismatch(
            "co-registration requires images on the same grid".into(),
        ));
    }
    let p1 = find_peak(img1)?;
    let p2 = find_peak(img2)?;
    let dx = p1.ix as i64 - p2.ix as i64;
    let dy = p1.iy as i64 - p2.iy as i64;

    let (ny, nx) = img2.data.dim();
    let mut shifted = ComplexImage::zeros(img2.grid, img2.meta.clone());
    for iy in 0..ny {
        let sy = iy as i64 - dy;
        if sy < 0 || sy >= ny as i64 {
            continue;
        }
        for ix in 0..nx {
            let sx = ix as i64 - dx;
            if sx < 0 || sx >= nx as i64 {
                continue;
            }
            shifted.data[(iy, ix)] = img2.data[(sy as usize, sx as usize)];
        }
    }
    Ok((img1.clone(), shifted, [dx, dy]))
}

/// Form the interferogram `I1 . conj(I2)` of two co-registered images.
pub fn interferogram(img1: &ComplexImage, img2: &ComplexImage) -> Result<Interferogram> {
    if img1.grid != img2.grid {
        return Err(Error::GridMismatch(
            "interferogram requires images on the same grid".into(),
        ));
    }
    let data = ndarray::Zip::from(&img1.data)
        .and(&img2.data)
        .map_collect(|a, b| a * b.conj());
    Ok(Interferogram {
        data,
        grid: img1.grid,
        registration_offset: [0, 0],
    })
}

/// Wideband interferometric phase model (unwrapped):
/// `2 (omega0/c) (R1(x, s01) - R2(x, s02))`.
pub fn wb_phase_model(
    x: Vec3,
    traj1: &Trajectory,
    s01: f64,
    traj2: &Trajectory,
    s02: f64,
    omega0: f64,
    consts: &PhysicalConstants,
) -> Result<f64> {
    let r1 = geometry::range(traj1, s01, x)?;
    let r2 = geometry::range(traj2, s02, x)?;
    if r1 == 0.0 || r2 == 0.0 {
        return Err(Error::Singularity("phase model at zero range".into()));
    }
    Ok(2.0 * (omega0 / consts.c) * (r1 - r2))
}

/// Ultra-narrowband interferometric phase model (unwrapped):
/// `2 t_d1 (f1(x, t_d1) - f2(x, t_d2))`.
pub fn unb_phase_model(
    x: Vec3,
    traj1: &Trajectory,
    t_d1: f64,
    traj2: &Trajectory,
    t_d2: f64,
    omega0: f64,
    consts: &PhysicalConstants,
) -> Result<f64> {
    let f1 = geometry::doppler(traj1, t_d1, x, omega0, consts)?;
    let f2 = geometry::doppler(traj2, t_d2, x, omega0, consts)?;
    Ok(2.0 * t_d1 * (f1 - f2))
}

/// Result of a first-order flattening evaluation.
#[derive(Debug, Clone, Copy)]
pub struct FlattenedPhase {
    pub value: f64,
    /// False when `|l|` is not small against the reference range
    /// (`|l| >= R/100`); the value is still computed.
    pub far_field_valid: bool,
}

/// Flattened wideband phase: measured phase minus the model phase of the
/// reference point `z0`, where the second antenna sits at
/// `gamma1(s01) + b`.
pub fn flatten_wb(
    measured: &PhaseMeasurement,
    z0: Vec3,
    traj1: &Trajectory,
    s01: f64,
    b: Vec3,
    omega0: f64,
    consts: &PhysicalConstants,
) -> Result<f64> {
    let g1 = traj1.position(s01)?;
    let r1 = (z0 - g1).norm();
    let r2 = (z0 - (g1 + b)).norm();
    if r1 == 0.0 || r2 == 0.0 {
        return Err(Error::Singularity("flattening at zero range".into()));
    }
    let reference = 2.0 * (omega0 / consts.c) * (r1 - r2);
    Ok(measured.unwrapped - reference)
}

/// First-order wideband flattening `2 (omega0/c) (b1_perp . l) / R1(z0, s01)`
/// with `b1_perp` the baseline component perpendicular to the look-direction
/// toward `z0`.
pub fn flatten_wb_approx(
    l: Vec3,
    z0: Vec3,
    traj1: &Trajectory,
    s01: f64,
    b: Vec3,
    omega0: f64,
    consts: &PhysicalConstants,
) -> Result<FlattenedPhase> {
    let look = geometry::look_direction(traj1, s01, z0)?;
    let r1 = geometry::range(traj1, s01, z0)?;
    let b_perp = geometry::perp_component(b, look)?;
    let value = 2.0 * (omega0 / consts.c) * b_perp.dot(l) / r1;
    Ok(FlattenedPhase { value, far_field_valid: l.norm() < r1 / 100.0 })
}

/// Flattened ultra-narrowband phase: measured phase minus the model phase
/// of the reference point `z0`.
#[allow(clippy::too_many_arguments)]
pub fn flatten_unb(
    measured: &PhaseMeasurement,
    z0: Vec3,
    traj1: &Trajectory,
    t_d1: f64,
    traj2: &Trajectory,
    t_d2: f64,
    omega0: f64,
    consts: &PhysicalConstants,
) -> Result<f64> {
    let reference = unb_phase_model(z0, traj1, t_d1, traj2, t_d2, omega0, consts)?;
    Ok(measured.unwrapped - reference)
}

/// First-order ultra-narrowband flattening
/// `2 (omega0/c) t_d1 (v1_perp . l) / R1(z0, t_d1)` with `v1_perp` the
/// baseline-velocity component perpendicular to the look-direction.
pub fn flatten_unb_approx(
    l: Vec3,
    z0: Vec3,
    traj1: &Trajectory,
    t_d1: f64,
    v: Vec3,
    omega0: f64,
    consts: &PhysicalConstants,
) -> Result<FlattenedPhase> {
    let look = geometry::look_direction(traj1, t_d1, z0)?;
    let r1 = geometry::range(traj1, t_d1, z0)?;
    let v_perp = geometry::perp_component(v, look)?;
    let value = 2.0 * (omega0 / consts.c) * t_d1 * v_perp.dot(l) / r1;
    Ok(FlattenedPhase { value, far_field_valid: l.norm() < r1 / 100.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{ImageGrid, ImageMeta};

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    const OMEGA0: f64 = 2.0 * std::f64::consts::PI * 8.0e9;

    fn meta() -> ImageMeta {
        ImageMeta {
            modality: Modality::Wideband,
            trajectory_id: 1,
            config_hash: None,
            excluded: Vec::new(),
        }
    }

    fn grid() -> ImageGrid {
        ImageGrid {
            x_extent: [0.0, 15.0],
            y_extent: [0.0, 11.0],
            spacing: 1.0,
            reference_height: 0.0,
        }
    }

    fn delta_image(ix: usize, iy: usize) -> ComplexImage {
        let mut img = ComplexImage::zeros(grid(), meta());
        img.data[(iy, ix)] = Complex64::new(1.0, 0.5);
        img
    }

    #[test]
    fn coregister_identical_and_constructed_shift() {
        let img = delta_image(5, 5);
        let (_, _, offset) = coregister(&img, &img).unwrap();
        assert_eq!(offset, [0, 0]);

        // Image 2 shifted by (+7, 0): offset is (-7, 0) and the shifted
        // output re-aligns the peak.
        let img2 = delta_image(12, 5);
        let (_, reg, offset) = coregister(&img, &img2).unwrap();
        assert_eq!(offset, [-7, 0]);
        let p = find_peak(&reg).unwrap();
        assert_eq!((p.ix, p.iy), (5, 5));
    }

    #[test]
    fn coregister_peakless_image_fails() {
        let img = delta_image(5, 5);
        let empty = ComplexImage::zeros(grid(), meta());
        assert!(matches!(coregister(&img, &empty), Err(Error::NotFound(_))));
    }

    #[test]
    fn interferogram_self_and_phase_subtraction() {
        let img = delta_image(3, 4);
        let ig = interferogram(&img, &img).unwrap();
        for v in ig.data.iter() {
            assert!(v.im.abs() < 1e-15);
            assert!(v.re >= 0.0);
        }

        let mut a = ComplexImage::zeros(grid(), meta());
        let mut b = ComplexImage::zeros(grid(), meta());
        a.data.fill(Complex64::from_polar(1.0, 0.5));
        b.data.fill(Complex64::from_polar(1.0, 0.2));
        let ig = interferogram(&a, &b).unwrap();
        for v in ig.data.iter() {
            assert!((v.arg() - 0.3).abs() < 1e-12);
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn interferogram_grid_mismatch() {
        let a = delta_image(1, 1);
        let g2 = ImageGrid { spacing: 2.0, ..grid() };
        let b = ComplexImage::zeros(g2, meta());
        assert!(matches!(interferogram(&a, &b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn interferogram_phase_equals_wrapped_difference() {
        let mut a = ComplexImage::zeros(grid(), meta());
        let mut b = ComplexImage::zeros(grid(), meta());
        for (i, v) in a.data.iter_mut().enumerate() {
            *v = Complex64::from_polar(1.0 + i as f64, 0.37 * i as f64);
        }
        for (i, v) in b.data.iter_mut().enumerate() {
            *v = Complex64::from_polar(2.0, -0.11 * i as f64);
        }
        let ig = interferogram(&a, &b).unwrap();
        for (i, v) in ig.data.iter().enumerate() {
            let expected = wrap_phase(0.37 * i as f64 - -0.11 * i as f64);
            assert!((wrap_phase(v.arg() - expected)).abs() < 1e-9, "pixel {i}");
        }
    }

    #[test]
    fn resolve_ambiguity_cases() {
        let m = resolve_ambiguity(0.4, 0.4, Modality::Wideband);
        assert_eq!(m.ambiguity_index, 0);
        assert_eq!(m.unwrapped, 0.4);

        let m = resolve_ambiguity(0.4, 0.4 + TAU, Modality::Wideband);
        assert_eq!(m.ambiguity_index, 1);
        assert!((m.unwrapped - (0.4 + TAU)).abs() < 1e-12);

        // Exact midpoint: candidates k = 0 and k = 1 are equidistant
        // (TAU - pi == pi exactly in binary); the smaller |k| wins.
        let m = resolve_ambiguity(-std::f64::consts::PI, 0.0, Modality::Wideband);
        assert_eq!(m.ambiguity_index, 0);

        // Invariant: unwrapped = wrapped + 2 pi k.
        let m = resolve_ambiguity(1.234, -27.5, Modality::Unb);
        assert!((m.unwrapped - (m.wrapped + TAU * m.ambiguity_index as f64)).abs() < 1e-12);
    }

    #[test]
    fn resolve_ambiguity_exact_within_capture_range() {
        // Whenever |true - predicted| < pi the true unwrapped phase is
        // recovered to machine precision.
        let truth = 123.456;
        for &offset in &[-3.0, -1.5, 0.0, 0.7, 2.9] {
            let m = resolve_ambiguity(wrap_phase(truth), truth + offset, Modality::Wideband);
            assert!((m.unwrapped - truth).abs() < 1e-9, "offset {offset}");
        }
    }

    fn wb_trajs() -> (Trajectory, Trajectory) {
        (
            Trajectory::linear(
                Vec3::new(-7100.0, -500.0, 3000.0),
                Vec3::new(0.0, 100.0, 0.0),
                [-5.0, 5.0],
            )
            .unwrap(),
            Trajectory::linear(
                Vec3::new(-7100.0, -500.0, 4000.0),
                Vec3::new(0.0, 100.0, 0.0),
                [-5.0, 5.0],
            )
            .unwrap(),
        )
    }

    #[test]
    fn wb_phase_model_cases() {
        let (t1, t2) = wb_trajs();
        let x = Vec3::new(-20.0, -31.0, 50.0);
        let s0 = geometry::zero_doppler_time(&t1, x).unwrap();

        // Identical antennas cancel.
        assert_eq!(wb_phase_model(x, &t1, s0, &t1, s0, OMEGA0, &consts()).unwrap(), 0.0);

        // Range oracle.
        let r1 = 7670.0;
        let r2 = (7080.0f64 * 7080.0 + 3950.0 * 3950.0).sqrt();
        let phi = wb_phase_model(x, &t1, s0, &t2, s0, OMEGA0, &consts()).unwrap();
        let expected = 2.0 * (OMEGA0 / 3.0e8) * (r1 - r2);
        assert!((phi - expected).abs() < 1e-6);

        // Linear in omega0.
        let phi2 = wb_phase_model(x, &t1, s0, &t2, s0, 2.0 * OMEGA0, &consts()).unwrap();
        assert!((phi2 - 2.0 * phi).abs() < 1e-9);
    }

    #[test]
    fn unb_phase_model_cases() {
        let t1 = Trajectory::linear(
            Vec3::new(-7100.0, -500.0, 2000.0),
            Vec3::new(0.0, 100.0, 0.0),
            [-5.0, 5.0],
        )
        .unwrap();
        let t2 = Trajectory::linear(
            Vec3::new(-7100.0, -500.0, 4000.0),
            Vec3::new(0.0, 400.0, 0.0),
            [-1.25, 1.25],
        )
        .unwrap();
        let x = Vec3::new(-20.0, -31.0, 50.0);
        let t_d1 = geometry::zero_doppler_rate_time(&t1, x).unwrap();
        let t_d2 = geometry::zero_doppler_rate_time(&t2, x).unwrap();
        assert_eq!((t_d1, t_d2), (5.0, 1.25));

        // Equal Doppler histories cancel.
        assert_eq!(
            unb_phase_model(x, &t1, t_d1, &t1, t_d1, OMEGA0, &consts()).unwrap(),
            0.0
        );

        // Geometry oracle at the farthest endpoints.
        let f1 = geometry::doppler(&t1, t_d1, x, OMEGA0, &consts()).unwrap();
        let f2 = geometry::doppler(&t2, t_d2, x, OMEGA0, &consts()).unwrap();
        let phi = unb_phase_model(x, &t1, t_d1, &t2, t_d2, OMEGA0, &consts()).unwrap();
        assert!((phi - 2.0 * t_d1 * (f1 - f2)).abs() < 1e-9);

        // Doubling the reference time doubles the phase (the window-count
        // and window-duration factorization of t_d scales the same way).
        let t1w = Trajectory::linear(
            Vec3::new(-7100.0, -1000.0, 2000.0),
            Vec3::new(0.0, 100.0, 0.0),
            [-10.0, 10.0],
        )
        .unwrap();
        let f1w = geometry::doppler(&t1w, 2.0 * t_d1, x, OMEGA0, &consts()).unwrap();
        let phi_w =
            unb_phase_model(x, &t1w, 2.0 * t_d1, &t2, t_d2, OMEGA0, &consts()).unwrap();
        assert!((phi_w - 2.0 * (2.0 * t_d1) * (f1w - f2)).abs() < 1e-9);
    }

    #[test]
    fn flatten_wb_cases() {
        let (t1, t2) = wb_trajs();
        let x = Vec3::new(-20.0, -31.0, 50.0);
        let s0 = geometry::zero_doppler_time(&t1, x).unwrap();
        let b = geometry::baseline(&t1, s0, &t2, s0).unwrap();

        // l = 0: flattening the reference phase itself gives zero.
        let z0 = Vec3::new(-41.0, -31.0, 0.0);
        let phi_ref = wb_phase_model(z0, &t1, s0, &t2, s0, OMEGA0, &consts()).unwrap();
        let m = PhaseMeasurement::from_unwrapped(phi_ref, Modality::Wideband);
        let flat = flatten_wb(&m, z0, &t1, s0, b, OMEGA0, &consts()).unwrap();
        assert!(flat.abs() < 1e-9);

        // Reciprocity: b1_perp . l == l1_perp . b at machine precision.
        let l = x - z0;
        let look = geometry::look_direction(&t1, s0, z0).unwrap();
        let b_perp = geometry::perp_component(b, look).unwrap();
        let l_perp = geometry::perp_component(l, look).unwrap();
        let lhs = b_perp.dot(l);
        let rhs = l_perp.dot(b);
        assert!((lhs - rhs).abs() <= 16.0 * f64::EPSILON * l.norm() * b.norm());

        // The first-order form linearizes the look-direction difference: it
        // tracks 2 (w0/c) [L1(x) - L1(z0)] . b within 1e-2 here.
        let approx = flatten_wb_approx(l, z0, &t1, s0, b, OMEGA0, &consts()).unwrap();
        assert!(approx.far_field_valid);
        let look_x = geometry::look_direction(&t1, s0, x).unwrap();
        let cone_diff = 2.0 * (OMEGA0 / 3.0e8) * (look_x - look).dot(b);
        let rel = ((approx.value - cone_diff) / cone_diff).abs();
        assert!(rel <= 1e-2, "relative flattening error {rel}");

        // Against the exact two-range difference the residual is the
        // change of the cone-vs-hyperboloid gap between x and z0, bounded
        // by 2 (w0/c) |b|^2 |l| * 3 / R1^2 at this kilometer baseline.
        let phi_x = wb_phase_model(x, &t1, s0, &t2, s0, OMEGA0, &consts()).unwrap();
        let exact = phi_x - phi_ref;
        let r1 = geometry::range(&t1, s0, z0).unwrap();
        let bound = 2.0 * (OMEGA0 / 3.0e8) * b.norm_squared() * l.norm() * 3.0 / (r1 * r1);
        assert!(
            (approx.value - exact).abs() <= bound,
            "residual {} vs bound {}",
            (approx.value - exact).abs(),
            bound
        );
    }

    #[test]
    fn flatten_unb_cases() {
        // Zero-baseline pair: the second antenna crosses the first one's
        // zero-Doppler-rate position exactly, climbing at 20 m/s, so
        // b = 0 and v = (0, 0, 20) there. The first-order form is then
        // accurate to the pure second-order term in |l|/R.
        let t1 = Trajectory::linear(
            Vec3::new(-7100.0, -500.0, 2000.0),
            Vec3::new(0.0, 100.0, 0.0),
            [-5.0, 5.0],
        )
        .unwrap();
        let t2 = Trajectory::linear(
            Vec3::new(-7100.0, -500.0, 1800.0),
            Vec3::new(0.0, 100.0, 20.0),
            [-5.0, 5.0],
        )
        .unwrap();
        let x = Vec3::new(-20.0, -31.0, 50.0);
        let t_d1 = geometry::zero_doppler_rate_time(&t1, x).unwrap();
        let t_d2 = geometry::zero_doppler_rate_time(&t2, x).unwrap();
        assert_eq!((t_d1, t_d2), (5.0, 5.0));
        let b = geometry::baseline(&t1, t_d1, &t2, t_d2).unwrap();
        assert_eq!(b, Vec3::ZERO);
        let v = geometry::baseline_velocity(&t1, t_d1, &t2, t_d2).unwrap();
        assert_eq!(v, Vec3::new(0.0, 0.0, 20.0));

        // l = 0.
        let z0 = Vec3::new(-33.0, -31.0, 0.0);
        let phi_ref = unb_phase_model(z0, &t1, t_d1, &t2, t_d2, OMEGA0, &consts()).unwrap();
        let m = PhaseMeasurement::from_unwrapped(phi_ref, Modality::Unb);
        let flat = flatten_unb(&m, z0, &t1, t_d1, &t2, t_d2, OMEGA0, &consts()).unwrap();
        assert!(flat.abs() < 1e-9);

        // Reciprocity v1_perp . l == l1_perp . v.
        let l = x - z0;
        let look = geometry::look_direction(&t1, t_d1, z0).unwrap();
        let v_perp = geometry::perp_component(v, look).unwrap();
        let l_perp = geometry::perp_component(l, look).unwrap();
        assert!((v_perp.dot(l) - l_perp.dot(v)).abs() <= 16.0 * f64::EPSILON * v.norm() * l.norm());

        // Tight agreement with the exact model difference at zero baseline.
        let phi_x = unb_phase_model(x, &t1, t_d1, &t2, t_d2, OMEGA0, &consts()).unwrap();
        let exact = phi_x - phi_ref;
        let approx = flatten_unb_approx(l, z0, &t1, t_d1, v, OMEGA0, &consts()).unwrap();
        assert!(approx.far_field_valid);
        assert!(
            ((approx.value - exact) / exact).abs() < 1e-2,
            "relative error {}",
            ((approx.value - exact) / exact).abs()
        );

        // Finite-baseline pair (50 m, 80 m/s along y): the neglected
        // baseline coupling dominates; assert the analytic remainder bound.
        let t2b = Trajectory::linear(
            Vec3::new(-7100.0, -500.0, 2050.0),
            Vec3::new(0.0, 180.0, 0.0),
            [-2.7778, 2.7778],
        )
        .unwrap();
        let t_d2b = geometry::zero_doppler_rate_time(&t2b, x).unwrap();
        let vb = geometry::baseline_velocity(&t1, t_d1, &t2b, t_d2b).unwrap();
        let bb = geometry::baseline(&t1, t_d1, &t2b, t_d2b).unwrap();
        let phi_xb = unb_phase_model(x, &t1, t_d1, &t2b, t_d2b, OMEGA0, &consts()).unwrap();
        let phi_zb = unb_phase_model(z0, &t1, t_d1, &t2b, t_d2b, OMEGA0, &consts()).unwrap();
        let exact_b = phi_xb - phi_zb;
        let approx_b = flatten_unb_approx(l, z0, &t1, t_d1, vb, OMEGA0, &consts()).unwrap();
        let r1 = geometry::range(&t1, t_d1, z0).unwrap();
        let g2dot = t2b.velocity_at(t_d2b).unwrap();
        let bound = 2.0 * (OMEGA0 / 3.0e8) * t_d1
            * (vb.norm() * l.norm_squared() / (r1 * r1)
                + 3.0 * g2dot.norm() * bb.norm() * l.norm() / (r1 * r1));
        assert!(
            (approx_b.value - exact_b).abs() <= bound,
            "residual {} vs bound {}",
            (approx_b.value - exact_b).abs(),
            bound
        );
    }

    #[test]
    fn wrap_phase_range() {
        for &phi in &[-10.0, -std::f64::consts::PI, 0.0, 3.0, 123.456, -98.7] {
            let w = wrap_phase(phi);
            assert!(w > -std::f64::consts::PI - 1e-15 && w <= std::f64::consts::PI + 1e-15);
            assert!(((phi - w) / TAU - ((phi - w) / TAU).round()).abs() < 1e-9);
        }
    }

    #[test]
    fn hyperboloid_to_cone_bound() {
        // |(R1 - R2) - L1 . b| <= |b|^2 / R1 for the shipped baseline.
        let (t1, t2) = wb_trajs();
        let x = Vec3::new(-20.0, -31.0, 50.0);
        let s0 = geometry::zero_doppler_time(&t1, x).unwrap();
        let b = geometry::baseline(&t1, s0, &t2, s0).unwrap();
        let r1 = geometry::range(&t1, s0, x).unwrap();
        let r2 = geometry::range(&t2, s0, x).unwrap();
        let look = geometry::look_direction(&t1, s0, x).unwrap();
        let lhs = ((r1 - r2) - look.dot(b)).abs();
        assert!(lhs <= b.norm_squared() / r1, "{} vs {}", lhs, b.norm_squared() / r1);
    }

    #[test]
    fn interferogram_offset_is_recorded() {
        let a = delta_image(5, 5);
        let b = delta_image(12, 5);
        let (r1, r2, offset) = coregister(&a, &b).unwrap();
        let mut ig = interferogram(&r1, &r2).unwrap();
        ig.registration_offset = offset;
        assert_eq!(ig.registration_offset, [-7, 0]);
    }
}
