//! Kinematics and vector geometry of the two-antenna acquisition.
//!
//! Everything downstream (signal synthesis, backprojection, interferometric
//! phase models, residual surfaces) is built from the quantities defined
//! here: ranges, look-directions, Doppler and Doppler-rate, zero-Doppler and
//! zero-Doppler-rate times, baselines and perpendicular decompositions.
//!
//! Conventions, fixed once and used everywhere:
//! * slow time `s` is in physical seconds, `s = 0` at the trajectory
//!   midpoint for the shipped configurations;
//! * `range_rate` is the exact derivative `d|x - gamma(s)|/ds = -L . gamma'`
//!   (the raw projection `L . gamma'` is exposed separately as
//!   [`look_dot_velocity`]);
//! * Doppler is `f_d = -(omega0/c) L . gamma'`, and every phase model and
//!   residual in the crate derives from this definition, so synthesized data
//!   and inversion stay self-consistent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used to accept a vector as "unit".
const UNIT_NORM_TOL: f64 = 1e-9;

/// Element of three-space; units are meters, m/s or m/s^2 by context.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the direction of `self`.
    pub fn normalized(self) -> Result<Vec3> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::Singularity("cannot normalize the zero vector".into()));
        }
        Ok(self / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl std::ops::Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, rhs: f64) -> Vec3 {
        Vec3::new(self.x * rhs, self.y * rhs, self.z * rhs)
    }
}

impl std::ops::Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, rhs: f64) -> Vec3 {
        Vec3::new(self.x / rhs, self.y / rhs, self.z / rhs)
    }
}

impl std::ops::Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Physical constants of the propagation medium.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Propagation speed in m/s.
    pub c: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants { c: 3.0e8 }
    }
}

/// A point scatterer on the (unknown-height) surface.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Scatterer {
    /// Ground position [x, y] in meters.
    pub ground_position: [f64; 2],
    /// Height above the reference surface in meters.
    pub height: f64,
    /// Complex reflectivity (dimensionless), stored as (re, im).
    pub reflectivity: [f64; 2],
}

impl Scatterer {
    pub fn new(x: f64, y: f64, height: f64, reflectivity: [f64; 2]) -> Self {
        Scatterer { ground_position: [x, y], height, reflectivity }
    }

    /// Position in three-space.
    pub fn position(&self) -> Vec3 {
        Vec3::new(self.ground_position[0], self.ground_position[1], self.height)
    }
}

/// A set of point scatterers.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Scene {
    pub scatterers: Vec<Scatterer>,
}

impl Scene {
    pub fn single(x: f64, y: f64, height: f64) -> Self {
        Scene { scatterers: vec![Scatterer::new(x, y, height, [1.0, 0.0])] }
    }

    pub fn is_empty(&self) -> bool {
        self.scatterers.is_empty()
    }
}

/// Supported trajectory kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryKind {
    /// Straight path at constant velocity (acceleration is zero).
    Linear,
}

/// Parametric antenna path over a slow-time interval `[s1, s2]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    /// Position at `s = s1`.
    pub start_position: Vec3,
    /// Velocity in m/s.
    pub velocity: Vec3,
    /// Acceleration in m/s^2 (zero for the linear kind).
    pub acceleration: Vec3,
    /// Slow-time interval [s1, s2] in seconds.
    pub s_interval: [f64; 2],
}

impl Trajectory {
    /// Constant-velocity straight line over `[s1, s2]`.
    pub fn linear(start_position: Vec3, velocity: Vec3, s_interval: [f64; 2]) -> Result<Self> {
        let t = Trajectory {
            kind: TrajectoryKind::Linear,
            start_position,
            velocity,
            acceleration: Vec3::ZERO,
            s_interval,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let interval_ok = self.s_interval[0] < self.s_interval[1];
        if !interval_ok {
            return Err(Error::Domain(format!(
                "slow-time interval must satisfy s1 < s2, got [{}, {}]",
                self.s_interval[0], self.s_interval[1]
            )));
        }
        if self.kind == TrajectoryKind::Linear && self.acceleration != Vec3::ZERO {
            return Err(Error::Domain(
                "linear trajectories must have zero acceleration".into(),
            ));
        }
        if !(self.start_position.is_finite()
            && self.velocity.is_finite()
            && self.acceleration.is_finite())
        {
            return Err(Error::Domain("trajectory parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn contains(&self, s: f64) -> bool {
        s >= self.s_interval[0] && s <= self.s_interval[1]
    }

    fn check_interval(&self, s: f64) -> Result<()> {
        if !self.contains(s) {
            return Err(Error::Domain(format!(
                "slow time {} outside trajectory interval [{}, {}]",
                s, self.s_interval[0], self.s_interval[1]
            )));
        }
        Ok(())
    }

    /// Antenna position at slow time `s`.
    pub fn position(&self, s: f64) -> Result<Vec3> {
        self.check_interval(s)?;
        let ds = s - self.s_interval[0];
        Ok(self.start_position + self.velocity * ds + self.acceleration * (0.5 * ds * ds))
    }

    /// Antenna velocity at slow time `s`.
    pub fn velocity_at(&self, s: f64) -> Result<Vec3> {
        self.check_interval(s)?;
        Ok(self.velocity + self.acceleration * (s - self.s_interval[0]))
    }

    /// Antenna acceleration at slow time `s`.
    pub fn acceleration_at(&self, s: f64) -> Result<Vec3> {
        self.check_interval(s)?;
        Ok(self.acceleration)
    }

    /// Midpoint of the slow-time interval.
    pub fn s_midpoint(&self) -> f64 {
        0.5 * (self.s_interval[0] + self.s_interval[1])
    }
}

/// Distance from the antenna at slow time `s` to the point `x`.
pub fn range(traj: &Trajectory, s: f64, x: Vec3) -> Result<f64> {
    Ok((x - traj.position(s)?).norm())
}

/// Unit vector from the antenna toward `x`.
pub fn look_direction(traj: &Trajectory, s: f64, x: Vec3) -> Result<Vec3> {
    let d = x - traj.position(s)?;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::Singularity(
            "look direction undefined: point coincides with the antenna".into(),
        ));
    }
    Ok(d / r)
}

/// Projection of the antenna velocity on the look-direction, `L . gamma'`.
///
/// Negative when the antenna approaches `x`. The exact range derivative is
/// the negation of this; see [`range_rate`].
pub fn look_dot_velocity(traj: &Trajectory, s: f64, x: Vec3) -> Result<f64> {
    Ok(look_direction(traj, s, x)?.dot(traj.velocity_at(s)?))
}

/// Exact slow-time derivative of the range, `d|x - gamma(s)|/ds = -L . gamma'`.
pub fn range_rate(traj: &Trajectory, s: f64, x: Vec3) -> Result<f64> {
    Ok(-look_dot_velocity(traj, s, x)?)
}

/// Zero-Doppler time: the slow time at which the look-direction is
/// orthogonal to the antenna velocity.
///
/// For linear trajectories this is the closest-approach time, computed in
/// closed form. Fails if the root lies outside the trajectory interval.
pub fn zero_doppler_time(traj: &Trajectory, x: Vec3) -> Result<f64> {
    match traj.kind {
        TrajectoryKind::Linear => {
            let v2 = traj.velocity.norm_squared();
            if v2 == 0.0 {
                return Err(Error::Domain(
                    "zero-Doppler time undefined for a stationary antenna".into(),
                ));
            }
            let s = traj.s_interval[0] + (x - traj.start_position).dot(traj.velocity) / v2;
            if !traj.contains(s) {
                return Err(Error::NotFound(format!(
                    "zero-Doppler time {} outside interval [{}, {}]",
                    s, traj.s_interval[0], traj.s_interval[1]
                )));
            }
            Ok(s)
        }
    }
}

/// Zero-Doppler time clamped to the trajectory interval.
///
/// Backprojection needs a reference time for every grid point, including
/// points whose closest approach falls outside the aperture; those use the
/// nearest aperture endpoint.
pub fn zero_doppler_time_clamped(traj: &Trajectory, x: Vec3) -> f64 {
    match zero_doppler_time(traj, x) {
        Ok(s) => s,
        Err(_) => {
            let v2 = traj.velocity.norm_squared();
            if v2 == 0.0 {
                return traj.s_midpoint();
            }
            let s = traj.s_interval[0] + (x - traj.start_position).dot(traj.velocity) / v2;
            s.clamp(traj.s_interval[0], traj.s_interval[1])
        }
    }
}

/// Doppler of the antenna with respect to `x`: `f_d = -(omega0/c) L . gamma'`.
pub fn doppler(traj: &Trajectory, s: f64, x: Vec3, omega0: f64, consts: &PhysicalConstants) -> Result<f64> {
    Ok(-(omega0 / consts.c) * look_dot_velocity(traj, s, x)?)
}

/// Slow-time derivative of the Doppler:
/// `df_d/ds = -(omega0/c) [L . gamma'' - (gamma' . gamma'_perp) / R]`,
/// where `gamma'_perp` is the velocity component perpendicular to the
/// look-direction. For zero acceleration this reduces to
/// `+(omega0/c) |gamma'_perp|^2 / R`.
pub fn doppler_rate(traj: &Trajectory, s: f64, x: Vec3, omega0: f64, consts: &PhysicalConstants) -> Result<f64> {
    let look = look_direction(traj, s, x)?;
    let r = range(traj, s, x)?;
    let vel = traj.velocity_at(s)?;
    let acc = traj.acceleration_at(s)?;
    let v_perp = perp_component(vel, look)?;
    Ok(-(omega0 / consts.c) * (look.dot(acc) - vel.dot(v_perp) / r))
}

/// Zero-Doppler-rate time.
///
/// For a constant-velocity linear pass the Doppler-rate never vanishes in a
/// finite aperture; its magnitude is smallest at the interval endpoint whose
/// position is farthest from `x`, which is returned here. Ties (symmetric
/// geometry) resolve to the later endpoint.
pub fn zero_doppler_rate_time(traj: &Trajectory, x: Vec3) -> Result<f64> {
    match traj.kind {
        TrajectoryKind::Linear => {
            let [s1, s2] = traj.s_interval;
            let d1 = (x - traj.position(s1)?).norm();
            let d2 = (x - traj.position(s2)?).norm();
            Ok(if d1 > d2 { s1 } else { s2 })
        }
    }
}

/// Component of `a` perpendicular to the unit vector `u`: `a - u (u . a)`.
pub fn perp_component(a: Vec3, u: Vec3) -> Result<Vec3> {
    if (u.norm() - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::Contract(format!(
            "perp_component requires a unit vector, |u| = {}",
            u.norm()
        )));
    }
    Ok(a - u * u.dot(a))
}

/// Far-field range approximation `|x - y| ~ |x| - x_hat . y`.
///
/// The error against the exact `|x - y|` is bounded by `|y|^2 / |x|`.
pub fn far_field_range(x: Vec3, y: Vec3) -> Result<f64> {
    let n = x.norm();
    if n == 0.0 {
        return Err(Error::Singularity("far-field expansion around the origin".into()));
    }
    Ok(n - x.dot(y) / n)
}

/// First-order difference of look-directions from a common antenna,
/// `L(x) - L(y) ~ z_perp / |y - antenna|` with `z = x - y` and `z_perp`
/// the component of `z` perpendicular to the look-direction toward `y`.
pub fn look_direction_difference(x: Vec3, y: Vec3, antenna: Vec3) -> Result<Vec3> {
    let d = y - antenna;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::Singularity("reference point coincides with the antenna".into()));
    }
    let z_perp = perp_component(x - y, d / r)?;
    Ok(z_perp / r)
}

/// Baseline vector between the two antennas at their reference times.
pub fn baseline(traj1: &Trajectory, s1: f64, traj2: &Trajectory, s2: f64) -> Result<Vec3> {
    Ok(traj2.position(s2)? - traj1.position(s1)?)
}

/// Baseline velocity: difference of the antenna velocities at their
/// reference times.
pub fn baseline_velocity(traj1: &Trajectory, s1: f64, traj2: &Trajectory, s2: f64) -> Result<Vec3> {
    Ok(traj2.velocity_at(s2)? - traj1.velocity_at(s1)?)
}
