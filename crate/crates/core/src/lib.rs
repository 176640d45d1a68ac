//! Wideband and Doppler (ultra-narrowband) SAR interferometry toolkit.
//!
//! The pipeline runs end to end on synthetic point-scatterer scenes:
//!
//! 1. [`forward`] synthesizes demodulated wideband data and correlated
//!    ultra-narrowband data for a two-antenna acquisition;
//! 2. [`imaging`] backprojects each dataset onto a flat reference surface,
//!    reproducing the layover displacement of elevated scatterers;
//! 3. [`interferometry`] co-registers the two images, forms the
//!    interferogram and extracts the interferometric phase;
//! 4. [`heightsolver`] recovers the three-dimensional scatterer position by
//!    grid search over the measurement surfaces (range sphere / Doppler cone
//!    / phase cone for wideband; Doppler cone / Doppler-rate surface /
//!    interferometric Doppler-rate surface for ultra-narrowband).
//!
//! [`geometry`] holds the kinematics everything else is built on, and
//! [`io`] the serialized container, CSV and PGM exports.

pub mod error;
pub mod forward;
pub mod geometry;
pub mod heightsolver;
pub mod imaging;
pub mod interferometry;
pub mod io;

pub use error::{Error, Result};
pub use forward::{UnbConfig, UnbDataSet, WidebandConfig, WidebandDataSet, WindowKind};
pub use geometry::{PhysicalConstants, Scatterer, Scene, Trajectory, TrajectoryKind, Vec3};
pub use imaging::{ComplexImage, ImageGrid, Modality, Peak, RefinedPeak};
pub use interferometry::{Interferogram, PhaseMeasurement};
pub use heightsolver::{ResidualMap, SearchGrid, Solution, UnbMeasurement, WbMeasurement};
