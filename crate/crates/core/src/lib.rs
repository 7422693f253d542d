//! Session engine for tangible multi-display prototyping of low-resolution
//! vehicle light displays.

pub mod catalog;
pub mod clock;
pub mod gateway;
pub mod geom;
pub mod net;
pub mod pattern;
pub mod recognition;
pub mod replay;
pub mod scalar;
pub mod scene;
pub mod session;
pub mod tangible;
pub mod touch;

pub use scalar::Scalar;

/// Double-precision aliases used throughout the session layer.
pub type Point = geom::Point2<f64>;
pub type Pose = recognition::Pose2D<f64>;
pub type Tangible = tangible::TangibleSpec<f64>;
pub type Calibration = tangible::DisplayCalibration<f64>;
pub type Triad = recognition::TouchTriad<f64>;
