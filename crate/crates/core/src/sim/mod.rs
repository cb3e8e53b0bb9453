//! Synthetic sensor: renders RGB frames from a deformed gel surface with a
//! directional-illumination shading model. Serves as the stand-in for the
//! physical hardware and as the ground-truth oracle for calibration and
//! reconstruction tests.

pub mod camera;
pub mod probe;
pub mod render;
pub mod shading;

pub use camera::CameraModel;
pub use probe::{DisplacementField, ObjectContactField, SphereProbe, ZeroField};
pub use render::{SensorFrame, Simulator, SimulatorConfig};
pub use shading::{Channel, IlluminationModel, Light};
