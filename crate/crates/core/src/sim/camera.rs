//! Ideal wide-FOV pinhole camera.

use nalgebra::{Isometry3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole camera. The pose maps sensor-frame points into the camera frame
/// (camera looks along +z, x right, y down in image coordinates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub focal: f64,
    pub principal: (f64, f64),
    pub resolution: (u32, u32),
    /// Horizontal field of view, degrees. Kept consistent with `focal`.
    pub fov_deg: f64,
    pub pose: Isometry3<f64>,
}

impl CameraModel {
    pub fn new(
        focal: f64,
        resolution: (u32, u32),
        principal: (f64, f64),
        pose: Isometry3<f64>,
    ) -> Result<Self> {
        if !(focal > 0.0) || resolution.0 == 0 || resolution.1 == 0 {
            return Err(Error::invalid_parameter(
                "camera needs positive focal length and resolution",
            ));
        }
        let fov_deg = 2.0 * (resolution.0 as f64 / 2.0 / focal).atan().to_degrees();
        Ok(CameraModel {
            focal,
            principal,
            resolution,
            fov_deg,
            pose,
        })
    }

    /// Checks the tan relation between fov, focal and resolution.
    pub fn fov_consistent(&self) -> bool {
        let expected = 2.0 * (self.resolution.0 as f64 / 2.0 / self.focal).atan().to_degrees();
        (expected - self.fov_deg).abs() < 1e-6
    }

    /// Perspective projection of a sensor-frame point, sub-pixel precision.
    pub fn project(&self, p: &Point3<f64>) -> Result<(f64, f64)> {
        let c = self.pose * p;
        if c.z <= 1e-9 {
            return Err(Error::BehindCamera);
        }
        Ok((
            self.focal * c.x / c.z + self.principal.0,
            self.focal * c.y / c.z + self.principal.1,
        ))
    }

    /// Ray through pixel `(x, y)`: origin and unit direction, sensor frame.
    pub fn ray(&self, x: f64, y: f64) -> (Point3<f64>, Vector3<f64>) {
        let inv = self.pose.inverse();
        let origin = inv * Point3::origin();
        let dir_cam = Vector3::new(
            (x - self.principal.0) / self.focal,
            (y - self.principal.1) / self.focal,
            1.0,
        );
        let dir = (inv * dir_cam).normalize();
        (origin, dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit;
    use approx::assert_relative_eq;
    use nalgebra::Translation3;

    fn camera() -> CameraModel {
        // Camera 15 mm behind the sensor origin looking along +z, so the
        // sensor-to-camera transform adds 15 mm of depth.
        let pose = Isometry3::from_parts(
            Translation3::new(0.0, 0.0, 15.0),
            nalgebra::UnitQuaternion::identity(),
        );
        CameraModel::new(195.0, (640, 480), (320.0, 240.0), pose).unwrap()
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let cam = camera();
        let (x, y) = cam.project(&Point3::new(0.0, 0.0, 10.0)).unwrap();
        assert_relative_eq!(x, 320.0, epsilon = 1e-12);
        assert_relative_eq!(y, 240.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_invariant_along_view_ray() {
        let cam = camera();
        let p = Point3::new(3.0, -2.0, 10.0);
        let (x1, y1) = cam.project(&p).unwrap();
        // Scale the camera-frame point along its ray.
        let c = cam.pose * p;
        let scaled = cam.pose.inverse() * Point3::from(c.coords * 2.5);
        let (x2, y2) = cam.project(&scaled).unwrap();
        assert_relative_eq!(x1, x2, epsilon = 1e-9);
        assert_relative_eq!(y1, y2, epsilon = 1e-9);
    }

    #[test]
    fn behind_camera_is_error() {
        let cam = camera();
        assert!(cam.project(&Point3::new(0.0, 0.0, -20.0)).is_err());
    }

    #[test]
    fn matches_homogeneous_matrix_oracle() {
        let cam = camera();
        for p in [
            Point3::new(1.0, 2.0, 5.0),
            Point3::new(-4.0, 3.5, 12.0),
            Point3::new(8.0, -8.0, 9.0),
            Point3::new(0.25, 0.1, 2.0),
        ] {
            let (x, y) = cam.project(&p).unwrap();
            let (ox, oy) = testkit::project_homogeneous_oracle(&cam, &p);
            assert_relative_eq!(x, ox, epsilon = 1e-9);
            assert_relative_eq!(y, oy, epsilon = 1e-9);
        }
    }

    #[test]
    fn fov_relation_holds() {
        let cam = camera();
        assert!(cam.fov_consistent());
        assert_relative_eq!(
            (cam.fov_deg / 2.0).to_radians().tan(),
            320.0 / 195.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn ray_projects_back_to_pixel() {
        let cam = camera();
        for &(x, y) in &[(320.0, 240.0), (100.5, 50.25), (600.0, 400.0)] {
            let (o, d) = cam.ray(x, y);
            let p = o + 7.0 * d;
            let (px, py) = cam.project(&p).unwrap();
            assert_relative_eq!(px, x, epsilon = 1e-9);
            assert_relative_eq!(py, y, epsilon = 1e-9);
        }
    }
}
