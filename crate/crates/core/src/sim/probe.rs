//! Indentation models: displacement fields produced by rigid bodies pressed
//! into the gel.
//!
//! A displacement field answers, for any surface point with outward normal
//! `m`, how far the gel is pushed inward along `-m`. For a rigid body this
//! is the length of the inward ray segment covered by the body.

use nalgebra::{Isometry3, Point3, Unit, Vector3};

use crate::surface::SurfaceSample;

/// Axis-aligned bound of the region a field can touch, sensor frame.
#[derive(Debug, Clone, Copy)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn around(center: &Point3<f64>, radius: f64) -> Self {
        let r = Vector3::repeat(radius);
        Aabb {
            min: center - r,
            max: center + r,
        }
    }

    pub fn corners(&self) -> [Point3<f64>; 8] {
        let (a, b) = (self.min, self.max);
        [
            Point3::new(a.x, a.y, a.z),
            Point3::new(b.x, a.y, a.z),
            Point3::new(a.x, b.y, a.z),
            Point3::new(b.x, b.y, a.z),
            Point3::new(a.x, a.y, b.z),
            Point3::new(b.x, a.y, b.z),
            Point3::new(a.x, b.y, b.z),
            Point3::new(b.x, b.y, b.z),
        ]
    }
}

/// Per-point normal displacement into the gel, mm.
pub trait DisplacementField: Sync {
    fn displacement(&self, point: &Point3<f64>, normal: &Vector3<f64>) -> f64;

    /// Conservative bound of the contact region; `None` means everywhere.
    fn bounds(&self) -> Option<Aabb> {
        None
    }
}

/// The undeformed gel.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroField;

impl DisplacementField for ZeroField {
    fn displacement(&self, _point: &Point3<f64>, _normal: &Vector3<f64>) -> f64 {
        0.0
    }

    fn bounds(&self) -> Option<Aabb> {
        Some(Aabb {
            min: Point3::origin(),
            max: Point3::origin(),
        })
    }
}

/// Rigid sphere pressed into the gel.
#[derive(Debug, Clone, Copy)]
pub struct SphereProbe {
    center: Point3<f64>,
    radius: f64,
    depth: f64,
}

impl SphereProbe {
    /// Probe tangent at the surface sample, advanced inward by `depth`.
    pub fn at_target(target: &SurfaceSample, radius: f64, depth: f64) -> Self {
        let center = target.point + (radius - depth) * target.normal.into_inner();
        SphereProbe {
            center,
            radius,
            depth,
        }
    }

    pub fn from_center(center: Point3<f64>, radius: f64) -> Self {
        SphereProbe {
            center,
            radius,
            depth: 0.0,
        }
    }

    pub fn center(&self) -> Point3<f64> {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    /// Analytic contact-disc radius on a locally flat surface:
    /// `sqrt(2 R d - d^2)`.
    pub fn flat_contact_radius(radius: f64, depth: f64) -> f64 {
        (2.0 * radius * depth - depth * depth).max(0.0).sqrt()
    }

    /// Height of the indentation cap at in-plane radius `rho` for a poke of
    /// `depth`, locally flat model.
    pub fn cap_profile(radius: f64, depth: f64, rho: f64) -> f64 {
        let h = (radius * radius - rho * rho).max(0.0).sqrt() - (radius - depth);
        h.max(0.0)
    }

    /// Radial slope magnitude of the cap at in-plane radius `rho`.
    pub fn cap_slope(radius: f64, rho: f64) -> f64 {
        let denom = (radius * radius - rho * rho).max(1e-12).sqrt();
        rho / denom
    }
}

impl DisplacementField for SphereProbe {
    fn displacement(&self, point: &Point3<f64>, normal: &Vector3<f64>) -> f64 {
        // Length of the inward ray segment inside the probe ball:
        // solve |(p - t m) - c| = R for the larger root.
        let w = point - self.center;
        let a = w.dot(normal);
        let disc = a * a - w.norm_squared() + self.radius * self.radius;
        if disc <= 0.0 {
            return 0.0;
        }
        (a + disc.sqrt()).max(0.0)
    }

    fn bounds(&self) -> Option<Aabb> {
        Some(Aabb::around(&self.center, self.radius))
    }
}

/// Signed distance function of a rigid object, object frame.
pub trait Sdf: Sync + Send {
    fn distance(&self, p: &Point3<f64>) -> f64;

    /// Radius of a bounding sphere around the object origin.
    fn bounding_radius(&self) -> f64;
}

/// Displacement of the gel caused by an SDF-described object at `pose`
/// (object frame -> sensor frame). Penetration is found by a bisection
/// root-find along the inward normal ray.
pub struct ObjectContactField<'a> {
    sdf: &'a dyn Sdf,
    /// Sensor frame -> object frame.
    to_object: Isometry3<f64>,
    object_center_sensor: Point3<f64>,
    max_depth: f64,
}

impl<'a> ObjectContactField<'a> {
    pub fn new(sdf: &'a dyn Sdf, pose_sensor_from_object: &Isometry3<f64>, max_depth: f64) -> Self {
        ObjectContactField {
            sdf,
            to_object: pose_sensor_from_object.inverse(),
            object_center_sensor: pose_sensor_from_object * Point3::origin(),
            max_depth,
        }
    }

    fn sdf_at(&self, p_sensor: &Point3<f64>) -> f64 {
        self.sdf.distance(&(self.to_object * p_sensor))
    }
}

impl DisplacementField for ObjectContactField<'_> {
    fn displacement(&self, point: &Point3<f64>, normal: &Vector3<f64>) -> f64 {
        if self.sdf_at(point) >= 0.0 {
            return 0.0;
        }
        // The point is covered by the object; walk inward until outside.
        let mut lo = 0.0f64;
        let mut hi = self.max_depth;
        if self.sdf_at(&(point - hi * normal)) < 0.0 {
            return hi; // saturated through the whole gel
        }
        for _ in 0..48 {
            let mid = 0.5 * (lo + hi);
            if self.sdf_at(&(point - mid * normal)) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn bounds(&self) -> Option<Aabb> {
        Some(Aabb::around(
            &self.object_center_sensor,
            self.sdf.bounding_radius(),
        ))
    }
}

/// Places a probe for a commanded poke and reports whether it intersects
/// the surface at all: `depth <= 0` or a miss yields no contact.
pub fn simulate_poke(
    target: &SurfaceSample,
    probe_radius: f64,
    depth: f64,
) -> (SphereProbe, bool) {
    let probe = SphereProbe::at_target(target, probe_radius, depth.max(0.0));
    let contact = depth > 0.0 && probe.displacement(&target.point, &target.normal) > 0.0;
    (probe, contact)
}

/// Unit-normal helper for call sites holding `Unit<Vector3>`.
pub fn displacement_at(
    field: &dyn DisplacementField,
    point: &Point3<f64>,
    normal: &Unit<Vector3<f64>>,
) -> f64 {
    field.displacement(point, &normal.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::FingertipSurface;
    use approx::assert_relative_eq;

    #[test]
    fn contact_disc_radius_matches_cap_geometry() {
        // Probe of 4 mm diameter at 0.5 mm depth: disc radius ~1.3229 mm.
        let r = SphereProbe::flat_contact_radius(2.0, 0.5);
        assert_relative_eq!(r, 1.75f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(r, 1.3229, epsilon = 1e-4);
    }

    #[test]
    fn zero_depth_has_empty_contact() {
        let s = FingertipSurface::new(10.0, 15.0).unwrap();
        let target = s.sample(0.85, 0.5);
        let (probe, contact) = simulate_poke(&target, 2.0, 0.0);
        assert!(!contact);
        assert_eq!(probe.displacement(&target.point, &target.normal), 0.0);
    }

    #[test]
    fn peak_displacement_equals_depth() {
        let s = FingertipSurface::new(10.0, 15.0).unwrap();
        for &(u, v, d) in &[(0.8, 0.4, 0.3), (0.9, 0.6, 0.8), (0.85, 0.5, 1.5)] {
            let target = s.sample(u, v);
            let (probe, contact) = simulate_poke(&target, 2.0, d);
            assert!(contact);
            assert_relative_eq!(
                probe.displacement(&target.point, &target.normal),
                d,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn flat_profile_matches_closed_form() {
        // Probe against a flat plane: displacement at in-plane radius rho
        // equals the spherical-cap profile.
        let probe = SphereProbe {
            center: Point3::new(0.0, 0.0, 2.0 - 0.8),
            radius: 2.0,
            depth: 0.8,
        };
        let n = Vector3::z();
        for i in 0..40 {
            let rho = i as f64 * 0.05;
            let p = Point3::new(rho, 0.0, 0.0);
            let expect = SphereProbe::cap_profile(2.0, 0.8, rho);
            assert_relative_eq!(probe.displacement(&p, &n), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn object_field_matches_sphere_probe() {
        // A sphere SDF through the generic contact solver agrees with the
        // analytic sphere probe.
        struct Ball(f64);
        impl Sdf for Ball {
            fn distance(&self, p: &Point3<f64>) -> f64 {
                p.coords.norm() - self.0
            }
            fn bounding_radius(&self) -> f64 {
                self.0
            }
        }
        let s = FingertipSurface::new(10.0, 15.0).unwrap();
        let target = s.sample(0.87, 0.55);
        let probe = SphereProbe::at_target(&target, 2.0, 0.6);
        let ball = Ball(2.0);
        let pose = Isometry3::translation(probe.center().x, probe.center().y, probe.center().z);
        let field = ObjectContactField::new(&ball, &pose, 2.5);
        for du in [-0.02, 0.0, 0.01] {
            for dv in [-0.03, 0.0, 0.02] {
                let sample = s.sample(0.87 + du, 0.55 + dv);
                let a = probe.displacement(&sample.point, &sample.normal);
                let b = field.displacement(&sample.point, &sample.normal);
                assert!((a - b).abs() < 1e-6, "mismatch {a} vs {b}");
            }
        }
    }
}
