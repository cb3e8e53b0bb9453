//! Directional-illumination shading.
//!
//! The physical sensor pipes light along the shell so each LED keeps a
//! consistent direction relative to the surface everywhere. The model here
//! keeps that information structure: each channel is lit by directional
//! lights defined in a local, image-aligned slope frame, and the pixel
//! intensity is a function of the local height-gradient of the deformation.
//!
//! The x-gradient is encoded by two opposing lights (R from +x, G from -x)
//! and the y-gradient by a single light (B from +y).

use nalgebra::{Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    R,
    G,
    B,
}

impl Channel {
    pub fn index(self) -> usize {
        match self {
            Channel::R => 0,
            Channel::G => 1,
            Channel::B => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Light {
    /// Unit direction toward the light in the slope frame
    /// (x, y image-aligned, z out of the surface).
    pub direction: Vector3<f64>,
    pub channel: Channel,
    pub intensity: f64,
}

/// Shading parameters for the three-channel illumination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlluminationModel {
    pub lights: Vec<Light>,
    /// Per-channel ambient floor, fraction of full scale.
    pub ambient: [f64; 3],
    /// Blend between the diffuse term and the specular lobe, in [0, 1].
    pub specular_mix: f64,
    pub specular_power: f64,
    /// Relative intensity droop from the base edge to the apex edge of the
    /// sensed window, emulating imperfect light piping along the shell.
    pub meridian_droop: f64,
    /// Relative azimuthal intensity ripple (cosine around the sector).
    pub azimuth_ripple: f64,
}

impl Default for IlluminationModel {
    fn default() -> Self {
        let elev = 30f64.to_radians();
        let (sin_e, cos_e) = elev.sin_cos();
        IlluminationModel {
            lights: vec![
                Light {
                    direction: Vector3::new(cos_e, 0.0, sin_e),
                    channel: Channel::R,
                    intensity: 0.9,
                },
                Light {
                    direction: Vector3::new(-cos_e, 0.0, sin_e),
                    channel: Channel::G,
                    intensity: 0.9,
                },
                Light {
                    direction: Vector3::new(0.0, cos_e, sin_e),
                    channel: Channel::B,
                    intensity: 0.9,
                },
            ],
            ambient: [0.10, 0.10, 0.10],
            specular_mix: 0.3,
            specular_power: 2.0,
            meridian_droop: 0.15,
            azimuth_ripple: 0.08,
        }
    }
}

impl IlluminationModel {
    /// Validates the channel/gradient information structure: two lights
    /// informative about the x-gradient, one about the y-gradient.
    pub fn validate(&self) -> Result<()> {
        if self.lights.iter().any(|l| l.intensity <= 0.0) {
            return Err(Error::invalid_parameter("light intensities must be positive"));
        }
        if !(0.0..=1.0).contains(&self.specular_mix) {
            return Err(Error::invalid_parameter("specular_mix must be in [0, 1]"));
        }
        let x_informative = self
            .lights
            .iter()
            .filter(|l| l.direction.x.abs() > l.direction.y.abs())
            .count();
        let y_informative = self
            .lights
            .iter()
            .filter(|l| l.direction.y.abs() > l.direction.x.abs())
            .count();
        if x_informative != 2 || y_informative != 1 {
            return Err(Error::invalid_parameter(format!(
                "expected 2 x-informative and 1 y-informative lights, got {x_informative}/{y_informative}"
            )));
        }
        Ok(())
    }

    /// Shades one light given the local slope `(sx, sy)` of the deformation
    /// height field (dimensionless, image-aligned axes).
    pub fn shade(&self, light: &Light, sx: f64, sy: f64) -> f64 {
        let n = Unit::new_normalize(Vector3::new(-sx, -sy, 1.0));
        let l = Unit::new_normalize(light.direction);
        let lambert = n.dot(&l).max(0.0);
        let half = Unit::new_normalize(light.direction.normalize() + Vector3::z());
        let spec = n.dot(&half).max(0.0).powf(self.specular_power);
        (1.0 - self.specular_mix) * lambert + self.specular_mix * spec
    }

    /// Per-channel intensity (fractions of full scale, before quantization)
    /// at slope `(sx, sy)`, scaled by the local piping factor.
    pub fn channel_values(&self, sx: f64, sy: f64, piping: f64) -> [f64; 3] {
        let mut out = self.ambient;
        for light in &self.lights {
            out[light.channel.index()] +=
                light.intensity * piping * self.shade(light, sx, sy);
        }
        out
    }

    /// Light piping attenuation at a sensed-window fraction `fu ∈ [0, 1]`
    /// along the meridian and azimuth `theta` (radians).
    pub fn piping_factor(&self, fu: f64, theta: f64) -> f64 {
        (1.0 - self.meridian_droop * fu.clamp(0.0, 1.0))
            * (1.0 - self.azimuth_ripple * theta.cos().max(-1.0).min(1.0) * 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_model_validates() {
        IlluminationModel::default().validate().unwrap();
    }

    #[test]
    fn flat_surface_shades_equally_across_channels() {
        let m = IlluminationModel::default();
        let v = m.channel_values(0.0, 0.0, 1.0);
        assert_relative_eq!(v[0], v[1], epsilon = 1e-12);
        assert_relative_eq!(v[0], v[2], epsilon = 1e-12);
        assert!(v[0] > 0.3 && v[0] < 0.9, "baseline {v:?} out of range");
    }

    #[test]
    fn x_lights_mirror_each_other() {
        let m = IlluminationModel::default();
        for &(sx, sy) in &[(0.3, 0.1), (-0.7, 0.4), (1.1, -0.2)] {
            let a = m.channel_values(sx, sy, 1.0);
            let b = m.channel_values(-sx, sy, 1.0);
            assert_relative_eq!(a[0], b[1], epsilon = 1e-12);
            assert_relative_eq!(a[1], b[0], epsilon = 1e-12);
            assert_relative_eq!(a[2], b[2], epsilon = 1e-12);
        }
    }

    #[test]
    fn doubling_intensities_doubles_values_minus_ambient() {
        let mut m = IlluminationModel::default();
        let base = m.channel_values(0.4, -0.3, 1.0);
        for l in &mut m.lights {
            l.intensity *= 2.0;
        }
        let doubled = m.channel_values(0.4, -0.3, 1.0);
        for c in 0..3 {
            assert_relative_eq!(
                doubled[c] - m.ambient[c],
                2.0 * (base[c] - m.ambient[c]),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn pure_y_ramp_mostly_moves_the_y_channel() {
        // Channel separation: cross-talk stays bounded by the specular mix.
        let m = IlluminationModel::default();
        let base = m.channel_values(0.0, 0.0, 1.0);
        let mut max_dx = 0.0f64;
        let mut max_dy = 0.0f64;
        for i in -40..=40 {
            let sy = i as f64 / 100.0;
            let v = m.channel_values(0.0, sy, 1.0);
            max_dx = max_dx.max((v[0] - base[0]).abs()).max((v[1] - base[1]).abs());
            max_dy = max_dy.max((v[2] - base[2]).abs());
        }
        assert!(
            max_dx <= m.specular_mix * max_dy + 2.0 / 255.0,
            "x-channel cross-talk {max_dx} exceeds bound ({max_dy} on y)"
        );
    }

    #[test]
    fn shade_is_monotone_toward_the_light_over_working_range() {
        let m = IlluminationModel::default();
        let light = &m.lights[0]; // R from +x
        let mut prev = -1.0;
        for i in 0..=100 {
            // Slope facing the +x light (negative sx tips the normal to +x).
            let s = -(i as f64) / 100.0;
            let v = m.shade(light, s, 0.0);
            assert!(
                v >= prev - 1e-12,
                "shade not monotone at slope {s}: {v} < {prev}"
            );
            prev = v;
        }
    }
}
