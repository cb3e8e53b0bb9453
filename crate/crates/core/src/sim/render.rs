//! Frame renderer.
//!
//! Pixels are shaded from the local slope of the deformation height field
//! measured along the image axes, in physical (arc-length) units. The map
//! from pixels to surface points is fixed by the camera and surface, so it
//! is precomputed once; per-frame work is confined to the contact region.

use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{Point3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::sim::camera::CameraModel;
use crate::sim::probe::{DisplacementField, ZeroField};
use crate::sim::shading::IlluminationModel;
use crate::surface::FingertipSurface;

/// One RGB frame from the (simulated or streamed) sensor camera.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB, `width * height * 3` bytes.
    pub pixels: Vec<u8>,
    /// Monotonic capture time, nanoseconds.
    pub timestamp_ns: u64,
    pub sequence: u64,
}

impl SensorFrame {
    pub fn new(width: u32, height: u32) -> Self {
        SensorFrame {
            width,
            height,
            pixels: vec![0; (width * height * 3) as usize],
            timestamp_ns: 0,
            sequence: 0,
        }
    }

    #[inline]
    pub fn rgb(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// 2x box-filter downsample (each output pixel averages a 2x2 block).
    pub fn downsample2(&self) -> SensorFrame {
        let w = self.width / 2;
        let h = self.height / 2;
        let mut out = SensorFrame::new(w, h);
        out.timestamp_ns = self.timestamp_ns;
        out.sequence = self.sequence;
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    let mut acc = 0u32;
                    for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        let i = (((2 * y + dy) * self.width + 2 * x + dx) * 3) as usize;
                        acc += self.pixels[i + c] as u32;
                    }
                    out.pixels[((y * w + x) * 3) as usize + c] = ((acc + 2) / 4) as u8;
                }
            }
        }
        out
    }
}

/// Everything the synthetic sensor needs.
#[derive(Debug, Clone)]
pub struct SimulatorConfig {
    pub surface: FingertipSurface,
    pub camera: CameraModel,
    pub illumination: IlluminationModel,
    pub gel_thickness: f64,
    /// Gaussian pixel noise sigma as a fraction of full scale; 0 disables.
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

impl SimulatorConfig {
    /// Default scenario: the sensing pad is the annulus of the cap between
    /// 5 and 50 degrees from the apex, observed by a wide-FOV pinhole at
    /// the cap's center of curvature. This keeps every sensed point close
    /// to frontal for the camera, which a single pinhole requires.
    pub fn default_scenario() -> Result<Self> {
        let surface = FingertipSurface::new(10.0, 15.0)?
            .with_sector_deg(360.0)?
            .with_cap_window_deg(5.0, 50.0)?;
        let pose = nalgebra::Isometry3::translation(0.0, 0.0, -surface.length());
        let camera = CameraModel::new(195.0, (640, 480), (320.0, 240.0), pose)?;
        Ok(SimulatorConfig {
            surface,
            camera,
            illumination: IlluminationModel::default(),
            gel_thickness: 2.5,
            noise_sigma: 0.0,
            noise_seed: 0,
        })
    }
}

impl FingertipSurface {
    /// Restricts the sensed window to the cap annulus between the given
    /// apex-polar angles (degrees, 0 at the apex, 90 at the equator).
    pub fn with_cap_window_deg(self, psi_min_deg: f64, psi_max_deg: f64) -> Result<Self> {
        if !(psi_min_deg >= 0.0 && psi_min_deg < psi_max_deg && psi_max_deg <= 90.0) {
            return Err(crate::error::Error::invalid_parameter(format!(
                "cap window requires 0 <= min < max <= 90 degrees, got ({psi_min_deg}, {psi_max_deg})"
            )));
        }
        let meridian = self.meridian_length();
        let s_of_psi =
            |psi: f64| self.length() + self.radius() * (90.0 - psi).to_radians();
        let u_lo = s_of_psi(psi_max_deg) / meridian;
        let u_hi = s_of_psi(psi_min_deg) / meridian;
        self.with_sensed_u(u_lo, u_hi)
    }
}

/// Precomputed pixel-to-surface correspondence.
struct PixelSite {
    point: Point3<f64>,
    normal: Vector3<f64>,
    /// Reciprocal arc lengths for the x/y slope stencils, 1/mm.
    inv_arc_x: f64,
    inv_arc_y: f64,
    piping: f64,
}

struct RenderMap {
    width: u32,
    height: u32,
    sites: Vec<Option<PixelSite>>,
}

impl RenderMap {
    fn build(config: &SimulatorConfig) -> Self {
        let (w, h) = config.camera.resolution;
        let mut hits: Vec<Option<(Point3<f64>, Vector3<f64>, f64, f64)>> =
            Vec::with_capacity((w * h) as usize);
        for y in 0..h {
            for x in 0..w {
                let (o, d) = config.camera.ray(x as f64, y as f64);
                hits.push(config.surface.intersect_ray(&o, &d).map(|s| {
                    (s.point, s.normal.into_inner(), s.u, s.v)
                }));
            }
        }
        let idx = |x: i64, y: i64| -> Option<usize> {
            if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
                None
            } else {
                Some((y as u32 * w + x as u32) as usize)
            }
        };
        let point_at = |x: i64, y: i64| -> Option<Point3<f64>> {
            idx(x, y).and_then(|i| hits[i].as_ref().map(|(p, ..)| *p))
        };
        let (u_lo, u_hi) = config.surface.sensed_u();
        let (sec0, sec1) = config.surface.sector();
        let mut sites = Vec::with_capacity((w * h) as usize);
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let Some((point, normal, u, v)) = hits[idx(x, y).unwrap()] else {
                    sites.push(None);
                    continue;
                };
                // Neighbor span along each image axis; one-sided at edges.
                let span = |a: Option<Point3<f64>>, b: Option<Point3<f64>>| -> f64 {
                    match (a, b) {
                        (Some(a), Some(b)) => (b - a).norm(),
                        (Some(a), None) => 2.0 * (point - a).norm(),
                        (None, Some(b)) => 2.0 * (b - point).norm(),
                        (None, None) => 0.0,
                    }
                };
                let arc_x = span(point_at(x - 1, y), point_at(x + 1, y));
                let arc_y = span(point_at(x, y - 1), point_at(x, y + 1));
                let fu = ((u - u_lo) / (u_hi - u_lo)).clamp(0.0, 1.0);
                let theta = sec0 + v * (sec1 - sec0);
                sites.push(Some(PixelSite {
                    point,
                    normal,
                    inv_arc_x: if arc_x > 1e-12 { 1.0 / arc_x } else { 0.0 },
                    inv_arc_y: if arc_y > 1e-12 { 1.0 / arc_y } else { 0.0 },
                    piping: config.illumination.piping_factor(fu, theta),
                }));
            }
        }
        RenderMap {
            width: w,
            height: h,
            sites,
        }
    }
}

/// Synthetic sensor.
pub struct Simulator {
    config: SimulatorConfig,
    map: RenderMap,
    flat: OnceLock<SensorFrame>,
    epoch: Instant,
}

impl Simulator {
    pub fn new(config: SimulatorConfig) -> Result<Self> {
        config.illumination.validate()?;
        if !config.camera.fov_consistent() {
            return Err(crate::error::Error::invalid_parameter(
                "camera fov inconsistent with focal length and resolution",
            ));
        }
        let map = RenderMap::build(&config);
        Ok(Simulator {
            config,
            map,
            flat: OnceLock::new(),
            epoch: Instant::now(),
        })
    }

    pub fn with_default_scenario() -> Result<Self> {
        Simulator::new(SimulatorConfig::default_scenario()?)
    }

    pub fn config(&self) -> &SimulatorConfig {
        &self.config
    }

    pub fn surface(&self) -> &FingertipSurface {
        &self.config.surface
    }

    pub fn camera(&self) -> &CameraModel {
        &self.config.camera
    }

    fn now_ns(&self) -> u64 {
        self.epoch.elapsed().as_nanos() as u64
    }

    /// The no-contact frame (cached pixel content).
    pub fn reference_frame(&self) -> SensorFrame {
        let mut f = self
            .flat
            .get_or_init(|| self.render_full(&ZeroField, 0))
            .clone();
        f.timestamp_ns = self.now_ns();
        f
    }

    /// Renders the sensor under `field`. Identical inputs produce
    /// bit-identical pixels.
    pub fn render(&self, field: &dyn DisplacementField, sequence: u64) -> SensorFrame {
        let mut frame = self
            .flat
            .get_or_init(|| self.render_full(&ZeroField, 0))
            .clone();
        frame.sequence = sequence;
        frame.timestamp_ns = self.now_ns();
        let Some((x0, y0, x1, y1)) = self.roi(field) else {
            return frame;
        };
        self.shade_region(&mut frame, field, sequence, x0, y0, x1, y1);
        frame
    }

    fn render_full(&self, field: &dyn DisplacementField, sequence: u64) -> SensorFrame {
        let mut frame = SensorFrame::new(self.map.width, self.map.height);
        frame.sequence = sequence;
        self.shade_region(
            &mut frame,
            field,
            sequence,
            0,
            0,
            self.map.width as i64,
            self.map.height as i64,
        );
        frame
    }

    /// Image-space bounding box of the field's reach, padded for the
    /// finite-difference stencil. `None` when nothing is touched.
    fn roi(&self, field: &dyn DisplacementField) -> Option<(i64, i64, i64, i64)> {
        let (w, h) = (self.map.width as i64, self.map.height as i64);
        let Some(bounds) = field.bounds() else {
            return Some((0, 0, w, h));
        };
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut behind = false;
        for c in bounds.corners() {
            match self.config.camera.project(&c) {
                Ok((x, y)) => {
                    lo.0 = lo.0.min(x);
                    lo.1 = lo.1.min(y);
                    hi.0 = hi.0.max(x);
                    hi.1 = hi.1.max(y);
                }
                Err(_) => behind = true,
            }
        }
        if behind {
            return Some((0, 0, w, h));
        }
        // The projection of the bound's corners does not bound the
        // projection of a volume that wraps around the camera; padding by
        // the box diagonal in pixels covers the curved-surface footprint.
        let pad = 8.0
            + self.config.camera.focal * (bounds.max - bounds.min).norm()
                / (self.config.surface.radius());
        let x0 = ((lo.0 - pad).floor() as i64).clamp(0, w);
        let y0 = ((lo.1 - pad).floor() as i64).clamp(0, h);
        let x1 = ((hi.0 + pad).ceil() as i64 + 1).clamp(0, w);
        let y1 = ((hi.1 + pad).ceil() as i64 + 1).clamp(0, h);
        if x0 >= x1 || y0 >= y1 {
            None
        } else {
            Some((x0, y0, x1, y1))
        }
    }

    fn shade_region(
        &self,
        frame: &mut SensorFrame,
        field: &dyn DisplacementField,
        sequence: u64,
        x0: i64,
        y0: i64,
        x1: i64,
        y1: i64,
    ) {
        let w = self.map.width as i64;
        // Displacement buffer over the padded region (stencil margin 1).
        let bw = (x1 - x0 + 2) as usize;
        let bh = (y1 - y0 + 2) as usize;
        let mut hbuf = vec![0.0f64; bw * bh];
        for by in 0..bh {
            let y = y0 - 1 + by as i64;
            if y < 0 || y >= self.map.height as i64 {
                continue;
            }
            for bx in 0..bw {
                let x = x0 - 1 + bx as i64;
                if x < 0 || x >= w {
                    continue;
                }
                if let Some(site) = &self.map.sites[(y * w + x) as usize] {
                    let d = field.displacement(&site.point, &site.normal);
                    hbuf[by * bw + bx] = d.clamp(0.0, self.config.gel_thickness);
                }
            }
        }
        let mut noise = if self.config.noise_sigma > 0.0 {
            let rng = ChaCha8Rng::seed_from_u64(self.config.noise_seed ^ sequence);
            let normal = Normal::new(0.0, self.config.noise_sigma).unwrap();
            Some((rng, normal))
        } else {
            None
        };
        for y in y0..y1 {
            for x in x0..x1 {
                let Some(site) = &self.map.sites[(y * w + x) as usize] else {
                    continue;
                };
                let bx = (x - x0 + 1) as usize;
                let by = (y - y0 + 1) as usize;
                let sx = (hbuf[by * bw + bx + 1] - hbuf[by * bw + bx - 1]) * site.inv_arc_x;
                let sy = (hbuf[(by + 1) * bw + bx] - hbuf[(by - 1) * bw + bx]) * site.inv_arc_y;
                let mut v = self
                    .config
                    .illumination
                    .channel_values(sx, sy, site.piping);
                if let Some((rng, normal)) = &mut noise {
                    for c in v.iter_mut() {
                        *c += normal.sample(rng);
                    }
                }
                let i = ((y * w + x) * 3) as usize;
                for c in 0..3 {
                    frame.pixels[i + c] = (v[c].clamp(0.0, 1.0) * 255.0).round() as u8;
                }
            }
        }
        let _ = sequence;
    }

    /// Ground-truth maximum displacement of a field over the visible
    /// surface, used by the rolling simulation.
    pub fn peak_displacement(&self, field: &dyn DisplacementField) -> f64 {
        let Some((x0, y0, x1, y1)) = self.roi(field) else {
            return 0.0;
        };
        let w = self.map.width as i64;
        let mut peak = 0.0f64;
        for y in y0..y1 {
            for x in x0..x1 {
                if let Some(site) = &self.map.sites[(y * w + x) as usize] {
                    peak = peak.max(field.displacement(&site.point, &site.normal));
                }
            }
        }
        peak.min(self.config.gel_thickness)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::probe::{simulate_poke, SphereProbe};

    fn sim() -> Simulator {
        Simulator::with_default_scenario().unwrap()
    }

    #[test]
    fn zero_displacement_renders_the_reference_frame() {
        let s = sim();
        let reference = s.reference_frame();
        let rendered = s.render(&ZeroField, 7);
        assert_eq!(reference.pixels, rendered.pixels);
        assert_eq!(rendered.sequence, 7);
    }

    #[test]
    fn rendering_is_deterministic() {
        let s = sim();
        let target = s.surface().sample(0.85, 0.45);
        let (probe, _) = simulate_poke(&target, 2.0, 0.7);
        let a = s.render(&probe, 1);
        let b = s.render(&probe, 1);
        assert_eq!(a.pixels, b.pixels);
    }

    #[test]
    fn noisy_rendering_is_seed_deterministic() {
        let mut config = SimulatorConfig::default_scenario().unwrap();
        config.noise_sigma = 2.0 / 255.0;
        config.noise_seed = 42;
        let s = Simulator::new(config).unwrap();
        let target = s.surface().sample(0.85, 0.45);
        let (probe, _) = simulate_poke(&target, 2.0, 0.7);
        let a = s.render(&probe, 3);
        let b = s.render(&probe, 3);
        assert_eq!(a.pixels, b.pixels);
        let c = s.render(&probe, 4); // different sequence, different noise
        assert_ne!(a.pixels, c.pixels);
    }

    #[test]
    fn poke_brightens_x_pair_symmetrically_and_y_asymmetrically() {
        let s = sim();
        let reference = s.reference_frame();
        // Poke on the theta = 0 meridian so the contact footprint is
        // mirror-symmetric about the image x axis through its center.
        let target = s.surface().sample(0.85, 0.5);
        let (probe, contact) = simulate_poke(&target, 2.0, 0.8);
        assert!(contact);
        let frame = s.render(&probe, 1);
        let (cx, cy) = s.camera().project(&target.point).unwrap();
        let (cx, cy) = (cx.round() as i64, cy.round() as i64);
        let diff = |x: i64, y: i64, c: usize| -> f64 {
            let i = ((y as u32 * frame.width + x as u32) * 3) as usize + c;
            frame.pixels[i] as f64 - reference.pixels[i] as f64
        };
        let mut asym_xpair = 0.0f64;
        let mut asym_y = 0.0f64;
        let mut max_mag = 0.0f64;
        for dy in -20..=20i64 {
            for dx in -20..=20i64 {
                // Sum of the two x-channel responses mirrored across y.
                let xpair_here = diff(cx + dx, cy + dy, 0) + diff(cx + dx, cy + dy, 1);
                let xpair_mirr = diff(cx + dx, cy - dy, 0) + diff(cx + dx, cy - dy, 1);
                asym_xpair = asym_xpair.max((xpair_here - xpair_mirr).abs());
                let y_here = diff(cx + dx, cy + dy, 2);
                let y_mirr = diff(cx + dx, cy - dy, 2);
                asym_y = asym_y.max((y_here - y_mirr).abs());
                max_mag = max_mag.max(xpair_here.abs()).max(y_here.abs());
            }
        }
        assert!(max_mag > 20.0, "poke barely changed the image: {max_mag}");
        // The x-channel pair is symmetric in y up to shading second order;
        // the single y light is strongly one-sided.
        assert!(
            asym_xpair < 0.25 * asym_y,
            "x-pair asymmetry {asym_xpair} vs y asymmetry {asym_y}"
        );
    }

    #[test]
    fn deeper_pokes_never_dim_lit_pixels_in_cap_model() {
        // Exact monotonicity on the analytic cap field: at a fixed in-plane
        // position, the channel lit toward the indentation never dims as
        // depth grows (pre-quantization).
        let m = crate::sim::shading::IlluminationModel::default();
        let depths = [0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4];
        for i in 1..=30 {
            let rho = i as f64 * 0.06; // fixed radial position, mm
            let mut prev_r = -1.0f64; // +x side faces the R light
            let mut prev_b = -1.0f64; // +y side faces the B light
            for &d in &depths {
                let rc = SphereProbe::flat_contact_radius(2.0, d);
                let slope = if rho < rc {
                    SphereProbe::cap_slope(2.0, rho)
                } else {
                    0.0
                };
                // Height decreases outward: gradient points inward.
                let vr = m.channel_values(-slope, 0.0, 1.0)[0];
                let vb = m.channel_values(0.0, -slope, 1.0)[2];
                assert!(vr >= prev_r - 1e-12, "R dimmed at rho={rho}, d={d}");
                assert!(vb >= prev_b - 1e-12, "B dimmed at rho={rho}, d={d}");
                prev_r = vr;
                prev_b = vb;
            }
        }
    }

    #[test]
    fn deeper_pokes_keep_lit_pixels_bright_in_render() {
        // On the curved surface the probe advance shifts local slopes a
        // little, so rendered pixels may wobble; they must not collapse.
        let s = sim();
        let reference = s.reference_frame();
        let target = s.surface().sample(0.86, 0.3);
        let depths = [0.3, 0.6, 0.9, 1.2];
        let frames: Vec<_> = depths
            .iter()
            .map(|&d| {
                let (probe, _) = simulate_poke(&target, 2.0, d);
                s.render(&probe, 1)
            })
            .collect();
        let mut checked = 0usize;
        let mut collapsed = 0usize;
        for i in (0..reference.pixels.len()).step_by(7) {
            let d0 = frames[0].pixels[i] as i32 - reference.pixels[i] as i32;
            if d0 <= 25 {
                continue;
            }
            checked += 1;
            if frames[1..].iter().any(|f| {
                (f.pixels[i] as i32 - reference.pixels[i] as i32) < d0 / 4
            }) {
                collapsed += 1;
            }
        }
        assert!(checked > 50, "too few lit pixels checked: {checked}");
        assert!(
            collapsed * 50 <= checked,
            "{collapsed} of {checked} lit pixels collapsed as depth grew"
        );
    }
}
