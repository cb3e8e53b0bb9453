//! Sensor calibration: 2D-3D correspondence and RGB-to-gradient tables.
//!
//! The rig pokes the sensor with a known sphere on a schedule. Vertex pokes
//! locate every quad corner in image space, giving per-quad perspective
//! transforms and the reference point cloud. Gradient pokes then pair each
//! in-contact pixel's difference RGB with the analytic spherical-cap
//! gradient at that pixel, building one lookup table per quad.

pub mod bundle;
pub mod homography;
pub mod hough;
pub mod lut;

pub use bundle::{CalibrationBundle, QuadCalibration, ReferenceCloud};
pub use homography::{homography_from_4pt, Homography};
pub use hough::{detect_circle, CircleDetection, HoughConfig};
pub use lut::{LookupTable, LutBuilder, RgbQuantizer};

use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sim::probe::{simulate_poke, SphereProbe};
use crate::sim::{SensorFrame, Simulator};
use crate::surface::{project_grid, tessellate, SurfaceMesh};

#[derive(Debug, Clone)]
pub struct CalibrationConfig {
    pub n_u: usize,
    pub n_v: usize,
    pub probe_radius: f64,
    pub vertex_poke_depth: f64,
    pub gradient_pokes_per_quad: usize,
    /// Cycled over the gradient pokes so the tables cover the slope range
    /// of every working depth.
    pub gradient_depths: Vec<f64>,
    pub quantizer: RgbQuantizer,
    pub knn: usize,
    pub mask_threshold: f64,
    pub seed: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            n_u: 6,
            n_v: 4,
            probe_radius: 2.0,
            vertex_poke_depth: 0.5,
            gradient_pokes_per_quad: 5,
            gradient_depths: vec![0.4, 0.7, 1.0, 1.3, 1.5],
            quantizer: RgbQuantizer::default(),
            knn: 4,
            mask_threshold: 12.0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PokeKind {
    /// Correspondence poke at quad vertex `(iu, iv)`.
    Vertex { iu: usize, iv: usize },
    /// Table-building poke inside a quad.
    Gradient { quad_id: usize, index: usize },
}

#[derive(Debug, Clone)]
pub struct PokeTarget {
    pub kind: PokeKind,
    pub u: f64,
    pub v: f64,
    pub point: Point3<f64>,
    pub depth: f64,
}

/// One executed poke.
#[derive(Debug, Clone)]
pub struct PokeRecord {
    pub target: PokeTarget,
    pub frame: SensorFrame,
    pub detection: CircleDetection,
    /// Quad containing the detected center (reassigned if the poke drifted
    /// out of its commanded quad).
    pub quad_id: Option<usize>,
}

/// Poke schedule: every quad vertex once for correspondence, then
/// `per_quad` jittered interior pokes per quad for the gradient tables.
/// All targets lie on the analytic surface; approach is along the normal.
pub fn plan_poke_schedule(
    mesh: &SurfaceMesh,
    per_quad: usize,
    config: &CalibrationConfig,
) -> Result<Vec<PokeTarget>> {
    if per_quad == 0 {
        return Err(Error::invalid_parameter("per_quad must be >= 1"));
    }
    let mut targets = Vec::new();
    for iu in 0..=mesh.n_u {
        for iv in 0..=mesh.n_v {
            let [u, v] = mesh.vertex_uv(iu, iv);
            targets.push(PokeTarget {
                kind: PokeKind::Vertex { iu, iv },
                u,
                v,
                point: mesh.surface.point_at(u, v),
                depth: config.vertex_poke_depth,
            });
        }
    }
    for quad in &mesh.quads {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (quad.id as u64).wrapping_mul(0x9e3779b97f4a7c15));
        let (u0, u1) = quad.u_range();
        let (v0, v1) = quad.v_range();
        for index in 0..per_quad {
            let fu = 0.2 + 0.6 * rng.random::<f64>();
            let fv = 0.2 + 0.6 * rng.random::<f64>();
            let u = u0 + fu * (u1 - u0);
            let v = v0 + fv * (v1 - v0);
            targets.push(PokeTarget {
                kind: PokeKind::Gradient {
                    quad_id: quad.id,
                    index,
                },
                u,
                v,
                point: mesh.surface.point_at(u, v),
                depth: config.gradient_depths[index % config.gradient_depths.len()],
            });
        }
    }
    Ok(targets)
}

/// Builds per-quad homographies and the reference point cloud from the
/// vertex poke detections.
pub fn build_correspondence(
    vertex_pokes: &[PokeRecord],
    mesh: &SurfaceMesh,
) -> Result<(Vec<QuadCalibration>, ReferenceCloud)> {
    let mut detected = vec![None; (mesh.n_u + 1) * (mesh.n_v + 1)];
    for rec in vertex_pokes {
        if let PokeKind::Vertex { iu, iv } = rec.target.kind {
            detected[iu * (mesh.n_v + 1) + iv] = Some([rec.detection.cx, rec.detection.cy]);
        }
    }
    let vertex_px = |iu: usize, iv: usize| -> Result<[f64; 2]> {
        detected[iu * (mesh.n_v + 1) + iv].ok_or(Error::CalibrationIncomplete { iu, iv })
    };

    let mut quads = Vec::with_capacity(mesh.quads.len());
    for quad in &mesh.quads {
        let iu = quad.id / mesh.n_v;
        let iv = quad.id % mesh.n_v;
        // Image corners in the quad's corner order.
        let img = [
            vertex_px(iu, iv)?,
            vertex_px(iu, iv + 1)?,
            vertex_px(iu + 1, iv + 1)?,
            vertex_px(iu + 1, iv)?,
        ];
        let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let rows = dist(img[0], img[3]).max(dist(img[1], img[2])).round().max(2.0) as usize;
        let cols = dist(img[0], img[1]).max(dist(img[3], img[2])).round().max(2.0) as usize;
        let rect = [
            [0.0, 0.0],
            [(cols - 1) as f64, 0.0],
            [(cols - 1) as f64, (rows - 1) as f64],
            [0.0, (rows - 1) as f64],
        ];
        let homography = homography_from_4pt(&img, &rect)?;
        if !homography.is_invertible() {
            return Err(Error::invalid_input(format!(
                "quad {} homography is singular",
                quad.id
            )));
        }
        quads.push(QuadCalibration {
            quad_id: quad.id,
            homography,
            rect_rows: rows,
            rect_cols: cols,
            corners_img: img,
        });
    }

    let cloud = build_reference_cloud(mesh, &quads)?;
    Ok((quads, cloud))
}

pub(crate) fn build_reference_cloud(
    mesh: &SurfaceMesh,
    quads: &[QuadCalibration],
) -> Result<ReferenceCloud> {
    let mut cloud = ReferenceCloud::default();
    cloud.quad_offsets.push(0);
    for qc in quads {
        let grid = project_grid(&mesh.surface, &mesh.quads[qc.quad_id], qc.rect_rows, qc.rect_cols)?;
        cloud.points.extend_from_slice(&grid.points);
        cloud.normals.extend_from_slice(&grid.normals);
        cloud.uv.extend_from_slice(&grid.uv);
        cloud
            .quad_ids
            .extend(std::iter::repeat(qc.quad_id as u16).take(grid.points.len()));
        cloud.quad_offsets.push(cloud.points.len());
    }
    Ok(cloud)
}

/// Maps every pixel of the calibration image to its containing quad
/// (first match in id order; -1 where no quad claims the pixel).
pub fn pixel_quad_map(
    quads: &[QuadCalibration],
    width: u32,
    height: u32,
    scale: f64,
) -> Vec<i16> {
    // Bounding boxes in the target resolution to skip far quads quickly.
    let boxes: Vec<(f64, f64, f64, f64)> = quads
        .iter()
        .map(|q| {
            let (mut x0, mut y0, mut x1, mut y1) =
                (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
            for c in &q.corners_img {
                x0 = x0.min(c[0] / scale);
                y0 = y0.min(c[1] / scale);
                x1 = x1.max(c[0] / scale);
                y1 = y1.max(c[1] / scale);
            }
            (x0 - 2.0, y0 - 2.0, x1 + 2.0, y1 + 2.0)
        })
        .collect();
    let mut map = vec![-1i16; (width * height) as usize];
    for y in 0..height {
        for x in 0..width {
            let px = x as f64;
            let py = y as f64;
            for (qi, q) in quads.iter().enumerate() {
                let b = boxes[qi];
                if px < b.0 || px > b.2 || py < b.1 || py > b.3 {
                    continue;
                }
                let (rx, ry) = q.homography.apply(px * scale, py * scale);
                if rx >= -0.5
                    && ry >= -0.5
                    && rx < q.rect_cols as f64 - 0.5
                    && ry < q.rect_rows as f64 - 0.5
                {
                    map[(y * width + x) as usize] = q.quad_id as i16;
                    break;
                }
            }
        }
    }
    map
}

/// Accumulates one gradient poke into the per-quad table builders.
///
/// The analytic model pairs each in-contact pixel with the spherical-cap
/// gradient at its estimated physical radius; the scale comes from the
/// detected contact circle and the known probe geometry.
pub fn accumulate_gradient_poke(
    builders: &mut [LutBuilder],
    record: &PokeRecord,
    reference: &SensorFrame,
    probe_radius: f64,
    quantizer: &RgbQuantizer,
    quad_map: &[i16],
) {
    let det = &record.detection;
    let depth = record.target.depth;
    let rc_mm = SphereProbe::flat_contact_radius(probe_radius, depth);
    if rc_mm <= 0.0 || det.radius <= 0.0 {
        return;
    }
    let mm_per_px = rc_mm / det.radius;
    let w = record.frame.width as i64;
    let h = record.frame.height as i64;
    let r_px = det.radius * 0.98;
    let x0 = ((det.cx - r_px).floor() as i64).clamp(0, w - 1);
    let x1 = ((det.cx + r_px).ceil() as i64).clamp(0, w - 1);
    let y0 = ((det.cy - r_px).floor() as i64).clamp(0, h - 1);
    let y1 = ((det.cy + r_px).ceil() as i64).clamp(0, h - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = x as f64 - det.cx;
            let dy = y as f64 - det.cy;
            let rho_px = (dx * dx + dy * dy).sqrt();
            if rho_px > r_px {
                continue;
            }
            let quad = quad_map[(y * w + x) as usize];
            if quad < 0 {
                continue;
            }
            let i = ((y * w + x) * 3) as usize;
            let diff = [
                record.frame.pixels[i] as f32 - reference.pixels[i] as f32,
                record.frame.pixels[i + 1] as f32 - reference.pixels[i + 1] as f32,
                record.frame.pixels[i + 2] as f32 - reference.pixels[i + 2] as f32,
            ];
            let key = quantizer.key(diff);
            let rho_mm = (mm_per_px * rho_px).min(rc_mm * 0.999);
            let slope = SphereProbe::cap_slope(probe_radius, rho_mm);
            // Height falls off outward, so the gradient points inward.
            let (gx, gy) = if rho_px > 1e-9 {
                (-slope * dx / rho_px, -slope * dy / rho_px)
            } else {
                (0.0, 0.0)
            };
            builders[quad as usize].add(key, gx, gy);
        }
    }
}

/// Builds all per-quad lookup tables from a batch of gradient pokes.
pub fn build_lookup_tables(
    gradient_pokes: &[PokeRecord],
    reference: &SensorFrame,
    probe_radius: f64,
    quads: &[QuadCalibration],
    quantizer: &RgbQuantizer,
    knn: usize,
) -> Result<Vec<LookupTable>> {
    let mut builders = vec![LutBuilder::new(); quads.len()];
    let quad_map = pixel_quad_map(quads, reference.width, reference.height, 1.0);
    for rec in gradient_pokes {
        accumulate_gradient_poke(&mut builders, rec, reference, probe_radius, quantizer, &quad_map);
    }
    builders
        .iter()
        .enumerate()
        .map(|(qi, b)| b.finalize(qi, *quantizer, knn))
        .collect()
}

/// Looks up a gradient through a bundle's tables (exact hit or k-NN blend).
pub fn lookup_gradient(
    diff_rgb: [f32; 3],
    quad_id: usize,
    tables: &[LookupTable],
) -> Result<(f32, f32)> {
    let table = tables.get(quad_id).ok_or(Error::TableMissing(quad_id))?;
    if table.is_empty() {
        return Err(Error::TableMissing(quad_id));
    }
    Ok(table.gradient(table.quantizer.key(diff_rgb)))
}

#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct CalibrationReport {
    pub vertex_pokes: usize,
    pub gradient_pokes: usize,
    pub detection_failures: Vec<String>,
    pub per_quad_table_keys: Vec<usize>,
    pub per_quad_rect_sizes: Vec<(usize, usize)>,
    pub reference_cloud_points: usize,
}

/// Runs the full calibration against the simulated sensor.
pub fn run_calibration(
    sim: &Simulator,
    config: &CalibrationConfig,
) -> Result<(CalibrationBundle, CalibrationReport)> {
    let mesh = tessellate(sim.surface(), config.n_u, config.n_v)?;
    let mut reference = sim.reference_frame();
    reference.timestamp_ns = 0;
    reference.sequence = 0;
    let schedule = plan_poke_schedule(&mesh, config.gradient_pokes_per_quad, config)?;

    let mut report = CalibrationReport::default();
    let mut seq = 1u64;

    // Expected contact radius in pixels at a target, for the Hough range.
    let expected_radius_px = |target: &PokeTarget| -> f64 {
        let rc = SphereProbe::flat_contact_radius(config.probe_radius, target.depth);
        let s = sim.surface().sample(target.u, target.v);
        let eps = 0.05; // mm along each tangent
        let scale = |t: nalgebra::Vector3<f64>| -> f64 {
            let a = sim.camera().project(&s.point);
            let b = sim.camera().project(&(s.point + eps * t));
            match (a, b) {
                (Ok((ax, ay)), Ok((bx, by))) => {
                    ((bx - ax).powi(2) + (by - ay).powi(2)).sqrt() / eps
                }
                _ => 20.0,
            }
        };
        let su = scale(s.tangent_u.into_inner());
        let sv = scale(s.tangent_v.into_inner());
        rc * (su * sv).sqrt()
    };

    let poke_record = |target: &PokeTarget, seq: u64| -> Result<PokeRecord> {
        let sample = sim.surface().sample(target.u, target.v);
        let (probe, _contact) = simulate_poke(&sample, config.probe_radius, target.depth);
        let frame = sim.render(&probe, seq);
        let mut hough = HoughConfig::around_radius(expected_radius_px(target));
        hough.mask_threshold = config.mask_threshold;
        let detection = detect_circle(&frame, &reference, &hough)?;
        Ok(PokeRecord {
            target: target.clone(),
            frame,
            detection,
            quad_id: None,
        })
    };

    // Stage 1: vertex pokes and correspondence.
    let mut vertex_records = Vec::new();
    for target in schedule.iter().filter(|t| matches!(t.kind, PokeKind::Vertex { .. })) {
        report.vertex_pokes += 1;
        match poke_record(target, seq) {
            Ok(rec) => vertex_records.push(rec),
            Err(Error::NoContact) => {
                if let PokeKind::Vertex { iu, iv } = target.kind {
                    return Err(Error::CalibrationIncomplete { iu, iv });
                }
            }
            Err(e) => return Err(e),
        }
        seq += 1;
    }
    let (quads, cloud) = build_correspondence(&vertex_records, &mesh)?;
    drop(vertex_records);
    report.per_quad_rect_sizes = quads.iter().map(|q| (q.rect_rows, q.rect_cols)).collect();
    report.reference_cloud_points = cloud.points.len();

    // Stage 2: gradient pokes, accumulated streaming.
    let quad_map = pixel_quad_map(&quads, reference.width, reference.height, 1.0);
    let mut builders = vec![LutBuilder::new(); quads.len()];
    for target in schedule.iter().filter(|t| matches!(t.kind, PokeKind::Gradient { .. })) {
        report.gradient_pokes += 1;
        match poke_record(target, seq) {
            Ok(mut rec) => {
                let px = (rec.detection.cx.round() as i64)
                    .clamp(0, reference.width as i64 - 1);
                let py = (rec.detection.cy.round() as i64)
                    .clamp(0, reference.height as i64 - 1);
                let qid = quad_map[(py * reference.width as i64 + px) as usize];
                rec.quad_id = (qid >= 0).then_some(qid as usize);
                accumulate_gradient_poke(
                    &mut builders,
                    &rec,
                    &reference,
                    config.probe_radius,
                    &config.quantizer,
                    &quad_map,
                );
            }
            Err(Error::NoContact) => {
                report
                    .detection_failures
                    .push(format!("gradient poke at u={:.3} v={:.3}", target.u, target.v));
            }
            Err(e) => return Err(e),
        }
        seq += 1;
    }
    let luts: Vec<LookupTable> = builders
        .iter()
        .enumerate()
        .map(|(qi, b)| b.finalize(qi, config.quantizer, config.knn))
        .collect::<Result<_>>()?;
    report.per_quad_table_keys = luts.iter().map(|t| t.len()).collect();

    let bundle = CalibrationBundle::assemble(
        sim.surface().clone(),
        config.n_u,
        config.n_v,
        reference,
        quads,
        luts,
        config.quantizer,
        config.knn,
        config.probe_radius,
        mesh,
        cloud,
    );
    Ok((bundle, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimulatorConfig;

    #[test]
    fn schedule_counts_match_tessellation() {
        let sim = Simulator::with_default_scenario().unwrap();
        let mesh = tessellate(sim.surface(), 6, 4).unwrap();
        let config = CalibrationConfig::default();
        let schedule = plan_poke_schedule(&mesh, 5, &config).unwrap();
        let vertex = schedule
            .iter()
            .filter(|t| matches!(t.kind, PokeKind::Vertex { .. }))
            .count();
        let gradient = schedule
            .iter()
            .filter(|t| matches!(t.kind, PokeKind::Gradient { .. }))
            .count();
        assert_eq!(vertex, 35);
        assert_eq!(gradient, 120);
        // All targets lie on the analytic surface.
        for t in &schedule {
            assert!(sim.surface().signed_distance(&t.point).abs() < 1e-9);
        }
    }

    #[test]
    fn schedule_is_deterministic() {
        let sim = Simulator::with_default_scenario().unwrap();
        let mesh = tessellate(sim.surface(), 6, 4).unwrap();
        let config = CalibrationConfig::default();
        let a = plan_poke_schedule(&mesh, 5, &config).unwrap();
        let b = plan_poke_schedule(&mesh, 5, &config).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.point, y.point);
            assert_eq!(x.depth, y.depth);
        }
    }

    #[test]
    fn correspondence_from_simulated_camera() {
        // Homographies built from ideal (projected) corner detections
        // rectify quad centers to the rectified patch centers.
        let sim = Simulator::with_default_scenario().unwrap();
        let mesh = tessellate(sim.surface(), 6, 4).unwrap();
        let mut records = Vec::new();
        for iu in 0..=mesh.n_u {
            for iv in 0..=mesh.n_v {
                let [u, v] = mesh.vertex_uv(iu, iv);
                let p = sim.surface().point_at(u, v);
                let (cx, cy) = sim.camera().project(&p).unwrap();
                records.push(PokeRecord {
                    target: PokeTarget {
                        kind: PokeKind::Vertex { iu, iv },
                        u,
                        v,
                        point: p,
                        depth: 0.5,
                    },
                    frame: SensorFrame::new(1, 1),
                    detection: CircleDetection {
                        cx,
                        cy,
                        radius: 30.0,
                        votes: 100,
                    },
                    quad_id: None,
                });
            }
        }
        let (quads, cloud) = build_correspondence(&records, &mesh).unwrap();
        assert_eq!(quads.len(), 24);
        assert_eq!(
            cloud.points.len(),
            quads.iter().map(|q| q.rect_rows * q.rect_cols).sum::<usize>()
        );
        // Homography exactness on its defining corners.
        for q in &quads {
            let rect = [
                [0.0, 0.0],
                [(q.rect_cols - 1) as f64, 0.0],
                [(q.rect_cols - 1) as f64, (q.rect_rows - 1) as f64],
                [0.0, (q.rect_rows - 1) as f64],
            ];
            for (img, expect) in q.corners_img.iter().zip(&rect) {
                let (x, y) = q.homography.apply(img[0], img[1]);
                assert!(
                    (x - expect[0]).abs() < 1e-6 && (y - expect[1]).abs() < 1e-6,
                    "quad {} corner mapped to ({x}, {y}), expected {expect:?}",
                    q.quad_id
                );
            }
            assert!(q.homography.is_invertible());
        }
        // Rectified patch centers vs projected grid centers within 2 px.
        for q in &quads {
            let grid = project_grid(
                &mesh.surface,
                &mesh.quads[q.quad_id],
                q.rect_rows,
                q.rect_cols,
            )
            .unwrap();
            let center_idx = (q.rect_rows / 2) * q.rect_cols + q.rect_cols / 2;
            let (px, py) = sim.camera().project(&grid.points[center_idx]).unwrap();
            let (rx, ry) = q.homography.apply(px, py);
            let ex = (q.rect_cols / 2) as f64;
            let ey = (q.rect_rows / 2) as f64;
            let err = ((rx - ex).powi(2) + (ry - ey).powi(2)).sqrt();
            assert!(err < 2.0, "quad {} center error {err}", q.quad_id);
        }
    }

    #[test]
    fn missing_vertex_detection_names_the_vertex() {
        let sim = Simulator::with_default_scenario().unwrap();
        let mesh = tessellate(sim.surface(), 2, 2).unwrap();
        let records = Vec::new(); // nothing detected
        let err = build_correspondence(&records, &mesh).unwrap_err();
        assert!(matches!(err, Error::CalibrationIncomplete { iu: 0, iv: 0 }));
    }

    #[test]
    fn gradient_center_pixel_maps_to_zero_gradient() {
        // A pixel at the exact detected center is paired with slope (0,0).
        let sim = Simulator::with_default_scenario().unwrap();
        let surface = sim.surface();
        let target = surface.sample(0.86, 0.5);
        let (probe, _) = simulate_poke(&target, 2.0, 0.8);
        let frame = sim.render(&probe, 1);
        let reference = sim.reference_frame();
        let config = CalibrationConfig::default();
        let det = detect_circle(
            &frame,
            &reference,
            &HoughConfig {
                mask_threshold: config.mask_threshold,
                ..HoughConfig::default()
            },
        )
        .unwrap();
        // Build a one-quad map covering the whole image.
        let quad_map = vec![0i16; (frame.width * frame.height) as usize];
        let mut builders = vec![LutBuilder::new()];
        let rec = PokeRecord {
            target: PokeTarget {
                kind: PokeKind::Gradient { quad_id: 0, index: 0 },
                u: 0.86,
                v: 0.5,
                point: target.point,
                depth: 0.8,
            },
            frame: frame.clone(),
            detection: det,
            quad_id: Some(0),
        };
        accumulate_gradient_poke(
            &mut builders,
            &rec,
            &reference,
            2.0,
            &config.quantizer,
            &quad_map,
        );
        let lut = builders[0].finalize(0, config.quantizer, 4).unwrap();
        // The key observed at the detected center must map to ~zero slope.
        let cx = det.cx.round() as u32;
        let cy = det.cy.round() as u32;
        let i = ((cy * frame.width + cx) * 3) as usize;
        let diff = [
            frame.pixels[i] as f32 - reference.pixels[i] as f32,
            frame.pixels[i + 1] as f32 - reference.pixels[i + 1] as f32,
            frame.pixels[i + 2] as f32 - reference.pixels[i + 2] as f32,
        ];
        let (gx, gy) = lut.gradient(config.quantizer.key(diff));
        let mag = ((gx * gx + gy * gy) as f64).sqrt();
        assert!(mag < 0.12, "center slope magnitude {mag}");
    }

    #[test]
    fn gradient_poke_slope_matches_cap_at_fractional_radius() {
        // Analytic check of the label model: at 0.6 of the contact radius
        // the stored slope magnitude matches the spherical-cap slope.
        let rc = SphereProbe::flat_contact_radius(2.0, 0.8);
        let rho = 0.6 * rc;
        let slope = SphereProbe::cap_slope(2.0, rho);
        // Closed form: rho / sqrt(R^2 - rho^2).
        let expect = rho / (4.0f64 - rho * rho).sqrt();
        assert!((slope - expect).abs() < 1e-12);
        assert!((slope - 0.5303).abs() < 2e-4, "slope {slope}");
    }

    #[test]
    fn full_calibration_on_default_simulator() {
        let sim = Simulator::with_default_scenario().unwrap();
        let config = CalibrationConfig::default();
        let (bundle, report) = run_calibration(&sim, &config).unwrap();
        assert_eq!(report.vertex_pokes, 35);
        assert_eq!(report.gradient_pokes, 120);
        assert!(report.detection_failures.len() <= 6, "{:?}", report.detection_failures);
        assert_eq!(bundle.quads.len(), 24);
        assert_eq!(bundle.luts.len(), 24);
        for (qi, lut) in bundle.luts.iter().enumerate() {
            assert!(lut.len() > 30, "quad {qi} table has only {} keys", lut.len());
        }
        // Homography invertibility across the bundle.
        for q in &bundle.quads {
            assert!(q.homography.is_invertible());
        }
        // Reference cloud matches the sum of rectified resolutions.
        let expect: usize = bundle.quads.iter().map(|q| q.rect_rows * q.rect_cols).sum();
        assert_eq!(bundle.reference_cloud.points.len(), expect);
    }
}
