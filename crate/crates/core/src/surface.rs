//! Analytic fingertip geometry: a cylinder with a hemispherical end cap.
//!
//! The sensing surface is parameterized by `(u, v)`:
//!
//! * `u ∈ [0, 1]` runs along the meridian, proportional to arc length —
//!   first along the cylinder axis, then over the cap up to the apex.
//! * `v ∈ [0, 1]` runs around the circumference of the sensed sector.
//!
//! All lengths are millimeters, all angles radians unless suffixed `_deg`.
//! The sensor frame has the cylinder axis along +z with the base at z = 0.

use nalgebra::{Point3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// On-surface tolerance used by invariant checks (mm).
pub const ON_SURFACE_TOL: f64 = 1e-6;

/// Rounded fingertip: cylinder of `radius` and `length` closed by a
/// hemispherical cap of the same radius centered at `(0, 0, length)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingertipSurface {
    radius: f64,
    length: f64,
    /// Azimuth range of the sensed sector, radians.
    sector: (f64, f64),
    /// Sensed window along the meridian, as `u` parameters.
    sensed_u: (f64, f64),
}

/// Point on the surface together with its local frame.
#[derive(Debug, Clone, Copy)]
pub struct SurfaceSample {
    pub point: Point3<f64>,
    /// Outward unit normal.
    pub normal: Unit<Vector3<f64>>,
    /// Unit tangent along increasing `u` (meridian direction).
    pub tangent_u: Unit<Vector3<f64>>,
    /// Unit tangent along increasing `v` (azimuthal direction).
    pub tangent_v: Unit<Vector3<f64>>,
    pub u: f64,
    pub v: f64,
}

impl FingertipSurface {
    /// Builds a fingertip surface. The sensed sector defaults to 180° of
    /// circumference centered on +x and the full meridian.
    pub fn new(radius: f64, length: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::invalid_parameter(format!(
                "cylinder radius must be positive, got {radius}"
            )));
        }
        if !(length >= 0.0) {
            return Err(Error::invalid_parameter(format!(
                "cylinder length must be non-negative, got {length}"
            )));
        }
        Ok(FingertipSurface {
            radius,
            length,
            sector: (-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2),
            sensed_u: (0.0, 1.0),
        })
    }

    /// Sets the sensed sector azimuth extent in degrees, centered on +x.
    pub fn with_sector_deg(mut self, sector_deg: f64) -> Result<Self> {
        if !(sector_deg > 0.0 && sector_deg <= 360.0) {
            return Err(Error::invalid_parameter(format!(
                "sector must be in (0, 360] degrees, got {sector_deg}"
            )));
        }
        let half = sector_deg.to_radians() / 2.0;
        self.sector = (-half, half);
        Ok(self)
    }

    /// Restricts the sensed meridian window (both in `[0, 1]`).
    pub fn with_sensed_u(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
            return Err(Error::invalid_parameter(format!(
                "sensed u window must satisfy 0 <= lo < hi <= 1, got ({lo}, {hi})"
            )));
        }
        self.sensed_u = (lo, hi);
        Ok(self)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Center of the hemispherical cap.
    pub fn cap_center(&self) -> Point3<f64> {
        Point3::new(0.0, 0.0, self.length)
    }

    /// Apex of the cap: axial distance `length + radius` from the base.
    pub fn apex(&self) -> Point3<f64> {
        Point3::new(0.0, 0.0, self.length + self.radius)
    }

    /// Total meridian arc length: cylinder plus quarter circle over the cap.
    pub fn meridian_length(&self) -> f64 {
        self.length + std::f64::consts::FRAC_PI_2 * self.radius
    }

    pub fn sector(&self) -> (f64, f64) {
        self.sector
    }

    pub fn sensed_u(&self) -> (f64, f64) {
        self.sensed_u
    }

    fn azimuth(&self, v: f64) -> f64 {
        self.sector.0 + v * (self.sector.1 - self.sector.0)
    }

    /// Evaluates the surface at `(u, v)` with its local frame.
    pub fn sample(&self, u: f64, v: f64) -> SurfaceSample {
        let theta = self.azimuth(v);
        let (sin_t, cos_t) = theta.sin_cos();
        let s = u * self.meridian_length();
        let tangent_v = Unit::new_unchecked(Vector3::new(-sin_t, cos_t, 0.0));
        if s <= self.length {
            let normal = Unit::new_unchecked(Vector3::new(cos_t, sin_t, 0.0));
            SurfaceSample {
                point: Point3::new(self.radius * cos_t, self.radius * sin_t, s),
                normal,
                tangent_u: Unit::new_unchecked(Vector3::z()),
                tangent_v,
                u,
                v,
            }
        } else {
            // Cap: polar angle from the equator.
            let phi = (s - self.length) / self.radius;
            let (sin_p, cos_p) = phi.sin_cos();
            let normal =
                Unit::new_unchecked(Vector3::new(cos_p * cos_t, cos_p * sin_t, sin_p));
            SurfaceSample {
                point: Point3::new(
                    self.radius * cos_p * cos_t,
                    self.radius * cos_p * sin_t,
                    self.length + self.radius * sin_p,
                ),
                normal,
                tangent_u: Unit::new_unchecked(Vector3::new(
                    -sin_p * cos_t,
                    -sin_p * sin_t,
                    cos_p,
                )),
                tangent_v,
                u,
                v,
            }
        }
    }

    pub fn point_at(&self, u: f64, v: f64) -> Point3<f64> {
        self.sample(u, v).point
    }

    pub fn normal_at(&self, u: f64, v: f64) -> Unit<Vector3<f64>> {
        self.sample(u, v).normal
    }

    /// Signed distance from `p` to the shell (negative inside).
    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        if p.z >= self.length {
            (p - self.cap_center()).norm() - self.radius
        } else {
            (p.x * p.x + p.y * p.y).sqrt() - self.radius
        }
    }

    /// Projects `p` onto the shell along the local radial direction and
    /// returns the surface sample there. Idempotent for on-surface points.
    pub fn project_point(&self, p: &Point3<f64>) -> SurfaceSample {
        let (u, v) = self.params_of(p);
        self.sample(u, v)
    }

    /// Recovers `(u, v)` of the surface point nearest to `p` (radially).
    pub fn params_of(&self, p: &Point3<f64>) -> (f64, f64) {
        let theta = p.y.atan2(p.x);
        let s = if p.z >= self.length {
            let d = p - self.cap_center();
            let lateral = (d.x * d.x + d.y * d.y).sqrt();
            let phi = d.z.atan2(lateral).max(0.0);
            self.length + self.radius * phi
        } else {
            p.z.clamp(0.0, self.length)
        };
        let u = s / self.meridian_length();
        let (lo, hi) = self.sector;
        let span = hi - lo;
        // Wrap the azimuth into the sector range when possible.
        let mut t = theta;
        while t < lo - 1e-12 {
            t += std::f64::consts::TAU;
        }
        while t > hi + 1e-12 {
            t -= std::f64::consts::TAU;
        }
        (u, (t - lo) / span)
    }

    /// First intersection of the ray `origin + t * dir` (t > 0) with the
    /// shell, as a surface sample.
    pub fn intersect_ray(
        &self,
        origin: &Point3<f64>,
        dir: &Vector3<f64>,
    ) -> Option<SurfaceSample> {
        let mut best: Option<f64> = None;
        // Cap sphere.
        let oc = origin - self.cap_center();
        let b = oc.dot(dir);
        let c = oc.norm_squared() - self.radius * self.radius;
        let disc = b * b - c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for t in [-b - sq, -b + sq] {
                if t > 1e-9 && origin.z + t * dir.z >= self.length - 1e-12 {
                    best = Some(best.map_or(t, |bt: f64| bt.min(t)));
                }
            }
        }
        // Cylinder wall.
        let a = dir.x * dir.x + dir.y * dir.y;
        if a > 1e-16 {
            let b2 = origin.x * dir.x + origin.y * dir.y;
            let c2 = origin.x * origin.x + origin.y * origin.y - self.radius * self.radius;
            let disc2 = b2 * b2 - a * c2;
            if disc2 >= 0.0 {
                let sq = disc2.sqrt();
                for t in [(-b2 - sq) / a, (-b2 + sq) / a] {
                    let z = origin.z + t * dir.z;
                    if t > 1e-9 && (0.0..=self.length).contains(&z) {
                        best = Some(best.map_or(t, |bt: f64| bt.min(t)));
                    }
                }
            }
        }
        best.map(|t| self.project_point(&(origin + t * dir)))
    }
}

/// One planar cell of the tessellated sensing surface.
///
/// Corner order: `(u0,v0), (u0,v1), (u1,v1), (u1,v0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadPatch {
    pub id: usize,
    pub corners_uv: [[f64; 2]; 4],
    pub corners_3d: [Point3<f64>; 4],
}

impl QuadPatch {
    pub fn u_range(&self) -> (f64, f64) {
        (self.corners_uv[0][0], self.corners_uv[2][0])
    }

    pub fn v_range(&self) -> (f64, f64) {
        (self.corners_uv[0][1], self.corners_uv[2][1])
    }

    pub fn center_uv(&self) -> (f64, f64) {
        let (u0, u1) = self.u_range();
        let (v0, v1) = self.v_range();
        ((u0 + u1) / 2.0, (v0 + v1) / 2.0)
    }

    /// Mean edge length of the quad, mm.
    pub fn mean_edge(&self) -> f64 {
        let c = &self.corners_3d;
        ((c[1] - c[0]).norm() + (c[2] - c[1]).norm() + (c[3] - c[2]).norm()
            + (c[0] - c[3]).norm())
            / 4.0
    }

    /// Unit normal of the best-fit quad plane, oriented outward.
    pub fn plane_normal(&self, surface: &FingertipSurface) -> Unit<Vector3<f64>> {
        let c = &self.corners_3d;
        let n = (c[2] - c[0]).cross(&(c[3] - c[1]));
        let n = if n.norm() < 1e-12 {
            // Degenerate quad (corners at the apex); fall back to the
            // surface normal at the quad center.
            let (u, v) = self.center_uv();
            surface.normal_at(u, v).into_inner()
        } else {
            n
        };
        let (u, v) = self.center_uv();
        let outward = surface.normal_at(u, v);
        Unit::new_normalize(if n.dot(&outward) < 0.0 { -n } else { n })
    }

    /// Max corner distance from the best-fit plane, relative to edge length.
    pub fn coplanarity_error(&self) -> f64 {
        let c = &self.corners_3d;
        let n = (c[2] - c[0]).cross(&(c[3] - c[1]));
        let norm = n.norm();
        if norm < 1e-12 {
            return 0.0;
        }
        let n = n / norm;
        let centroid = Point3::from(
            (c[0].coords + c[1].coords + c[2].coords + c[3].coords) / 4.0,
        );
        let d = c
            .iter()
            .map(|p| (p - centroid).dot(&n).abs())
            .fold(0.0f64, f64::max);
        let edge = self.mean_edge();
        if edge > 1e-12 {
            d / edge
        } else {
            0.0
        }
    }
}

/// Quad tessellation of the sensed surface window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceMesh {
    pub surface: FingertipSurface,
    pub n_u: usize,
    pub n_v: usize,
    pub quads: Vec<QuadPatch>,
    /// `(n_u + 1) x (n_v + 1)` vertex grid, row-major in `u`.
    pub vertices_uv: Vec<[f64; 2]>,
    pub vertices_3d: Vec<Point3<f64>>,
}

/// Tessellates the sensed window of `surface` into `n_u x n_v` quads.
/// Quad ids are row-major in `u` and stable across calls.
pub fn tessellate(surface: &FingertipSurface, n_u: usize, n_v: usize) -> Result<SurfaceMesh> {
    if n_u == 0 || n_v == 0 {
        return Err(Error::invalid_parameter(
            "tessellation requires n_u >= 1 and n_v >= 1",
        ));
    }
    let (u_lo, u_hi) = surface.sensed_u();
    let mut vertices_uv = Vec::with_capacity((n_u + 1) * (n_v + 1));
    let mut vertices_3d = Vec::with_capacity((n_u + 1) * (n_v + 1));
    for iu in 0..=n_u {
        let u = u_lo + (u_hi - u_lo) * iu as f64 / n_u as f64;
        for iv in 0..=n_v {
            let v = iv as f64 / n_v as f64;
            vertices_uv.push([u, v]);
            vertices_3d.push(surface.point_at(u, v));
        }
    }
    let vid = |iu: usize, iv: usize| iu * (n_v + 1) + iv;
    let mut quads = Vec::with_capacity(n_u * n_v);
    for iu in 0..n_u {
        for iv in 0..n_v {
            let ids = [
                vid(iu, iv),
                vid(iu, iv + 1),
                vid(iu + 1, iv + 1),
                vid(iu + 1, iv),
            ];
            quads.push(QuadPatch {
                id: iu * n_v + iv,
                corners_uv: [
                    vertices_uv[ids[0]],
                    vertices_uv[ids[1]],
                    vertices_uv[ids[2]],
                    vertices_uv[ids[3]],
                ],
                corners_3d: [
                    vertices_3d[ids[0]],
                    vertices_3d[ids[1]],
                    vertices_3d[ids[2]],
                    vertices_3d[ids[3]],
                ],
            });
        }
    }
    Ok(SurfaceMesh {
        surface: surface.clone(),
        n_u,
        n_v,
        quads,
        vertices_uv,
        vertices_3d,
    })
}

impl SurfaceMesh {
    /// Index of the quad containing `(u, v)`, boundary ties broken toward
    /// the lower id. `None` outside the sensed window.
    pub fn quad_containing(&self, u: f64, v: f64) -> Option<usize> {
        let (u_lo, u_hi) = self.surface.sensed_u();
        let eps = 1e-12;
        if u < u_lo - eps || u > u_hi + eps || v < -eps || v > 1.0 + eps {
            return None;
        }
        let pick = |t: f64, n: usize| -> usize {
            let x = (t * n as f64).min(n as f64);
            let mut i = x.floor() as usize;
            // Internal boundaries belong to the lower cell.
            if i > 0 && (x - i as f64).abs() < 1e-12 {
                i -= 1;
            }
            i.min(n - 1)
        };
        let fu = ((u - u_lo) / (u_hi - u_lo)).clamp(0.0, 1.0);
        let iu = pick(fu, self.n_u);
        let iv = pick(v.clamp(0.0, 1.0), self.n_v);
        Some(iu * self.n_v + iv)
    }

    pub fn vertex_uv(&self, iu: usize, iv: usize) -> [f64; 2] {
        self.vertices_uv[iu * (self.n_v + 1) + iv]
    }
}

/// Regular grid of surface points inside one quad.
#[derive(Debug, Clone)]
pub struct SurfaceGrid {
    pub quad_id: usize,
    pub rows: usize,
    pub cols: usize,
    /// Row-major points, normals and parameters; `rows * cols` entries.
    pub points: Vec<Point3<f64>>,
    pub normals: Vec<Unit<Vector3<f64>>>,
    pub uv: Vec<[f64; 2]>,
}

/// Builds a `rows x cols` grid in the quad plane (bilinear between the 3D
/// corners) and projects each point onto the analytic surface along the
/// quad-plane normal.
pub fn project_grid(
    surface: &FingertipSurface,
    quad: &QuadPatch,
    rows: usize,
    cols: usize,
) -> Result<SurfaceGrid> {
    if rows < 2 || cols < 2 {
        return Err(Error::invalid_parameter(
            "grid projection requires rows >= 2 and cols >= 2",
        ));
    }
    let n = quad.plane_normal(surface).into_inner();
    let c = &quad.corners_3d;
    let mut points = Vec::with_capacity(rows * cols);
    let mut normals = Vec::with_capacity(rows * cols);
    let mut uv = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let fu = i as f64 / (rows - 1) as f64;
        for j in 0..cols {
            let fv = j as f64 / (cols - 1) as f64;
            // Bilinear in the quad: rows follow u (c0 -> c3), cols follow v.
            let top = c[0].coords.lerp(&c[1].coords, fv);
            let bottom = c[3].coords.lerp(&c[2].coords, fv);
            let g = Point3::from(top.lerp(&bottom, fu));
            let sample = project_along(surface, &g, &n);
            points.push(sample.point);
            normals.push(sample.normal);
            uv.push([sample.u, sample.v]);
        }
    }
    Ok(SurfaceGrid {
        quad_id: quad.id,
        rows,
        cols,
        points,
        normals,
        uv,
    })
}

/// Projects `g` onto the shell along direction `n` (either sign), choosing
/// the nearest intersection; falls back to radial projection if the line
/// misses the shell.
fn project_along(
    surface: &FingertipSurface,
    g: &Point3<f64>,
    n: &Vector3<f64>,
) -> SurfaceSample {
    // Root of signed_distance(g + t*n) around t = 0.
    let f = |t: f64| surface.signed_distance(&(g + t * n));
    let f0 = f(0.0);
    if f0.abs() < 1e-12 {
        return surface.project_point(g);
    }
    // Bracket the root by expanding in both directions.
    let mut bracket: Option<(f64, f64)> = None;
    let mut step = 1e-3;
    while step <= 8.0 {
        for t in [step, -step] {
            if f(t) * f0 < 0.0 {
                bracket = Some(if t > 0.0 { (0.0, t) } else { (t, 0.0) });
                break;
            }
        }
        if bracket.is_some() {
            break;
        }
        step *= 2.0;
    }
    let Some((mut a, mut b)) = bracket else {
        return surface.project_point(g);
    };
    let fa = f(a);
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    surface.project_point(&(g + 0.5 * (a + b) * n))
}

/// Moves every point inward along its normal by the paired displacement.
/// Displacements saturate at `gel_thickness`; the flag reports saturation.
pub fn displace_surface(
    points: &[Point3<f64>],
    normals: &[Unit<Vector3<f64>>],
    displacements: &[f64],
    gel_thickness: f64,
) -> Result<(Vec<Point3<f64>>, bool)> {
    if points.len() != normals.len() || points.len() != displacements.len() {
        return Err(Error::invalid_input(
            "points, normals and displacements must have equal lengths",
        ));
    }
    if displacements.iter().any(|d| *d < 0.0) {
        return Err(Error::invalid_parameter(
            "displacements must be non-negative",
        ));
    }
    let mut saturated = false;
    let moved = points
        .iter()
        .zip(normals)
        .zip(displacements)
        .map(|((p, n), d)| {
            let d = if *d > gel_thickness {
                saturated = true;
                gel_thickness
            } else {
                *d
            };
            p - d * n.into_inner()
        })
        .collect();
    Ok((moved, saturated))
}
