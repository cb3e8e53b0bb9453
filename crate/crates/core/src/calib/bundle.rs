//! Calibration bundle: everything reconstruction needs, serialized to a
//! versioned binary file with a JSON sidecar.
//!
//! The file stores only primary data (surface parameters, tessellation,
//! homographies, sparse table entries, the reference frame). Derived
//! structures (mesh, reference cloud, dense tables) are rebuilt
//! deterministically on load, keeping the file small and writes
//! byte-stable.

use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{Point3, Unit, Vector3};

use crate::calib::homography::Homography;
use crate::calib::lut::{LookupTable, RgbQuantizer};
use crate::error::{Error, Result};
use crate::sim::SensorFrame;
use crate::surface::{tessellate, FingertipSurface, SurfaceMesh};

const MAGIC: &[u8; 8] = b"TKBNDL01";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct QuadCalibration {
    pub quad_id: usize,
    /// Image patch to rectified patch.
    pub homography: Homography,
    pub rect_rows: usize,
    pub rect_cols: usize,
    /// Detected image positions of the quad corners.
    pub corners_img: [[f64; 2]; 4],
}

/// Undeformed positions of every rectified-patch pixel.
#[derive(Debug, Clone, Default)]
pub struct ReferenceCloud {
    pub points: Vec<Point3<f64>>,
    pub normals: Vec<Unit<Vector3<f64>>>,
    pub uv: Vec<[f64; 2]>,
    pub quad_ids: Vec<u16>,
    /// Start offset of each quad's block; length `n_quads + 1`.
    pub quad_offsets: Vec<usize>,
}

#[derive(Debug)]
pub struct CalibrationBundle {
    pub version: u32,
    pub surface: FingertipSurface,
    pub n_u: usize,
    pub n_v: usize,
    pub resolution: (u32, u32),
    pub quads: Vec<QuadCalibration>,
    pub luts: Vec<LookupTable>,
    pub reference_frame: SensorFrame,
    pub quantizer: RgbQuantizer,
    pub knn: usize,
    pub probe_radius: f64,
    // Rebuilt on load.
    pub mesh: SurfaceMesh,
    pub reference_cloud: ReferenceCloud,
}

impl CalibrationBundle {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        surface: FingertipSurface,
        n_u: usize,
        n_v: usize,
        reference_frame: SensorFrame,
        quads: Vec<QuadCalibration>,
        luts: Vec<LookupTable>,
        quantizer: RgbQuantizer,
        knn: usize,
        probe_radius: f64,
        mesh: SurfaceMesh,
        reference_cloud: ReferenceCloud,
    ) -> Self {
        CalibrationBundle {
            version: BUNDLE_VERSION,
            resolution: (reference_frame.width, reference_frame.height),
            surface,
            n_u,
            n_v,
            quads,
            luts,
            reference_frame,
            quantizer,
            knn,
            probe_radius,
            mesh,
            reference_cloud,
        }
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(self.version)?;
        w.write_f64::<LittleEndian>(self.surface.radius())?;
        w.write_f64::<LittleEndian>(self.surface.length())?;
        let (s0, s1) = self.surface.sector();
        w.write_f64::<LittleEndian>(s0)?;
        w.write_f64::<LittleEndian>(s1)?;
        let (u0, u1) = self.surface.sensed_u();
        w.write_f64::<LittleEndian>(u0)?;
        w.write_f64::<LittleEndian>(u1)?;
        w.write_u32::<LittleEndian>(self.n_u as u32)?;
        w.write_u32::<LittleEndian>(self.n_v as u32)?;
        w.write_u32::<LittleEndian>(self.resolution.0)?;
        w.write_u32::<LittleEndian>(self.resolution.1)?;
        w.write_f64::<LittleEndian>(self.probe_radius)?;
        w.write_u8(self.quantizer.bits)?;
        w.write_f32::<LittleEndian>(self.quantizer.clamp)?;
        w.write_u32::<LittleEndian>(self.knn as u32)?;

        w.write_u32::<LittleEndian>(self.quads.len() as u32)?;
        for q in &self.quads {
            w.write_u32::<LittleEndian>(q.quad_id as u32)?;
            for row in &q.homography.m {
                for v in row {
                    w.write_f64::<LittleEndian>(*v)?;
                }
            }
            w.write_u32::<LittleEndian>(q.rect_rows as u32)?;
            w.write_u32::<LittleEndian>(q.rect_cols as u32)?;
            for c in &q.corners_img {
                w.write_f64::<LittleEndian>(c[0])?;
                w.write_f64::<LittleEndian>(c[1])?;
            }
        }

        w.write_u32::<LittleEndian>(self.luts.len() as u32)?;
        for lut in &self.luts {
            let entries = lut.entries();
            w.write_u32::<LittleEndian>(entries.len() as u32)?;
            for (k, gx, gy) in entries {
                w.write_u16::<LittleEndian>(*k)?;
                w.write_f32::<LittleEndian>(*gx)?;
                w.write_f32::<LittleEndian>(*gy)?;
            }
        }

        w.write_all(&self.reference_frame.pixels)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::BundleFormat("bad magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != BUNDLE_VERSION {
            return Err(Error::BundleFormat(format!(
                "unsupported bundle version {version}"
            )));
        }
        let radius = r.read_f64::<LittleEndian>()?;
        let length = r.read_f64::<LittleEndian>()?;
        let s0 = r.read_f64::<LittleEndian>()?;
        let s1 = r.read_f64::<LittleEndian>()?;
        let u0 = r.read_f64::<LittleEndian>()?;
        let u1 = r.read_f64::<LittleEndian>()?;
        let surface = FingertipSurface::new(radius, length)?
            .with_sector_deg((s1 - s0).to_degrees())?
            .with_sensed_u(u0, u1)?;
        let n_u = r.read_u32::<LittleEndian>()? as usize;
        let n_v = r.read_u32::<LittleEndian>()? as usize;
        let rw = r.read_u32::<LittleEndian>()?;
        let rh = r.read_u32::<LittleEndian>()?;
        let probe_radius = r.read_f64::<LittleEndian>()?;
        let bits = r.read_u8()?;
        let clamp = r.read_f32::<LittleEndian>()?;
        let knn = r.read_u32::<LittleEndian>()? as usize;
        let quantizer = RgbQuantizer { bits, clamp };

        let n_quads = r.read_u32::<LittleEndian>()? as usize;
        let mut quads = Vec::with_capacity(n_quads);
        for _ in 0..n_quads {
            let quad_id = r.read_u32::<LittleEndian>()? as usize;
            let mut m = [[0.0f64; 3]; 3];
            for row in &mut m {
                for v in row.iter_mut() {
                    *v = r.read_f64::<LittleEndian>()?;
                }
            }
            let rect_rows = r.read_u32::<LittleEndian>()? as usize;
            let rect_cols = r.read_u32::<LittleEndian>()? as usize;
            let mut corners_img = [[0.0f64; 2]; 4];
            for c in &mut corners_img {
                c[0] = r.read_f64::<LittleEndian>()?;
                c[1] = r.read_f64::<LittleEndian>()?;
            }
            quads.push(QuadCalibration {
                quad_id,
                homography: Homography { m },
                rect_rows,
                rect_cols,
                corners_img,
            });
        }

        let n_luts = r.read_u32::<LittleEndian>()? as usize;
        let mut luts = Vec::with_capacity(n_luts);
        for qi in 0..n_luts {
            let n_entries = r.read_u32::<LittleEndian>()? as usize;
            let mut entries = Vec::with_capacity(n_entries);
            for _ in 0..n_entries {
                let k = r.read_u16::<LittleEndian>()?;
                let gx = r.read_f32::<LittleEndian>()?;
                let gy = r.read_f32::<LittleEndian>()?;
                entries.push((k, gx, gy));
            }
            luts.push(LookupTable::from_entries(qi, quantizer, entries, knn));
        }

        let mut reference_frame = SensorFrame::new(rw, rh);
        r.read_exact(&mut reference_frame.pixels)?;

        let mesh = tessellate(&surface, n_u, n_v)?;
        let reference_cloud = crate::calib::build_reference_cloud(&mesh, &quads)?;
        Ok(CalibrationBundle {
            version,
            surface,
            n_u,
            n_v,
            resolution: (rw, rh),
            quads,
            luts,
            reference_frame,
            quantizer,
            knn,
            probe_radius,
            mesh,
            reference_cloud,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let data = std::fs::read(path)?;
        Self::read_from(std::io::Cursor::new(data))
    }

    /// JSON sidecar with the bundle's descriptive metadata.
    pub fn sidecar_json(&self) -> serde_json::Value {
        serde_json::json!({
            "version": self.version,
            "surface": {
                "cylinder_radius_mm": self.surface.radius(),
                "cylinder_length_mm": self.surface.length(),
                "sector_deg": (self.surface.sector().1 - self.surface.sector().0).to_degrees(),
                "sensed_u": [self.surface.sensed_u().0, self.surface.sensed_u().1],
            },
            "tessellation": { "n_u": self.n_u, "n_v": self.n_v },
            "resolution": [self.resolution.0, self.resolution.1],
            "probe_radius_mm": self.probe_radius,
            "quantization_bits": self.quantizer.bits,
            "diff_clamp": self.quantizer.clamp,
            "knn": self.knn,
            "reference_cloud_points": self.reference_cloud.points.len(),
            "per_quad_table_keys": self.luts.iter().map(|l| l.len()).collect::<Vec<_>>(),
        })
    }
}
