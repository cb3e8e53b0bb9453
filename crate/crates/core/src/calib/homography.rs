//! Planar perspective transforms between image patches and rectified
//! patches.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 3x3 projective transform, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homography {
    pub m: [[f64; 3]; 3],
}

impl Homography {
    pub fn identity() -> Self {
        Homography {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        Homography {
            m: [
                [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
                [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
                [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
            ],
        }
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.m[0][0],
            self.m[0][1],
            self.m[0][2],
            self.m[1][0],
            self.m[1][1],
            self.m[1][2],
            self.m[2][0],
            self.m[2][1],
            self.m[2][2],
        )
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let w = self.m[2][0] * x + self.m[2][1] * y + self.m[2][2];
        (
            (self.m[0][0] * x + self.m[0][1] * y + self.m[0][2]) / w,
            (self.m[1][0] * x + self.m[1][1] * y + self.m[1][2]) / w,
        )
    }

    /// Jacobian of the map at `(x, y)`, columns d(out)/dx and d(out)/dy.
    pub fn jacobian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let w = self.m[2][0] * x + self.m[2][1] * y + self.m[2][2];
        let u = self.m[0][0] * x + self.m[0][1] * y + self.m[0][2];
        let v = self.m[1][0] * x + self.m[1][1] * y + self.m[1][2];
        let inv_w = 1.0 / w;
        [
            [
                (self.m[0][0] - u * inv_w * self.m[2][0]) * inv_w,
                (self.m[0][1] - u * inv_w * self.m[2][1]) * inv_w,
            ],
            [
                (self.m[1][0] - v * inv_w * self.m[2][0]) * inv_w,
                (self.m[1][1] - v * inv_w * self.m[2][1]) * inv_w,
            ],
        ]
    }

    pub fn determinant(&self) -> f64 {
        self.to_matrix().determinant()
    }

    pub fn inverse(&self) -> Result<Homography> {
        self.to_matrix()
            .try_inverse()
            .map(|m| Homography::from_matrix(&m))
            .ok_or_else(|| Error::invalid_input("homography is singular"))
    }

    pub fn is_invertible(&self) -> bool {
        self.determinant().abs() > 1e-12
    }
}

/// Exact homography from 4 point correspondences `src -> dst`.
///
/// Points are normalized (centroid and scale) before solving the 8x8
/// system; the result is exact on its defining points up to round-off.
pub fn homography_from_4pt(src: &[[f64; 2]; 4], dst: &[[f64; 2]; 4]) -> Result<Homography> {
    let (src_n, t_src) = normalize4(src);
    let (dst_n, t_dst) = normalize4(dst);

    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut b = SVector::<f64, 8>::zeros();
    for k in 0..4 {
        let [x, y] = src_n[k];
        let [u, v] = dst_n[k];
        let r0 = 2 * k;
        a[(r0, 0)] = x;
        a[(r0, 1)] = y;
        a[(r0, 2)] = 1.0;
        a[(r0, 6)] = -u * x;
        a[(r0, 7)] = -u * y;
        b[r0] = u;
        let r1 = r0 + 1;
        a[(r1, 3)] = x;
        a[(r1, 4)] = y;
        a[(r1, 5)] = 1.0;
        a[(r1, 6)] = -v * x;
        a[(r1, 7)] = -v * y;
        b[r1] = v;
    }
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::invalid_input("degenerate correspondences"))?;
    let hn = Matrix3::new(
        sol[0], sol[1], sol[2], sol[3], sol[4], sol[5], sol[6], sol[7], 1.0,
    );
    let t_dst_inv = t_dst
        .try_inverse()
        .ok_or_else(|| Error::invalid_input("degenerate normalization"))?;
    let h = t_dst_inv * hn * t_src;
    let s = h[(2, 2)];
    if s.abs() < 1e-12 {
        return Err(Error::invalid_input("degenerate homography"));
    }
    Ok(Homography::from_matrix(&(h / s)))
}

fn normalize4(pts: &[[f64; 2]; 4]) -> ([[f64; 2]; 4], Matrix3<f64>) {
    let mut cx = 0.0;
    let mut cy = 0.0;
    for p in pts {
        cx += p[0];
        cy += p[1];
    }
    cx /= 4.0;
    cy /= 4.0;
    let mut mean_dist = 0.0;
    for p in pts {
        mean_dist += ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt();
    }
    mean_dist /= 4.0;
    let s = if mean_dist > 1e-12 {
        2f64.sqrt() / mean_dist
    } else {
        1.0
    };
    let t = Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0);
    let mut out = [[0.0; 2]; 4];
    for (i, p) in pts.iter().enumerate() {
        let v = t * Vector3::new(p[0], p[1], 1.0);
        out[i] = [v.x, v.y];
    }
    (out, t)
}
