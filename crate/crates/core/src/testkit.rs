//! Brute-force oracles for validation tests.
//!
//! Everything here trades speed for independence: each function re-derives
//! its answer from first principles (dense linear algebra, exhaustive
//! accumulation, fine sampling) without touching the optimized
//! implementations it is used to check.

use nalgebra::{DMatrix, DVector, Matrix3, Point3, Vector3};

use crate::sim::camera::CameraModel;

/// Penetration of a rigid sphere at a surface point by stepping along the
/// inward normal until the point leaves the ball.
pub fn sphere_penetration_bruteforce(
    point: &Point3<f64>,
    normal: &Vector3<f64>,
    center: &Point3<f64>,
    radius: f64,
) -> f64 {
    let inside = |t: f64| (point - t * normal - center).norm() < radius;
    if !inside(0.0) {
        return 0.0;
    }
    let step = 1e-4;
    let mut t = 0.0;
    while t < 4.0 {
        t += step;
        if !inside(t) {
            return t - step / 2.0;
        }
    }
    4.0
}

/// Pinhole projection via an explicit homogeneous 3x4 matrix.
pub fn project_homogeneous_oracle(camera: &CameraModel, p: &Point3<f64>) -> (f64, f64) {
    let k = Matrix3::new(
        camera.focal,
        0.0,
        camera.principal.0,
        0.0,
        camera.focal,
        camera.principal.1,
        0.0,
        0.0,
        1.0,
    );
    let r = camera.pose.rotation.to_rotation_matrix();
    let t = camera.pose.translation.vector;
    let mut rt = nalgebra::Matrix3x4::zeros();
    rt.fixed_view_mut::<3, 3>(0, 0).copy_from(r.matrix());
    rt.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
    let m = k * rt;
    let hp = nalgebra::Vector4::new(p.x, p.y, p.z, 1.0);
    let out = m * hp;
    (out.x / out.z, out.y / out.z)
}

/// Exhaustive circle Hough accumulator: every edge pixel votes for every
/// center in the bounding window at its integer distance. Returns the best
/// `(cx, cy, r, votes)`.
pub fn hough_circle_oracle(
    edges: &[(u32, u32)],
    width: u32,
    height: u32,
    r_min: u32,
    r_max: u32,
) -> Option<(u32, u32, u32, u32)> {
    if edges.is_empty() {
        return None;
    }
    let nr = (r_max - r_min + 1) as usize;
    let mut acc = vec![0u32; width as usize * height as usize * nr];
    for &(ex, ey) in edges {
        for cy in 0..height {
            for cx in 0..width {
                let dx = ex as f64 - cx as f64;
                let dy = ey as f64 - cy as f64;
                let r = (dx * dx + dy * dy).sqrt().round() as i64;
                if r >= r_min as i64 && r <= r_max as i64 {
                    let idx = ((cy * width + cx) as usize) * nr + (r - r_min as i64) as usize;
                    acc[idx] += 1;
                }
            }
        }
    }
    let (best_idx, best_votes) = acc
        .iter()
        .enumerate()
        .max_by_key(|(i, v)| (**v, std::cmp::Reverse(*i)))?;
    if *best_votes == 0 {
        return None;
    }
    let nr_u = nr as u32;
    let pix = best_idx as u32 / nr_u;
    let r = best_idx as u32 % nr_u + r_min;
    Some((pix % width, pix / width, r, *best_votes))
}

/// Dense Poisson solve: assembles the 5-point Laplacian with zero-Dirichlet
/// boundary over the grid of `gx`/`gy` (row-major `height x width`) and
/// solves it with LU. The right-hand side is the central-difference
/// divergence, rebuilt here from scratch.
pub fn dense_poisson_solve(gx: &[f64], gy: &[f64], width: usize, height: usize) -> Vec<f64> {
    assert_eq!(gx.len(), width * height);
    assert_eq!(gy.len(), width * height);
    if width < 3 || height < 3 {
        return vec![0.0; width * height];
    }
    let iw = width - 2;
    let ih = height - 2;
    let n = iw * ih;
    let at = |x: usize, y: usize| y * width + x;
    let unk = |x: usize, y: usize| (y - 1) * iw + (x - 1);
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DVector::<f64>::zeros(n);
    for y in 1..height - 1 {
        for x in 1..width - 1 {
            let row = unk(x, y);
            a[(row, row)] = -4.0;
            for (nx, ny) in [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)] {
                if nx >= 1 && nx <= width - 2 && ny >= 1 && ny <= height - 2 {
                    a[(row, unk(nx, ny))] = 1.0;
                }
                // Boundary neighbors contribute zero (Dirichlet).
            }
            b[row] = 0.5 * (gx[at(x + 1, y)] - gx[at(x - 1, y)])
                + 0.5 * (gy[at(x, y + 1)] - gy[at(x, y - 1)]);
        }
    }
    let solution = a.lu().solve(&b).expect("dense Poisson system is regular");
    let mut out = vec![0.0; width * height];
    for y in 1..height - 1 {
        for x in 1..width - 1 {
            out[at(x, y)] = solution[unk(x, y)];
        }
    }
    out
}

/// Mean curl magnitude of a gradient field over its valid interior,
/// by central finite differences.
pub fn mean_curl(gx: &[f32], gy: &[f32], valid: &[bool], width: usize, height: usize) -> f64 {
    let at = |x: usize, y: usize| y * width + x;
    let mut acc = 0.0;
    let mut count = 0usize;
    for y in 1..height - 1 {
        for x in 1..width - 1 {
            let cells = [
                at(x, y),
                at(x + 1, y),
                at(x - 1, y),
                at(x, y + 1),
                at(x, y - 1),
            ];
            if cells.iter().any(|&i| !valid[i]) {
                continue;
            }
            let dgx_dy = (gx[at(x, y + 1)] as f64 - gx[at(x, y - 1)] as f64) / 2.0;
            let dgy_dx = (gy[at(x + 1, y)] as f64 - gy[at(x - 1, y)] as f64) / 2.0;
            acc += (dgx_dy - dgy_dx).abs();
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        acc / count as f64
    }
}

/// Mean gradient magnitude over valid pixels.
pub fn mean_gradient_magnitude(gx: &[f32], gy: &[f32], valid: &[bool]) -> f64 {
    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 0..gx.len() {
        if valid[i] {
            acc += ((gx[i] as f64).powi(2) + (gy[i] as f64).powi(2)).sqrt();
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        acc / count as f64
    }
}

/// Percentile of a sample set (nearest-rank on a sorted copy).
pub fn percentile(samples: &[f64], q: f64) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let idx = ((sorted.len() as f64 - 1.0) * q.clamp(0.0, 1.0)).round() as usize;
    sorted[idx.min(sorted.len() - 1)]
}
