//! Circle Hough transform on difference images.
//!
//! The probe contact shows up as a bright disc in the difference between a
//! poke frame and the no-contact reference. Edge pixels are taken from the
//! boundary of the thresholded contact mask; each edge pixel votes for
//! candidate centers at every radius in the search range, and the
//! highest-vote circle wins. A small centroid refinement around the peak
//! gives sub-pixel center and radius.

use crate::error::{Error, Result};
use crate::sim::SensorFrame;

#[derive(Debug, Clone)]
pub struct HoughConfig {
    pub r_min: f64,
    pub r_max: f64,
    /// Contact mask threshold on the max-channel absolute difference.
    pub mask_threshold: f64,
    /// Minimum vote fraction of the circle perimeter to accept a peak.
    pub min_support: f64,
}

impl Default for HoughConfig {
    fn default() -> Self {
        HoughConfig {
            r_min: 6.0,
            r_max: 90.0,
            mask_threshold: 12.0,
            min_support: 0.22,
        }
    }
}

impl HoughConfig {
    /// Search range around an expected contact radius, +/-30% plus slack.
    pub fn around_radius(expected_px: f64) -> Self {
        HoughConfig {
            r_min: (expected_px * 0.7 - 2.0).max(3.0),
            r_max: expected_px * 1.3 + 4.0,
            ..HoughConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CircleDetection {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub votes: u32,
}

/// Boundary pixels of the thresholded difference mask.
pub fn contact_edge_pixels(
    frame: &SensorFrame,
    reference: &SensorFrame,
    mask_threshold: f64,
) -> Result<Vec<(u32, u32)>> {
    if frame.width != reference.width || frame.height != reference.height {
        return Err(Error::invalid_input("frame and reference resolutions differ"));
    }
    let (w, h) = (frame.width as usize, frame.height as usize);
    let mut mask = vec![false; w * h];
    for i in 0..w * h {
        let mut m = 0i16;
        for c in 0..3 {
            let d = frame.pixels[i * 3 + c] as i16 - reference.pixels[i * 3 + c] as i16;
            m = m.max(d.abs());
        }
        mask[i] = m as f64 > mask_threshold;
    }
    let mut edges = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask[y * w + x] {
                continue;
            }
            let boundary = x == 0
                || y == 0
                || x == w - 1
                || y == h - 1
                || !mask[y * w + x - 1]
                || !mask[y * w + x + 1]
                || !mask[(y - 1) * w + x]
                || !mask[(y + 1) * w + x];
            if boundary {
                edges.push((x as u32, y as u32));
            }
        }
    }
    Ok(edges)
}

/// Finds the strongest circle in the difference between `frame` and
/// `reference`.
pub fn detect_circle(
    frame: &SensorFrame,
    reference: &SensorFrame,
    config: &HoughConfig,
) -> Result<CircleDetection> {
    let edges = contact_edge_pixels(frame, reference, config.mask_threshold)?;
    detect_circle_from_edges(&edges, (frame.width, frame.height), config)
}

/// Hough accumulation over a prepared edge-pixel list.
pub fn detect_circle_from_edges(
    edges: &[(u32, u32)],
    resolution: (u32, u32),
    config: &HoughConfig,
) -> Result<CircleDetection> {
    if edges.len() < 6 {
        return Err(Error::NoContact);
    }
    let (w, h) = (resolution.0 as i64, resolution.1 as i64);
    let r_min = config.r_min.max(2.0).floor() as i64;
    let r_max = config.r_max.ceil() as i64;
    if r_min >= r_max {
        return Err(Error::invalid_parameter("empty Hough radius range"));
    }

    // Edge-pixel centroid: for a closed contact rim the center must be
    // inside its bounding box, which bounds the accumulator region.
    let (mut x0, mut y0, mut x1, mut y1) = (i64::MAX, i64::MAX, i64::MIN, i64::MIN);
    for &(x, y) in edges {
        x0 = x0.min(x as i64);
        y0 = y0.min(y as i64);
        x1 = x1.max(x as i64);
        y1 = y1.max(y as i64);
    }
    let pad = 4;
    let x0 = (x0 - pad).max(0);
    let y0 = (y0 - pad).max(0);
    let x1 = (x1 + pad).min(w - 1);
    let y1 = (y1 + pad).min(h - 1);
    let aw = (x1 - x0 + 1) as usize;
    let ah = (y1 - y0 + 1) as usize;

    // Voting uses a subsampled edge list; support checks use every pixel.
    let stride = (edges.len() / 220).max(1);
    let voting: Vec<(u32, u32)> = edges.iter().copied().step_by(stride).collect();

    let mut best: Option<(u32, i64, i64, i64)> = None; // votes, cx, cy, r
    let mut acc = vec![0u32; aw * ah];
    let mut touched: Vec<usize> = Vec::with_capacity(voting.len() * 64);
    for r in r_min..=r_max {
        // No gradient orientation is available on a mask boundary, so each
        // edge pixel votes the full circle of candidate centers at
        // distance r, sampled at ~2 px arc steps.
        touched.clear();
        let steps = ((std::f64::consts::PI * r as f64).ceil() as usize).max(16);
        for &(ex, ey) in &voting {
            for k in 0..steps {
                let ang = k as f64 / steps as f64 * std::f64::consts::TAU;
                let cx = (ex as f64 + r as f64 * ang.cos()).round() as i64;
                let cy = (ey as f64 + r as f64 * ang.sin()).round() as i64;
                if cx < x0 || cx > x1 || cy < y0 || cy > y1 {
                    continue;
                }
                let idx = (cy - y0) as usize * aw + (cx - x0) as usize;
                acc[idx] += 1;
                touched.push(idx);
            }
        }
        // Peak for this radius: votes are duplicated along the arc, so a
        // center collects ~steps/perimeter votes per supporting edge pixel.
        for &idx in &touched {
            let v = acc[idx];
            if v > 0 {
                let cx = x0 + (idx % aw) as i64;
                let cy = y0 + (idx / aw) as i64;
                let better = match best {
                    None => true,
                    Some((bv, bx, by, br)) => {
                        v > bv || (v == bv && (cy, cx, r) < (by, bx, br))
                    }
                };
                if better {
                    best = Some((v, cx, cy, r));
                }
            }
        }
        for &idx in &touched {
            acc[idx] = 0;
        }
    }

    let Some((votes, cx, cy, r)) = best else {
        return Err(Error::NoContact);
    };
    // Support check: count distinct edge pixels on the winning annulus.
    let support = edges
        .iter()
        .filter(|&&(ex, ey)| {
            let d = ((ex as f64 - cx as f64).powi(2) + (ey as f64 - cy as f64).powi(2)).sqrt();
            (d - r as f64).abs() <= 1.5
        })
        .count() as f64;
    if support < config.min_support * 2.0 * std::f64::consts::PI * r as f64 {
        return Err(Error::NoContact);
    }

    // Sub-pixel refinement: support-weighted centroid over a small
    // neighborhood in (cx, cy, r).
    let mut num = [0.0f64; 3];
    let mut den = 0.0f64;
    for dr in -1..=1i64 {
        for dy in -1..=1i64 {
            for dx in -1..=1i64 {
                let (ccx, ccy, cr) = (cx + dx, cy + dy, r + dr);
                if cr < r_min {
                    continue;
                }
                let s = edges
                    .iter()
                    .filter(|&&(ex, ey)| {
                        let d = ((ex as f64 - ccx as f64).powi(2)
                            + (ey as f64 - ccy as f64).powi(2))
                        .sqrt();
                        (d - cr as f64).abs() <= 0.71
                    })
                    .count() as f64;
                num[0] += s * ccx as f64;
                num[1] += s * ccy as f64;
                num[2] += s * cr as f64;
                den += s;
            }
        }
    }
    let (fx, fy, fr) = if den > 0.0 {
        (num[0] / den, num[1] / den, num[2] / den)
    } else {
        (cx as f64, cy as f64, r as f64)
    };
    Ok(CircleDetection {
        cx: fx,
        cy: fy,
        radius: fr,
        votes,
    })
}
