//! Per-quad lookup tables from quantized difference-RGB values to surface
//! gradients.
//!
//! Keys are the signed per-channel differences against the reference frame,
//! clamped and quantized to `bits` per channel. Colliding keys average
//! their gradients. Misses are resolved by inverse-distance weighting over
//! the k nearest stored keys (distance in quantized RGB space); the full
//! key cube is resolved once at finalize so runtime lookups are one array
//! read.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RgbQuantizer {
    pub bits: u8,
    /// Differences are clamped to [-clamp, clamp] before quantization.
    pub clamp: f32,
}

impl Default for RgbQuantizer {
    fn default() -> Self {
        RgbQuantizer {
            bits: 5,
            clamp: 160.0,
        }
    }
}

impl RgbQuantizer {
    pub fn n_bins(&self) -> u32 {
        1 << self.bits
    }

    pub fn n_keys(&self) -> usize {
        1usize << (3 * self.bits)
    }

    #[inline]
    pub fn bin(&self, diff: f32) -> u32 {
        let t = (diff.clamp(-self.clamp, self.clamp) + self.clamp) / (2.0 * self.clamp);
        ((t * self.n_bins() as f32) as u32).min(self.n_bins() - 1)
    }

    #[inline]
    pub fn key(&self, diff: [f32; 3]) -> u16 {
        let b = self.bits;
        ((self.bin(diff[0]) << (2 * b)) | (self.bin(diff[1]) << b) | self.bin(diff[2])) as u16
    }

    #[inline]
    pub fn unpack(&self, key: u16) -> [u32; 3] {
        let b = self.bits;
        let mask = self.n_bins() - 1;
        [
            (key as u32 >> (2 * b)) & mask,
            (key as u32 >> b) & mask,
            key as u32 & mask,
        ]
    }
}

/// Accumulates gradient samples per quantized key.
#[derive(Debug, Default, Clone)]
pub struct LutBuilder {
    sums: HashMap<u16, (f64, f64, u64)>,
}

impl LutBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, key: u16, gx: f64, gy: f64) {
        let e = self.sums.entry(key).or_insert((0.0, 0.0, 0));
        e.0 += gx;
        e.1 += gy;
        e.2 += 1;
    }

    pub fn sample_count(&self) -> u64 {
        self.sums.values().map(|e| e.2).sum()
    }

    pub fn finalize(&self, quad_id: usize, quantizer: RgbQuantizer, knn: usize) -> Result<LookupTable> {
        if self.sums.is_empty() {
            return Err(Error::TableMissing(quad_id));
        }
        let mut entries: Vec<(u16, f32, f32)> = self
            .sums
            .iter()
            .map(|(k, (sx, sy, n))| (*k, (sx / *n as f64) as f32, (sy / *n as f64) as f32))
            .collect();
        entries.sort_unstable_by_key(|e| e.0);
        Ok(LookupTable::from_entries(quad_id, quantizer, entries, knn))
    }
}

/// Finalized RGB-difference to gradient table for one quad.
#[derive(Debug, Clone)]
pub struct LookupTable {
    pub quad_id: usize,
    pub quantizer: RgbQuantizer,
    /// Averaged stored keys, sorted by key.
    entries: Vec<(u16, f32, f32)>,
    /// Dense gradient per possible key (stored plus k-NN interpolated).
    dense: Vec<(f32, f32)>,
}

impl LookupTable {
    pub fn from_entries(
        quad_id: usize,
        quantizer: RgbQuantizer,
        entries: Vec<(u16, f32, f32)>,
        knn: usize,
    ) -> Self {
        let dense = fill_dense(&quantizer, &entries, knn);
        LookupTable {
            quad_id,
            quantizer,
            entries,
            dense,
        }
    }

    pub fn entries(&self) -> &[(u16, f32, f32)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Gradient stored exactly at `key`, if the key was observed.
    pub fn gradient_exact(&self, key: u16) -> Option<(f32, f32)> {
        self.entries
            .binary_search_by_key(&key, |e| e.0)
            .ok()
            .map(|i| (self.entries[i].1, self.entries[i].2))
    }

    /// Gradient for any key: stored value on a hit, inverse-distance
    /// weighted average of the nearest stored keys on a miss.
    #[inline]
    pub fn gradient(&self, key: u16) -> (f32, f32) {
        self.dense[key as usize]
    }
}

/// Exact k nearest stored keys by Euclidean distance in bin space,
/// ties broken by key order.
pub fn k_nearest(
    quantizer: &RgbQuantizer,
    entries: &[(u16, f32, f32)],
    key: u16,
    k: usize,
) -> Vec<(f64, u16, f32, f32)> {
    let q = quantizer.unpack(key);
    let mut all: Vec<(f64, u16, f32, f32)> = entries
        .iter()
        .map(|&(ek, gx, gy)| {
            let e = quantizer.unpack(ek);
            let d2 = (0..3)
                .map(|i| (q[i] as f64 - e[i] as f64).powi(2))
                .sum::<f64>();
            (d2.sqrt(), ek, gx, gy)
        })
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(k);
    all
}

/// Inverse-distance weighted average of a neighbor set.
pub fn inverse_distance_blend(neighbors: &[(f64, u16, f32, f32)]) -> (f32, f32) {
    let mut wx = 0.0f64;
    let mut wy = 0.0f64;
    let mut wsum = 0.0f64;
    for &(d, _, gx, gy) in neighbors {
        let w = 1.0 / d.max(1e-9);
        wx += w * gx as f64;
        wy += w * gy as f64;
        wsum += w;
    }
    if wsum <= 0.0 {
        (0.0, 0.0)
    } else {
        ((wx / wsum) as f32, (wy / wsum) as f32)
    }
}

/// Resolves every key of the cube. Occupied keys keep their stored value;
/// the rest get the k-NN inverse-distance blend. A Chebyshev distance
/// transform seeds a bounded shell search per key, keeping the fill exact
/// without scanning the whole cube for every query.
fn fill_dense(
    quantizer: &RgbQuantizer,
    entries: &[(u16, f32, f32)],
    knn: usize,
) -> Vec<(f32, f32)> {
    let n = quantizer.n_bins() as i32;
    let n_keys = quantizer.n_keys();
    let mut dense = vec![(0.0f32, 0.0f32); n_keys];
    if entries.is_empty() {
        return dense;
    }
    let bits = quantizer.bits;
    let pack =
        |r: i32, g: i32, b: i32| -> usize { ((r << (2 * bits)) | (g << bits) | b) as usize };

    let mut stored: Vec<Option<(f32, f32)>> = vec![None; n_keys];
    for &(k, gx, gy) in entries {
        stored[k as usize] = Some((gx, gy));
        dense[k as usize] = (gx, gy);
    }

    // Chebyshev distance to the nearest stored key, by BFS over the
    // 26-neighborhood (exact for the Chebyshev metric).
    let mut dist = vec![u16::MAX; n_keys];
    let mut frontier: Vec<usize> = entries.iter().map(|e| e.0 as usize).collect();
    for &i in &frontier {
        dist[i] = 0;
    }
    let mut d = 0u16;
    while !frontier.is_empty() {
        d += 1;
        let mut next = Vec::new();
        for &idx in &frontier {
            let r = (idx >> (2 * bits)) as i32;
            let g = ((idx >> bits) & ((1 << bits) - 1)) as i32;
            let b = (idx & ((1 << bits) - 1)) as i32;
            for dr in -1..=1 {
                for dg in -1..=1 {
                    for db in -1..=1 {
                        let (nr, ng, nb) = (r + dr, g + dg, b + db);
                        if nr < 0 || ng < 0 || nb < 0 || nr >= n || ng >= n || nb >= n {
                            continue;
                        }
                        let ni = pack(nr, ng, nb);
                        if dist[ni] == u16::MAX {
                            dist[ni] = d;
                            next.push(ni);
                        }
                    }
                }
            }
        }
        frontier = next;
    }

    // Per-key bounded shell search for the exact k nearest stored keys.
    let mut candidates: Vec<(f64, u16, f32, f32)> = Vec::new();
    for key in 0..n_keys {
        if stored[key].is_some() {
            continue;
        }
        let r0 = (key >> (2 * bits)) as i32;
        let g0 = ((key >> bits) & ((1 << bits) - 1)) as i32;
        let b0 = (key & ((1 << bits) - 1)) as i32;
        candidates.clear();
        let mut rho = dist[key] as i32;
        let mut kth_dist = f64::INFINITY;
        loop {
            // Scan the shell at Chebyshev radius rho.
            let scan = |candidates: &mut Vec<(f64, u16, f32, f32)>, r: i32, g: i32, b: i32| {
                if r < 0 || g < 0 || b < 0 || r >= n || g >= n || b >= n {
                    return;
                }
                let idx = pack(r, g, b);
                if let Some((gx, gy)) = stored[idx] {
                    let d2 = ((r - r0) as f64).powi(2)
                        + ((g - g0) as f64).powi(2)
                        + ((b - b0) as f64).powi(2);
                    candidates.push((d2.sqrt(), idx as u16, gx, gy));
                }
            };
            if rho == 0 {
                scan(&mut candidates, r0, g0, b0);
            } else {
                for dr in -rho..=rho {
                    for dg in -rho..=rho {
                        if dr.abs() == rho || dg.abs() == rho {
                            for db in -rho..=rho {
                                scan(&mut candidates, r0 + dr, g0 + dg, b0 + db);
                            }
                        } else {
                            scan(&mut candidates, r0 + dr, g0 + dg, b0 - rho);
                            scan(&mut candidates, r0 + dr, g0 + dg, b0 + rho);
                        }
                    }
                }
            }
            if candidates.len() >= knn {
                candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                kth_dist = candidates[knn.min(candidates.len()) - 1].0;
            }
            // Shells beyond rho only contain keys at Euclidean distance
            // > rho, so once the kth candidate is within rho we are done.
            if (candidates.len() >= knn && kth_dist <= rho as f64) || rho >= 3 * n {
                break;
            }
            rho += 1;
        }
        candidates.truncate(knn);
        dense[key] = inverse_distance_blend(&candidates);
    }
    dense
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quantizer() -> RgbQuantizer {
        RgbQuantizer::default()
    }

    #[test]
    fn quantizer_covers_range_and_packs() {
        let q = quantizer();
        assert_eq!(q.bin(-1000.0), 0);
        assert_eq!(q.bin(1000.0), 31);
        assert_eq!(q.bin(0.0), 16);
        let key = q.key([0.0, -160.0, 159.9]);
        assert_eq!(q.unpack(key), [16, 0, 31]);
    }

    #[test]
    fn exact_key_returns_stored_gradient() {
        let q = quantizer();
        let mut b = LutBuilder::new();
        let key = q.key([10.0, -20.0, 5.0]);
        b.add(key, 0.4, -0.2);
        let lut = b.finalize(3, q, 4).unwrap();
        assert_eq!(lut.gradient(key), (0.4, -0.2));
        assert_eq!(lut.gradient_exact(key), Some((0.4, -0.2)));
    }

    #[test]
    fn colliding_keys_average() {
        let q = quantizer();
        let mut b = LutBuilder::new();
        let key = q.key([10.0, -20.0, 5.0]);
        b.add(key, 0.4, -0.2);
        b.add(key, 0.8, 0.2);
        let lut = b.finalize(0, q, 4).unwrap();
        let (gx, gy) = lut.gradient(key);
        assert!((gx - 0.6).abs() < 1e-6 && gy.abs() < 1e-6);
    }

    #[test]
    fn double_feeding_is_idempotent() {
        let q = quantizer();
        let samples = [(100u16, 0.3, 0.1), (100, 0.5, -0.1), (200, -0.2, 0.0)];
        let mut once = LutBuilder::new();
        let mut twice = LutBuilder::new();
        for &(k, gx, gy) in &samples {
            once.add(k, gx, gy);
            twice.add(k, gx, gy);
        }
        for &(k, gx, gy) in &samples {
            twice.add(k, gx, gy);
        }
        let a = once.finalize(0, q, 4).unwrap();
        let b = twice.finalize(0, q, 4).unwrap();
        assert_eq!(a.entries(), b.entries());
    }

    #[test]
    fn equidistant_pair_blends_to_mean() {
        let q = quantizer();
        let k1 = q.key([-40.0, 0.0, 0.0]);
        let k2 = q.key([40.0, 0.0, 0.0]);
        let lut = LookupTable::from_entries(
            0,
            q,
            vec![
                (k1.min(k2), 1.0, 0.5),
                (k1.max(k2), 3.0, -0.5),
            ],
            4,
        );
        // The midpoint key is equidistant from both stored keys.
        let mid = q.key([0.0, 0.0, 0.0]);
        let (gx, gy) = lut.gradient(mid);
        assert!((gx - 2.0).abs() < 1e-5, "gx {gx}");
        assert!(gy.abs() < 1e-5, "gy {gy}");
    }

    #[test]
    fn unseen_keys_blend_within_neighbor_hull() {
        // Compare the dense fill against a brute-force k-NN oracle on a
        // scattering of stored keys.
        let q = quantizer();
        let mut b = LutBuilder::new();
        let mut state = 123456789u64;
        let mut rand01 = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 33) as f32 / (1u64 << 31) as f32
        };
        for _ in 0..60 {
            let diff = [
                (rand01() - 0.5) * 200.0,
                (rand01() - 0.5) * 200.0,
                (rand01() - 0.5) * 200.0,
            ];
            b.add(q.key(diff), (rand01() * 2.0 - 1.0) as f64, (rand01() * 2.0 - 1.0) as f64);
        }
        let lut = b.finalize(0, q, 4).unwrap();
        for probe in [77u16, 1234, 9999, 20000, 31000] {
            if lut.gradient_exact(probe).is_some() {
                continue;
            }
            let oracle = k_nearest(&q, lut.entries(), probe, 4);
            let expect = inverse_distance_blend(&oracle);
            let got = lut.gradient(probe);
            assert!(
                (got.0 - expect.0).abs() < 1e-5 && (got.1 - expect.1).abs() < 1e-5,
                "dense fill diverges from oracle at {probe}: {got:?} vs {expect:?}"
            );
            // Within the convex hull of the neighbor gradients.
            let (lo_x, hi_x) = oracle
                .iter()
                .fold((f32::MAX, f32::MIN), |(lo, hi), e| (lo.min(e.2), hi.max(e.2)));
            assert!(got.0 >= lo_x - 1e-5 && got.0 <= hi_x + 1e-5);
        }
    }

    #[test]
    fn empty_builder_is_table_missing() {
        let b = LutBuilder::new();
        assert!(matches!(
            b.finalize(7, quantizer(), 4),
            Err(Error::TableMissing(7))
        ));
    }
}
