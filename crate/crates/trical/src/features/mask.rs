//! Dense bit masks over the image grid and a Euclidean distance field.

use serde::{Deserialize, Serialize};

/// Row-major bit mask over a w x h pixel grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BitMask2d {
    pub width: u32,
    pub height: u32,
    words: Vec<u64>,
}

impl BitMask2d {
    pub fn new(width: u32, height: u32) -> Self {
        let n = (width as usize * height as usize).div_ceil(64);
        BitMask2d { width, height, words: vec![0; n] }
    }

    #[inline]
    fn bit(&self, x: u32, y: u32) -> (usize, u64) {
        let idx = y as usize * self.width as usize + x as usize;
        (idx >> 6, 1u64 << (idx & 63))
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        let (w, m) = self.bit(x, y);
        self.words[w] & m != 0
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32) {
        let (w, m) = self.bit(x, y);
        self.words[w] |= m;
    }

    /// Lookup at float pixel coordinates; out-of-bounds reads as false.
    #[inline]
    pub fn get_at(&self, u: f64, v: f64) -> bool {
        if u < 0.0 || v < 0.0 {
            return false;
        }
        let (x, y) = (u as u32, v as u32);
        x < self.width && y < self.height && self.get(x, y)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }
}

/// Euclidean distance field to the nearest set pixel of a mask, stored at
/// half resolution (enough precision for gated, width-normalized distances;
/// exact zero-inside-mask decisions are made against the full-res mask).
#[derive(Clone, Debug)]
pub struct DistanceField {
    w: usize,
    h: usize,
    /// Distance in full-resolution pixels at each half-res cell center.
    data: Vec<f32>,
}

const DOWN: usize = 2;

impl DistanceField {
    pub fn from_mask(mask: &BitMask2d) -> Self {
        let w = (mask.width as usize).div_ceil(DOWN);
        let h = (mask.height as usize).div_ceil(DOWN);
        let mut occupied = vec![false; w * h];
        for y in 0..mask.height {
            for x in 0..mask.width {
                if mask.get(x, y) {
                    occupied[(y as usize / DOWN) * w + x as usize / DOWN] = true;
                }
            }
        }
        let sq = edt_squared(&occupied, w, h);
        let data = sq.iter().map(|&d| (d.sqrt() * DOWN as f64) as f32).collect();
        DistanceField { w, h, data }
    }

    /// Distance (full-res pixels) from a full-res pixel position to the
    /// nearest mask pixel, bilinearly interpolated.
    pub fn query(&self, u: f64, v: f64) -> f64 {
        let x = (u / DOWN as f64 - 0.5).clamp(0.0, (self.w - 1) as f64);
        let y = (v / DOWN as f64 - 0.5).clamp(0.0, (self.h - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.w - 1);
        let y1 = (y0 + 1).min(self.h - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let at = |xi: usize, yi: usize| self.data[yi * self.w + xi] as f64;
        let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
        let bot = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
        top * (1.0 - fy) + bot * fy
    }
}

/// Exact squared Euclidean distance transform (two-pass lower-envelope
/// algorithm), `f = 0` on occupied cells and infinity elsewhere.
fn edt_squared(occupied: &[bool], w: usize, h: usize) -> Vec<f64> {
    const INF: f64 = 1e18;
    let mut grid: Vec<f64> = occupied.iter().map(|&o| if o { 0.0 } else { INF }).collect();
    let mut f = vec![0.0; w.max(h)];
    let mut d = vec![0.0; w.max(h)];
    let mut vidx = vec![0usize; w.max(h)];
    let mut z = vec![0.0; w.max(h) + 1];

    let transform_1d = |f: &[f64], n: usize, d: &mut [f64], vx: &mut [usize], z: &mut [f64]| {
        let mut k = 0usize;
        vx[0] = 0;
        z[0] = -INF;
        z[1] = INF;
        for q in 1..n {
            loop {
                let vk = vx[k];
                let s = ((f[q] + (q * q) as f64) - (f[vk] + (vk * vk) as f64))
                    / (2.0 * q as f64 - 2.0 * vk as f64);
                if s <= z[k] {
                    if k == 0 {
                        // q dominates from the start
                        vx[0] = q;
                        z[0] = -INF;
                        z[1] = INF;
                        break;
                    }
                    k -= 1;
                } else {
                    k += 1;
                    vx[k] = q;
                    z[k] = s;
                    z[k + 1] = INF;
                    break;
                }
            }
        }
        let mut k = 0usize;
        for q in 0..n {
            while z[k + 1] < q as f64 {
                k += 1;
            }
            let vk = vx[k];
            let dq = q as f64 - vk as f64;
            d[q] = dq * dq + f[vk];
        }
    };

    // Columns.
    for x in 0..w {
        for y in 0..h {
            f[y] = grid[y * w + x];
        }
        transform_1d(&f, h, &mut d, &mut vidx, &mut z);
        for y in 0..h {
            grid[y * w + x] = d[y];
        }
    }
    // Rows.
    for y in 0..h {
        f[..w].copy_from_slice(&grid[y * w..y * w + w]);
        transform_1d(&f, w, &mut d, &mut vidx, &mut z);
        grid[y * w..y * w + w].copy_from_slice(&d[..w]);
    }
    grid
}
