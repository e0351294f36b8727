//! Cell volume fractions of balls and spherical shells.
//!
//! Each node owns the cube of side `h` centred on it. Cells cut by the
//! boundary are resolved by midpoint supersampling, which removes most of
//! the staircase error of a node-sampled indicator.

use crate::grid::GridSpec;
use alloc::vec;
use alloc::vec::Vec;

/// Supersampling factor per axis used for boundary cells.
pub const SUBSAMPLES: usize = 8;

/// Fraction of each cell inside `{ r_in < |x - c| <= r_out }`.
pub fn shell_fraction(grid: &GridSpec, center: [f64; 3], r_in: f64, r_out: f64) -> Vec<f64> {
    let h = grid.spacing();
    let half_diag = 0.5 * h * libm::sqrt(3.0);
    let s = SUBSAMPLES;
    let inside = |d2: f64| (r_in < 0.0 || d2 > r_in * r_in) && d2 <= r_out * r_out;
    let mut out = vec![0.0; grid.len()];
    for (idx, x) in grid.points().enumerate() {
        let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
        let r = libm::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        if r + half_diag <= r_out && r - half_diag > r_in {
            out[idx] = 1.0;
            continue;
        }
        if r - half_diag > r_out || (r + half_diag <= r_in) {
            continue;
        }
        let mut count = 0usize;
        for a in 0..s {
            let oa = d[0] + h * ((a as f64 + 0.5) / s as f64 - 0.5);
            for b in 0..s {
                let ob = d[1] + h * ((b as f64 + 0.5) / s as f64 - 0.5);
                for c in 0..s {
                    let oc = d[2] + h * ((c as f64 + 0.5) / s as f64 - 0.5);
                    if inside(oa * oa + ob * ob + oc * oc) {
                        count += 1;
                    }
                }
            }
        }
        out[idx] = count as f64 / (s * s * s) as f64;
    }
    out
}

/// Fraction of each cell inside the closed ball `|x - c| <= radius`.
pub fn ball_fraction(grid: &GridSpec, center: [f64; 3], radius: f64) -> Vec<f64> {
    shell_fraction(grid, center, -1.0, radius)
}
