//! Connectivity-based labeling and exact Euclidean distance transforms.

use crate::error::{Error, Result};
use crate::grid::{GeoGrid, GridGeometry, Mask, ZoneLabels, DEFAULT_NODATA};

/// Neighborhood used when deciding whether two cells touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    /// Edge neighbors only.
    Four,
    /// Edge and corner neighbors.
    Eight,
}

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Connectivity::Four => &[(0, 1), (1, 0), (0, -1), (-1, 0)],
            Connectivity::Eight => &[
                (0, 1),
                (1, 1),
                (1, 0),
                (1, -1),
                (0, -1),
                (-1, -1),
                (-1, 0),
                (-1, 1),
            ],
        }
    }
}

/// Labels connected components of the true cells. Components are numbered
/// from 1 in order of their first row-major cell, so the labeling is a pure
/// function of the mask. False cells get label 0.
pub fn connected_components(mask: &Mask, connectivity: Connectivity) -> ZoneLabels {
    let geom = mask.geometry();
    let offsets = connectivity.offsets();
    let mut labels = vec![0u32; geom.len()];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..geom.len() {
        if !mask.cells()[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let (r, c) = geom.rc(idx);
            for &(dr, dc) in offsets {
                let nr = r as isize + dr;
                let nc = c as isize + dc;
                if nr < 0 || nc < 0 || nr >= geom.rows as isize || nc >= geom.cols as isize {
                    continue;
                }
                let nidx = geom.idx(nr as usize, nc as usize);
                if mask.cells()[nidx] && labels[nidx] == 0 {
                    labels[nidx] = next;
                    stack.push(nidx);
                }
            }
        }
    }
    ZoneLabels::new(geom, labels).expect("label buffer sized from geometry")
}

/// Exact Euclidean distance in meters from every cell to the nearest true
/// cell of `sources`. Source cells get 0. Errors when the mask is empty.
///
/// Runs the two-pass lower-envelope-of-parabolas transform on squared cell
/// distances, which is exact for grid geometry, then scales by `cellsize`.
pub fn euclidean_distance(sources: &Mask) -> Result<GeoGrid> {
    if !sources.any() {
        return Err(Error::NoSourceCells);
    }
    let geom = sources.geometry();
    let sq = squared_cell_distance(sources, geom);
    let cells = sq.into_iter().map(|d2| geom.cellsize * d2.sqrt()).collect();
    GeoGrid::new(geom, DEFAULT_NODATA, cells)
}

/// Large finite stand-in for "no source in this column yet". Kept finite so
/// the envelope intersections below never hit inf - inf.
const FAR: f64 = 1e20;

fn squared_cell_distance(sources: &Mask, geom: GridGeometry) -> Vec<f64> {
    let (rows, cols) = (geom.rows, geom.cols);
    let n = rows.max(cols);
    let mut work = vec![0.0f64; geom.len()];
    let mut f = vec![0.0f64; n];
    let mut d = vec![0.0f64; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];

    for col in 0..cols {
        for (row, slot) in f.iter_mut().enumerate().take(rows) {
            *slot = if sources.cells()[geom.idx(row, col)] {
                0.0
            } else {
                FAR
            };
        }
        envelope_1d(&f[..rows], &mut d, &mut v, &mut z);
        for row in 0..rows {
            work[geom.idx(row, col)] = d[row];
        }
    }
    for row in 0..rows {
        f[..cols].copy_from_slice(&work[row * cols..(row + 1) * cols]);
        envelope_1d(&f[..cols], &mut d, &mut v, &mut z);
        work[row * cols..(row + 1) * cols].copy_from_slice(&d[..cols]);
    }
    work
}

/// One-dimensional squared distance transform under a seed cost `f`.
fn envelope_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s;
        loop {
            let p = v[k];
            s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2 * (q - p)) as f64;
            if s <= z[k] && k > 0 {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, slot) in d.iter_mut().enumerate().take(n) {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *slot = dq * dq + f[p];
    }
}
