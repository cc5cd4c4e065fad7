//! Water-body screening and DEM conditioning.
//!
//! Mapped water rasters mix broad, persistent water (rivers, lakes,
//! reservoirs) with transient specks. Only the persistent bodies should
//! anchor drainage, so components are screened by shape and size before the
//! terrain is carved to honor them.

use crate::error::{Error, Result};
use crate::grid::{GeoGrid, Mask};
use crate::spatial::{connected_components, Connectivity};

/// Shape summary of one water component.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentGeometry {
    pub label: u32,
    pub cell_count: usize,
    /// Area in square meters.
    pub area: f64,
    /// Total exposed edge length in meters. An edge is exposed when the
    /// neighbor across it is outside the component's mask or outside the
    /// grid.
    pub perimeter: f64,
    /// Shape-weighted index: perimeter / sqrt(area). Near 4 for blocks,
    /// large for elongated bodies.
    pub swi: f64,
}

/// Screening thresholds for steady (persistent) water.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyWaterParams {
    pub swi_min: f64,
    pub swi_max: f64,
    /// Components at or above this many cells count as steady regardless of
    /// shape.
    pub min_area_cells: usize,
}

impl Default for SteadyWaterParams {
    fn default() -> Self {
        SteadyWaterParams {
            swi_min: 6.0,
            swi_max: 200.0,
            min_area_cells: 78,
        }
    }
}

/// Measures every 8-connected component of the water mask.
pub fn component_geometry(water: &Mask) -> Vec<ComponentGeometry> {
    let geom = water.geometry();
    let zones = connected_components(water, Connectivity::Eight);
    let n = zones.max_label() as usize;
    let mut count = vec![0usize; n + 1];
    let mut edges = vec![0usize; n + 1];
    for r in 0..geom.rows {
        for c in 0..geom.cols {
            let l = zones.get(r, c) as usize;
            if l == 0 {
                continue;
            }
            count[l] += 1;
            for dir in [0usize, 2, 4, 6] {
                let exposed = match geom.neighbor(r, c, dir) {
                    Some((nr, nc)) => !water.get(nr, nc),
                    None => true,
                };
                if exposed {
                    edges[l] += 1;
                }
            }
        }
    }
    let cs = geom.cellsize;
    (1..=n)
        .map(|l| {
            let area = count[l] as f64 * cs * cs;
            let perimeter = edges[l] as f64 * cs;
            ComponentGeometry {
                label: l as u32,
                cell_count: count[l],
                area,
                perimeter,
                swi: perimeter / area.sqrt(),
            }
        })
        .collect()
}

/// Keeps the water components that read as persistent: shape index within
/// `[swi_min, swi_max]`, or at least `min_area_cells` cells.
pub fn classify_steady_water(water: &Mask, params: &SteadyWaterParams) -> Mask {
    let geom = water.geometry();
    let zones = connected_components(water, Connectivity::Eight);
    let stats = component_geometry(water);
    let mut keep = vec![false; stats.len() + 1];
    for s in &stats {
        let shape_ok = s.swi >= params.swi_min && s.swi <= params.swi_max;
        let size_ok = s.cell_count >= params.min_area_cells;
        keep[s.label as usize] = shape_ok || size_ok;
    }
    let cells = zones
        .labels()
        .iter()
        .map(|&l| l != 0 && keep[l as usize])
        .collect();
    Mask::new(geom, cells).expect("mask sized from geometry")
}

/// Carves steady water into the DEM: every cell of a steady component is
/// flattened to that component's minimum elevation minus `burn_depth`.
/// Non-water and nodata cells pass through unchanged.
pub fn burn_hydrology(dem: &GeoGrid, steady_water: &Mask, burn_depth: f64) -> Result<GeoGrid> {
    dem.geometry()
        .ensure_matches(&steady_water.geometry(), "burn_hydrology")?;
    if !(burn_depth.is_finite() && burn_depth >= 0.0) {
        return Err(Error::InvalidGrid(format!(
            "burn depth must be finite and non-negative, got {burn_depth}"
        )));
    }
    let zones = connected_components(steady_water, Connectivity::Eight);
    let n = zones.max_label() as usize;
    let mut floor = vec![f64::INFINITY; n + 1];
    for (i, &l) in zones.labels().iter().enumerate() {
        if l != 0 && !dem.is_nodata_idx(i) {
            floor[l as usize] = floor[l as usize].min(dem.cells()[i]);
        }
    }
    let mut out = dem.clone();
    for (i, &l) in zones.labels().iter().enumerate() {
        if l == 0 || dem.is_nodata_idx(i) {
            continue;
        }
        out.cells_mut()[i] = floor[l as usize] - burn_depth;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridGeometry;

    fn water(rows: usize, cols: usize, cs: f64, cells: &[u8]) -> Mask {
        Mask::new(
            GridGeometry::new(rows, cols, cs),
            cells.iter().map(|&b| b != 0).collect(),
        )
        .unwrap()
    }

    #[test]
    fn square_block_has_shape_index_four() {
        let m = Mask::filled(GridGeometry::new(5, 5, 30.0), true);
        let stats = component_geometry(&m);
        assert_eq!(stats.len(), 1);
        assert_eq!(stats[0].cell_count, 25);
        assert!((stats[0].swi - 4.0).abs() < 1e-12);
    }

    #[test]
    fn small_square_rejected_large_square_kept() {
        // 5x5 block: shape index 4, below the default window, 25 cells.
        let small = Mask::filled(GridGeometry::new(5, 5, 30.0), true);
        let steady = classify_steady_water(&small, &SteadyWaterParams::default());
        assert_eq!(steady.count(), 0);

        // 9x9 block: same shape index but 81 cells, kept on size alone.
        let large = Mask::filled(GridGeometry::new(9, 9, 30.0), true);
        let steady = classify_steady_water(&large, &SteadyWaterParams::default());
        assert_eq!(steady.count(), 81);
    }

    #[test]
    fn long_strip_shape_index() {
        let n = 10_000usize;
        let m = Mask::filled(GridGeometry::new(1, n, 30.0), true);
        let stats = component_geometry(&m);
        // 2n + 2 exposed edges over sqrt(n) cells.
        let want = (2 * n + 2) as f64 / (n as f64).sqrt();
        assert!((stats[0].swi - want).abs() < 1e-9);
        assert!((stats[0].swi - 200.02).abs() < 1e-9);
        // Just above the default window by shape, kept by size.
        let steady = classify_steady_water(&m, &SteadyWaterParams::default());
        assert_eq!(steady.count(), n);
        let steady = classify_steady_water(
            &m,
            &SteadyWaterParams {
                min_area_cells: usize::MAX,
                ..SteadyWaterParams::default()
            },
        );
        assert_eq!(steady.count(), 0);
    }

    #[test]
    fn burn_without_steady_water_is_identity() {
        let geom = GridGeometry::new(2, 2, 1.0);
        let dem = GeoGrid::new(geom, -9999.0, vec![4.0, 3.0, 2.0, 1.0]).unwrap();
        let none = Mask::filled(geom, false);
        let out = burn_hydrology(&dem, &none, 10.0).unwrap();
        assert_eq!(out, dem);
    }

    #[test]
    fn single_cell_burns_to_own_floor() {
        let geom = GridGeometry::new(1, 1, 1.0);
        let dem = GeoGrid::new(geom, -9999.0, vec![10.0]).unwrap();
        let all = Mask::filled(geom, true);
        let out = burn_hydrology(&dem, &all, 10.0).unwrap();
        assert_eq!(out.get(0, 0), 0.0);
    }

    #[test]
    fn lake_flattens_to_component_minimum() {
        let geom = GridGeometry::new(1, 3, 1.0);
        let dem = GeoGrid::new(geom, -9999.0, vec![12.0, 11.0, 13.0]).unwrap();
        let lake = water(1, 3, 1.0, &[1, 1, 1]);
        let out = burn_hydrology(&dem, &lake, 10.0).unwrap();
        assert_eq!(out.cells(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn burn_never_raises_and_only_touches_water() {
        let geom = GridGeometry::new(2, 3, 1.0);
        let dem = GeoGrid::new(geom, -9999.0, vec![5.0, 6.0, 7.0, -9999.0, 9.0, 4.0]).unwrap();
        let lake = water(2, 3, 1.0, &[1, 1, 0, 1, 0, 0]);
        let out = burn_hydrology(&dem, &lake, 2.0).unwrap();
        for i in 0..6 {
            if dem.cells()[i] == -9999.0 {
                assert_eq!(out.cells()[i], -9999.0);
            } else if lake.cells()[i] {
                assert!(out.cells()[i] < dem.cells()[i]);
            } else {
                assert_eq!(out.cells()[i], dem.cells()[i]);
            }
        }
        // Component {(0,0),(0,1),(1,0)} has valid floor 5; all valid members
        // land on 3.
        assert_eq!(out.get(0, 0), 3.0);
        assert_eq!(out.get(0, 1), 3.0);
        assert!(out.is_nodata(1, 0));
    }
}
