//! Indicator rating: slope computation and the conversion of raw criterion
//! rasters into 0-5 susceptibility ratings.

use crate::error::{Error, Result};
use crate::grid::{GeoGrid, Mask, DEFAULT_NODATA};
use crate::spatial::euclidean_distance;
use crate::streams::StreamNetwork;
use std::cmp::Ordering;

/// A grid whose valid cells hold integer ratings 0..=5.
pub type RatedGrid = GeoGrid;

/// Slope in degrees via the three-by-three weighted-difference stencil.
/// Off-grid neighbors mirror across the edge; nodata neighbors borrow the
/// center elevation; nodata centers stay nodata.
pub fn compute_slope(dem: &GeoGrid) -> GeoGrid {
    let geom = dem.geometry();
    let reflect = |i: isize, n: usize| -> usize {
        let m = if i < 0 {
            -i
        } else if i >= n as isize {
            2 * (n as isize - 1) - i
        } else {
            i
        };
        m.clamp(0, n as isize - 1) as usize
    };
    let mut out = GeoGrid::filled(geom, DEFAULT_NODATA, DEFAULT_NODATA)
        .expect("geometry validated by source grid");
    for r in 0..geom.rows {
        for c in 0..geom.cols {
            let Some(z0) = dem.value(r, c) else {
                continue;
            };
            let zat = |dr: isize, dc: isize| -> f64 {
                let rr = reflect(r as isize + dr, geom.rows);
                let cc = reflect(c as isize + dc, geom.cols);
                dem.value(rr, cc).unwrap_or(z0)
            };
            let (nw, n, ne) = (zat(-1, -1), zat(-1, 0), zat(-1, 1));
            let (w, e) = (zat(0, -1), zat(0, 1));
            let (sw, s, se) = (zat(1, -1), zat(1, 0), zat(1, 1));
            let gx = ((ne + 2.0 * e + se) - (nw + 2.0 * w + sw)) / (8.0 * geom.cellsize);
            let gy = ((sw + 2.0 * s + se) - (nw + 2.0 * n + ne)) / (8.0 * geom.cellsize);
            out.set(r, c, (gx * gx + gy * gy).sqrt().atan().to_degrees());
        }
    }
    out
}

/// How raw criterion values map onto ratings.
#[derive(Debug, Clone, PartialEq)]
pub enum RatingScheme {
    /// Ordered classes `(upper_bound, rating)`; a value lands in the first
    /// class whose upper bound it does not exceed. An infinite final bound
    /// makes the scheme total.
    Numeric(Vec<(f64, u8)>),
    /// Exact lookup by integer category code.
    Categorical(Vec<(i64, u8)>),
}

impl RatingScheme {
    pub fn numeric(classes: Vec<(f64, u8)>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::BadScheme("no classes".into()));
        }
        for pair in classes.windows(2) {
            if pair[0].0.partial_cmp(&pair[1].0) != Some(Ordering::Less) {
                return Err(Error::BadScheme(format!(
                    "class bounds must ascend strictly: {} then {}",
                    pair[0].0, pair[1].0
                )));
            }
        }
        for &(bound, rating) in &classes {
            if bound.is_nan() {
                return Err(Error::BadScheme("NaN class bound".into()));
            }
            if rating > 5 {
                return Err(Error::BadScheme(format!("rating {rating} above 5")));
            }
        }
        Ok(RatingScheme::Numeric(classes))
    }

    pub fn categorical(table: Vec<(i64, u8)>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::BadScheme("empty lookup table".into()));
        }
        for pair in table.windows(2) {
            if pair[0].0 >= pair[1].0 {
                return Err(Error::BadScheme(format!(
                    "category codes must ascend strictly: {} then {}",
                    pair[0].0, pair[1].0
                )));
            }
        }
        for &(_, rating) in &table {
            if rating > 5 {
                return Err(Error::BadScheme(format!("rating {rating} above 5")));
            }
        }
        Ok(RatingScheme::Categorical(table))
    }

    /// Rating for one numeric value, when the scheme is numeric and covers it.
    pub fn rating_of(&self, value: f64) -> Option<u8> {
        match self {
            RatingScheme::Numeric(classes) => classes
                .iter()
                .find(|&&(bound, _)| value <= bound)
                .map(|&(_, rating)| rating),
            RatingScheme::Categorical(_) => None,
        }
    }

    /// Rating for one category code, when the scheme is categorical and maps it.
    pub fn rating_of_code(&self, code: i64) -> Option<u8> {
        match self {
            RatingScheme::Numeric(_) => None,
            RatingScheme::Categorical(table) => table
                .binary_search_by_key(&code, |&(c, _)| c)
                .ok()
                .map(|i| table[i].1),
        }
    }
}

/// Slope classes in degrees: flat terrain is most susceptible.
pub fn default_slope_scheme() -> RatingScheme {
    RatingScheme::Numeric(vec![
        (0.0, 5),
        (2.0, 4),
        (6.0, 3),
        (12.0, 2),
        (20.0, 1),
        (f64::INFINITY, 0),
    ])
}

/// Elevation classes in meters: low ground is most susceptible.
pub fn default_elevation_scheme() -> RatingScheme {
    RatingScheme::Numeric(vec![
        (12.0, 5),
        (23.0, 4),
        (46.0, 3),
        (152.0, 2),
        (f64::INFINITY, 1),
    ])
}

/// Land-use codes: 1 vegetation, 2 bare soil, 3 building, 4 road, 5 water.
pub fn default_landuse_scheme() -> RatingScheme {
    RatingScheme::Categorical(vec![(1, 1), (2, 2), (3, 3), (4, 4), (5, 5)])
}

/// Hydro-lithological codes: 1 pervious, 2 impervious, 3 water.
pub fn default_hydrolith_scheme() -> RatingScheme {
    RatingScheme::Categorical(vec![(1, 1), (2, 3), (3, 4)])
}

/// Rates a continuous raster through a numeric scheme. A value above every
/// bound is an error; schemes meant to be total end with an infinite bound.
pub fn rate_numeric(grid: &GeoGrid, scheme: &RatingScheme) -> Result<RatedGrid> {
    let RatingScheme::Numeric(classes) = scheme else {
        return Err(Error::BadScheme(
            "numeric rating needs a numeric scheme".into(),
        ));
    };
    let mut out = grid.clone();
    let top = classes.last().unwrap().0;
    for v in out.cells_mut() {
        if *v == grid.nodata() {
            *v = DEFAULT_NODATA;
            continue;
        }
        let Some(&(_, rating)) = classes.iter().find(|&&(bound, _)| *v <= bound) else {
            return Err(Error::ValueOutOfRange {
                value: *v,
                bound: top,
            });
        };
        *v = rating as f64;
    }
    Ok(normalize_nodata(out))
}

/// Rates a categorical raster through a lookup scheme. Codes must be whole
/// numbers; a code missing from the table is reported with its cell count.
pub fn rate_categorical(grid: &GeoGrid, scheme: &RatingScheme) -> Result<RatedGrid> {
    let RatingScheme::Categorical(table) = scheme else {
        return Err(Error::BadScheme(
            "categorical rating needs a lookup scheme".into(),
        ));
    };
    let mut unmapped: std::collections::BTreeMap<i64, usize> = std::collections::BTreeMap::new();
    let mut out = grid.clone();
    for v in out.cells_mut() {
        if *v == grid.nodata() {
            *v = DEFAULT_NODATA;
            continue;
        }
        if v.fract() != 0.0 || v.abs() > i64::MAX as f64 {
            return Err(Error::InvalidGrid(format!(
                "category raster holds non-integer value {v}"
            )));
        }
        let code = *v as i64;
        match table.binary_search_by_key(&code, |&(c, _)| c) {
            Ok(i) => *v = table[i].1 as f64,
            Err(_) => {
                *unmapped.entry(code).or_insert(0) += 1;
            }
        }
    }
    if let Some((&code, &cells)) = unmapped.iter().next() {
        return Err(Error::UnmappedCategory { code, cells });
    }
    Ok(normalize_nodata(out))
}

/// Distance bins per stream order level: `(upper_bound_m, rating)`, first
/// match wins, anything past the last bound rates 0. Higher-order streams
/// project influence farther.
const DISTANCE_BINS: [&[(f64, u8)]; 5] = [
    &[(500.0, 1)],
    &[(500.0, 2), (1000.0, 1)],
    &[(500.0, 3), (1000.0, 2), (1500.0, 1)],
    &[(1000.0, 3), (2000.0, 2), (3000.0, 1)],
    &[(1000.0, 4), (2000.0, 3), (4000.0, 2), (6000.0, 1)],
];

fn distance_rating(level: usize, meters: f64) -> u8 {
    debug_assert!((1..=5).contains(&level));
    for &(bound, rating) in DISTANCE_BINS[level - 1] {
        if meters <= bound {
            return rating;
        }
    }
    0
}

/// Proximity-to-streams rating. Each order level (Strahler order clamped to
/// 5) spreads its own distance field; a cell keeps the highest rating any
/// level grants it. Steady-water cells rate 5 outright.
pub fn rate_distance_from_streams(
    network: &StreamNetwork,
    steady_water: &Mask,
) -> Result<RatedGrid> {
    let geom = network.geometry();
    geom.ensure_matches(&steady_water.geometry(), "rate_distance_from_streams")?;
    let mut ratings = vec![0u8; geom.len()];
    for level in 1..=5usize {
        let sources: Vec<bool> = network
            .orders()
            .iter()
            .map(|&o| o != 0 && (o.min(5) as usize) == level)
            .collect();
        if !sources.iter().any(|&b| b) {
            continue;
        }
        let mask = Mask::new(geom, sources)?;
        let dist = euclidean_distance(&mask)?;
        for (slot, &d) in ratings.iter_mut().zip(dist.cells()) {
            *slot = (*slot).max(distance_rating(level, d));
        }
    }
    for (slot, &wet) in ratings.iter_mut().zip(steady_water.cells()) {
        if wet {
            *slot = 5;
        }
    }
    let cells = ratings.into_iter().map(|r| r as f64).collect();
    GeoGrid::new(geom, DEFAULT_NODATA, cells)
}

/// Rebuilds a rated grid with the conventional sentinel so downstream
/// comparisons never mix sentinels.
fn normalize_nodata(mut grid: GeoGrid) -> GeoGrid {
    if grid.nodata() != DEFAULT_NODATA {
        let old = grid.nodata();
        for v in grid.cells_mut() {
            if *v == old {
                *v = DEFAULT_NODATA;
            }
        }
        grid = GeoGrid::new(grid.geometry(), DEFAULT_NODATA, grid.cells().to_vec())
            .expect("same shape");
    }
    grid
}

/// Applies another grid's nodata layout: wherever `reference` is nodata, the
/// output becomes nodata too.
pub fn mask_like(rated: &RatedGrid, reference: &GeoGrid) -> Result<RatedGrid> {
    rated
        .geometry()
        .ensure_matches(&reference.geometry(), "mask_like")?;
    let mut out = rated.clone();
    for i in 0..out.cells().len() {
        if reference.is_nodata_idx(i) {
            out.cells_mut()[i] = out.nodata();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridGeometry;
    use crate::streams::{StreamLink, StreamNetwork};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dem(rows: usize, cols: usize, cs: f64, cells: Vec<f64>) -> GeoGrid {
        GeoGrid::new(GridGeometry::new(rows, cols, cs), -9999.0, cells).unwrap()
    }

    #[test]
    fn flat_terrain_has_zero_slope() {
        let g = dem(4, 4, 30.0, vec![7.0; 16]);
        let s = compute_slope(&g);
        assert!(s.cells().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_gradient_is_forty_five_degrees_inside() {
        let cells = (0..25).map(|i| (i % 5) as f64).collect();
        let g = dem(5, 5, 1.0, cells);
        let s = compute_slope(&g);
        for r in 0..5 {
            for c in 1..4 {
                assert!(
                    (s.get(r, c) - 45.0).abs() < 1e-9,
                    "({r},{c}) {}",
                    s.get(r, c)
                );
            }
        }
    }

    #[test]
    fn slope_matches_stencil_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..10 {
            let rows = rng.gen_range(3..10);
            let cols = rng.gen_range(3..10);
            let cs = 30.0;
            let cells: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(0.0..90.0)).collect();
            let g = dem(rows, cols, cs, cells);
            let s = compute_slope(&g);
            // Interior oracle written straight from the kernel definition.
            for r in 1..rows - 1 {
                for c in 1..cols - 1 {
                    let z = |dr: isize, dc: isize| {
                        g.get((r as isize + dr) as usize, (c as isize + dc) as usize)
                    };
                    let dzdx = (z(-1, 1) + 2.0 * z(0, 1) + z(1, 1)
                        - z(-1, -1)
                        - 2.0 * z(0, -1)
                        - z(1, -1))
                        / (8.0 * cs);
                    let dzdy = (z(1, -1) + 2.0 * z(1, 0) + z(1, 1)
                        - z(-1, -1)
                        - 2.0 * z(-1, 0)
                        - z(-1, 1))
                        / (8.0 * cs);
                    let deg = (dzdx * dzdx + dzdy * dzdy).sqrt().atan().to_degrees();
                    assert!((s.get(r, c) - deg).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn slope_scheme_covers_the_full_range() {
        let scheme = default_slope_scheme();
        let g = dem(1, 6, 1.0, vec![0.0, 1.9, 6.0, 11.0, 19.0, 89.0]);
        let rated = rate_numeric(&g, &scheme).unwrap();
        assert_eq!(rated.cells(), &[5.0, 4.0, 3.0, 2.0, 1.0, 0.0]);
    }

    #[test]
    fn elevation_scheme_examples() {
        let scheme = default_elevation_scheme();
        let g = dem(1, 2, 1.0, vec![30.0, 200.0]);
        let rated = rate_numeric(&g, &scheme).unwrap();
        assert_eq!(rated.cells(), &[3.0, 1.0]);
    }

    #[test]
    fn value_above_finite_top_is_an_error() {
        let scheme = RatingScheme::numeric(vec![(10.0, 2), (20.0, 1)]).unwrap();
        let g = dem(1, 1, 1.0, vec![25.0]);
        assert!(matches!(
            rate_numeric(&g, &scheme),
            Err(Error::ValueOutOfRange { .. })
        ));
    }

    #[test]
    fn categorical_lookup_and_unmapped_codes() {
        let scheme = default_landuse_scheme();
        let g = dem(1, 3, 1.0, vec![5.0, 1.0, -9999.0]);
        let rated = rate_categorical(&g, &scheme).unwrap();
        assert_eq!(rated.cells(), &[5.0, 1.0, -9999.0]);

        let scheme = default_hydrolith_scheme();
        let g = dem(1, 2, 1.0, vec![1.0, 1.0]);
        assert_eq!(rate_categorical(&g, &scheme).unwrap().cells(), &[1.0, 1.0]);

        let g = dem(1, 3, 1.0, vec![9.0, 9.0, 1.0]);
        match rate_categorical(&g, &scheme) {
            Err(Error::UnmappedCategory { code: 9, cells: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn scheme_validation_rejects_disorder() {
        assert!(RatingScheme::numeric(vec![(5.0, 1), (5.0, 2)]).is_err());
        assert!(RatingScheme::numeric(vec![(5.0, 9)]).is_err());
        assert!(RatingScheme::categorical(vec![(2, 1), (1, 2)]).is_err());
        assert!(RatingScheme::numeric(vec![]).is_err());
    }

    #[test]
    fn distance_bins_weaken_with_distance() {
        for level in 1..=5 {
            let mut last = u8::MAX;
            let mut d = 0.0;
            while d <= 7000.0 {
                let r = distance_rating(level, d);
                assert!(r <= last);
                last = r;
                d += 50.0;
            }
            assert_eq!(distance_rating(level, 7000.0), 0);
        }
        assert_eq!(distance_rating(5, 500.0), 4);
        assert_eq!(distance_rating(1, 2000.0), 0);
        assert_eq!(distance_rating(3, 1500.0), 1);
    }

    fn network_with_order(
        rows: usize,
        cols: usize,
        cs: f64,
        cell: (usize, usize),
        order: u32,
    ) -> StreamNetwork {
        let geom = GridGeometry::new(rows, cols, cs);
        let mut mask = Mask::filled(geom, false);
        mask.set(cell.0, cell.1, true);
        let mut orders = vec![0u32; geom.len()];
        let mut link_ids = vec![0u32; geom.len()];
        orders[geom.idx(cell.0, cell.1)] = order;
        link_ids[geom.idx(cell.0, cell.1)] = 1;
        StreamNetwork::from_parts(
            geom,
            mask,
            orders,
            link_ids,
            vec![StreamLink {
                id: 1,
                outlet: cell,
                order,
            }],
        )
    }

    #[test]
    fn major_stream_reaches_farther_than_minor() {
        let dry = Mask::filled(GridGeometry::new(1, 21, 100.0), false);
        let major = network_with_order(1, 21, 100.0, (0, 0), 5);
        let rated = rate_distance_from_streams(&major, &dry).unwrap();
        assert_eq!(rated.get(0, 5), 4.0); // 500 m
        assert_eq!(rated.get(0, 20), 3.0); // 2000 m

        let minor = network_with_order(1, 21, 100.0, (0, 0), 1);
        let rated = rate_distance_from_streams(&minor, &dry).unwrap();
        assert_eq!(rated.get(0, 5), 1.0);
        assert_eq!(rated.get(0, 20), 0.0);
    }

    #[test]
    fn orders_above_five_clamp_to_the_top_level() {
        let dry = Mask::filled(GridGeometry::new(1, 11, 100.0), false);
        let big = network_with_order(1, 11, 100.0, (0, 0), 7);
        let clamped = network_with_order(1, 11, 100.0, (0, 0), 5);
        let a = rate_distance_from_streams(&big, &dry).unwrap();
        let b = rate_distance_from_streams(&clamped, &dry).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn steady_water_rates_five() {
        let geom = GridGeometry::new(1, 3, 100.0);
        let mut wet = Mask::filled(geom, false);
        wet.set(0, 2, true);
        let net = network_with_order(1, 3, 100.0, (0, 0), 5);
        let rated = rate_distance_from_streams(&net, &wet).unwrap();
        assert_eq!(rated.get(0, 0), 4.0); // on the stream itself
        assert_eq!(rated.get(0, 2), 5.0); // steady water outranks
    }

    #[test]
    fn mask_like_copies_nodata_layout() {
        let rated = dem(1, 3, 1.0, vec![1.0, 2.0, 3.0]);
        let reference = dem(1, 3, 1.0, vec![0.0, -9999.0, 0.0]);
        let masked = mask_like(&rated, &reference).unwrap();
        assert_eq!(masked.cells(), &[1.0, -9999.0, 3.0]);
    }
}
