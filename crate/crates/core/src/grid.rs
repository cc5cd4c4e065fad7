//! Core raster containers.
//!
//! All grids are row major with row 0 at the northern edge. Cells are square;
//! `cellsize` is in meters, so row/column steps map directly to ground
//! distance. Nodata is a sentinel value compared exactly: a cell holding the
//! sentinel carries no information and is skipped by every algorithm in this
//! crate.

use crate::error::{Error, Result};

/// Neighbor offsets in `(dr, dc)` form, clockwise from east:
/// E, SE, S, SW, W, NW, N, NE. Index `i` corresponds to direction code
/// `1 << i` in single-direction flow fields and to bit `i` in
/// multiple-direction masks.
pub const NEIGHBOR_OFFSETS: [(isize, isize); 8] = [
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
];

/// Ground distance factor for each neighbor direction: 1 for cardinal moves,
/// sqrt(2) for diagonal moves. Multiply by `cellsize` for meters.
pub const NEIGHBOR_DISTANCE: [f64; 8] = [
    1.0,
    std::f64::consts::SQRT_2,
    1.0,
    std::f64::consts::SQRT_2,
    1.0,
    std::f64::consts::SQRT_2,
    1.0,
    std::f64::consts::SQRT_2,
];

/// Shape and georeferencing shared by every raster in a scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub rows: usize,
    pub cols: usize,
    /// Cell edge length in meters.
    pub cellsize: f64,
    /// X coordinate of the lower-left corner.
    pub x_origin: f64,
    /// Y coordinate of the lower-left corner.
    pub y_origin: f64,
}

impl GridGeometry {
    pub fn new(rows: usize, cols: usize, cellsize: f64) -> Self {
        GridGeometry {
            rows,
            cols,
            cellsize,
            x_origin: 0.0,
            y_origin: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.rows && col < self.cols);
        row * self.cols + col
    }

    #[inline]
    pub fn rc(&self, idx: usize) -> (usize, usize) {
        (idx / self.cols, idx % self.cols)
    }

    /// Neighbor coordinates in direction `dir` (0..8, clockwise from east),
    /// or `None` when the step leaves the grid.
    #[inline]
    pub fn neighbor(&self, row: usize, col: usize, dir: usize) -> Option<(usize, usize)> {
        let (dr, dc) = NEIGHBOR_OFFSETS[dir];
        let nr = row as isize + dr;
        let nc = col as isize + dc;
        if nr < 0 || nc < 0 || nr >= self.rows as isize || nc >= self.cols as isize {
            None
        } else {
            Some((nr as usize, nc as usize))
        }
    }

    pub fn on_edge(&self, row: usize, col: usize) -> bool {
        row == 0 || col == 0 || row + 1 == self.rows || col + 1 == self.cols
    }

    /// Checks shape, cell size, and origin against another geometry.
    pub fn ensure_matches(&self, other: &GridGeometry, context: &str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{context}: {}x{} cell {} vs {}x{} cell {}",
                self.rows, self.cols, self.cellsize, other.rows, other.cols, other.cellsize
            )))
        }
    }
}

/// A georeferenced raster of `f64` values with a nodata sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoGrid {
    geom: GridGeometry,
    nodata: f64,
    cells: Vec<f64>,
}

/// Conventional nodata sentinel for newly built grids.
pub const DEFAULT_NODATA: f64 = -9999.0;

impl GeoGrid {
    pub fn new(geom: GridGeometry, nodata: f64, cells: Vec<f64>) -> Result<Self> {
        if geom.rows == 0 || geom.cols == 0 {
            return Err(Error::InvalidGrid(
                "grid must have at least one cell".into(),
            ));
        }
        if !(geom.cellsize.is_finite() && geom.cellsize > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "cellsize must be finite and positive, got {}",
                geom.cellsize
            )));
        }
        if cells.len() != geom.len() {
            return Err(Error::InvalidGrid(format!(
                "cell count {} does not match {}x{}",
                cells.len(),
                geom.rows,
                geom.cols
            )));
        }
        if !nodata.is_finite() {
            return Err(Error::InvalidGrid("nodata sentinel must be finite".into()));
        }
        Ok(GeoGrid {
            geom,
            nodata,
            cells,
        })
    }

    /// Grid of a constant value.
    pub fn filled(geom: GridGeometry, nodata: f64, value: f64) -> Result<Self> {
        let cells = vec![value; geom.len()];
        GeoGrid::new(geom, nodata, cells)
    }

    pub fn geometry(&self) -> GridGeometry {
        self.geom
    }

    pub fn rows(&self) -> usize {
        self.geom.rows
    }

    pub fn cols(&self) -> usize {
        self.geom.cols
    }

    pub fn cellsize(&self) -> f64 {
        self.geom.cellsize
    }

    pub fn nodata(&self) -> f64 {
        self.nodata
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn cells_mut(&mut self) -> &mut [f64] {
        &mut self.cells
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cells[self.geom.idx(row, col)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let i = self.geom.idx(row, col);
        self.cells[i] = value;
    }

    #[inline]
    pub fn is_nodata(&self, row: usize, col: usize) -> bool {
        self.get(row, col) == self.nodata
    }

    #[inline]
    pub fn is_nodata_idx(&self, idx: usize) -> bool {
        self.cells[idx] == self.nodata
    }

    /// Value at `(row, col)`, or `None` when the cell is nodata.
    #[inline]
    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        let v = self.get(row, col);
        if v == self.nodata {
            None
        } else {
            Some(v)
        }
    }

    /// True cells are the valid (non-nodata) cells.
    pub fn valid_mask(&self) -> Mask {
        let cells = self.cells.iter().map(|&v| v != self.nodata).collect();
        Mask {
            geom: self.geom,
            cells,
        }
    }

    /// Number of valid cells.
    pub fn valid_count(&self) -> usize {
        self.cells.iter().filter(|&&v| v != self.nodata).count()
    }
}

/// A boolean raster sharing the [`GeoGrid`] geometry conventions.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    geom: GridGeometry,
    cells: Vec<bool>,
}

impl Mask {
    pub fn new(geom: GridGeometry, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != geom.len() {
            return Err(Error::InvalidGrid(format!(
                "mask cell count {} does not match {}x{}",
                cells.len(),
                geom.rows,
                geom.cols
            )));
        }
        Ok(Mask { geom, cells })
    }

    pub fn filled(geom: GridGeometry, value: bool) -> Self {
        Mask {
            geom,
            cells: vec![value; geom.len()],
        }
    }

    /// True where the grid is valid and nonzero.
    pub fn from_nonzero(grid: &GeoGrid) -> Self {
        let nodata = grid.nodata();
        let cells = grid
            .cells()
            .iter()
            .map(|&v| v != nodata && v != 0.0)
            .collect();
        Mask {
            geom: grid.geometry(),
            cells,
        }
    }

    /// 0/1 grid for serialization.
    pub fn to_grid(&self) -> GeoGrid {
        let cells = self
            .cells
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect();
        GeoGrid {
            geom: self.geom,
            nodata: DEFAULT_NODATA,
            cells,
        }
    }

    pub fn geometry(&self) -> GridGeometry {
        self.geom
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[self.geom.idx(row, col)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        let i = self.geom.idx(row, col);
        self.cells[i] = value;
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.cells.iter().any(|&b| b)
    }
}

/// Integer zone labels over a grid. Label 0 means "no zone": nodata cells and
/// cells no delineation rule assigned. Real zones are labeled 1..=n.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneLabels {
    geom: GridGeometry,
    labels: Vec<u32>,
}

impl ZoneLabels {
    pub fn new(geom: GridGeometry, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != geom.len() {
            return Err(Error::InvalidGrid(format!(
                "label count {} does not match {}x{}",
                labels.len(),
                geom.rows,
                geom.cols
            )));
        }
        Ok(ZoneLabels { geom, labels })
    }

    pub fn geometry(&self) -> GridGeometry {
        self.geom
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u32] {
        &mut self.labels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.labels[self.geom.idx(row, col)]
    }

    /// Highest label in use.
    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Renumbers zones to 1..=n in order of first row-major appearance.
    /// Label 0 is left alone. Returns the number of zones.
    pub fn canonicalize(&mut self) -> u32 {
        let mut remap = vec![0u32; self.max_label() as usize + 1];
        let mut next = 0u32;
        for l in self.labels.iter_mut() {
            if *l == 0 {
                continue;
            }
            if remap[*l as usize] == 0 {
                next += 1;
                remap[*l as usize] = next;
            }
            *l = remap[*l as usize];
        }
        next
    }

    /// Labels as a grid; label 0 becomes nodata.
    pub fn to_grid(&self) -> GeoGrid {
        let cells = self
            .labels
            .iter()
            .map(|&l| if l == 0 { DEFAULT_NODATA } else { l as f64 })
            .collect();
        GeoGrid {
            geom: self.geom,
            nodata: DEFAULT_NODATA,
            cells,
        }
    }

    /// Reads zone labels from a grid written by [`ZoneLabels::to_grid`].
    pub fn from_grid(grid: &GeoGrid) -> Result<Self> {
        let mut labels = Vec::with_capacity(grid.cells().len());
        for &v in grid.cells() {
            if v == grid.nodata() {
                labels.push(0);
                continue;
            }
            if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                return Err(Error::InvalidGrid(format!("bad zone label {v}")));
            }
            labels.push(v as u32);
        }
        ZoneLabels::new(grid.geometry(), labels)
    }
}
