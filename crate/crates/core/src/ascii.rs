//! ESRI ASCII grid reader and writer.
//!
//! The on-disk format is a six-line header followed by one line of
//! space-separated cell values per row, north first:
//!
//! ```text
//! ncols 3
//! nrows 2
//! xllcorner 0
//! yllcorner 0
//! cellsize 30
//! nodata_value -9999
//! 1 2 3
//! 4 5 6
//! ```
//!
//! Header keys are matched case-insensitively on read and written lowercase.
//! `nodata_value` may be omitted on read and defaults to -9999. Values are
//! rendered with the shortest decimal form that parses back to the same
//! `f64`, so a write/read round trip reproduces every cell bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GeoGrid, GridGeometry, DEFAULT_NODATA};

/// Reads a grid from a file.
pub fn read(path: &Path) -> Result<GeoGrid> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, &path.display().to_string())
}

/// Writes a grid, creating or truncating the file.
pub fn write(grid: &GeoGrid, path: &Path) -> Result<()> {
    std::fs::write(path, render(grid)).map_err(|e| Error::io(path, e))
}

/// Parses grid text. `origin` names the source in error messages.
pub fn parse(text: &str, origin: &str) -> Result<GeoGrid> {
    let err = |line: usize, msg: String| Error::AsciiParse {
        path: origin.to_string(),
        line,
        msg,
    };

    let mut ncols: Option<usize> = None;
    let mut nrows: Option<usize> = None;
    let mut xll: Option<f64> = None;
    let mut yll: Option<f64> = None;
    let mut cellsize: Option<f64> = None;
    let mut nodata: Option<f64> = None;

    let mut lines = text.lines().enumerate().peekable();
    while let Some(&(i, line)) = lines.peek() {
        let lineno = i + 1;
        let mut tokens = line.split_whitespace();
        let key = match tokens.next() {
            Some(t) if t.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) => t,
            _ => break,
        };
        lines.next();
        let value = tokens
            .next()
            .ok_or_else(|| err(lineno, format!("header key {key} has no value")))?;
        if tokens.next().is_some() {
            return Err(err(
                lineno,
                format!("trailing tokens after header key {key}"),
            ));
        }
        let parse_f64 = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| err(lineno, format!("bad numeric value {v:?} for {key}")))
        };
        let parse_usize = |v: &str| {
            v.parse::<usize>()
                .map_err(|_| err(lineno, format!("bad integer value {v:?} for {key}")))
        };
        let slot_taken = |key: &str| err(lineno, format!("duplicate header key {key}"));
        match key.to_ascii_lowercase().as_str() {
            "ncols" => {
                if ncols.replace(parse_usize(value)?).is_some() {
                    return Err(slot_taken(key));
                }
            }
            "nrows" => {
                if nrows.replace(parse_usize(value)?).is_some() {
                    return Err(slot_taken(key));
                }
            }
            "xllcorner" => {
                if xll.replace(parse_f64(value)?).is_some() {
                    return Err(slot_taken(key));
                }
            }
            "yllcorner" => {
                if yll.replace(parse_f64(value)?).is_some() {
                    return Err(slot_taken(key));
                }
            }
            "cellsize" => {
                if cellsize.replace(parse_f64(value)?).is_some() {
                    return Err(slot_taken(key));
                }
            }
            "nodata_value" => {
                if nodata.replace(parse_f64(value)?).is_some() {
                    return Err(slot_taken(key));
                }
            }
            other => return Err(err(lineno, format!("unknown header key {other}"))),
        }
    }

    let missing = |key: &str| err(0, format!("missing header key {key}"));
    let ncols = ncols.ok_or_else(|| missing("ncols"))?;
    let nrows = nrows.ok_or_else(|| missing("nrows"))?;
    let geom = GridGeometry {
        rows: nrows,
        cols: ncols,
        cellsize: cellsize.ok_or_else(|| missing("cellsize"))?,
        x_origin: xll.ok_or_else(|| missing("xllcorner"))?,
        y_origin: yll.ok_or_else(|| missing("yllcorner"))?,
    };
    let nodata = nodata.unwrap_or(DEFAULT_NODATA);

    let mut cells = Vec::with_capacity(nrows.saturating_mul(ncols));
    let mut rows_seen = 0usize;
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if rows_seen == nrows {
            return Err(err(lineno, format!("more than {nrows} data rows")));
        }
        let before = cells.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| err(lineno, format!("bad cell value {tok:?}")))?;
            if !v.is_finite() {
                return Err(err(lineno, format!("non-finite cell value {tok:?}")));
            }
            cells.push(v);
        }
        let got = cells.len() - before;
        if got != ncols {
            return Err(err(
                lineno,
                format!("row {} has {got} values, expected {ncols}", rows_seen + 1),
            ));
        }
        rows_seen += 1;
    }
    if rows_seen != nrows {
        return Err(err(
            0,
            format!("found {rows_seen} data rows, expected {nrows}"),
        ));
    }

    GeoGrid::new(geom, nodata, cells)
}

/// Renders a grid to text in the canonical layout.
pub fn render(grid: &GeoGrid) -> String {
    let geom = grid.geometry();
    let mut out = String::new();
    let _ = writeln!(out, "ncols {}", geom.cols);
    let _ = writeln!(out, "nrows {}", geom.rows);
    let _ = writeln!(out, "xllcorner {}", geom.x_origin);
    let _ = writeln!(out, "yllcorner {}", geom.y_origin);
    let _ = writeln!(out, "cellsize {}", geom.cellsize);
    let _ = writeln!(out, "nodata_value {}", grid.nodata());
    for row in 0..geom.rows {
        for col in 0..geom.cols {
            if col > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{}", grid.get(row, col));
        }
        out.push('\n');
    }
    out
}
