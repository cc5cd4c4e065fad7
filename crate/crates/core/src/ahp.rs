//! Pairwise-comparison weighting and assembly of the weighted risk index.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::grid::{GeoGrid, ZoneLabels, DEFAULT_NODATA};
use crate::jenks::{class_of, natural_breaks};
use crate::rating::RatedGrid;

/// The five criteria, in canonical order. Every weight vector and criterion
/// array in this crate follows this order.
pub const CRITERIA: [Criterion; 5] = [
    Criterion::Slope,
    Criterion::Elevation,
    Criterion::DistanceFromStreams,
    Criterion::HydroLithological,
    Criterion::LandUse,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Criterion {
    Slope,
    Elevation,
    DistanceFromStreams,
    HydroLithological,
    LandUse,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::Slope => "slope",
            Criterion::Elevation => "elevation",
            Criterion::DistanceFromStreams => "distance_from_streams",
            Criterion::HydroLithological => "hydro_lithological",
            Criterion::LandUse => "land_use",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        CRITERIA
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::Config(format!("unknown criterion {name:?}")))
    }

    pub fn index(self) -> usize {
        CRITERIA.iter().position(|&c| c == self).unwrap()
    }
}

/// Random-index reference values for reciprocal matrices of order 1..=9.
const RANDOM_INDEX: [f64; 10] = [0.0, 0.0, 0.0, 0.58, 0.90, 1.12, 1.24, 1.32, 1.41, 1.45];

/// Solved pairwise-comparison model.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgmentModel {
    pub matrix: Vec<Vec<f64>>,
    /// Principal eigenvector, normalized to sum 1.
    pub weights: Vec<f64>,
    pub lambda_max: f64,
    pub consistency_index: f64,
    pub consistency_ratio: f64,
    pub random_index: f64,
    pub iterations: usize,
    /// Whether the judgments are consistent enough to use (ratio below 0.1).
    pub accepted: bool,
}

const MAX_ITERATIONS: usize = 10_000;
const LAMBDA_TOLERANCE: f64 = 1e-12;
const RECIPROCAL_TOLERANCE: f64 = 1e-9;

/// Derives priority weights from a positive reciprocal judgment matrix by
/// power iteration from a uniform start. The dominant-eigenvalue estimate is
/// declared converged when it moves less than 1e-12 between sweeps.
pub fn weights_from_judgment(matrix: &[Vec<f64>]) -> Result<JudgmentModel> {
    let n = matrix.len();
    if !(2..=9).contains(&n) {
        return Err(Error::BadJudgment(format!(
            "matrix order must be 2..=9, got {n}"
        )));
    }
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != n {
            return Err(Error::BadJudgment(format!(
                "row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::BadJudgment(format!(
                    "entry ({i},{j}) = {v} is not a positive number"
                )));
            }
            if (matrix[i][j] * matrix[j][i] - 1.0).abs() > RECIPROCAL_TOLERANCE {
                return Err(Error::BadJudgment(format!(
                    "entries ({i},{j}) and ({j},{i}) are not reciprocal"
                )));
            }
        }
        if (row[i] - 1.0).abs() > RECIPROCAL_TOLERANCE {
            return Err(Error::BadJudgment(format!("diagonal entry {i} is not 1")));
        }
    }

    let mut x = vec![1.0 / n as f64; n];
    let mut lambda_prev: Option<f64> = None;
    let mut lambda = 0.0;
    let mut iterations = 0;
    for iter in 1..=MAX_ITERATIONS {
        let mut y = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                y[i] += matrix[i][j] * x[j];
            }
        }
        let total: f64 = y.iter().sum();
        lambda = total; // x sums to 1 after each normalization
        for v in y.iter_mut() {
            *v /= total;
        }
        x = y;
        iterations = iter;
        if let Some(prev) = lambda_prev {
            if (lambda - prev).abs() < LAMBDA_TOLERANCE {
                break;
            }
        }
        if iter == MAX_ITERATIONS {
            return Err(Error::NonConvergence(MAX_ITERATIONS));
        }
        lambda_prev = Some(lambda);
    }

    let ri = RANDOM_INDEX[n];
    let ci = (lambda - n as f64) / (n as f64 - 1.0);
    let cr = if ri == 0.0 { 0.0 } else { ci / ri };
    Ok(JudgmentModel {
        matrix: matrix.to_vec(),
        weights: x,
        lambda_max: lambda,
        consistency_index: ci,
        consistency_ratio: cr,
        random_index: ri,
        iterations,
        accepted: cr < 0.1,
    })
}

/// Zone-level summary statistic applied to ratings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZonalMethod {
    Maximum,
    /// Lower median: element at index (n-1)/2 of the sorted multiset.
    LowerMedian,
    /// Most frequent rating; ties pick the smaller rating.
    Majority,
}

impl ZonalMethod {
    pub fn name(self) -> &'static str {
        match self {
            ZonalMethod::Maximum => "maximum",
            ZonalMethod::LowerMedian => "median",
            ZonalMethod::Majority => "majority",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "maximum" => Ok(ZonalMethod::Maximum),
            "median" => Ok(ZonalMethod::LowerMedian),
            "majority" => Ok(ZonalMethod::Majority),
            other => Err(Error::Config(format!("unknown zonal statistic {other:?}"))),
        }
    }

    fn of_buckets(self, buckets: &[u64; 6]) -> Option<u8> {
        let total: u64 = buckets.iter().sum();
        if total == 0 {
            return None;
        }
        match self {
            ZonalMethod::Maximum => (0..6).rev().find(|&r| buckets[r] > 0).map(|r| r as u8),
            ZonalMethod::LowerMedian => {
                let target = (total - 1) / 2;
                let mut seen = 0;
                for (r, &bucket) in buckets.iter().enumerate() {
                    seen += bucket;
                    if seen > target {
                        return Some(r as u8);
                    }
                }
                None
            }
            ZonalMethod::Majority => {
                let best = *buckets.iter().max().unwrap();
                (0..6).find(|&r| buckets[r] == best).map(|r| r as u8)
            }
        }
    }
}

/// Replaces each cell's rating with its zone's summary rating. Cells outside
/// every zone (label 0) keep their own rating; nodata ratings stay nodata
/// and do not feed the summaries.
pub fn zonal_statistic(
    zones: &ZoneLabels,
    rated: &RatedGrid,
    method: ZonalMethod,
) -> Result<RatedGrid> {
    zones
        .geometry()
        .ensure_matches(&rated.geometry(), "zonal_statistic")?;
    let nzones = zones.max_label() as usize;
    let mut buckets = vec![[0u64; 6]; nzones + 1];
    for (i, &l) in zones.labels().iter().enumerate() {
        if l == 0 || rated.is_nodata_idx(i) {
            continue;
        }
        let v = rated.cells()[i];
        if v.fract() != 0.0 || !(0.0..=5.0).contains(&v) {
            return Err(Error::InvalidGrid(format!(
                "rating {v} outside the 0..=5 range"
            )));
        }
        buckets[l as usize][v as usize] += 1;
    }
    let stat: Vec<Option<u8>> = buckets.iter().map(|b| method.of_buckets(b)).collect();

    let mut out = rated.clone();
    for (i, &l) in zones.labels().iter().enumerate() {
        if l == 0 || rated.is_nodata_idx(i) {
            continue;
        }
        // The zone holds at least this cell, so the summary exists.
        out.cells_mut()[i] = stat[l as usize].expect("nonempty zone") as f64;
    }
    Ok(out)
}

/// Weighted combination of the five criterion ratings. Criteria named in
/// `constrained` are first lifted to their zonal summary under `method`;
/// the rest contribute their per-cell rating. Cells missing any criterion
/// value come out nodata.
pub fn flood_risk_index(
    criteria: &[&RatedGrid; 5],
    weights: &[f64; 5],
    constrained: &BTreeSet<Criterion>,
    zones: Option<&ZoneLabels>,
    method: ZonalMethod,
) -> Result<GeoGrid> {
    let geom = criteria[0].geometry();
    for g in &criteria[1..] {
        geom.ensure_matches(&g.geometry(), "flood_risk_index")?;
    }
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| !(w.is_finite() && w > 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "weights must be positive and sum to 1, got sum {sum}"
        )));
    }
    let zones = match (constrained.is_empty(), zones) {
        (false, None) => {
            return Err(Error::Config(
                "zonal constraint requested without zones".into(),
            ))
        }
        (_, z) => z,
    };

    let mut effective: Vec<RatedGrid> = Vec::with_capacity(5);
    for (i, &criterion) in CRITERIA.iter().enumerate() {
        if constrained.contains(&criterion) {
            effective.push(zonal_statistic(zones.unwrap(), criteria[i], method)?);
        } else {
            effective.push(criteria[i].clone());
        }
    }

    let mut out = GeoGrid::filled(geom, DEFAULT_NODATA, DEFAULT_NODATA)?;
    'cells: for idx in 0..geom.len() {
        let mut fri = 0.0;
        for (i, grid) in effective.iter().enumerate() {
            if grid.is_nodata_idx(idx) {
                continue 'cells;
            }
            fri += weights[i] * grid.cells()[idx];
        }
        out.cells_mut()[idx] = fri;
    }
    Ok(out)
}

/// Natural-breaks risk classes over an index grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskClassification {
    /// Class per cell, 1 (lowest risk) through `class_count`; nodata kept.
    pub classes: GeoGrid,
    /// Upper bound of each class but the last.
    pub breaks: Vec<f64>,
    pub class_count: usize,
    /// True when the grid held fewer distinct values than requested classes
    /// and each distinct value became its own class.
    pub degenerate: bool,
}

/// Splits index values into `k` classes by natural breaks. When fewer than
/// `k` distinct values exist, every distinct value becomes its own class and
/// the result is flagged degenerate.
pub fn classify_risk(index: &GeoGrid, k: usize) -> Result<RiskClassification> {
    if k < 2 {
        return Err(Error::BadScheme(format!(
            "risk classification needs at least 2 classes, got {k}"
        )));
    }
    let values: Vec<f64> = index
        .cells()
        .iter()
        .copied()
        .filter(|&v| v != index.nodata())
        .collect();
    if values.is_empty() {
        return Err(Error::InvalidGrid("no valid cells to classify".into()));
    }
    let mut distinct = values.clone();
    distinct.sort_unstable_by(f64::total_cmp);
    distinct.dedup();

    let (breaks, class_count, degenerate) = if distinct.len() < k {
        let breaks = distinct[..distinct.len() - 1].to_vec();
        (breaks, distinct.len(), true)
    } else {
        let nb = natural_breaks(&values, k)?;
        (nb.breaks, k, false)
    };

    let mut classes = index.clone();
    for v in classes.cells_mut() {
        if *v == index.nodata() {
            *v = DEFAULT_NODATA;
            continue;
        }
        *v = class_of(&breaks, *v) as f64;
    }
    if classes.nodata() != DEFAULT_NODATA {
        classes = GeoGrid::new(classes.geometry(), DEFAULT_NODATA, classes.cells().to_vec())?;
    }
    Ok(RiskClassification {
        classes,
        breaks,
        class_count,
        degenerate,
    })
}
