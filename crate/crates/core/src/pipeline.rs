//! Config-driven orchestration of the full risk-mapping workflow: condition
//! the terrain, route flow, delineate zones, rate criteria, weigh them,
//! synthesize and classify the risk index, score it against ground truth,
//! and write every artifact file.
//!
//! Each stage is a standalone function so the CLI can run them one at a time
//! against intermediate files; `run_pipeline` chains them in memory and
//! `write_artifacts` serializes everything at the end, so a failed run
//! leaves no partial output tree.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::ahp::{self, Criterion, JudgmentModel, RiskClassification, ZonalMethod, CRITERIA};
use crate::ascii;
use crate::config::{self, PipelineConfig};
use crate::error::{Error, Result};
use crate::flow::{self, FlowField};
use crate::grid::{GeoGrid, Mask, ZoneLabels};
use crate::hydro::{self, SteadyWaterParams};
use crate::jenks;
use crate::rating::{self, RatedGrid, RatingScheme};
use crate::streams::{self, StreamNetwork};
use crate::validate::{self, ValidationMasks, ValidationSetReport};
use crate::watershed::{self, Delineation, DelineationConfig};

/// Scatter points are sampled every this many rows and columns, anchored at
/// the first row and column.
pub const SCATTER_STRIDE: usize = 20;

/// Risk-class names reported alongside break values for a five-class map.
pub const CLASS_NAMES: [&str; 5] = ["very_low", "low", "normal", "high", "very_high"];

/// Artifact file names, shared by full runs and the stage subcommands so
/// both spell every file identically.
pub mod files {
    pub const CONDITIONED_DEM: &str = "conditioned_dem.asc";
    pub const STEADY_WATER: &str = "steady_water.asc";
    pub const FLOWDIR: &str = "flowdir.asc";
    pub const ACCUMULATION: &str = "accumulation.asc";
    pub const STREAMS: &str = "streams.asc";
    pub const STREAM_ORDERS: &str = "stream_orders.asc";
    pub const STREAM_LINKS: &str = "stream_links.csv";
    pub const ZONES: &str = "zones.asc";
    pub const ZONES_SUMMARY: &str = "zones_summary.csv";
    pub const WEIGHTS: &str = "weights.csv";
    pub const FRI: &str = "fri.asc";
    pub const FRI_PIXEL: &str = "fri_pixel.asc";
    pub const RISK_CLASSES: &str = "risk_classes.asc";
    pub const RISK_BREAKS: &str = "risk_breaks.csv";
    pub const VALIDATION_REPORT: &str = "validation_report.csv";
    pub const SCATTER: &str = "scatter.csv";
    pub const COMPARISON: &str = "comparison.csv";

    /// Rated-criterion raster name for a criterion.
    pub fn rated(criterion_name: &str) -> String {
        format!("rated_{criterion_name}.asc")
    }
}

/// All input rasters named by the config, loaded and geometry-checked.
#[derive(Debug)]
pub struct PipelineInputs {
    pub dem: GeoGrid,
    pub water_mask: Option<Mask>,
    pub landuse: Option<GeoGrid>,
    pub hydrolith: Option<GeoGrid>,
    pub ground_truth: Option<ValidationMasks>,
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// Reads every configured input. Relative paths resolve against `base`
/// (conventionally the config file's directory). Ground truth is assembled
/// when both the flooded and dry masks are given; a missing normal-water
/// mask is treated as empty.
pub fn load_inputs(config: &PipelineConfig, base: &Path) -> Result<PipelineInputs> {
    let inputs = &config.inputs;
    let dem = ascii::read(&resolve(base, &inputs.dem))?;
    let geom = dem.geometry();

    let read_aligned = |path: &Option<PathBuf>, what: &str| -> Result<Option<GeoGrid>> {
        let Some(path) = path else { return Ok(None) };
        let grid = ascii::read(&resolve(base, path))?;
        geom.ensure_matches(&grid.geometry(), what)?;
        Ok(Some(grid))
    };

    let water_mask =
        read_aligned(&inputs.water_mask, "water mask")?.map(|g| Mask::from_nonzero(&g));
    let landuse = read_aligned(&inputs.landuse, "land-use raster")?;
    let hydrolith = read_aligned(&inputs.hydrolith, "hydro-lithological raster")?;

    let flooded = read_aligned(&inputs.flooded_mask, "flooded mask")?;
    let dry = read_aligned(&inputs.dry_mask, "dry mask")?;
    let normal = read_aligned(&inputs.normal_water_mask, "normal-water mask")?;
    let ground_truth = match (flooded, dry) {
        (Some(flooded), Some(dry)) => Some(ValidationMasks::new(
            Mask::from_nonzero(&flooded),
            Mask::from_nonzero(&dry),
            normal
                .map(|g| Mask::from_nonzero(&g))
                .unwrap_or_else(|| Mask::filled(geom, false)),
        )?),
        (None, None) => {
            if normal.is_some() {
                return Err(Error::Config(
                    "inputs.normal_water_mask given without flooded/dry masks".into(),
                ));
            }
            None
        }
        _ => {
            return Err(Error::Config(
                "flooded_mask and dry_mask must be given together".into(),
            ))
        }
    };

    Ok(PipelineInputs {
        dem,
        water_mask,
        landuse,
        hydrolith,
        ground_truth,
    })
}

/// Conditioned terrain plus the steady-water mask that shaped it.
#[derive(Debug)]
pub struct Conditioned {
    pub dem: GeoGrid,
    pub steady_water: Mask,
}

/// Keeps steady water bodies from the raw water mask and burns them into the
/// terrain so routed flow follows the mapped hydrography.
pub fn condition(
    dem: &GeoGrid,
    water: Option<&Mask>,
    params: &SteadyWaterParams,
    burn_depth: f64,
) -> Result<Conditioned> {
    let steady_water = match water {
        Some(water) => {
            dem.geometry()
                .ensure_matches(&water.geometry(), "water mask")?;
            hydro::classify_steady_water(water, params)
        }
        None => Mask::filled(dem.geometry(), false),
    };
    let dem = hydro::burn_hydrology(dem, &steady_water, burn_depth)?;
    Ok(Conditioned { dem, steady_water })
}

/// Single-direction routing products derived from the conditioned terrain.
#[derive(Debug)]
pub struct Routing {
    pub flow: FlowField,
    pub accumulation: GeoGrid,
    pub streams: Mask,
    pub network: StreamNetwork,
}

/// Routes flow over the conditioned terrain and extracts the ordered stream
/// network at the accumulation threshold.
pub fn route(
    conditioned: &GeoGrid,
    stream_threshold_cells: u64,
    pit_fill: bool,
) -> Result<Routing> {
    let terrain = if pit_fill {
        flow::fill_pits(conditioned)
    } else {
        conditioned.clone()
    };
    let field = flow::d8_flow_direction(&terrain);
    let accumulation = flow::flow_accumulation(&field)?;
    let streams = flow::extract_streams(&accumulation, stream_threshold_cells);
    if !streams.any() {
        return Err(Error::NoStreams {
            threshold_cells: stream_threshold_cells,
        });
    }
    let network = streams::strahler_order(&streams, &field)?;
    Ok(Routing {
        flow: field,
        accumulation,
        streams,
        network,
    })
}

/// Derives a five-class numeric scheme from the data itself: natural breaks
/// over the valid values, with ascending value classes mapped to descending
/// ratings 5..1 (for slope and elevation, low values mean high risk).
pub fn derived_numeric_scheme(raw: &GeoGrid) -> Result<RatingScheme> {
    let values: Vec<f64> = raw
        .cells()
        .iter()
        .copied()
        .filter(|&v| v != raw.nodata())
        .collect();
    let nb = jenks::natural_breaks(&values, 5)?;
    let mut classes: Vec<(f64, u8)> = nb
        .breaks
        .iter()
        .zip([5u8, 4, 3, 2])
        .map(|(&bound, rating)| (bound, rating))
        .collect();
    classes.push((f64::INFINITY, 1));
    RatingScheme::numeric(classes)
}

/// Rates all five criteria, in canonical order. Slope and elevation come
/// from the original (unburned) terrain; the distance criterion reads the
/// routed network and steady water, then adopts the terrain's nodata layout.
pub fn rate_criteria(
    dem: &GeoGrid,
    network: &StreamNetwork,
    steady_water: &Mask,
    landuse: &GeoGrid,
    hydrolith: &GeoGrid,
    config: &PipelineConfig,
) -> Result<[RatedGrid; 5]> {
    let overrides = config.scheme_overrides()?;
    let recompute = config.recompute_set()?;

    let slope_raw = rating::compute_slope(dem);
    let slope_scheme = match overrides.slope {
        Some(scheme) => scheme,
        None if recompute.contains(&Criterion::Slope) => derived_numeric_scheme(&slope_raw)?,
        None => rating::default_slope_scheme(),
    };
    let slope = rating::rate_numeric(&slope_raw, &slope_scheme)?;

    let elevation_scheme = match overrides.elevation {
        Some(scheme) => scheme,
        None if recompute.contains(&Criterion::Elevation) => derived_numeric_scheme(dem)?,
        None => rating::default_elevation_scheme(),
    };
    let elevation = rating::rate_numeric(dem, &elevation_scheme)?;

    let distance = rating::rate_distance_from_streams(network, steady_water)?;
    let distance = rating::mask_like(&distance, dem)?;

    let landuse_scheme = overrides
        .landuse
        .unwrap_or_else(rating::default_landuse_scheme);
    let landuse = rating::rate_categorical(landuse, &landuse_scheme)?;

    let hydrolith_scheme = overrides
        .hydrolith
        .unwrap_or_else(rating::default_hydrolith_scheme);
    let hydrolith = rating::rate_categorical(hydrolith, &hydrolith_scheme)?;

    Ok([slope, elevation, distance, hydrolith, landuse])
}

/// Solves the configured judgment matrix and refuses to continue with an
/// inconsistent one.
pub fn solve_weights(config: &PipelineConfig) -> Result<JudgmentModel> {
    let model = ahp::weights_from_judgment(&config.judgment_matrix()?)?;
    if !model.accepted {
        return Err(Error::BadJudgment(format!(
            "consistency ratio {:.4} is not below 0.1",
            model.consistency_ratio
        )));
    }
    Ok(model)
}

/// The risk index in its constrained and plain per-pixel forms.
#[derive(Debug)]
pub struct RiskProducts {
    pub fri: GeoGrid,
    pub fri_pixel: GeoGrid,
}

/// Weighted synthesis of the rated criteria: once with the configured zonal
/// constraint, once as the per-pixel baseline.
pub fn synthesize(
    rated: &[RatedGrid; 5],
    model: &JudgmentModel,
    constrained: &BTreeSet<Criterion>,
    zones: &ZoneLabels,
    statistic: ZonalMethod,
) -> Result<RiskProducts> {
    let refs: [&RatedGrid; 5] = [&rated[0], &rated[1], &rated[2], &rated[3], &rated[4]];
    let weights: [f64; 5] = model
        .weights
        .clone()
        .try_into()
        .map_err(|_| Error::Config("expected exactly five weights".into()))?;
    let fri = ahp::flood_risk_index(&refs, &weights, constrained, Some(zones), statistic)?;
    let fri_pixel = ahp::flood_risk_index(&refs, &weights, &BTreeSet::new(), None, statistic)?;
    Ok(RiskProducts { fri, fri_pixel })
}

/// One scored model configuration in the validation report.
#[derive(Debug)]
pub struct ReportRow {
    /// "zonal-ahp" for the constrained model, "pixel-ahp" for the baseline.
    pub model: &'static str,
    pub zone_method: String,
    pub statistic: String,
    pub area_threshold_ha: Option<f64>,
    /// Constrained criterion names joined with '+'.
    pub constrained: String,
    pub sets: Vec<ValidationSetReport>,
}

pub fn constrained_label(constrained: &BTreeSet<Criterion>) -> String {
    constrained
        .iter()
        .map(|c| c.name())
        .collect::<Vec<_>>()
        .join("+")
}

/// Scatter sample: `(row, col, fri_constrained, fri_pixel)` on the sampling
/// stride, restricted to observed flooded cells when ground truth exists.
pub fn scatter_points(
    fri: &GeoGrid,
    fri_pixel: &GeoGrid,
    flooded: Option<&Mask>,
    stride: usize,
) -> Vec<(usize, usize, f64, f64)> {
    let geom = fri.geometry();
    let mut points = Vec::new();
    for r in (0..geom.rows).step_by(stride.max(1)) {
        for c in (0..geom.cols).step_by(stride.max(1)) {
            if let Some(flooded) = flooded {
                if !flooded.get(r, c) {
                    continue;
                }
            }
            let (Some(a), Some(b)) = (fri.value(r, c), fri_pixel.value(r, c)) else {
                continue;
            };
            points.push((r, c, a, b));
        }
    }
    points
}

/// Everything a full run computes, before any file is written.
#[derive(Debug)]
pub struct PipelineRun {
    pub conditioned: Conditioned,
    pub routing: Routing,
    pub delineation: Delineation,
    pub rated: [RatedGrid; 5],
    pub model: JudgmentModel,
    pub risk: RiskProducts,
    pub classification: RiskClassification,
    pub pixel_classification: RiskClassification,
    /// Empty when the config names no ground truth.
    pub validation: Vec<ReportRow>,
    pub scatter: Vec<(usize, usize, f64, f64)>,
}

/// Runs every stage in memory. Relative input paths resolve against `base`.
pub fn run_pipeline(config: &PipelineConfig, base: &Path) -> Result<PipelineRun> {
    config.validate()?;
    let inputs = load_inputs(config, base).map_err(|e| e.in_stage("load-inputs"))?;
    let landuse = inputs
        .landuse
        .as_ref()
        .ok_or_else(|| Error::Config("inputs.landuse is required for a full run".into()))
        .map_err(|e| e.in_stage("load-inputs"))?;
    let hydrolith = inputs
        .hydrolith
        .as_ref()
        .ok_or_else(|| Error::Config("inputs.hydrolith is required for a full run".into()))
        .map_err(|e| e.in_stage("load-inputs"))?;

    let conditioned = condition(
        &inputs.dem,
        inputs.water_mask.as_ref(),
        &config.steady_water_params(),
        config.hydro.burn_depth,
    )
    .map_err(|e| e.in_stage("condition"))?;

    let routing = route(
        &conditioned.dem,
        config.routing.stream_threshold_cells,
        config.routing.pit_fill,
    )
    .map_err(|e| e.in_stage("route"))?;

    let delineation = watershed::delineate(&conditioned.dem, &config.delineation_config()?)
        .map_err(|e| e.in_stage("delineate"))?;

    let rated = rate_criteria(
        &inputs.dem,
        &routing.network,
        &conditioned.steady_water,
        landuse,
        hydrolith,
        config,
    )
    .map_err(|e| e.in_stage("rate"))?;

    let model = solve_weights(config).map_err(|e| e.in_stage("weigh"))?;

    let constrained = config.constrained_criteria()?;
    let statistic = config.statistic()?;
    let risk = synthesize(&rated, &model, &constrained, &delineation.zones, statistic)
        .map_err(|e| e.in_stage("synthesize"))?;

    let classification = ahp::classify_risk(&risk.fri, 5).map_err(|e| e.in_stage("classify"))?;
    let pixel_classification =
        ahp::classify_risk(&risk.fri_pixel, 5).map_err(|e| e.in_stage("classify"))?;

    let validation = match &inputs.ground_truth {
        Some(masks) => {
            let zonal = validate::validate_classes(&classification.classes, masks)
                .map_err(|e| e.in_stage("validate"))?;
            let pixel = validate::validate_classes(&pixel_classification.classes, masks)
                .map_err(|e| e.in_stage("validate"))?;
            vec![
                ReportRow {
                    model: "zonal-ahp",
                    zone_method: config.delineation.method.clone(),
                    statistic: statistic.name().to_string(),
                    area_threshold_ha: Some(config.delineation.area_threshold_ha),
                    constrained: constrained_label(&constrained),
                    sets: zonal,
                },
                ReportRow {
                    model: "pixel-ahp",
                    zone_method: String::new(),
                    statistic: String::new(),
                    area_threshold_ha: None,
                    constrained: String::new(),
                    sets: pixel,
                },
            ]
        }
        None => Vec::new(),
    };

    let flooded = inputs.ground_truth.as_ref().map(|m| m.flooded());
    let scatter = scatter_points(&risk.fri, &risk.fri_pixel, flooded, SCATTER_STRIDE);

    Ok(PipelineRun {
        conditioned,
        routing,
        delineation,
        rated,
        model,
        risk,
        classification,
        pixel_classification,
        validation,
        scatter,
    })
}

struct ArtifactWriter {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl ArtifactWriter {
    fn grid(&mut self, name: &str, grid: &GeoGrid) -> Result<()> {
        let path = self.dir.join(name);
        ascii::write(grid, &path)?;
        self.written.push(path);
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }
}

pub fn links_csv(network: &StreamNetwork) -> String {
    let mut out = String::from("link_id,outlet_row,outlet_col,strahler_order\n");
    for link in network.links() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            link.id, link.outlet.0, link.outlet.1, link.order
        );
    }
    out
}

pub fn zones_csv(delineation: &Delineation) -> String {
    let mut out = String::from("label,cell_count,area_ha,seed_kind\n");
    for z in &delineation.info {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            z.label, z.cell_count, z.area_ha, z.seed_kind
        );
    }
    out
}

pub fn weights_csv(model: &JudgmentModel) -> String {
    let mut out = String::from("name,value\n");
    for (criterion, weight) in CRITERIA.iter().zip(&model.weights) {
        let _ = writeln!(out, "{},{}", criterion.name(), weight);
    }
    let _ = writeln!(out, "lambda_max,{}", model.lambda_max);
    let _ = writeln!(out, "consistency_index,{}", model.consistency_index);
    let _ = writeln!(out, "consistency_ratio,{}", model.consistency_ratio);
    let _ = writeln!(out, "random_index,{}", model.random_index);
    let _ = writeln!(out, "iterations,{}", model.iterations);
    let _ = writeln!(out, "accepted,{}", model.accepted);
    out
}

pub fn breaks_csv(classification: &RiskClassification) -> String {
    let mut out = String::from("class,label,upper_bound,degenerate\n");
    for class in 1..=classification.class_count {
        let label = if classification.class_count == CLASS_NAMES.len() && !classification.degenerate
        {
            CLASS_NAMES[class - 1].to_string()
        } else {
            format!("class_{class}")
        };
        let bound = classification
            .breaks
            .get(class - 1)
            .map(|b| b.to_string())
            .unwrap_or_default();
        let _ = writeln!(out, "{class},{label},{bound},{}", classification.degenerate);
    }
    out
}

const REPORT_HEADER: &str = "model,zone_method,statistic,area_threshold_ha,constrained,\
validation_set,true_positive,false_positive,false_negative,true_negative,\
correct_pct,fit_pct,precision,precision_defined,recall,recall_defined,f1,f1_defined";

fn push_report_rows(out: &mut String, row: &ReportRow, status: Option<&str>) {
    let threshold = row
        .area_threshold_ha
        .map(|t| t.to_string())
        .unwrap_or_default();
    for set in &row.sets {
        let c = &set.confusion;
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.model,
            row.zone_method,
            row.statistic,
            threshold,
            row.constrained,
            set.set.tag(),
            c.true_positive,
            c.false_positive,
            c.false_negative,
            c.true_negative,
            set.correct_pct,
            set.fit_pct,
            c.precision,
            c.precision_defined,
            c.recall,
            c.recall_defined,
            c.f1,
            c.f1_defined,
        );
        if let Some(status) = status {
            let _ = write!(out, ",{status}");
        }
        out.push('\n');
    }
}

pub fn validation_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for row in rows {
        push_report_rows(&mut out, row, None);
    }
    out
}

pub fn scatter_csv(points: &[(usize, usize, f64, f64)]) -> String {
    let mut out = String::from("row,col,fri_constrained,fri_pixel\n");
    for &(r, c, a, b) in points {
        let _ = writeln!(out, "{r},{c},{a},{b}");
    }
    out
}

/// Serializes every artifact into `out_dir`, creating it as needed. On any
/// write failure the files already written are removed so the directory
/// never holds a partial run.
pub fn write_artifacts(run: &PipelineRun, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut w = ArtifactWriter {
        dir: out_dir.to_path_buf(),
        written: Vec::new(),
    };
    let result = write_all(run, &mut w);
    match result {
        Ok(()) => Ok(w.written),
        Err(e) => {
            for path in &w.written {
                let _ = fs::remove_file(path);
            }
            Err(e.in_stage("write-artifacts"))
        }
    }
}

fn write_all(run: &PipelineRun, w: &mut ArtifactWriter) -> Result<()> {
    w.grid(files::CONDITIONED_DEM, &run.conditioned.dem)?;
    w.grid(files::STEADY_WATER, &run.conditioned.steady_water.to_grid())?;
    w.grid(files::FLOWDIR, &run.routing.flow.to_grid())?;
    w.grid(files::ACCUMULATION, &run.routing.accumulation)?;
    w.grid(files::STREAMS, &run.routing.streams.to_grid())?;
    w.grid(files::STREAM_ORDERS, &run.routing.network.orders_grid())?;
    w.text(files::STREAM_LINKS, &links_csv(&run.routing.network))?;
    w.grid(files::ZONES, &run.delineation.zones.to_grid())?;
    w.text(files::ZONES_SUMMARY, &zones_csv(&run.delineation))?;
    for (criterion, rated) in CRITERIA.iter().zip(&run.rated) {
        w.grid(&files::rated(criterion.name()), rated)?;
    }
    w.text(files::WEIGHTS, &weights_csv(&run.model))?;
    w.grid(files::FRI, &run.risk.fri)?;
    w.grid(files::FRI_PIXEL, &run.risk.fri_pixel)?;
    w.grid(files::RISK_CLASSES, &run.classification.classes)?;
    w.text(files::RISK_BREAKS, &breaks_csv(&run.classification))?;
    if !run.validation.is_empty() {
        w.text(files::VALIDATION_REPORT, &validation_csv(&run.validation))?;
    }
    w.text(files::SCATTER, &scatter_csv(&run.scatter))?;
    Ok(())
}

/// Runs the pipeline and writes its artifact tree under the configured
/// output directory (resolved against `base` when relative).
pub fn run_and_write(config: &PipelineConfig, base: &Path) -> Result<(PipelineRun, Vec<PathBuf>)> {
    let run = run_pipeline(config, base)?;
    let out_dir = resolve(base, &config.output.dir);
    let files = write_artifacts(&run, &out_dir)?;
    Ok((run, files))
}

/// Outcome of a batch comparison run.
#[derive(Debug)]
pub struct MatrixOutcome {
    pub path: PathBuf,
    /// Scored model configurations, including the baseline.
    pub combinations: usize,
    pub failures: usize,
}

fn csv_safe(msg: &str) -> String {
    msg.replace(['\n', '\r'], " ").replace(',', ";")
}

/// Runs every (method, statistic, threshold) combination from the `[matrix]`
/// section against shared inputs and writes one comparison CSV. Shared
/// stages (conditioning, routing, rating, weights, the pixel baseline) are
/// computed once; per-combination failures become rows, not aborts.
pub fn run_matrix(config: &PipelineConfig, base: &Path, out_dir: &Path) -> Result<MatrixOutcome> {
    config.validate()?;
    let axes = config.matrix.clone().unwrap_or_default();

    let inputs = load_inputs(config, base).map_err(|e| e.in_stage("load-inputs"))?;
    let masks = inputs
        .ground_truth
        .as_ref()
        .ok_or_else(|| {
            Error::Config("matrix runs need flooded_mask and dry_mask ground truth".into())
        })
        .map_err(|e| e.in_stage("load-inputs"))?;
    let landuse = inputs
        .landuse
        .as_ref()
        .ok_or_else(|| Error::Config("inputs.landuse is required for a full run".into()))
        .map_err(|e| e.in_stage("load-inputs"))?;
    let hydrolith = inputs
        .hydrolith
        .as_ref()
        .ok_or_else(|| Error::Config("inputs.hydrolith is required for a full run".into()))
        .map_err(|e| e.in_stage("load-inputs"))?;

    let conditioned = condition(
        &inputs.dem,
        inputs.water_mask.as_ref(),
        &config.steady_water_params(),
        config.hydro.burn_depth,
    )
    .map_err(|e| e.in_stage("condition"))?;
    let routing = route(
        &conditioned.dem,
        config.routing.stream_threshold_cells,
        config.routing.pit_fill,
    )
    .map_err(|e| e.in_stage("route"))?;
    let rated = rate_criteria(
        &inputs.dem,
        &routing.network,
        &conditioned.steady_water,
        landuse,
        hydrolith,
        config,
    )
    .map_err(|e| e.in_stage("rate"))?;
    let model = solve_weights(config).map_err(|e| e.in_stage("weigh"))?;
    let constrained = config.constrained_criteria()?;

    let refs: [&RatedGrid; 5] = [&rated[0], &rated[1], &rated[2], &rated[3], &rated[4]];
    let weights: [f64; 5] = model
        .weights
        .clone()
        .try_into()
        .expect("five weights from a five-criteria matrix");
    let fri_pixel = ahp::flood_risk_index(
        &refs,
        &weights,
        &BTreeSet::new(),
        None,
        ZonalMethod::Maximum,
    )
    .map_err(|e| e.in_stage("synthesize"))?;

    let mut csv = String::from(REPORT_HEADER);
    csv.push_str(",status\n");
    let mut combinations = 0usize;
    let mut failures = 0usize;

    let pixel_row = ahp::classify_risk(&fri_pixel, 5)
        .and_then(|c| validate::validate_classes(&c.classes, masks));
    combinations += 1;
    match pixel_row {
        Ok(sets) => push_report_rows(
            &mut csv,
            &ReportRow {
                model: "pixel-ahp",
                zone_method: String::new(),
                statistic: String::new(),
                area_threshold_ha: None,
                constrained: String::new(),
                sets,
            },
            Some("ok"),
        ),
        Err(e) => {
            failures += 1;
            let _ = writeln!(
                csv,
                "pixel-ahp,,,,,,,,,,,,,,,,,,{}",
                csv_safe(&e.to_string())
            );
        }
    }

    for method_name in &axes.methods {
        let method = config::parse_method(method_name)?;
        for threshold in &axes.thresholds_ha {
            let combo = DelineationConfig {
                method,
                area_threshold_ha: threshold.0,
                pit_fill: config.routing.pit_fill,
            };
            let delineation = watershed::delineate(&conditioned.dem, &combo);
            for statistic_name in &axes.statistics {
                let statistic = config::parse_statistic(statistic_name)?;
                combinations += 1;
                let outcome =
                    delineation
                        .as_ref()
                        .map_err(|e| e.to_string())
                        .and_then(|delineation| {
                            let fri = ahp::flood_risk_index(
                                &refs,
                                &weights,
                                &constrained,
                                Some(&delineation.zones),
                                statistic,
                            )
                            .map_err(|e| e.to_string())?;
                            let classes = ahp::classify_risk(&fri, 5).map_err(|e| e.to_string())?;
                            validate::validate_classes(&classes.classes, masks)
                                .map_err(|e| e.to_string())
                        });
                match outcome {
                    Ok(sets) => push_report_rows(
                        &mut csv,
                        &ReportRow {
                            model: "zonal-ahp",
                            zone_method: method_name.clone(),
                            statistic: statistic_name.clone(),
                            area_threshold_ha: Some(threshold.0),
                            constrained: constrained_label(&constrained),
                            sets,
                        },
                        Some("ok"),
                    ),
                    Err(msg) => {
                        failures += 1;
                        let _ = writeln!(
                            csv,
                            "zonal-ahp,{},{},{},{},,,,,,,,,,,,,,{}",
                            method_name,
                            statistic_name,
                            threshold.0,
                            constrained_label(&constrained),
                            csv_safe(&msg)
                        );
                    }
                }
            }
        }
    }

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let path = out_dir.join(files::COMPARISON);
    fs::write(&path, &csv).map_err(|e| Error::io(&path, e))?;
    Ok(MatrixOutcome {
        path,
        combinations,
        failures,
    })
}
