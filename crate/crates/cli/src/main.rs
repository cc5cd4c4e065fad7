//! Command-line driver for the flood-risk pipeline.
//!
//! Every subcommand is one pipeline stage; `pipeline` chains them all in
//! memory. Stage subcommands read their upstream artifacts from the stage
//! directory under the same file names the full run writes, so running the
//! stages one by one reproduces `pipeline` output byte for byte.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use floodrisk::ahp::{self, CRITERIA};
use floodrisk::ascii;
use floodrisk::config::PipelineConfig;
use floodrisk::flow::{self, FlowField, FlowMode};
use floodrisk::pipeline::{self, files, ReportRow};
use floodrisk::rating::RatedGrid;
use floodrisk::streams;
use floodrisk::watershed;
use floodrisk::{Error, GeoGrid, Mask, ZoneLabels};

#[derive(Parser)]
#[command(
    name = "floodrisk",
    version,
    about = "Watershed-constrained zonal AHP flood-risk mapping",
    propagate_version = true
)]
struct Cli {
    /// Run configuration file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Where this stage reads and writes artifacts. Defaults to the
    /// configured output directory.
    #[arg(long, global = true, value_name = "DIR")]
    stage_output: Option<PathBuf>,

    /// Assert a fully deterministic run. The pipeline never draws
    /// randomness, so this is a guard, not a switch.
    #[arg(long, global = true)]
    seedless: bool,

    /// Override a config key, e.g. --set delineation.method=mfd. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify steady water and burn it into the terrain.
    Condition,
    /// Derive the single-direction flow field from the conditioned terrain.
    Flowdir,
    /// Accumulate contributing-cell counts over the flow field.
    Accumulate,
    /// Extract the stream network and order it.
    Streams,
    /// Partition the terrain into watershed zones.
    Delineate,
    /// Rate all five criteria.
    Rate,
    /// Solve the judgment matrix into criterion weights.
    Weights,
    /// Synthesize the constrained and per-pixel risk indices.
    Fri,
    /// Slice the risk index into classes by natural breaks.
    Classify,
    /// Score the risk classes against ground truth and sample the scatter.
    Validate,
    /// Run every stage and write the full artifact tree.
    Pipeline,
    /// Run every configured (method, statistic, threshold) combination.
    Matrix,
}

/// Parsed config plus the directories everything resolves against.
struct Ctx {
    config: PipelineConfig,
    /// Directory input paths resolve against: the config file's parent.
    base: PathBuf,
    /// Stage artifact directory.
    dir: PathBuf,
}

fn build_ctx(cli: &Cli) -> Result<Ctx, Error> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let mut overrides = Vec::with_capacity(cli.set.len());
    for entry in &cli.set {
        let (key, value) = entry
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set needs KEY=VALUE, got {entry:?}")))?;
        overrides.push((key.to_string(), value.to_string()));
    }
    let config = PipelineConfig::load(config_path, &overrides)?;
    let base = config_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let dir = match &cli.stage_output {
        Some(dir) => dir.clone(),
        None => {
            let configured = &config.output.dir;
            if configured.is_absolute() {
                configured.clone()
            } else {
                base.join(configured)
            }
        }
    };
    Ok(Ctx { config, base, dir })
}

/// Reads an upstream artifact, pointing at the producing stage when missing.
fn need(ctx: &Ctx, name: &str, produced_by: &str) -> Result<GeoGrid, Error> {
    let path = ctx.dir.join(name);
    if !path.exists() {
        return Err(Error::Config(format!(
            "{} not found in {}; run the {produced_by} stage first",
            name,
            ctx.dir.display()
        )));
    }
    ascii::read(&path)
}

fn write_grid(ctx: &Ctx, name: &str, grid: &GeoGrid) -> Result<(), Error> {
    std::fs::create_dir_all(&ctx.dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", ctx.dir.display())))?;
    ascii::write(grid, &ctx.dir.join(name))
}

fn write_text(ctx: &Ctx, name: &str, body: &str) -> Result<(), Error> {
    std::fs::create_dir_all(&ctx.dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", ctx.dir.display())))?;
    let path = ctx.dir.join(name);
    std::fs::write(&path, body).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn cmd_condition(ctx: &Ctx) -> Result<(), Error> {
    let inputs = pipeline::load_inputs(&ctx.config, &ctx.base)?;
    let conditioned = pipeline::condition(
        &inputs.dem,
        inputs.water_mask.as_ref(),
        &ctx.config.steady_water_params(),
        ctx.config.hydro.burn_depth,
    )
    .map_err(|e| e.in_stage("condition"))?;
    write_grid(ctx, files::CONDITIONED_DEM, &conditioned.dem)?;
    write_grid(
        ctx,
        files::STEADY_WATER,
        &conditioned.steady_water.to_grid(),
    )?;
    println!(
        "conditioned terrain written; {} steady-water cells",
        conditioned.steady_water.count()
    );
    Ok(())
}

fn cmd_flowdir(ctx: &Ctx) -> Result<(), Error> {
    let dem = need(ctx, files::CONDITIONED_DEM, "condition")?;
    let terrain = if ctx.config.routing.pit_fill {
        flow::fill_pits(&dem)
    } else {
        dem
    };
    let field = flow::d8_flow_direction(&terrain);
    write_grid(ctx, files::FLOWDIR, &field.to_grid())?;
    println!("flow direction written");
    Ok(())
}

fn cmd_accumulate(ctx: &Ctx) -> Result<(), Error> {
    let grid = need(ctx, files::FLOWDIR, "flowdir")?;
    let field = FlowField::from_grid(&grid, FlowMode::Single)?;
    let acc = flow::flow_accumulation(&field).map_err(|e| e.in_stage("route"))?;
    write_grid(ctx, files::ACCUMULATION, &acc)?;
    println!("flow accumulation written");
    Ok(())
}

fn cmd_streams(ctx: &Ctx) -> Result<(), Error> {
    let acc = need(ctx, files::ACCUMULATION, "accumulate")?;
    let field = FlowField::from_grid(&need(ctx, files::FLOWDIR, "flowdir")?, FlowMode::Single)?;
    let threshold = ctx.config.routing.stream_threshold_cells;
    let mask = flow::extract_streams(&acc, threshold);
    if !mask.any() {
        return Err(Error::NoStreams {
            threshold_cells: threshold,
        }
        .in_stage("route"));
    }
    let network = streams::strahler_order(&mask, &field).map_err(|e| e.in_stage("route"))?;
    write_grid(ctx, files::STREAMS, &mask.to_grid())?;
    write_grid(ctx, files::STREAM_ORDERS, &network.orders_grid())?;
    write_text(ctx, files::STREAM_LINKS, &pipeline::links_csv(&network))?;
    println!(
        "{} stream cells in {} links",
        mask.count(),
        network.links().len()
    );
    Ok(())
}

fn cmd_delineate(ctx: &Ctx) -> Result<(), Error> {
    let dem = need(ctx, files::CONDITIONED_DEM, "condition")?;
    let delineation = watershed::delineate(&dem, &ctx.config.delineation_config()?)
        .map_err(|e| e.in_stage("delineate"))?;
    write_grid(ctx, files::ZONES, &delineation.zones.to_grid())?;
    write_text(
        ctx,
        files::ZONES_SUMMARY,
        &pipeline::zones_csv(&delineation),
    )?;
    println!(
        "{} zones at a threshold of {} cells",
        delineation.info.len(),
        delineation.threshold_cells
    );
    Ok(())
}

fn cmd_rate(ctx: &Ctx) -> Result<(), Error> {
    let inputs = pipeline::load_inputs(&ctx.config, &ctx.base)?;
    let landuse = inputs
        .landuse
        .as_ref()
        .ok_or_else(|| Error::Config("inputs.landuse is required to rate criteria".into()))?;
    let hydrolith = inputs
        .hydrolith
        .as_ref()
        .ok_or_else(|| Error::Config("inputs.hydrolith is required to rate criteria".into()))?;
    let steady_water = Mask::from_nonzero(&need(ctx, files::STEADY_WATER, "condition")?);
    let field = FlowField::from_grid(&need(ctx, files::FLOWDIR, "flowdir")?, FlowMode::Single)?;
    let stream_mask = Mask::from_nonzero(&need(ctx, files::STREAMS, "streams")?);
    let network = streams::strahler_order(&stream_mask, &field).map_err(|e| e.in_stage("rate"))?;
    let rated = pipeline::rate_criteria(
        &inputs.dem,
        &network,
        &steady_water,
        landuse,
        hydrolith,
        &ctx.config,
    )
    .map_err(|e| e.in_stage("rate"))?;
    for (criterion, grid) in CRITERIA.iter().zip(&rated) {
        write_grid(ctx, &files::rated(criterion.name()), grid)?;
    }
    println!("five rated criteria written");
    Ok(())
}

fn cmd_weights(ctx: &Ctx) -> Result<(), Error> {
    let model = pipeline::solve_weights(&ctx.config).map_err(|e| e.in_stage("weigh"))?;
    write_text(ctx, files::WEIGHTS, &pipeline::weights_csv(&model))?;
    for (criterion, weight) in CRITERIA.iter().zip(&model.weights) {
        println!("{:<22} {:.4}", criterion.name(), weight);
    }
    println!(
        "lambda_max {:.4}, consistency ratio {:.4} (accepted)",
        model.lambda_max, model.consistency_ratio
    );
    Ok(())
}

fn load_rated(ctx: &Ctx) -> Result<[RatedGrid; 5], Error> {
    let mut grids = Vec::with_capacity(5);
    for criterion in CRITERIA {
        grids.push(need(ctx, &files::rated(criterion.name()), "rate")?);
    }
    Ok(grids.try_into().expect("five criteria"))
}

fn cmd_fri(ctx: &Ctx) -> Result<(), Error> {
    let rated = load_rated(ctx)?;
    let zones = ZoneLabels::from_grid(&need(ctx, files::ZONES, "delineate")?)?;
    let model = pipeline::solve_weights(&ctx.config).map_err(|e| e.in_stage("weigh"))?;
    let constrained = ctx.config.constrained_criteria()?;
    let statistic = ctx.config.statistic()?;
    let risk = pipeline::synthesize(&rated, &model, &constrained, &zones, statistic)
        .map_err(|e| e.in_stage("synthesize"))?;
    write_grid(ctx, files::FRI, &risk.fri)?;
    write_grid(ctx, files::FRI_PIXEL, &risk.fri_pixel)?;
    println!("risk indices written (constrained and per-pixel)");
    Ok(())
}

fn cmd_classify(ctx: &Ctx) -> Result<(), Error> {
    let fri = need(ctx, files::FRI, "fri")?;
    let classification = ahp::classify_risk(&fri, 5).map_err(|e| e.in_stage("classify"))?;
    write_grid(ctx, files::RISK_CLASSES, &classification.classes)?;
    write_text(
        ctx,
        files::RISK_BREAKS,
        &pipeline::breaks_csv(&classification),
    )?;
    println!(
        "{} risk classes{}",
        classification.class_count,
        if classification.degenerate {
            " (degenerate: fewer distinct index values than classes)"
        } else {
            ""
        }
    );
    Ok(())
}

fn cmd_validate(ctx: &Ctx) -> Result<(), Error> {
    let inputs = pipeline::load_inputs(&ctx.config, &ctx.base)?;
    let masks = inputs.ground_truth.as_ref().ok_or_else(|| {
        Error::Config("validation needs inputs.flooded_mask and inputs.dry_mask".into())
    })?;
    let classes = need(ctx, files::RISK_CLASSES, "classify")?;
    let fri = need(ctx, files::FRI, "fri")?;
    let fri_pixel = need(ctx, files::FRI_PIXEL, "fri")?;

    let zonal = floodrisk::validate::validate_classes(&classes, masks)
        .map_err(|e| e.in_stage("validate"))?;
    let pixel_classes = ahp::classify_risk(&fri_pixel, 5).map_err(|e| e.in_stage("validate"))?;
    let pixel = floodrisk::validate::validate_classes(&pixel_classes.classes, masks)
        .map_err(|e| e.in_stage("validate"))?;

    let constrained = ctx.config.constrained_criteria()?;
    let rows = vec![
        ReportRow {
            model: "zonal-ahp",
            zone_method: ctx.config.delineation.method.clone(),
            statistic: ctx.config.statistic()?.name().to_string(),
            area_threshold_ha: Some(ctx.config.delineation.area_threshold_ha),
            constrained: pipeline::constrained_label(&constrained),
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
    ];
    write_text(
        ctx,
        files::VALIDATION_REPORT,
        &pipeline::validation_csv(&rows),
    )?;

    let scatter = pipeline::scatter_points(
        &fri,
        &fri_pixel,
        Some(masks.flooded()),
        pipeline::SCATTER_STRIDE,
    );
    write_text(ctx, files::SCATTER, &pipeline::scatter_csv(&scatter))?;

    for row in &rows {
        for set in &row.sets {
            println!(
                "{} set {}: correct {:.2}%, fit {:.2}%, f1 {:.4}",
                row.model,
                set.set.tag(),
                set.correct_pct,
                set.fit_pct,
                set.confusion.f1
            );
        }
    }
    Ok(())
}

fn cmd_pipeline(ctx: &Ctx) -> Result<(), Error> {
    let run = pipeline::run_pipeline(&ctx.config, &ctx.base)?;
    let written = pipeline::write_artifacts(&run, &ctx.dir)?;
    println!(
        "{} zones, {} stream links, {} scatter points; {} files in {}",
        run.delineation.info.len(),
        run.routing.network.links().len(),
        run.scatter.len(),
        written.len(),
        ctx.dir.display()
    );
    Ok(())
}

fn cmd_matrix(ctx: &Ctx) -> Result<(), Error> {
    let outcome = pipeline::run_matrix(&ctx.config, &ctx.base, &ctx.dir)?;
    println!(
        "{} combinations ({} failed) -> {}",
        outcome.combinations,
        outcome.failures,
        outcome.path.display()
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    let ctx = build_ctx(cli)?;
    match cli.command {
        Command::Condition => cmd_condition(&ctx),
        Command::Flowdir => cmd_flowdir(&ctx),
        Command::Accumulate => cmd_accumulate(&ctx),
        Command::Streams => cmd_streams(&ctx),
        Command::Delineate => cmd_delineate(&ctx),
        Command::Rate => cmd_rate(&ctx),
        Command::Weights => cmd_weights(&ctx),
        Command::Fri => cmd_fri(&ctx),
        Command::Classify => cmd_classify(&ctx),
        Command::Validate => cmd_validate(&ctx),
        Command::Pipeline => cmd_pipeline(&ctx),
        Command::Matrix => cmd_matrix(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests are successes, everything else is a
            // usage problem
            let code = if e.exit_code() == 0 { 0 } else { 1 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e.root() {
                Error::Config(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
