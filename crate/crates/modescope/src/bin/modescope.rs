//! Command-line surface. A thin shell over the library: argument parsing,
//! file plumbing, and document output only — no statistical logic.

use clap::{Args, Parser, Subcommand};
use modescope::error::Error;
use modescope::geometry::{build_grid, direction_set, Grid, Point, Sample, ScaleParams};
use modescope::harness::{
    run_level_power, run_mode_detection_study, three_peak_mixture, DensitySpec, NormalSpec,
    Scenario,
};
use modescope::inference::{
    calibrate_local_mode, calibrate_mode_detection, detect_modes, local_mode_test,
    monotonicity_map, ProcedureConfig, ThresholdMode, WedgeFamily,
};
use modescope::io::{
    parse_points, render_map, results_to_string, write_results, ResultPayload, ResultsDoc, RunEcho,
};
use modescope::nullsim::{simulate_null, NullConfig, NullFlavor};
use modescope::univariate::univariate_quantile;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "modescope",
    version,
    about = "Multiscale tests for modes and monotonicity of a multivariate density"
)]
struct Cli {
    /// Number of worker threads (default: all cores). Results are identical
    /// for any worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test for a mode of the density at a candidate point.
    LocalTest(LocalTestArgs),
    /// Build the global monotonicity map over a grid.
    Map(MapArgs),
    /// Flag grid vertices where every wedge rejects an increasing density.
    DetectModes(DetectModesArgs),
    /// Simulate a null quantile or calibrate a procedure threshold.
    Calibrate(CalibrateArgs),
    /// Run a named level/power or detection-frequency study.
    Simulate(SimulateArgs),
    /// Simulate the one-dimensional multiscale spacing-test quantile.
    Univariate(UnivariateArgs),
}

#[derive(Args)]
struct GeometryArgs {
    /// Length constant of the sample-size scale rule.
    #[arg(long, default_value_t = 2.0)]
    c1: f64,
    /// Angle constant of the sample-size scale rule.
    #[arg(long, default_value_t = 9.65)]
    c2: f64,
    /// Packing slack for direction sets in dimension 3 and higher.
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    /// Explicit wedge length (overrides the scale rule; requires --angle).
    #[arg(long)]
    length: Option<f64>,
    /// Explicit half-opening angle in radians (requires --length).
    #[arg(long)]
    angle: Option<f64>,
}

impl GeometryArgs {
    fn family(&self, n: usize, d: usize) -> Result<WedgeFamily, Error> {
        match (self.length, self.angle) {
            (Some(length), Some(angle)) => {
                let directions = direction_set(d, angle, self.epsilon)?;
                WedgeFamily::explicit(length, angle, directions)
            }
            (None, None) => {
                WedgeFamily::from_scales(&ScaleParams::new(self.c1, self.c2, self.epsilon, n, d)?)
            }
            _ => Err(Error::Parameter(
                "--length and --angle must be given together".into(),
            )),
        }
    }

    fn echo(&self, params: &mut BTreeMap<String, String>) {
        params.insert("c1".into(), self.c1.to_string());
        params.insert("c2".into(), self.c2.to_string());
        params.insert("epsilon".into(), self.epsilon.to_string());
        if let Some(l) = self.length {
            params.insert("length".into(), l.to_string());
        }
        if let Some(a) = self.angle {
            params.insert("angle".into(), a.to_string());
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Master seed; required so every run is reproducible.
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Replicates for null simulation / calibration.
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    /// Write the result document here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl CommonArgs {
    fn echo(&self, params: &mut BTreeMap<String, String>) {
        params.insert("alpha".into(), self.alpha.to_string());
        params.insert("reps".into(), self.reps.to_string());
    }
}

#[derive(Args)]
struct LocalTestArgs {
    /// CSV file of observations (comma or whitespace separated).
    #[arg(long)]
    input: PathBuf,
    /// Candidate mode, e.g. "0.0,0.0".
    #[arg(long)]
    x0: String,
    /// Calibrate the threshold on uniform reference data instead of the
    /// conservative simulated quantile.
    #[arg(long)]
    calibrated: bool,
    /// Reference box for calibration as "l1,...,ld,u1,...,ud"; defaults to
    /// the sample's bounding box.
    #[arg(long)]
    ref_box: Option<String>,
    #[command(flatten)]
    geometry: GeometryArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct MapArgs {
    #[arg(long)]
    input: PathBuf,
    /// Grid box as "l1,...,ld,u1,...,ud".
    #[arg(long = "box", value_name = "BOX")]
    grid_box: String,
    #[arg(long)]
    mesh: f64,
    /// Also test every admissible subsection of each wedge.
    #[arg(long)]
    subsections: bool,
    /// Cap on the subsection span ladder.
    #[arg(long)]
    max_scales: Option<usize>,
    /// Also render the map as SVG to this path (2-d only).
    #[arg(long)]
    svg: Option<PathBuf>,
    #[command(flatten)]
    geometry: GeometryArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct DetectModesArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long = "box", value_name = "BOX")]
    grid_box: String,
    #[arg(long)]
    mesh: f64,
    #[arg(long)]
    calibrated: bool,
    #[arg(long)]
    ref_box: Option<String>,
    #[command(flatten)]
    geometry: GeometryArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Procedure to calibrate on uniform reference data ("local-test" or
    /// "detect-modes"); omit to simulate a raw null quantile from --counts.
    #[arg(long)]
    procedure: Option<String>,
    /// Sample size the threshold is for.
    #[arg(long)]
    n: usize,
    /// Dimension (needed when no counts are given).
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Candidate point for "local-test" calibration.
    #[arg(long)]
    x0: Option<String>,
    /// Grid box for "detect-modes" calibration.
    #[arg(long = "box", value_name = "BOX")]
    grid_box: Option<String>,
    #[arg(long)]
    mesh: Option<f64>,
    /// Reference box for calibration.
    #[arg(long)]
    ref_box: Option<String>,
    /// Observed wedge counts for raw null simulation, e.g. "5,12,8".
    #[arg(long)]
    counts: Option<String>,
    /// Null flavor for raw simulation: two-sided, one-sided, or multiscale.
    #[arg(long, default_value = "two-sided")]
    flavor: String,
    #[arg(long)]
    max_scales: Option<usize>,
    #[command(flatten)]
    geometry: GeometryArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario name: local-normal, local-uniform, grid-threepeak, or
    /// grid-uniform.
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    runs: usize,
    #[arg(long)]
    calibrated: bool,
    /// Candidate point for the local scenarios (default "0,0").
    #[arg(long)]
    x0: Option<String>,
    #[command(flatten)]
    geometry: GeometryArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct UnivariateArgs {
    #[arg(long)]
    n: usize,
    #[command(flatten)]
    common: CommonArgs,
}

fn parse_csv_numbers(s: &str, what: &str) -> Result<Vec<f64>, Error> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parameter(format!("invalid number '{t}' in {what}")))
        })
        .collect()
}

fn parse_point(s: &str, what: &str) -> Result<Point, Error> {
    Point::new(parse_csv_numbers(s, what)?)
}

/// Parses "l1,...,ld,u1,...,ud" into a (lower, upper) box.
fn parse_box(s: &str, what: &str) -> Result<(Point, Point), Error> {
    let values = parse_csv_numbers(s, what)?;
    if values.len() % 2 != 0 || values.is_empty() {
        return Err(Error::Parameter(format!(
            "{what} must list the lower corner then the upper corner"
        )));
    }
    let d = values.len() / 2;
    Ok((Point::new(values[..d].to_vec())?, Point::new(values[d..].to_vec())?))
}

fn parse_grid(box_str: &str, mesh: f64) -> Result<Grid, Error> {
    let (lower, upper) = parse_box(box_str, "--box")?;
    build_grid(lower, upper, mesh)
}

fn procedure_config(common: &CommonArgs, calibrated: bool, ref_box: Option<(Point, Point)>) -> ProcedureConfig {
    ProcedureConfig {
        alpha: common.alpha,
        mode: if calibrated { ThresholdMode::Calibrated } else { ThresholdMode::Raw },
        reps: common.reps,
        seed: common.seed,
        reference_box: ref_box,
        max_scales: None,
    }
}

fn emit(doc: &ResultsDoc, output: &Option<PathBuf>) -> Result<(), Error> {
    match output {
        Some(path) => write_results(doc, path),
        None => {
            print!("{}", results_to_string(doc)?);
            Ok(())
        }
    }
}

fn load_sample(path: &PathBuf) -> Result<Sample, Error> {
    parse_points(path)
}

fn run_local_test(args: LocalTestArgs) -> Result<(), Error> {
    let sample = load_sample(&args.input)?;
    let x0 = parse_point(&args.x0, "--x0")?;
    let family = args.geometry.family(sample.len(), sample.dim())?;
    let ref_box = args.ref_box.as_deref().map(|s| parse_box(s, "--ref-box")).transpose()?;
    let config = procedure_config(&args.common, args.calibrated, ref_box);
    let result = local_mode_test(&sample, &x0, &family, &config)?;
    let mut params = BTreeMap::new();
    args.common.echo(&mut params);
    args.geometry.echo(&mut params);
    params.insert("input".into(), args.input.display().to_string());
    params.insert("x0".into(), args.x0.clone());
    params.insert("calibrated".into(), args.calibrated.to_string());
    let doc = ResultsDoc::new(
        RunEcho { procedure: "local-test".into(), seed: args.common.seed, parameters: params },
        ResultPayload::ModeTest(result),
    );
    emit(&doc, &args.common.output)
}

fn run_map(args: MapArgs) -> Result<(), Error> {
    let sample = load_sample(&args.input)?;
    let grid = parse_grid(&args.grid_box, args.mesh)?;
    let family = args.geometry.family(sample.len(), sample.dim())?;
    let config = ProcedureConfig {
        max_scales: args.max_scales,
        ..procedure_config(&args.common, false, None)
    };
    let map = monotonicity_map(&sample, &grid, &family, args.subsections, &config)?;
    if let Some(svg_path) = &args.svg {
        render_map(&map, svg_path)?;
    }
    let mut params = BTreeMap::new();
    args.common.echo(&mut params);
    args.geometry.echo(&mut params);
    params.insert("input".into(), args.input.display().to_string());
    params.insert("box".into(), args.grid_box.clone());
    params.insert("mesh".into(), args.mesh.to_string());
    params.insert("subsections".into(), args.subsections.to_string());
    let doc = ResultsDoc::new(
        RunEcho { procedure: "map".into(), seed: args.common.seed, parameters: params },
        ResultPayload::Map(map),
    );
    emit(&doc, &args.common.output)
}

fn run_detect_modes(args: DetectModesArgs) -> Result<(), Error> {
    let sample = load_sample(&args.input)?;
    let grid = parse_grid(&args.grid_box, args.mesh)?;
    let family = args.geometry.family(sample.len(), sample.dim())?;
    let ref_box = args.ref_box.as_deref().map(|s| parse_box(s, "--ref-box")).transpose()?;
    let config = procedure_config(&args.common, args.calibrated, ref_box);
    let detection = detect_modes(&sample, &grid, &family, &config)?;
    let mut params = BTreeMap::new();
    args.common.echo(&mut params);
    args.geometry.echo(&mut params);
    params.insert("input".into(), args.input.display().to_string());
    params.insert("box".into(), args.grid_box.clone());
    params.insert("mesh".into(), args.mesh.to_string());
    params.insert("calibrated".into(), args.calibrated.to_string());
    let doc = ResultsDoc::new(
        RunEcho { procedure: "detect-modes".into(), seed: args.common.seed, parameters: params },
        ResultPayload::Detection(detection),
    );
    emit(&doc, &args.common.output)
}

fn run_calibrate(args: CalibrateArgs) -> Result<(), Error> {
    let mut params = BTreeMap::new();
    args.common.echo(&mut params);
    args.geometry.echo(&mut params);
    params.insert("n".into(), args.n.to_string());
    let quantile = match (&args.procedure, &args.counts) {
        (None, Some(counts_str)) => {
            let counts: Vec<usize> = counts_str
                .split(',')
                .map(|t| {
                    t.trim().parse::<usize>().map_err(|_| {
                        Error::Parameter(format!("invalid count '{t}' in --counts"))
                    })
                })
                .collect::<Result<_, _>>()?;
            let flavor = match args.flavor.as_str() {
                "two-sided" => NullFlavor::TwoSidedWedge,
                "one-sided" => NullFlavor::OneSidedWedge,
                "multiscale" => NullFlavor::MultiscaleSubsections,
                other => {
                    return Err(Error::Parameter(format!(
                        "unknown --flavor '{other}' (two-sided, one-sided, multiscale)"
                    )))
                }
            };
            params.insert("counts".into(), counts_str.clone());
            params.insert("flavor".into(), args.flavor.clone());
            simulate_null(&NullConfig {
                counts,
                n: args.n,
                alpha: args.common.alpha,
                reps: args.common.reps,
                seed: args.common.seed,
                flavor,
                max_scales: args.max_scales,
            })?
        }
        (Some(procedure), None) => {
            let ref_box = args
                .ref_box
                .as_deref()
                .ok_or_else(|| Error::Parameter("calibration requires --ref-box".into()))
                .and_then(|s| parse_box(s, "--ref-box"))?;
            let d = ref_box.0.dim();
            let family = args.geometry.family(args.n, d)?;
            let config = procedure_config(&args.common, true, Some(ref_box));
            params.insert("ref_box".into(), args.ref_box.clone().unwrap_or_default());
            match procedure.as_str() {
                "local-test" => {
                    let x0 = args
                        .x0
                        .as_deref()
                        .ok_or_else(|| Error::Parameter("local-test calibration requires --x0".into()))
                        .and_then(|s| parse_point(s, "--x0"))?;
                    params.insert("x0".into(), args.x0.clone().unwrap_or_default());
                    calibrate_local_mode(&family, &x0, args.n, &config)?
                }
                "detect-modes" => {
                    let (box_str, mesh) = match (&args.grid_box, args.mesh) {
                        (Some(b), Some(m)) => (b, m),
                        _ => {
                            return Err(Error::Parameter(
                                "detect-modes calibration requires --box and --mesh".into(),
                            ))
                        }
                    };
                    let grid = parse_grid(box_str, mesh)?;
                    params.insert("box".into(), box_str.clone());
                    params.insert("mesh".into(), mesh.to_string());
                    calibrate_mode_detection(&family, &grid, args.n, &config)?
                }
                other => {
                    return Err(Error::Parameter(format!(
                        "unknown --procedure '{other}' (local-test or detect-modes)"
                    )))
                }
            }
        }
        _ => {
            return Err(Error::Parameter(
                "give exactly one of --procedure (calibration) or --counts (null simulation)"
                    .into(),
            ))
        }
    };
    let doc = ResultsDoc::new(
        RunEcho { procedure: "calibrate".into(), seed: args.common.seed, parameters: params },
        ResultPayload::Quantile(quantile),
    );
    emit(&doc, &args.common.output)
}

fn run_simulate(args: SimulateArgs) -> Result<(), Error> {
    let family = args.geometry.family(args.n, 2)?;
    let mut params = BTreeMap::new();
    args.common.echo(&mut params);
    args.geometry.echo(&mut params);
    params.insert("scenario".into(), args.scenario.clone());
    params.insert("n".into(), args.n.to_string());
    params.insert("runs".into(), args.runs.to_string());
    params.insert("calibrated".into(), args.calibrated.to_string());
    let local_box = (Point::from(vec![-2.5, -2.5]), Point::from(vec![2.5, 2.5]));
    let grid_ref_box = (Point::from(vec![-3.5, -1.5]), Point::from(vec![3.5, 3.5]));
    let payload = match args.scenario.as_str() {
        "local-normal" | "local-uniform" => {
            let density = if args.scenario == "local-normal" {
                DensitySpec::Normal(NormalSpec::isotropic(vec![0.0, 0.0], 1.0))
            } else {
                DensitySpec::UniformBox { lower: local_box.0.clone(), upper: local_box.1.clone() }
            };
            let x0 = match &args.x0 {
                Some(s) => parse_point(s, "--x0")?,
                None => Point::from(vec![0.0, 0.0]),
            };
            let config = procedure_config(&args.common, args.calibrated, Some(local_box));
            let scenario =
                Scenario { density, n: args.n, runs: args.runs, seed: args.common.seed };
            ResultPayload::LevelPower(run_level_power(&scenario, &x0, &family, &config)?)
        }
        "grid-threepeak" | "grid-uniform" => {
            let density = if args.scenario == "grid-threepeak" {
                three_peak_mixture()
            } else {
                DensitySpec::UniformBox {
                    lower: grid_ref_box.0.clone(),
                    upper: grid_ref_box.1.clone(),
                }
            };
            let grid = build_grid(
                Point::from(vec![-3.0, -1.0]),
                Point::from(vec![3.0, 3.0]),
                1.0,
            )?;
            let config = procedure_config(&args.common, args.calibrated, Some(grid_ref_box));
            let scenario =
                Scenario { density, n: args.n, runs: args.runs, seed: args.common.seed };
            ResultPayload::DetectionStudy(run_mode_detection_study(
                &scenario, &grid, &family, &config,
            )?)
        }
        other => {
            return Err(Error::Parameter(format!(
                "unknown --scenario '{other}' (local-normal, local-uniform, grid-threepeak, grid-uniform)"
            )))
        }
    };
    let doc = ResultsDoc::new(
        RunEcho { procedure: "simulate".into(), seed: args.common.seed, parameters: params },
        payload,
    );
    emit(&doc, &args.common.output)
}

fn run_univariate(args: UnivariateArgs) -> Result<(), Error> {
    let kappa = univariate_quantile(args.n, args.common.alpha, args.common.reps, args.common.seed)?;
    let mut params = BTreeMap::new();
    args.common.echo(&mut params);
    params.insert("n".into(), args.n.to_string());
    let doc = ResultsDoc::new(
        RunEcho { procedure: "univariate".into(), seed: args.common.seed, parameters: params },
        ResultPayload::UnivariateQuantile {
            n: args.n,
            alpha: args.common.alpha,
            reps: args.common.reps,
            kappa,
        },
    );
    emit(&doc, &args.common.output)
}

/// Exit code 2 for errors in the data itself, 1 for everything else
/// (usage, parameters, rendering limits).
fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_)
        | Error::Parse { .. }
        | Error::InsufficientData(_)
        | Error::DegenerateScale(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version to stdout with success status
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(workers) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
            eprintln!("error: could not configure {workers} workers: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::LocalTest(args) => run_local_test(args),
        Command::Map(args) => run_map(args),
        Command::DetectModes(args) => run_detect_modes(args),
        Command::Calibrate(args) => run_calibrate(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Univariate(args) => run_univariate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
