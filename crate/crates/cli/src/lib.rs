//! The `transplane` command line: sampling, exploration and Monte Carlo runs
//! with JSON, CSV and SVG outputs.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use transplane_core::explorer::{
    ball_area, developed, injectivity_radius, metric_ball_singularities, render_svg, visible_atlas,
    visible_singularities, ExploreError, LocatedPoint, RenderOptions,
};
use transplane_core::flat_complex::{ChartId, ConeId, SurfaceError, SurfaceProvider};
use transplane_core::poisson_plane::{expand, sample_plane, PlaneError, TruncatedPlane, FORMAT_VERSION};
use transplane_core::square_tiled::{build_sts, parse_cycles, random_sts, rescale, SquareTiledSurface, StsError};
use transplane_core::stats::{mc_nearest_distance, mc_visible_count, StatsError, Viewpoint};
use transplane_core::Vec2;

/// Extra root radius sampled beyond the radius a query asks for.
const SAMPLE_MARGIN: f64 = 0.01;
const MAX_EXPANSIONS: usize = 16;

#[derive(Parser, Debug)]
#[command(name = "transplane", version, about = "Poisson translation planes and flat surfaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Everything a run was asked to do. Written into every JSON output.
#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
pub enum Command {
    /// Sample a truncated Poisson translation plane
    Sample(SampleArgs),
    /// List singularities visible from a point
    Visible(VisibleArgs),
    /// Singularities and area of a metric ball
    Ball(BallArgs),
    /// Run a Monte Carlo experiment
    Mc(McArgs),
    /// Build or sample a square-tiled surface
    Sts {
        #[command(subcommand)]
        action: StsAction,
    },
    /// Injectivity radius on a square-tiled surface
    Injrad(InjradArgs),
    /// SVG of the region visible from a point
    Render(RenderArgs),
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SampleArgs {
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub radius: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Where the surface comes from: a saved plane, a saved square-tiled
/// surface, or a plane sampled on the fly.
#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceArgs {
    #[arg(long, conflicts_with_all = ["sts", "lambda"])]
    pub plane: Option<PathBuf>,
    #[arg(long, conflicts_with = "lambda")]
    pub sts: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// The viewpoint: a cone point by id, or a regular point of a chart.
#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PointArgs {
    /// Cone point id, e.g. `3` or `0.2`
    #[arg(long, conflicts_with = "at")]
    pub from: Option<String>,
    /// Regular point `x,y` in chart coordinates
    #[arg(long, allow_hyphen_values = true)]
    pub at: Option<String>,
    /// Chart of `--at`, e.g. `root` or `0.1`
    #[arg(long)]
    pub chart: Option<String>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct VisibleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub surface: SurfaceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub point: PointArgs,
    #[arg(long)]
    pub radius: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct BallArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub surface: SurfaceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub point: PointArgs,
    #[arg(long)]
    pub radius: f64,
    /// Quasi-Monte Carlo points per chart
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    VisibleCount,
    NearestDistance,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum From {
    Regular,
    Singularity,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct McArgs {
    #[arg(long, value_enum)]
    pub experiment: Experiment,
    #[arg(long, value_enum, default_value_t = From::Regular)]
    pub from: From,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long)]
    pub radius: f64,
    #[arg(long, default_value_t = 2000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum StsAction {
    /// Surface from a permutation pair in cycle notation
    Build {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        hperm: String,
        #[arg(long)]
        vperm: String,
        /// Side length of each square
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Uniformly random connected permutation pair
    Random {
        /// Number of squares
        #[arg(long = "squares", visible_alias = "n")]
        #[serde(rename = "squares")]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct InjradArgs {
    #[arg(long)]
    pub sts: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub point: PointArgs,
    #[arg(long)]
    pub r_max: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct RenderArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub surface: SurfaceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub point: PointArgs,
    #[arg(long)]
    pub radius: f64,
    /// Stroke width as a fraction of the radius
    #[arg(long, default_value_t = 0.004)]
    pub stroke_scale: f64,
    /// Fill every cell with one colour instead of colouring by depth
    #[arg(long)]
    pub no_depth_color: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// A bad argument, reported with exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(usage(format!("--{name} must be positive and finite, got {v}")))
    }
}

impl Command {
    /// Checks numeric arguments before anything runs.
    pub fn validate(&self) -> Result<()> {
        match self {
            Command::Sample(a) => {
                positive("lambda", a.lambda)?;
                positive("radius", a.radius)
            }
            Command::Visible(a) => {
                a.surface.validate()?;
                positive("radius", a.radius)
            }
            Command::Ball(a) => {
                a.surface.validate()?;
                positive("radius", a.radius)?;
                if a.samples == 0 {
                    return Err(usage("--samples must be positive"));
                }
                Ok(())
            }
            Command::Mc(a) => {
                positive("lambda", a.lambda)?;
                positive("radius", a.radius)?;
                if a.trials < transplane_core::stats::MIN_TRIALS {
                    return Err(usage(format!("--trials must be at least {}", transplane_core::stats::MIN_TRIALS)));
                }
                if a.format == Format::Csv && a.experiment != Experiment::VisibleCount {
                    return Err(usage("--format csv is only available for visible-count"));
                }
                Ok(())
            }
            Command::Sts { action: StsAction::Build { n, scale, .. } | StsAction::Random { n, scale, .. } } => {
                if *n == 0 {
                    return Err(usage("--n must be positive"));
                }
                positive("scale", *scale)
            }
            Command::Injrad(a) => positive("r-max", a.r_max),
            Command::Render(a) => {
                a.surface.validate()?;
                positive("radius", a.radius)?;
                positive("stroke-scale", a.stroke_scale)
            }
        }
    }

    fn out(&self) -> Option<&PathBuf> {
        match self {
            Command::Sample(a) => a.out.as_ref(),
            Command::Visible(a) => a.out.as_ref(),
            Command::Ball(a) => a.out.as_ref(),
            Command::Mc(a) => a.out.as_ref(),
            Command::Sts { action: StsAction::Build { out, .. } | StsAction::Random { out, .. } } => out.as_ref(),
            Command::Injrad(a) => a.out.as_ref(),
            Command::Render(a) => Some(&a.out),
        }
    }
}

impl SurfaceArgs {
    fn validate(&self) -> Result<()> {
        match (&self.plane, &self.sts, self.lambda) {
            (None, None, None) => Err(usage("give one of --plane, --sts or --lambda")),
            (_, _, Some(l)) => positive("lambda", l),
            _ => Ok(()),
        }
    }
}

enum Surface {
    Plane { plane: TruncatedPlane, expandable: bool },
    Sts(SquareTiledSurface),
}

impl Surface {
    fn provider(&self) -> &dyn SurfaceProvider {
        match self {
            Surface::Plane { plane, .. } => plane,
            Surface::Sts(s) => s,
        }
    }

    /// Runs `f`, growing an on-the-fly plane whenever it runs out of sample.
    fn explore<T>(&mut self, f: impl Fn(&dyn SurfaceProvider) -> Result<T, ExploreError>) -> Result<T> {
        for _ in 0..MAX_EXPANSIONS {
            match (f(self.provider()), &mut *self) {
                (
                    Err(ExploreError::Surface(SurfaceError::NeedsExpansion { have, need, .. })),
                    Surface::Plane { plane, expandable: true },
                ) => {
                    let grow = (need - have).max(0.0) + SAMPLE_MARGIN * plane.budget().max(1.0);
                    *plane = expand(plane, plane.budget() + grow)?;
                }
                (r, _) => return Ok(r?),
            }
        }
        bail!(ExploreError::InvalidParameter(format!("sample still too small after {MAX_EXPANSIONS} expansions")))
    }
}

fn read_json(path: &PathBuf) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Outputs of `sample` and `sts` wrap the document under a key.
fn unwrap_document(v: Value, key: &str) -> Value {
    match v {
        Value::Object(mut m) if m.contains_key(key) => m.remove(key).expect("checked"),
        v => v,
    }
}

fn load_sts(path: &PathBuf) -> Result<SquareTiledSurface> {
    let doc = unwrap_document(read_json(path)?, "surface");
    Ok(SquareTiledSurface::from_json(&doc.to_string())?)
}

fn load_surface(args: &SurfaceArgs, radius: f64) -> Result<Surface> {
    if let Some(path) = &args.plane {
        let doc = unwrap_document(read_json(path)?, "plane");
        let plane = TruncatedPlane::from_json(&doc.to_string())?;
        let expandable = !plane.is_manual() && plane.planted().is_none();
        return Ok(Surface::Plane { plane, expandable });
    }
    if let Some(path) = &args.sts {
        return Ok(Surface::Sts(load_sts(path)?));
    }
    let lambda = args.lambda.ok_or_else(|| usage("give one of --plane, --sts or --lambda"))?;
    let plane = sample_plane(args.seed, lambda, radius * (1.0 + SAMPLE_MARGIN))?;
    Ok(Surface::Plane { plane, expandable: true })
}

fn parse_point(s: &str) -> Result<Vec2> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [x, y] = parts[..] else {
        return Err(usage(format!("--at expects x,y, got {s:?}")));
    };
    let p = Vec2::new(
        x.parse().map_err(|_| usage(format!("bad coordinate {x:?}")))?,
        y.parse().map_err(|_| usage(format!("bad coordinate {y:?}")))?,
    );
    if !p.is_finite() {
        return Err(usage(format!("--at must be finite, got {s:?}")));
    }
    Ok(p)
}

/// The cone point named by `--from`, if any.
fn cone_arg(args: &PointArgs) -> Result<Option<ConeId>> {
    match &args.from {
        Some(id) if id != "root" => {
            Ok(Some(id.parse::<ConeId>().map_err(|_| usage(format!("bad cone point id {id:?}")))?))
        }
        _ => Ok(None),
    }
}

/// Resolves the viewpoint. Without `--from` or `--at` it is the origin of a
/// plane's root chart, or the centre of square 0 of a square-tiled surface.
fn locate(args: &PointArgs, s: &dyn SurfaceProvider, cone: &Option<ConeId>) -> Result<LocatedPoint, ExploreError> {
    if let Some(id) = cone {
        return LocatedPoint::cone(s, id);
    }
    let chart = match &args.chart {
        Some(c) => c.parse::<ChartId>().map_err(|_| ExploreError::BadStart(format!("bad chart id {c:?}")))?,
        None => s.root_chart(),
    };
    let pos = match &args.at {
        Some(a) => parse_point(a).map_err(|e| ExploreError::BadStart(e.to_string()))?,
        None => match s.chart_domain(&chart)? {
            transplane_core::flat_complex::Domain::Square { side } => Vec2::new(0.5 * side, 0.5 * side),
            transplane_core::flat_complex::Domain::Plane => Vec2::zero(),
        },
    };
    Ok(LocatedPoint::regular(chart, pos))
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    format_version: u32,
    config: &'a Command,
    #[serde(flatten)]
    result: T,
}

fn write_output(cmd: &Command, text: &str) -> Result<()> {
    match cmd.out() {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit<T: Serialize>(cmd: &Command, result: T) -> Result<()> {
    let env = Envelope { format_version: FORMAT_VERSION, config: cmd, result };
    let mut text = serde_json::to_string_pretty(&env)?;
    text.push('\n');
    write_output(cmd, &text)
}

#[derive(Serialize)]
struct Sighted {
    id: ConeId,
    holonomy: Vec2,
    distance: f64,
}

#[derive(Serialize)]
struct InBall {
    id: ConeId,
    distance: f64,
}

fn build(action: &StsAction) -> Result<SquareTiledSurface> {
    let (s, scale) = match action {
        StsAction::Build { n, hperm, vperm, scale, .. } => {
            let h = parse_cycles(hperm, *n).map_err(|e| usage(format!("--hperm: {e}")))?;
            let v = parse_cycles(vperm, *n).map_err(|e| usage(format!("--vperm: {e}")))?;
            (build_sts(h, v).map_err(|e| usage(e.to_string()))?, *scale)
        }
        StsAction::Random { n, seed, scale, .. } => {
            eprintln!(
                "note: uniformly random permutation pairs are illustrative only; their law is not the Masur-Veech measure"
            );
            (random_sts(*seed, *n)?, *scale)
        }
    };
    Ok(if scale == 1.0 { s } else { rescale(&s, scale)? })
}

/// Runs a parsed command.
pub fn run(cmd: &Command) -> Result<()> {
    cmd.validate()?;
    match cmd {
        Command::Sample(a) => {
            let plane = sample_plane(a.seed, a.lambda, a.radius)?;
            emit(cmd, serde_json::json!({ "plane": plane.to_document() }))
        }
        Command::Visible(a) => {
            let mut surface = load_surface(&a.surface, a.radius)?;
            let cone = cone_arg(&a.point)?;
            let (p, sightings) = surface.explore(|s| {
                let p = locate(&a.point, s, &cone)?;
                let v = visible_singularities(s, &p, a.radius)?;
                Ok((p, v))
            })?;
            let list: Vec<Sighted> = sightings
                .into_iter()
                .map(|s| Sighted { id: s.id, holonomy: s.holonomy, distance: s.distance })
                .collect();
            emit(cmd, serde_json::json!({ "viewpoint": p, "count": list.len(), "visible": list }))
        }
        Command::Ball(a) => {
            let mut surface = load_surface(&a.surface, a.radius)?;
            let cone = cone_arg(&a.point)?;
            let (p, ball, area) = surface.explore(|s| {
                let p = locate(&a.point, s, &cone)?;
                let ball = metric_ball_singularities(s, &p, a.radius)?;
                let area = ball_area(s, &p, a.radius, a.samples)?;
                Ok((p, ball, area))
            })?;
            let list: Vec<InBall> = ball.into_iter().map(|(id, distance)| InBall { id, distance }).collect();
            emit(cmd, serde_json::json!({ "viewpoint": p, "singularities": list, "area": area }))
        }
        Command::Mc(a) => {
            let report = match a.experiment {
                Experiment::VisibleCount => {
                    let from = match a.from {
                        From::Regular => Viewpoint::Regular,
                        From::Singularity => Viewpoint::Singularity,
                    };
                    mc_visible_count(a.lambda, a.radius, from, a.trials, a.seed)?
                }
                Experiment::NearestDistance => {
                    if a.from != From::Regular {
                        return Err(usage("nearest-distance runs from the root only"));
                    }
                    mc_nearest_distance(a.lambda, a.radius, a.trials, a.seed)?
                }
            };
            match a.format {
                Format::Json => emit(cmd, serde_json::json!({ "report": report })),
                Format::Csv => write_output(cmd, &report.histogram_csv()),
            }
        }
        Command::Sts { action } => {
            let s = build(action)?;
            emit(cmd, serde_json::json!({ "surface": s.summary() }))
        }
        Command::Injrad(a) => {
            let s = load_sts(&a.sts)?;
            let p = locate(&a.point, &s, &cone_arg(&a.point)?)?;
            let r = injectivity_radius(&s, &p, a.r_max)?;
            emit(cmd, serde_json::json!({ "viewpoint": p, "r_max": a.r_max, "injectivity_radius": r }))
        }
        Command::Render(a) => {
            let mut surface = load_surface(&a.surface, a.radius)?;
            let cone = cone_arg(&a.point)?;
            let (atlas, origin) = surface.explore(|s| {
                let p = locate(&a.point, s, &cone)?;
                let atlas = visible_atlas(s, &p, a.radius)?;
                let origin = developed(s, &p).unwrap_or(p.pos);
                Ok((atlas, origin))
            })?;
            let opts = RenderOptions { stroke_scale: a.stroke_scale, color_by_depth: !a.no_depth_color };
            let config = serde_json::to_string(cmd)?.replace("--", "- -");
            let svg = format!("<!-- transplane format_version {FORMAT_VERSION} config {config} -->\n{}", render_svg(&atlas, origin, &opts));
            write_output(cmd, &svg)
        }
    }
}

/// Exit code for a failed run: 2 for geometric or sampling-budget failures,
/// 1 for everything else.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 1;
        }
        if cause.downcast_ref::<ExploreError>().is_some() || cause.downcast_ref::<SurfaceError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<StatsError>() {
            return match e {
                StatsError::Explore { .. } | StatsError::Plane { .. } => 2,
                _ => 1,
            };
        }
        if let Some(e) = cause.downcast_ref::<PlaneError>() {
            return match e {
                PlaneError::BudgetOverflow { .. } | PlaneError::DegeneratePlant(_) => 2,
                _ => 1,
            };
        }
        if cause.downcast_ref::<StsError>().is_some() {
            return 1;
        }
    }
    1
}

/// Parses `args`, runs, reports errors on stderr and returns the exit code.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = exit_code(&e);
            if code == 1 {
                eprintln!("run `transplane {} --help` for usage", subcommand_name(&cli.command));
            }
            code
        }
    }
}

fn subcommand_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Sample(_) => "sample",
        Command::Visible(_) => "visible",
        Command::Ball(_) => "ball",
        Command::Mc(_) => "mc",
        Command::Sts { .. } => "sts",
        Command::Injrad(_) => "injrad",
        Command::Render(_) => "render",
    }
}
