//! `polyscene` command line.
//!
//! Exit codes: 0 success, 1 invalid input, 2 generation exhausted, 3 I/O.
//! Settings come from flags, then `POLYSCENE_DATA` (data directory only),
//! then an optional TOML file given with `--config`, then defaults.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use polyscene_core::dataset::{
    import_obj, package_dataset, run_dataset_job, DatasetError, DatasetJob, ObjError,
};
use polyscene_core::geom::RngStream;
use polyscene_core::render::{sample_camera_pose, CameraIntrinsics, LightingMode, CAMERA_RADIUS};
use polyscene_core::scenegen::{
    calibrate, generate_scene, CalibrationSweep, Layout, Scene, SceneError, UserParams, DEFAULT_MAX_ATTEMPTS,
};
use polyscene_service::{RegistryError, RenderService, SceneRegistry, ServiceConfig, DATA_ENV, DEFAULT_PORT};
use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_EXHAUSTED: i32 = 2;
pub const EXIT_IO: i32 = 3;

const DEFAULT_DATA_DIR: &str = "polyscene-data";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Exhausted(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Exhausted(_) => EXIT_EXHAUSTED,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<SceneError> for CliError {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::GenerationExhausted { .. } => CliError::Exhausted(e.to_string()),
            SceneError::InvalidParams(_) | SceneError::Unsatisfiable { .. } => CliError::Invalid(e.to_string()),
            other => CliError::Exhausted(other.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::NoViews => CliError::Invalid(e.to_string()),
            other => CliError::Io(other.to_string()),
        }
    }
}

impl From<RegistryError> for CliError {
    fn from(e: RegistryError) -> Self {
        match e {
            RegistryError::InvalidId(_) => CliError::Invalid(e.to_string()),
            other => CliError::Io(other.to_string()),
        }
    }
}

impl From<ObjError> for CliError {
    fn from(e: ObjError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "polyscene", version, about = "Random polyhedral scenes, renderings and datasets")]
pub struct Cli {
    /// TOML file with default settings; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Scene registry directory.
    #[arg(long, global = true, env = DATA_ENV)]
    pub data_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a scene, write its OBJ and register it.
    Generate(GenerateArgs),
    /// Generate a scene (or use a registered one) and build a dataset archive.
    Dataset(DatasetArgs),
    /// Render one view of a registered scene.
    View(ViewArgs),
    /// Register a scene from an OBJ file.
    Import(ImportArgs),
    /// Start the render API.
    Serve(ServeArgs),
    /// Rebuild the object-count calibration table.
    Calibrate(CalibrateArgs),
}

#[derive(Debug, Args, Default)]
pub struct SceneArgs {
    /// Number of objects (>= 1).
    #[arg(long)]
    pub objects: Option<usize>,
    /// separate, touching or intersecting.
    #[arg(long)]
    pub layout: Option<String>,
    /// fixed or homogeneous.
    #[arg(long)]
    pub lighting: Option<String>,
    /// Number of views (>= 1).
    #[arg(long)]
    pub views: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_attempts: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// OBJ output path; defaults to `<id>.obj`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Use this registered scene instead of generating one.
    #[arg(long)]
    pub id: Option<String>,
    /// Output directory; defaults to `dataset-<id>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Archive path; defaults to the output directory with `.zip` appended.
    #[arg(long)]
    pub archive: Option<PathBuf>,
    /// Image size as WIDTHxHEIGHT.
    #[arg(long)]
    pub resolution: Option<String>,
}

#[derive(Debug, Args)]
pub struct ViewArgs {
    #[arg(long)]
    pub id: String,
    /// Random camera on the radius-5 sphere.
    #[arg(long, conflicts_with = "camera")]
    pub random: bool,
    /// Camera pose "x,y,z,qw,qx,qy,qz".
    #[arg(long, allow_hyphen_values = true)]
    pub camera: Option<String>,
    #[arg(long)]
    pub lighting: Option<String>,
    /// Seed for the random camera.
    #[arg(long)]
    pub seed: Option<u64>,
    /// PNG output path; defaults to `<id>_view.png`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub resolution: Option<String>,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    pub path: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub host: Option<String>,
    /// Report success as "200".
    #[arg(long)]
    pub compat_200: bool,
    #[arg(long)]
    pub resolution: Option<String>,
    /// Per-request render timeout in seconds.
    #[arg(long)]
    pub timeout: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 20)]
    pub max_objects: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Table output path.
    #[arg(long, default_value = "calibration.json")]
    pub out: PathBuf,
    /// Optional path for the full grid of object-count histograms.
    #[arg(long)]
    pub grid: Option<PathBuf>,
}

/// Keys accepted in the `--config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub data_dir: Option<PathBuf>,
    pub objects: Option<usize>,
    pub layout: Option<String>,
    pub lighting: Option<String>,
    pub views: Option<usize>,
    pub seed: Option<u64>,
    pub max_attempts: Option<usize>,
    pub resolution: Option<String>,
    pub port: Option<u16>,
    pub host: Option<String>,
    pub compat_200: Option<bool>,
    pub timeout: Option<u64>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(io(path))?;
        toml::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
    }
}

pub fn parse_resolution(s: &str) -> Result<CameraIntrinsics, CliError> {
    let bad = || CliError::Invalid(format!("resolution must look like 1920x1080, got {s:?}"));
    let (w, h) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
    let (w, h): (u32, u32) = (w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?);
    if w == 0 || h == 0 || w > 16384 || h > 16384 {
        return Err(bad());
    }
    Ok(CameraIntrinsics::with_resolution(w, h))
}

pub fn parse_camera(s: &str) -> Result<[f64; 7], CliError> {
    let values: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<_>>()
        .ok_or_else(|| CliError::Invalid(format!("camera must be 7 comma-separated numbers, got {s:?}")))?;
    values
        .try_into()
        .map_err(|v: Vec<f64>| CliError::Invalid(format!("camera needs 7 numbers, got {}", v.len())))
}

fn parse_lighting(s: Option<&str>) -> Result<LightingMode, CliError> {
    s.map_or(Ok(LightingMode::FixedSpotlight), |s| s.parse().map_err(|e: polyscene_core::render::UnknownLighting| CliError::Invalid(e.to_string())))
}

struct Ctx<'a> {
    config: ConfigFile,
    data_dir: PathBuf,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn registry(&self) -> Result<SceneRegistry, CliError> {
        Ok(SceneRegistry::open(&self.data_dir)?)
    }

    fn print(&mut self, value: serde_json::Value) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(&value).expect("json");
        writeln!(self.out, "{text}").map_err(|e| CliError::Io(format!("stdout: {e}")))
    }

    fn resolution(&self, flag: Option<&str>) -> Result<CameraIntrinsics, CliError> {
        match flag.or(self.config.resolution.as_deref()) {
            Some(r) => parse_resolution(r),
            None => Ok(CameraIntrinsics::default()),
        }
    }

    fn user_params(&self, a: &SceneArgs) -> Result<(UserParams, u64, usize), CliError> {
        let c = &self.config;
        let objects = a.objects.or(c.objects).unwrap_or(1);
        let layout: Layout = a.layout.as_deref().or(c.layout.as_deref()).unwrap_or("separate").parse()?;
        let lighting = parse_lighting(a.lighting.as_deref().or(c.lighting.as_deref()))?;
        let views = a.views.or(c.views).unwrap_or(1);
        let seed = a.seed.or(c.seed).unwrap_or_else(rand::random);
        let max_attempts = a.max_attempts.or(c.max_attempts).unwrap_or(DEFAULT_MAX_ATTEMPTS);
        if max_attempts == 0 {
            return Err(CliError::Invalid("max_attempts must be >= 1".into()));
        }
        Ok((UserParams::new(objects, layout, lighting, views)?, seed, max_attempts))
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_cli<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match run(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let data_dir = cli.data_dir.or_else(|| config.data_dir.clone()).unwrap_or_else(|| DEFAULT_DATA_DIR.into());
    let mut ctx = Ctx { config, data_dir, out, err };
    match cli.command {
        Command::Generate(a) => cmd_generate(&mut ctx, a),
        Command::Dataset(a) => cmd_dataset(&mut ctx, a),
        Command::View(a) => cmd_view(&mut ctx, a),
        Command::Import(a) => cmd_import(&mut ctx, a),
        Command::Serve(a) => cmd_serve(&mut ctx, a),
        Command::Calibrate(a) => cmd_calibrate(&mut ctx, a),
    }
}

fn generated(ctx: &Ctx, a: &SceneArgs) -> Result<(Scene, u64), CliError> {
    let (user, seed, max_attempts) = ctx.user_params(a)?;
    Ok((generate_scene(&user, seed, max_attempts)?, seed))
}

fn cmd_generate(ctx: &mut Ctx, a: GenerateArgs) -> Result<(), CliError> {
    let (scene, seed) = generated(ctx, &a.scene)?;
    let path = a.out.unwrap_or_else(|| PathBuf::from(format!("{}.obj", scene.id)));
    fs::write(&path, polyscene_core::dataset::export_obj(&scene)).map_err(io(&path))?;
    let id = ctx.registry()?.publish(&scene)?;
    let attempts = match &scene.source {
        polyscene_core::scenegen::SceneSource::Generated { attempts, .. } => *attempts,
        _ => 0,
    };
    ctx.print(json!({
        "id": id,
        "obj": path,
        "objects": scene.objects.len(),
        "seed": seed,
        "attempts": attempts,
    }))
}

fn cmd_dataset(ctx: &mut Ctx, a: DatasetArgs) -> Result<(), CliError> {
    let registry = ctx.registry()?;
    let (scene, seed) = match &a.id {
        Some(id) => {
            let scene = registry.get(id)?.ok_or_else(|| CliError::Invalid(format!("unknown id {id}")))?;
            let seed = a.scene.seed.or(ctx.config.seed).unwrap_or_else(rand::random);
            ((*scene).clone(), seed)
        }
        None => generated(ctx, &a.scene)?,
    };
    let (user, _, _) = ctx.user_params(&a.scene)?;
    let intrinsics = ctx.resolution(a.resolution.as_deref())?;
    let dir = a.out.unwrap_or_else(|| PathBuf::from(format!("dataset-{}", scene.id)));
    let archive = a.archive.unwrap_or_else(|| {
        let mut s = dir.clone().into_os_string();
        s.push(".zip");
        PathBuf::from(s)
    });
    let job = DatasetJob {
        scene,
        num_views: user.num_views,
        lighting: user.lighting,
        seed,
        output_dir: dir.clone(),
        intrinsics,
    };
    let manifest = run_dataset_job(&job)?;
    package_dataset(&dir, &archive)?;
    registry.publish(&job.scene)?;
    for f in &manifest.failures {
        let _ = writeln!(ctx.err, "warning: view {} failed: {}", f.view_index, f.reason);
    }
    ctx.print(json!({
        "id": manifest.scene_id,
        "dir": dir,
        "archive": archive,
        "seed": seed,
        "views": manifest.views.len(),
        "failures": manifest.failures.len(),
    }))
}

fn cmd_view(ctx: &mut Ctx, a: ViewArgs) -> Result<(), CliError> {
    let lighting = parse_lighting(a.lighting.as_deref().or(ctx.config.lighting.as_deref()))?;
    let camera = match (&a.camera, a.random) {
        (Some(c), _) => parse_camera(c)?,
        (None, true) => {
            let seed = a.seed.or(ctx.config.seed).unwrap_or_else(rand::random);
            let pose = sample_camera_pose(&mut RngStream::new(seed), CAMERA_RADIUS)
                .map_err(|e| CliError::Invalid(e.to_string()))?;
            pose.to_array()
        }
        (None, false) => return Err(CliError::Invalid("view needs --random or --camera".into())),
    };
    let config = ServiceConfig {
        intrinsics: ctx.resolution(a.resolution.as_deref())?,
        ..ServiceConfig::new(ctx.data_dir.clone())
    };
    let service = RenderService::open(config)?;
    let request = json!({ "id": a.id, "lighting": lighting.as_str(), "random": false, "camera": camera });
    let response = service.handle_render_request_blocking(&request.to_string());
    if response.status != "SUCCESS" {
        let status = response.status;
        return Err(if status.starts_with("INVALID") { CliError::Invalid(status) } else { CliError::Io(status) });
    }
    use base64::Engine as _;
    let png = base64::engine::general_purpose::STANDARD
        .decode(response.image.as_deref().unwrap_or_default())
        .map_err(|e| CliError::Io(e.to_string()))?;
    let path = a.out.unwrap_or_else(|| PathBuf::from(format!("{}_view.png", a.id)));
    fs::write(&path, png).map_err(io(&path))?;
    ctx.print(json!({ "status": "SUCCESS", "image": path, "cam_pose": response.cam_pose }))
}

fn cmd_import(ctx: &mut Ctx, a: ImportArgs) -> Result<(), CliError> {
    let bytes = fs::read(&a.path).map_err(io(&a.path))?;
    let name = a.path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let imported = import_obj(&bytes, &name)?;
    for w in &imported.warnings {
        let _ = writeln!(ctx.err, "warning: {w}");
    }
    let id = ctx.registry()?.register_scene(&imported.scene)?;
    ctx.print(json!({
        "id": id,
        "objects": imported.scene.objects.len(),
        "warnings": imported.warnings.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
    }))
}

fn cmd_serve(ctx: &mut Ctx, a: ServeArgs) -> Result<(), CliError> {
    let c = &ctx.config;
    let port = a.port.or(c.port).unwrap_or(DEFAULT_PORT);
    let host = a.host.clone().or_else(|| c.host.clone()).unwrap_or_else(|| "127.0.0.1".into());
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| CliError::Invalid(format!("bad address {host}:{port}: {e}")))?;
    let mut config = ServiceConfig {
        intrinsics: ctx.resolution(a.resolution.as_deref())?,
        compat_200: a.compat_200 || c.compat_200.unwrap_or(false),
        ..ServiceConfig::new(ctx.data_dir.clone())
    };
    if let Some(t) = a.timeout.or(c.timeout) {
        config.timeout = std::time::Duration::from_secs(t);
    }
    let service = Arc::new(RenderService::open(config)?);
    let _ = tracing_subscriber::fmt().with_writer(std::io::stderr).try_init();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
    let err = &mut ctx.err;
    runtime
        .block_on(polyscene_service::serve(service, addr, |bound| {
            let _ = writeln!(err, "listening on ws://{bound}/api/");
        }))
        .map_err(|e| CliError::Io(format!("{addr}: {e}")))
}

fn cmd_calibrate(ctx: &mut Ctx, a: CalibrateArgs) -> Result<(), CliError> {
    let defaults = CalibrationSweep::default();
    let sweep = CalibrationSweep {
        trials: a.trials,
        max_objects: a.max_objects,
        seed: a.seed.unwrap_or(defaults.seed),
        ..defaults
    };
    if sweep.trials == 0 || sweep.max_objects == 0 {
        return Err(CliError::Invalid("trials and max_objects must be >= 1".into()));
    }
    let (grid, table) = calibrate(&sweep)?;
    fs::write(&a.out, table.to_json()).map_err(io(&a.out))?;
    if let Some(g) = &a.grid {
        fs::write(g, serde_json::to_string(&grid).expect("grid serializes")).map_err(io(g))?;
    }
    ctx.print(json!({ "table": a.out, "entries": table.entries.len(), "grid_points": grid.len() }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_strings() {
        let i = parse_resolution("640x360").unwrap();
        assert_eq!((i.width, i.height), (640, 360));
        assert_eq!(parse_resolution(" 32X16 ").unwrap().width, 32);
        for bad in ["640", "0x10", "ax3", "640x", "99999x10"] {
            assert!(parse_resolution(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn camera_strings() {
        assert_eq!(parse_camera("0, 0, 5, 1, 0, 0, 0").unwrap(), [0.0, 0.0, 5.0, 1.0, 0.0, 0.0, 0.0]);
        assert!(parse_camera("0,0,5,1,0,0").is_err());
        assert!(parse_camera("0,0,5,1,0,0,nan").is_err());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let tmp = tempfile::NamedTempFile::new().unwrap();
        fs::write(tmp.path(), "objects = 3\nlayout = \"touching\"\n").unwrap();
        assert_eq!(ConfigFile::load(tmp.path()).unwrap().objects, Some(3));
        fs::write(tmp.path(), "colour = 1\n").unwrap();
        assert!(matches!(ConfigFile::load(tmp.path()), Err(CliError::Invalid(_))));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Invalid(String::new()).exit_code(), 1);
        assert_eq!(CliError::Exhausted(String::new()).exit_code(), 2);
        assert_eq!(CliError::Io(String::new()).exit_code(), 3);
    }
}
