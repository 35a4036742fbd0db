//! Command-line front end: `synth`, `recover`, `eval` and `bench`.
//!
//! Commands return a [`CommandOutcome`] instead of printing, so they can be
//! driven from tests. Exit codes: 0 success, 1 usage error, 2 data or format
//! error, 3 numerical failure.
//!
//! Option precedence for `recover`: command-line flag, then the
//! `LAYERSEP_WORKERS` environment variable (workers only), then the config
//! file, then built-in defaults.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Error;
use crate::esra::{esra_solve, EsraParams, SolveTrace};
use crate::grid::{Image, LayerVector};
use crate::io::{
    read_gradient_file, read_pgm, read_run_config, write_gradient_file, write_pgm,
    write_trace_csv, RunConfig,
};
use crate::mixing::{apply_mixing, lipschitz_f, ProblemInstance};
use crate::synth::{exact_targets, random_instance};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const TRANSMITTED_NAME: &str = "transmitted.pgm";
pub const MANIFEST_NAME: &str = "manifest.cfg";

pub fn reflection_name(i: usize) -> String {
    format!("reflection_{i}.pgm")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Lib(e) => match e.root() {
                Error::Numerical { .. } => EXIT_NUMERICAL,
                Error::Config { .. } => EXIT_USAGE,
                _ => EXIT_DATA,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(msg) => msg.clone(),
            Failure::Lib(e) => e.to_string(),
        }
    }
}

type CmdResult = Result<String, Failure>;

#[derive(Debug, Parser)]
#[command(
    name = "layersep",
    version,
    about = "Recover transparent layers from aligned superimposed mixtures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build mixtures and exact gradient targets from ground-truth layers.
    Synth(SynthArgs),
    /// Recover the layers described by a run configuration.
    Recover(RecoverArgs),
    /// Compare recovered layers with ground truth (RMSE and PSNR as CSV).
    Eval(EvalArgs),
    /// Time a synthetic solve and compare against a single worker.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Ground-truth layers: the transmitted layer first, then one
    /// reflection per mixture.
    #[arg(long, num_args = 1.., required = true)]
    truth: Vec<PathBuf>,
    /// Mixing coefficients a_i1, comma separated.
    #[arg(long)]
    coeffs: String,
    #[arg(long)]
    out: PathBuf,
    /// Standard deviation of zero-mean Gaussian noise added to mixtures.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Penalty weight written into the manifest. 0.05 is an arbitrary
    /// starting point, not a tuned value.
    #[arg(long, default_value_t = 0.05)]
    lambda: f64,
}

#[derive(Debug, Args)]
struct RecoverArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    coeffs: Option<String>,
    /// Outer iterations.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    fgp_iters: Option<usize>,
    #[arg(long)]
    fgp_tol: Option<f64>,
    /// L_s as a multiple of L(f); at least 1.
    #[arg(long)]
    step_mult: Option<f64>,
    #[arg(long, env = "LAYERSEP_WORKERS")]
    workers: Option<usize>,
    #[arg(long)]
    warm_start: bool,
    /// Write the per-iteration trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Double reflection intensities (clamped) before writing.
    #[arg(long)]
    enhance_reflections: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    recovered: PathBuf,
    truth: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 256)]
    size: usize,
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    #[arg(long, default_value_t = 3)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Parses `args` (program name first) and runs the selected command.
pub fn run<I, T>(args: I) -> CommandOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                CommandOutcome {
                    exit_code: EXIT_USAGE,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                CommandOutcome {
                    exit_code: EXIT_OK,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    let mut diagnostics = String::new();
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(&a, &mut diagnostics),
        Command::Recover(a) => cmd_recover(&a, &mut diagnostics),
        Command::Eval(a) => cmd_eval(&a.recovered, &a.truth),
        Command::Bench(a) => cmd_bench(&a),
    };
    match result {
        Ok(stdout) => CommandOutcome {
            exit_code: EXIT_OK,
            stdout,
            stderr: diagnostics,
        },
        Err(f) => {
            let _ = writeln!(diagnostics, "error: {}", f.message());
            CommandOutcome {
                exit_code: f.exit_code(),
                stdout: String::new(),
                stderr: diagnostics,
            }
        }
    }
}

fn parse_coeffs(text: &str) -> Result<Vec<f64>, Failure> {
    let coeffs = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Failure::Usage(format!("bad coefficient {s:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if coeffs.is_empty() {
        return Err(Failure::Usage("at least one coefficient is required".into()));
    }
    Ok(coeffs)
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| Failure::Lib(Error::io(path, e)))
}

fn cmd_synth(args: &SynthArgs, diagnostics: &mut String) -> CmdResult {
    let coeffs = parse_coeffs(&args.coeffs)?;
    if args.truth.len() != coeffs.len() + 1 {
        return Err(Failure::Usage(format!(
            "{} coefficients need {} truth layers, got {}",
            coeffs.len(),
            coeffs.len() + 1,
            args.truth.len()
        )));
    }
    if let Some(sigma) = args.noise {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Failure::Usage(format!("noise must be nonnegative, got {sigma}")));
        }
    }
    if !(args.lambda >= 0.0 && args.lambda.is_finite()) {
        return Err(Failure::Usage(format!(
            "lambda must be nonnegative, got {}",
            args.lambda
        )));
    }
    let layers = args
        .truth
        .iter()
        .map(read_pgm)
        .collect::<Result<Vec<_>, _>>()?;
    let truth = LayerVector::new(layers)?;
    let mut mixtures = apply_mixing(&truth, &coeffs)?;

    if let Some(sigma) = args.noise.filter(|&s| s > 0.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let normal = Normal::new(0.0, sigma).expect("validated sigma");
        for mix in &mut mixtures {
            for v in mix.as_mut_slice() {
                *v += normal.sample(&mut rng);
            }
        }
    }
    let total: usize = mixtures.iter().map(Image::len).sum();
    let clipped: usize = mixtures
        .iter()
        .flat_map(|m| m.as_slice())
        .filter(|v| !(0.0..=1.0).contains(*v))
        .count();
    if clipped > 0 {
        let _ = writeln!(
            diagnostics,
            "warning: clipped {clipped} of {total} mixture pixels ({:.4}%) to [0,1]",
            100.0 * clipped as f64 / total as f64
        );
    }
    let mixtures: Vec<Image> = mixtures.iter().map(|m| m.map(|v| v.clamp(0.0, 1.0))).collect();

    let out = &args.out;
    create_dir(out)?;
    create_dir(&out.join("truth"))?;
    let mut mixture_names = Vec::new();
    for (i, mix) in mixtures.iter().enumerate() {
        let name = format!("mixture_{}.pgm", i + 1);
        write_pgm(out.join(&name), mix, 255)?;
        mixture_names.push(PathBuf::from(name));
    }
    let mut target_names = Vec::new();
    for (i, target) in exact_targets(truth.layers()).iter().enumerate() {
        let name = format!("target_{}.esrag", i + 1);
        write_gradient_file(out.join(&name), target)?;
        target_names.push(PathBuf::from(name));
    }
    write_layers(&out.join("truth"), &truth, false)?;

    let manifest = RunConfig {
        lambda: args.lambda,
        coeffs: coeffs.clone(),
        total_iters: crate::esra::DEFAULT_OUTER_ITERS,
        fgp_iters: crate::fgp::DEFAULT_FGP_ITERS,
        fgp_tol: crate::fgp::DEFAULT_FGP_TOL,
        step_multiplier: crate::esra::DEFAULT_STEP_MULTIPLIER,
        warm_start: false,
        workers: None,
        mixtures: mixture_names,
        targets: target_names,
        out: PathBuf::from("recovered"),
        trace: None,
    };
    let manifest_path = out.join(MANIFEST_NAME);
    fs::write(&manifest_path, manifest.to_text())
        .map_err(|e| Failure::Lib(Error::io(&manifest_path, e)))?;

    Ok(format!(
        "wrote {} mixtures, {} gradient targets and {} to {}\n",
        mixtures.len(),
        truth.count(),
        MANIFEST_NAME,
        out.display()
    ))
}

/// Writes `transmitted.pgm` and `reflection_i.pgm`. With `enhance`,
/// reflections are doubled and clamped to `[0,1]` first.
pub fn write_layers(
    dir: &Path,
    layers: &LayerVector,
    enhance: bool,
) -> crate::error::Result<Vec<PathBuf>> {
    let mut written = Vec::with_capacity(layers.count());
    for (i, layer) in layers.layers().iter().enumerate() {
        let (path, image) = if i == 0 {
            (dir.join(TRANSMITTED_NAME), layer.clone())
        } else if enhance {
            (
                dir.join(reflection_name(i)),
                layer.map(|v| (2.0 * v).clamp(0.0, 1.0)),
            )
        } else {
            (dir.join(reflection_name(i)), layer.clone())
        };
        write_pgm(&path, &image, 255)?;
        written.push(path);
    }
    Ok(written)
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn apply_overrides(config: &mut RunConfig, args: &RecoverArgs) -> Result<(), Failure> {
    if let Some(lambda) = args.lambda {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Failure::Usage(format!("lambda must be nonnegative, got {lambda}")));
        }
        config.lambda = lambda;
    }
    if let Some(text) = &args.coeffs {
        let coeffs = parse_coeffs(text)?;
        if coeffs.len() != config.mixtures.len() {
            return Err(Failure::Usage(format!(
                "{} coefficients for {} mixtures",
                coeffs.len(),
                config.mixtures.len()
            )));
        }
        config.coeffs = coeffs;
    }
    if let Some(n) = args.iters {
        if n == 0 {
            return Err(Failure::Usage("--iters must be positive".into()));
        }
        config.total_iters = n;
    }
    if let Some(n) = args.fgp_iters {
        if n == 0 {
            return Err(Failure::Usage("--fgp-iters must be positive".into()));
        }
        config.fgp_iters = n;
    }
    if let Some(tol) = args.fgp_tol {
        if !(tol >= 0.0) {
            return Err(Failure::Usage("--fgp-tol must be nonnegative".into()));
        }
        config.fgp_tol = tol;
    }
    if let Some(mult) = args.step_mult {
        if !(mult >= 1.0 && mult.is_finite()) {
            return Err(Failure::Usage("--step-mult must be at least 1".into()));
        }
        config.step_multiplier = mult;
    }
    if let Some(w) = args.workers {
        if w == 0 {
            return Err(Failure::Usage("--workers must be positive".into()));
        }
        config.workers = Some(w);
    }
    if args.warm_start {
        config.warm_start = true;
    }
    Ok(())
}

/// Loads the instance a config describes, resolving relative paths against
/// `base`.
pub fn load_instance(config: &RunConfig, base: &Path) -> crate::error::Result<ProblemInstance> {
    let mixtures = config
        .mixtures
        .iter()
        .map(|p| read_pgm(resolve(base, p)))
        .collect::<Result<Vec<_>, _>>()?;
    let targets = config
        .targets
        .iter()
        .map(|p| read_gradient_file(resolve(base, p)))
        .collect::<Result<Vec<_>, _>>()?;
    ProblemInstance::new(mixtures, config.coeffs.clone(), targets, config.lambda)
}

pub fn esra_params(config: &RunConfig) -> EsraParams {
    EsraParams {
        total_iters: config.total_iters,
        step_constant: Some(config.step_multiplier * lipschitz_f(&config.coeffs)),
        fgp_iters: config.fgp_iters,
        fgp_tol: config.fgp_tol,
        warm_start: config.warm_start,
        workers: config.workers,
        init: None,
    }
}

fn cmd_recover(args: &RecoverArgs, _diagnostics: &mut String) -> CmdResult {
    let mut config = read_run_config(&args.config)?;
    apply_overrides(&mut config, args)?;
    let base = args
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();

    let inst = load_instance(&config, &base)?;
    let params = esra_params(&config);
    let (layers, trace) = esra_solve(&inst, &params)?;

    let out_dir = match &args.out {
        Some(p) => p.clone(),
        None => resolve(&base, &config.out),
    };
    create_dir(&out_dir)?;
    let written = write_layers(&out_dir, &layers, args.enhance_reflections)?;

    let trace_path = match &args.trace {
        Some(p) => Some(p.clone()),
        None => config.trace.as_ref().map(|p| resolve(&base, p)),
    };
    if let Some(path) = &trace_path {
        write_trace_csv(path, &trace)?;
    }

    let last = trace.records.last().expect("at least one iteration");
    let mut summary = format!(
        "recovered {} layers in {} iterations; objective {:.6e} (smooth {:.6e}, tv {:.6e})\n",
        layers.count(),
        trace.len(),
        last.objective.total,
        last.objective.smooth,
        last.objective.tv
    );
    for path in &written {
        let _ = writeln!(summary, "wrote {}", path.display());
    }
    if let Some(path) = trace_path {
        let _ = writeln!(summary, "trace {}", path.display());
    }
    Ok(summary)
}

pub fn rmse(a: &Image, b: &Image) -> f64 {
    (a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64)
        .sqrt()
}

/// PSNR in dB for peak 1.0; infinite when the images match.
pub fn psnr(rmse: f64) -> f64 {
    if rmse == 0.0 {
        f64::INFINITY
    } else {
        -20.0 * rmse.log10()
    }
}

fn layer_names(dir: &Path) -> Vec<String> {
    let mut names = vec![TRANSMITTED_NAME.to_string()];
    let mut i = 1;
    while dir.join(reflection_name(i)).is_file() {
        names.push(reflection_name(i));
        i += 1;
    }
    names
}

fn cmd_eval(recovered: &Path, truth: &Path) -> CmdResult {
    let names = layer_names(recovered);
    let truth_names = layer_names(truth);
    if names.len() != truth_names.len() {
        return Err(Failure::Lib(Error::Shape(format!(
            "{} has {} layers but {} has {}",
            recovered.display(),
            names.len(),
            truth.display(),
            truth_names.len()
        ))));
    }
    let mut out = String::from("layer,rmse,psnr_db\n");
    for name in names {
        let a = read_pgm(recovered.join(&name))?;
        let b = read_pgm(truth.join(&name))?;
        a.check_dims(&b, &format!("layer {name}"))?;
        let e = rmse(&a, &b);
        let p = psnr(e);
        let p = if p.is_infinite() {
            "inf".to_string()
        } else {
            format!("{p:.16e}")
        };
        let stem = name.trim_end_matches(".pgm");
        let _ = writeln!(out, "{stem},{e:.16e},{p}");
    }
    Ok(out)
}

fn cmd_bench(args: &BenchArgs) -> CmdResult {
    if args.size == 0 || args.m == 0 || args.iters == 0 || args.workers == 0 {
        return Err(Failure::Usage("bench parameters must be positive".into()));
    }
    let (inst, _) = random_instance(args.size, args.size, args.m, 0.05, args.seed)?;
    let timed = |workers: usize| -> Result<(f64, SolveTrace), Failure> {
        let params = EsraParams {
            total_iters: args.iters,
            workers: Some(workers),
            ..EsraParams::default()
        };
        let start = Instant::now();
        let (_, trace) = esra_solve(&inst, &params)?;
        Ok((start.elapsed().as_secs_f64() * 1e3, trace))
    };
    let (serial_ms, serial) = timed(1)?;
    let (parallel_ms, parallel) = timed(args.workers)?;
    let identical = serial.objectives() == parallel.objectives();
    if !identical {
        return Err(Failure::Lib(Error::Numerical {
            iter: 0,
            msg: "objective traces differ between worker counts".into(),
        }));
    }
    let per_iter = |ms: f64| ms / args.iters as f64;
    let mut out = String::from("workers,total_ms,ms_per_iter\n");
    let _ = writeln!(out, "1,{serial_ms:.3},{:.3}", per_iter(serial_ms));
    let _ = writeln!(
        out,
        "{},{parallel_ms:.3},{:.3}",
        args.workers,
        per_iter(parallel_ms)
    );
    let _ = writeln!(out, "speedup,{:.3}", serial_ms / parallel_ms);
    let _ = writeln!(out, "traces_identical,{identical}");
    Ok(out)
}
