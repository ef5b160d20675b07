//! Front end for the `dnckrr` binary: sweep, rate tables and spectral
//! diagnostics, each writing JSON/CSV artifacts with a hashed manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dnc_krr::dnc::{partition, xi_diagnostic};
use dnc_krr::rates::{prescribe, rho_max, RateFamily, Task};
use dnc_krr::simlab::{
    generate, run_sweep, write_csv, CellPlan, ESTIMATION_LAMBDA_SCALE, TESTING_LAMBDA_SCALE, ExperimentConfig, LambdaSource, Model, PathChoice, Sigma2Mode,
};
use dnc_krr::{Error as CoreError, Family, Points, Spectrum};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_EXPERIMENT: i32 = 3;


#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("experiment failed: {0}")]
    Experiment(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Experiment(_) | CliError::Io { .. } => EXIT_EXPERIMENT,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Parser)]
#[command(name = "dnckrr", version, about = "Divide-and-conquer kernel ridge regression experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replicated (N, rho) sweep; writes sweep.csv and manifest.json.
    Sweep(SweepArgs),
    /// Prescribed lambda, machine-count bound and rate.
    Rates(RatesArgs),
    /// Spectral checks and the xi diagnostic; writes diagnostics.json.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use the full replication counts (presets only).
    #[arg(long = "paper-scale")]
    pub full_scale: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Spline MSE panel: c = 1, estimation lambda.
    SplineFig1,
    /// Spline size panel: c = 0, testing lambda.
    SplineFig1Size,
    /// Spline power panel: c = 1, testing lambda.
    SplineFig1Power,
    /// Additive MSE panel: c = 1, estimation lambda.
    AdditiveFig2,
    AdditiveFig2Size,
    AdditiveFig2Power,
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 2)]
    pub m: u32,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long = "N")]
    pub n: u64,
    #[arg(long, value_enum, default_value = "estimation")]
    pub task: TaskArg,
    /// Print the row as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Spline,
    Additive,
    Gaussian,
    ThinPlate,
}

impl From<FamilyArg> for RateFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Spline => RateFamily::Spline,
            FamilyArg::Additive => RateFamily::Additive,
            FamilyArg::Gaussian => RateFamily::Gaussian,
            FamilyArg::ThinPlate => RateFamily::ThinPlate,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Estimation,
    Testing,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Estimation => Task::Estimation,
            TaskArg::Testing => Task::Testing,
        }
    }
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Configuration of `diagnose`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub spectrum: Family,
    /// Penalties for the effective-dimension ratio band.
    #[serde(default = "default_lambda_grid")]
    pub lambda_grid: Vec<f64>,
    /// Penalty for the truncation, tail sum and kernel bound checks.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_kernel_grid")]
    pub kernel_grid: usize,
    #[serde(default)]
    pub xi: Option<XiRequest>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XiRequest {
    #[serde(rename = "N")]
    pub n_total: usize,
    pub s: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_lambda_grid() -> Vec<f64> {
    vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
}

fn default_lambda() -> f64 {
    1e-4
}

fn default_kernel_grid() -> usize {
    256
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub command: String,
    pub config: serde_json::Value,
    /// Hash of the config echo together with the artifact version.
    pub config_hash: String,
    pub seed: u64,
    pub wall_time_secs: f64,
    pub mse_evaluation: String,
    pub outputs: Vec<OutputFile>,
}

pub fn preset_config(preset: Preset, full_scale: bool) -> ExperimentConfig {
    let spline = matches!(preset, Preset::SplineFig1 | Preset::SplineFig1Size | Preset::SplineFig1Power);
    let (c, task, desk_reps, full_reps) = match preset {
        Preset::SplineFig1 | Preset::AdditiveFig2 => (1.0, Task::Estimation, 50, 100),
        Preset::SplineFig1Size | Preset::AdditiveFig2Size => (0.0, Task::Testing, 500, 500),
        Preset::SplineFig1Power | Preset::AdditiveFig2Power => (1.0, Task::Testing, 200, 500),
    };
    let scale = match task {
        Task::Estimation => ESTIMATION_LAMBDA_SCALE,
        Task::Testing => TESTING_LAMBDA_SCALE,
    };
    ExperimentConfig {
        model: if spline { Model::Spline1d { c } } else { Model::Additive2d { c } },
        m: 2,
        n_list: (9..=13).map(|l| 1usize << l).collect(),
        rho_list: (1..=8).map(|k| k as f64 / 10.0).collect(),
        replications: if full_scale { full_reps } else { desk_reps },
        alpha: 0.05,
        lambda_source: LambdaSource::Rates { task, scale },
        sigma2_mode: Sigma2Mode::Known { value: 1.0 },
        base_seed: 0,
        solve_path: PathChoice::Auto,
        worker_count: None,
        grid_size: None,
        compute_xi: false,
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn write_output(dir: &Path, name: &str, bytes: &[u8]) -> Result<OutputFile, CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(io_err(&path))?;
    Ok(OutputFile { path: name.to_string(), sha256: sha256_hex(bytes) })
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(io_err(&path))
}

fn config_hash(config: &serde_json::Value) -> String {
    let mut bytes = serde_json::to_vec(config).expect("config serializes");
    bytes.extend_from_slice(env!("CARGO_PKG_VERSION").as_bytes());
    sha256_hex(&bytes)
}

/// Resolves the sweep config from a file or preset plus flag overrides.
pub fn sweep_config(args: &SweepArgs) -> Result<ExperimentConfig, CliError> {
    if args.full_scale && args.preset.is_none() {
        return Err(CliError::Config("--paper-scale applies to presets only".into()));
    }
    let mut cfg = match (&args.config, args.preset) {
        (Some(path), _) => read_json(path)?,
        (None, Some(p)) => preset_config(p, args.full_scale),
        (None, None) => return Err(CliError::Config("either --config or --preset is required".into())),
    };
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    if let Some(w) = args.workers {
        cfg.worker_count = Some(w);
    }
    cfg.validate().map_err(config_err)?;
    // construct every cell up front so spectrum and rate errors are config errors
    for &n in &cfg.n_list {
        for &rho in &cfg.rho_list {
            CellPlan::new(&cfg, n, rho).map_err(config_err)?;
        }
    }
    Ok(cfg)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let cfg = sweep_config(args)?;
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let result = run_sweep(&cfg).map_err(|e| CliError::Experiment(e.to_string()))?;
    let mut csv = Vec::new();
    write_csv(&result, &mut csv).expect("writing to memory cannot fail");
    let outputs = vec![write_output(&args.out, "sweep.csv", &csv)?];
    let config = serde_json::to_value(&cfg).expect("config serializes");
    let manifest = RunManifest {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        command: "sweep".into(),
        config_hash: config_hash(&config),
        config,
        seed: cfg.base_seed,
        wall_time_secs: start.elapsed().as_secs_f64(),
        mse_evaluation: format!("midpoint grid, {} points per axis", cfg.grid_size()),
        outputs,
    };
    write_manifest(&args.out, &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone, Serialize)]
pub struct RatesRow {
    pub family: RateFamily,
    pub task: Task,
    pub m: u32,
    pub d: usize,
    #[serde(rename = "N")]
    pub n_total: u64,
    pub lambda: f64,
    pub s_max: u64,
    pub rho_max: f64,
    pub rate: f64,
    pub lambda_exponent: f64,
    pub s_exponent: f64,
    pub rate_exponent: f64,
    pub warnings: Vec<String>,
}

pub fn rates_row(args: &RatesArgs) -> Result<RatesRow, CliError> {
    let family = RateFamily::from(args.family);
    let task = Task::from(args.task);
    let p = prescribe(family, args.m, args.d, args.n, task).map_err(config_err)?;
    let rho = rho_max(family, args.m, args.d, args.n, task).map_err(config_err)?;
    Ok(RatesRow {
        family,
        task,
        m: p.m,
        d: p.d,
        n_total: p.n_total,
        lambda: p.lambda,
        s_max: p.s_max,
        rho_max: rho,
        rate: p.rate,
        lambda_exponent: p.lambda_law.n_exp,
        s_exponent: p.s_law.n_exp,
        rate_exponent: p.rate_law.n_exp,
        warnings: p.warnings,
    })
}

pub fn format_rates_table(row: &RatesRow) -> String {
    format!(
        "lambda\ts_max\trho_max\trate\tlambda_exp\ts_exp\trate_exp\n{:.6e}\t{}\t{:.4}\t{:.6e}\t{:.4}\t{:.4}\t{:.4}\n",
        row.lambda, row.s_max, row.rho_max, row.rate, row.lambda_exponent, row.s_exponent, row.rate_exponent
    )
}

pub fn cmd_rates(args: &RatesArgs) -> Result<String, CliError> {
    let row = rates_row(args)?;
    let mut out = if args.json {
        serde_json::to_string(&row).expect("row serializes") + "\n"
    } else {
        format_rates_table(&row)
    };
    for w in &row.warnings {
        out.push_str(&format!("warning: {w}\n"));
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelBound {
    pub max_k_diag: f64,
    pub bound: f64,
    pub c_phi_sq: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct XiSummary {
    #[serde(rename = "N")]
    pub n_total: usize,
    pub s: usize,
    pub n: usize,
    pub truncation: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub family: Family,
    pub lambda: f64,
    pub truncation: usize,
    pub h_inv: f64,
    pub tail_sum_sup: f64,
    pub ratio_lambdas: Vec<f64>,
    pub effective_dimension_ratios: Vec<f64>,
    pub ratios_all_le_one: bool,
    pub ratio_band: f64,
    pub kernel_bound: Option<KernelBound>,
    pub eigenfunction_sup: Option<f64>,
    pub xi: Option<XiSummary>,
}

pub fn diagnostics(cfg: &DiagnoseConfig, workers: Option<usize>) -> Result<Diagnostics, CliError> {
    let spec = Spectrum::for_lambda(cfg.spectrum.clone(), cfg.lambda).map_err(config_err)?;
    if cfg.lambda_grid.is_empty() {
        return Err(CliError::Config("lambda_grid must be nonempty".into()));
    }
    let h_inv = spec.spectral_sums(cfg.lambda).map_err(config_err)?.h_inv;
    let ratios = spec.check_prop31_ratio(&cfg.lambda_grid).map_err(config_err)?;
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
    let grid = Points::midpoint_grid(spec.dim(), cfg.kernel_grid.max(1));
    let (kernel_bound, eigenfunction_sup) = if spec.supports_eigenfunctions() {
        let mut max_k = 0.0f64;
        for x in grid.iter() {
            max_k = max_k.max(spec.kernel_k(cfg.lambda, x, x).map_err(config_err)?);
        }
        let c_phi_sq = match spec.family() {
            Family::PeriodicSobolev { .. } | Family::Additive { .. } | Family::Explicit { .. } => 2.0,
            _ => {
                let sup = spec.eigenfunction_sup(&grid).map_err(config_err)?;
                sup * sup
            }
        };
        let bound = c_phi_sq * h_inv;
        let sup = spec.eigenfunction_sup(&grid).map_err(config_err)?;
        (Some(KernelBound { max_k_diag: max_k, bound, c_phi_sq, holds: max_k <= bound }), Some(sup))
    } else {
        (None, None)
    };
    let xi = match cfg.xi {
        None => None,
        Some(req) => {
            let model = match spec.dim() {
                1 => Model::Spline1d { c: 0.0 },
                2 => Model::Additive2d { c: 0.0 },
                d => return Err(CliError::Config(format!("xi diagnostic supports d <= 2 (got d = {d})"))),
            };
            let run = || -> Result<XiSummary, CoreError> {
                let data = generate(&model, req.n_total, req.seed);
                let part = partition(&data, req.s, req.seed)?;
                let mut xi = xi_diagnostic(&spec, &part, &data, cfg.lambda)?;
                xi.sort_by(f64::total_cmp);
                let median = if xi.len() % 2 == 1 {
                    xi[xi.len() / 2]
                } else {
                    0.5 * (xi[xi.len() / 2 - 1] + xi[xi.len() / 2])
                };
                Ok(XiSummary {
                    n_total: req.n_total,
                    s: part.s,
                    n: part.n,
                    truncation: spec.len(),
                    min: xi[0],
                    median,
                    max: xi[xi.len() - 1],
                })
            };
            let pool = rayon_pool(workers)?;
            Some(pool.install(run).map_err(config_err)?)
        }
    };
    Ok(Diagnostics {
        family: cfg.spectrum.clone(),
        lambda: cfg.lambda,
        truncation: spec.len(),
        h_inv,
        tail_sum_sup: spec.check_tail_sum(),
        ratio_lambdas: cfg.lambda_grid.clone(),
        ratios_all_le_one: ratios.iter().all(|&r| r <= 1.0),
        ratio_band: if hi > 0.0 { lo / hi } else { 0.0 },
        effective_dimension_ratios: ratios,
        kernel_bound,
        eigenfunction_sup,
        xi,
    })
}

fn rayon_pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        b = b.num_threads(w.max(1));
    }
    b.build().map_err(|e| CliError::Experiment(e.to_string()))
}

pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<RunManifest, CliError> {
    let start = Instant::now();
    let mut cfg: DiagnoseConfig = read_json(&args.config)?;
    if let (Some(seed), Some(xi)) = (args.seed, cfg.xi.as_mut()) {
        xi.seed = seed;
    }
    let diag = diagnostics(&cfg, args.workers)?;
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let text = serde_json::to_string_pretty(&diag).expect("diagnostics serialize") + "\n";
    let outputs = vec![write_output(&args.out, "diagnostics.json", text.as_bytes())?];
    let config = serde_json::to_value(&cfg).expect("config serializes");
    let manifest = RunManifest {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        command: "diagnose".into(),
        config_hash: config_hash(&config),
        config,
        seed: cfg.xi.map(|x| x.seed).unwrap_or(0),
        wall_time_secs: start.elapsed().as_secs_f64(),
        mse_evaluation: String::new(),
        outputs,
    };
    write_manifest(&args.out, &manifest)?;
    Ok(manifest)
}

/// Runs a parsed command line, printing to stdout/stderr, and returns the
/// process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Sweep(a) => cmd_sweep(a).map(|m| format!("wrote {} file(s) to {}\n", m.outputs.len() + 1, a.out.display())),
        Command::Rates(a) => cmd_rates(a),
        Command::Diagnose(a) => cmd_diagnose(a).map(|_| format!("wrote diagnostics.json to {}\n", a.out.display())),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            EXIT_OK
        }
        Err(e) => {
            let body = serde_json::json!({ "error": e.to_string(), "exit_code": e.exit_code() });
            eprintln!("{body}");
            e.exit_code()
        }
    }
}
