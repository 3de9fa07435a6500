// NaN must fail range checks, so negated comparisons are intentional.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ratiokde::harness::{
    self, dataset_sample, density_csv, emit, read_density_csv, ExperimentConfig, Method,
    ModelSpec,
};
use ratiokde::kde::{extract_modes, Window};
use ratiokde::pde::residual_grid;
use ratiokde::ratio::{density_equal_var, density_general, EqualVarSpec, GeneralGaussianSpec};
use ratiokde::signal::{format_f64, Dataset, DatasetFormat};
use ratiokde::Error;

#[derive(Parser)]
#[command(name = "ratiokde", version, about = "Ratio-of-Gaussians densities and PDE-kernel eigenvalue density estimation")]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo pipeline and write densities.csv, modes.json, params.json, run.json.
    Simulate(SimulateArgs),
    /// Evaluate the exact ratio density on a grid.
    Density(DensityArgs),
    /// Residual of the diffusion equation on a grid.
    PdeCheck(PdeCheckArgs),
    /// Estimate the eigenvalue density from a dataset file.
    Estimate(EstimateArgs),
    /// Modes of a density CSV.
    Modes(ModesArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// ExperimentConfig JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model JSON: {"zeta": [...], "f": [...], "sigma": s, "n": optional}.
    #[arg(long)]
    model_file: Option<PathBuf>,
    /// Built-in model when neither --config nor --model-file is given.
    #[arg(long, value_enum, default_value_t = Preset::One)]
    preset: Preset,
    #[arg(long)]
    seed: Option<u64>,
    /// Estimation replications R.
    #[arg(long)]
    replications: Option<usize>,
    /// Reference replications N_ref.
    #[arg(long)]
    n_ref: Option<usize>,
    #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
    window: Option<[f64; 2]>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Fixed t0 instead of the reference fit.
    #[arg(long)]
    t0: Option<f64>,
    /// Also write the first R replications to this file (.csv or .json).
    #[arg(long)]
    save_data: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    One,
    Two,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Gaussian,
    Proposed,
    Both,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Gaussian => Method::Gaussian,
            MethodArg::Proposed => Method::Proposed,
            MethodArg::Both => Method::Both,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SingleMethod {
    Gaussian,
    Proposed,
}

#[derive(Args)]
struct SpecArgs {
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    nu_v: f64,
    #[arg(long, allow_negative_numbers = true)]
    nu_w: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    rho: f64,
    /// Common variance; required except for the general-covariance form.
    #[arg(long)]
    t: Option<f64>,
}

impl SpecArgs {
    fn spec(&self) -> ratiokde::Result<EqualVarSpec<f64>> {
        let t = self
            .t
            .ok_or_else(|| Error::InvalidParameter("--t is required".into()))?;
        EqualVarSpec::new(self.nu_v, self.nu_w, self.rho, t)
    }
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
    window: [f64; 2],
    #[arg(long, default_value_t = 256)]
    points: usize,
}

impl GridArgs {
    /// Endpoint-inclusive grid.
    fn xs(&self) -> ratiokde::Result<Vec<f64>> {
        Window::new(self.window[0], self.window[1])?;
        if self.points < 2 {
            return Err(Error::InvalidParameter("points must be >= 2".into()));
        }
        let h = (self.window[1] - self.window[0]) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.window[0] + i as f64 * h).collect())
    }
}

#[derive(Args)]
struct DensityArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// General covariance: variance of the denominator (with --sigma2-w and --gamma).
    #[arg(long, requires_all = ["sigma2_w", "gamma"])]
    sigma2_v: Option<f64>,
    #[arg(long)]
    sigma2_w: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    gamma: Option<f64>,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PdeCheckArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Points closer than this to a root of the coefficient denominator are skipped.
    #[arg(long, default_value_t = 1e-3)]
    tube: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Dataset (.csv: one replication per row; .json: model plus matrix).
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    method: SingleMethod,
    #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
    window: [f64; 2],
    #[arg(long, default_value_t = 256)]
    points: usize,
    #[arg(long, default_value_t = 2.0)]
    tau: f64,
    /// Use only the first R rows.
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ModesArgs {
    /// CSV with an `x` column.
    #[arg(long)]
    density: PathBuf,
    /// Density column name.
    #[arg(long, default_value = "density")]
    column: String,
    #[arg(long, default_value_t = 2.0)]
    tau: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_window(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected lo,hi, got {s:?}"));
    }
    let lo = parts[0].trim().parse::<f64>().map_err(|e| e.to_string())?;
    let hi = parts[1].trim().parse::<f64>().map_err(|e| e.to_string())?;
    if !(lo < hi) {
        return Err(format!("window needs lo < hi, got {s:?}"));
    }
    Ok([lo, hi])
}

fn write_or_print(path: Option<&Path>, contents: &str) -> ratiokde::Result<()> {
    match path {
        Some(p) => fs::write(p, contents).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

fn read_text(path: &Path) -> ratiokde::Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn simulate(a: SimulateArgs, threads: usize) -> ratiokde::Result<()> {
    let mut config = match &a.config {
        Some(p) => ExperimentConfig::from_json(&read_text(p)?)?,
        None => match a.preset {
            Preset::One => ExperimentConfig::model_one(0),
            Preset::Two => ExperimentConfig::model_two(0),
        },
    };
    if let Some(p) = &a.model_file {
        config.model = serde_json::from_str::<ModelSpec>(&read_text(p)?)?;
    }
    if let Some(v) = a.seed {
        config.seed = v;
    }
    if let Some(v) = a.replications {
        config.r = v;
    }
    if let Some(v) = a.n_ref {
        config.n_ref = v;
    }
    if let Some(v) = a.window {
        config.window = v;
    }
    if let Some(v) = a.points {
        config.points = v;
    }
    if let Some(v) = a.tau {
        config.tau = v;
    }
    if let Some(v) = a.method {
        config.method = v.into();
    }
    if a.t0.is_some() {
        config.t0 = a.t0;
    }
    if threads > 0 {
        config.threads = threads;
    }
    config.validate()?;

    if let Some(path) = &a.save_data {
        let (model, _) = config.model.resolve(config.seed, config.n_max)?;
        Dataset::generate(&model, config.r).write(path, DatasetFormat::from_path(path))?;
    }
    let report = harness::run(&config)?;
    let files = emit(&report, &a.out)?;
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    let p = &report.params;
    eprintln!(
        "n = {}, real pairs = {}, rho_hat = {:?}, t0 = {:?}, t* = {:?}, t+ = {:?}",
        p.n,
        report.counts.real_pairs,
        p.rho_hat,
        p.fit.map(|f| f.t0),
        p.t_star.map(|t| t.t_star),
        p.t_plus
    );
    if let Some(m) = &report.modes_proposed {
        eprintln!("proposed modes: {:?}", m.iter().map(|m| m.x).collect::<Vec<_>>());
    }
    if let Some(m) = &report.modes_gaussian {
        eprintln!("gaussian modes: {:?}", m.iter().map(|m| m.x).collect::<Vec<_>>());
    }
    Ok(())
}

fn density(a: DensityArgs) -> ratiokde::Result<()> {
    let xs = a.grid.xs()?;
    let eval: Box<dyn Fn(f64) -> f64> = match (a.sigma2_v, a.sigma2_w, a.gamma) {
        (Some(sv), Some(sw), Some(g)) => {
            let spec = GeneralGaussianSpec::new(a.spec.nu_v, a.spec.nu_w, sv, sw, g)?;
            Box::new(move |x| density_general(&spec, x))
        }
        _ => {
            let spec = a.spec.spec()?;
            Box::new(move |x| density_equal_var(&spec, x))
        }
    };
    let mut s = String::from("x,h\n");
    for x in xs {
        s.push_str(&format!("{},{}\n", format_f64(x), format_f64(eval(x))));
    }
    write_or_print(a.out.as_deref(), &s)
}

fn pde_check(a: PdeCheckArgs) -> ratiokde::Result<()> {
    let spec = a.spec.spec()?;
    if a.grid.points < 2 {
        return Err(Error::InvalidParameter("points must be >= 2".into()));
    }
    let points = residual_grid(&spec, a.grid.window[0], a.grid.window[1], a.grid.points, a.tube)?;
    let mut s = String::from("x,h,h_t,D,C,S,residual\n");
    for p in &points {
        let c = &p.coefficients;
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            format_f64(p.x),
            format_f64(p.h),
            format_f64(p.h_t),
            format_f64(c.d),
            format_f64(c.c),
            format_f64(c.s),
            format_f64(p.residual)
        ));
    }
    write_or_print(a.out.as_deref(), &s)
}

fn estimate(a: EstimateArgs) -> ratiokde::Result<()> {
    let ds = Dataset::read(&a.data, DatasetFormat::from_path(&a.data))?;
    let rows = a.replications.unwrap_or(ds.data.len()).min(ds.data.len());
    let sample = dataset_sample(&ds.data[..rows])?;
    let window = Window::new(a.window[0], a.window[1])?;
    if a.points < 16 {
        return Err(Error::InvalidParameter("points must be >= 16".into()));
    }
    if !(a.tau > 0.0) {
        return Err(Error::InvalidParameter("tau must be > 0".into()));
    }
    let method = match a.method {
        SingleMethod::Gaussian => Method::Gaussian,
        SingleMethod::Proposed => Method::Proposed,
    };
    let (grid, modes, params) = harness::estimate(&sample, method, window, a.points, a.tau)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    write_or_print(Some(&a.out.join("density.csv")), &density_csv(&grid))?;
    write_or_print(
        Some(&a.out.join("modes.json")),
        &(serde_json::to_string_pretty(&modes)? + "\n"),
    )?;
    write_or_print(
        Some(&a.out.join("params.json")),
        &(serde_json::to_string_pretty(&params)? + "\n"),
    )?;
    eprintln!("modes: {:?}", modes.iter().map(|m| m.x).collect::<Vec<_>>());
    Ok(())
}

fn modes(a: ModesArgs) -> ratiokde::Result<()> {
    if !(a.tau > 0.0) {
        return Err(Error::InvalidParameter("tau must be > 0".into()));
    }
    let grid = read_density_csv(&a.density, &a.column)?;
    let modes = extract_modes(&grid, a.tau)?;
    write_or_print(a.out.as_deref(), &(serde_json::to_string_pretty(&modes)? + "\n"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    if threads > 0 {
        std::env::set_var("RAYON_NUM_THREADS", threads.to_string());
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate(a, threads),
        Command::Density(a) => density(a),
        Command::PdeCheck(a) => pde_check(a),
        Command::Estimate(a) => estimate(a),
        Command::Modes(a) => modes(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
