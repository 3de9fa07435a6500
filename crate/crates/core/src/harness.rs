//! Monte Carlo pipeline: simulate replications, extract real generalized
//! eigenvalues, build the reference and empirical densities, run the
//! estimators, extract modes, and write the result files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kde::{
    bandwidth_t_star, empirical_density, extract_modes, fit_reference, gaussian_bandwidth,
    gaussian_estimate, pooled_correlation, proposed_estimate, DensityGrid, EigenSample,
    FitResult, Histogram, Mode, TStar, Window,
};
use crate::pencil::{build_pencil, qz_with, real_pairs, RealPair};
use crate::qz::QzOptions;
use crate::signal::{format_f64, generate, select_n, SignalModel};

/// Signal parameters; `n` defaults to the sample-length rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub zeta: Vec<f64>,
    pub f: Vec<f64>,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

impl ModelSpec {
    /// Three components at `[0.8, 0.9, 0.95]`, unit amplitudes, `σ = 1.5e-3`.
    pub fn model_one() -> Self {
        Self {
            zeta: vec![0.8, 0.9, 0.95],
            f: vec![1.0; 3],
            sigma: 1.5e-3,
            n: None,
        }
    }

    /// Five close components, `σ = 2e-9`.
    pub fn model_two() -> Self {
        Self {
            zeta: vec![0.88, 0.90, 0.91, 0.92, 0.94],
            f: vec![1.0, 10.0, 10.0, 10.0, 1.0],
            sigma: 2e-9,
            n: None,
        }
    }

    /// Resolves `n` and attaches the seed.
    pub fn resolve(&self, seed: u64, n_max: usize) -> Result<(SignalModel<f64>, bool)> {
        let (n, capped) = match self.n {
            Some(n) => (n, false),
            None => {
                let s = select_n(&self.zeta, &self.f, self.sigma, n_max)?;
                (s.n, s.capped)
            }
        };
        let m = SignalModel::new(self.zeta.clone(), self.f.clone(), self.sigma, n, seed)?;
        Ok((m, capped))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gaussian,
    Proposed,
    Both,
}

impl Method {
    pub fn gaussian(self) -> bool {
        matches!(self, Method::Gaussian | Method::Both)
    }

    pub fn proposed(self) -> bool {
        matches!(self, Method::Proposed | Method::Both)
    }
}

fn default_n_max() -> usize {
    100_000
}

fn default_method() -> Method {
    Method::Both
}

fn default_threads() -> usize {
    0
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    /// Replications used by the estimators.
    #[serde(rename = "R")]
    pub r: usize,
    /// Replications behind the reference density.
    #[serde(rename = "N_ref")]
    pub n_ref: usize,
    pub window: [f64; 2],
    /// Grid points, also the histogram bin count.
    pub points: usize,
    pub tau: f64,
    pub seed: u64,
    #[serde(default = "default_method")]
    pub method: Method,
    /// Upper bound for the sample-length rule.
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    /// Worker threads; 0 uses the rayon default.
    #[serde(default = "default_threads")]
    pub threads: usize,
    /// Fixed `t₀` replacing the reference fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
}

impl ExperimentConfig {
    /// Model-1 settings at desk scale.
    pub fn model_one(seed: u64) -> Self {
        Self {
            model: ModelSpec::model_one(),
            r: 250,
            n_ref: 10_000,
            window: [0.75, 1.0],
            points: 256,
            tau: 2.0,
            seed,
            method: Method::Both,
            n_max: default_n_max(),
            threads: 0,
            t0: None,
        }
    }

    /// Model-2 settings at desk scale.
    pub fn model_two(seed: u64) -> Self {
        Self {
            model: ModelSpec::model_two(),
            window: [0.85, 0.96],
            points: 8192,
            ..Self::model_one(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.r > self.n_ref {
            return Err(Error::invalid(format!(
                "need 0 < R <= N_ref, got R = {}, N_ref = {}",
                self.r, self.n_ref
            )));
        }
        Window::new(self.window[0], self.window[1])?;
        if self.points < 16 {
            return Err(Error::invalid(format!("points must be >= 16, got {}", self.points)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::invalid(format!("tau must be > 0, got {}", self.tau)));
        }
        if let Some(t0) = self.t0 {
            if !(t0 > 0.0 && t0.is_finite()) {
                return Err(Error::invalid(format!("t0 must be > 0, got {t0}")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }
}

/// Diagonal-block bookkeeping over all replications.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub replications: usize,
    pub diagonal_entries: usize,
    pub real_pairs: usize,
    pub complex_discarded: usize,
    pub infinite_discarded: usize,
    pub reference_outside_window: usize,
    pub empirical_outside_window: usize,
    pub t_star_skipped: usize,
}

/// Estimated bandwidths and fitted parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Params {
    pub n: usize,
    pub n_capped: bool,
    pub rho_hat: Option<f64>,
    pub fit: Option<FitResult<f64>>,
    pub t0_fixed: bool,
    pub t_star: Option<TStar<f64>>,
    pub t_plus: Option<f64>,
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub params: Params,
    pub counts: Counts,
    pub reference: Histogram<f64>,
    pub empirical: Histogram<f64>,
    pub gaussian: Option<DensityGrid<f64>>,
    pub proposed: Option<DensityGrid<f64>>,
    pub modes_reference: Vec<Mode<f64>>,
    pub modes_gaussian: Option<Vec<Mode<f64>>>,
    pub modes_proposed: Option<Vec<Mode<f64>>>,
    /// Wall-clock seconds per phase, in execution order.
    pub timings: Vec<(&'static str, f64)>,
}

/// Real pairs of one replication, plus discard counts.
pub fn replication_pairs(model: &SignalModel<f64>, r: u64) -> Result<(Vec<RealPair<f64>>, usize, usize)> {
    let d = generate(model, r);
    let pencil = build_pencil(&d)?;
    let sp = qz_with(
        &pencil,
        QzOptions {
            accumulate: false,
            ..QzOptions::default()
        },
    )?;
    let rp = real_pairs(&sp);
    Ok((rp.pairs, rp.complex_discarded, rp.infinite_discarded))
}

fn with_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Pencil eigenvalues of all `N_ref` replications of a configuration.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub model: SignalModel<f64>,
    pub n_capped: bool,
    pub pairs: EigenSample<f64>,
    pub counts: Counts,
    pub seconds: f64,
}

/// Runs the whole pipeline. Results do not depend on the thread count.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    with_pool(config.threads, || {
        let sim = simulate_inner(config)?;
        analyze_inner(config, &sim)
    })?
}

/// The Monte Carlo stage of [`run`].
pub fn simulate(config: &ExperimentConfig) -> Result<Simulation> {
    config.validate()?;
    with_pool(config.threads, || simulate_inner(config))?
}

/// The estimation stage of [`run`] on precomputed eigenvalues. Only `R`,
/// `window`, `points`, `tau`, `method` and `t0` of `config` are used.
pub fn analyze(config: &ExperimentConfig, sim: &Simulation) -> Result<ExperimentReport> {
    config.validate()?;
    if sim.pairs.r() < config.r {
        return Err(Error::invalid(format!(
            "simulation has {} replications, R = {}",
            sim.pairs.r(),
            config.r
        )));
    }
    with_pool(config.threads, || analyze_inner(config, sim))?
}

fn simulate_inner(config: &ExperimentConfig) -> Result<Simulation> {
    let clock = Instant::now();
    let (model, n_capped) = config
        .model
        .resolve(config.seed, config.n_max)
        .map_err(|e| e.in_phase("model"))?;
    let per_rep: Vec<(Vec<RealPair<f64>>, usize, usize)> = (0..config.n_ref as u64)
        .into_par_iter()
        .map(|r| replication_pairs(&model, r))
        .collect::<Result<_>>()
        .map_err(|e| e.in_phase("eigenvalues"))?;
    let mut counts = Counts {
        replications: per_rep.len(),
        diagonal_entries: per_rep.len() * (model.n / 2),
        ..Counts::default()
    };
    for (pairs, c, i) in &per_rep {
        counts.real_pairs += pairs.len();
        counts.complex_discarded += c;
        counts.infinite_discarded += i;
    }
    let pairs = EigenSample::from_pairs(per_rep.into_iter().map(|p| p.0).collect())?;
    Ok(Simulation {
        model,
        n_capped,
        pairs,
        counts,
        seconds: clock.elapsed().as_secs_f64(),
    })
}

fn analyze_inner(config: &ExperimentConfig, sim: &Simulation) -> Result<ExperimentReport> {
    let mut timings = vec![("eigenvalues", sim.seconds)];
    let mut clock = Instant::now();
    let mut lap = |name: &'static str, timings: &mut Vec<(&'static str, f64)>| {
        timings.push((name, clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };
    let window = Window::new(config.window[0], config.window[1])?;
    let (model, n_capped, all) = (&sim.model, sim.n_capped, &sim.pairs);
    let mut counts = sim.counts;

    let reference =
        empirical_density(all, window, config.points).map_err(|e| e.in_phase("reference"))?;
    let sample = all.truncated(config.r);
    let empirical =
        empirical_density(&sample, window, config.points).map_err(|e| e.in_phase("empirical"))?;
    counts.reference_outside_window = reference.outside;
    counts.empirical_outside_window = empirical.outside;
    let x = reference.grid.x.clone();
    lap("histograms", &mut timings);

    let mut params = Params {
        n: model.n,
        n_capped,
        rho_hat: None,
        fit: None,
        t0_fixed: config.t0.is_some(),
        t_star: None,
        t_plus: None,
    };

    let mut proposed = None;
    if config.method.proposed() {
        let rho_hat = pooled_correlation(&sample).map_err(|e| e.in_phase("correlation"))?;
        let fitted = fit_reference(&empirical).map_err(|e| e.in_phase("fit"))?;
        let fit = match config.t0 {
            Some(t0) => FitResult { t0, ..fitted },
            None => fitted,
        };
        lap("fit", &mut timings);
        let ts =
            bandwidth_t_star(&sample, &fit, rho_hat, window).map_err(|e| e.in_phase("bandwidth"))?;
        counts.t_star_skipped = ts.skipped;
        lap("bandwidth", &mut timings);
        proposed = Some(
            proposed_estimate(&sample, rho_hat, ts.t_star, &x)
                .map_err(|e| e.in_phase("proposed"))?,
        );
        lap("proposed", &mut timings);
        params.rho_hat = Some(rho_hat);
        params.fit = Some(fit);
        params.t_star = Some(ts);
    }

    let mut gaussian = None;
    if config.method.gaussian() {
        let t_plus = gaussian_bandwidth(&sample).map_err(|e| e.in_phase("gaussian bandwidth"))?;
        gaussian =
            Some(gaussian_estimate(&sample, &x, t_plus).map_err(|e| e.in_phase("gaussian"))?);
        params.t_plus = Some(t_plus);
        lap("gaussian", &mut timings);
    }

    let modes = |g: &DensityGrid<f64>| extract_modes(g, config.tau).map_err(|e| e.in_phase("modes"));
    let modes_reference = modes(&reference.grid)?;
    let modes_gaussian = gaussian.as_ref().map(modes).transpose()?;
    let modes_proposed = proposed.as_ref().map(modes).transpose()?;
    lap("modes", &mut timings);

    Ok(ExperimentReport {
        config: config.clone(),
        params,
        counts,
        reference,
        empirical,
        gaussian,
        proposed,
        modes_reference,
        modes_gaussian,
        modes_proposed,
        timings,
    })
}

/// One entry of `modes.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub method: Estimator,
    pub x: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Reference,
    Gaussian,
    Proposed,
}

impl ExperimentReport {
    pub fn mode_records(&self) -> Vec<ModeRecord> {
        let mut out = Vec::new();
        let mut push = |method, modes: &[Mode<f64>]| {
            out.extend(modes.iter().map(|m| ModeRecord {
                method,
                x: m.x,
                height: m.height,
            }))
        };
        push(Estimator::Reference, &self.modes_reference);
        if let Some(m) = &self.modes_gaussian {
            push(Estimator::Gaussian, m);
        }
        if let Some(m) = &self.modes_proposed {
            push(Estimator::Proposed, m);
        }
        out
    }

    /// `densities.csv` contents; absent estimators leave their column empty.
    pub fn densities_csv(&self) -> String {
        let mut s = String::from("x,reference,empirical,gaussian,proposed\n");
        let cell = |g: &Option<DensityGrid<f64>>, i: usize| {
            g.as_ref().map(|g| format_f64(g.y[i])).unwrap_or_default()
        };
        for (i, x) in self.reference.grid.x.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                format_f64(*x),
                format_f64(self.reference.grid.y[i]),
                format_f64(self.empirical.grid.y[i]),
                cell(&self.gaussian, i),
                cell(&self.proposed, i),
            ));
        }
        s
    }

    fn params_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct P<'a> {
            #[serde(flatten)]
            params: &'a Params,
            counts: &'a Counts,
            reference_captured: f64,
            empirical_captured: f64,
        }
        Ok(serde_json::to_string_pretty(&P {
            params: &self.params,
            counts: &self.counts,
            reference_captured: self.reference.captured,
            empirical_captured: self.empirical.captured,
        })? + "\n")
    }

    fn run_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Run<'a> {
            seed: u64,
            versions: BTreeMap<&'static str, &'static str>,
            config: &'a ExperimentConfig,
            timings: BTreeMap<&'static str, f64>,
        }
        let versions = BTreeMap::from([
            ("ratiokde", env!("CARGO_PKG_VERSION")),
            ("rng", "ChaCha20 (rand_chacha 0.9), stream = replication index"),
        ]);
        Ok(serde_json::to_string_pretty(&Run {
            seed: self.config.seed,
            versions,
            config: &self.config,
            timings: self.timings.iter().copied().collect(),
        })? + "\n")
    }
}

/// Files written by [`emit`].
pub const DENSITIES_FILE: &str = "densities.csv";
pub const MODES_FILE: &str = "modes.json";
pub const PARAMS_FILE: &str = "params.json";
pub const RUN_FILE: &str = "run.json";

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Writes `densities.csv`, `modes.json`, `params.json` and `run.json`.
pub fn emit(report: &ExperimentReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let files = [
        (DENSITIES_FILE, report.densities_csv()),
        (
            MODES_FILE,
            serde_json::to_string_pretty(&report.mode_records())? + "\n",
        ),
        (PARAMS_FILE, report.params_json()?),
        (RUN_FILE, report.run_json()?),
    ];
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = out_dir.join(name);
        write_file(&path, &contents)?;
        written.push(path);
    }
    Ok(written)
}

/// Writes `x,density` rows.
pub fn density_csv(grid: &DensityGrid<f64>) -> String {
    let mut s = String::from("x,density\n");
    for (x, y) in grid.x.iter().zip(&grid.y) {
        s.push_str(&format!("{},{}\n", format_f64(*x), format_f64(*y)));
    }
    s
}

/// Reads abscissae and one named column from a density CSV.
pub fn read_density_csv(path: &Path, column: &str) -> Result<DensityGrid<f64>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 1,
            column: 1,
            message: e.to_string(),
        })?
        .clone();
    let find = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::Parse {
            row: 1,
            column: 1,
            message: format!("missing column {name:?}"),
        })
    };
    let (ix, iy) = (find("x")?, find(column)?);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            column: 1,
            message: e.to_string(),
        })?;
        let get = |j: usize| -> Result<f64> {
            let s = rec.get(j).unwrap_or("").trim();
            s.parse::<f64>().map_err(|e| Error::Parse {
                row,
                column: j + 1,
                message: format!("{s:?}: {e}"),
            })
        };
        x.push(get(ix)?);
        y.push(get(iy)?);
    }
    DensityGrid::new(x, y)
}

/// Real pairs of every replication of a dataset.
pub fn dataset_sample(data: &[Vec<f64>]) -> Result<EigenSample<f64>> {
    let reps = data
        .par_iter()
        .map(|d| {
            let pencil = build_pencil(d)?;
            let sp = qz_with(
                &pencil,
                QzOptions {
                    accumulate: false,
                    ..QzOptions::default()
                },
            )?;
            Ok(real_pairs(&sp).pairs)
        })
        .collect::<Result<Vec<_>>>()?;
    EigenSample::from_pairs(reps)
}

/// Single-method estimate from a sample: grid on bin centers plus modes.
pub fn estimate(
    sample: &EigenSample<f64>,
    method: Method,
    window: Window<f64>,
    points: usize,
    tau: f64,
) -> Result<(DensityGrid<f64>, Vec<Mode<f64>>, Params)> {
    let x = window.centers(points);
    let mut params = Params {
        n: 0,
        n_capped: false,
        rho_hat: None,
        fit: None,
        t0_fixed: false,
        t_star: None,
        t_plus: None,
    };
    let grid = match method {
        Method::Gaussian => {
            let t = gaussian_bandwidth(sample).map_err(|e| e.in_phase("gaussian bandwidth"))?;
            params.t_plus = Some(t);
            gaussian_estimate(sample, &x, t)?
        }
        Method::Proposed => {
            let hist = empirical_density(sample, window, points)?;
            let rho = pooled_correlation(sample).map_err(|e| e.in_phase("correlation"))?;
            let fit = fit_reference(&hist).map_err(|e| e.in_phase("fit"))?;
            let ts = bandwidth_t_star(sample, &fit, rho, window)
                .map_err(|e| e.in_phase("bandwidth"))?;
            params.rho_hat = Some(rho);
            params.fit = Some(fit);
            params.t_star = Some(ts);
            proposed_estimate(sample, rho, ts.t_star, &x)?
        }
        Method::Both => {
            return Err(Error::invalid("estimate takes a single method"));
        }
    };
    let modes = extract_modes(&grid, tau)?;
    Ok((grid, modes, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            r: 20,
            n_ref: 40,
            points: 32,
            ..ExperimentConfig::model_one(seed)
        }
    }

    #[test]
    fn config_validation() {
        let mut c = tiny(1);
        c.r = 50;
        assert!(c.validate().unwrap_err().is_validation());
        let mut c = tiny(1);
        c.window = [1.0, 0.5];
        assert!(c.validate().is_err());
        let mut c = tiny(1);
        c.points = 8;
        assert!(c.validate().is_err());
        assert!(ExperimentConfig::from_json("{\"model\": 1}").is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let c = tiny(7);
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"R\":20") && text.contains("\"N_ref\":40"));
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
    }

    #[test]
    fn accounting_sums() {
        let rep = run(&tiny(3)).unwrap();
        let c = rep.counts;
        assert_eq!(
            c.real_pairs + c.complex_discarded + c.infinite_discarded,
            c.diagonal_entries
        );
        assert_eq!(rep.params.n, 128);
        assert_eq!(rep.densities_csv().lines().count(), 33);
    }
}
