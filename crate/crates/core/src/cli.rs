//! Command-line front end: flat key=value configs in, CSV/JSON artifacts out.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::bounds;
use crate::error::{LabError, Result};
use crate::estimators::{ols, sparse_lse, ssarx_fit, Estimate};
use crate::experiments::{
    derive_stream, mc_coverage, rate_fit, tail_compare, ArxSpecFields, ExperimentConfig,
    SystemSpec,
};
use crate::numerics::{riccati_fixed_point, RICCATI_DEFAULT_MAX_ITER, RICCATI_DEFAULT_TOL};
use crate::systems::noise::{NoiseFamily, NoiseSpec};
use crate::systems::trajectory::{regressors, simulate_arx, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Simulate,
    Identify,
    Bounds,
    McCoverage,
    Rate,
    Tail,
    Riccati,
}

impl Subcommand {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "simulate" => Subcommand::Simulate,
            "identify" => Subcommand::Identify,
            "bounds" => Subcommand::Bounds,
            "mc-coverage" => Subcommand::McCoverage,
            "rate" => Subcommand::Rate,
            "tail" => Subcommand::Tail,
            "riccati" => Subcommand::Riccati,
            other => {
                return Err(LabError::Config(format!("unknown subcommand '{other}'")));
            }
        })
    }
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub subcommand: Subcommand,
    pub config_path: PathBuf,
    pub output_dir: PathBuf,
    pub seed_override: Option<u64>,
}

/// Flat key=value config with dotted section keys; `#` starts a comment and
/// arrays are comma separated.
#[derive(Debug, Clone)]
pub struct Config {
    map: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                LabError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Config { map })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            LabError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.map
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| LabError::Config(format!("missing config key '{key}'")))
    }

    pub fn get_opt(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        self.get(key)?
            .parse()
            .map_err(|_| LabError::Config(format!("key '{key}' must be a real number")))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get_opt(key) {
            None => Ok(default),
            Some(_) => self.f64(key),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.get(key)?
            .parse()
            .map_err(|_| LabError::Config(format!("key '{key}' must be a nonnegative integer")))
    }

    pub fn usize_opt(&self, key: &str) -> Result<Option<usize>> {
        match self.get_opt(key) {
            None => Ok(None),
            Some(_) => self.usize(key).map(Some),
        }
    }

    pub fn u64_opt(&self, key: &str) -> Result<Option<u64>> {
        match self.get_opt(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| LabError::Config(format!("key '{key}' must be a 64-bit integer"))),
        }
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        self.get(key)?
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| LabError::Config(format!("key '{key}' must list real numbers")))
            })
            .collect()
    }

    pub fn f64_list_or(&self, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        match self.get_opt(key) {
            None => Ok(default),
            Some(_) => self.f64_list(key),
        }
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>> {
        self.get(key)?
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| LabError::Config(format!("key '{key}' must list integers")))
            })
            .collect()
    }
}

fn noise_from_config(cfg: &Config) -> Result<NoiseSpec> {
    let family = match cfg.get_opt("noise.family").unwrap_or("gaussian") {
        "gaussian" => NoiseFamily::Gaussian,
        "rademacher" => NoiseFamily::Rademacher,
        "uniform" => NoiseFamily::Uniform,
        other => {
            return Err(LabError::Config(format!("unknown noise family '{other}'")));
        }
    };
    Ok(NoiseSpec::new(family))
}

fn arx_spec_from_config(cfg: &Config) -> Result<ArxSpecFields> {
    Ok(ArxSpecFields {
        a: cfg.f64_list("system.a")?,
        b: cfg.f64_list_or("system.b", vec![])?,
        sigma_w: cfg.f64_or("system.sigma_w", 1.0)?,
        sigma_u: cfg.f64_or("system.sigma_u", 0.0)?,
    })
}

fn resolve_seed(cfg: &Config, inv: &Invocation) -> Result<u64> {
    match inv.seed_override.or(cfg.u64_opt("seed")?) {
        Some(s) => Ok(s),
        None => Err(LabError::Config(
            "no seed given: set `seed` in the config or pass --seed (wall-clock seeding is not supported)"
                .into(),
        )),
    }
}

/// Writes through a temporary file in the target directory followed by an
/// atomic rename; partial outputs are never visible.
fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    fs::write(tmp.path(), contents)?;
    tmp.persist(dir.join(name))
        .map_err(|e| LabError::Io(e.error))?;
    Ok(())
}

fn simulate_from_config(cfg: &Config, seed: u64) -> Result<Trajectory> {
    let spec = arx_spec_from_config(cfg)?;
    let sys = crate::systems::arx::ArxSystem::scalar(&spec.a, &spec.b, spec.sigma_w, spec.sigma_u)?;
    let noise = noise_from_config(cfg)?;
    let horizon = cfg.usize("horizon")?;
    let restart = cfg.usize_opt("restart_k")?;
    let mut stream = derive_stream(seed, 0);
    simulate_arx(&sys, &noise, horizon, &mut stream, restart)
}

fn run_simulate(cfg: &Config, inv: &Invocation, seed: u64) -> Result<String> {
    let traj = simulate_from_config(cfg, seed)?;
    write_atomic(&inv.output_dir, "trajectory.csv", &traj.to_csv())?;
    Ok(format!(
        "simulated {} steps ({} outputs, {} inputs) -> trajectory.csv",
        traj.horizon(),
        traj.d_y(),
        traj.d_u()
    ))
}

fn run_identify(cfg: &Config, inv: &Invocation, seed: u64) -> Result<String> {
    let traj = simulate_from_config(cfg, seed)?;
    let spec = arx_spec_from_config(cfg)?;
    let (p, q) = (spec.a.len(), spec.b.len());
    let estimate: Estimate = match cfg.get_opt("estimator").unwrap_or("ols") {
        "ols" => {
            let (x, y) = regressors(&traj, p, q)?;
            ols(&x, &y)?
        }
        "sparse" => {
            let s = cfg.usize("sparsity")?;
            let (x, y) = regressors(&traj, p, q)?;
            sparse_lse(&x, &y.column(0).into_owned(), s)?
        }
        "ssarx" => {
            let depth = cfg.usize("ssarx.p")?;
            ssarx_fit(&traj, depth)?
        }
        other => {
            return Err(LabError::Config(format!("unknown estimator '{other}'")));
        }
    };
    write_atomic(&inv.output_dir, "estimate.json", &estimate.to_json()?)?;
    Ok(format!(
        "fitted {}x{} coefficient matrix (rank {}) -> estimate.json",
        estimate.theta_hat.nrows(),
        estimate.theta_hat.ncols(),
        estimate.rank
    ))
}

fn run_bounds(cfg: &Config, inv: &Invocation) -> Result<String> {
    let name = cfg.get("bound.name")?;
    let report = match name {
        "gaussian_tail" => bounds::gaussian_tail(cfg.f64("bound.s")?, cfg.f64("bound.sigma2")?)?,
        "hw_tail" => bounds::hw_tail(
            cfg.f64("bound.s")?,
            cfg.f64("bound.sigma2")?,
            cfg.f64("bound.m_frob")?,
            cfg.f64("bound.m_op")?,
        )?,
        "hw_mgf_exponent" => bounds::hw_mgf_exponent(
            cfg.f64("bound.lambda")?,
            cfg.f64("bound.sigma2")?,
            cfg.f64("bound.m_frob")?,
            cfg.f64("bound.m_op")?,
        )?,
        "covering_cardinality_bound" => {
            bounds::covering_cardinality_bound(cfg.f64("bound.eps")?, cfg.usize("bound.d")?)?
        }
        "spectrum_deviation_failure" => bounds::spectrum_deviation_failure(
            cfg.f64("bound.eps")?,
            cfg.f64("bound.k2")?,
            cfg.f64("bound.m_op")?,
            cfg.f64("bound.l_op")?,
            cfg.usize("bound.d_x")?,
        )?,
        "csys" => bounds::csys(
            cfg.usize("bound.t")?,
            cfg.usize("bound.k")?,
            cfg.f64("bound.l_op2")?,
            cfg.f64("bound.sum_cov_min")?,
            cfg.f64("bound.sum_cov_max")?,
            cfg.f64("bound.sum_decoupled_min")?,
        )?,
        "lower_tail_failure" => bounds::lower_tail_failure(
            cfg.usize("bound.t")?,
            cfg.usize("bound.k")?,
            cfg.f64("bound.k2")?,
            cfg.usize("bound.d")?,
            cfg.f64("bound.csys")?,
        )?,
        "selfnorm_frobenius_bound" => bounds::selfnorm_frobenius_bound(
            cfg.usize("bound.d_y")?,
            cfg.f64("bound.sigma2")?,
            cfg.f64("bound.logdet_ratio")?,
            cfg.f64("bound.delta")?,
        )?,
        "selfnorm_operator_bound" => bounds::selfnorm_operator_bound(
            cfg.usize("bound.d_y")?,
            cfg.f64("bound.sigma2")?,
            cfg.f64("bound.logdet_ratio")?,
            cfg.f64("bound.delta")?,
        )?,
        "arx_burn_in" => bounds::arx_burn_in(
            cfg.usize("bound.t")?,
            cfg.f64("bound.delta")?,
            cfg.usize("bound.tau")?,
            cfg.f64("bound.k2")?,
            cfg.usize("bound.dims")?,
            cfg.f64("bound.sigma_t_op")?,
            cfg.f64("bound.sigma_tau_min")?,
        )?,
        "arx_error_bound" => bounds::arx_error_bound(
            cfg.f64("bound.snr_tau")?,
            cfg.usize("bound.t")?,
            cfg.usize("bound.dims")?,
            cfg.f64("bound.delta")?,
            cfg.f64("bound.logdet_cond")?,
            cfg.f64_or("bound.c", bounds::DEFAULT_UNIVERSAL_C)?,
        )?,
        "matrix_markov_factor" => {
            bounds::matrix_markov_factor(cfg.usize("bound.dims")?, cfg.f64("bound.delta")?)?
        }
        "power_norm_bound" => bounds::power_norm_bound(
            cfg.usize("bound.k")?,
            cfg.usize("bound.d")?,
            cfg.f64("bound.m")?,
        )?,
        "ss_error_bound" => bounds::ss_error_bound(
            cfg.f64("bound.snr_pp")?,
            cfg.usize("bound.t")?,
            cfg.usize("bound.p")?,
            cfg.usize("bound.d_sum")?,
            cfg.f64("bound.delta")?,
            cfg.f64("bound.logdet_cond")?,
            cfg.f64_or("bound.c1", bounds::DEFAULT_UNIVERSAL_C)?,
        )?,
        "sparse_bound" => bounds::sparse_bound(
            cfg.f64("bound.sigma2")?,
            cfg.usize("bound.s")?,
            cfg.usize("bound.p")?,
            cfg.f64("bound.cond_sys")?,
            cfg.f64("bound.delta")?,
            cfg.usize("bound.t")?,
            cfg.usize("bound.k")?,
            cfg.f64_or("bound.c", 1.0)?,
            cfg.f64_or("bound.c_prime", 1.0)?,
        )?,
        "nonlinear_bound" => bounds::nonlinear_bound(
            cfg.f64("bound.sigma2")?,
            cfg.f64("bound.class_size")?,
            cfg.f64("bound.delta")?,
            cfg.usize("bound.t")?,
            cfg.usize("bound.k")?,
            cfg.f64("bound.cond_f")?,
        )?,
        other => {
            return Err(LabError::Config(format!("unknown bound identifier '{other}'")));
        }
    };
    write_atomic(&inv.output_dir, "bound.json", &report.to_json()?)?;
    let mut table = format!("{:<24}{:.12e}\n", "value", report.value);
    table.push_str(&format!("{:<24}{}\n", "valid", report.valid));
    for (key, val) in &report.inputs {
        table.push_str(&format!("{:<24}{:.12e}\n", key, val));
    }
    Ok(format!("{} -> bound.json\n{table}", report.name))
}

fn experiment_from_config(cfg: &Config, seed: u64) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig {
        name: cfg.get_opt("name").unwrap_or("experiment").to_string(),
        system: SystemSpec::Arx(arx_spec_from_config(cfg)?),
        noise: noise_from_config(cfg)?,
        horizons: cfg.usize_list("horizons")?,
        trials: cfg.usize("trials")?,
        delta_grid: cfg.f64_list("delta_grid")?,
        base_seed: seed,
        tau_or_p: cfg.usize("tau_or_p")?,
        estimator: cfg.get("estimator")?.to_string(),
        block_k: cfg.usize_opt("block_k")?,
        sparsity: cfg.usize_opt("sparsity")?,
        constant_c: cfg.f64_or("constant_c", bounds::DEFAULT_UNIVERSAL_C)?,
        gain_grid: cfg.f64_list_or("gain_grid", vec![])?,
        true_gain_index: cfg.usize_opt("true_gain_index")?.unwrap_or(0),
    })
}

fn config_sidecar(experiment: &ExperimentConfig) -> Result<String> {
    #[derive(serde::Serialize)]
    struct Sidecar<'a> {
        version: &'a str,
        #[serde(flatten)]
        config: &'a ExperimentConfig,
    }
    serde_json::to_string_pretty(&Sidecar {
        version: env!("CARGO_PKG_VERSION"),
        config: experiment,
    })
    .map_err(|e| LabError::Numeric(format!("config serialization failed: {e}")))
}

fn run_mc_coverage(cfg: &Config, inv: &Invocation, seed: u64) -> Result<String> {
    let experiment = experiment_from_config(cfg, seed)?;
    let report = mc_coverage(&experiment)?;
    write_atomic(&inv.output_dir, "results.csv", &report.to_csv())?;
    write_atomic(&inv.output_dir, "config.json", &config_sidecar(&experiment)?)?;
    let worst = report
        .cells
        .iter()
        .map(|c| c.wilson_upper)
        .fold(0.0f64, f64::max);
    Ok(format!(
        "{} cells, worst wilson upper {:.4} -> results.csv, config.json",
        report.cells.len(),
        worst
    ))
}

fn run_rate(cfg: &Config, inv: &Invocation, seed: u64) -> Result<String> {
    let experiment = experiment_from_config(cfg, seed)?;
    let fit = rate_fit(&experiment)?;
    write_atomic(&inv.output_dir, "rate.csv", &fit.to_csv())?;
    write_atomic(&inv.output_dir, "config.json", &config_sidecar(&experiment)?)?;
    Ok(format!(
        "slope {:.4}, r2 {:.4} over {} horizons -> rate.csv, config.json",
        fit.slope,
        fit.r2,
        fit.medians_per_t.len()
    ))
}

fn run_tail(cfg: &Config, inv: &Invocation, seed: u64) -> Result<String> {
    let d = cfg.usize("matrix.d")?;
    let m = match cfg.get_opt("matrix.values") {
        None => DMatrix::identity(d, d),
        Some(_) => {
            let values = cfg.f64_list("matrix.values")?;
            if values.len() != d * d {
                return Err(LabError::Config(format!(
                    "matrix.values must have {} entries",
                    d * d
                )));
            }
            DMatrix::from_row_slice(d, d, &values)
        }
    };
    let noise = noise_from_config(cfg)?;
    let samples = cfg.usize("samples")?;
    let s_grid = cfg.f64_list("s_grid")?;
    let mut stream = derive_stream(seed, 0);
    let points = tail_compare(&m, &noise, samples, &s_grid, &mut stream)?;
    let mut csv = String::from("s,empirical_ccdf,hw_bound\n");
    for p in &points {
        csv.push_str(&format!(
            "{:.16e},{:.16e},{:.16e}\n",
            p.s, p.empirical_ccdf, p.hw_bound
        ));
    }
    write_atomic(&inv.output_dir, "tail.csv", &csv)?;
    let dominated = points
        .iter()
        .filter(|p| p.hw_bound < 1.0)
        .all(|p| p.empirical_ccdf <= p.hw_bound);
    Ok(format!(
        "{} grid points, dominance where bound < 1: {} -> tail.csv",
        points.len(),
        dominated
    ))
}

fn run_riccati(cfg: &Config, inv: &Invocation) -> Result<String> {
    let d_x = cfg.usize("ss.d_x")?;
    let d_y = cfg.usize("ss.d_y")?;
    let read_matrix = |key: &str, rows: usize, cols: usize| -> Result<DMatrix<f64>> {
        let values = cfg.f64_list(key)?;
        if values.len() != rows * cols {
            return Err(LabError::Config(format!(
                "key '{key}' must have {} entries",
                rows * cols
            )));
        }
        Ok(DMatrix::from_row_slice(rows, cols, &values))
    };
    let a = read_matrix("ss.a", d_x, d_x)?;
    let c = read_matrix("ss.c", d_y, d_x)?;
    let sigma_w = read_matrix("ss.sigma_w", d_x, d_x)?;
    let sigma_v = read_matrix("ss.sigma_v", d_y, d_y)?;
    let sol = riccati_fixed_point(
        &a,
        &c,
        &sigma_w,
        &sigma_v,
        RICCATI_DEFAULT_TOL,
        RICCATI_DEFAULT_MAX_ITER,
    )?;
    #[derive(serde::Serialize)]
    struct RiccatiJson {
        p_star: Vec<f64>,
        f_star: Vec<f64>,
        sigma_e: Vec<f64>,
        d_x: usize,
        d_y: usize,
        residual: f64,
        iterations: usize,
    }
    let flat = |m: &DMatrix<f64>| -> Vec<f64> {
        m.row_iter()
            .flat_map(|r| r.iter().copied().collect::<Vec<_>>())
            .collect()
    };
    let json = serde_json::to_string_pretty(&RiccatiJson {
        p_star: flat(&sol.p_star),
        f_star: flat(&sol.f_star),
        sigma_e: flat(&sol.sigma_e),
        d_x,
        d_y,
        residual: sol.residual,
        iterations: sol.iterations,
    })
    .map_err(|e| LabError::Numeric(format!("riccati serialization failed: {e}")))?;
    write_atomic(&inv.output_dir, "riccati.json", &json)?;
    Ok(format!(
        "converged in {} iterations, residual {:.3e} -> riccati.json",
        sol.iterations, sol.residual
    ))
}

/// Executes one invocation; the returned string is the human-readable summary
/// for standard output.
pub fn run(inv: &Invocation) -> Result<String> {
    let cfg = Config::load(&inv.config_path)?;
    match inv.subcommand {
        Subcommand::Simulate => run_simulate(&cfg, inv, resolve_seed(&cfg, inv)?),
        Subcommand::Identify => run_identify(&cfg, inv, resolve_seed(&cfg, inv)?),
        Subcommand::Bounds => run_bounds(&cfg, inv),
        Subcommand::McCoverage => run_mc_coverage(&cfg, inv, resolve_seed(&cfg, inv)?),
        Subcommand::Rate => run_rate(&cfg, inv, resolve_seed(&cfg, inv)?),
        Subcommand::Tail => run_tail(&cfg, inv, resolve_seed(&cfg, inv)?),
        Subcommand::Riccati => run_riccati(&cfg, inv),
    }
}
