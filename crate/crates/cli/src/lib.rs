//! The `gendev` command-line tool.
//!
//! Every subcommand reads a problem configuration (see [`config`]) and
//! writes its artifact to `--out` or standard output. Exit codes: 0 on
//! success, 1 on invalid input, 2 when the numerical pipeline fails.

pub mod config;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gendev::fundeq::{json_array, json_f64};
use gendev::reconstruct::{
    path_independence_audit, reconstruct_grid, reconstruct_point, write_csv, write_json, write_obj, CurvePolicy,
    GridSpec,
};
use gendev::transport::{develop, read_curve_csv, write_curve_csv, FrameTransport};
use gendev::variation::{integrate_base_variation, integrate_gvariation, verify_ansatz, InducedFamily};
use gendev::{Curve, DevelopOptions, Method, Problem, Seed};
use nalgebra::DVector;
use thiserror::Error;

use crate::config::{parse_config, parse_counts, ConfigError, Options, ProblemConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Core(#[from] gendev::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numeric() => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "gendev", version, about = "Generalized developments and immersion reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Problem configuration file.
    #[arg(long)]
    config: PathBuf,
    /// RK4 step (overrides `[options] step`).
    #[arg(long)]
    step: Option<f64>,
    /// Pass/fail tolerance of the report (overrides `[options] tol`).
    #[arg(long)]
    tol: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classical development of a curve in T_pM onto M; writes a trajectory CSV.
    Develop {
        #[command(flatten)]
        common: Common,
        /// CSV `t,x1,..,xn`: a curve in T_pM in orthonormal-frame coefficients.
        #[arg(long)]
        curve: PathBuf,
    },
    /// Develops a curve in T_pM onto M, then its generalized development into the ambient space.
    Gdevelop {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        curve: PathBuf,
    },
    /// Transports a vector of T_pM (or T_pM ⊕ V_p) along a chart curve.
    Transport {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        curve: PathBuf,
        /// Comma-separated chart components at the curve's start.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        vector: Vec<f64>,
    },
    /// Gauss, Codazzi and Ricci residuals at the end of a chart curve; writes JSON.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        curve: PathBuf,
    },
    /// Checks the variation ansatz along the `[family]` curve family; writes JSON.
    Variation {
        #[command(flatten)]
        common: Common,
    },
    /// Reconstructs the immersion on a grid; writes OBJ, CSV or JSON.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Node counts `AxB` (overrides `[options] counts`).
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        policy: Option<String>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Path-independence audit: develops random curves to one target; writes JSON.
    Audit {
        #[command(flatten)]
        common: Common,
        /// RNG seed (overrides `[options] seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated target point (overrides `[options] target`).
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        target: Option<Vec<f64>>,
        /// Number of curves (overrides `[options] k`).
        #[arg(long)]
        k: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Obj,
    Csv,
    Json,
}

/// Runs the tool on `argv` (including the program name) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

struct Loaded {
    problem: Problem,
    config: ProblemConfig,
    options: Options,
    step: f64,
    tol: Option<f64>,
    out: Option<PathBuf>,
}

impl Loaded {
    fn method(&self) -> Method {
        self.options.method
    }

    fn develop_options(&self) -> DevelopOptions {
        DevelopOptions {
            method: self.method(),
            drift_bound: Some(self.options.drift_bound),
            reorthonormalize: false,
        }
    }

    /// `"step": .., "tol": ..` for reports.
    fn echo(&self, tol: f64) -> String {
        format!("\"step\": {}, \"tol\": {}", json_f64(self.step), json_f64(tol))
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => fs::write(path, text).map_err(|source| io_error(path, source)),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io { path: path.display().to_string(), source }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| io_error(path, source))
}

fn load(common: Common) -> Result<Loaded> {
    let text = read(&common.config)?;
    let config = parse_config(&text)?;
    let problem = config.problem()?;
    let mut options = config.options()?;
    if let Some(step) = common.step {
        if !(step > 0.0 && step.is_finite()) {
            return Err(CliError::Usage(format!("--step must be positive, got {step}")));
        }
        options.method = Method::Rk4 { step };
    }
    let step = match options.method {
        Method::Rk4 { step } => step,
        Method::Dopri5 { .. } => f64::NAN,
    };
    Ok(Loaded {
        problem,
        config,
        tol: common.tol.or(options.tol),
        options,
        step,
        out: common.out,
    })
}

fn load_curve(path: &Path) -> Result<Curve> {
    Ok(read_curve_csv(&read(path)?)?)
}

fn point_seed(problem: &Problem, what: &str) -> Result<gendev::PointSeed> {
    match &problem.seed {
        Seed::Point(ps) => Ok(ps.clone()),
        Seed::Submanifold(_) => Err(CliError::Usage(format!("{what} needs a [seed] section (a point seed)"))),
    }
}

/// Classical development of `c'` from `p` along the orthonormal frame at `p`.
fn base_development(l: &Loaded, c: &Curve) -> Result<gendev::DevelopmentResult> {
    let ps = point_seed(&l.problem, "develop")?;
    if c.dim() != l.problem.n() {
        return Err(CliError::Usage(format!("curve has dimension {}, base has {}", c.dim(), l.problem.n())));
    }
    let (et, _) = l.problem.base_frames(&ps.p)?;
    let v = |t: f64| c.velocity(t).map(DVector::from_vec);
    Ok(develop(&l.problem.base, &ps.p, &et, v, &c.breakpoints(), &l.develop_options())?)
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Develop { common, curve } => {
            let mut l = load(common)?;
            if let Some(tol) = l.tol {
                l.options.drift_bound = tol;
            }
            let c = load_curve(&curve)?;
            let dev = base_development(&l, &c)?;
            l.emit(&write_curve_csv(dev.points(), l.problem.n()))
        }
        Command::Gdevelop { common, curve } => {
            let mut l = load(common)?;
            if let Some(tol) = l.tol {
                l.options.drift_bound = tol;
            }
            let c = load_curve(&curve)?;
            let base = base_development(&l, &c)?;
            let (ts, xs): (Vec<f64>, Vec<Vec<f64>>) = base.points().unzip();
            let gamma = Curve::from_samples(ts, xs)?;
            let res = reconstruct_point(&l.problem, &gamma, &l.develop_options())?;
            l.emit(&write_curve_csv(res.development.points(), l.problem.dim()))
        }
        Command::Transport { common, curve, vector } => {
            let l = load(common)?;
            let c = load_curve(&curve)?;
            transport(&l, &c, &vector)
        }
        Command::Check { common, curve } => {
            let l = load(common)?;
            let c = load_curve(&curve)?;
            let res = reconstruct_point(&l.problem, &c, &l.develop_options())?;
            let tol = l.tol.unwrap_or(1e-7);
            let json = format!(
                "{{{}, {}, \"max\": {}, \"pass\": {}}}\n",
                l.echo(tol),
                res.residuals.json_fields(),
                json_f64(res.residuals.max()),
                res.residuals.max() <= tol
            );
            l.emit(&json)
        }
        Command::Variation { common } => {
            let l = load(common)?;
            variation(&l)
        }
        Command::Reconstruct { common, grid, policy, format, jobs } => {
            let l = load(common)?;
            reconstruct(&l, grid, policy, format, jobs)
        }
        Command::Audit { common, seed, target, k } => {
            let l = load(common)?;
            let target = target
                .or_else(|| l.options.target.clone())
                .ok_or_else(|| CliError::Usage("audit needs --target or `[options] target`".into()))?;
            let k = k.unwrap_or(l.options.k);
            let rng_seed = seed.unwrap_or(l.options.rng_seed);
            let rep = path_independence_audit(&l.problem, &target, k, rng_seed, &l.develop_options())?;
            let tol = l.tol.unwrap_or(1e-6);
            let body = rep.to_json();
            let json = format!(
                "{{{}, \"seed\": {rng_seed}, \"pass\": {}, {}\n",
                l.echo(tol),
                rep.spread <= tol,
                &body[1..]
            );
            l.emit(&json)
        }
    }
}

fn transport(l: &Loaded, c: &Curve, vector: &[f64]) -> Result<()> {
    let (n, s) = (l.problem.n(), l.problem.s());
    if vector.len() != n && vector.len() != n + s {
        return Err(CliError::Usage(format!(
            "--vector needs {n} tangent components or {} tangent and bundle components, got {}",
            n + s,
            vector.len()
        )));
    }
    if c.dim() != n {
        return Err(CliError::Usage(format!("curve has dimension {}, base has {n}", c.dim())));
    }
    let x0 = c.start()?;
    let x1 = c.end()?;
    let (et, eb) = l.problem.base_frames(&x0)?;
    let frames = FrameTransport::integrate(&l.problem.base, Some(&l.problem.bundle), c, &et, &eb, l.method())?;
    let (et1, eb1) = frames.frames(1.0);
    let w = DVector::from_column_slice(vector);
    let mut out = gendev::tensor::inverse(&et, "tangent frame").map(|m| &et1 * m * w.rows(0, n))?;
    let mut norms = [l.problem.base.eval(&x0)?, l.problem.base.eval(&x1)?];
    if vector.len() == n + s {
        let fibre = gendev::tensor::inverse(&eb, "bundle frame").map(|m| &eb1 * m * w.rows(n, s))?;
        out = DVector::from_iterator(n + s, out.iter().chain(fibre.iter()).copied());
        norms = [l.problem.block_metric(&x0)?, l.problem.block_metric(&x1)?];
    }
    let norm = |g: &nalgebra::DMatrix<f64>, v: &DVector<f64>| (v.transpose() * g * v)[(0, 0)].sqrt();
    let (n0, n1) = (norm(&norms[0], &w), norm(&norms[1], &out));
    let tol = l.tol.unwrap_or(1e-9);
    let defect = (n1 - n0).abs() / n0.max(1.0);
    let json = format!(
        "{{{}, \"start\": {}, \"end\": {}, \"vector\": {}, \"transported\": {}, \"norm_start\": {}, \"norm_end\": {}, \"pass\": {}}}\n",
        l.echo(tol),
        json_array(&x0),
        json_array(&x1),
        json_array(vector),
        json_array(out.as_slice()),
        json_f64(n0),
        json_f64(n1),
        defect <= tol
    );
    l.emit(&json)
}

fn variation(l: &Loaded) -> Result<()> {
    let spec = l.config.family()?;
    let method = l.method();
    let induced = InducedFamily::new(l.problem.clone(), spec.family()?, spec.seed.clone(), method);
    let family = spec.family()?;
    let mut worst: Option<gendev::variation::AnsatzReport> = None;
    for &u in &spec.params {
        let base = integrate_base_variation(&l.problem, &family, u, &spec.seed, method)?;
        let amb = integrate_gvariation(&l.problem, &induced, u, &spec.seed, method)?;
        let r = verify_ansatz(&base, &amb, &induced)?;
        worst = Some(match worst {
            None => r,
            Some(w) => gendev::variation::AnsatzReport {
                max_u_alpha: w.max_u_alpha.max(r.max_u_alpha),
                max_u_diff: w.max_u_diff.max(r.max_u_diff),
                max_xab_diff: w.max_xab_diff.max(r.max_xab_diff),
                max_xalphabeta_diff: w.max_xalphabeta_diff.max(r.max_xalphabeta_diff),
                max_xaalpha_diff: w.max_xaalpha_diff.max(r.max_xaalpha_diff),
            },
        });
    }
    let rep = worst.ok_or_else(|| CliError::Usage("[family] u lists no parameters".into()))?;
    let tol = l.tol.unwrap_or(1e-7);
    let body = rep.to_json();
    let json = format!(
        "{{{}, \"u\": {}, \"max\": {}, \"pass\": {}, {}\n",
        l.echo(tol),
        json_array(&spec.params),
        json_f64(rep.max()),
        rep.max() <= tol,
        &body[1..]
    );
    l.emit(&json)
}

fn reconstruct(l: &Loaded, grid: Option<String>, policy: Option<String>, format: Option<Format>, jobs: usize) -> Result<()> {
    let counts = match grid {
        Some(g) => parse_counts(&g).map_err(CliError::Usage)?,
        None => l.options.counts.unwrap_or([9, 9]),
    };
    let submanifold = matches!(l.problem.seed, Seed::Submanifold(_));
    let policy: CurvePolicy = match policy.or_else(|| l.options.policy.clone()) {
        Some(p) => p.parse().map_err(|e: gendev::Error| CliError::Usage(e.to_string()))?,
        None if submanifold => CurvePolicy::Normal,
        None => CurvePolicy::Radial,
    };
    let kind = l.options.grid.as_deref().unwrap_or("rect");
    let [r1, r2] = l.options.ranges;
    let missing: Vec<String> = [("range_1", r1), ("range_2", r2)]
        .iter()
        .filter(|(_, r)| r.is_none())
        .map(|(k, _)| k.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(ConfigError::MissingKeys { section: "options".into(), keys: missing }.into());
    }
    let (r1, r2) = (r1.unwrap(), r2.unwrap());
    let spec = match kind {
        "rect" => GridSpec::rect([r1, r2], counts),
        "polar" => GridSpec::polar(r1, r2, counts),
        other => return Err(CliError::Usage(format!("grid must be rect or polar, got `{other}`"))),
    };
    let sample = reconstruct_grid(&l.problem, &spec, policy, &l.develop_options(), jobs)?;
    let format = format.unwrap_or_else(|| {
        match l.out.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some("csv") => Format::Csv,
            Some("json") => Format::Json,
            _ => Format::Obj,
        }
    });
    let tol = l.tol.unwrap_or(1e-7);
    let text = match format {
        Format::Obj => format!("# gendev reconstruct, step {}, policy {}\n{}", l.step, policy.name(), write_obj(&sample)?),
        Format::Csv => write_csv(&sample),
        Format::Json => {
            let worst = sample
                .records
                .iter()
                .filter_map(|r| r.result.as_ref().ok())
                .map(|r| r.residuals.max())
                .fold(0.0, f64::max);
            let body = write_json(&sample);
            format!(
                "{{{}, \"valid\": {}, \"max_residual\": {}, \"pass\": {}, {}",
                l.echo(tol),
                sample.valid_count(),
                json_f64(worst),
                worst <= tol && sample.valid_count() == sample.records.len(),
                &body[1..]
            )
        }
    };
    l.emit(&text)
}
