use std::collections::BTreeMap;
use std::fs;
use std::path::{Path as FsPath, PathBuf};

use excap::analysis::{self, Critical, RegimeResult};
use excap::asymptotics;
use excap::capacity::{extract_atoms, min_energy_on_grid, AtomDecomposition, CapacityReport, SolverOptions};
use excap::geometry::{discretize, sheet_staircase, straight_line, Path};
use excap::kernel::{Kernel, KernelKind};
use excap::multidim::{self, EndpointCondition, PathSearchConfig};
use excap::simulate::{self, McEstimate};
use excap::report::to_json;
use excap::{DEFAULT_ATOM_EPS, DEFAULT_N, DEFAULT_TOL, DEFAULT_T_GRID};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::{Command, Common, Mode, Route, Which};

/// Everything a run resolved from its flags and files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Kernel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<Path>,
    pub n: usize,
    pub tol: f64,
    pub t_grid: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Command-specific settings.
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report<T> {
    pub command: String,
    pub config: RunConfig,
    pub result: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    pub report: CapacityReport,
    pub atoms: AtomDecomposition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeResult {
    pub report: CapacityReport,
    pub shape: analysis::ShapeCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalResult {
    pub which: Critical,
    pub value: f64,
    pub bracket: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetResult {
    pub condition: EndpointCondition,
    pub report: CapacityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RieszResult {
    pub beta: f64,
    pub uniform_energy: f64,
    pub capacity_bounds: (f64, f64),
    pub report: CapacityReport,
}

/// Why a run stopped.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags or unreadable inputs.
    Usage(String),
    Lib(excap::Error),
    /// Output could not be written.
    Output(String),
}

impl From<excap::Error> for Failure {
    fn from(e: excap::Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    pub fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Lib(e) => e.kind(),
            Failure::Output(_) => "output",
        }
    }

    pub fn exit_code(&self) -> i32 {
        use excap::Error::*;
        match self {
            Failure::Usage(_) => 2,
            Failure::Output(_) => 1,
            Failure::Lib(e) => match e {
                Domain(_) | SingularDiagonal | DegeneratePath(_) | DimensionMismatch { .. } | InvalidInput(_)
                | Precondition(_) | Json(_) => 2,
                NonConvergence { .. } => 3,
                UncertifiedMeasure { .. }
                | NotInRegime { .. }
                | NoSignChange { .. }
                | Divergent(_)
                | DegenerateCorrelation(_)
                | CholeskyFailure { .. } => 1,
            },
        }
    }

    pub fn message(&self) -> String {
        match self {
            Failure::Usage(m) | Failure::Output(m) => m.clone(),
            Failure::Lib(e) => e.to_string(),
        }
    }
}

/// Finished output of a run. `warning` carries a failure that still produced
/// a report, such as non-convergence.
pub struct Output {
    pub json: String,
    pub csv: Option<String>,
    pub warning: Option<Failure>,
}

type Res<T> = std::result::Result<T, Failure>;

fn read_json<T: serde::de::DeserializeOwned>(file: &FsPath, what: &str) -> Res<T> {
    let text = fs::read_to_string(file)
        .map_err(|e| Failure::Usage(format!("cannot read {what} file {}: {e}", file.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("cannot parse {what} file {}: {e}", file.display())))
}

fn display(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

struct Ctx {
    config: RunConfig,
}

impl Ctx {
    fn new(c: &Common) -> Res<Self> {
        let n = c.n.unwrap_or(DEFAULT_N);
        if n < 2 {
            return Err(Failure::Usage(format!("--n must be at least 2, got {n}")));
        }
        let tol = c.tol.unwrap_or(DEFAULT_TOL);
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Failure::Usage(format!("--tol must be positive, got {tol}")));
        }
        let t_grid = c.t_grid.unwrap_or(DEFAULT_T_GRID);
        if t_grid < 2 {
            return Err(Failure::Usage(format!("--t-grid must be at least 2, got {t_grid}")));
        }
        let kernel = c.kernel.as_deref().map(|f| read_json::<Kernel>(f, "kernel")).transpose()?;
        let path = match (&c.path, &c.a, &c.b) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(Failure::Usage("give either --path or --a/--b, not both".into()))
            }
            (Some(f), None, None) => Some(read_json::<Path>(f, "path")?),
            (None, Some(a), Some(b)) => Some(straight_line(a, b)?),
            (None, None, None) => None,
            (None, _, _) => return Err(Failure::Usage("--a and --b must be given together".into())),
        };
        Ok(Self {
            config: RunConfig {
                kernel_file: display(&c.kernel),
                kernel,
                path_file: display(&c.path),
                path,
                n,
                tol,
                t_grid,
                seed: c.seed,
                params: BTreeMap::new(),
            },
        })
    }

    fn kernel(&self) -> Res<&Kernel> {
        self.config.kernel.as_ref().ok_or_else(|| Failure::Usage("--kernel is required".into()))
    }

    fn path(&self) -> Res<&Path> {
        self.config
            .path
            .as_ref()
            .ok_or_else(|| Failure::Usage("a path is required (--path or --a/--b)".into()))
    }

    /// `[a, b]` for one-dimensional commands.
    fn interval(&self) -> Res<(f64, f64)> {
        let p = self.path()?;
        if p.dim() != 1 || p.vertices().len() != 2 {
            return Err(Failure::Usage("this command needs a one-dimensional interval --a A --b B".into()));
        }
        Ok((p.start()[0], p.end()[0]))
    }

    fn param(&mut self, key: &str, v: impl Serialize) {
        self.config.params.insert(key.into(), serde_json::to_value(v).expect("plain values serialize"));
    }

    fn finish<T: Serialize>(self, command: &str, result: &T, csv: Option<String>, warning: Option<Failure>) -> Res<Output> {
        let report = Report { command: command.into(), config: self.config, result };
        let json = to_json(&report).map_err(|e| Failure::Output(e.to_string()))?;
        Ok(Output { json, csv, warning })
    }
}

/// A solve that may have stopped early; non-convergence keeps the best report.
fn solve(kernel: &Kernel, path: &Path, n: usize, opts: &SolverOptions) -> Res<(CapacityReport, Option<Failure>)> {
    if path.dim() != kernel.dim() {
        return Err(excap::Error::DimensionMismatch { expected: kernel.dim(), got: path.dim() }.into());
    }
    let grid = discretize(path, n)?;
    match min_energy_on_grid(kernel, &grid, opts) {
        Ok(r) => Ok((r, None)),
        Err(excap::Error::NonConvergence { max_iters, best }) => {
            let report = (*best).clone();
            Ok((report, Some(Failure::Lib(excap::Error::NonConvergence { max_iters, best }))))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn run(cmd: &Command) -> Res<Output> {
    let mut ctx = Ctx::new(cmd.common())?;
    let name = cmd.name();
    match cmd {
        Command::Capacity { max_iters, no_polish, .. } => {
            let opts = SolverOptions {
                max_iters: *max_iters,
                polish: !no_polish,
                ..SolverOptions::with_tol(ctx.config.tol)
            };
            ctx.param("max_iters", max_iters);
            ctx.param("polish", !no_polish);
            let (report, warning) = solve(ctx.kernel()?, ctx.path()?, ctx.config.n, &opts)?;
            let atoms = extract_atoms(&report.measure, DEFAULT_ATOM_EPS);
            let csv = report.measure.to_csv();
            ctx.finish(name, &CapacityResult { report, atoms }, Some(csv), warning)
        }
        Command::Shape { cert_tol, .. } => {
            let (a, b) = ctx.interval()?;
            ctx.param("cert_tol", cert_tol);
            let opts = SolverOptions::with_tol(ctx.config.tol);
            let (report, warning) = solve(ctx.kernel()?, ctx.path()?, ctx.config.n, &opts)?;
            if let Some(w) = warning {
                return Err(w);
            }
            let shape = analysis::limiting_shape(ctx.kernel()?, a, b, &report.measure, ctx.config.t_grid, *cert_tol)?;
            let csv = shape.to_csv();
            ctx.finish(name, &ShapeResult { report, shape }, Some(csv), None)
        }
        Command::Phase { which, lo, hi, length, .. } => {
            let kernel = ctx.kernel()?.clone();
            ctx.param("which", format!("{which:?}").to_lowercase());
            match which {
                Which::Regime => {
                    let a = length.ok_or_else(|| Failure::Usage("--which regime needs --length".into()))?;
                    ctx.param("length", a);
                    let r: RegimeResult = analysis::classify_regime(&kernel, a, ctx.config.t_grid)?;
                    ctx.finish(name, &r, None, None)
                }
                Which::A1 | Which::A2 => {
                    let which = if *which == Which::A1 { Critical::A1 } else { Critical::A2 };
                    let default = analysis::default_bracket(&kernel, which);
                    let bracket = (lo.unwrap_or(default.0), hi.unwrap_or(default.1));
                    ctx.param("bracket", bracket);
                    let value = analysis::critical_length(&kernel, which, bracket, ctx.config.tol)?;
                    ctx.finish(name, &CriticalResult { which, value, bracket }, None, None)
                }
            }
        }
        Command::Asymptotics { lengths, riesz_n, .. } => {
            let kernel = ctx.kernel()?.clone();
            ctx.param("lengths", lengths);
            let (n, tol) = (ctx.config.n, ctx.config.tol);
            let report = if let KernelKind::LongMemory { .. } = kernel.kind() {
                ctx.param("riesz_n", riesz_n);
                asymptotics::long_memory_report(&kernel, lengths, n, tol, *riesz_n)?
            } else {
                asymptotics::short_memory_report(&kernel, lengths, n, tol)?
            };
            let csv = report.to_csv();
            ctx.finish(name, &report, Some(csv), None)
        }
        Command::Sheet { d, route, .. } => {
            if ctx.config.kernel.is_some() || ctx.config.path.is_some() {
                return Err(Failure::Usage("sheet builds its own kernel and path".into()));
            }
            let kernel = Kernel::brownian_sheet(*d)?;
            let stairs = sheet_staircase(*d)?;
            let path = match route {
                Route::Staircase => stairs,
                Route::Straight => straight_line(stairs.start(), stairs.end())?,
            };
            ctx.param("d", d);
            ctx.param("route", format!("{route:?}").to_lowercase());
            let condition = multidim::check_endpoint_condition(&kernel, &path, ctx.config.t_grid)?;
            let (report, warning) = solve(&kernel, &path, ctx.config.n, &SolverOptions::with_tol(ctx.config.tol))?;
            ctx.config.kernel = Some(kernel);
            ctx.config.path = Some(path);
            let csv = report.measure.to_csv();
            ctx.finish(name, &SheetResult { condition, report }, Some(csv), warning)
        }
        Command::Search { mode, config, control_points, scale, restarts, iters, common } => {
            let mut cfg: PathSearchConfig = match config {
                Some(f) => read_json(f, "search config")?,
                None => PathSearchConfig::default(),
            };
            if let Some(v) = control_points {
                cfg.control_points = *v;
            }
            if let Some(v) = scale {
                cfg.perturbation_scale = *v;
            }
            if let Some(v) = restarts {
                cfg.restarts = *v;
            }
            if let Some(v) = iters {
                cfg.iters = *v;
            }
            if let Some(v) = common.seed {
                cfg.seed = v;
            }
            if let Some(v) = common.n {
                cfg.grid_n = v;
            }
            if let Some(v) = common.tol {
                cfg.tol = v;
            }
            ctx.config.n = cfg.grid_n;
            ctx.config.tol = cfg.tol;
            ctx.config.seed = Some(cfg.seed);
            ctx.param("search", cfg);
            ctx.param("mode", format!("{mode:?}").to_lowercase());
            let kernel = ctx.kernel()?.clone();
            let path = ctx.path()?;
            if path.vertices().len() != 2 {
                return Err(Failure::Usage("search takes its endpoints from --a/--b".into()));
            }
            let (a, b) = (path.start().to_vec(), path.end().to_vec());
            match mode {
                Mode::Search => {
                    let r = multidim::path_search(&kernel, &a, &b, &cfg)?;
                    let csv = r.trace_csv();
                    ctx.finish(name, &r, Some(csv), None)
                }
                Mode::StraightCheck => {
                    let r = multidim::straight_line_optimality_check(&kernel, &a, &b, &cfg)?;
                    let rows: Vec<[f64; 2]> =
                        r.perturbed_energies.iter().enumerate().map(|(i, &e)| [i as f64, e]).collect();
                    let csv = excap::report::to_csv(&["restart", "energy"], rows.iter().map(|r| r.as_slice()));
                    ctx.finish(name, &r, Some(csv), None)
                }
            }
        }
        Command::Mc { levels, samples, .. } => {
            let seed = ctx.config.seed.unwrap_or(0);
            ctx.config.seed = Some(seed);
            ctx.param("levels", levels);
            ctx.param("samples", samples);
            let grid = discretize(ctx.path()?, ctx.config.n)?;
            let est: Vec<McEstimate> = simulate::exceedance_sweep(ctx.kernel()?, &grid.points, levels, *samples, seed)?;
            let csv = simulate::sweep_csv(&est);
            ctx.finish(name, &est, Some(csv), None)
        }
        Command::Riesz { beta, .. } => {
            if ctx.config.path.is_some() {
                return Err(Failure::Usage("riesz works on [0, 1] and takes no path".into()));
            }
            let kernel = Kernel::riesz(*beta, 1)?;
            let path = straight_line(&[0.0], &[1.0])?;
            let (report, warning) = solve(&kernel, &path, ctx.config.n, &SolverOptions::with_tol(ctx.config.tol))?;
            ctx.config.kernel = Some(kernel);
            ctx.config.path = Some(path);
            let result = RieszResult {
                beta: *beta,
                uniform_energy: asymptotics::riesz_uniform_energy(*beta),
                capacity_bounds: asymptotics::riesz_bounds(*beta),
                report,
            };
            let csv = result.report.measure.to_csv();
            ctx.finish(name, &result, Some(csv), warning)
        }
    }
}

/// Error body written to stderr.
pub fn error_json(f: &Failure) -> String {
    json!({ "error": f.kind(), "message": f.message() }).to_string()
}
