use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "excap", version, about = "Capacities of paths for Gaussian random fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand. Not every command reads every flag.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Kernel JSON file.
    #[arg(long)]
    pub kernel: Option<PathBuf>,
    /// Path JSON file; alternative to --a/--b.
    #[arg(long)]
    pub path: Option<PathBuf>,
    /// Start point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub a: Option<Vec<f64>>,
    /// End point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub b: Option<Vec<f64>>,
    /// Grid size (default 401).
    #[arg(long)]
    pub n: Option<usize>,
    /// Solver tolerance (default 1e-9).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Evaluation grid for conditions and shapes (default 2001).
    #[arg(long)]
    pub t_grid: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON report destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// CSV destination.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Minimal energy and capacity of a path.
    Capacity {
        #[command(flatten)]
        common: Common,
        /// Frank–Wolfe iteration cap.
        #[arg(long)]
        max_iters: Option<usize>,
        /// Skip the active-set polish after Frank–Wolfe.
        #[arg(long)]
        no_polish: bool,
    },
    /// Most likely shape x(t) of the field on [a, b].
    Shape {
        #[command(flatten)]
        common: Common,
        /// Certificate tolerance relative to the energy.
        #[arg(long, default_value_t = 1e-6)]
        cert_tol: f64,
    },
    /// Critical lengths and regime classification.
    Phase {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        which: Which,
        #[arg(long, allow_hyphen_values = true)]
        lo: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        hi: Option<f64>,
        /// Interval length for --which regime.
        #[arg(long)]
        length: Option<f64>,
    },
    /// Capacity growth on long intervals.
    Asymptotics {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        lengths: Vec<f64>,
        /// Grid size of the Riesz limit for long memory.
        #[arg(long, default_value_t = 801)]
        riesz_n: usize,
    },
    /// Brownian sheet on the staircase or the straight path.
    Sheet {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, value_enum, default_value_t = Route::Staircase)]
        route: Route,
    },
    /// Heuristic path search, or the straight-line check for isotropic kernels.
    Search {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Mode::Search)]
        mode: Mode,
        /// PathSearchConfig JSON file; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        control_points: Option<usize>,
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Monte Carlo exceedance probabilities on the discretized path.
    Mc {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        levels: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Minimal Riesz energy on [0, 1].
    Riesz {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        beta: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Capacity { .. } => "capacity",
            Command::Shape { .. } => "shape",
            Command::Phase { .. } => "phase",
            Command::Asymptotics { .. } => "asymptotics",
            Command::Sheet { .. } => "sheet",
            Command::Search { .. } => "search",
            Command::Mc { .. } => "mc",
            Command::Riesz { .. } => "riesz",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Capacity { common, .. }
            | Command::Shape { common, .. }
            | Command::Phase { common, .. }
            | Command::Asymptotics { common, .. }
            | Command::Sheet { common, .. }
            | Command::Search { common, .. }
            | Command::Mc { common, .. }
            | Command::Riesz { common, .. } => common,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    A1,
    A2,
    Regime,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Staircase,
    Straight,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Search,
    StraightCheck,
}
