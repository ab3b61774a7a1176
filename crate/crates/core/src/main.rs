use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use stokesnet::bie::SolverConfig;
use stokesnet::experiments::{self, ExperimentError, RtpConfig, ValidateConfig};
use stokesnet::io::{self, ExperimentConfig, IoError, NetworkFile};
use stokesnet::network::builders::lumped_grid_library;
use stokesnet::network::{ComponentLibrary, FieldReconstructor};
use stokesnet::scattering::ScatterConfig;
use stokesnet::C64;

#[derive(Parser)]
#[command(name = "stokesnet", version, about = "Stokes flow in 2D channel networks")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Relative GMRES tolerance.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    /// Boundary panels per channel width.
    #[arg(long, global = true)]
    panels_per_width: Option<f64>,
    /// Seed for randomised inputs (default 1).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for reports and CSV files (default: current directory).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Scattering matrix of one component, written as a library entry.
    Scatter {
        /// Component description (JSON); falls back to the config file.
        #[arg(long)]
        component: Option<PathBuf>,
        /// Library file to write.
        #[arg(long)]
        library: PathBuf,
        /// Add to an existing library instead of replacing it.
        #[arg(long)]
        append: bool,
        /// Accept straight runs shorter than the minimum, with a warning.
        #[arg(long)]
        lenient: bool,
    },
    /// Solve a network against a library.
    Assemble {
        /// Network description (JSON); falls back to the config file.
        #[arg(long)]
        network: Option<PathBuf>,
        /// Component library (JSON); falls back to the config file.
        #[arg(long)]
        library: Option<PathBuf>,
        /// Sample the reconstructed field on x0,x1,y0,y1,spacing (needs the
        /// component geometries inline in the network file).
        #[arg(long, value_delimiter = ',', num_args = 5)]
        field_grid: Option<Vec<f64>>,
    },
    /// Decay of a zero-flux inlet disturbance along a straight channel.
    RtpDecay {
        /// Length of the unit-width channel.
        #[arg(long, default_value_t = 10.0)]
        length: f64,
        /// Length of the longer channel used as a cross-check.
        #[arg(long, default_value_t = 20.0)]
        cross_length: f64,
    },
    /// Compare the assembled field with a direct solve of the whole network.
    Validate {
        /// Network with inline component geometries.
        #[arg(long)]
        network: Option<PathBuf>,
        /// Refuse full-domain solves with more boundary nodes than this.
        #[arg(long, default_value_t = stokesnet::validation::DEFAULT_MAX_UNKNOWNS)]
        max_unknowns: usize,
        /// Spacing of the comparison probe grid.
        #[arg(long, default_value_t = 0.2)]
        probe_spacing: f64,
    },
    /// Condition number of n×n grid assembly matrices.
    CondScaling {
        /// Library with a 4-port cross and a 2-port elbow; a lumped
        /// resistance library when absent.
        #[arg(long)]
        library: Option<PathBuf>,
        /// Library name of the 4-port cross.
        #[arg(long, default_value = "cross")]
        cross: String,
        /// Library name of the 2-port elbow.
        #[arg(long, default_value = "elbow")]
        elbow: String,
        /// Smallest grid size.
        #[arg(long, default_value_t = 1)]
        n_min: usize,
        /// Largest grid size.
        #[arg(long, default_value_t = 16)]
        n_max: usize,
    },
    /// Solve one n×n grid and report timings.
    GridDemo {
        /// Library with a 4-port cross and a 2-port elbow; a lumped
        /// resistance library when absent.
        #[arg(long)]
        library: Option<PathBuf>,
        /// Library name of the 4-port cross.
        #[arg(long, default_value = "cross")]
        cross: String,
        /// Library name of the 2-port elbow.
        #[arg(long, default_value = "elbow")]
        elbow: String,
        /// Grid size.
        #[arg(long, default_value_t = 5)]
        n: usize,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn category(&self) -> (&'static str, u8) {
        match self {
            CliError::Usage(_) => ("usage", 2),
            CliError::Io(IoError::Read { .. } | IoError::Write { .. }) => ("io", 3),
            CliError::Io(IoError::Parse { .. } | IoError::Invalid { .. }) => ("parse", 4),
            CliError::Io(IoError::Geometry { .. }) => ("geometry", 5),
            CliError::Io(IoError::Network { .. }) => ("network", 7),
            CliError::Experiment(e) => match e {
                ExperimentError::Geometry(_) => ("geometry", 5),
                ExperimentError::Solver(_) | ExperimentError::Poiseuille(_) | ExperimentError::Scattering(_) => {
                    ("solver", 6)
                }
                ExperimentError::Network(_) => ("network", 7),
                ExperimentError::Validation(_) => ("validation", 8),
                ExperimentError::Invalid(_) => ("usage", 2),
            },
        }
    }
}

struct Settings {
    file: ExperimentConfig,
    solver: SolverConfig,
    panels_per_width: Option<f64>,
    seed: u64,
    output_dir: PathBuf,
}

impl Settings {
    fn new(common: &Common) -> Result<Self, CliError> {
        let file = match &common.config {
            Some(p) => io::read_config(p)?,
            None => ExperimentConfig::default(),
        };
        let mut solver = file.solver.apply(SolverConfig::default());
        if let Some(t) = common.tolerance {
            solver.tolerance = t;
        }
        Ok(Self {
            panels_per_width: common.panels_per_width.or(file.panels_per_width),
            seed: common.seed.or(file.seed).unwrap_or(1),
            output_dir: common
                .output_dir
                .clone()
                .or_else(|| file.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out")),
            solver,
            file,
        })
    }

    fn path(&self, flag: &Option<PathBuf>, key: &Option<PathBuf>, name: &str) -> Result<PathBuf, CliError> {
        flag.clone()
            .or_else(|| key.clone())
            .ok_or_else(|| CliError::Usage(format!("no {name} file given (flag or config key '{name}')")))
    }

    fn out(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}

fn emit<T: Serialize>(settings: &Settings, name: &str, report: &T) -> Result<(), CliError> {
    let path = settings.out(name);
    io::write_json(&path, report)?;
    println!("{}", serde_json::to_string_pretty(report).unwrap_or_default());
    eprintln!("report written to {}", path.display());
    Ok(())
}

fn library_or_lumped(path: &Option<PathBuf>, cross: &str, elbow: &str) -> Result<ComponentLibrary, CliError> {
    match path {
        Some(p) => Ok(io::read_library(p)?),
        None => Ok(lumped_grid_library(
            cross,
            elbow,
            stokesnet::geometry::components::arm_length(1.0, 0.25, 4.0),
            1.0,
            1.0,
        )),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let settings = Settings::new(&cli.common)?;
    let scatter_cfg = |lenient: bool| ScatterConfig {
        solver: settings.solver,
        strict: !lenient,
        ..ScatterConfig::default()
    };
    settings.solver.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    match cli.command {
        Command::Scatter {
            component,
            library,
            append,
            lenient,
        } => {
            let path = settings.path(&component, &settings.file.component, "component")?;
            let (mut file, _) = io::read_component(&path)?;
            if let Some(ppw) = settings.panels_per_width {
                file.panels_per_width = ppw;
            }
            let geometry = file.build().map_err(|source| IoError::Geometry {
                path: path.clone(),
                source,
            })?;
            let (entry, _, report) = experiments::scatter_component(&geometry, &scatter_cfg(lenient))?;
            let mut lib = if append && library.exists() {
                io::read_library(&library)?
            } else {
                ComponentLibrary::new()
            };
            lib.insert(entry);
            io::write_library(&library, &lib)?;
            emit(&settings, &format!("scatter_{}.json", file.name), &report)
        }
        Command::Assemble {
            network,
            library,
            field_grid,
        } => {
            let npath = settings.path(&network, &settings.file.network, "network")?;
            let lpath = settings.path(&library, &settings.file.library, "library")?;
            let file = io::read_network(&npath)?;
            let lib = io::read_library(&lpath)?;
            let spec = file.spec();
            let (solution, report) = experiments::solve_network(&spec, &lib).map_err(|e| with_context(e, &npath))?;
            if let Some(g) = field_grid {
                write_field(&settings, &file, &npath, &spec, &solution, &g)?;
            }
            emit(&settings, "assemble.json", &report)
        }
        Command::RtpDecay { length, cross_length } => {
            let mut cfg = RtpConfig {
                length,
                cross_length,
                seed: settings.seed,
                ..RtpConfig::default()
            };
            if let Some(ppw) = settings.panels_per_width {
                cfg.panels_per_width = ppw;
            }
            cfg.solver = settings.file.solver.apply(cfg.solver);
            if let Some(t) = cli.common.tolerance {
                cfg.solver.tolerance = t;
            }
            let report = experiments::rtp_decay(&cfg)?;
            io::write_text(&settings.out("rtp_decay.csv"), &report.csv())?;
            #[derive(Serialize)]
            struct Summary {
                expected_slope: f64,
                velocity_slope: f64,
                vorticity_slope: f64,
                pressure_slope: f64,
                cross_check: f64,
                iterations: usize,
            }
            emit(
                &settings,
                "rtp_decay.json",
                &Summary {
                    expected_slope: report.expected_slope,
                    velocity_slope: report.velocity_slope,
                    vorticity_slope: report.vorticity_slope,
                    pressure_slope: report.pressure_slope,
                    cross_check: report.cross_check,
                    iterations: report.iterations,
                },
            )
        }
        Command::Validate {
            network,
            max_unknowns,
            probe_spacing,
        } => {
            let npath = settings.path(&network, &settings.file.network, "network")?;
            let file = io::read_network(&npath)?;
            let geometries = file.geometries(&npath)?;
            let cfg = ValidateConfig {
                scatter: scatter_cfg(false),
                panels_per_width: settings.panels_per_width.unwrap_or(4.0),
                max_unknowns,
                probe_spacing,
                ..ValidateConfig::default()
            };
            let report = experiments::validate(&file.spec(), &geometries, &cfg)?;
            emit(&settings, "validate.json", &report)
        }
        Command::CondScaling {
            library,
            cross,
            elbow,
            n_min,
            n_max,
        } => {
            if n_min == 0 || n_max < n_min {
                return Err(CliError::Usage("need 1 ≤ n_min ≤ n_max".into()));
            }
            let lib = library_or_lumped(&library, &cross, &elbow)?;
            let ns: Vec<usize> = (n_min..=n_max).collect();
            let report = experiments::cond_scaling(&lib, &cross, &elbow, &ns)?;
            io::write_text(&settings.out("cond_scaling.csv"), &report.csv())?;
            emit(&settings, "cond_scaling.json", &report)
        }
        Command::GridDemo {
            library,
            cross,
            elbow,
            n,
        } => {
            if n == 0 {
                return Err(CliError::Usage("n must be positive".into()));
            }
            let lib = library_or_lumped(&library, &cross, &elbow)?;
            let (spec, report) = experiments::grid_demo(&lib, &cross, &elbow, n)?;
            io::write_json(&settings.out(&format!("grid_{n}_network.json")), &NetworkFile::from_spec(&spec))?;
            emit(&settings, &format!("grid_{n}.json"), &report)
        }
    }
}

fn with_context(e: ExperimentError, path: &Path) -> CliError {
    match e {
        ExperimentError::Network(source) => CliError::Io(IoError::Network {
            path: path.to_path_buf(),
            source,
        }),
        other => CliError::Experiment(other),
    }
}

fn write_field(
    settings: &Settings,
    file: &NetworkFile,
    path: &Path,
    spec: &stokesnet::network::NetworkSpec,
    solution: &stokesnet::network::NetworkSolution,
    grid: &[f64],
) -> Result<(), CliError> {
    let (x0, x1, y0, y1, h) = (grid[0], grid[1], grid[2], grid[3], grid[4]);
    if !(h > 0.0 && x1 >= x0 && y1 >= y0) {
        return Err(CliError::Usage("field grid must be x0,x1,y0,y1,spacing with spacing > 0".into()));
    }
    let geometries = file.geometries(path)?;
    let (_, bases) = experiments::scatter_all(&geometries, &ScatterConfig {
        solver: settings.solver,
        ..ScatterConfig::default()
    })?;
    let recon = FieldReconstructor::new(spec, solution, &bases).map_err(|e| with_context(e.into(), path))?;
    let nx = ((x1 - x0) / h).floor() as usize;
    let ny = ((y1 - y0) / h).floor() as usize;
    let mut rows = Vec::new();
    for i in 0..=nx {
        for j in 0..=ny {
            let z = C64::new(x0 + i as f64 * h, y0 + j as f64 * h);
            // points outside the network or too close to a wall are omitted
            if let Ok(s) = recon.sample(z) {
                rows.push(vec![z.re, z.im, s.velocity.re, s.velocity.im, s.pressure, s.vorticity]);
            }
        }
    }
    io::write_text(&settings.out("field.csv"), &io::csv(&["x", "y", "u", "v", "p", "vorticity"], &rows))?;
    Ok(())
}

fn report_error(category: &str, code: u8, message: String) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": category, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report_error("usage", 2, e.render().to_string().trim().to_string()),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (category, code) = e.category();
            report_error(category, code, e.to_string())
        }
    }
}
