//! File formats: component descriptions, scattering libraries, networks and
//! experiment configurations (JSON), plus CSV emission.
//!
//! Library numbers are stored as `{:.16e}` strings so that every double
//! round-trips exactly, including infinite straight runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bie::SolverConfig;
use crate::geometry::components::{arm_length, cross_spec, elbow_spec, straight_spec, YLayout};
use crate::geometry::{build_component, ArmSpec, CapStyle, ComponentGeometry, GeometryError, Placement, Port, SkeletonSpec};
use crate::network::{ComponentLibrary, LibraryEntry, NetworkError, NetworkSpec, PortRef};
use crate::scattering::ScatteringMatrix;
use crate::C64;

pub const LIBRARY_FORMAT: &str = "stokesnet-library";
pub const LIBRARY_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Write { path: PathBuf, message: String },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: field '{field}': {message}")]
    Invalid {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("{path}: {source}")]
    Geometry {
        path: PathBuf,
        #[source]
        source: GeometryError,
    },
    #[error("{path}: {source}")]
    Network {
        path: PathBuf,
        #[source]
        source: NetworkError,
    },
}

fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::Read {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Parses JSON text; errors carry the line and column and, through serde,
/// the offending field name.
pub fn parse_json<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T, IoError> {
    serde_json::from_str(text).map_err(|e| IoError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    parse_json(&read_text(path)?, path)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| IoError::Write {
            path: dir.to_path_buf(),
            message: e.to_string(),
        })?;
    }
    std::fs::write(path, text).map_err(|e| IoError::Write {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| IoError::Write {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write_text(path, &text)
}

/// Full round-trip representation of a double.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text with a header line and `{:.16e}` numbers.
pub fn csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

// ---------------------------------------------------------------- components

fn default_ppw() -> f64 {
    4.0
}

fn default_run() -> f64 {
    4.0
}

/// Component description. Lengths are absolute; `min_straight_run` is in
/// channel widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentFile {
    pub name: String,
    pub width: f64,
    #[serde(default = "default_ppw")]
    pub panels_per_width: f64,
    /// Corner smoothing half-width; W/4 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<f64>,
    #[serde(default = "default_run")]
    pub min_straight_run: f64,
    pub shape: Shape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// Port planes at x = ±length/2.
    Straight { length: f64 },
    /// Ports at distance `arm` from the centre: W, N, E, S.
    Cross { arm: f64 },
    /// Corner at the origin, ports at -x and -y.
    Elbow { arm: f64 },
    /// Mirror-symmetric Y with straight runs `run` (in widths), outlets at
    /// ±`spread` leaving the junction at ±`angle_deg`.
    Y { run: f64, spread: f64, angle_deg: f64 },
    YLayout {
        inlet_len: f64,
        reach: f64,
        spread: f64,
        run_up: f64,
        run_down: f64,
    },
    /// Centerline vertices and arms (vertex index paths from the junction
    /// to the port centre).
    Skeleton {
        vertices: Vec<[f64; 2]>,
        arms: Vec<Vec<usize>>,
    },
}

impl ComponentFile {
    pub fn skeleton(&self) -> SkeletonSpec {
        let w = self.width;
        let mut spec = match &self.shape {
            Shape::Straight { length } => straight_spec(w, *length),
            Shape::Cross { arm } => cross_spec(w, *arm),
            Shape::Elbow { arm } => elbow_spec(w, *arm),
            Shape::Y { run, spread, angle_deg } => {
                YLayout::symmetric(w, run * w, *spread, angle_deg.to_radians()).spec(&self.name)
            }
            Shape::YLayout {
                inlet_len,
                reach,
                spread,
                run_up,
                run_down,
            } => YLayout {
                width: w,
                inlet_len: *inlet_len,
                reach: *reach,
                spread: *spread,
                run_up: *run_up,
                run_down: *run_down,
            }
            .spec(&self.name),
            Shape::Skeleton { vertices, arms } => SkeletonSpec::new(
                self.name.clone(),
                w,
                vertices.iter().map(|v| C64::new(v[0], v[1])).collect(),
                arms.iter()
                    .map(|path| ArmSpec {
                        path: path.clone(),
                        straight_run: None,
                        cap: CapStyle::Rounded,
                    })
                    .collect(),
            ),
        };
        spec.name = self.name.clone();
        spec.panels_per_width = self.panels_per_width;
        if let Some(s) = self.smoothing {
            spec.smoothing = s;
        }
        let run = self.min_straight_run * w;
        spec.min_straight_run = match self.shape {
            Shape::Straight { length } => run.min(length),
            _ => run,
        };
        spec
    }

    pub fn build(&self) -> Result<ComponentGeometry, GeometryError> {
        build_component(&self.skeleton())
    }

    /// Standard cross whose ports leave `run` widths of straight wall.
    pub fn standard_cross(name: &str, width: f64, run: f64, panels_per_width: f64) -> Self {
        Self {
            name: name.into(),
            width,
            panels_per_width,
            smoothing: None,
            min_straight_run: run,
            shape: Shape::Cross {
                arm: arm_length(width, 0.25 * width, run * width),
            },
        }
    }

    pub fn standard_elbow(name: &str, width: f64, run: f64, panels_per_width: f64) -> Self {
        Self {
            shape: Shape::Elbow {
                arm: arm_length(width, 0.25 * width, run * width),
            },
            ..Self::standard_cross(name, width, run, panels_per_width)
        }
    }
}

pub fn read_component(path: &Path) -> Result<(ComponentFile, ComponentGeometry), IoError> {
    let file: ComponentFile = read_json(path)?;
    let geometry = file.build().map_err(|source| IoError::Geometry {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((file, geometry))
}

// ------------------------------------------------------------------ library

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortRecord {
    pub id: usize,
    pub center: [String; 2],
    pub axis: [String; 2],
    pub half_width: String,
    pub straight_run: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibraryRecord {
    pub name: String,
    pub ports: Vec<PortRecord>,
    /// Row i, column k: S[i][k] for ports i+2, k+2.
    pub matrix: Vec<Vec<String>>,
    pub viscosity: String,
    pub tolerance: String,
    pub geometry_hash: String,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibraryFile {
    pub format: String,
    pub version: u32,
    pub entries: Vec<LibraryRecord>,
}

impl LibraryRecord {
    pub fn from_entry(entry: &LibraryEntry) -> Self {
        let c = |z: C64| [fmt_f64(z.re), fmt_f64(z.im)];
        Self {
            name: entry.name.clone(),
            ports: entry
                .ports
                .iter()
                .map(|p| PortRecord {
                    id: p.id,
                    center: c(p.center),
                    axis: c(p.axis),
                    half_width: fmt_f64(p.half_width),
                    straight_run: fmt_f64(p.straight_run),
                })
                .collect(),
            matrix: entry
                .matrix
                .matrix
                .iter()
                .map(|row| row.iter().map(|v| fmt_f64(*v)).collect())
                .collect(),
            viscosity: fmt_f64(entry.matrix.viscosity),
            tolerance: fmt_f64(entry.matrix.tolerance),
            geometry_hash: entry.matrix.geometry_hash.clone(),
            warnings: entry.matrix.warnings.clone(),
        }
    }

    fn to_entry(&self, path: &Path, index: usize) -> Result<LibraryEntry, IoError> {
        let num = |field: String, s: &str| -> Result<f64, IoError> {
            s.trim().parse::<f64>().map_err(|_| IoError::Invalid {
                path: path.to_path_buf(),
                field,
                message: format!("'{s}' is not a number"),
            })
        };
        let at = |f: &str| format!("entries[{index}].{f}");
        let mut ports = Vec::with_capacity(self.ports.len());
        for (k, p) in self.ports.iter().enumerate() {
            let f = |name: &str| at(&format!("ports[{k}].{name}"));
            ports.push(Port {
                id: p.id,
                center: C64::new(num(f("center[0]"), &p.center[0])?, num(f("center[1]"), &p.center[1])?),
                axis: C64::new(num(f("axis[0]"), &p.axis[0])?, num(f("axis[1]"), &p.axis[1])?),
                half_width: num(f("half_width"), &p.half_width)?,
                straight_run: num(f("straight_run"), &p.straight_run)?,
            });
        }
        let mut matrix = Vec::with_capacity(self.matrix.len());
        for (i, row) in self.matrix.iter().enumerate() {
            matrix.push(
                row.iter()
                    .enumerate()
                    .map(|(k, v)| num(at(&format!("matrix[{i}][{k}]")), v))
                    .collect::<Result<Vec<_>, _>>()?,
            );
        }
        let s = ScatteringMatrix {
            matrix,
            viscosity: num(at("viscosity"), &self.viscosity)?,
            widths: ports.iter().map(|p| p.width()).collect(),
            straight_runs: ports.iter().map(|p| p.straight_run).collect(),
            tolerance: num(at("tolerance"), &self.tolerance)?,
            geometry_hash: self.geometry_hash.clone(),
            warnings: self.warnings.clone(),
        };
        LibraryEntry::new(&self.name, ports, s).map_err(|source| IoError::Network {
            path: path.to_path_buf(),
            source,
        })
    }
}

impl LibraryFile {
    pub fn from_library(lib: &ComponentLibrary) -> Self {
        Self {
            format: LIBRARY_FORMAT.into(),
            version: LIBRARY_VERSION,
            entries: lib.entries.values().map(LibraryRecord::from_entry).collect(),
        }
    }

    pub fn to_library(&self, path: &Path) -> Result<ComponentLibrary, IoError> {
        if self.format != LIBRARY_FORMAT {
            return Err(IoError::Invalid {
                path: path.to_path_buf(),
                field: "format".into(),
                message: format!("expected '{LIBRARY_FORMAT}', found '{}'", self.format),
            });
        }
        if self.version != LIBRARY_VERSION {
            return Err(IoError::Invalid {
                path: path.to_path_buf(),
                field: "version".into(),
                message: format!("unsupported version {}", self.version),
            });
        }
        let mut lib = ComponentLibrary::new();
        for (i, r) in self.entries.iter().enumerate() {
            lib.insert(r.to_entry(path, i)?);
        }
        Ok(lib)
    }
}

pub fn read_library(path: &Path) -> Result<ComponentLibrary, IoError> {
    read_json::<LibraryFile>(path)?.to_library(path)
}

pub fn write_library(path: &Path, lib: &ComponentLibrary) -> Result<(), IoError> {
    write_json(path, &LibraryFile::from_library(lib))
}

// ------------------------------------------------------------------ network

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceRecord {
    pub component: String,
    /// Rotation in radians.
    #[serde(default)]
    pub angle: f64,
    #[serde(default)]
    pub shift: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterfaceRecord {
    /// [instance, port]; positive flux runs from `a` to `b`.
    pub a: [usize; 2],
    pub b: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalRecord {
    pub port: [usize; 2],
    /// Positive out of the network.
    pub flux: f64,
}

/// Network description; `components` optionally carries the geometry of
/// every component type, needed for field output and validation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub components: BTreeMap<String, ComponentFile>,
    pub instances: Vec<InstanceRecord>,
    pub interfaces: Vec<InterfaceRecord>,
    pub externals: Vec<ExternalRecord>,
}

impl NetworkFile {
    pub fn from_spec(spec: &NetworkSpec) -> Self {
        let pr = |r: PortRef| [r.instance, r.port];
        Self {
            components: BTreeMap::new(),
            instances: spec
                .instances
                .iter()
                .map(|i| InstanceRecord {
                    component: i.component.clone(),
                    angle: i.placement.angle,
                    shift: [i.placement.shift.re, i.placement.shift.im],
                })
                .collect(),
            interfaces: spec
                .interfaces
                .iter()
                .map(|i| InterfaceRecord { a: pr(i.a), b: pr(i.b) })
                .collect(),
            externals: spec
                .externals
                .iter()
                .map(|e| ExternalRecord {
                    port: pr(e.port),
                    flux: e.flux,
                })
                .collect(),
        }
    }

    pub fn spec(&self) -> NetworkSpec {
        let pr = |r: [usize; 2]| PortRef::new(r[0], r[1]);
        let mut spec = NetworkSpec::default();
        for i in &self.instances {
            spec.add_instance(&i.component, Placement::new(i.angle, C64::new(i.shift[0], i.shift[1])));
        }
        for i in &self.interfaces {
            spec.join(pr(i.a), pr(i.b));
        }
        for e in &self.externals {
            spec.external(pr(e.port), e.flux);
        }
        spec
    }

    /// Geometry of every inline component, keyed by component name.
    pub fn geometries(&self, path: &Path) -> Result<BTreeMap<String, ComponentGeometry>, IoError> {
        self.components
            .iter()
            .map(|(name, c)| {
                let mut c = c.clone();
                c.name = name.clone();
                c.build()
                    .map(|g| (name.clone(), g))
                    .map_err(|source| IoError::Geometry {
                        path: path.to_path_buf(),
                        source,
                    })
            })
            .collect()
    }
}

pub fn read_network(path: &Path) -> Result<NetworkFile, IoError> {
    read_json(path)
}

// ------------------------------------------------------------- experiments

/// Solver settings; absent keys keep the defaults of [`SolverConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub restart: Option<usize>,
    pub viscosity: Option<f64>,
    pub exclusion_factor: Option<f64>,
}

impl SolverOverrides {
    pub fn apply(&self, mut cfg: SolverConfig) -> SolverConfig {
        if let Some(v) = self.tolerance {
            cfg.tolerance = v;
        }
        if let Some(v) = self.max_iterations {
            cfg.max_iterations = v;
        }
        if let Some(v) = self.restart {
            cfg.restart = v;
        }
        if let Some(v) = self.viscosity {
            cfg.viscosity = v;
        }
        if let Some(v) = self.exclusion_factor {
            cfg.exclusion_factor = v;
        }
        cfg
    }
}

/// Experiment configuration file. Every key is optional; command-line
/// flags take precedence.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    pub component: Option<PathBuf>,
    pub network: Option<PathBuf>,
    pub library: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverOverrides,
    pub panels_per_width: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

pub fn read_config(path: &Path) -> Result<ExperimentConfig, IoError> {
    read_json(path)
}
