//! Networks of placed components: validation, connectivity, assembly of the
//! flux-conservation and cycle-pressure system, pressure propagation and
//! field reconstruction.

mod assembly;
pub mod builders;
mod field;
mod graph;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geometry::{check_interface, ComponentGeometry, GeometryError, Placement, Port};
use crate::scattering::{ScatteringError, ScatteringMatrix};

pub use assembly::{
    acyclic_solve, assemble, assemble_with_root, condition_number, propagate_pressures, solve_assembly,
    AssemblySolution, AssemblySystem, ConditionNumbers, NetworkSolution, RowKind,
};
pub use field::{reconstruct_field, FieldLibrary, FieldReconstructor, NetworkFieldSample};
pub use graph::{fundamental_cycles, ConnectivityGraph, CycleStep};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("interface {interface}: {detail}")]
    WidthMismatch { interface: usize, detail: String },
    #[error("interface {interface}: {detail}")]
    MisalignedInterface { interface: usize, detail: String },
    #[error("port {port} of instance {instance} is neither joined nor external")]
    DanglingPort { instance: usize, port: usize },
    #[error("port {port} of instance {instance} is used more than once")]
    PortUsedTwice { instance: usize, port: usize },
    #[error("instance {instance} has no port {port}")]
    NoSuchPort { instance: usize, port: usize },
    #[error("external fluxes sum to {net:.3e}, tolerance {tolerance:.3e}")]
    FluxImbalance { net: f64, tolerance: f64 },
    #[error("network splits into {components} disconnected parts")]
    DisconnectedNetwork { components: usize },
    #[error("no scattering matrix for component '{component}'")]
    MissingScatteringMatrix { component: String },
    #[error("no solved basis flows for component '{component}'")]
    MissingBasis { component: String },
    #[error("assembly matrix is rank deficient (deficiency {deficiency:?}, residual {residual:.3e})")]
    RankDeficient { deficiency: Option<usize>, residual: f64 },
    #[error("network has {cycles} independent cycles; the acyclic solver needs a tree")]
    NotAcyclic { cycles: usize },
    #[error("point ({x}, {y}) lies in no component")]
    PointOutsideNetwork { x: f64, y: f64 },
    #[error("network has no instance {0}")]
    NoSuchInstance(usize),
    #[error("network has no instances")]
    Empty,
    #[error("invalid library entry '{component}': {detail}")]
    InvalidEntry { component: String, detail: String },
    #[error("linear algebra failure: {0}")]
    Linear(String),
    #[error(transparent)]
    Field(#[from] ScatteringError),
}

/// Reference to port `port` (1-based id) of instance `instance`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PortRef {
    pub instance: usize,
    pub port: usize,
}

impl PortRef {
    pub fn new(instance: usize, port: usize) -> Self {
        Self { instance, port }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub component: String,
    pub placement: Placement,
}

/// Joined ports; positive interface flux runs from `a` into `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interface {
    pub a: PortRef,
    pub b: PortRef,
}

/// Port with prescribed flux, positive out of the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct External {
    pub port: PortRef,
    pub flux: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkSpec {
    pub instances: Vec<Instance>,
    pub interfaces: Vec<Interface>,
    pub externals: Vec<External>,
}

impl NetworkSpec {
    pub fn add_instance(&mut self, component: &str, placement: Placement) -> usize {
        self.instances.push(Instance {
            component: component.to_string(),
            placement,
        });
        self.instances.len() - 1
    }

    pub fn join(&mut self, a: PortRef, b: PortRef) {
        self.interfaces.push(Interface { a, b });
    }

    pub fn external(&mut self, port: PortRef, flux: f64) {
        self.externals.push(External { port, flux });
    }

    /// Copy with every external flux multiplied by `factor`.
    pub fn scaled_fluxes(&self, factor: f64) -> NetworkSpec {
        let mut s = self.clone();
        for e in &mut s.externals {
            e.flux *= factor;
        }
        s
    }
}

/// Port table and scattering matrix of one component type.
#[derive(Debug, Clone, PartialEq)]
pub struct LibraryEntry {
    pub name: String,
    /// Ports in the component frame, `ports[k].id == k + 1`.
    pub ports: Vec<Port>,
    pub matrix: ScatteringMatrix,
}

impl LibraryEntry {
    pub fn new(name: &str, ports: Vec<Port>, matrix: ScatteringMatrix) -> Result<Self, NetworkError> {
        let invalid = |detail: String| NetworkError::InvalidEntry {
            component: name.to_string(),
            detail,
        };
        if ports.len() < 2 {
            return Err(invalid("fewer than two ports".into()));
        }
        if let Some((k, p)) = ports.iter().enumerate().find(|(k, p)| p.id != k + 1) {
            return Err(invalid(format!("port at position {k} has id {}", p.id)));
        }
        if matrix.dim() != ports.len() - 1 || matrix.matrix.iter().any(|r| r.len() != ports.len() - 1) {
            return Err(invalid(format!(
                "matrix is not {0}x{0} for {1} ports",
                ports.len() - 1,
                ports.len()
            )));
        }
        Ok(Self {
            name: name.to_string(),
            ports,
            matrix,
        })
    }

    pub fn from_geometry(geometry: &ComponentGeometry, matrix: ScatteringMatrix) -> Result<Self, NetworkError> {
        Self::new(&geometry.name, geometry.ports.clone(), matrix)
    }

    pub fn port_count(&self) -> usize {
        self.ports.len()
    }

    /// p_k − p_1 for per-port outflows (all m ports, port 1 first).
    pub(crate) fn port_offsets(&self, outflow: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ports.len()];
        for (k, row) in self.matrix.matrix.iter().enumerate() {
            out[k + 1] = row.iter().zip(&outflow[1..]).map(|(s, f)| s * f).sum();
        }
        out
    }
}

/// Scattering matrices by component name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComponentLibrary {
    pub entries: BTreeMap<String, LibraryEntry>,
}

impl ComponentLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entry: LibraryEntry) {
        self.entries.insert(entry.name.clone(), entry);
    }

    pub fn get(&self, name: &str) -> Result<&LibraryEntry, NetworkError> {
        self.entries
            .get(name)
            .ok_or_else(|| NetworkError::MissingScatteringMatrix {
                component: name.to_string(),
            })
    }
}

/// How a port of an instance is used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PortUse {
    /// Side `a` (outflow = +x) or side `b` (outflow = −x) of an interface.
    Interface { edge: usize, side_a: bool },
    External { index: usize, flux: f64 },
}

/// A network whose invariants have been verified against a library.
#[derive(Debug, Clone)]
pub struct CheckedNetwork<'a> {
    pub spec: &'a NetworkSpec,
    pub library: &'a ComponentLibrary,
    /// `ports[i][k]` describes port k+1 of instance i.
    pub ports: Vec<Vec<PortUse>>,
    pub graph: ConnectivityGraph,
}

impl CheckedNetwork<'_> {
    pub fn entry(&self, instance: usize) -> &LibraryEntry {
        &self.library.entries[&self.spec.instances[instance].component]
    }

    /// Largest |S| among the instance types, in the Frobenius norm.
    pub fn matrix_scale(&self) -> f64 {
        self.spec
            .instances
            .iter()
            .map(|i| self.library.entries[&i.component].matrix.frobenius_norm())
            .fold(0.0, f64::max)
    }

    pub fn flux_scale(&self) -> f64 {
        self.spec.externals.iter().map(|e| e.flux.abs()).fold(0.0, f64::max)
    }
}

/// Verifies port usage, interface geometry and flux balance, and builds the
/// connectivity graph.
pub fn validate_network<'a>(spec: &'a NetworkSpec, library: &'a ComponentLibrary) -> Result<CheckedNetwork<'a>, NetworkError> {
    if spec.instances.is_empty() {
        return Err(NetworkError::Empty);
    }
    let mut ports: Vec<Vec<Option<PortUse>>> = Vec::with_capacity(spec.instances.len());
    for inst in &spec.instances {
        ports.push(vec![None; library.get(&inst.component)?.port_count()]);
    }
    let mut claim = |r: PortRef, usage: PortUse| -> Result<(), NetworkError> {
        let slot = ports
            .get_mut(r.instance)
            .and_then(|p| p.get_mut(r.port.wrapping_sub(1)))
            .ok_or(NetworkError::NoSuchPort {
                instance: r.instance,
                port: r.port,
            })?;
        if slot.is_some() {
            return Err(NetworkError::PortUsedTwice {
                instance: r.instance,
                port: r.port,
            });
        }
        *slot = Some(usage);
        Ok(())
    };
    for (e, iface) in spec.interfaces.iter().enumerate() {
        claim(iface.a, PortUse::Interface { edge: e, side_a: true })?;
        claim(iface.b, PortUse::Interface { edge: e, side_a: false })?;
    }
    for (k, ext) in spec.externals.iter().enumerate() {
        claim(ext.port, PortUse::External { index: k, flux: ext.flux })?;
    }
    let ports: Vec<Vec<PortUse>> = ports
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            p.into_iter()
                .enumerate()
                .map(|(k, u)| u.ok_or(NetworkError::DanglingPort { instance: i, port: k + 1 }))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let placed = |r: PortRef| {
        let inst = &spec.instances[r.instance];
        library.entries[&inst.component].ports[r.port - 1].placed(&inst.placement)
    };
    for (e, iface) in spec.interfaces.iter().enumerate() {
        match check_interface(&placed(iface.a), &placed(iface.b)) {
            Ok(()) => {}
            Err(GeometryError::WidthMismatch(detail)) => return Err(NetworkError::WidthMismatch { interface: e, detail }),
            Err(other) => {
                return Err(NetworkError::MisalignedInterface {
                    interface: e,
                    detail: other.to_string(),
                })
            }
        }
    }
    let net: f64 = spec.externals.iter().map(|e| e.flux).sum();
    let scale = spec.externals.iter().map(|e| e.flux.abs()).fold(0.0, f64::max);
    let tolerance = 1e-12 * scale;
    if net.abs() > tolerance {
        return Err(NetworkError::FluxImbalance { net, tolerance });
    }
    let graph = ConnectivityGraph::new(
        spec.instances.len(),
        spec.interfaces.iter().map(|i| (i.a.instance, i.b.instance)).collect(),
    );
    Ok(CheckedNetwork {
        spec,
        library,
        ports,
        graph,
    })
}

#[cfg(test)]
mod tests;
