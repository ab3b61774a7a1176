//! Full-domain reference solves of assembled networks: the merged,
//! multiply connected boundary is solved directly and compared with the
//! field reconstructed from the component bases.

use std::collections::BTreeMap;
use std::time::Instant;

use thiserror::Error;

use crate::bie::{sample, BieError, Boundary, SLDensity, SolverConfig};
use crate::geometry::{merge_network_boundary, ComponentGeometry, GeometryError, MergedDomain, PlacedComponent};
use crate::network::{FieldLibrary, FieldReconstructor, NetworkError, NetworkSolution, NetworkSpec};
use crate::scattering::{poiseuille_cap_data, port_pressure, ScatteringError};
use crate::C64;

/// Default cap on the number of boundary nodes of a full-domain solve.
pub const DEFAULT_MAX_UNKNOWNS: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("full-domain solve needs {unknowns} unknowns, above the cap of {cap}; lower panels_per_width or raise the cap")]
    TooLarge { unknowns: usize, cap: usize },
    #[error("no geometry for component '{0}'")]
    MissingGeometry(String),
    #[error("external port {instance}:{port} is missing from the merged boundary")]
    LostPort { instance: usize, port: usize },
    #[error("no probe point lies inside both solutions")]
    NoProbes,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] BieError),
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Direct solve of the whole network domain.
#[derive(Debug, Clone)]
pub struct FullDomainSolution {
    pub domain: MergedDomain,
    pub boundary: Boundary,
    pub density: SLDensity,
    /// Port-plane pressures at the externals of the spec, in declaration
    /// order, relative to the first one.
    pub external_pressures: Vec<f64>,
    pub seconds: f64,
}

/// Merges the placed components of `spec`, imposes the external Poiseuille
/// fluxes on the remaining caps and solves the full problem.
pub fn solve_full_domain(
    spec: &NetworkSpec,
    geometries: &BTreeMap<String, ComponentGeometry>,
    panels_per_width: f64,
    solver: &SolverConfig,
    max_unknowns: usize,
) -> Result<FullDomainSolution, ValidationError> {
    let start = Instant::now();
    let parts = spec
        .instances
        .iter()
        .map(|inst| {
            geometries
                .get(&inst.component)
                .map(|g| PlacedComponent {
                    geometry: g,
                    placement: inst.placement,
                })
                .ok_or_else(|| ValidationError::MissingGeometry(inst.component.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let joins: Vec<_> = spec
        .interfaces
        .iter()
        .map(|i| ((i.a.instance, i.a.port), (i.b.instance, i.b.port)))
        .collect();
    let domain = merge_network_boundary(&parts, &joins, panels_per_width)?;
    let unknowns = domain.geometry.node_count();
    if unknowns > max_unknowns {
        return Err(ValidationError::TooLarge {
            unknowns,
            cap: max_unknowns,
        });
    }
    let merged_id = |instance: usize, port: usize| -> Result<usize, ValidationError> {
        domain
            .external_ports
            .iter()
            .position(|&e| e == (instance, port))
            .map(|k| k + 1)
            .ok_or(ValidationError::LostPort { instance, port })
    };
    let mut outflow = vec![0.0; domain.external_ports.len()];
    for e in &spec.externals {
        outflow[merged_id(e.port.instance, e.port.port)? - 1] = e.flux;
    }
    let boundary = Boundary::new(&domain.geometry)?;
    let h = poiseuille_cap_data(&boundary, &outflow)?;
    let density = boundary.solve(&h, solver)?;
    let mut pressures = Vec::with_capacity(spec.externals.len());
    for e in &spec.externals {
        pressures.push(port_pressure(&boundary, &density, merged_id(e.port.instance, e.port.port)?, solver)?);
    }
    let reference = pressures.first().copied().unwrap_or(0.0);
    Ok(FullDomainSolution {
        domain,
        boundary,
        density,
        external_pressures: pressures.iter().map(|p| p - reference).collect(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub probes: usize,
    /// ‖u_assembled − u_full‖₂ / ‖u_full‖₂ over the probes.
    pub velocity_error: f64,
    /// max |Δp_assembled − Δp_full| / max |Δp_full| over the externals.
    pub pressure_error: f64,
    pub assembled_drops: Vec<f64>,
    pub full_drops: Vec<f64>,
    pub full_nodes: usize,
    pub full_iterations: usize,
    pub full_seconds: f64,
}

/// Samples both solutions on a square grid of spacing `spacing` covering the
/// network and compares them. Points closer to either boundary than
/// `exclusion_factor` node spacings, or in no component, are skipped.
pub fn compare_with_full_domain(
    spec: &NetworkSpec,
    solution: &NetworkSolution,
    bases: &FieldLibrary,
    full: &FullDomainSolution,
    spacing: f64,
    exclusion_factor: f64,
) -> Result<ValidationReport, ValidationError> {
    let recon = FieldReconstructor::new(spec, solution, bases)?.with_exclusion_factor(exclusion_factor);
    let mut cfg = bases
        .bases
        .values()
        .next()
        .map(|b| b.solver)
        .unwrap_or_default();
    cfg.exclusion_factor = exclusion_factor;
    let (lo, hi) = bounding_box(&full.boundary.z);
    let nx = ((hi.re - lo.re) / spacing).ceil() as usize;
    let ny = ((hi.im - lo.im) / spacing).ceil() as usize;
    let (mut num, mut den, mut probes) = (0.0, 0.0, 0usize);
    for i in 0..=nx {
        for j in 0..=ny {
            // offset by half a spacing so probes avoid symmetry lines
            let z = lo + C64::new((i as f64 + 0.5) * spacing, (j as f64 + 0.5) * spacing);
            if recon.owner(z).is_none() {
                continue;
            }
            let Ok(reference) = sample(&full.boundary, &full.density, z, &cfg) else {
                continue;
            };
            let Ok(assembled) = recon.sample(z) else {
                continue;
            };
            num += (assembled.velocity - reference.velocity).norm_sqr();
            den += reference.velocity.norm_sqr();
            probes += 1;
        }
    }
    if probes == 0 || den == 0.0 {
        return Err(ValidationError::NoProbes);
    }
    let reference = solution.external_pressures.first().copied().unwrap_or(0.0);
    let assembled_drops: Vec<f64> = solution.external_pressures.iter().map(|p| p - reference).collect();
    let scale = full.external_pressures.iter().fold(0.0_f64, |m, p| m.max(p.abs())).max(f64::MIN_POSITIVE);
    let pressure_error = assembled_drops
        .iter()
        .zip(&full.external_pressures)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
        / scale;
    Ok(ValidationReport {
        probes,
        velocity_error: (num / den).sqrt(),
        pressure_error,
        assembled_drops,
        full_drops: full.external_pressures.clone(),
        full_nodes: full.boundary.len(),
        full_iterations: full.density.iterations,
        full_seconds: full.seconds,
    })
}

fn bounding_box(z: &[C64]) -> (C64, C64) {
    z.iter().fold(
        (C64::new(f64::INFINITY, f64::INFINITY), C64::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
        |(lo, hi), p| {
            (
                C64::new(lo.re.min(p.re), lo.im.min(p.im)),
                C64::new(hi.re.max(p.re), hi.im.max(p.im)),
            )
        },
    )
}
