//! Experiment drivers behind the command-line tool: return to Poiseuille,
//! condition-number scaling, grid timing, component scattering reports and
//! full-domain validation.

use std::collections::BTreeMap;
use std::time::Instant;

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use serde::Serialize;
use thiserror::Error;

use crate::bie::{sample, BieError, Boundary, SolverConfig};
use crate::geometry::components::straight_spec;
use crate::geometry::{build_component, BoundaryTag, ComponentGeometry, GeometryError};
use crate::network::builders::grid_network;
use crate::network::{
    assemble, condition_number, propagate_pressures, solve_assembly, validate_network, ComponentLibrary,
    FieldLibrary, LibraryEntry, NetworkError, NetworkSolution, NetworkSpec,
};
use crate::poiseuille::{decay_rate, fit_exponential, random_zero_flux_profile, PoiseuilleError};
use crate::scattering::{compute_scattering_matrix, ScatterConfig, ScatteringError};
use crate::validation::{compare_with_full_domain, solve_full_domain, ValidationError, ValidationReport};
use crate::C64;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] BieError),
    #[error(transparent)]
    Poiseuille(#[from] PoiseuilleError),
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error("{0}")]
    Invalid(String),
}

// ------------------------------------------------------- return to Poiseuille

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtpConfig {
    pub width: f64,
    pub length: f64,
    /// Length of the cross-check channel.
    pub cross_length: f64,
    pub seed: u64,
    pub modes: usize,
    pub panels_per_width: f64,
    pub fit_window: (f64, f64),
    pub compare_window: (f64, f64),
    /// Spacing of the sampled cross-sections.
    pub step: f64,
    /// Samples across each cross-section.
    pub section_points: usize,
    pub solver: SolverConfig,
}

impl Default for RtpConfig {
    fn default() -> Self {
        Self {
            width: 1.0,
            length: 10.0,
            cross_length: 20.0,
            seed: 1,
            modes: 8,
            panels_per_width: 4.0,
            fit_window: (1.0, 6.0),
            compare_window: (0.0, 8.0),
            step: 0.25,
            section_points: 41,
            // sections sample 8 node spacings from the walls; at the solver
            // default of 5 the vorticity quadrature floor (~1e-10 relative)
            // reaches into the fit window
            solver: SolverConfig {
                tolerance: 1e-14,
                exclusion_factor: 8.0,
                ..SolverConfig::default()
            },
        }
    }
}

/// Cross-section maxima at distance `x` from the inlet plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecaySample {
    pub x: f64,
    pub velocity: f64,
    pub vorticity: f64,
    /// max |p − p_ref|, with p_ref taken one width before the outlet.
    pub pressure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RtpReport {
    pub expected_slope: f64,
    pub velocity_slope: f64,
    pub vorticity_slope: f64,
    pub pressure_slope: f64,
    /// max |u_L − u_2L| / max |u_L| over the compare window.
    pub cross_check: f64,
    pub iterations: usize,
    pub samples: Vec<DecaySample>,
}

impl RtpReport {
    pub fn csv(&self) -> String {
        crate::io::csv(
            &["x", "velocity_max", "vorticity_max", "pressure_max"],
            &self
                .samples
                .iter()
                .map(|s| vec![s.x, s.velocity, s.vorticity, s.pressure])
                .collect::<Vec<_>>(),
        )
    }
}

struct ChannelFlow {
    boundary: Boundary,
    density: crate::bie::SLDensity,
    solver: SolverConfig,
    half: f64,
    inlet_x: f64,
}

impl ChannelFlow {
    fn section(&self, x: f64, ys: &[f64]) -> Result<Vec<crate::bie::FieldSample>, ExperimentError> {
        let mut out = Vec::with_capacity(ys.len());
        for &y in ys {
            out.push(sample(&self.boundary, &self.density, C64::new(self.inlet_x + x, y), &self.solver)?);
        }
        Ok(out)
    }
}

fn channel_flow(cfg: &RtpConfig, length: f64) -> Result<ChannelFlow, ExperimentError> {
    let mut spec = straight_spec(cfg.width, length);
    spec.panels_per_width = cfg.panels_per_width;
    let geometry = build_component(&spec)?;
    let boundary = Boundary::new(&geometry)?;
    let inlet = geometry.ports[0];
    let profile = random_zero_flux_profile(inlet.half_width, cfg.seed, cfg.modes)?;
    // inflow along −axis of port 1, zero on the outlet cap and the walls
    let h: Vec<C64> = boundary
        .z
        .iter()
        .zip(&boundary.tags)
        .map(|(z, tag)| match tag {
            BoundaryTag::Cap(1) => -C64::i() * inlet.axis * profile.velocity(inlet.to_local(*z).im),
            _ => C64::new(0.0, 0.0),
        })
        .collect();
    let density = boundary.solve(&h, &cfg.solver)?;
    Ok(ChannelFlow {
        boundary,
        density,
        solver: cfg.solver,
        half: inlet.half_width,
        inlet_x: inlet.center.re,
    })
}

/// Decay of a zero-flux inlet disturbance along a straight channel, with a
/// cross-check against a channel of length `cross_length`.
pub fn rtp_decay(cfg: &RtpConfig) -> Result<RtpReport, ExperimentError> {
    if cfg.compare_window.1 > cfg.length.min(cfg.cross_length) - cfg.width || cfg.fit_window.1 > cfg.length - cfg.width {
        return Err(ExperimentError::Invalid("sample windows must end a width before the outlet".into()));
    }
    let flow = channel_flow(cfg, cfg.length)?;
    let margin = cfg.solver.exclusion_factor * flow.boundary.spacing.iter().fold(0.0_f64, |m, s| m.max(*s));
    let ymax = flow.half - margin;
    let ys: Vec<f64> = (0..cfg.section_points)
        .map(|k| -ymax + 2.0 * ymax * k as f64 / (cfg.section_points - 1) as f64)
        .collect();
    let reference = flow.section(cfg.length - cfg.width, &ys)?;
    let count = ((cfg.fit_window.1.max(cfg.compare_window.1)) / cfg.step).round() as usize;
    let mut samples = Vec::with_capacity(count + 1);
    for k in 0..=count {
        let x = k as f64 * cfg.step;
        let sec = flow.section(x, &ys)?;
        let max = |f: &dyn Fn(usize) -> f64| (0..ys.len()).map(f).fold(0.0_f64, f64::max);
        samples.push(DecaySample {
            x,
            velocity: max(&|i| sec[i].velocity.norm()),
            vorticity: max(&|i| sec[i].vorticity.abs()),
            pressure: max(&|i| (sec[i].pressure - reference[i].pressure).abs()),
        });
    }
    let window: Vec<&DecaySample> = samples
        .iter()
        .filter(|s| s.x >= cfg.fit_window.0 - 1e-12 && s.x <= cfg.fit_window.1 + 1e-12)
        .collect();
    let xs: Vec<f64> = window.iter().map(|s| s.x).collect();
    let slope = |f: fn(&DecaySample) -> f64| -> Result<f64, PoiseuilleError> {
        Ok(fit_exponential(&xs, &window.iter().map(|s| f(s)).collect::<Vec<_>>())?.slope)
    };

    let long = channel_flow(cfg, cfg.cross_length)?;
    let (mut diff, mut scale) = (0.0_f64, 0.0_f64);
    for s in samples
        .iter()
        .filter(|s| s.x >= cfg.compare_window.0 - 1e-12 && s.x <= cfg.compare_window.1 + 1e-12)
    {
        let a = flow.section(s.x, &ys)?;
        let b = long.section(s.x, &ys)?;
        for (p, q) in a.iter().zip(&b) {
            diff = diff.max((p.velocity - q.velocity).norm());
            scale = scale.max(p.velocity.norm());
        }
    }
    Ok(RtpReport {
        expected_slope: -decay_rate(cfg.width)?,
        velocity_slope: slope(|s| s.velocity)?,
        vorticity_slope: slope(|s| s.vorticity)?,
        pressure_slope: slope(|s| s.pressure)?,
        cross_check: diff / scale,
        iterations: flow.density.iterations,
        samples,
    })
}

// ------------------------------------------------------ condition numbers

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticFit {
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
    pub r_squared: f64,
}

/// Least-squares fit y ≈ c₂x² + c₁x + c₀.
pub fn fit_quadratic(xs: &[f64], ys: &[f64]) -> Result<QuadraticFit, ExperimentError> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(ExperimentError::Invalid("a quadratic fit needs three or more points".into()));
    }
    let a = Mat::from_fn(xs.len(), 3, |i, j| xs[i].powi(2 - j as i32));
    let b = Mat::from_fn(ys.len(), 1, |i, _| ys[i]);
    let c = a.qr().solve_lstsq(&b);
    let (c2, c1, c0) = (c[(0, 0)], c[(1, 0)], c[(2, 0)]);
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (c2 * x * x + c1 * x + c0)).powi(2))
        .sum();
    Ok(QuadraticFit {
        c2,
        c1,
        c0,
        r_squared: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CondRow {
    pub n: usize,
    pub unknowns: usize,
    pub cycles: usize,
    pub kappa_square: f64,
    pub kappa_rectangular: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CondReport {
    pub rows: Vec<CondRow>,
    /// Quadratic fit of the square-system κ over rows with n ≥ 2.
    pub fit: Option<QuadraticFit>,
}

impl CondReport {
    pub fn csv(&self) -> String {
        crate::io::csv(
            &["n", "unknowns", "cycles", "kappa_square", "kappa_rectangular"],
            &self
                .rows
                .iter()
                .map(|r| vec![r.n as f64, r.unknowns as f64, r.cycles as f64, r.kappa_square, r.kappa_rectangular])
                .collect::<Vec<_>>(),
        )
    }
}

/// Grid port spacing of a library: distance from a cross centre to its
/// first port plane.
pub fn grid_arm(lib: &ComponentLibrary, cross: &str) -> Result<f64, ExperimentError> {
    let e = lib.get(cross)?;
    if e.port_count() != 4 {
        return Err(ExperimentError::Invalid(format!("'{cross}' is not a 4-port component")));
    }
    Ok(e.ports[0].center.norm())
}

pub fn cond_scaling(lib: &ComponentLibrary, cross: &str, elbow: &str, ns: &[usize]) -> Result<CondReport, ExperimentError> {
    let arm = grid_arm(lib, cross)?;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let spec = grid_network(n, cross, elbow, arm, 1.0);
        let net = validate_network(&spec, lib)?;
        let sys = assemble(&net)?;
        let k = condition_number(&sys)?;
        rows.push(CondRow {
            n,
            unknowns: sys.n_cols,
            cycles: sys.cycle_count(),
            kappa_square: k.square,
            kappa_rectangular: k.rectangular,
        });
    }
    let fitted: Vec<&CondRow> = rows.iter().filter(|r| r.n >= 2).collect();
    let fit = if fitted.len() >= 3 {
        Some(fit_quadratic(
            &fitted.iter().map(|r| r.n as f64).collect::<Vec<_>>(),
            &fitted.iter().map(|r| r.kappa_square).collect::<Vec<_>>(),
        )?)
    } else {
        None
    };
    Ok(CondReport { rows, fit })
}

// -------------------------------------------------------------- grid demo

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub instances: usize,
    pub interfaces: usize,
    pub cycles: usize,
    pub fluxes: Vec<f64>,
    /// External-port pressures relative to the first external port.
    pub external_pressures: Vec<f64>,
    pub max_cycle_residual: f64,
    pub max_flux_imbalance: f64,
    pub residual: f64,
    pub square_discrepancy: f64,
    pub kappa_square: Option<f64>,
    pub kappa_rectangular: Option<f64>,
    pub assemble_seconds: f64,
    pub solve_seconds: f64,
}

/// Condition numbers are computed from a dense SVD, so only up to this many
/// unknowns.
pub const KAPPA_LIMIT: usize = 1500;

/// Validates, assembles and solves a network, timing assembly and solve.
pub fn solve_network(spec: &NetworkSpec, lib: &ComponentLibrary) -> Result<(NetworkSolution, SolveReport), ExperimentError> {
    let t0 = Instant::now();
    let net = validate_network(spec, lib)?;
    let sys = assemble(&net)?;
    let t1 = Instant::now();
    let sol = solve_assembly(&sys)?;
    let full = propagate_pressures(&net, &sol.fluxes, None)?;
    let t2 = Instant::now();
    let kappa = if sys.n_cols <= KAPPA_LIMIT {
        Some(condition_number(&sys)?)
    } else {
        None
    };
    let report = SolveReport {
        instances: spec.instances.len(),
        interfaces: spec.interfaces.len(),
        cycles: sys.cycle_count(),
        fluxes: sol.fluxes.clone(),
        external_pressures: full.external_pressures.clone(),
        max_cycle_residual: full.max_cycle_residual(),
        max_flux_imbalance: full.max_flux_imbalance(),
        residual: sol.residual,
        square_discrepancy: sol.discrepancy,
        kappa_square: kappa.map(|k| k.square),
        kappa_rectangular: kappa.map(|k| k.rectangular),
        assemble_seconds: (t1 - t0).as_secs_f64(),
        solve_seconds: (t2 - t1).as_secs_f64(),
    };
    Ok((full, report))
}

pub fn grid_demo(lib: &ComponentLibrary, cross: &str, elbow: &str, n: usize) -> Result<(NetworkSpec, SolveReport), ExperimentError> {
    let arm = grid_arm(lib, cross)?;
    let spec = grid_network(n, cross, elbow, arm, 1.0);
    let (_, report) = solve_network(&spec, lib)?;
    Ok((spec, report))
}

// ------------------------------------------------------------- scattering

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterReport {
    pub name: String,
    pub nodes: usize,
    pub matrix: Vec<Vec<f64>>,
    pub asymmetry: f64,
    pub eigenvalues: Vec<f64>,
    pub negative_definite: bool,
    pub flux_residual: f64,
    pub iterations: Vec<usize>,
    pub warnings: Vec<String>,
    pub seconds: f64,
}

/// Scattering matrix, basis flows and diagnostics of one component.
pub fn scatter_component(
    geometry: &ComponentGeometry,
    cfg: &ScatterConfig,
) -> Result<(LibraryEntry, crate::scattering::ComponentBasis, ScatterReport), ExperimentError> {
    let t = Instant::now();
    let (s, basis) = compute_scattering_matrix(geometry, cfg)?;
    let report = ScatterReport {
        name: geometry.name.clone(),
        nodes: geometry.node_count(),
        matrix: s.matrix.clone(),
        asymmetry: s.asymmetry(),
        eigenvalues: s.symmetric_eigenvalues(),
        negative_definite: s.is_negative_definite(),
        flux_residual: basis.flux_residual(),
        iterations: basis.densities.iter().map(|d| d.iterations).collect(),
        warnings: s.warnings.clone(),
        seconds: t.elapsed().as_secs_f64(),
    };
    Ok((LibraryEntry::from_geometry(geometry, s)?, basis, report))
}

// ------------------------------------------------------------- validation

#[derive(Debug, Clone)]
pub struct ValidateConfig {
    pub scatter: ScatterConfig,
    /// Solver of the merged domain. Its viscosity is taken from `scatter`.
    /// Long channel networks need a few hundred Krylov vectors and their
    /// residual floor sits near 1e-12, so the default is unrestarted GMRES
    /// to 1e-10.
    pub full_solver: SolverConfig,
    /// Panel density of the merged boundary.
    pub panels_per_width: f64,
    pub max_unknowns: usize,
    pub probe_spacing: f64,
    /// Exclusion factor used when sampling both solutions; larger than the
    /// solver default so that plain quadrature is accurate at the probes.
    pub exclusion_factor: f64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            scatter: ScatterConfig::default(),
            full_solver: SolverConfig {
                tolerance: 1e-10,
                max_iterations: 1000,
                restart: 1000,
                ..SolverConfig::default()
            },
            panels_per_width: 4.0,
            max_unknowns: crate::validation::DEFAULT_MAX_UNKNOWNS,
            probe_spacing: 0.2,
            exclusion_factor: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateSummary {
    pub probes: usize,
    pub velocity_error: f64,
    pub pressure_error: f64,
    pub assembled_drops: Vec<f64>,
    pub full_drops: Vec<f64>,
    pub full_nodes: usize,
    pub full_iterations: usize,
    pub scatter_seconds: f64,
    pub full_seconds: f64,
    pub compare_seconds: f64,
}

impl From<(&ValidationReport, f64, f64)> for ValidateSummary {
    fn from((r, scatter_seconds, compare_seconds): (&ValidationReport, f64, f64)) -> Self {
        Self {
            probes: r.probes,
            velocity_error: r.velocity_error,
            pressure_error: r.pressure_error,
            assembled_drops: r.assembled_drops.clone(),
            full_drops: r.full_drops.clone(),
            full_nodes: r.full_nodes,
            full_iterations: r.full_iterations,
            scatter_seconds,
            full_seconds: r.full_seconds,
            compare_seconds,
        }
    }
}

/// Solved component bases, keyed by component name.
pub fn scatter_all(
    geometries: &BTreeMap<String, ComponentGeometry>,
    cfg: &ScatterConfig,
) -> Result<(ComponentLibrary, FieldLibrary), ExperimentError> {
    let mut lib = ComponentLibrary::new();
    let mut bases = FieldLibrary::default();
    for (name, g) in geometries {
        let mut g = g.clone();
        g.name = name.clone();
        let (entry, basis, _) = scatter_component(&g, cfg)?;
        let mut entry = entry;
        entry.name = name.clone();
        lib.insert(entry);
        bases.insert(name, basis);
    }
    Ok((lib, bases))
}

/// Assembled-and-reconstructed solution against the direct solve of the
/// merged domain.
pub fn validate(
    spec: &NetworkSpec,
    geometries: &BTreeMap<String, ComponentGeometry>,
    cfg: &ValidateConfig,
) -> Result<ValidateSummary, ExperimentError> {
    let t = Instant::now();
    let (lib, bases) = scatter_all(geometries, &cfg.scatter)?;
    let scatter_seconds = t.elapsed().as_secs_f64();
    validate_with(spec, geometries, &lib, &bases, cfg, scatter_seconds)
}

/// As [`validate`], reusing already solved components.
pub fn validate_with(
    spec: &NetworkSpec,
    geometries: &BTreeMap<String, ComponentGeometry>,
    lib: &ComponentLibrary,
    bases: &FieldLibrary,
    cfg: &ValidateConfig,
    scatter_seconds: f64,
) -> Result<ValidateSummary, ExperimentError> {
    let (sol, _) = solve_network(spec, lib)?;
    let solver = SolverConfig {
        viscosity: cfg.scatter.solver.viscosity,
        ..cfg.full_solver
    };
    let full = solve_full_domain(spec, geometries, cfg.panels_per_width, &solver, cfg.max_unknowns)?;
    let t = Instant::now();
    let r = compare_with_full_domain(spec, &sol, bases, &full, cfg.probe_spacing, cfg.exclusion_factor)?;
    Ok(ValidateSummary::from((&r, scatter_seconds, t.elapsed().as_secs_f64())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::builders::lumped_grid_library;

    #[test]
    fn quadratic_fit_recovers_coefficients() {
        let xs: Vec<f64> = (2..=16).map(|n| n as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x * x - 2.0 * x + 7.0).collect();
        let f = fit_quadratic(&xs, &ys).unwrap();
        assert!((f.c2 - 0.5).abs() < 1e-12 && (f.c1 + 2.0).abs() < 1e-10 && (f.c0 - 7.0).abs() < 1e-9);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
        assert!(fit_quadratic(&xs[..2], &ys[..2]).is_err());
    }

    #[test]
    fn single_cross_condition_is_order_one() {
        let lib = lumped_grid_library("cross", "elbow", 4.75, 1.0, 1.0);
        let r = cond_scaling(&lib, "cross", "elbow", &[1, 2, 3]).unwrap();
        assert_eq!(r.rows[0].unknowns, 0);
        assert_eq!(r.rows[0].kappa_square, 1.0);
        assert_eq!(r.rows[1].cycles, 1);
        assert!(r.rows[2].kappa_square > r.rows[1].kappa_square);
    }

    #[test]
    fn grid_demo_reports_counts() {
        let lib = lumped_grid_library("cross", "elbow", 4.75, 1.0, 1.0);
        let (_, r) = grid_demo(&lib, "cross", "elbow", 5).unwrap();
        assert_eq!((r.instances, r.interfaces, r.cycles), (25, 40, 16));
        assert!(r.max_flux_imbalance <= 1e-12);
        assert!(r.kappa_square.is_some());
    }
}
