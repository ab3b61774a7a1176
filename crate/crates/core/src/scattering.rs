//! Scattering matrices of single components: port fluxes to pressure drops.

use faer::{Mat, Side};
use thiserror::Error;

use crate::bie::{eval_pressure_vorticity, port_flux, sample, BieError, Boundary, FieldSample, HoleTerm, SLDensity, SolverConfig};
use crate::geometry::{BoundaryTag, ComponentGeometry, GeometryError};
use crate::poiseuille::PoiseuilleProfile;
use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScatteringError {
    #[error(transparent)]
    Solver(#[from] BieError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("component needs at least two ports, has {0}")]
    TooFewPorts(usize),
    #[error("port {0} does not exist")]
    NoSuchPort(usize),
    #[error("port {port}: straight run {run:.4} is shorter than the required {required:.4}")]
    StraightRunTooShort { port: usize, run: f64, required: f64 },
    #[error("expected {expected} outflow values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Options for [`compute_scattering_matrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterConfig {
    pub solver: SolverConfig,
    /// Minimum straight run at every port, in channel widths.
    pub min_straight_run: f64,
    /// Fail on a short straight run instead of recording a warning.
    pub strict: bool,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            min_straight_run: 4.0,
            strict: true,
        }
    }
}

/// `matrix[i][k]` is p_{i+2} − p_1 per unit flux leaving through port k+2
/// and entering through port 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    pub matrix: Vec<Vec<f64>>,
    pub viscosity: f64,
    pub widths: Vec<f64>,
    pub straight_runs: Vec<f64>,
    pub tolerance: f64,
    pub geometry_hash: String,
    pub warnings: Vec<String>,
}

impl ScatteringMatrix {
    /// m − 1 for an m-port component.
    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    pub fn port_count(&self) -> usize {
        self.matrix.len() + 1
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.matrix[i][k]
    }

    /// Pressure drops p_j − p_1 (j = 2..m) for outflows F_2..F_m.
    pub fn pressure_drops(&self, outflow: &[f64]) -> Result<Vec<f64>, ScatteringError> {
        if outflow.len() != self.dim() {
            return Err(ScatteringError::DimensionMismatch {
                expected: self.dim(),
                got: outflow.len(),
            });
        }
        Ok(self
            .matrix
            .iter()
            .map(|row| row.iter().zip(outflow).map(|(s, f)| s * f).sum())
            .collect())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// ‖S − Sᵀ‖_F / ‖S‖_F.
    pub fn asymmetry(&self) -> f64 {
        let n = self.dim();
        let mut s = 0.0;
        for i in 0..n {
            for k in 0..n {
                s += (self.matrix[i][k] - self.matrix[k][i]).powi(2);
            }
        }
        s.sqrt() / self.frobenius_norm()
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        let n = self.dim();
        let m = Mat::from_fn(n, n, |i, k| 0.5 * (self.matrix[i][k] + self.matrix[k][i]));
        m.self_adjoint_eigenvalues(Side::Lower)
            .expect("symmetric eigenvalue iteration of a small matrix")
    }

    pub fn is_negative_definite(&self) -> bool {
        self.symmetric_eigenvalues().iter().all(|&e| e < 0.0)
    }

    /// The same component at viscosity `mu`.
    pub fn with_viscosity(&self, mu: f64) -> ScatteringMatrix {
        let f = mu / self.viscosity;
        ScatteringMatrix {
            matrix: self.matrix.iter().map(|r| r.iter().map(|v| v * f).collect()).collect(),
            viscosity: mu,
            ..self.clone()
        }
    }
}

/// Solved basis flows of one component.
#[derive(Debug, Clone)]
pub struct ComponentBasis {
    pub boundary: Boundary,
    /// `densities[j - 2]` carries unit flux in at port 1 and out at port j.
    pub densities: Vec<SLDensity>,
    /// `port_pressures[j - 2][k]` is the pressure at port k+1 of basis j.
    pub port_pressures: Vec<Vec<f64>>,
    /// Port-plane fluxes measured after each solve, same layout.
    pub port_fluxes: Vec<Vec<f64>>,
    pub solver: SolverConfig,
}

impl ComponentBasis {
    /// Largest deviation of the measured port fluxes from the imposed ones.
    pub fn flux_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, fl) in self.port_fluxes.iter().enumerate() {
            for (k, f) in fl.iter().enumerate() {
                let expected = if k == 0 {
                    -1.0
                } else if k == j + 1 {
                    1.0
                } else {
                    0.0
                };
                worst = worst.max((f - expected).abs());
            }
        }
        worst
    }

    /// Density of the superposition Σ α_j·(basis j).
    pub fn combined_density(&self, alphas: &[f64]) -> Result<SLDensity, ScatteringError> {
        if alphas.len() != self.densities.len() {
            return Err(ScatteringError::DimensionMismatch {
                expected: self.densities.len(),
                got: alphas.len(),
            });
        }
        let n = self.boundary.len();
        let mut omega = vec![C64::new(0.0, 0.0); n];
        let mut holes: Vec<HoleTerm> = self.boundary.hole_terms(&omega);
        for (a, d) in alphas.iter().zip(&self.densities) {
            if *a == 0.0 {
                continue;
            }
            for (o, w) in omega.iter_mut().zip(&d.omega) {
                *o += w * *a;
            }
            for (h, hd) in holes.iter_mut().zip(&d.holes) {
                h.c += hd.c * *a;
                h.b += hd.b * *a;
            }
        }
        Ok(SLDensity {
            omega,
            holes,
            iterations: 0,
            residual: 0.0,
        })
    }
}

/// Boundary data `h = i(u + iv)` for prescribed Poiseuille outflows at the
/// caps (`outflow[k]` leaves through port k+1) and no-slip walls.
pub fn poiseuille_cap_data(boundary: &Boundary, outflow: &[f64]) -> Result<Vec<C64>, ScatteringError> {
    let ports = &boundary.geometry.ports;
    if outflow.len() != ports.len() {
        return Err(ScatteringError::DimensionMismatch {
            expected: ports.len(),
            got: outflow.len(),
        });
    }
    let mut h = Vec::with_capacity(boundary.len());
    for (z, tag) in boundary.z.iter().zip(&boundary.tags) {
        let v = match tag {
            BoundaryTag::Wall => C64::new(0.0, 0.0),
            BoundaryTag::Cap(id) => {
                let k = ports
                    .iter()
                    .position(|p| p.id == *id)
                    .ok_or(ScatteringError::NoSuchPort(*id))?;
                let port = &ports[k];
                if outflow[k] == 0.0 {
                    C64::new(0.0, 0.0)
                } else {
                    let y = port.to_local(*z).im;
                    let profile = PoiseuilleProfile::new(port.half_width, outflow[k], 1.0);
                    let u = if y.abs() < port.half_width {
                        profile.velocity_unchecked(y)
                    } else {
                        0.0
                    };
                    C64::i() * port.axis * u
                }
            }
        };
        h.push(v);
    }
    Ok(h)
}

/// Data of basis problem `j` (2 ≤ j ≤ m): unit flux in at port 1, out at
/// port j.
pub fn basis_boundary_data(boundary: &Boundary, j: usize) -> Result<Vec<C64>, ScatteringError> {
    let m = boundary.geometry.ports.len();
    if j < 2 || j > m {
        return Err(ScatteringError::NoSuchPort(j));
    }
    let mut outflow = vec![0.0; m];
    outflow[0] = -1.0;
    outflow[j - 1] = 1.0;
    poiseuille_cap_data(boundary, &outflow)
}

/// Pressure at the centre of the port plane.
pub fn port_pressure(
    boundary: &Boundary,
    density: &SLDensity,
    port: usize,
    cfg: &SolverConfig,
) -> Result<f64, ScatteringError> {
    let p = boundary
        .geometry
        .port(port)
        .ok_or(ScatteringError::NoSuchPort(port))?;
    Ok(eval_pressure_vorticity(boundary, density, p.center, cfg)?.0)
}

fn check_runs(geometry: &ComponentGeometry, cfg: &ScatterConfig) -> Result<Vec<String>, ScatteringError> {
    let mut warnings = Vec::new();
    for p in &geometry.ports {
        let required = cfg.min_straight_run * p.width();
        if p.straight_run < required * (1.0 - 1e-12) {
            if cfg.strict {
                return Err(ScatteringError::StraightRunTooShort {
                    port: p.id,
                    run: p.straight_run,
                    required,
                });
            }
            warnings.push(format!(
                "port {}: straight run {:.4} below {:.4}",
                p.id, p.straight_run, required
            ));
        }
    }
    Ok(warnings)
}

/// Solves the m − 1 basis problems and measures port-plane pressures.
pub fn compute_scattering_matrix(
    geometry: &ComponentGeometry,
    cfg: &ScatterConfig,
) -> Result<(ScatteringMatrix, ComponentBasis), ScatteringError> {
    let m = geometry.ports.len();
    if m < 2 {
        return Err(ScatteringError::TooFewPorts(m));
    }
    let warnings = check_runs(geometry, cfg)?;
    let boundary = Boundary::new(geometry)?;
    let solver = &cfg.solver;
    let mut densities = Vec::with_capacity(m - 1);
    let mut pressures = Vec::with_capacity(m - 1);
    let mut fluxes = Vec::with_capacity(m - 1);
    for j in 2..=m {
        let h = basis_boundary_data(&boundary, j)?;
        let d = boundary.solve(&h, solver)?;
        let p: Vec<f64> = geometry
            .ports
            .iter()
            .map(|port| port_pressure(&boundary, &d, port.id, solver))
            .collect::<Result<_, _>>()?;
        let f: Vec<f64> = geometry
            .ports
            .iter()
            .map(|port| port_flux(&boundary, &d, port))
            .collect::<Result<_, _>>()?;
        densities.push(d);
        pressures.push(p);
        fluxes.push(f);
    }
    let matrix = (0..m - 1)
        .map(|i| (0..m - 1).map(|k| pressures[k][i + 1] - pressures[k][0]).collect())
        .collect();
    let s = ScatteringMatrix {
        matrix,
        viscosity: solver.viscosity,
        widths: geometry.ports.iter().map(|p| p.width()).collect(),
        straight_runs: geometry.ports.iter().map(|p| p.straight_run).collect(),
        tolerance: solver.tolerance,
        geometry_hash: geometry.hash(),
        warnings,
    };
    let basis = ComponentBasis {
        boundary,
        densities,
        port_pressures: pressures,
        port_fluxes: fluxes,
        solver: *solver,
    };
    Ok((s, basis))
}

/// Field of the superposition with outflows α_2..α_m at a local point.
/// The pressure carries the basis pressure constant.
pub fn local_field(basis: &ComponentBasis, alphas: &[f64], z: C64) -> Result<FieldSample, ScatteringError> {
    let d = basis.combined_density(alphas)?;
    Ok(sample(&basis.boundary, &d, z, &basis.solver)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::components::{cross_spec, straight, YLayout};
    use crate::geometry::{build_component, Placement};
    use std::f64::consts::PI;
    use std::sync::OnceLock;

    fn y_junction() -> ComponentGeometry {
        YLayout::symmetric(1.0, 4.0, 3.0, PI / 6.0).build("y").unwrap()
    }

    fn y_solved() -> &'static (ScatteringMatrix, ComponentBasis) {
        static CELL: OnceLock<(ScatteringMatrix, ComponentBasis)> = OnceLock::new();
        CELL.get_or_init(|| compute_scattering_matrix(&y_junction(), &ScatterConfig::default()).unwrap())
    }

    #[test]
    fn straight_channel_matches_poiseuille_resistance() {
        let len = 4.0;
        let g = straight(1.0, len).unwrap();
        let (s, basis) = compute_scattering_matrix(&g, &ScatterConfig::default()).unwrap();
        let l: f64 = 0.5;
        let exact = -3.0 * len / (2.0 * l.powi(3));
        assert_eq!(s.dim(), 1);
        assert!((s.get(0, 0) - exact).abs() <= 1e-8 * exact.abs(), "{} vs {exact}", s.get(0, 0));
        assert!(basis.flux_residual() <= 1e-10);
        let s2 = compute_scattering_matrix(
            &g,
            &ScatterConfig {
                solver: SolverConfig {
                    viscosity: 2.0,
                    ..SolverConfig::default()
                },
                ..ScatterConfig::default()
            },
        )
        .unwrap()
        .0;
        assert!((s2.get(0, 0) - 2.0 * s.get(0, 0)).abs() <= 1e-8 * s2.get(0, 0).abs());
    }

    #[test]
    fn basis_data_is_compatible() {
        let b = Boundary::new(&y_junction()).unwrap();
        for j in 2..=3 {
            let h = basis_boundary_data(&b, j).unwrap();
            let (net, cap) = b.data_fluxes(&h);
            assert!(net.abs() < 1e-14, "{net}");
            assert!((cap - 1.0).abs() < 1e-13);
        }
        let h2 = basis_boundary_data(&b, 2).unwrap();
        let h3 = basis_boundary_data(&b, 3).unwrap();
        for ((a, c), tag) in h2.iter().zip(&h3).zip(&b.tags) {
            if a != c {
                assert!(matches!(tag, BoundaryTag::Cap(2) | BoundaryTag::Cap(3)));
            }
        }
        assert!(matches!(basis_boundary_data(&b, 1), Err(ScatteringError::NoSuchPort(1))));
        assert!(matches!(basis_boundary_data(&b, 4), Err(ScatteringError::NoSuchPort(4))));
    }

    #[test]
    fn y_junction_is_symmetric_and_dissipative() {
        let (s, basis) = y_solved();
        assert!(s.asymmetry() <= 1e-8, "{}", s.asymmetry());
        let scale = s.frobenius_norm();
        assert!((s.get(0, 0) - s.get(1, 1)).abs() <= 1e-8 * scale);
        assert!(s.is_negative_definite());
        assert!(basis.flux_residual() <= 1e-10, "{}", basis.flux_residual());
        // basis 3: fluxes (−1, 0, 1)
        let f = &basis.port_fluxes[1];
        assert!((f[0] + 1.0).abs() < 1e-10 && f[1].abs() < 1e-10 && (f[2] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn superposition_of_basis_flows() {
        let (_, basis) = y_solved();
        let d = basis.combined_density(&[1.0, 1.0]).unwrap();
        let fl: Vec<f64> = basis
            .boundary
            .geometry
            .ports
            .iter()
            .map(|p| port_flux(&basis.boundary, &d, p).unwrap())
            .collect();
        assert!((fl[0] + 2.0).abs() < 1e-10 && (fl[1] - 1.0).abs() < 1e-10 && (fl[2] - 1.0).abs() < 1e-10);
        let z = C64::new(-2.0, 0.1);
        let zero = local_field(basis, &[0.0, 0.0], z).unwrap();
        assert_eq!(zero.velocity, C64::new(0.0, 0.0));
        let unit = local_field(basis, &[0.0, 1.0], z).unwrap();
        let direct = sample(&basis.boundary, &basis.densities[1], z, &basis.solver).unwrap();
        assert!((unit.velocity - direct.velocity).norm() < 1e-15);
        assert!(matches!(
            local_field(basis, &[1.0], z),
            Err(ScatteringError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn port_pressure_average_is_close_to_centre_value() {
        let (_, basis) = y_solved();
        let d = &basis.densities[0];
        let port = basis.boundary.geometry.port(2).unwrap();
        let centre = port_pressure(&basis.boundary, d, 2, &basis.solver).unwrap();
        let avg: f64 = [-0.4, -0.2, 0.0, 0.2, 0.4]
            .iter()
            .map(|&y| {
                let z = port.from_local(C64::new(0.0, y * port.width()));
                eval_pressure_vorticity(&basis.boundary, d, z, &basis.solver).unwrap().0
            })
            .sum::<f64>()
            / 5.0;
        let scale = basis.port_pressures[0].iter().fold(0.0_f64, |m, p| m.max(p.abs()));
        let bound = (-4.2 * port.straight_run / port.width()).exp() * scale;
        assert!((avg - centre).abs() <= bound.max(1e-10 * scale), "{} vs {bound}", (avg - centre).abs());
    }

    #[test]
    fn rigid_motion_and_dilation() {
        let (s, _) = y_solved();
        let moved = y_junction().apply_placement(&Placement::new(0.7, C64::new(3.0, -2.0)));
        let sm = compute_scattering_matrix(&moved, &ScatterConfig::default()).unwrap().0;
        let scale = s.frobenius_norm();
        for i in 0..2 {
            for k in 0..2 {
                assert!((sm.get(i, k) - s.get(i, k)).abs() <= 1e-10 * scale);
            }
        }
        let f: f64 = 1.7;
        let big = y_junction().dilated(f).unwrap();
        let sb = compute_scattering_matrix(&big, &ScatterConfig::default()).unwrap().0;
        for i in 0..2 {
            for k in 0..2 {
                assert!((sb.get(i, k) - s.get(i, k) / (f * f)).abs() <= 1e-8 * scale / (f * f));
            }
        }
    }

    #[test]
    fn short_runs_are_reported() {
        let mut spec = cross_spec(1.0, 3.0);
        spec.min_straight_run = 1.0;
        let g = build_component(&spec).unwrap();
        let err = compute_scattering_matrix(&g, &ScatterConfig::default()).unwrap_err();
        assert!(matches!(err, ScatteringError::StraightRunTooShort { .. }));
        let lenient = ScatterConfig {
            strict: false,
            ..ScatterConfig::default()
        };
        let (s, _) = compute_scattering_matrix(&g, &lenient).unwrap();
        assert_eq!(s.warnings.len(), 4);
        assert!(s.is_negative_definite());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]

            #[test]
            fn every_outflow_dissipates(f2 in -10.0..10.0f64, f3 in -10.0..10.0f64) {
                prop_assume!(f2.abs() + f3.abs() > 1e-6);
                let (s, _) = y_solved();
                let drops = s.pressure_drops(&[f2, f3]).unwrap();
                prop_assert!(f2 * drops[0] + f3 * drops[1] < 0.0);
            }
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(4))]

            #[test]
            fn placement_and_viscosity(
                angle in -3.1..3.1f64,
                sx in -10.0..10.0f64,
                sy in -10.0..10.0f64,
                mu in 0.1..10.0f64,
            ) {
                let (s, _) = y_solved();
                let moved = y_junction().apply_placement(&Placement::new(angle, C64::new(sx, sy)));
                let cfg = ScatterConfig {
                    solver: SolverConfig { viscosity: mu, ..SolverConfig::default() },
                    ..ScatterConfig::default()
                };
                let sm = compute_scattering_matrix(&moved, &cfg).unwrap().0;
                let scale = mu * s.frobenius_norm();
                for i in 0..2 {
                    for k in 0..2 {
                        prop_assert!((sm.get(i, k) - mu * s.get(i, k)).abs() <= 1e-10 * scale);
                    }
                }
            }
        }
    }
}
