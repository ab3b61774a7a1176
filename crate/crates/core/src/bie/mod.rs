//! Sherman–Lauricella boundary integral solver for the interior Stokes
//! Dirichlet problem on smooth, possibly multiply connected domains.
//!
//! The velocity is carried by `f = φ + z·conj(φ′) + conj(ψ) = i(u + iv)`.
//! Goursat functions are represented by a complex layer density ω on the
//! boundary plus, for every hole k, a logarithmic source at a point z_k
//! inside the hole whose strengths C_k, b_k are quadratures of ω over the
//! hole curve. The boundary limit of `f` is a real-linear second-kind
//! operator on ω; a rank-one term removes its one-dimensional null space on
//! the outer curve.

mod eval;
mod gmres;

use std::f64::consts::PI;
use std::ops::Range;

use thiserror::Error;

use crate::geometry::{BoundaryTag, ComponentGeometry, PANEL_ORDER};
use crate::C64;

pub use eval::{eval_goursat, eval_pressure_vorticity, eval_velocity, port_flux, sample, FieldSample};
pub use gmres::{gmres, GmresOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BieError {
    #[error("dimension mismatch: expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("incompatible boundary data: net flux {net_flux:.3e} exceeds tolerance {tolerance:.3e}")]
    IncompatibleData { net_flux: f64, tolerance: f64 },
    #[error("no convergence after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("point ({x}, {y}) is within {distance:.3e} of the boundary")]
    PointTooCloseToBoundary { x: f64, y: f64, distance: f64 },
    #[error("point ({x}, {y}) is outside the fluid domain")]
    PointOutsideDomain { x: f64, y: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Relative residual target of the iterative solve.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Krylov subspace size before a restart.
    pub restart: usize,
    pub viscosity: f64,
    /// Evaluation is refused closer than this many local node spacings.
    pub exclusion_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 1000,
            restart: 300,
            viscosity: 1.0,
            exclusion_factor: 5.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), BieError> {
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-6) {
            return Err(BieError::InvalidConfig(format!(
                "tolerance {} must lie in (0, 1e-6]",
                self.tolerance
            )));
        }
        if !(self.viscosity > 0.0) {
            return Err(BieError::InvalidConfig("viscosity must be positive".into()));
        }
        if self.max_iterations == 0 || self.restart == 0 {
            return Err(BieError::InvalidConfig("iteration limits must be positive".into()));
        }
        if !(self.exclusion_factor >= 0.0) {
            return Err(BieError::InvalidConfig("exclusion factor must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Logarithmic source of one hole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoleTerm {
    pub point: C64,
    /// C_k = ∫_{Γk} ω |dξ|.
    pub c: C64,
    /// b_k = 2 Im ∫_{Γk} conj(ω) dξ.
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SLDensity {
    pub omega: Vec<C64>,
    pub holes: Vec<HoleTerm>,
    pub iterations: usize,
    pub residual: f64,
}

/// Flattened quadrature nodes of a discretized geometry.
#[derive(Debug, Clone)]
pub struct Boundary {
    pub geometry: ComponentGeometry,
    pub z: Vec<C64>,
    /// dξ at each node: parameter derivative times quadrature weight.
    pub dxi: Vec<C64>,
    /// Arclength weight |dξ|.
    pub arc: Vec<f64>,
    /// Local node spacing (panel length / panel order).
    pub spacing: Vec<f64>,
    pub tags: Vec<BoundaryTag>,
    pub contour_ranges: Vec<Range<usize>>,
    hole_points: Vec<C64>,
    outer_perimeter: f64,
    diag_omega: Vec<f64>,
    diag_conj: Vec<C64>,
    xr: Vec<f64>,
    xi: Vec<f64>,
    dr: Vec<f64>,
    di: Vec<f64>,
}

impl Boundary {
    pub fn new(geometry: &ComponentGeometry) -> Result<Self, BieError> {
        let n = geometry.node_count();
        let mut b = Boundary {
            geometry: geometry.clone(),
            z: Vec::with_capacity(n),
            dxi: Vec::with_capacity(n),
            arc: Vec::with_capacity(n),
            spacing: Vec::with_capacity(n),
            tags: Vec::with_capacity(n),
            contour_ranges: Vec::new(),
            hole_points: Vec::new(),
            outer_perimeter: 0.0,
            diag_omega: Vec::with_capacity(n),
            diag_conj: Vec::with_capacity(n),
            xr: Vec::new(),
            xi: Vec::new(),
            dr: Vec::new(),
            di: Vec::new(),
        };
        for (k, contour) in geometry.contours.iter().enumerate() {
            let start = b.z.len();
            for panel in &contour.panels {
                for q in 0..PANEL_ORDER {
                    let dz = panel.dz[q];
                    let w = panel.weight[q];
                    let kappa = (panel.d2z[q] / dz).im;
                    b.z.push(panel.z[q]);
                    b.dxi.push(dz * w);
                    b.arc.push(dz.norm() * w);
                    b.spacing.push(panel.length / PANEL_ORDER as f64);
                    b.tags.push(panel.tag);
                    b.diag_omega.push(kappa * w / (2.0 * PI));
                    b.diag_conj.push(-(dz / dz.conj()) * (kappa * w / (2.0 * PI)));
                }
            }
            b.contour_ranges.push(start..b.z.len());
            if k == 0 {
                b.outer_perimeter = contour.perimeter();
            } else {
                let p = contour.hole_point.ok_or_else(|| {
                    BieError::InvalidGeometry(format!("hole curve {k} has no interior point"))
                })?;
                b.hole_points.push(p);
            }
        }
        if b.z.is_empty() {
            return Err(BieError::InvalidGeometry("geometry has no boundary nodes".into()));
        }
        b.xr = b.z.iter().map(|z| z.re).collect();
        b.xi = b.z.iter().map(|z| z.im).collect();
        b.dr = b.dxi.iter().map(|z| z.re).collect();
        b.di = b.dxi.iter().map(|z| z.im).collect();
        Ok(b)
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn hole_points(&self) -> &[C64] {
        &self.hole_points
    }

    fn check_len(&self, got: usize) -> Result<(), BieError> {
        if got != self.len() {
            return Err(BieError::DimensionMismatch {
                expected: self.len(),
                got,
            });
        }
        Ok(())
    }

    /// Hole constants C_k, b_k implied by ω.
    pub fn hole_terms(&self, omega: &[C64]) -> Vec<HoleTerm> {
        self.hole_points
            .iter()
            .enumerate()
            .map(|(k, &point)| {
                let r = self.contour_ranges[k + 1].clone();
                let c: C64 = r.clone().map(|j| omega[j] * self.arc[j]).sum();
                let s: C64 = r.map(|j| omega[j].conj() * self.dxi[j]).sum();
                HoleTerm { point, c, b: 2.0 * s.im }
            })
            .collect()
    }

    /// Sherman–Lauricella operator including hole terms and the rank-one
    /// null-space correction on the outer curve.
    pub fn apply_sl_operator(&self, omega: &[C64]) -> Result<Vec<C64>, BieError> {
        self.check_len(omega.len())?;
        Ok(self.apply(omega))
    }

    fn apply(&self, omega: &[C64]) -> Vec<C64> {
        let n = self.len();
        let wr: Vec<f64> = omega.iter().map(|w| w.re).collect();
        let wi: Vec<f64> = omega.iter().map(|w| w.im).collect();
        let mut out = Vec::with_capacity(n);
        for (i, &w) in omega.iter().enumerate() {
            let (tx, ty) = (self.xr[i], self.xi[i]);
            let (ar, ai) = self.kernel_sum(0..i, tx, ty, &wr, &wi);
            let (br, bi) = self.kernel_sum(i + 1..n, tx, ty, &wr, &wi);
            let sum = C64::new(ar + br, ai + bi) / PI;
            out.push(w + sum + w * self.diag_omega[i] + w.conj() * self.diag_conj[i]);
        }
        for h in self.hole_terms(omega) {
            for (o, &t) in out.iter_mut().zip(&self.z) {
                *o += hole_velocity(&h, t);
            }
        }
        let outer = self.contour_ranges[0].clone();
        let v: f64 = outer.clone().map(|j| (omega[j] * self.dxi[j].conj()).re).sum::<f64>() / self.outer_perimeter;
        for j in outer {
            out[j] += self.dxi[j] / self.arc[j] * v;
        }
        out
    }

    /// Σ_j Im(dξ_j conj(d))/|d|² · (ω_j − d²/|d|² conj(ω_j)), d = ξ_j − t,
    /// over `range`, with independent accumulators per lane.
    fn kernel_sum(&self, range: Range<usize>, tx: f64, ty: f64, wr: &[f64], wi: &[f64]) -> (f64, f64) {
        let xr = &self.xr[range.clone()];
        let xi = &self.xi[range.clone()];
        let dr = &self.dr[range.clone()];
        let di = &self.di[range.clone()];
        let wr = &wr[range.clone()];
        let wi = &wi[range];
        let mut acc_r = [0.0f64; LANES];
        let mut acc_i = [0.0f64; LANES];
        let chunks = xr
            .chunks_exact(LANES)
            .zip(xi.chunks_exact(LANES))
            .zip(dr.chunks_exact(LANES))
            .zip(di.chunks_exact(LANES))
            .zip(wr.chunks_exact(LANES))
            .zip(wi.chunks_exact(LANES));
        for (((((xr, xi), dr), di), wr), wi) in chunks {
            for l in 0..LANES {
                let (r, i) = pair_term(xr[l] - tx, xi[l] - ty, dr[l], di[l], wr[l], wi[l]);
                acc_r[l] += r;
                acc_i[l] += i;
            }
        }
        for j in LANES * (xr.len() / LANES)..xr.len() {
            let (r, i) = pair_term(xr[j] - tx, xi[j] - ty, dr[j], di[j], wr[j], wi[j]);
            acc_r[0] += r;
            acc_i[0] += i;
        }
        (acc_r.iter().sum(), acc_i.iter().sum())
    }

    /// Net flux of boundary data `h = i(u + iv)` and the largest single-cap
    /// flux.
    pub fn data_fluxes(&self, h: &[C64]) -> (f64, f64) {
        let mut net = 0.0;
        let mut caps: std::collections::BTreeMap<usize, f64> = Default::default();
        for ((v, dx), tag) in h.iter().zip(&self.dxi).zip(&self.tags) {
            let q = (v.conj() * dx).re;
            net += q;
            if let BoundaryTag::Cap(p) = *tag {
                *caps.entry(p).or_default() += q;
            }
        }
        (net, caps.values().fold(0.0, |m, q| m.max(q.abs())))
    }

    /// Solves the boundary value problem with data `h = i(u + iv)` at the
    /// nodes.
    pub fn solve(&self, h: &[C64], cfg: &SolverConfig) -> Result<SLDensity, BieError> {
        cfg.validate()?;
        self.check_len(h.len())?;
        let (net, port_scale) = self.data_fluxes(h);
        let tolerance = 1e-12 * port_scale.max(1.0);
        if net.abs() > tolerance {
            return Err(BieError::IncompatibleData {
                net_flux: net,
                tolerance,
            });
        }
        let out = gmres(|w| self.apply(w), h, cfg.tolerance, cfg.max_iterations, cfg.restart);
        if !out.converged {
            return Err(BieError::NoConvergence {
                iterations: out.iterations,
                residual: out.relative_residual,
            });
        }
        Ok(SLDensity {
            holes: self.hole_terms(&out.solution),
            omega: out.solution,
            iterations: out.iterations,
            residual: out.relative_residual,
        })
    }
}

const LANES: usize = 8;

#[inline(always)]
fn pair_term(dx: f64, dy: f64, dr: f64, di: f64, wr: f64, wi: f64) -> (f64, f64) {
    let inv = 1.0 / (dx * dx + dy * dy);
    let c = (di * dx - dr * dy) * inv;
    let er = (dx * dx - dy * dy) * inv;
    let ei = 2.0 * dx * dy * inv;
    let qr = wr - (er * wr + ei * wi);
    let qi = wi - (ei * wr - er * wi);
    (c * qr, c * qi)
}

/// Contribution of one hole to `f` at `t`.
pub(crate) fn hole_velocity(h: &HoleTerm, t: C64) -> C64 {
    let d = t - h.point;
    let dc = d.conj();
    h.c * (2.0 * d.norm().ln()) + h.c.conj() * d / dc + h.b / dc
}

/// Solves the Dirichlet problem on `geometry`; convenience wrapper around
/// [`Boundary::solve`].
pub fn solve_bvp(boundary: &Boundary, h: &[C64], cfg: &SolverConfig) -> Result<SLDensity, BieError> {
    boundary.solve(h, cfg)
}

/// Boundary data `h = φ + t·conj(φ′) + conj(ψ)` of an exact Goursat pair.
pub fn goursat_boundary_data(
    boundary: &Boundary,
    phi: impl Fn(C64) -> C64,
    dphi: impl Fn(C64) -> C64,
    psi: impl Fn(C64) -> C64,
) -> Vec<C64> {
    boundary
        .z
        .iter()
        .map(|&t| phi(t) + t * dphi(t).conj() + psi(t).conj())
        .collect()
}

#[cfg(test)]
mod tests;
