//! Interior evaluation of Goursat functions, velocity, pressure and
//! vorticity, and port fluxes.

use std::f64::consts::PI;

use super::{hole_velocity, pair_term, BieError, Boundary, SLDensity, SolverConfig};
use crate::geometry::{Port, PANEL_ORDER};
use crate::quadrature;
use crate::C64;

/// Physical fields at one interior point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    /// u + iv.
    pub velocity: C64,
    /// Pressure up to a per-solution constant.
    pub pressure: f64,
    pub vorticity: f64,
    pub phi: C64,
    pub dphi: C64,
    pub psi: C64,
}

fn check_point(b: &Boundary, z: C64, factor: f64) -> Result<(), BieError> {
    if !b.geometry.contains(z) {
        return Err(BieError::PointOutsideDomain { x: z.re, y: z.im });
    }
    let mut closest = f64::INFINITY;
    let mut violated = false;
    for j in 0..b.len() {
        let d = (b.z[j] - z).norm();
        closest = closest.min(d);
        if d < factor * b.spacing[j] {
            violated = true;
        }
    }
    if violated {
        return Err(BieError::PointTooCloseToBoundary {
            x: z.re,
            y: z.im,
            distance: closest,
        });
    }
    Ok(())
}

fn goursat_unchecked(b: &Boundary, d: &SLDensity, z: C64) -> (C64, C64, C64) {
    let mut phi = C64::new(0.0, 0.0);
    let mut dphi = C64::new(0.0, 0.0);
    let mut psi = C64::new(0.0, 0.0);
    for j in 0..b.len() {
        let inv = 1.0 / (b.z[j] - z);
        let om = d.omega[j];
        let dx = b.dxi[j];
        let a = om * dx * inv;
        phi += a;
        dphi += a * inv;
        psi += (om.conj() * dx + om * dx.conj()) * inv - b.z[j].conj() * a * inv;
    }
    let scale = 1.0 / C64::new(0.0, 2.0 * PI);
    phi *= scale;
    dphi *= scale;
    psi *= scale;
    for h in &d.holes {
        let r = z - h.point;
        let lg = r.ln();
        phi += h.c * lg;
        dphi += h.c / r;
        psi += h.b / r + h.c.conj() * lg - h.c * h.point.conj() / r;
    }
    (phi, dphi, psi)
}

/// `f = i(u + iv)` from the combined kernel, summed over explicit sources.
fn f_from_sources(sources: impl Iterator<Item = (C64, C64, C64)>, holes: &[super::HoleTerm], z: C64) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for (xi, dxi, om) in sources {
        let d = xi - z;
        let (r, i) = pair_term(d.re, d.im, dxi.re, dxi.im, om.re, om.im);
        s += C64::new(r, i);
    }
    s / PI + holes.iter().map(|h| hole_velocity(h, z)).sum::<C64>()
}

fn f_unchecked(b: &Boundary, d: &SLDensity, z: C64) -> C64 {
    f_from_sources(
        (0..b.len()).map(|j| (b.z[j], b.dxi[j], d.omega[j])),
        &d.holes,
        z,
    )
}

fn check_density(b: &Boundary, d: &SLDensity) -> Result<(), BieError> {
    if d.omega.len() != b.len() {
        return Err(BieError::DimensionMismatch {
            expected: b.len(),
            got: d.omega.len(),
        });
    }
    Ok(())
}

/// (φ, φ′, ψ) at an interior point.
pub fn eval_goursat(b: &Boundary, d: &SLDensity, z: C64, cfg: &SolverConfig) -> Result<(C64, C64, C64), BieError> {
    check_density(b, d)?;
    check_point(b, z, cfg.exclusion_factor)?;
    Ok(goursat_unchecked(b, d, z))
}

/// u + iv = −i·(φ + z·conj(φ′) + conj(ψ)).
pub fn eval_velocity(b: &Boundary, d: &SLDensity, z: C64, cfg: &SolverConfig) -> Result<C64, BieError> {
    check_density(b, d)?;
    check_point(b, z, cfg.exclusion_factor)?;
    Ok(-C64::i() * f_unchecked(b, d, z))
}

/// (p, ζ) = (−4μ Im φ′, 4 Re φ′), with ζ = ∂u/∂y − ∂v/∂x = ΔW. The minus
/// sign follows from μΔu = ∂p/∂x with u = ∂W/∂y.
pub fn eval_pressure_vorticity(
    b: &Boundary,
    d: &SLDensity,
    z: C64,
    cfg: &SolverConfig,
) -> Result<(f64, f64), BieError> {
    let (_, dphi, _) = eval_goursat(b, d, z, cfg)?;
    Ok((-4.0 * cfg.viscosity * dphi.im, 4.0 * dphi.re))
}

/// All fields at one point.
pub fn sample(b: &Boundary, d: &SLDensity, z: C64, cfg: &SolverConfig) -> Result<FieldSample, BieError> {
    check_density(b, d)?;
    check_point(b, z, cfg.exclusion_factor)?;
    let (phi, dphi, psi) = goursat_unchecked(b, d, z);
    Ok(FieldSample {
        velocity: -C64::i() * f_unchecked(b, d, z),
        pressure: -4.0 * cfg.viscosity * dphi.im,
        vorticity: 4.0 * dphi.re,
        phi,
        dphi,
        psi,
    })
}

const MAX_SUBDIVISION: usize = 48;

/// Quadrature sources for a point that may lie close to the boundary:
/// panels nearer than their own length are split recursively, with ω
/// interpolated from the parent panel and the geometry evaluated exactly.
fn close_sources(b: &Boundary, d: &SLDensity, z: C64) -> Result<Vec<(C64, C64, C64)>, BieError> {
    let rule = quadrature::rule(PANEL_ORDER);
    let bary = quadrature::barycentric_weights(&rule.nodes);
    let mut out = Vec::with_capacity(b.len());
    for (c, contour) in b.geometry.contours.iter().enumerate() {
        let base = b.contour_ranges[c].start;
        for (p, panel) in contour.panels.iter().enumerate() {
            let off = base + p * PANEL_ORDER;
            let near = (0..PANEL_ORDER).any(|q| (panel.z[q] - z).norm() < panel.length);
            if !near {
                out.extend((off..off + PANEL_ORDER).map(|j| (b.z[j], b.dxi[j], d.omega[j])));
                continue;
            }
            let piece = &contour.pieces[panel.piece].piece;
            let omega = &d.omega[off..off + PANEL_ORDER];
            let (s0, s1) = (panel.s0, panel.s1);
            let mut stack = vec![(s0, s1, 0usize)];
            while let Some((a, e, depth)) = stack.pop() {
                let half = 0.5 * (e - a);
                let mid = 0.5 * (a + e);
                let mut nodes = Vec::with_capacity(PANEL_ORDER);
                for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
                    let s = mid + half * x;
                    let pt = piece.eval(s);
                    let parent_x = (2.0 * s - s0 - s1) / (s1 - s0);
                    let row = quadrature::interpolation_row(&rule.nodes, &bary, parent_x);
                    let om: C64 = row.iter().zip(omega).map(|(r, o)| o * *r).sum();
                    nodes.push((pt.z, pt.dz * (w * half), om));
                }
                let length: f64 = nodes.iter().map(|n| n.1.norm()).sum();
                let dist = nodes.iter().map(|n| (n.0 - z).norm()).fold(f64::INFINITY, f64::min);
                if dist >= length {
                    out.extend(nodes);
                } else if depth >= MAX_SUBDIVISION {
                    return Err(BieError::PointTooCloseToBoundary {
                        x: z.re,
                        y: z.im,
                        distance: dist,
                    });
                } else {
                    stack.push((mid, e, depth + 1));
                    stack.push((a, mid, depth + 1));
                }
            }
        }
    }
    Ok(out)
}

/// Velocity at a point inside the domain, possibly close to the boundary
/// (but not on it).
pub(crate) fn velocity_close(b: &Boundary, d: &SLDensity, z: C64) -> Result<C64, BieError> {
    let sources = close_sources(b, d, z)?;
    Ok(-C64::i() * f_from_sources(sources.into_iter(), &d.holes, z))
}

/// Number of Gauss–Legendre nodes across a port chord.
pub const PORT_FLUX_ORDER: usize = 32;

/// Flux through the port plane, positive out of the component along the
/// port axis.
pub fn port_flux(b: &Boundary, d: &SLDensity, port: &Port) -> Result<f64, BieError> {
    check_density(b, d)?;
    let rule = quadrature::rule(PORT_FLUX_ORDER);
    let mut flux = 0.0;
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let z = port.from_local(C64::new(0.0, x * port.half_width));
        let u = velocity_close(b, d, z)?;
        flux += w * (u.conj() * port.axis).re;
    }
    Ok(flux * port.half_width)
}
