//! Closed piecewise-analytic curves (straight segments and smoothed
//! corners) and their Gauss–Legendre panel discretization.

use serde::{Deserialize, Serialize};

use super::{bump, GeometryError};
use crate::{quadrature, C64};

/// Nodes per panel.
pub const PANEL_ORDER: usize = 16;
/// Upper bound on curvature times panel length after refinement.
pub const CURVATURE_PANEL_BOUND: f64 = 0.5;

/// Initial panel breaks of a smoothed corner, in units of its half-width.
const CORNER_GRADING: [f64; 11] = [
    -1.0, -0.9375, -0.875, -0.75, -0.5, 0.0, 0.5, 0.75, 0.875, 0.9375, 1.0,
];

/// What kind of boundary a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    Wall,
    /// Cap closing the port with the given id.
    Cap(usize),
}

/// Vertex of a closed wall polyline; the corner is smoothed over
/// `smoothing` arclength on each side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutlineVertex {
    pub point: C64,
    pub smoothing: f64,
    pub tag: BoundaryTag,
}

/// Position and parameter derivatives of a curve point.
#[derive(Debug, Clone, Copy)]
pub struct CurvePoint {
    pub z: C64,
    pub dz: C64,
    pub d2z: C64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Piece {
    /// `start + s * dir`, s in [0, length].
    Line { start: C64, dir: C64, length: f64 },
    /// Polyline corner convolved with the bump of half-width `half_width`;
    /// s in [-half_width, half_width], s = 0 at the vertex.
    Corner {
        vertex: C64,
        dir_in: C64,
        dir_out: C64,
        half_width: f64,
    },
}

impl Piece {
    pub fn param_range(&self) -> (f64, f64) {
        match *self {
            Piece::Line { length, .. } => (0.0, length),
            Piece::Corner { half_width, .. } => (-half_width, half_width),
        }
    }

    pub fn eval(&self, s: f64) -> CurvePoint {
        match *self {
            Piece::Line { start, dir, .. } => CurvePoint {
                z: start + dir * s,
                dz: dir,
                d2z: C64::new(0.0, 0.0),
            },
            Piece::Corner {
                vertex,
                dir_in,
                dir_out,
                half_width,
            } => {
                let x = s / half_width;
                let jump = dir_out - dir_in;
                CurvePoint {
                    z: vertex + dir_in * s + jump * (half_width * bump::ramp(x)),
                    dz: dir_in + jump * bump::step(x),
                    d2z: jump * (bump::density(x) / half_width),
                }
            }
        }
    }

    fn length_between(&self, a: f64, b: f64) -> f64 {
        let rule = quadrature::rule(PANEL_ORDER);
        rule.integrate(a, b, |s| self.eval(s).dz.norm())
    }

    fn max_curvature_between(&self, a: f64, b: f64) -> f64 {
        match self {
            Piece::Line { .. } => 0.0,
            Piece::Corner { .. } => {
                let n = 33;
                (0..n)
                    .map(|k| {
                        let s = a + (b - a) * k as f64 / (n - 1) as f64;
                        curvature(&self.eval(s))
                    })
                    .fold(0.0_f64, |m, c| m.max(c.abs()))
            }
        }
    }
}

fn curvature(p: &CurvePoint) -> f64 {
    (p.d2z * p.dz.conj()).im / p.dz.norm().powi(3)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggedPiece {
    pub piece: Piece,
    pub tag: BoundaryTag,
}

/// One Gauss–Legendre panel. Derivatives are with respect to the piece
/// parameter; `weight` already includes the panel half-length in that
/// parameter, so `Σ weight·|dz|` is the panel arclength.
#[derive(Debug, Clone)]
pub struct BoundaryPanel {
    pub piece: usize,
    pub s0: f64,
    pub s1: f64,
    pub tag: BoundaryTag,
    pub z: Vec<C64>,
    pub dz: Vec<C64>,
    pub d2z: Vec<C64>,
    pub weight: Vec<f64>,
    pub length: f64,
}

impl BoundaryPanel {
    fn new(pieces: &[TaggedPiece], piece: usize, s0: f64, s1: f64) -> Self {
        let rule = quadrature::rule(PANEL_ORDER);
        let half = 0.5 * (s1 - s0);
        let mid = 0.5 * (s0 + s1);
        let mut z = Vec::with_capacity(PANEL_ORDER);
        let mut dz = Vec::with_capacity(PANEL_ORDER);
        let mut d2z = Vec::with_capacity(PANEL_ORDER);
        let mut weight = Vec::with_capacity(PANEL_ORDER);
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            let p = pieces[piece].piece.eval(mid + half * x);
            z.push(p.z);
            dz.push(p.dz);
            d2z.push(p.d2z);
            weight.push(w * half);
        }
        let length = dz.iter().zip(&weight).map(|(d, w)| d.norm() * w).sum();
        Self {
            piece,
            s0,
            s1,
            tag: pieces[piece].tag,
            z,
            dz,
            d2z,
            weight,
            length,
        }
    }

    /// Unit normal pointing out of the fluid (fluid lies left of the curve).
    pub fn normal(&self, k: usize) -> C64 {
        -C64::i() * self.dz[k] / self.dz[k].norm()
    }

    pub fn curvature(&self, k: usize) -> f64 {
        curvature(&CurvePoint {
            z: self.z[k],
            dz: self.dz[k],
            d2z: self.d2z[k],
        })
    }
}

/// A closed boundary curve, oriented with the fluid on its left.
#[derive(Debug, Clone)]
pub struct Contour {
    pub outline: Vec<OutlineVertex>,
    pub pieces: Vec<TaggedPiece>,
    pub panels: Vec<BoundaryPanel>,
    /// Point strictly inside the hole bounded by this contour (holes only).
    pub hole_point: Option<C64>,
}

impl Contour {
    /// Builds the smoothed curve of a closed polyline and discretizes it with
    /// panels no longer than `max_panel` and curvature-refined corners.
    pub fn from_outline(
        outline: Vec<OutlineVertex>,
        max_panel: f64,
        hole_point: Option<C64>,
    ) -> Result<Self, GeometryError> {
        let pieces = pieces_from_outline(&outline)?;
        let panels = discretize(&pieces, max_panel);
        Ok(Self {
            outline,
            pieces,
            panels,
            hole_point,
        })
    }

    pub fn node_count(&self) -> usize {
        self.panels.len() * PANEL_ORDER
    }

    pub fn perimeter(&self) -> f64 {
        self.panels.iter().map(|p| p.length).sum()
    }

    /// Signed area of the polyline (positive for counterclockwise).
    pub fn outline_area(&self) -> f64 {
        signed_area(&self.outline.iter().map(|v| v.point).collect::<Vec<_>>())
    }

    /// Re-discretizes the same curve with a different panel bound.
    pub fn refined(&self, max_panel: f64) -> Self {
        Self {
            outline: self.outline.clone(),
            pieces: self.pieces.clone(),
            panels: discretize(&self.pieces, max_panel),
            hole_point: self.hole_point,
        }
    }

    /// Applies `z ↦ rot·z + shift` with |rot| = 1.
    pub(crate) fn transformed(&self, rot: C64, shift: C64) -> Self {
        let map = |z: C64| rot * z + shift;
        let outline = self
            .outline
            .iter()
            .map(|v| OutlineVertex {
                point: map(v.point),
                ..*v
            })
            .collect();
        let pieces = self
            .pieces
            .iter()
            .map(|tp| TaggedPiece {
                tag: tp.tag,
                piece: match tp.piece {
                    Piece::Line { start, dir, length } => Piece::Line {
                        start: map(start),
                        dir: rot * dir,
                        length,
                    },
                    Piece::Corner {
                        vertex,
                        dir_in,
                        dir_out,
                        half_width,
                    } => Piece::Corner {
                        vertex: map(vertex),
                        dir_in: rot * dir_in,
                        dir_out: rot * dir_out,
                        half_width,
                    },
                },
            })
            .collect();
        let panels = self
            .panels
            .iter()
            .map(|p| BoundaryPanel {
                z: p.z.iter().map(|&z| map(z)).collect(),
                dz: p.dz.iter().map(|&d| rot * d).collect(),
                d2z: p.d2z.iter().map(|&d| rot * d).collect(),
                ..p.clone()
            })
            .collect();
        Self {
            outline,
            pieces,
            panels,
            hole_point: self.hole_point.map(map),
        }
    }

    /// Scales lengths by `factor` about the origin.
    pub(crate) fn dilated(&self, factor: f64) -> Result<Self, GeometryError> {
        let outline = self
            .outline
            .iter()
            .map(|v| OutlineVertex {
                point: v.point * factor,
                smoothing: v.smoothing * factor,
                tag: v.tag,
            })
            .collect();
        let max_panel = self
            .panels
            .iter()
            .map(|p| p.length)
            .fold(0.0, f64::max)
            * factor;
        let mut c = Self::from_outline(outline, max_panel, self.hole_point.map(|z| z * factor))?;
        // keep the same panel layout, just scaled
        c.panels = self
            .panels
            .iter()
            .map(|p| {
                let (s0, s1) = (p.s0 * factor, p.s1 * factor);
                BoundaryPanel::new(&c.pieces, p.piece, s0, s1)
            })
            .collect();
        Ok(c)
    }
}

pub(crate) fn signed_area(points: &[C64]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|k| {
            let a = points[k];
            let b = points[(k + 1) % n];
            a.re * b.im - a.im * b.re
        })
        .sum::<f64>()
        * 0.5
}

/// Removes vertices where the polyline continues straight on.
pub(crate) fn drop_collinear(outline: Vec<OutlineVertex>) -> Result<Vec<OutlineVertex>, GeometryError> {
    let mut verts = outline;
    loop {
        let n = verts.len();
        if n < 3 {
            return Err(GeometryError::InvalidSkeleton(
                "closed outline needs at least three corners".into(),
            ));
        }
        let mut removed = false;
        for k in 0..n {
            let prev = verts[(k + n - 1) % n].point;
            let cur = verts[k].point;
            let next = verts[(k + 1) % n].point;
            let e_in = cur - prev;
            let e_out = next - cur;
            let scale = e_in.norm() * e_out.norm();
            if scale == 0.0 {
                verts.remove(k);
                removed = true;
                break;
            }
            let cross = (e_in.conj() * e_out).im / scale;
            let dot = (e_in.conj() * e_out).re / scale;
            if cross.abs() < 1e-12 {
                if dot < 0.0 {
                    return Err(GeometryError::SelfIntersection(format!(
                        "wall folds back on itself at ({:.6}, {:.6})",
                        cur.re, cur.im
                    )));
                }
                verts.remove(k);
                removed = true;
                break;
            }
        }
        if !removed {
            return Ok(verts);
        }
    }
}

fn pieces_from_outline(outline: &[OutlineVertex]) -> Result<Vec<TaggedPiece>, GeometryError> {
    let n = outline.len();
    let mut pieces = Vec::with_capacity(2 * n);
    for k in 0..n {
        let prev = &outline[(k + n - 1) % n];
        let cur = &outline[k];
        let next = &outline[(k + 1) % n];
        if cur.smoothing <= 0.0 {
            return Err(GeometryError::SmoothingOverlap(format!(
                "corner at ({:.6}, {:.6}) has non-positive smoothing width; sharp corners are not supported",
                cur.point.re, cur.point.im
            )));
        }
        let dir_in = unit(cur.point - prev.point);
        let dir_out = unit(next.point - cur.point);
        pieces.push(TaggedPiece {
            piece: Piece::Corner {
                vertex: cur.point,
                dir_in,
                dir_out,
                half_width: cur.smoothing,
            },
            tag: cur.tag,
        });
        let seg = (next.point - cur.point).norm();
        let free = seg - cur.smoothing - next.smoothing;
        if free < -1e-12 * seg {
            return Err(GeometryError::SmoothingOverlap(format!(
                "segment ({:.6}, {:.6})-({:.6}, {:.6}) of length {:.6} is shorter than the smoothing widths {:.6} + {:.6}",
                cur.point.re, cur.point.im, next.point.re, next.point.im, seg, cur.smoothing, next.smoothing
            )));
        }
        if free > 1e-12 * seg {
            let tag = match (cur.tag, next.tag) {
                (BoundaryTag::Cap(a), BoundaryTag::Cap(b)) if a == b => cur.tag,
                _ => BoundaryTag::Wall,
            };
            pieces.push(TaggedPiece {
                piece: Piece::Line {
                    start: cur.point + dir_out * cur.smoothing,
                    dir: dir_out,
                    length: free,
                },
                tag,
            });
        }
    }
    Ok(pieces)
}

fn unit(z: C64) -> C64 {
    z / z.norm()
}

fn discretize(pieces: &[TaggedPiece], max_panel: f64) -> Vec<BoundaryPanel> {
    // (piece, s0, s1, length)
    let mut spans: Vec<(usize, f64, f64, f64)> = Vec::new();
    for (idx, tp) in pieces.iter().enumerate() {
        let (a, b) = tp.piece.param_range();
        let total = tp.piece.length_between(a, b);
        let mut stack: Vec<(f64, f64)> = match tp.piece {
            // the bump is flat to all orders at its ends: grade dyadically there
            Piece::Corner { half_width, .. } => CORNER_GRADING
                .windows(2)
                .rev()
                .map(|g| (g[0] * half_width, g[1] * half_width))
                .collect(),
            Piece::Line { .. } => {
                let count = ((total / max_panel) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
                (0..count)
                    .rev()
                    .map(|k| {
                        let h = (b - a) / count as f64;
                        (a + k as f64 * h, a + (k + 1) as f64 * h)
                    })
                    .collect()
            }
        };
        while let Some((s0, s1)) = stack.pop() {
            let len = tp.piece.length_between(s0, s1);
            let kappa = tp.piece.max_curvature_between(s0, s1);
            if (kappa * len > CURVATURE_PANEL_BOUND || len > max_panel * (1.0 + 1e-9))
                && (s1 - s0) > 1e-9 * (b - a)
            {
                let m = 0.5 * (s0 + s1);
                stack.push((m, s1));
                stack.push((s0, m));
            } else {
                spans.push((idx, s0, s1, len));
            }
        }
    }
    balance(pieces, &mut spans);
    spans
        .into_iter()
        .map(|(piece, s0, s1, _)| BoundaryPanel::new(pieces, piece, s0, s1))
        .collect()
}

/// Splits panels until neighbouring lengths differ by at most a factor two.
fn balance(pieces: &[TaggedPiece], spans: &mut Vec<(usize, f64, f64, f64)>) {
    loop {
        let n = spans.len();
        let mut split = None;
        for k in 0..n {
            let len = spans[k].3;
            let left = spans[(k + n - 1) % n].3;
            let right = spans[(k + 1) % n].3;
            if len > 2.0 * left.min(right) * (1.0 + 1e-9) {
                split = Some(k);
                break;
            }
        }
        let Some(k) = split else { return };
        let (piece, s0, s1, _) = spans[k];
        let m = 0.5 * (s0 + s1);
        let p = &pieces[piece].piece;
        let first = (piece, s0, m, p.length_between(s0, m));
        let second = (piece, m, s1, p.length_between(m, s1));
        spans.splice(k..=k, [first, second]);
    }
}
