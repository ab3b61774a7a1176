//! Smooth discretized boundaries of channel components and of merged
//! network domains.
//!
//! A component is described by a centerline skeleton. Its walls are offset
//! polylines at distance W/2; every polyline corner is replaced by the
//! convolution of the polyline with a C∞ bump, which keeps straight parts
//! exactly straight. Each port is closed by a rounded cap beyond the port
//! plane. The resulting closed curve is split into Gauss–Legendre panels.

mod bump;
pub mod components;
mod curve;
mod merge;
mod skeleton;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use curve::{
    BoundaryPanel, BoundaryTag, Contour, CurvePoint, OutlineVertex, Piece, TaggedPiece, CURVATURE_PANEL_BOUND,
    PANEL_ORDER,
};
pub use merge::{check_interface, merge_network_boundary, MergedDomain, PlacedComponent, PortKey};
pub use skeleton::{build_component, ArmSpec, CapStyle, SkeletonSpec};

use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("port {port}: straight run {actual:.6} is shorter than the required {required:.6}")]
    ArmTooShort { port: usize, actual: f64, required: f64 },
    #[error("self-intersection: {0}")]
    SelfIntersection(String),
    #[error("smoothing overlap: {0}")]
    SmoothingOverlap(String),
    #[error("misaligned interface: {0}")]
    MisalignedInterface(String),
    #[error("width mismatch: {0}")]
    WidthMismatch(String),
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),
}

/// Inlet/outlet cross-section of a component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Port {
    pub id: usize,
    /// Midpoint of the port plane.
    pub center: C64,
    /// Unit vector along the channel, pointing out of the component.
    pub axis: C64,
    pub half_width: f64,
    /// Straight wall length between the port plane and the nearest
    /// non-straight feature.
    pub straight_run: f64,
}

impl Port {
    pub fn width(&self) -> f64 {
        2.0 * self.half_width
    }

    /// Coordinates in the port frame: x along the axis (outward), y to the
    /// left of the axis.
    pub fn to_local(&self, z: C64) -> C64 {
        (z - self.center) * self.axis.conj()
    }

    pub fn from_local(&self, local: C64) -> C64 {
        self.center + local * self.axis
    }

    pub fn placed(&self, placement: &Placement) -> Port {
        Port {
            center: placement.apply_point(self.center),
            axis: placement.apply_vector(self.axis),
            ..*self
        }
    }
}

/// Orientation-preserving rigid motion `z ↦ e^{iθ} z + c`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Placement {
    pub angle: f64,
    pub shift: C64,
}

impl Placement {
    pub const IDENTITY: Placement = Placement {
        angle: 0.0,
        shift: C64::new(0.0, 0.0),
    };

    pub fn new(angle: f64, shift: C64) -> Self {
        Self { angle, shift }
    }

    /// e^{iθ}, exact for multiples of a quarter turn.
    pub fn rotation(&self) -> C64 {
        let quarter = self.angle / std::f64::consts::FRAC_PI_2;
        let nearest = quarter.round();
        if (quarter - nearest).abs() < 1e-14 {
            match (nearest as i64).rem_euclid(4) {
                0 => C64::new(1.0, 0.0),
                1 => C64::new(0.0, 1.0),
                2 => C64::new(-1.0, 0.0),
                _ => C64::new(0.0, -1.0),
            }
        } else {
            C64::from_polar(1.0, self.angle)
        }
    }

    pub fn apply_point(&self, z: C64) -> C64 {
        self.rotation() * z + self.shift
    }

    pub fn apply_vector(&self, v: C64) -> C64 {
        self.rotation() * v
    }

    pub fn invert_point(&self, z: C64) -> C64 {
        self.rotation().conj() * (z - self.shift)
    }

    pub fn invert_vector(&self, v: C64) -> C64 {
        self.rotation().conj() * v
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Placement) -> Placement {
        Placement {
            angle: self.angle + other.angle,
            shift: self.rotation() * other.shift + self.shift,
        }
    }

    pub fn inverse(&self) -> Placement {
        Placement {
            angle: -self.angle,
            shift: -(self.rotation().conj() * self.shift),
        }
    }
}

/// Discretized boundary of a component (one closed curve) or of a merged
/// network domain (outer curve followed by hole curves).
#[derive(Debug, Clone)]
pub struct ComponentGeometry {
    pub name: String,
    pub width: f64,
    pub panels_per_width: f64,
    pub ports: Vec<Port>,
    pub contours: Vec<Contour>,
}

impl ComponentGeometry {
    pub fn hole_count(&self) -> usize {
        self.contours.len().saturating_sub(1)
    }

    pub fn node_count(&self) -> usize {
        self.contours.iter().map(Contour::node_count).sum()
    }

    pub fn panel_count(&self) -> usize {
        self.contours.iter().map(|c| c.panels.len()).sum()
    }

    pub fn perimeter(&self) -> f64 {
        self.contours.iter().map(Contour::perimeter).sum()
    }

    pub fn port(&self, id: usize) -> Option<&Port> {
        self.ports.iter().find(|p| p.id == id)
    }

    pub fn panels(&self) -> impl Iterator<Item = &BoundaryPanel> {
        self.contours.iter().flat_map(|c| c.panels.iter())
    }

    /// Same curves, re-paneled with `panels_per_width` panels across W on
    /// straight parts; corners keep the curvature bound.
    pub fn discretize_settings(&self, panels_per_width: f64) -> ComponentGeometry {
        let ppw = panels_per_width.max(2.0);
        ComponentGeometry {
            contours: self.contours.iter().map(|c| c.refined(self.width / ppw)).collect(),
            panels_per_width: ppw,
            ..self.clone()
        }
    }

    pub fn apply_placement(&self, placement: &Placement) -> ComponentGeometry {
        let rot = placement.rotation();
        ComponentGeometry {
            name: self.name.clone(),
            width: self.width,
            panels_per_width: self.panels_per_width,
            ports: self.ports.iter().map(|p| p.placed(placement)).collect(),
            contours: self.contours.iter().map(|c| c.transformed(rot, placement.shift)).collect(),
        }
    }

    /// Uniform dilation about the origin with identical panel layout.
    pub fn dilated(&self, factor: f64) -> Result<ComponentGeometry, GeometryError> {
        Ok(ComponentGeometry {
            name: self.name.clone(),
            width: self.width * factor,
            panels_per_width: self.panels_per_width,
            ports: self
                .ports
                .iter()
                .map(|p| Port {
                    center: p.center * factor,
                    half_width: p.half_width * factor,
                    straight_run: p.straight_run * factor,
                    ..*p
                })
                .collect(),
            contours: self.contours.iter().map(|c| c.dilated(factor)).collect::<Result<_, _>>()?,
        })
    }

    /// Winding-number test against the node polygons of all contours.
    pub fn contains(&self, z: C64) -> bool {
        let winding: f64 = self
            .contours
            .iter()
            .map(|c| {
                let pts: Vec<C64> = c.panels.iter().flat_map(|p| p.z.iter().copied()).collect();
                winding_number(&pts, z)
            })
            .sum();
        winding.round() as i64 == 1
    }

    /// Hex SHA-256 of the node coordinates, port table and width.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.width.to_le_bytes());
        for p in &self.ports {
            for v in [p.center.re, p.center.im, p.axis.re, p.axis.im, p.half_width] {
                h.update(v.to_le_bytes());
            }
        }
        for panel in self.panels() {
            for z in &panel.z {
                h.update(z.re.to_le_bytes());
                h.update(z.im.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Winding number of the closed polygon `pts` around `z`.
pub(crate) fn winding_number(pts: &[C64], z: C64) -> f64 {
    let n = pts.len();
    let total: f64 = (0..n)
        .map(|k| ((pts[(k + 1) % n] - z) / (pts[k] - z)).arg())
        .sum();
    total / (2.0 * std::f64::consts::PI)
}
