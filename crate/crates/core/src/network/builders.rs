//! Standard networks: the n×n cross/elbow grid, the two-Y loop and the
//! three-Y tree, plus a lumped-resistance library for large grids.

use std::f64::consts::PI;

use super::{ComponentLibrary, LibraryEntry, NetworkSpec, PortRef};
use crate::geometry::{Placement, Port};
use crate::scattering::ScatteringMatrix;
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    West,
    North,
    East,
    South,
}

/// n×n lattice of crosses with centres at (2a·col, −2a·row); the top-right
/// and bottom-left corners are elbows. Flux `inflow` enters at the left port
/// of the top-left piece and leaves at the right port of the bottom-right
/// piece; every other open port carries zero flux. `arm` is the distance
/// from a piece's centre to its port planes.
pub fn grid_network(n: usize, cross: &str, elbow: &str, arm: f64, inflow: f64) -> NetworkSpec {
    let mut spec = NetworkSpec::default();
    if n == 0 {
        return spec;
    }
    if n == 1 {
        let c = spec.add_instance(cross, Placement::IDENTITY);
        spec.external(PortRef::new(c, 1), -inflow);
        spec.external(PortRef::new(c, 2), 0.0);
        spec.external(PortRef::new(c, 3), inflow);
        spec.external(PortRef::new(c, 4), 0.0);
        return spec;
    }
    let is_top_right = |r: usize, c: usize| r == 0 && c == n - 1;
    let is_bottom_left = |r: usize, c: usize| r == n - 1 && c == 0;
    for r in 0..n {
        for c in 0..n {
            let shift = C64::new(2.0 * arm * c as f64, -2.0 * arm * r as f64);
            if is_top_right(r, c) {
                spec.add_instance(elbow, Placement::new(0.0, shift));
            } else if is_bottom_left(r, c) {
                spec.add_instance(elbow, Placement::new(PI, shift));
            } else {
                spec.add_instance(cross, Placement::new(0.0, shift));
            }
        }
    }
    let port = |r: usize, c: usize, side: Side| -> Option<usize> {
        if is_top_right(r, c) {
            match side {
                Side::West => Some(1),
                Side::South => Some(2),
                _ => None,
            }
        } else if is_bottom_left(r, c) {
            match side {
                Side::East => Some(1),
                Side::North => Some(2),
                _ => None,
            }
        } else {
            Some(match side {
                Side::West => 1,
                Side::North => 2,
                Side::East => 3,
                Side::South => 4,
            })
        }
    };
    let id = |r: usize, c: usize| n * r + c;
    for r in 0..n {
        for c in 0..n {
            if c + 1 < n {
                let a = PortRef::new(id(r, c), port(r, c, Side::East).expect("interior east port"));
                let b = PortRef::new(id(r, c + 1), port(r, c + 1, Side::West).expect("interior west port"));
                spec.join(a, b);
            }
            if r + 1 < n {
                let a = PortRef::new(id(r, c), port(r, c, Side::South).expect("interior south port"));
                let b = PortRef::new(id(r + 1, c), port(r + 1, c, Side::North).expect("interior north port"));
                spec.join(a, b);
            }
        }
    }
    for r in 0..n {
        for c in 0..n {
            let outward = [
                (Side::West, c == 0),
                (Side::North, r == 0),
                (Side::East, c == n - 1),
                (Side::South, r == n - 1),
            ];
            for (side, open) in outward {
                let Some(p) = port(r, c, side).filter(|_| open) else { continue };
                let flux = match (r, c, side) {
                    (0, 0, Side::West) => -inflow,
                    _ if r == n - 1 && c == n - 1 && side == Side::East => inflow,
                    _ => 0.0,
                };
                spec.external(PortRef::new(id(r, c), p), flux);
            }
        }
    }
    spec
}

/// Y-junction `first` at the origin and `second` rotated by π about the
/// origin and shifted by (2·reach, 0), so that its outlets meet the outlets
/// of `first` crosswise. Flux enters at port 1 of `first` and leaves at
/// port 1 of `second`.
pub fn two_y_loop(first: &str, second: &str, reach: f64, inflow: f64) -> NetworkSpec {
    let mut spec = NetworkSpec::default();
    let a = spec.add_instance(first, Placement::IDENTITY);
    let b = spec.add_instance(second, Placement::new(PI, C64::new(2.0 * reach, 0.0)));
    spec.join(PortRef::new(a, 2), PortRef::new(b, 3));
    spec.join(PortRef::new(a, 3), PortRef::new(b, 2));
    spec.external(PortRef::new(a, 1), -inflow);
    spec.external(PortRef::new(b, 1), inflow);
    spec
}

/// Root Y-junction with outlets at (reach, ±spread) feeding two child
/// Y-junctions whose inlets have length `child_inlet`. `outflows` are
/// F₁..F₄ at the child outlets (upper child first).
pub fn y_tree(root: &str, child: &str, reach: f64, spread: f64, child_inlet: f64, outflows: [f64; 4]) -> NetworkSpec {
    let mut spec = NetworkSpec::default();
    let r = spec.add_instance(root, Placement::IDENTITY);
    let up = spec.add_instance(child, Placement::new(0.0, C64::new(reach + child_inlet, spread)));
    let down = spec.add_instance(child, Placement::new(0.0, C64::new(reach + child_inlet, -spread)));
    spec.join(PortRef::new(r, 2), PortRef::new(up, 1));
    spec.join(PortRef::new(r, 3), PortRef::new(down, 1));
    spec.external(PortRef::new(r, 1), -outflows.iter().sum::<f64>());
    spec.external(PortRef::new(up, 2), outflows[0]);
    spec.external(PortRef::new(up, 3), outflows[1]);
    spec.external(PortRef::new(down, 2), outflows[2]);
    spec.external(PortRef::new(down, 3), outflows[3]);
    spec
}

fn port(id: usize, center: C64, axis: C64, width: f64) -> Port {
    Port {
        id,
        center,
        axis,
        half_width: 0.5 * width,
        straight_run: f64::INFINITY,
    }
}

fn lumped_matrix(matrix: Vec<Vec<f64>>, width: f64, name: &str) -> ScatteringMatrix {
    let m = matrix.len() + 1;
    ScatteringMatrix {
        matrix,
        viscosity: 1.0,
        widths: vec![width; m],
        straight_runs: vec![f64::INFINITY; m],
        tolerance: 0.0,
        geometry_hash: format!("lumped-{name}"),
        warnings: Vec::new(),
    }
}

/// Cross and elbow modelled as arms of resistance `resistance` meeting at a
/// node: S = −R(I + 11ᵀ) for the cross and S = [−2R] for the elbow, with
/// the port layout of [`grid_network`].
pub fn lumped_grid_library(cross: &str, elbow: &str, arm: f64, width: f64, resistance: f64) -> ComponentLibrary {
    let r = resistance;
    let x = C64::new(1.0, 0.0);
    let y = C64::new(0.0, 1.0);
    let cross_ports = vec![
        port(1, -x * arm, -x, width),
        port(2, y * arm, y, width),
        port(3, x * arm, x, width),
        port(4, -y * arm, -y, width),
    ];
    let cross_s = (0..3)
        .map(|i| (0..3).map(|k| -r * (1.0 + if i == k { 1.0 } else { 0.0 })).collect())
        .collect();
    let elbow_ports = vec![port(1, -x * arm, -x, width), port(2, -y * arm, -y, width)];
    let mut lib = ComponentLibrary::new();
    lib.insert(LibraryEntry::new(cross, cross_ports, lumped_matrix(cross_s, width, cross)).expect("consistent lumped cross"));
    lib.insert(
        LibraryEntry::new(elbow, elbow_ports, lumped_matrix(vec![vec![-2.0 * r]], width, elbow))
            .expect("consistent lumped elbow"),
    );
    lib
}
