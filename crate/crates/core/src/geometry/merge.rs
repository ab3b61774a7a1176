//! Full-domain boundaries of assembled networks: caps at joined interfaces
//! are removed and the wall polylines are relinked across the port planes.

use std::collections::HashMap;

use super::curve::{drop_collinear, signed_area, BoundaryTag, Contour, OutlineVertex};
use super::{winding_number, ComponentGeometry, GeometryError, Placement, Port};
use crate::C64;

/// (instance index, local port id).
pub type PortKey = (usize, usize);

/// A component geometry in its local frame together with its placement.
#[derive(Debug, Clone, Copy)]
pub struct PlacedComponent<'a> {
    pub geometry: &'a ComponentGeometry,
    pub placement: Placement,
}

/// Merged network domain. Ports of `geometry` are the unjoined ports,
/// renumbered 1.. in the order listed in `external_ports`.
#[derive(Debug, Clone)]
pub struct MergedDomain {
    pub geometry: ComponentGeometry,
    /// (instance, local port id) for each external port id - 1.
    pub external_ports: Vec<(usize, usize)>,
}

/// Checks that two placed ports can be joined: equal widths, coincident
/// centers and opposite axes within `1e-10·W`.
pub fn check_interface(a: &Port, b: &Port) -> Result<(), GeometryError> {
    let w = a.width();
    if (a.half_width - b.half_width).abs() > 1e-12 * w {
        return Err(GeometryError::WidthMismatch(format!(
            "port widths {} and {} differ",
            a.width(),
            b.width()
        )));
    }
    let offset = (a.center - b.center).norm();
    let axis = (a.axis + b.axis).norm();
    if offset > 1e-10 * w || axis > 1e-10 {
        return Err(GeometryError::MisalignedInterface(format!(
            "port planes at ({:.12}, {:.12}) and ({:.12}, {:.12}) do not coincide (offset {offset:.3e}, axis mismatch {axis:.3e})",
            a.center.re, a.center.im, b.center.re, b.center.im
        )));
    }
    Ok(())
}

/// Relinks the outlines of the placed components across the `joins`
/// ((instance, port), (instance, port)) and discretizes the resulting outer
/// curve and hole curves with panels no longer than `W / panels_per_width`.
pub fn merge_network_boundary(
    parts: &[PlacedComponent<'_>],
    joins: &[(PortKey, PortKey)],
    panels_per_width: f64,
) -> Result<MergedDomain, GeometryError> {
    if parts.is_empty() {
        return Err(GeometryError::InvalidSkeleton("network has no components".into()));
    }
    let width = parts[0].geometry.width;
    let mut outlines: Vec<Vec<OutlineVertex>> = Vec::with_capacity(parts.len());
    for (i, part) in parts.iter().enumerate() {
        if part.geometry.contours.len() != 1 {
            return Err(GeometryError::InvalidSkeleton(format!(
                "instance {i} is not simply connected"
            )));
        }
        if (part.geometry.width - width).abs() > 1e-12 * width {
            return Err(GeometryError::WidthMismatch(format!(
                "instance {i} has width {} but the network uses {width}",
                part.geometry.width
            )));
        }
        let rot = part.placement.rotation();
        outlines.push(
            part.geometry.contours[0]
                .outline
                .iter()
                .map(|v| OutlineVertex {
                    point: rot * v.point + part.placement.shift,
                    ..*v
                })
                .collect(),
        );
    }
    let placed_port = |inst: usize, port: usize| -> Result<Port, GeometryError> {
        let part = parts
            .get(inst)
            .ok_or_else(|| GeometryError::InvalidSkeleton(format!("instance {inst} does not exist")))?;
        part.geometry
            .port(port)
            .map(|p| p.placed(&part.placement))
            .ok_or_else(|| GeometryError::InvalidSkeleton(format!("instance {inst} has no port {port}")))
    };

    // cap vertex pair (first, second) of each port in outline order
    let cap_span = |inst: usize, port: usize| -> Result<(usize, usize), GeometryError> {
        let o = &outlines[inst];
        let n = o.len();
        (0..n)
            .find(|&k| o[k].tag == BoundaryTag::Cap(port) && o[(k + 1) % n].tag == BoundaryTag::Cap(port))
            .map(|k| (k, (k + 1) % n))
            .ok_or_else(|| GeometryError::InvalidSkeleton(format!("instance {inst} port {port} has no cap")))
    };

    // successor of each surviving vertex
    let mut next: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    for (i, o) in outlines.iter().enumerate() {
        for k in 0..o.len() {
            next.insert((i, k), (i, (k + 1) % o.len()));
        }
    }
    let mut joined: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    for &((ia, pa), (ib, pb)) in joins {
        check_interface(&placed_port(ia, pa)?, &placed_port(ib, pb)?)?;
        for key in [(ia, pa), (ib, pb)] {
            if joined.insert(key, key).is_some() {
                return Err(GeometryError::InvalidSkeleton(format!(
                    "instance {} port {} is joined twice",
                    key.0, key.1
                )));
            }
        }
        let (a0, a1) = cap_span(ia, pa)?;
        let (b0, b1) = cap_span(ib, pb)?;
        let na = outlines[ia].len();
        let nb = outlines[ib].len();
        // a's right wall continues as b's left wall and vice versa
        next.remove(&(ia, a0));
        next.remove(&(ia, a1));
        next.remove(&(ib, b0));
        next.remove(&(ib, b1));
        next.insert((ia, (a0 + na - 1) % na), (ib, (b1 + 1) % nb));
        next.insert((ib, (b0 + nb - 1) % nb), (ia, (a1 + 1) % na));
    }

    // external ports, renumbered
    let mut external_ports = Vec::new();
    let mut renumber: HashMap<(usize, usize), usize> = HashMap::new();
    let mut ports = Vec::new();
    for (i, part) in parts.iter().enumerate() {
        for p in &part.geometry.ports {
            if !joined.contains_key(&(i, p.id)) {
                external_ports.push((i, p.id));
                let id = external_ports.len();
                renumber.insert((i, p.id), id);
                ports.push(Port {
                    id,
                    ..p.placed(&part.placement)
                });
            }
        }
    }

    // walk the successor map into closed loops
    let mut keys: Vec<(usize, usize)> = next.keys().copied().collect();
    keys.sort_unstable();
    let mut visited: HashMap<(usize, usize), bool> = HashMap::new();
    let mut loops: Vec<Vec<OutlineVertex>> = Vec::new();
    for start in keys {
        if visited.contains_key(&start) {
            continue;
        }
        let mut cycle = Vec::new();
        let mut cur = start;
        loop {
            visited.insert(cur, true);
            let mut v = outlines[cur.0][cur.1];
            if let BoundaryTag::Cap(p) = v.tag {
                v.tag = BoundaryTag::Cap(renumber[&(cur.0, p)]);
            }
            cycle.push(v);
            cur = *next.get(&cur).ok_or_else(|| {
                GeometryError::InvalidSkeleton("boundary relinking left an open chain".into())
            })?;
            if cur == start {
                break;
            }
            if visited.contains_key(&cur) {
                return Err(GeometryError::SelfIntersection("boundary relinking is not a permutation".into()));
            }
        }
        loops.push(drop_collinear(cycle)?);
    }

    let areas: Vec<f64> = loops
        .iter()
        .map(|l| signed_area(&l.iter().map(|v| v.point).collect::<Vec<_>>()))
        .collect();
    let outer = (0..loops.len())
        .max_by(|&a, &b| areas[a].total_cmp(&areas[b]))
        .expect("at least one loop");
    if areas[outer] <= 0.0 || areas.iter().enumerate().any(|(k, &a)| k != outer && a >= 0.0) {
        return Err(GeometryError::SelfIntersection(
            "merged boundary does not split into one outer curve and clockwise holes".into(),
        ));
    }

    let max_panel = width / panels_per_width.max(2.0);
    let mut contours = vec![Contour::from_outline(loops[outer].clone(), max_panel, None)?];
    for (k, l) in loops.iter().enumerate() {
        if k != outer {
            let pts: Vec<C64> = l.iter().map(|v| v.point).collect();
            contours.push(Contour::from_outline(l.clone(), max_panel, Some(hole_point(&pts)))?);
        }
    }
    let name = parts
        .iter()
        .map(|p| p.geometry.name.as_str())
        .collect::<Vec<_>>()
        .join("+");
    Ok(MergedDomain {
        geometry: ComponentGeometry {
            name,
            width,
            panels_per_width: panels_per_width.max(2.0),
            ports,
            contours,
        },
        external_ports,
    })
}

fn distance_to_polyline(pts: &[C64], z: C64) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|k| {
            let (a, b) = (pts[k], pts[(k + 1) % n]);
            let e = b - a;
            let t = (((z - a) * e.conj()).re / e.norm_sqr()).clamp(0.0, 1.0);
            (z - a - e * t).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Point well inside a clockwise hole polygon: grid search for the largest
/// distance to the polygon, refined once around the best cell.
fn hole_point(pts: &[C64]) -> C64 {
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for p in pts {
        lo = C64::new(lo.re.min(p.re), lo.im.min(p.im));
        hi = C64::new(hi.re.max(p.re), hi.im.max(p.im));
    }
    let inside = |z: C64| winding_number(pts, z).abs() > 0.5;
    let mut best = (0.5 * (lo + hi), -1.0);
    let mut span = hi - lo;
    let mut center = 0.5 * (lo + hi);
    for _ in 0..3 {
        let m = 40;
        for i in 0..=m {
            for j in 0..=m {
                let z = center
                    + C64::new(span.re * (i as f64 / m as f64 - 0.5), span.im * (j as f64 / m as f64 - 0.5));
                if inside(z) {
                    let d = distance_to_polyline(pts, z);
                    if d > best.1 {
                        best = (z, d);
                    }
                }
            }
        }
        center = best.0;
        span *= 0.1;
    }
    best.0
}
