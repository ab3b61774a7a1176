//! Channel pieces from centerline skeletons: offset walls, smoothed
//! corners and rounded port caps.

use super::curve::{drop_collinear, signed_area, BoundaryTag, Contour, OutlineVertex};
use super::{ComponentGeometry, GeometryError, Port};
use crate::C64;

/// Shape of the closure placed beyond a port plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CapStyle {
    /// Square end convolved with a bump of half-width L: bulges L beyond the
    /// port plane and blends into the walls exactly at the plane.
    #[default]
    Rounded,
}

/// One arm of the skeleton: a centerline path from the junction vertex to
/// the port center, given as indices into `SkeletonSpec::vertices`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSpec {
    pub path: Vec<usize>,
    /// Required straight wall length in front of the port; falls back to the
    /// `SkeletonSpec::min_straight_run` when `None`.
    pub straight_run: Option<f64>,
    pub cap: CapStyle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSpec {
    pub name: String,
    pub width: f64,
    /// Corner smoothing half-width δ.
    pub smoothing: f64,
    pub vertices: Vec<C64>,
    /// Port ids follow arm order, starting at 1.
    pub arms: Vec<ArmSpec>,
    pub panels_per_width: f64,
    pub min_straight_run: f64,
}

impl SkeletonSpec {
    /// Spec with default smoothing W/4, four panels per width and minimum
    /// straight run 4W.
    pub fn new(name: impl Into<String>, width: f64, vertices: Vec<C64>, arms: Vec<ArmSpec>) -> Self {
        Self {
            name: name.into(),
            width,
            smoothing: 0.25 * width,
            vertices,
            arms,
            panels_per_width: 4.0,
            min_straight_run: 4.0 * width,
        }
    }
}

/// Intersection of the lines `p + t·d` and `q + s·e`; `None` if parallel.
pub(crate) fn line_intersection(p: C64, d: C64, q: C64, e: C64) -> Option<C64> {
    let denom = (d.conj() * e).im;
    if denom.abs() < 1e-12 * d.norm() * e.norm() {
        return None;
    }
    let t = ((q - p).conj() * e).im / denom;
    Some(p + d * t)
}

struct ArmWalls {
    dirs: Vec<C64>,
    end: C64,
    right_bends: Vec<C64>,
    left_bends: Vec<C64>,
}

fn arm_walls(points: &[C64], half: f64) -> Result<ArmWalls, GeometryError> {
    let dirs: Vec<C64> = points
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            d / d.norm()
        })
        .collect();
    let mut right_bends = Vec::new();
    let mut left_bends = Vec::new();
    for k in 1..dirs.len() {
        let bend = points[k];
        let (d0, d1) = (dirs[k - 1], dirs[k]);
        for (side, out) in [(-1.0, &mut right_bends), (1.0, &mut left_bends)] {
            let n0 = C64::i() * d0 * (side * half);
            let n1 = C64::i() * d1 * (side * half);
            match line_intersection(bend + n0, d0, bend + n1, d1) {
                Some(p) => out.push(p),
                None if (d0 - d1).norm() < 1e-12 => {}
                None => {
                    return Err(GeometryError::SelfIntersection(format!(
                        "arm reverses direction at ({:.6}, {:.6})",
                        bend.re, bend.im
                    )))
                }
            }
        }
    }
    Ok(ArmWalls {
        end: *points.last().expect("arm has points"),
        dirs,
        right_bends,
        left_bends,
    })
}

pub fn build_component(spec: &SkeletonSpec) -> Result<ComponentGeometry, GeometryError> {
    let w = spec.width;
    if !(w > 0.0) {
        return Err(GeometryError::InvalidSkeleton("channel width must be positive".into()));
    }
    if !(spec.smoothing > 0.0) {
        return Err(GeometryError::SmoothingOverlap(
            "corner smoothing width must be positive; sharp corners are not supported".into(),
        ));
    }
    if spec.panels_per_width < 2.0 {
        return Err(GeometryError::InvalidSkeleton("panels_per_width must be at least 2".into()));
    }
    if spec.arms.len() < 2 {
        return Err(GeometryError::InvalidSkeleton("a component needs at least two ports".into()));
    }
    let half = 0.5 * w;
    let junction_idx = spec.arms[0].path.first().copied();
    let mut arms = Vec::with_capacity(spec.arms.len());
    for (k, arm) in spec.arms.iter().enumerate() {
        if arm.path.len() < 2 || arm.path.first().copied() != junction_idx {
            return Err(GeometryError::InvalidSkeleton(format!(
                "arm {} must start at the shared junction vertex and have at least two vertices",
                k + 1
            )));
        }
        let pts: Vec<C64> = arm
            .path
            .iter()
            .map(|&i| {
                spec.vertices.get(i).copied().ok_or_else(|| {
                    GeometryError::InvalidSkeleton(format!("arm {} references missing vertex {i}", k + 1))
                })
            })
            .collect::<Result<_, _>>()?;
        if pts.windows(2).any(|p| (p[1] - p[0]).norm() <= 1e-12 * w) {
            return Err(GeometryError::InvalidSkeleton(format!("arm {} has a zero-length segment", k + 1)));
        }
        arms.push(arm_walls(&pts, half)?);
    }
    let junction = spec.vertices[junction_idx.expect("checked above")];

    // counterclockwise order of the arms around the junction
    let mut order: Vec<usize> = (0..arms.len()).collect();
    order.sort_by(|&a, &b| arms[a].dirs[0].arg().total_cmp(&arms[b].dirs[0].arg()));
    for pair in order.windows(2) {
        if (arms[pair[0]].dirs[0] - arms[pair[1]].dirs[0]).norm() < 1e-9 {
            return Err(GeometryError::SelfIntersection("two arms leave the junction in the same direction".into()));
        }
    }

    let delta = spec.smoothing;
    let wall = |point| OutlineVertex {
        point,
        smoothing: delta,
        tag: BoundaryTag::Wall,
    };
    let mut outline = Vec::new();
    for (pos, &a) in order.iter().enumerate() {
        let prev = &arms[order[(pos + order.len() - 1) % order.len()]];
        let arm = &arms[a];
        let (dp, da) = (prev.dirs[0], arm.dirs[0]);
        match line_intersection(junction + C64::i() * dp * half, dp, junction - C64::i() * da * half, da) {
            Some(p) => outline.push(wall(p)),
            // antiparallel neighbours: walls continue straight through
            None => outline.push(wall(junction + C64::i() * dp * half)),
        }
        outline.extend(arm.right_bends.iter().copied().map(wall));
        let d = *arm.dirs.last().expect("arm has a segment");
        let cap_tag = BoundaryTag::Cap(a + 1);
        for side in [-1.0, 1.0] {
            outline.push(OutlineVertex {
                point: arm.end + d * half + C64::i() * d * (side * half),
                smoothing: half,
                tag: cap_tag,
            });
        }
        outline.extend(arm.left_bends.iter().rev().copied().map(wall));
    }
    let outline = drop_collinear(outline)?;
    check_simple(&outline)?;
    if signed_area(&outline.iter().map(|v| v.point).collect::<Vec<_>>()) <= 0.0 {
        return Err(GeometryError::SelfIntersection("outline is not counterclockwise".into()));
    }

    let mut ports = Vec::with_capacity(arms.len());
    for (a, arm) in arms.iter().enumerate() {
        let d = *arm.dirs.last().expect("arm has a segment");
        let id = a + 1;
        let run = straight_run(&outline, id, arm.end, d, half)?;
        let required = spec.arms[a].straight_run.unwrap_or(spec.min_straight_run);
        if run < required * (1.0 - 1e-12) {
            return Err(GeometryError::ArmTooShort {
                port: id,
                actual: run,
                required,
            });
        }
        ports.push(Port {
            id,
            center: arm.end,
            axis: d,
            half_width: half,
            straight_run: run,
        });
    }

    let contour = Contour::from_outline(outline, w / spec.panels_per_width, None)?;
    Ok(ComponentGeometry {
        name: spec.name.clone(),
        width: w,
        panels_per_width: spec.panels_per_width,
        ports,
        contours: vec![contour],
    })
}

/// Straight wall length between the port plane and the nearest smoothing
/// zone, minimum over both walls.
fn straight_run(outline: &[OutlineVertex], id: usize, end: C64, d: C64, half: f64) -> Result<f64, GeometryError> {
    let n = outline.len();
    let first_cap = (0..n)
        .find(|&k| outline[k].tag == BoundaryTag::Cap(id) && outline[(k + 1) % n].tag == BoundaryTag::Cap(id))
        .ok_or_else(|| GeometryError::InvalidSkeleton(format!("cap of port {id} was lost")))?;
    let before = &outline[(first_cap + n - 1) % n];
    let after = &outline[(first_cap + 2) % n];
    let right = end - C64::i() * d * half;
    let left = end + C64::i() * d * half;
    let run_right = (right - before.point).norm() - before.smoothing;
    let run_left = (left - after.point).norm() - after.smoothing;
    // the neighbours must sit behind the port plane on the wall lines
    for (v, p) in [(before.point, right), (after.point, left)] {
        let rel = (v - p) * d.conj();
        if rel.re > 0.0 || rel.im.abs() > 1e-9 * half {
            return Err(GeometryError::SelfIntersection(format!(
                "wall in front of port {id} is not straight"
            )));
        }
    }
    Ok(run_right.min(run_left))
}

fn segments_cross(a: C64, b: C64, c: C64, d: C64) -> bool {
    let orient = |p: C64, q: C64, r: C64| ((q - p).conj() * (r - p)).im;
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

fn check_simple(outline: &[OutlineVertex]) -> Result<(), GeometryError> {
    let n = outline.len();
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (a, b) = (outline[i].point, outline[(i + 1) % n].point);
            let (c, d) = (outline[j].point, outline[(j + 1) % n].point);
            if segments_cross(a, b, c, d) {
                return Err(GeometryError::SelfIntersection(format!(
                    "wall segments near ({:.6}, {:.6}) and ({:.6}, {:.6}) cross",
                    a.re, a.im, c.re, c.im
                )));
            }
        }
    }
    Ok(())
}
