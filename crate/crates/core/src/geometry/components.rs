//! Standard channel pieces: straight channel, elbow, cross and Y-junction.

use super::{build_component, ArmSpec, CapStyle, ComponentGeometry, GeometryError, SkeletonSpec};
use crate::C64;

fn arm(path: Vec<usize>) -> ArmSpec {
    ArmSpec {
        path,
        straight_run: None,
        cap: CapStyle::Rounded,
    }
}

/// Arm length from the junction to the port plane that leaves `run` of
/// straight wall in front of the port of a cross or elbow.
pub fn arm_length(width: f64, smoothing: f64, run: f64) -> f64 {
    run + 0.5 * width + smoothing
}

/// Straight channel along x with port planes at x = ±length/2; port 1 at
/// -x, port 2 at +x.
pub fn straight_spec(width: f64, length: f64) -> SkeletonSpec {
    let mut s = SkeletonSpec::new(
        "straight",
        width,
        vec![C64::new(0.0, 0.0), C64::new(-0.5 * length, 0.0), C64::new(0.5 * length, 0.0)],
        vec![arm(vec![0, 1]), arm(vec![0, 2])],
    );
    s.min_straight_run = s.min_straight_run.min(length);
    s
}

pub fn straight(width: f64, length: f64) -> Result<ComponentGeometry, GeometryError> {
    build_component(&straight_spec(width, length))
}

/// Four-way cross centered at the origin with ports at distance `arm_len`:
/// 1 at -x, 2 at +y, 3 at +x, 4 at -y.
pub fn cross_spec(width: f64, arm_len: f64) -> SkeletonSpec {
    let a = arm_len;
    SkeletonSpec::new(
        "cross",
        width,
        vec![
            C64::new(0.0, 0.0),
            C64::new(-a, 0.0),
            C64::new(0.0, a),
            C64::new(a, 0.0),
            C64::new(0.0, -a),
        ],
        vec![arm(vec![0, 1]), arm(vec![0, 2]), arm(vec![0, 3]), arm(vec![0, 4])],
    )
}

pub fn cross(width: f64, arm_len: f64) -> Result<ComponentGeometry, GeometryError> {
    build_component(&cross_spec(width, arm_len))
}

/// Right-angle elbow with the corner at the origin: port 1 at -x, port 2
/// at -y.
pub fn elbow_spec(width: f64, arm_len: f64) -> SkeletonSpec {
    let a = arm_len;
    SkeletonSpec::new(
        "elbow",
        width,
        vec![C64::new(0.0, 0.0), C64::new(-a, 0.0), C64::new(0.0, -a)],
        vec![arm(vec![0, 1]), arm(vec![0, 2])],
    )
}

pub fn elbow(width: f64, arm_len: f64) -> Result<ComponentGeometry, GeometryError> {
    build_component(&elbow_spec(width, arm_len))
}

/// Layout of a Y-junction: inlet (port 1) along -x from the junction at the
/// origin, outlets (ports 2 and 3) at (`reach`, ±`spread`) pointing along
/// +x. Each outlet branch leaves the junction diagonally and bends to
/// horizontal `run_up` / `run_down` before its port plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YLayout {
    pub width: f64,
    pub inlet_len: f64,
    pub reach: f64,
    pub spread: f64,
    pub run_up: f64,
    pub run_down: f64,
}

impl YLayout {
    /// Mirror-symmetric layout with branches at ±`angle` and straight runs
    /// of at least `run` in front of every port.
    pub fn symmetric(width: f64, run: f64, spread: f64, angle: f64) -> Self {
        let delta = 0.25 * width;
        // the bend eats part of the horizontal leg; leave room for its smoothing
        let leg = run + width * (0.5 * angle).tan() + delta;
        Self {
            width,
            inlet_len: arm_length(width, delta, run) + width,
            reach: spread / angle.tan() + leg,
            spread,
            run_up: leg,
            run_down: leg,
        }
    }

    pub fn spec(&self, name: &str) -> SkeletonSpec {
        let (x, y) = (self.reach, self.spread);
        SkeletonSpec::new(
            name,
            self.width,
            vec![
                C64::new(0.0, 0.0),
                C64::new(-self.inlet_len, 0.0),
                C64::new(x - self.run_up, y),
                C64::new(x, y),
                C64::new(x - self.run_down, -y),
                C64::new(x, -y),
            ],
            vec![arm(vec![0, 1]), arm(vec![0, 2, 3]), arm(vec![0, 4, 5])],
        )
    }

    pub fn build(&self, name: &str) -> Result<ComponentGeometry, GeometryError> {
        build_component(&self.spec(name))
    }
}
