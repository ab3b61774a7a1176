use super::*;
use crate::geometry::components::{straight, YLayout};

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

fn channel() -> Boundary {
    Boundary::new(&straight(1.0, 4.0).unwrap()).unwrap()
}

#[test]
fn zero_density_maps_to_zero() {
    let b = channel();
    let out = b.apply_sl_operator(&vec![C64::new(0.0, 0.0); b.len()]).unwrap();
    assert!(out.iter().all(|v| v.norm() == 0.0));
}

#[test]
fn wrong_length_is_rejected() {
    let b = channel();
    let err = b.apply_sl_operator(&[C64::new(1.0, 0.0)]).unwrap_err();
    assert!(matches!(err, BieError::DimensionMismatch { .. }));
}

#[test]
fn zero_data_gives_zero_density() {
    let b = channel();
    let d = b.solve(&vec![C64::new(0.0, 0.0); b.len()], &cfg()).unwrap();
    assert!(d.omega.iter().all(|v| v.norm() == 0.0));
    let u = eval_velocity(&b, &d, C64::new(0.3, 0.1), &cfg()).unwrap();
    assert_eq!(u, C64::new(0.0, 0.0));
}

#[test]
fn manufactured_pair_is_reproduced() {
    let b = channel();
    let z0 = C64::new(0.7, 1.6);
    let phi = |z: C64| 1.0 / (z - z0);
    let dphi = |z: C64| -1.0 / ((z - z0) * (z - z0));
    let psi = |z: C64| 1.0 / ((z - z0) * (z - z0));
    let h = goursat_boundary_data(&b, phi, dphi, psi);
    let d = b.solve(&h, &cfg()).unwrap();
    for z in [C64::new(0.0, 0.0), C64::new(1.2, 0.2), C64::new(-1.5, -0.2)] {
        let exact_f = phi(z) + z * dphi(z).conj() + psi(z).conj();
        let u = eval_velocity(&b, &d, z, &cfg()).unwrap();
        assert!((u - (-C64::i() * exact_f)).norm() < 1e-11 * exact_f.norm(), "{z}");
        let (_, dp, _) = eval_goursat(&b, &d, z, &cfg()).unwrap();
        // φ′ is determined up to an imaginary constant (the pressure level)
        let diff = dp - dphi(z);
        assert!(diff.re.abs() < 1e-10 * dphi(z).norm());
        let s = sample(&b, &d, z, &cfg()).unwrap();
        let goursat_f = s.phi + z * s.dphi.conj() + s.psi.conj();
        assert!((goursat_f - exact_f).norm() < 1e-10 * exact_f.norm());
    }
    // residual of the solved system
    let r = b.apply_sl_operator(&d.omega).unwrap();
    let err: f64 = r.iter().zip(&h).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    let scale: f64 = h.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    assert!(err <= 1e-12 * scale);
}

fn poiseuille_data(b: &Boundary, flux: f64) -> Vec<C64> {
    let l = 0.5;
    b.z.iter()
        .zip(&b.tags)
        .map(|(z, tag)| match tag {
            BoundaryTag::Wall => C64::new(0.0, 0.0),
            BoundaryTag::Cap(_) => {
                let u = 3.0 * flux / (4.0 * l * l * l) * (l * l - z.im * z.im);
                C64::i() * u
            }
        })
        .collect()
}

#[test]
fn poiseuille_pressure_gradient_and_vorticity() {
    let b = channel();
    let flux = 0.8;
    let d = b.solve(&poiseuille_data(&b, flux), &cfg()).unwrap();
    let l: f64 = 0.5;
    let grad = -3.0 * flux / (2.0 * l.powi(3));
    let (p0, _) = eval_pressure_vorticity(&b, &d, C64::new(-1.0, 0.1), &cfg()).unwrap();
    let (p1, _) = eval_pressure_vorticity(&b, &d, C64::new(1.0, 0.1), &cfg()).unwrap();
    assert!(((p1 - p0) / 2.0 - grad).abs() < 1e-10 * grad.abs(), "{} vs {grad}", (p1 - p0) / 2.0);
    for y in [-0.3, 0.0, 0.25] {
        let z = C64::new(0.4, y);
        let (_, zeta) = eval_pressure_vorticity(&b, &d, z, &cfg()).unwrap();
        // ζ = ∂u/∂y for u = 3F/(4L³)(L² − y²)
        let exact = -3.0 * flux / (2.0 * l.powi(3)) * y;
        assert!((zeta - exact).abs() < 1e-10 * 3.0 * flux / (2.0 * l * l), "{zeta} vs {exact}");
        let u = eval_velocity(&b, &d, z, &cfg()).unwrap();
        let exact_u = 3.0 * flux / (4.0 * l.powi(3)) * (l * l - y * y);
        assert!((u - C64::new(exact_u, 0.0)).norm() < 1e-10);
    }
    let ports = &b.geometry.ports;
    let f_in = port_flux(&b, &d, &ports[0]).unwrap();
    let f_out = port_flux(&b, &d, &ports[1]).unwrap();
    assert!((f_in + flux).abs() < 1e-10, "{f_in}");
    assert!((f_out - flux).abs() < 1e-10, "{f_out}");
}

#[test]
fn incompatible_data_is_rejected() {
    let b = channel();
    let mut h = poiseuille_data(&b, 1.0);
    for (v, tag) in h.iter_mut().zip(&b.tags) {
        if *tag == BoundaryTag::Cap(1) {
            *v = C64::new(0.0, 0.0);
        }
    }
    assert!(matches!(b.solve(&h, &cfg()), Err(BieError::IncompatibleData { .. })));
}

#[test]
fn evaluation_guards() {
    let b = channel();
    let d = b.solve(&poiseuille_data(&b, 1.0), &cfg()).unwrap();
    assert!(matches!(
        eval_velocity(&b, &d, C64::new(0.0, 3.0), &cfg()),
        Err(BieError::PointOutsideDomain { .. })
    ));
    assert!(matches!(
        eval_velocity(&b, &d, C64::new(0.0, 0.499), &cfg()),
        Err(BieError::PointTooCloseToBoundary { .. })
    ));
}

#[test]
fn y_junction_manufactured() {
    let g = YLayout::symmetric(1.0, 4.0, 3.0, std::f64::consts::PI / 6.0).build("y").unwrap();
    let b = Boundary::new(&g).unwrap();
    let z0 = C64::new(2.0, 0.2);
    let phi = |z: C64| 1.0 / (z - z0);
    let dphi = |z: C64| -1.0 / ((z - z0) * (z - z0));
    let psi = |z: C64| 1.0 / ((z - z0) * (z - z0));
    let h = goursat_boundary_data(&b, phi, dphi, psi);
    let d = b.solve(&h, &cfg()).unwrap();
    let z = C64::new(-2.0, 0.0);
    let exact = -C64::i() * (phi(z) + z * dphi(z).conj() + psi(z).conj());
    let u = eval_velocity(&b, &d, z, &cfg()).unwrap();
    assert!((u - exact).norm() < 1e-10 * exact.norm(), "{}", (u - exact).norm() / exact.norm());
}

mod properties {
    use super::*;
    use crate::geometry::Placement;
    use proptest::prelude::*;

    fn pole() -> impl Strategy<Value = C64> {
        (-3.0..3.0f64, 1.0..2.0f64, any::<bool>()).prop_map(|(x, y, up)| C64::new(x, if up { y } else { -y }))
    }

    fn pole_data(b: &Boundary, z0: C64) -> Vec<C64> {
        let phi = |z: C64| 1.0 / (z - z0);
        let dphi = |z: C64| -1.0 / ((z - z0) * (z - z0));
        let psi = |z: C64| z0.conj() / ((z - z0) * (z - z0));
        goursat_boundary_data(b, phi, dphi, psi)
    }

    const PROBES: [C64; 4] = [
        C64::new(0.0, 0.0),
        C64::new(1.2, 0.2),
        C64::new(-1.5, -0.2),
        C64::new(0.4, -0.3),
    ];

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn solve_is_linear(z1 in pole(), z2 in pole(), a in -3.0..3.0f64, c in -3.0..3.0f64) {
            let b = channel();
            let (h1, h2) = (pole_data(&b, z1), pole_data(&b, z2));
            let h: Vec<C64> = h1.iter().zip(&h2).map(|(x, y)| a * x + c * y).collect();
            let (d1, d2, d) = (b.solve(&h1, &cfg()).unwrap(), b.solve(&h2, &cfg()).unwrap(), b.solve(&h, &cfg()).unwrap());
            for z in PROBES {
                let u1 = eval_velocity(&b, &d1, z, &cfg()).unwrap();
                let u2 = eval_velocity(&b, &d2, z, &cfg()).unwrap();
                let u = eval_velocity(&b, &d, z, &cfg()).unwrap();
                let scale = a.abs() * u1.norm() + c.abs() * u2.norm();
                prop_assert!((u - (a * u1 + c * u2)).norm() <= 1e-10 * scale, "{z}");
            }
        }

        #[test]
        fn rotated_problem_gives_rotated_flow(
            z0 in pole(),
            angle in -3.1..3.1f64,
            sx in -10.0..10.0f64,
            sy in -10.0..10.0f64,
        ) {
            let place = Placement::new(angle, C64::new(sx, sy));
            let rot = place.rotation();
            let b = channel();
            let moved = Boundary::new(&straight(1.0, 4.0).unwrap().apply_placement(&place)).unwrap();
            prop_assert_eq!(moved.len(), b.len());
            let h = pole_data(&b, z0);
            let hm: Vec<C64> = h.iter().map(|v| rot * v).collect();
            let d = b.solve(&h, &cfg()).unwrap();
            let dm = moved.solve(&hm, &cfg()).unwrap();
            let base = sample(&b, &d, PROBES[0], &cfg()).unwrap();
            let base_m = sample(&moved, &dm, place.apply_point(PROBES[0]), &cfg()).unwrap();
            for z in PROBES {
                let s = sample(&b, &d, z, &cfg()).unwrap();
                let sm = sample(&moved, &dm, place.apply_point(z), &cfg()).unwrap();
                let scale = s.velocity.norm().max(1.0);
                prop_assert!((sm.velocity - rot * s.velocity).norm() <= 1e-10 * scale);
                let dp = (sm.pressure - base_m.pressure) - (s.pressure - base.pressure);
                prop_assert!(dp.abs() <= 1e-10 * s.pressure.abs().max(1.0));
                prop_assert!((sm.vorticity - s.vorticity).abs() <= 1e-10 * s.vorticity.abs().max(1.0));
            }
        }
    }
}
