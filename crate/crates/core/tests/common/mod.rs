#![allow(dead_code)]

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use stokesnet::network::{ComponentLibrary, NetworkSpec, PortRef};

/// Independent nodal formulation: unknowns are every port pressure and every
/// interface flux, with per-instance S relations, flux balance, pressure
/// continuity at interfaces and the first external port pinned to zero.
/// Returns (interface fluxes, port pressures per instance).
pub fn nodal_oracle(spec: &NetworkSpec, lib: &ComponentLibrary) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut offset = Vec::new();
    let mut np = 0;
    for inst in &spec.instances {
        offset.push(np);
        np += lib.get(&inst.component).unwrap().port_count();
    }
    let ne = spec.interfaces.len();
    let pidx = |r: PortRef| offset[r.instance] + r.port - 1;
    let out = |r: PortRef| -> (f64, Option<(usize, f64)>) {
        for (e, i) in spec.interfaces.iter().enumerate() {
            if i.a == r {
                return (0.0, Some((e, 1.0)));
            }
            if i.b == r {
                return (0.0, Some((e, -1.0)));
            }
        }
        let ext = spec.externals.iter().find(|x| x.port == r).unwrap();
        (ext.flux, None)
    };
    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    for i in &spec.interfaces {
        rows.push((vec![(pidx(i.a), 1.0), (pidx(i.b), -1.0)], 0.0));
    }
    for (c, inst) in spec.instances.iter().enumerate() {
        let entry = lib.get(&inst.component).unwrap();
        let m = entry.port_count();
        for k in 2..=m {
            let mut row = vec![(pidx(PortRef::new(c, k)), 1.0), (pidx(PortRef::new(c, 1)), -1.0)];
            let mut rhs = 0.0;
            for l in 2..=m {
                let s = entry.matrix.matrix[k - 2][l - 2];
                let (k0, t) = out(PortRef::new(c, l));
                rhs += s * k0;
                if let Some((e, sign)) = t {
                    row.push((np + e, -s * sign));
                }
            }
            rows.push((row, rhs));
        }
        let mut row = Vec::new();
        let mut rhs = 0.0;
        for l in 1..=m {
            let (k0, t) = out(PortRef::new(c, l));
            rhs -= k0;
            if let Some((e, sign)) = t {
                row.push((np + e, sign));
            }
        }
        rows.push((row, rhs));
    }
    rows.push((vec![(pidx(spec.externals[0].port), 1.0)], 0.0));
    let a = Mat::from_fn(rows.len(), np + ne, |r, c| {
        rows[r].0.iter().filter(|(j, _)| *j == c).map(|(_, v)| *v).sum::<f64>()
    });
    let b = Mat::from_fn(rows.len(), 1, |r, _| rows[r].1);
    let x = a.qr().solve_lstsq(&b);
    let fluxes = (0..ne).map(|e| x[(np + e, 0)]).collect();
    let pressures = spec
        .instances
        .iter()
        .enumerate()
        .map(|(c, inst)| {
            (0..lib.get(&inst.component).unwrap().port_count())
                .map(|k| x[(offset[c] + k, 0)])
                .collect()
        })
        .collect();
    (fluxes, pressures)
}
