use std::collections::BTreeMap;

use faer::linalg::solvers::{Solve, SolveLstsq};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use super::graph::{fundamental_cycles, CycleBasis, CycleStep};
use super::{CheckedNetwork, NetworkError, PortRef, PortUse};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// Flux balance of an instance.
    Conservation(usize),
    /// Pressure closure around a fundamental cycle.
    Cycle(usize),
}

/// Sparse assembly system; unknown k is the flux through interface k,
/// positive from side a into side b.
#[derive(Debug, Clone, PartialEq)]
pub struct AssemblySystem {
    pub n_rows: usize,
    pub n_cols: usize,
    /// (row, column, value) with no duplicates.
    pub entries: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
    pub rows: Vec<RowKind>,
    pub basis: CycleBasis,
}

impl AssemblySystem {
    pub fn dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n_rows, self.n_cols);
        for &(r, c, v) in &self.entries {
            m[(r, c)] = v;
        }
        m
    }

    /// Row dropped to obtain the square system: the last conservation row.
    pub fn dropped_row(&self) -> usize {
        self.rows
            .iter()
            .rposition(|r| matches!(r, RowKind::Conservation(_)))
            .expect("every network has a conservation row")
    }

    pub fn square_dense(&self) -> Mat<f64> {
        let drop = self.dropped_row();
        let full = self.dense();
        Mat::from_fn(self.n_rows - 1, self.n_cols, |r, c| full[(if r < drop { r } else { r + 1 }, c)])
    }

    /// A·x − b.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r: Vec<f64> = self.rhs.iter().map(|b| -b).collect();
        for &(i, j, v) in &self.entries {
            r[i] += v * x[j];
        }
        r
    }

    pub fn cycle_count(&self) -> usize {
        self.basis.cycles.len()
    }
}

/// Affine function c + Σ a_e·x_e of the interface fluxes.
#[derive(Debug, Clone, Default)]
struct Affine {
    constant: f64,
    terms: BTreeMap<usize, f64>,
}

impl Affine {
    fn add_scaled(&mut self, other: &Affine, s: f64) {
        self.constant += s * other.constant;
        for (&e, &a) in &other.terms {
            *self.terms.entry(e).or_default() += s * a;
        }
    }
}

fn outflow(net: &CheckedNetwork<'_>, instance: usize, port: usize) -> Affine {
    let mut a = Affine::default();
    match net.ports[instance][port - 1] {
        PortUse::Interface { edge, side_a } => {
            a.terms.insert(edge, if side_a { 1.0 } else { -1.0 });
        }
        PortUse::External { flux, .. } => a.constant = flux,
    }
    a
}

/// p_port − p_1 inside `instance` as an affine function of the fluxes.
fn port_offset(net: &CheckedNetwork<'_>, instance: usize, port: usize) -> Affine {
    let mut out = Affine::default();
    if port == 1 {
        return out;
    }
    let entry = net.entry(instance);
    for (l, s) in entry.matrix.matrix[port - 2].iter().enumerate() {
        out.add_scaled(&outflow(net, instance, l + 2), *s);
    }
    out
}

/// Ports used by a traversal step: (departure port, arrival port).
fn step_ports(net: &CheckedNetwork<'_>, step: CycleStep) -> (PortRef, PortRef) {
    let iface = net.spec.interfaces[step.edge];
    if step.forward {
        (iface.a, iface.b)
    } else {
        (iface.b, iface.a)
    }
}

/// Σ over the instances of a cycle of (p_exit − p_enter).
fn cycle_form(net: &CheckedNetwork<'_>, cycle: &[CycleStep]) -> Affine {
    let mut row = Affine::default();
    for k in 0..cycle.len() {
        let (_, enter) = step_ports(net, cycle[k]);
        let (exit, _) = step_ports(net, cycle[(k + 1) % cycle.len()]);
        debug_assert_eq!(enter.instance, exit.instance);
        row.add_scaled(&port_offset(net, exit.instance, exit.port), 1.0);
        row.add_scaled(&port_offset(net, enter.instance, enter.port), -1.0);
    }
    row
}

pub fn assemble(net: &CheckedNetwork<'_>) -> Result<AssemblySystem, NetworkError> {
    assemble_with_root(net, 0)
}

/// Assembly with the spanning tree rooted at instance `root`.
pub fn assemble_with_root(net: &CheckedNetwork<'_>, root: usize) -> Result<AssemblySystem, NetworkError> {
    let basis = fundamental_cycles(&net.graph, root)?;
    let v = net.spec.instances.len();
    let mut forms = Vec::with_capacity(v + basis.cycles.len());
    let mut rows = Vec::with_capacity(forms.capacity());
    for c in 0..v {
        let mut f = Affine::default();
        for p in 1..=net.ports[c].len() {
            f.add_scaled(&outflow(net, c, p), 1.0);
        }
        forms.push(f);
        rows.push(RowKind::Conservation(c));
    }
    for (k, cycle) in basis.cycles.iter().enumerate() {
        forms.push(cycle_form(net, cycle));
        rows.push(RowKind::Cycle(k));
    }
    let mut entries = Vec::new();
    let mut rhs = Vec::with_capacity(forms.len());
    for (r, f) in forms.iter().enumerate() {
        for (&c, &a) in &f.terms {
            if a != 0.0 {
                entries.push((r, c, a));
            }
        }
        rhs.push(-f.constant);
    }
    Ok(AssemblySystem {
        n_rows: forms.len(),
        n_cols: net.spec.interfaces.len(),
        entries,
        rhs,
        rows,
        basis,
    })
}

/// Interface fluxes from the least-squares solve, cross-checked against the
/// square system.
#[derive(Debug, Clone, PartialEq)]
pub struct AssemblySolution {
    pub fluxes: Vec<f64>,
    /// ‖A·x − b‖₂ of the least-squares solution.
    pub residual: f64,
    pub square_fluxes: Vec<f64>,
    /// max |x_lstsq − x_square|.
    pub discrepancy: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sparse(n_rows: usize, n_cols: usize, entries: &[(usize, usize, f64)]) -> Result<SparseColMat<usize, f64>, NetworkError> {
    let trips: Vec<Triplet<usize, usize, f64>> = entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
    SparseColMat::try_new_from_triplets(n_rows, n_cols, &trips).map_err(|e| NetworkError::Linear(format!("{e:?}")))
}

/// Numerical rank deficiency from dense singular values (small systems only).
fn deficiency(system: &AssemblySystem) -> Option<usize> {
    if system.n_cols > 1500 {
        return None;
    }
    let s = system.dense().singular_values().ok()?;
    let cut = s.first().copied().unwrap_or(0.0) * 1e-12 * system.n_rows as f64;
    Some(s.iter().filter(|&&x| x <= cut).count() + system.n_cols.saturating_sub(s.len()))
}

/// Sparse QR least squares on the full system and sparse LU on the square
/// system with one conservation row dropped.
pub fn solve_assembly(system: &AssemblySystem) -> Result<AssemblySolution, NetworkError> {
    let (m, n) = (system.n_rows, system.n_cols);
    if n == 0 {
        return Ok(AssemblySolution {
            fluxes: Vec::new(),
            residual: norm(&system.rhs),
            square_fluxes: Vec::new(),
            discrepancy: 0.0,
        });
    }
    let rank_deficient = |residual: f64| NetworkError::RankDeficient {
        deficiency: deficiency(system),
        residual,
    };
    let a = sparse(m, n, &system.entries)?;
    let b = Mat::from_fn(m, 1, |i, _| system.rhs[i]);
    let qr = a.sp_qr().map_err(|e| NetworkError::Linear(format!("{e:?}")))?;
    let x = qr.solve_lstsq(&b);
    let fluxes: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    let residual = norm(&system.residual(&fluxes));
    let bnorm = norm(&system.rhs);
    if fluxes.iter().any(|v| !v.is_finite()) || residual > 1e-8 * bnorm.max(f64::MIN_POSITIVE) {
        return Err(rank_deficient(residual));
    }
    let drop = system.dropped_row();
    let sq_entries: Vec<(usize, usize, f64)> = system
        .entries
        .iter()
        .filter(|e| e.0 != drop)
        .map(|&(r, c, v)| (if r < drop { r } else { r - 1 }, c, v))
        .collect();
    let sq = sparse(m - 1, n, &sq_entries)?;
    let square_fluxes: Vec<f64> = match sq.sp_lu() {
        Ok(lu) => {
            let bs = Mat::from_fn(m - 1, 1, |i, _| system.rhs[if i < drop { i } else { i + 1 }]);
            let y = lu.solve(&bs);
            (0..n).map(|i| y[(i, 0)]).collect()
        }
        Err(_) => return Err(rank_deficient(residual)),
    };
    let discrepancy = fluxes
        .iter()
        .zip(&square_fluxes)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let scale = fluxes.iter().fold(0.0_f64, |s, v| s.max(v.abs())).max(bnorm);
    if !discrepancy.is_finite() || discrepancy > 1e-6 * scale.max(f64::MIN_POSITIVE) {
        return Err(rank_deficient(residual));
    }
    if let Some(d) = deficiency(system).filter(|&d| d > 0) {
        return Err(NetworkError::RankDeficient {
            deficiency: Some(d),
            residual,
        });
    }
    Ok(AssemblySolution {
        fluxes,
        residual,
        square_fluxes,
        discrepancy,
    })
}

/// Leaf-to-root flux recursion for tree networks; no factorization.
pub fn acyclic_solve(net: &CheckedNetwork<'_>) -> Result<Vec<f64>, NetworkError> {
    let basis = fundamental_cycles(&net.graph, 0)?;
    if !basis.cycles.is_empty() {
        return Err(NetworkError::NotAcyclic {
            cycles: basis.cycles.len(),
        });
    }
    let mut x = vec![f64::NAN; net.spec.interfaces.len()];
    for &c in basis.order.iter().rev() {
        let Some((pe, _)) = basis.parent[c] else { continue };
        let mut known = 0.0;
        let mut side = true;
        for usage in &net.ports[c] {
            match *usage {
                PortUse::External { flux, .. } => known += flux,
                PortUse::Interface { edge, side_a } if edge == pe => side = side_a,
                PortUse::Interface { edge, side_a } => known += if side_a { x[edge] } else { -x[edge] },
            }
        }
        x[pe] = if side { -known } else { known };
    }
    Ok(x)
}

/// Fluxes and pressures of a solved network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSolution {
    pub fluxes: Vec<f64>,
    /// `outflows[i][k]`: flux leaving instance i through port k+1.
    pub outflows: Vec<Vec<f64>>,
    /// `port_pressures[i][k]`: pressure at the plane of port k+1.
    pub port_pressures: Vec<Vec<f64>>,
    /// Pressure at the externals, in declaration order.
    pub external_pressures: Vec<f64>,
    pub reference: PortRef,
    /// Σ(p_exit − p_enter) around each fundamental cycle.
    pub cycle_residuals: Vec<f64>,
    /// |p_a − p_b| at every interface.
    pub interface_jumps: Vec<f64>,
    /// Σ of the outflows of each instance.
    pub flux_imbalance: Vec<f64>,
}

impl NetworkSolution {
    pub fn max_cycle_residual(&self) -> f64 {
        self.cycle_residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn max_flux_imbalance(&self) -> f64 {
        self.flux_imbalance.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn max_interface_jump(&self) -> f64 {
        self.interface_jumps.iter().fold(0.0, |m: f64, r| m.max(*r))
    }

    /// Outflow vector (ports 2..m) of an instance, the α of its basis flows.
    pub fn alphas(&self, instance: usize) -> &[f64] {
        &self.outflows[instance][1..]
    }
}

/// Assigns pressures by walking the spanning tree from the reference port
/// (default: first external port) whose pressure is set to zero.
pub fn propagate_pressures(
    net: &CheckedNetwork<'_>,
    fluxes: &[f64],
    reference: Option<PortRef>,
) -> Result<NetworkSolution, NetworkError> {
    if fluxes.len() != net.spec.interfaces.len() {
        return Err(NetworkError::Linear(format!(
            "expected {} interface fluxes, got {}",
            net.spec.interfaces.len(),
            fluxes.len()
        )));
    }
    let reference = reference
        .or_else(|| net.spec.externals.first().map(|e| e.port))
        .unwrap_or(PortRef::new(0, 1));
    if net.ports.get(reference.instance).and_then(|p| p.get(reference.port.wrapping_sub(1))).is_none() {
        return Err(NetworkError::NoSuchPort {
            instance: reference.instance,
            port: reference.port,
        });
    }
    let outflows: Vec<Vec<f64>> = net
        .ports
        .iter()
        .map(|ports| {
            ports
                .iter()
                .map(|u| match *u {
                    PortUse::Interface { edge, side_a } => {
                        if side_a {
                            fluxes[edge]
                        } else {
                            -fluxes[edge]
                        }
                    }
                    PortUse::External { flux, .. } => flux,
                })
                .collect()
        })
        .collect();
    let offsets: Vec<Vec<f64>> = outflows
        .iter()
        .enumerate()
        .map(|(c, f)| net.entry(c).port_offsets(f))
        .collect();
    let basis = fundamental_cycles(&net.graph, reference.instance)?;
    let mut base = vec![0.0; net.spec.instances.len()];
    base[reference.instance] = -offsets[reference.instance][reference.port - 1];
    for &c in basis.order.iter().skip(1) {
        let (e, parent) = basis.parent[c].expect("non-root node has a parent");
        let iface = net.spec.interfaces[e];
        let (pp, cp) = if iface.a.instance == parent && iface.b.instance == c {
            (iface.a.port, iface.b.port)
        } else {
            (iface.b.port, iface.a.port)
        };
        base[c] = base[parent] + offsets[parent][pp - 1] - offsets[c][cp - 1];
    }
    let port_pressures: Vec<Vec<f64>> = offsets
        .iter()
        .zip(&base)
        .map(|(o, b)| o.iter().map(|v| b + v).collect())
        .collect();
    let at = |r: PortRef| port_pressures[r.instance][r.port - 1];
    let interface_jumps = net.spec.interfaces.iter().map(|i| (at(i.a) - at(i.b)).abs()).collect();
    let cycle_residuals = basis
        .cycles
        .iter()
        .map(|cycle| {
            (0..cycle.len())
                .map(|k| {
                    let (_, enter) = step_ports(net, cycle[k]);
                    let (exit, _) = step_ports(net, cycle[(k + 1) % cycle.len()]);
                    offsets[exit.instance][exit.port - 1] - offsets[enter.instance][enter.port - 1]
                })
                .sum()
        })
        .collect();
    let flux_imbalance = outflows.iter().map(|f| f.iter().sum()).collect();
    Ok(NetworkSolution {
        fluxes: fluxes.to_vec(),
        external_pressures: net.spec.externals.iter().map(|e| at(e.port)).collect(),
        outflows,
        port_pressures,
        reference,
        cycle_residuals,
        interface_jumps,
        flux_imbalance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionNumbers {
    /// Full (E+1)×E system.
    pub rectangular: f64,
    /// Square system with the last conservation row dropped.
    pub square: f64,
}

/// 2-norm condition numbers from dense singular values.
pub fn condition_number(system: &AssemblySystem) -> Result<ConditionNumbers, NetworkError> {
    if system.n_cols == 0 {
        return Ok(ConditionNumbers {
            rectangular: 1.0,
            square: 1.0,
        });
    }
    let kappa = |m: Mat<f64>| -> Result<f64, NetworkError> {
        let s = m.singular_values().map_err(|e| NetworkError::Linear(format!("{e:?}")))?;
        let lo = s.last().copied().unwrap_or(0.0);
        Ok(if lo > 0.0 { s[0] / lo } else { f64::INFINITY })
    };
    Ok(ConditionNumbers {
        rectangular: kappa(system.dense())?,
        square: kappa(system.square_dense())?,
    })
}
