use std::collections::BTreeMap;

use crate::bie::{sample, SLDensity};
use crate::scattering::ComponentBasis;
use crate::C64;

use super::{NetworkError, NetworkSolution, NetworkSpec};

/// Solved basis flows by component name.
#[derive(Debug, Clone, Default)]
pub struct FieldLibrary {
    pub bases: BTreeMap<String, ComponentBasis>,
}

impl FieldLibrary {
    pub fn insert(&mut self, name: &str, basis: ComponentBasis) {
        self.bases.insert(name.to_string(), basis);
    }
}

/// Fields at a point of the network, in global coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkFieldSample {
    pub instance: usize,
    pub velocity: C64,
    pub pressure: f64,
    pub vorticity: f64,
}

struct InstanceField<'a> {
    basis: &'a ComponentBasis,
    density: SLDensity,
    /// Added to the local pressure to obtain the network pressure.
    pressure_shift: f64,
}

/// Superposed basis flows of every instance, ready for repeated sampling.
pub struct FieldReconstructor<'a> {
    spec: &'a NetworkSpec,
    fields: Vec<InstanceField<'a>>,
    exclusion_factor: Option<f64>,
}

impl<'a> FieldReconstructor<'a> {
    pub fn new(spec: &'a NetworkSpec, solution: &NetworkSolution, library: &'a FieldLibrary) -> Result<Self, NetworkError> {
        let mut fields = Vec::with_capacity(spec.instances.len());
        for (c, inst) in spec.instances.iter().enumerate() {
            let basis = library
                .bases
                .get(&inst.component)
                .ok_or_else(|| NetworkError::MissingBasis {
                    component: inst.component.clone(),
                })?;
            let alphas = solution.alphas(c);
            let density = basis.combined_density(alphas)?;
            // local pressure at the port-1 plane of the superposition
            let local_p1: f64 = alphas.iter().zip(&basis.port_pressures).map(|(a, p)| a * p[0]).sum();
            fields.push(InstanceField {
                basis,
                density,
                pressure_shift: solution.port_pressures[c][0] - local_p1,
            });
        }
        Ok(Self {
            spec,
            fields,
            exclusion_factor: None,
        })
    }

    /// Overrides the exclusion factor stored with the bases.
    pub fn with_exclusion_factor(mut self, factor: f64) -> Self {
        self.exclusion_factor = Some(factor);
        self
    }

    /// Instance whose component region (inside its boundary and behind all
    /// of its port planes) contains `z`.
    pub fn owner(&self, z: C64) -> Option<usize> {
        self.spec.instances.iter().enumerate().find_map(|(c, inst)| {
            let g = &self.fields[c].basis.boundary.geometry;
            let local = inst.placement.invert_point(z);
            let behind = g.ports.iter().all(|p| p.to_local(local).re <= 1e-12 * p.width());
            (behind && g.contains(local)).then_some(c)
        })
    }

    pub fn sample(&self, z: C64) -> Result<NetworkFieldSample, NetworkError> {
        let c = self.owner(z).ok_or(NetworkError::PointOutsideNetwork { x: z.re, y: z.im })?;
        self.sample_instance(c, z)
    }

    /// Field of instance `c` alone at the global point `z`, which may lie
    /// outside its component region (e.g. beyond a port plane, inside the
    /// cap).
    pub fn sample_instance(&self, c: usize, z: C64) -> Result<NetworkFieldSample, NetworkError> {
        let (inst, f) = match (self.spec.instances.get(c), self.fields.get(c)) {
            (Some(inst), Some(f)) => (inst, f),
            _ => return Err(NetworkError::NoSuchInstance(c)),
        };
        let local = inst.placement.invert_point(z);
        let mut cfg = f.basis.solver;
        if let Some(factor) = self.exclusion_factor {
            cfg.exclusion_factor = factor;
        }
        let s = sample(&f.basis.boundary, &f.density, local, &cfg).map_err(crate::scattering::ScatteringError::from)?;
        Ok(NetworkFieldSample {
            instance: c,
            velocity: inst.placement.apply_vector(s.velocity),
            pressure: s.pressure + f.pressure_shift,
            vorticity: s.vorticity,
        })
    }
}

/// Samples the assembled solution at global points.
pub fn reconstruct_field(
    spec: &NetworkSpec,
    solution: &NetworkSolution,
    library: &FieldLibrary,
    points: &[C64],
) -> Result<Vec<NetworkFieldSample>, NetworkError> {
    let r = FieldReconstructor::new(spec, solution, library)?;
    points.iter().map(|&z| r.sample(z)).collect()
}
