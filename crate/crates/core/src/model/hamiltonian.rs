use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{Site, Volume};

use super::coupling::boundary_field_with_kernel;
use super::{
    BoundaryCondition, CouplingMatrix, CouplingSpec, FieldRealization, FlipOnRegion, SpinConfig,
};

/// The three sums of the Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub bulk_pair_term: f64,
    pub boundary_term: f64,
    pub field_term: f64,
    pub total: f64,
}

/// `H(τσ) − H(σ)` computed twice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlipEnergy {
    /// From two full energy evaluations.
    pub full: f64,
    /// From a sequence of single-site flips.
    pub incremental: f64,
}

/// Relative agreement required between full and incremental energy paths.
pub const ENERGY_REL_TOL: f64 = 1e-10;

/// A finite-volume Hamiltonian
/// `H = −Σ_{x<y} J_{xy} σ_x σ_y − Σ_x σ_x b_x − Σ_x f_x σ_x`
/// with boundary field `b` and external coefficients `f`.
#[derive(Clone, Debug)]
pub struct Model {
    volume: Arc<Volume>,
    spec: Option<CouplingSpec>,
    bc: BoundaryCondition,
    couplings: Arc<CouplingMatrix>,
    boundary: Arc<Vec<f64>>,
    field: FieldRealization,
    external: Vec<f64>,
}

impl Model {
    pub fn new(
        volume: Arc<Volume>,
        spec: CouplingSpec,
        bc: BoundaryCondition,
        field: FieldRealization,
    ) -> Result<Self> {
        let couplings = Arc::new(CouplingMatrix::build(&volume, &spec)?);
        Self::with_couplings(volume, spec, bc, field, couplings)
    }

    /// Like [`Model::new`] but reusing a prebuilt (possibly cached) matrix.
    pub fn with_couplings(
        volume: Arc<Volume>,
        spec: CouplingSpec,
        bc: BoundaryCondition,
        field: FieldRealization,
        couplings: Arc<CouplingMatrix>,
    ) -> Result<Self> {
        spec.validate()?;
        if volume.dim() != spec.dim {
            return Err(Error::DimensionMismatch {
                expected: spec.dim,
                found: volume.dim(),
            });
        }
        if *couplings.key() != CouplingMatrix::key_for(&volume, &spec)
            || couplings.len() != volume.len()
        {
            return Err(Error::DomainMismatch(
                "coupling matrix built for other inputs".into(),
            ));
        }
        let boundary = Arc::new(boundary_terms(&volume, &bc, &spec)?);
        Self::assemble(volume, Some(spec), bc, couplings, boundary, field)
    }

    /// Model from explicit couplings, boundary field and external
    /// coefficients (the field strength is taken as 1).
    pub fn from_parts(
        volume: Arc<Volume>,
        couplings: Vec<f64>,
        boundary: Vec<f64>,
        external: Vec<f64>,
    ) -> Result<Self> {
        let n = volume.len();
        let couplings = Arc::new(CouplingMatrix::from_dense(n, couplings)?);
        if boundary.len() != n {
            return Err(Error::DomainMismatch("boundary field length".into()));
        }
        let field = FieldRealization::from_raw(
            super::FieldKind::Decaying,
            1.0,
            None,
            volume.clone(),
            external,
        )?;
        Self::assemble(
            volume,
            None,
            BoundaryCondition::Plus,
            couplings,
            Arc::new(boundary),
            field,
        )
    }

    fn assemble(
        volume: Arc<Volume>,
        spec: Option<CouplingSpec>,
        bc: BoundaryCondition,
        couplings: Arc<CouplingMatrix>,
        boundary: Arc<Vec<f64>>,
        field: FieldRealization,
    ) -> Result<Self> {
        check_field_domain(&volume, &field)?;
        let external = combine(&boundary, &field);
        Ok(Model {
            volume,
            spec,
            bc,
            couplings,
            boundary,
            field,
            external,
        })
    }

    /// Same couplings and boundary, different field.
    pub fn with_field(&self, field: FieldRealization) -> Result<Model> {
        check_field_domain(&self.volume, &field)?;
        let external = combine(&self.boundary, &field);
        Ok(Model {
            field,
            external,
            ..self.clone()
        })
    }

    /// Same couplings and field, different boundary condition.
    pub fn with_boundary(&self, bc: BoundaryCondition) -> Result<Model> {
        let spec = self
            .spec
            .ok_or_else(|| Error::InvalidParameter("model has no coupling spec".into()))?;
        let boundary = Arc::new(boundary_terms(&self.volume, &bc, &spec)?);
        let external = combine(&boundary, &self.field);
        Ok(Model {
            bc,
            boundary,
            external,
            ..self.clone()
        })
    }

    pub fn volume(&self) -> &Volume {
        &self.volume
    }

    pub fn volume_arc(&self) -> &Arc<Volume> {
        &self.volume
    }

    pub fn len(&self) -> usize {
        self.volume.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volume.is_empty()
    }

    pub fn spec(&self) -> Option<&CouplingSpec> {
        self.spec.as_ref()
    }

    pub fn boundary_condition(&self) -> &BoundaryCondition {
        &self.bc
    }

    pub fn couplings(&self) -> &CouplingMatrix {
        &self.couplings
    }

    /// `b_x` in site order.
    pub fn boundary_field(&self) -> &[f64] {
        &self.boundary
    }

    pub fn field(&self) -> &FieldRealization {
        &self.field
    }

    /// `b_x + f_x` in site order.
    pub fn external(&self) -> &[f64] {
        &self.external
    }

    fn check_config(&self, sigma: &SpinConfig) -> Result<()> {
        if sigma.volume() != &*self.volume {
            return Err(Error::DomainMismatch(
                "configuration and model volumes differ".into(),
            ));
        }
        Ok(())
    }

    pub fn energy(&self, sigma: &SpinConfig) -> Result<EnergyBreakdown> {
        self.check_config(sigma)?;
        let s = sigma.values();
        let n = s.len();
        let mut bulk = 0.0;
        for i in 0..n {
            let row = self.couplings.row(i);
            let mut acc = 0.0;
            for j in (i + 1)..n {
                acc += row[j] * f64::from(s[j]);
            }
            bulk -= f64::from(s[i]) * acc;
        }
        let boundary: f64 = -s
            .iter()
            .zip(self.boundary.iter())
            .map(|(&v, b)| f64::from(v) * b)
            .sum::<f64>();
        let coeff = self.field.strength();
        let field: f64 = -s
            .iter()
            .zip(self.field.values())
            .map(|(&v, h)| f64::from(v) * coeff * h)
            .sum::<f64>();
        Ok(EnergyBreakdown {
            bulk_pair_term: bulk,
            boundary_term: boundary,
            field_term: field,
            total: bulk + boundary + field,
        })
    }

    /// `Σ_j J_{ij} σ_j + b_i + f_i`.
    pub fn local_field(&self, spins: &[i8], i: usize) -> f64 {
        let row = self.couplings.row(i);
        let mut acc = self.external[i];
        for (j, &v) in spins.iter().enumerate() {
            acc += row[j] * f64::from(v);
        }
        acc
    }

    /// `H(σ^{(i)}) − H(σ)` for the flip of site index `i`.
    pub fn delta_single_flip(&self, spins: &[i8], i: usize) -> f64 {
        2.0 * f64::from(spins[i]) * self.local_field(spins, i)
    }

    pub fn delta_energy_single_flip(&self, sigma: &SpinConfig, x: &Site) -> Result<f64> {
        self.check_config(sigma)?;
        let i = self
            .volume
            .index_of(x)
            .ok_or_else(|| Error::SiteOutsideVolume(x.to_string()))?;
        Ok(self.delta_single_flip(sigma.values(), i))
    }

    /// `H(target) − H(σ)` by full recomputation and by successive single
    /// flips; fails if the two disagree beyond [`ENERGY_REL_TOL`].
    pub fn flip_energy_difference(
        &self,
        sigma: &SpinConfig,
        target: &SpinConfig,
    ) -> Result<FlipEnergy> {
        let before = self.energy(sigma)?.total;
        let after = self.energy(target)?.total;
        let full = after - before;
        let mut work = sigma.values().to_vec();
        let mut incremental = 0.0;
        for i in sigma.differing_sites(target)? {
            incremental += self.delta_single_flip(&work, i);
            work[i] = -work[i];
        }
        let scale = 1f64.max(before.abs()).max(after.abs());
        if (full - incremental).abs() > ENERGY_REL_TOL * scale {
            return Err(Error::Inconsistent(format!(
                "energy difference paths disagree: full {full}, incremental {incremental}"
            )));
        }
        Ok(FlipEnergy { full, incremental })
    }

    pub fn flip_energy_tau_a(&self, sigma: &SpinConfig, a: &Volume) -> Result<FlipEnergy> {
        let target = sigma.apply_tau_a(a)?;
        self.flip_energy_difference(sigma, &target)
    }
}

fn check_field_domain(volume: &Volume, field: &FieldRealization) -> Result<()> {
    if field.volume() != volume {
        return Err(Error::DomainMismatch(
            "field realization lives on another volume".into(),
        ));
    }
    Ok(())
}

fn combine(boundary: &[f64], field: &FieldRealization) -> Vec<f64> {
    let k = field.strength();
    boundary
        .iter()
        .zip(field.values())
        .map(|(b, h)| b + k * h)
        .collect()
}

fn boundary_terms(
    volume: &Volume,
    bc: &BoundaryCondition,
    spec: &CouplingSpec,
) -> Result<Vec<f64>> {
    let kernel = spec.shell_kernel();
    volume
        .sites()
        .par_iter()
        .map(|x| boundary_field_with_kernel(x, volume, bc, &kernel))
        .collect()
}
