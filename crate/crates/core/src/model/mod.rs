//! Couplings, fields, boundary conditions and Hamiltonians.

mod coupling;
mod field;
mod hamiltonian;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{exterior_boundary, Site, Volume};

pub use crate::lattice::Norm;
pub use coupling::{
    boundary_field, coupling, summability_diagnostic, BoundaryField, CouplingKey, CouplingMatrix,
    CouplingSpec, SummabilityReport, SummabilityVerdict,
};
pub use field::{FieldKind, FieldRealization, FieldSpec};
pub use hamiltonian::{EnergyBreakdown, FlipEnergy, Model};

/// An Ising spin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Spin {
    Minus,
    Plus,
}

impl Spin {
    pub fn value(self) -> i8 {
        match self {
            Spin::Minus => -1,
            Spin::Plus => 1,
        }
    }

    pub fn from_value(v: i8) -> Result<Spin> {
        match v {
            1 => Ok(Spin::Plus),
            -1 => Ok(Spin::Minus),
            other => Err(Error::InvalidParameter(format!(
                "spin value must be ±1, got {other}"
            ))),
        }
    }

    pub fn flipped(self) -> Spin {
        match self {
            Spin::Minus => Spin::Plus,
            Spin::Plus => Spin::Minus,
        }
    }
}

impl From<Spin> for i8 {
    fn from(s: Spin) -> i8 {
        s.value()
    }
}

impl TryFrom<i8> for Spin {
    type Error = Error;
    fn try_from(v: i8) -> Result<Spin> {
        Spin::from_value(v)
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spin::Minus => "-",
            Spin::Plus => "+",
        })
    }
}

/// Spins on a volume, stored in the volume's site order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinConfig {
    volume: Arc<Volume>,
    spins: Vec<i8>,
}

impl SpinConfig {
    pub fn uniform(volume: Arc<Volume>, s: Spin) -> Self {
        let spins = vec![s.value(); volume.len()];
        SpinConfig { volume, spins }
    }

    pub fn from_values(volume: Arc<Volume>, spins: Vec<i8>) -> Result<Self> {
        if spins.len() != volume.len() {
            return Err(Error::DomainMismatch(format!(
                "{} spins for a volume of {} sites",
                spins.len(),
                volume.len()
            )));
        }
        if let Some(v) = spins.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::InvalidParameter(format!(
                "spin value must be ±1, got {v}"
            )));
        }
        Ok(SpinConfig { volume, spins })
    }

    /// Configuration with `σ_i = −1` exactly where bit `i` of `bits` is set.
    pub fn from_bits(volume: Arc<Volume>, bits: u64) -> Self {
        let spins = (0..volume.len())
            .map(|i| if bits >> i & 1 == 1 { -1 } else { 1 })
            .collect();
        SpinConfig { volume, spins }
    }

    pub fn from_map(volume: Arc<Volume>, map: &BTreeMap<Site, Spin>) -> Result<Self> {
        if map.len() != volume.len() {
            return Err(Error::DomainMismatch(
                "spin map domain differs from volume".into(),
            ));
        }
        let mut spins = Vec::with_capacity(volume.len());
        for s in volume.iter() {
            let v = map
                .get(s)
                .ok_or_else(|| Error::DomainMismatch(format!("no spin for {s}")))?;
            spins.push(v.value());
        }
        Ok(SpinConfig { volume, spins })
    }

    pub fn volume(&self) -> &Volume {
        &self.volume
    }

    pub fn volume_arc(&self) -> &Arc<Volume> {
        &self.volume
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn values(&self) -> &[i8] {
        &self.spins
    }

    pub fn value_at(&self, i: usize) -> i8 {
        self.spins[i]
    }

    pub fn get(&self, s: &Site) -> Result<Spin> {
        let i = self
            .volume
            .index_of(s)
            .ok_or_else(|| Error::SiteOutsideVolume(s.to_string()))?;
        Spin::from_value(self.spins[i])
    }

    pub fn set(&mut self, s: &Site, v: Spin) -> Result<()> {
        let i = self
            .volume
            .index_of(s)
            .ok_or_else(|| Error::SiteOutsideVolume(s.to_string()))?;
        self.spins[i] = v.value();
        Ok(())
    }

    pub fn set_index(&mut self, i: usize, v: i8) {
        debug_assert!(v == 1 || v == -1);
        self.spins[i] = v;
    }

    pub fn flip_index(&mut self, i: usize) {
        self.spins[i] = -self.spins[i];
    }

    pub fn negated(&self) -> SpinConfig {
        SpinConfig {
            volume: self.volume.clone(),
            spins: self.spins.iter().map(|v| -v).collect(),
        }
    }

    pub fn to_map(&self) -> BTreeMap<Site, Spin> {
        self.volume
            .iter()
            .zip(&self.spins)
            .map(|(s, &v)| (s.clone(), if v > 0 { Spin::Plus } else { Spin::Minus }))
            .collect()
    }

    /// `σ_x` for `x ∈ Λ`, `η_x` outside.
    pub fn extended(&self, s: &Site, bc: &BoundaryCondition) -> Result<i8> {
        match self.volume.index_of(s) {
            Some(i) => Ok(self.spins[i]),
            None => bc.spin_at(s),
        }
    }

    /// Sites where the two configurations differ.
    pub fn differing_sites(&self, other: &SpinConfig) -> Result<Vec<usize>> {
        if self.volume != other.volume {
            return Err(Error::DomainMismatch(
                "configurations live on different volumes".into(),
            ));
        }
        Ok((0..self.len())
            .filter(|&i| self.spins[i] != other.spins[i])
            .collect())
    }
}

/// Negation on a region, the identity elsewhere.
pub trait FlipOnRegion: Sized {
    /// `τ_A`; fails if `A` is not contained in the domain.
    fn apply_tau_a(&self, a: &Volume) -> Result<Self>;
}

impl FlipOnRegion for SpinConfig {
    fn apply_tau_a(&self, a: &Volume) -> Result<Self> {
        let mut out = self.clone();
        for s in a.iter() {
            let i = self
                .volume
                .index_of(s)
                .ok_or_else(|| Error::DomainMismatch(format!("{s} is outside the spin domain")))?;
            out.spins[i] = -out.spins[i];
        }
        Ok(out)
    }
}

/// Spins outside the volume.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    #[default]
    Plus,
    Minus,
    /// Prescribed spins on a shell around the volume.
    Explicit(#[serde(with = "shell_pairs")] BTreeMap<Site, Spin>),
}

mod shell_pairs {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        m: &BTreeMap<Site, Spin>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(m.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<BTreeMap<Site, Spin>, D::Error> {
        let v: Vec<(Site, Spin)> = Vec::deserialize(d)?;
        Ok(v.into_iter().collect())
    }
}

impl BoundaryCondition {
    pub fn explicit(pairs: impl IntoIterator<Item = (Site, i8)>) -> Result<Self> {
        let mut m = BTreeMap::new();
        for (s, v) in pairs {
            m.insert(s, Spin::from_value(v)?);
        }
        Ok(BoundaryCondition::Explicit(m))
    }

    pub fn uniform(s: Spin) -> Self {
        match s {
            Spin::Plus => BoundaryCondition::Plus,
            Spin::Minus => BoundaryCondition::Minus,
        }
    }

    /// `η_y`.
    pub fn spin_at(&self, y: &Site) -> Result<i8> {
        match self {
            BoundaryCondition::Plus => Ok(1),
            BoundaryCondition::Minus => Ok(-1),
            BoundaryCondition::Explicit(m) => m
                .get(y)
                .map(|s| s.value())
                .ok_or_else(|| Error::MissingBoundarySite(y.to_string())),
        }
    }

    /// The common sign of a uniform condition.
    pub fn uniform_sign(&self) -> Option<Spin> {
        match self {
            BoundaryCondition::Plus => Some(Spin::Plus),
            BoundaryCondition::Minus => Some(Spin::Minus),
            BoundaryCondition::Explicit(_) => None,
        }
    }

    /// Sign used on the exterior boundary `∂_ex Λ` when one is needed as a
    /// single value; explicit conditions report the majority there.
    pub fn exterior_sign(&self, vol: &Volume) -> Spin {
        match self {
            BoundaryCondition::Plus => Spin::Plus,
            BoundaryCondition::Minus => Spin::Minus,
            BoundaryCondition::Explicit(m) => {
                let sum: i64 = exterior_boundary(vol)
                    .iter()
                    .map(|s| m.get(s).map_or(0, |v| v.value() as i64))
                    .sum();
                if sum >= 0 {
                    Spin::Plus
                } else {
                    Spin::Minus
                }
            }
        }
    }

    pub fn negated(&self) -> Self {
        match self {
            BoundaryCondition::Plus => BoundaryCondition::Minus,
            BoundaryCondition::Minus => BoundaryCondition::Plus,
            BoundaryCondition::Explicit(m) => BoundaryCondition::Explicit(
                m.iter().map(|(s, v)| (s.clone(), v.flipped())).collect(),
            ),
        }
    }
}
