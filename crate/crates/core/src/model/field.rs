use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Norm, Site, Volume};
use crate::rng::{derive_seed, rng_from_seed, stable_hash64};

use super::FlipOnRegion;

/// How the external field is generated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    #[default]
    None,
    /// `ε h_x` with `h_x` iid standard Gaussians.
    GaussianIid { epsilon: f64, seed: u64 },
    /// `h_x = h* |x|^{−δ}`, with `h_0 = h*`.
    Decaying { h_star: f64, delta: f64 },
}

impl FieldSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            FieldSpec::None => Ok(()),
            FieldSpec::GaussianIid { epsilon, .. } => {
                if epsilon > 0.0 && epsilon.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "epsilon must be > 0, got {epsilon}"
                    )))
                }
            }
            FieldSpec::Decaying { h_star, delta } => {
                if h_star > 0.0 && delta > 0.0 && h_star.is_finite() && delta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "h* and delta must be > 0, got {h_star}, {delta}"
                    )))
                }
            }
        }
    }

    pub fn kind(&self) -> FieldKind {
        match self {
            FieldSpec::None => FieldKind::None,
            FieldSpec::GaussianIid { .. } => FieldKind::Gaussian,
            FieldSpec::Decaying { .. } => FieldKind::Decaying,
        }
    }

    pub fn realize(&self, volume: Arc<Volume>) -> Result<FieldRealization> {
        self.validate()?;
        let n = volume.len();
        let (strength, values, seed) = match *self {
            FieldSpec::None => (0.0, vec![0.0; n], None),
            FieldSpec::GaussianIid { epsilon, seed } => {
                let values = volume.iter().map(|s| gaussian_at(seed, s)).collect();
                (epsilon, values, Some(seed))
            }
            FieldSpec::Decaying { h_star, delta } => {
                let values = volume
                    .iter()
                    .map(|s| {
                        let r = Norm::Euclidean.of(s.coords().iter().map(|&c| c as f64));
                        if r == 0.0 {
                            h_star
                        } else {
                            h_star * r.powf(-delta)
                        }
                    })
                    .collect();
                (1.0, values, None)
            }
        };
        Ok(FieldRealization {
            kind: self.kind(),
            strength,
            seed,
            volume,
            values,
        })
    }
}

/// Standard Gaussian attached to site `s` by `seed`; independent of the
/// volume the site is viewed in.
fn gaussian_at(seed: u64, s: &Site) -> f64 {
    let key = serde_json::to_vec(s.coords()).expect("coordinates serialize");
    let mut rng = rng_from_seed(derive_seed(seed, "field-site", stable_hash64(&key)));
    StandardNormal.sample(&mut rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    None,
    Gaussian,
    Decaying,
}

/// Raw field values `h_x` on a volume with the multiplier that turns them into
/// the Hamiltonian coefficients (`ε` for Gaussian disorder, 1 otherwise).
#[derive(Clone, Debug, PartialEq)]
pub struct FieldRealization {
    kind: FieldKind,
    strength: f64,
    seed: Option<u64>,
    volume: Arc<Volume>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldRealizationRepr {
    kind: FieldKind,
    strength: f64,
    seed: Option<u64>,
    sites: Volume,
    values: Vec<f64>,
}

impl Serialize for FieldRealization {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FieldRealizationRepr {
            kind: self.kind,
            strength: self.strength,
            seed: self.seed,
            sites: (*self.volume).clone(),
            values: self.values.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FieldRealization {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = FieldRealizationRepr::deserialize(d)?;
        FieldRealization::from_raw(r.kind, r.strength, r.seed, Arc::new(r.sites), r.values)
            .map_err(serde::de::Error::custom)
    }
}

impl FieldRealization {
    pub fn zero(volume: Arc<Volume>) -> Self {
        let n = volume.len();
        FieldRealization {
            kind: FieldKind::None,
            strength: 0.0,
            seed: None,
            volume,
            values: vec![0.0; n],
        }
    }

    pub fn from_raw(
        kind: FieldKind,
        strength: f64,
        seed: Option<u64>,
        volume: Arc<Volume>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != volume.len() {
            return Err(Error::DomainMismatch(format!(
                "{} field values for {} sites",
                values.len(),
                volume.len()
            )));
        }
        if !strength.is_finite() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "field values must be finite".into(),
            ));
        }
        Ok(FieldRealization {
            kind,
            strength,
            seed,
            volume,
            values,
        })
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn volume(&self) -> &Volume {
        &self.volume
    }

    pub fn volume_arc(&self) -> &Arc<Volume> {
        &self.volume
    }

    /// Raw `h_x` in site order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, s: &Site) -> Result<f64> {
        self.volume
            .index_of(s)
            .map(|i| self.values[i])
            .ok_or_else(|| Error::SiteOutsideVolume(s.to_string()))
    }

    /// Hamiltonian coefficients `strength · h_x`.
    pub fn effective(&self) -> Vec<f64> {
        self.values.iter().map(|v| self.strength * v).collect()
    }

    /// Copy with the Gaussian values on `a` redrawn from `seed`, everything
    /// else kept.
    pub fn resampled_on(&self, a: &Volume, seed: u64) -> Result<Self> {
        let mut out = self.clone();
        for s in a.iter() {
            let i = self
                .volume
                .index_of(s)
                .ok_or_else(|| Error::DomainMismatch(format!("{s} is outside the field domain")))?;
            out.values[i] = gaussian_at(seed, s);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

impl FlipOnRegion for FieldRealization {
    fn apply_tau_a(&self, a: &Volume) -> Result<Self> {
        let mut out = self.clone();
        for s in a.iter() {
            let i = self
                .volume
                .index_of(s)
                .ok_or_else(|| Error::DomainMismatch(format!("{s} is outside the field domain")))?;
            out.values[i] = -out.values[i];
        }
        Ok(out)
    }
}
