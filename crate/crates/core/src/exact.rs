//! Exact Gibbs quantities by enumerating every configuration of a small
//! volume.
//!
//! Configurations are visited in Gray-code order so consecutive states differ
//! by one spin and the energy is updated in `O(N)`. Weights are accumulated as
//! a streaming log-sum-exp, and the work is split over the leading spins into
//! blocks that are folded back in a fixed order, so results do not depend on
//! the thread count.

use rayon::prelude::*;
use serde::Serialize;

use crate::contour::Contour;
use crate::error::{Error, Result};
use crate::lattice::Volume;
use crate::model::{BoundaryCondition, FieldRealization, FlipOnRegion, Model, SpinConfig};
use crate::rng::stable_hash64;

/// Largest volume enumerated by default.
pub const EXACT_CAP: usize = 20;
/// Largest volume enumerated when the scale guard is overridden.
pub const EXACT_CAP_OVERRIDE: usize = 30;

/// Volume limit for an enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExactLimit(pub usize);

impl Default for ExactLimit {
    fn default() -> Self {
        ExactLimit(EXACT_CAP)
    }
}

impl ExactLimit {
    pub fn overridden() -> Self {
        ExactLimit(EXACT_CAP_OVERRIDE)
    }

    pub fn check(&self, size: usize) -> Result<()> {
        if size > self.0 {
            return Err(Error::VolumeTooLarge { size, cap: self.0 });
        }
        Ok(())
    }
}

/// A function of the configuration whose Gibbs mean is wanted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Observable {
    /// `1`, whose mean checks normalisation.
    One,
    /// `σ_i`.
    Spin(usize),
    /// `1{σ_i = −1}`.
    Minus(usize),
    /// `H(σ)`.
    Energy,
    /// `Σ_i σ_i`.
    Magnetization,
}

impl Observable {
    fn eval(&self, spins: &[i8], energy: f64) -> f64 {
        match *self {
            Observable::One => 1.0,
            Observable::Spin(i) => f64::from(spins[i]),
            Observable::Minus(i) => {
                if spins[i] < 0 {
                    1.0
                } else {
                    0.0
                }
            }
            Observable::Energy => energy,
            Observable::Magnetization => spins.iter().map(|&s| f64::from(s)).sum(),
        }
    }
}

/// Running `log Σ w` together with `Σ f w` for several observables, all held
/// relative to the largest log-weight seen.
#[derive(Clone, Debug)]
struct Accumulator {
    shift: f64,
    z: f64,
    sums: Vec<f64>,
}

impl Accumulator {
    fn new(k: usize) -> Self {
        Accumulator {
            shift: f64::NEG_INFINITY,
            z: 0.0,
            sums: vec![0.0; k],
        }
    }

    fn rescale(&mut self, new_shift: f64) {
        if self.shift.is_finite() {
            let f = (self.shift - new_shift).exp();
            self.z *= f;
            for s in &mut self.sums {
                *s *= f;
            }
        }
        self.shift = new_shift;
    }

    fn push(&mut self, logw: f64, values: impl Iterator<Item = f64>) {
        if logw > self.shift {
            self.rescale(logw);
        }
        let w = (logw - self.shift).exp();
        self.z += w;
        for (s, v) in self.sums.iter_mut().zip(values) {
            *s += w * v;
        }
    }

    fn merge(mut self, other: Accumulator) -> Accumulator {
        if !other.shift.is_finite() {
            return self;
        }
        if other.shift > self.shift {
            self.rescale(other.shift);
        }
        let f = (other.shift - self.shift).exp();
        self.z += f * other.z;
        for (s, o) in self.sums.iter_mut().zip(&other.sums) {
            *s += f * o;
        }
        self
    }

    fn log_z(&self) -> f64 {
        self.shift + self.z.ln()
    }
}

/// Raw enumeration result.
#[derive(Clone, Debug)]
struct Enumeration {
    log_z: f64,
    max_log_weight: f64,
    means: Vec<f64>,
}

fn enumerate(
    model: &Model,
    beta: f64,
    observables: &[Observable],
    limit: ExactLimit,
) -> Result<Enumeration> {
    let n = model.len();
    limit.check(n)?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "beta must be finite and >= 0, got {beta}"
        )));
    }
    let j = model.couplings();
    let ext = model.external();
    let top = n.min(6);
    let low = n - top;
    let blocks: Vec<(Accumulator, f64)> = (0..(1u64 << top))
        .into_par_iter()
        .map(|block| {
            let mut spins = vec![1i8; n];
            for t in 0..top {
                if block >> t & 1 == 1 {
                    spins[low + t] = -1;
                }
            }
            // local fields without the external part
            let mut local: Vec<f64> = (0..n)
                .map(|i| {
                    j.row(i)
                        .iter()
                        .zip(&spins)
                        .map(|(c, &s)| c * f64::from(s))
                        .sum()
                })
                .collect();
            let mut energy: f64 = 0.0;
            for i in 0..n {
                let s = f64::from(spins[i]);
                energy -= 0.5 * s * local[i] + s * ext[i];
            }
            let mut acc = Accumulator::new(observables.len());
            let mut best = f64::NEG_INFINITY;
            let mut visit = |spins: &[i8], energy: f64, acc: &mut Accumulator| {
                let logw = -beta * energy;
                best = best.max(logw);
                acc.push(logw, observables.iter().map(|o| o.eval(spins, energy)));
            };
            visit(&spins, energy, &mut acc);
            for k in 1u64..(1u64 << low) {
                let i = k.trailing_zeros() as usize;
                let s = f64::from(spins[i]);
                energy += 2.0 * s * (local[i] + ext[i]);
                spins[i] = -spins[i];
                let ds = -2.0 * s;
                for (l, c) in local.iter_mut().zip(j.row(i)) {
                    *l += ds * c;
                }
                visit(&spins, energy, &mut acc);
            }
            (acc, best)
        })
        .collect();
    let mut total = Accumulator::new(observables.len());
    let mut max_log_weight = f64::NEG_INFINITY;
    for (acc, best) in blocks {
        total = total.merge(acc);
        max_log_weight = max_log_weight.max(best);
    }
    let log_z = total.log_z();
    if !log_z.is_finite() {
        return Err(Error::Inconsistent(
            "partition function is not finite".into(),
        ));
    }
    let means = total.sums.iter().map(|s| s / total.z).collect();
    Ok(Enumeration {
        log_z,
        max_log_weight,
        means,
    })
}

/// Stable hash of a field realization's values and strength.
pub fn field_hash(field: &FieldRealization) -> u64 {
    let mut bytes = Vec::with_capacity(8 * (field.values().len() + 2));
    bytes.extend(field.strength().to_bits().to_le_bytes());
    for v in field.values() {
        bytes.extend(v.to_bits().to_le_bytes());
    }
    bytes.extend(field.volume().content_hash().to_le_bytes());
    stable_hash64(&bytes)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogPartition {
    pub log_z: f64,
    pub beta: f64,
    pub volume_hash: u64,
    pub bc: BoundaryCondition,
    pub field_hash: u64,
    /// `max_σ −βH(σ)`.
    pub max_log_weight: f64,
}

/// `log Σ_σ exp(−βH(σ))`.
pub fn log_partition(model: &Model, beta: f64) -> Result<LogPartition> {
    log_partition_with(model, beta, ExactLimit::default())
}

pub fn log_partition_with(model: &Model, beta: f64, limit: ExactLimit) -> Result<LogPartition> {
    let e = enumerate(model, beta, &[], limit)?;
    Ok(LogPartition {
        log_z: e.log_z,
        beta,
        volume_hash: model.volume().content_hash(),
        bc: model.boundary_condition().clone(),
        field_hash: field_hash(model.field()),
        max_log_weight: e.max_log_weight,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GibbsMeans {
    pub partition: LogPartition,
    pub observables: Vec<Observable>,
    pub means: Vec<f64>,
}

/// Gibbs means of several observables from one enumeration.
pub fn gibbs_expectation(
    model: &Model,
    beta: f64,
    observables: &[Observable],
) -> Result<GibbsMeans> {
    gibbs_expectation_with(model, beta, observables, ExactLimit::default())
}

pub fn gibbs_expectation_with(
    model: &Model,
    beta: f64,
    observables: &[Observable],
    limit: ExactLimit,
) -> Result<GibbsMeans> {
    for o in observables {
        if let Observable::Spin(i) | Observable::Minus(i) = *o {
            if i >= model.len() {
                return Err(Error::InvalidParameter(format!(
                    "site index {i} out of range"
                )));
            }
        }
    }
    let e = enumerate(model, beta, observables, limit)?;
    Ok(GibbsMeans {
        partition: LogPartition {
            log_z: e.log_z,
            beta,
            volume_hash: model.volume().content_hash(),
            bc: model.boundary_condition().clone(),
            field_hash: field_hash(model.field()),
            max_log_weight: e.max_log_weight,
        },
        observables: observables.to_vec(),
        means: e.means,
    })
}

/// `P[σ_x = −1]` for the site `x` of the volume.
pub fn probability_minus(
    model: &Model,
    beta: f64,
    x: &crate::lattice::Site,
    limit: ExactLimit,
) -> Result<f64> {
    let i = model
        .volume()
        .index_of(x)
        .ok_or_else(|| Error::SiteOutsideVolume(x.to_string()))?;
    Ok(gibbs_expectation_with(model, beta, &[Observable::Minus(i)], limit)?.means[0])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeltaRecord {
    pub region: Volume,
    pub region_hash: u64,
    pub delta: f64,
    pub beta: f64,
    pub field_hash: u64,
    pub field_seed: Option<u64>,
    pub epsilon: f64,
}

/// `Δ_A(h) = −(1/β) [log Z(h) − log Z(τ_A h)]`.
pub fn delta_a(model: &Model, beta: f64, a: &Volume) -> Result<DeltaRecord> {
    delta_a_with(model, beta, a, ExactLimit::default())
}

pub fn delta_a_with(
    model: &Model,
    beta: f64,
    a: &Volume,
    limit: ExactLimit,
) -> Result<DeltaRecord> {
    if beta <= 0.0 || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "delta needs beta > 0, got {beta}"
        )));
    }
    if !a.is_subset(model.volume()) {
        return Err(Error::DomainMismatch(
            "flip region leaves the volume".into(),
        ));
    }
    let delta = if a.is_empty()
        || model.field().values().iter().all(|&v| v == 0.0)
        || model.field().strength() == 0.0
    {
        0.0
    } else {
        let flipped = model.with_field(model.field().apply_tau_a(a)?)?;
        let z = log_partition_with(model, beta, limit)?.log_z;
        let zt = log_partition_with(&flipped, beta, limit)?.log_z;
        -(z - zt) / beta
    };
    Ok(DeltaRecord {
        region: a.clone(),
        region_hash: a.content_hash(),
        delta,
        beta,
        field_hash: field_hash(model.field()),
        field_seed: model.field().seed(),
        epsilon: model.field().strength(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BadEventReport {
    /// `sup_γ |Δ_{I_−(γ)}| / (c_1 |γ|)`.
    pub sup: f64,
    pub argmax: Option<usize>,
    pub threshold: f64,
    /// `sup ≥ threshold`; equality counts as the bad event.
    pub indicator: bool,
    pub ratios: Vec<f64>,
    /// Contours skipped because `I_−(γ)` is empty.
    pub empty_regions: usize,
}

/// Evaluate the bad event over a family of contours.
pub fn bad_event_sup(
    model: &Model,
    beta: f64,
    family: &[Contour],
    c1: f64,
    threshold: f64,
    limit: ExactLimit,
) -> Result<BadEventReport> {
    if family.is_empty() {
        return Err(Error::Degenerate(
            "bad event needs a non-empty family".into(),
        ));
    }
    if !(c1 > 0.0 && c1.is_finite()) {
        return Err(Error::InvalidParameter(format!("c1 must be > 0, got {c1}")));
    }
    let mut ratios = Vec::with_capacity(family.len());
    let mut empty_regions = 0;
    for g in family {
        let region = g.i_minus();
        if region.is_empty() {
            empty_regions += 1;
            ratios.push(0.0);
            continue;
        }
        let d = delta_a_with(model, beta, region, limit)?;
        ratios.push(d.delta.abs() / (c1 * g.len() as f64));
    }
    let (argmax, sup) = ratios
        .iter()
        .enumerate()
        .fold((None, 0.0f64), |(bi, bv), (i, &v)| {
            if bi.is_none() || v > bv {
                (Some(i), v)
            } else {
                (bi, bv)
            }
        });
    Ok(BadEventReport {
        sup,
        argmax,
        threshold,
        indicator: sup >= threshold,
        ratios,
        empty_regions,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityCheck {
    /// `log[D(σ,h) Z(h) / (D(τσ,τh) Z(τh))]` through enumerated partition
    /// functions.
    pub lhs_log: f64,
    /// `β H(τσ, τh) − β H(σ, h)` from direct energies.
    pub rhs_log: f64,
    /// `|exp(lhs − rhs) − 1|`.
    pub rel_error: f64,
}

/// Density-ratio identity for the flip `τ_A` of both spins and field.
pub fn identity_check(
    model: &Model,
    beta: f64,
    sigma: &SpinConfig,
    a: &Volume,
    limit: ExactLimit,
) -> Result<IdentityCheck> {
    let flipped = model.with_field(model.field().apply_tau_a(a)?)?;
    let tau_sigma = sigma.apply_tau_a(a)?;
    let z = log_partition_with(model, beta, limit)?.log_z;
    let zt = log_partition_with(&flipped, beta, limit)?.log_z;
    let e = model.energy(sigma)?.total;
    let et = flipped.energy(&tau_sigma)?.total;
    let log_d = -beta * e - z;
    let log_dt = -beta * et - zt;
    let lhs_log = (log_d + z) - (log_dt + zt);
    let rhs_log = beta * et - beta * e;
    Ok(IdentityCheck {
        lhs_log,
        rhs_log,
        rel_error: (lhs_log - rhs_log).exp_m1().abs(),
    })
}

/// [`identity_check`] with `A = I(γ)`.
pub fn identity_check_contour(
    model: &Model,
    beta: f64,
    sigma: &SpinConfig,
    gamma: Option<&Contour>,
    limit: ExactLimit,
) -> Result<IdentityCheck> {
    let a = match gamma {
        Some(g) => g.interior(),
        None => Volume::empty(model.volume().dim()),
    };
    identity_check(model, beta, sigma, &a, limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Site;
    use crate::model::{CouplingSpec, FieldKind, FieldSpec, Spin};
    use std::sync::Arc;

    fn decoupled(b: Vec<f64>, f: Vec<f64>) -> Model {
        let n = b.len();
        let vol =
            Arc::new(Volume::new((0..n as i64).map(|i| Site::new(vec![3 * i])).collect()).unwrap());
        Model::from_parts(vol, vec![0.0; n * n], b, f).unwrap()
    }

    fn lr(sides: &[usize], bc: BoundaryCondition, field: FieldSpec) -> Model {
        let vol = Arc::new(Volume::centered_box(sides).unwrap());
        let spec = CouplingSpec::new(1.0, 3.0, sides.len(), 4.0).unwrap();
        let f = field.realize(vol.clone()).unwrap();
        Model::new(vol, spec, bc, f).unwrap()
    }

    /// Direct sum over configurations, for comparison.
    fn brute_log_z(model: &Model, beta: f64) -> f64 {
        let vol = model.volume_arc().clone();
        let logs: Vec<f64> = (0..(1u64 << vol.len()))
            .map(|b| {
                -beta
                    * model
                        .energy(&SpinConfig::from_bits(vol.clone(), b))
                        .unwrap()
                        .total
            })
            .collect();
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
    }

    #[test]
    fn infinite_temperature() {
        let m = lr(&[3, 3], BoundaryCondition::Plus, FieldSpec::None);
        let lz = log_partition(&m, 0.0).unwrap();
        assert!((lz.log_z - 9.0 * 2f64.ln()).abs() < 1e-12);
        let p = gibbs_expectation(&m, 0.0, &[Observable::Minus(4)]).unwrap();
        assert_eq!(p.means[0], 0.5);
    }

    #[test]
    fn closed_forms() {
        let beta = 0.7;
        let single = decoupled(vec![1.3], vec![0.0]);
        let lz = log_partition(&single, beta).unwrap().log_z;
        assert!((lz - (2.0 * (beta * 1.3f64).cosh()).ln()).abs() < 1e-13);
        let b = vec![0.4, -1.1, 2.0, 0.0];
        let many = decoupled(b.clone(), vec![0.0; 4]);
        let expect: f64 = b.iter().map(|x| (2.0 * (beta * x).cosh()).ln()).sum();
        assert!((log_partition(&many, beta).unwrap().log_z - expect).abs() < 1e-12);
    }

    #[test]
    fn matches_direct_sum_and_normalises() {
        let m = lr(
            &[3, 3],
            BoundaryCondition::Plus,
            FieldSpec::GaussianIid {
                epsilon: 0.5,
                seed: 4,
            },
        );
        for beta in [0.1, 1.0, 3.0] {
            let g = gibbs_expectation(
                &m,
                beta,
                &[Observable::One, Observable::Minus(4), Observable::Spin(4)],
            )
            .unwrap();
            assert!(
                (g.partition.log_z - brute_log_z(&m, beta)).abs()
                    < 1e-10 * g.partition.log_z.abs().max(1.0)
            );
            assert!((g.means[0] - 1.0).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&g.means[1]));
            assert!(g.partition.log_z >= g.partition.max_log_weight);
            // P[+] + P[−] = 1 via ⟨σ⟩ = 1 − 2 P[−]
            assert!((g.means[2] - (1.0 - 2.0 * g.means[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn plus_boundary_magnetises_origin() {
        let m = lr(&[3, 3], BoundaryCondition::Plus, FieldSpec::None);
        let i = m.volume().index_of(&Site::origin(2)).unwrap();
        let mut last = 0.0;
        for beta in [0.05, 0.2, 0.5, 1.0, 2.0] {
            let s = gibbs_expectation(&m, beta, &[Observable::Spin(i)])
                .unwrap()
                .means[0];
            assert!(s > 0.0);
            assert!(s >= last);
            last = s;
        }
    }

    #[test]
    fn volume_cap() {
        let m = lr(&[5, 5], BoundaryCondition::Plus, FieldSpec::None);
        assert!(matches!(
            log_partition(&m, 1.0),
            Err(Error::VolumeTooLarge { size: 25, cap: 20 })
        ));
    }

    #[test]
    fn delta_examples() {
        let vol = Arc::new(Volume::new(vec![Site::new(vec![0])]).unwrap());
        let field =
            FieldRealization::from_raw(FieldKind::Gaussian, 1.0, None, vol.clone(), vec![1.0])
                .unwrap();
        let m = Model::from_parts(vol.clone(), vec![0.0], vec![1.0], vec![0.0])
            .unwrap()
            .with_field(field)
            .unwrap();
        let d = delta_a(&m, 1.0, &vol).unwrap().delta;
        // −[ln 2cosh 2 − ln 2cosh 0]
        let oracle = -((2f64).cosh().ln() - 0f64.cosh().ln());
        assert!((oracle + 1.3250027473578645).abs() < 1e-12);
        assert!((d - oracle).abs() < 1e-12);
        assert!(delta_a(&m, 0.0, &vol).is_err());
        assert_eq!(delta_a(&m, 1.0, &Volume::empty(1)).unwrap().delta, 0.0);
        let zero = lr(&[3, 3], BoundaryCondition::Plus, FieldSpec::None);
        assert_eq!(delta_a(&zero, 1.0, zero.volume()).unwrap().delta, 0.0);
    }

    #[test]
    fn delta_is_antisymmetric() {
        let m = lr(
            &[3, 3],
            BoundaryCondition::Plus,
            FieldSpec::GaussianIid {
                epsilon: 0.5,
                seed: 8,
            },
        );
        let a = Volume::region(2, [Site::new(vec![0, 0]), Site::new(vec![1, 0])]).unwrap();
        let d = delta_a(&m, 1.0, &a).unwrap().delta;
        let mt = m.with_field(m.field().apply_tau_a(&a).unwrap()).unwrap();
        let dt = delta_a(&mt, 1.0, &a).unwrap().delta;
        assert!((d + dt).abs() < 1e-12);
    }

    #[test]
    fn symmetric_without_fields() {
        let vol = Arc::new(Volume::centered_box(&[3, 3]).unwrap());
        let n = vol.len();
        let spec = CouplingSpec::new(1.0, 3.0, 2, 4.0).unwrap();
        let base = Model::new(
            vol.clone(),
            spec,
            BoundaryCondition::Plus,
            FieldRealization::zero(vol.clone()),
        )
        .unwrap();
        let m = Model::from_parts(
            vol,
            base.couplings().as_slice().to_vec(),
            vec![0.0; n],
            vec![0.0; n],
        )
        .unwrap();
        let g = gibbs_expectation(&m, 1.3, &[Observable::Magnetization]).unwrap();
        assert!(g.means[0].abs() < 1e-12);
    }

    #[test]
    fn identity_holds() {
        let m = lr(
            &[3, 3],
            BoundaryCondition::Plus,
            FieldSpec::GaussianIid {
                epsilon: 0.3,
                seed: 2,
            },
        );
        let sigma = SpinConfig::from_bits(m.volume_arc().clone(), 0b000_010_000);
        let a = Volume::region(2, [Site::new(vec![0, 0])]).unwrap();
        let c = identity_check(&m, 1.0, &sigma, &a, ExactLimit::default()).unwrap();
        assert!(c.rel_error < 1e-9);
        let none = identity_check_contour(&m, 1.0, &sigma, None, ExactLimit::default()).unwrap();
        assert!(none.lhs_log.abs() < 1e-12 && none.rhs_log == 0.0);
        let _ = Spin::Plus;
    }

    #[test]
    fn bad_event_zero_field() {
        use crate::contour::{extract_contours, MarParams};
        let m = lr(&[3, 3], BoundaryCondition::Plus, FieldSpec::None);
        let mut s = SpinConfig::uniform(m.volume_arc().clone(), Spin::Plus);
        s.set(&Site::origin(2), Spin::Minus).unwrap();
        let fam = extract_contours(&s, &BoundaryCondition::Plus, &MarParams::default()).unwrap();
        let r = bad_event_sup(&m, 1.0, fam.contours(), 1.0, 0.25, ExactLimit::default()).unwrap();
        assert_eq!(r.sup, 0.0);
        assert!(!r.indicator);
        assert!(bad_event_sup(&m, 1.0, &[], 1.0, 0.25, ExactLimit::default()).is_err());
    }
}
