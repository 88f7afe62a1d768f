//! Single-site Metropolis chains, disorder ensembles and `(β, ε)` sweeps.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::Observable;
use crate::lattice::{Site, Volume};
use crate::model::{
    BoundaryCondition, CouplingMatrix, CouplingSpec, FieldRealization, FieldSpec, Model, SpinConfig,
};
use crate::rng::{derive_seed, rng_from_seed};

pub const DEFAULT_BURN_IN: u64 = 1000;
pub const DEFAULT_THINNING: u64 = 10;
/// Target number of batches for batch-means errors.
pub const BATCHES: usize = 100;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanOrder {
    /// Sites in volume order, once per sweep.
    #[default]
    Lexicographic,
    /// `N` uniformly chosen sites per sweep.
    Random,
}

/// Monte Carlo schedule, independent of the model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub beta: f64,
    /// Total sweeps, burn-in included.
    pub sweeps: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: u64,
    #[serde(default = "default_thinning")]
    pub thinning: u64,
    pub seed: u64,
    #[serde(default)]
    pub scan: ScanOrder,
}

fn default_burn_in() -> u64 {
    DEFAULT_BURN_IN
}

fn default_thinning() -> u64 {
    DEFAULT_THINNING
}

impl Schedule {
    pub fn new(beta: f64, sweeps: u64, seed: u64) -> Self {
        Schedule {
            beta,
            sweeps,
            burn_in: DEFAULT_BURN_IN,
            thinning: DEFAULT_THINNING,
            seed,
            scan: ScanOrder::Lexicographic,
        }
    }

    pub fn with_burn_in(mut self, burn_in: u64) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_thinning(mut self, thinning: u64) -> Self {
        self.thinning = thinning;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_scan(mut self, scan: ScanOrder) -> Self {
        self.scan = scan;
        self
    }

    pub fn samples(&self) -> u64 {
        self.sweeps.saturating_sub(self.burn_in) / self.thinning.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta must be finite and >= 0, got {}",
                self.beta
            )));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidParameter(
                "thinning must be at least 1".into(),
            ));
        }
        if self.sweeps <= self.burn_in {
            return Err(Error::InvalidParameter(format!(
                "sweeps ({}) must exceed burn-in ({})",
                self.sweeps, self.burn_in
            )));
        }
        if self.samples() < 2 {
            return Err(Error::InvalidParameter(
                "schedule yields fewer than 2 samples".into(),
            ));
        }
        Ok(())
    }
}

/// A chain's model inputs together with its schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub volume: Volume,
    pub bc: BoundaryCondition,
    #[serde(default)]
    pub field: FieldSpec,
    #[serde(flatten)]
    pub schedule: Schedule,
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.volume.is_empty() {
            return Err(Error::InvalidVolume("chain volume is empty".into()));
        }
        self.field.validate()?;
        self.schedule.validate()
    }

    pub fn build_model(&self, spec: &CouplingSpec) -> Result<Model> {
        self.validate()?;
        let vol = Arc::new(self.volume.clone());
        let field = self.field.realize(vol.clone())?;
        Model::new(vol, *spec, self.bc.clone(), field)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservableRecord {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub effective_samples: u64,
    pub samples: u64,
    pub seed: u64,
}

impl ObservableRecord {
    /// Mean with a batch-means standard error.
    pub fn from_series(name: impl Into<String>, series: &[f64], seed: u64) -> Self {
        let n = series.len();
        let mean = series.iter().sum::<f64>() / n as f64;
        // at least 10 samples per batch, so short runs are not overconfident
        let batches = BATCHES.min(n / 10).max(2).min(n);
        let size = n / batches;
        let used = &series[n - batches * size..];
        let means: Vec<f64> = used
            .chunks(size)
            .map(|c| c.iter().sum::<f64>() / size as f64)
            .collect();
        let bm = means.iter().sum::<f64>() / batches as f64;
        let var_b = if batches > 1 {
            means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (batches - 1) as f64
        } else {
            0.0
        };
        let std_error = (var_b / batches as f64).sqrt();
        let var_naive = if n > 1 {
            series.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let effective_samples = if std_error > 0.0 {
            ((var_naive / (std_error * std_error)).round() as u64).clamp(1, n as u64)
        } else {
            n as u64
        };
        ObservableRecord {
            name: name.into(),
            estimate: mean,
            std_error,
            effective_samples,
            samples: n as u64,
            seed,
        }
    }

    /// Mean of independent estimates with the across-sample standard error.
    /// A single value keeps `single_error`.
    pub fn aggregate(
        name: impl Into<String>,
        values: &[f64],
        single_error: f64,
        seed: u64,
    ) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / ((n - 1) * n) as f64).sqrt()
        } else {
            single_error
        };
        ObservableRecord {
            name: name.into(),
            estimate: mean,
            std_error,
            effective_samples: n as u64,
            samples: n as u64,
            seed,
        }
    }
}

pub fn observable_name(o: &Observable, volume: &Volume) -> String {
    match *o {
        Observable::One => "one".into(),
        Observable::Spin(i) => format!("spin{}", volume.site(i)),
        Observable::Minus(i) => format!("minus{}", volume.site(i)),
        Observable::Energy => "energy".into(),
        Observable::Magnetization => "magnetization".into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainOutput {
    pub records: Vec<ObservableRecord>,
    pub acceptance_rate: f64,
    /// Thinned observable values, one row per sample.
    pub trace: Vec<Vec<f64>>,
    pub final_state: Vec<i8>,
}

/// `log p(σ → σ^{(i)})` up to the symmetric proposal factor.
pub fn metropolis_log_acceptance(beta: f64, delta_e: f64) -> f64 {
    (-beta * delta_e).min(0.0)
}

/// `|log[w(σ) p(σ→σ′)] − log[w(σ′) p(σ′→σ)]|` for the single flip at `i`.
pub fn detailed_balance_gap(model: &Model, beta: f64, sigma: &SpinConfig, i: usize) -> Result<f64> {
    let mut other = sigma.clone();
    other.flip_index(i);
    let e = model.energy(sigma)?.total;
    let eo = model.energy(&other)?.total;
    let fwd = model.delta_single_flip(sigma.values(), i);
    let bwd = model.delta_single_flip(other.values(), i);
    let lhs = -beta * e + metropolis_log_acceptance(beta, fwd);
    let rhs = -beta * eo + metropolis_log_acceptance(beta, bwd);
    Ok((lhs - rhs).abs())
}

/// Run a chain on `model` (which fixes the volume, bc and field) starting
/// from the uniform configuration of the exterior boundary sign.
///
/// At `β = 0` every proposal is accepted and a fixed scan would just flip
/// the whole configuration each sweep, so random scan is used there.
pub fn run_chain_on(
    model: &Model,
    schedule: &Schedule,
    observables: &[Observable],
) -> Result<ChainOutput> {
    schedule.validate()?;
    let n = model.len();
    for o in observables {
        if let Observable::Spin(i) | Observable::Minus(i) = *o {
            if i >= n {
                return Err(Error::InvalidParameter(format!(
                    "site index {i} out of range"
                )));
            }
        }
    }
    let start = model
        .boundary_condition()
        .exterior_sign(model.volume())
        .value();
    let mut spins = vec![start; n];
    let mut energy = model
        .energy(&SpinConfig::from_values(
            model.volume_arc().clone(),
            spins.clone(),
        )?)?
        .total;
    let mut rng = rng_from_seed(schedule.seed);
    let beta = schedule.beta;
    let mut accepted = 0u64;
    let mut proposed = 0u64;
    let mut trace = Vec::with_capacity(schedule.samples() as usize);
    let scan = if beta == 0.0 {
        ScanOrder::Random
    } else {
        schedule.scan
    };
    for sweep in 0..schedule.sweeps {
        for k in 0..n {
            let i = match scan {
                ScanOrder::Lexicographic => k,
                ScanOrder::Random => rng.random_range(0..n),
            };
            let de = model.delta_single_flip(&spins, i);
            let u: f64 = rng.random();
            proposed += 1;
            if de <= 0.0 || u < (-beta * de).exp() {
                spins[i] = -spins[i];
                energy += de;
                accepted += 1;
            }
        }
        if sweep >= schedule.burn_in && (sweep + 1 - schedule.burn_in) % schedule.thinning == 0 {
            trace.push(
                observables
                    .iter()
                    .map(|o| eval(o, &spins, energy))
                    .collect::<Vec<f64>>(),
            );
        }
    }
    let records = observables
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let series: Vec<f64> = trace.iter().map(|row| row[k]).collect();
            ObservableRecord::from_series(
                observable_name(o, model.volume()),
                &series,
                schedule.seed,
            )
        })
        .collect();
    Ok(ChainOutput {
        records,
        acceptance_rate: accepted as f64 / proposed.max(1) as f64,
        trace,
        final_state: spins,
    })
}

fn eval(o: &Observable, spins: &[i8], energy: f64) -> f64 {
    match *o {
        Observable::One => 1.0,
        Observable::Spin(i) => f64::from(spins[i]),
        Observable::Minus(i) => f64::from(u8::from(spins[i] < 0)),
        Observable::Energy => energy,
        Observable::Magnetization => spins.iter().map(|&s| f64::from(s)).sum(),
    }
}

/// Build the model of `cfg` and run its chain.
pub fn run_chain(
    cfg: &ChainConfig,
    spec: &CouplingSpec,
    observables: &[Observable],
) -> Result<ChainOutput> {
    let model = cfg.build_model(spec)?;
    run_chain_on(&model, &cfg.schedule, observables)
}

fn origin_index(volume: &Volume) -> Result<usize> {
    let o = Site::origin(volume.dim());
    volume
        .index_of(&o)
        .ok_or_else(|| Error::SiteOutsideVolume(format!("origin {o} is not in the volume")))
}

/// `P̂[σ_0 = −1]`.
pub fn estimate_origin_minus(model: &Model, schedule: &Schedule) -> Result<ObservableRecord> {
    let i = origin_index(model.volume())?;
    let out = run_chain_on(model, schedule, &[Observable::Minus(i)])?;
    Ok(out.records.into_iter().next().expect("one observable"))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicaRecord {
    pub replica: u64,
    pub field_seed: u64,
    pub chain_seed: u64,
    pub record: ObservableRecord,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub epsilon: f64,
    pub replicas: Vec<ReplicaRecord>,
    pub aggregate: ObservableRecord,
}

/// Seeds of replica `r` under base seed `seed`: `(field, chain)`.
pub fn replica_seeds(seed: u64, r: u64) -> (u64, u64) {
    (
        derive_seed(seed, "replica-field", r),
        derive_seed(seed, "replica-chain", r),
    )
}

/// Disorder-averaged `P̂[σ_0 = −1]`: one Gaussian field draw and one chain
/// per replica. `base` supplies couplings and boundary; its field is
/// replaced.
pub fn disorder_ensemble(
    base: &Model,
    schedule: &Schedule,
    epsilon: f64,
    replicas: u64,
) -> Result<EnsembleResult> {
    if replicas == 0 {
        return Err(Error::InvalidParameter(
            "replicas must be at least 1".into(),
        ));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be finite and >= 0, got {epsilon}"
        )));
    }
    schedule.validate()?;
    origin_index(base.volume())?;
    let vol = base.volume_arc().clone();
    let reps: Vec<ReplicaRecord> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<ReplicaRecord> {
            let (field_seed, chain_seed) = replica_seeds(schedule.seed, r);
            let field = if epsilon > 0.0 {
                FieldSpec::GaussianIid {
                    epsilon,
                    seed: field_seed,
                }
                .realize(vol.clone())?
            } else {
                FieldRealization::zero(vol.clone())
            };
            let model = base.with_field(field)?;
            let record = estimate_origin_minus(&model, &schedule.with_seed(chain_seed))?;
            Ok(ReplicaRecord {
                replica: r,
                field_seed,
                chain_seed,
                record,
            })
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = reps.iter().map(|r| r.record.estimate).collect();
    let aggregate = ObservableRecord::aggregate(
        "p_origin_minus",
        &values,
        reps[0].record.std_error,
        schedule.seed,
    );
    Ok(EnsembleResult {
        epsilon,
        replicas: reps,
        aggregate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub beta: f64,
    pub epsilon: f64,
    pub bc: String,
    pub p_origin_minus: f64,
    pub std_error: f64,
    pub replicas: u64,
    pub seed: u64,
}

fn bc_name(bc: &BoundaryCondition) -> String {
    match bc {
        BoundaryCondition::Plus => "plus".into(),
        BoundaryCondition::Minus => "minus".into(),
        BoundaryCondition::Explicit(_) => "explicit".into(),
    }
}

/// `P̂[σ_0 = −1]` on the grid `betas × epsilons × {bc, −bc}`, rows ordered
/// by β, then ε, then boundary condition.
pub fn beta_sweep(
    volume: Arc<Volume>,
    spec: &CouplingSpec,
    bc: &BoundaryCondition,
    template: &Schedule,
    betas: &[f64],
    epsilons: &[f64],
    replicas: u64,
) -> Result<Vec<SweepRow>> {
    if betas.is_empty() || epsilons.is_empty() {
        return Err(Error::InvalidParameter(
            "sweep grids must be non-empty".into(),
        ));
    }
    let matrix = Arc::new(CouplingMatrix::build(&volume, spec)?);
    let zero = FieldRealization::zero(volume.clone());
    let plus = Model::with_couplings(volume.clone(), *spec, bc.clone(), zero, matrix)?;
    let minus = plus.with_boundary(bc.negated())?;
    let mut points = Vec::new();
    for &beta in betas {
        for &eps in epsilons {
            for m in [&plus, &minus] {
                points.push((beta, eps, m));
            }
        }
    }
    points
        .into_par_iter()
        .enumerate()
        .map(|(k, (beta, eps, m))| {
            let seed = derive_seed(template.seed, "sweep", k as u64);
            let sched = Schedule {
                beta,
                seed,
                ..*template
            };
            let ens = disorder_ensemble(m, &sched, eps, replicas)?;
            Ok(SweepRow {
                beta,
                epsilon: eps,
                bc: bc_name(m.boundary_condition()),
                p_origin_minus: ens.aggregate.estimate,
                std_error: ens.aggregate.std_error,
                replicas,
                seed,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{gibbs_expectation, probability_minus, ExactLimit};
    use crate::model::Spin;

    fn spec() -> CouplingSpec {
        CouplingSpec::new(1.0, 3.0, 2, 4.0).unwrap()
    }

    fn model(sides: &[usize], bc: BoundaryCondition) -> Model {
        let vol = Arc::new(Volume::centered_box(sides).unwrap());
        Model::new(vol.clone(), spec(), bc, FieldRealization::zero(vol)).unwrap()
    }

    #[test]
    fn schedule_validation() {
        assert!(Schedule::new(1.0, 100, 0).validate().is_err());
        assert!(Schedule::new(1.0, 2000, 0)
            .with_thinning(0)
            .validate()
            .is_err());
        assert!(Schedule::new(-1.0, 2000, 0).validate().is_err());
        assert!(Schedule::new(1.0, 2000, 0).validate().is_ok());
    }

    #[test]
    fn infinite_temperature_is_uniform() {
        let m = model(&[3, 3], BoundaryCondition::Plus);
        let r = estimate_origin_minus(&m, &Schedule::new(0.0, 11_000, 1)).unwrap();
        assert!((r.estimate - 0.5).abs() <= 3.0 * r.std_error, "{r:?}");
    }

    #[test]
    fn matches_exact_on_3x3() {
        let m = model(&[3, 3], BoundaryCondition::Plus);
        let exact = probability_minus(&m, 0.5, &Site::origin(2), ExactLimit::default()).unwrap();
        // the event is rare here (about 6e-4), so sample every sweep
        let r =
            estimate_origin_minus(&m, &Schedule::new(0.5, 201_000, 7).with_thinning(1)).unwrap();
        assert!(
            (r.estimate - exact).abs() <= 3.0 * r.std_error,
            "{r:?} vs {exact}"
        );
        assert!(r.std_error > 0.0);
    }

    #[test]
    fn energy_tracks_exact_mean() {
        let m = model(&[2, 2], BoundaryCondition::Plus);
        let e = gibbs_expectation(&m, 0.7, &[Observable::Energy])
            .unwrap()
            .means[0];
        let out = run_chain_on(&m, &Schedule::new(0.7, 21_000, 3), &[Observable::Energy]).unwrap();
        let r = &out.records[0];
        assert!((r.estimate - e).abs() <= 3.0 * r.std_error, "{r:?} vs {e}");
        // tracked energy agrees with a fresh evaluation
        let fin = SpinConfig::from_values(m.volume_arc().clone(), out.final_state.clone()).unwrap();
        let direct = m.energy(&fin).unwrap().total;
        assert!((out.trace.last().unwrap()[0] - direct).abs() < 1e-9);
    }

    #[test]
    fn deterministic_streams() {
        let m = model(&[3, 3], BoundaryCondition::Plus);
        for scan in [ScanOrder::Lexicographic, ScanOrder::Random] {
            let s = Schedule::new(1.0, 3000, 42).with_scan(scan);
            let a = run_chain_on(&m, &s, &[Observable::Magnetization]).unwrap();
            let b = run_chain_on(&m, &s, &[Observable::Magnetization]).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn minus_boundary_mirrors_plus() {
        let m = model(&[4, 4], BoundaryCondition::Minus);
        let r = estimate_origin_minus(&m, &Schedule::new(3.0, 6000, 5)).unwrap();
        assert!(r.estimate > 0.95);
        let p = estimate_origin_minus(
            &m.with_boundary(BoundaryCondition::Plus).unwrap(),
            &Schedule::new(3.0, 6000, 5),
        )
        .unwrap();
        assert!(p.estimate < 0.05);
    }

    #[test]
    fn detailed_balance() {
        let m = model(&[3, 3], BoundaryCondition::Plus);
        let vol = m.volume_arc().clone();
        for bits in [0u64, 0b1, 0b10110, 0b111111111, 0b101010101] {
            let s = SpinConfig::from_bits(vol.clone(), bits);
            for i in 0..9 {
                for beta in [0.3, 1.0, 4.0] {
                    assert!(detailed_balance_gap(&m, beta, &s, i).unwrap() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn aggregate_error_scales() {
        // deterministic iid-like values from a seeded stream
        let mut rng = rng_from_seed(9);
        let draws: Vec<f64> = (0..6400).map(|_| rng.random::<f64>()).collect();
        let se = |k: usize| ObservableRecord::aggregate("x", &draws[..k], 0.0, 0).std_error;
        let ratio = se(100) / se(6400);
        assert!((ratio - 8.0).abs() < 1.5, "{ratio}");
        assert_eq!(
            ObservableRecord::aggregate("c", &[0.25; 10], 0.0, 0).std_error,
            0.0
        );
        assert_eq!(
            ObservableRecord::aggregate("one", &[0.25], 0.1, 0).std_error,
            0.1
        );
    }

    #[test]
    fn zero_field_ensemble() {
        let m = model(&[3, 3], BoundaryCondition::Plus);
        let s = Schedule::new(0.2, 11_000, 11);
        let e = disorder_ensemble(&m, &s, 0.0, 4).unwrap();
        assert_eq!(e.replicas.len(), 4);
        let exact = probability_minus(&m, 0.2, &Site::origin(2), ExactLimit::default()).unwrap();
        for r in &e.replicas {
            assert!(
                (r.record.estimate - exact).abs() <= 4.0 * r.record.std_error,
                "{r:?} vs {exact}"
            );
        }
        assert!(disorder_ensemble(&m, &s, 0.1, 0).is_err());
    }

    #[test]
    fn sweep_shape_and_symmetry() {
        let vol = Arc::new(Volume::centered_box(&[3, 3]).unwrap());
        let rows = beta_sweep(
            vol,
            &spec(),
            &BoundaryCondition::Plus,
            &Schedule::new(0.5, 6000, 3),
            &[0.5],
            &[0.0],
            2,
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].bc, "plus");
        assert_eq!(rows[1].bc, "minus");
        let sum = rows[0].p_origin_minus + rows[1].p_origin_minus;
        let joint = (rows[0].std_error.powi(2) + rows[1].std_error.powi(2)).sqrt();
        assert!((sum - 1.0).abs() <= 3.0 * joint.max(1e-3), "{rows:?}");
    }

    #[test]
    fn origin_required() {
        let vol = Arc::new(Volume::boxed(&[2, 2], &Site::new(vec![3, 3])).unwrap());
        let m = Model::new(
            vol.clone(),
            spec(),
            BoundaryCondition::Plus,
            FieldRealization::zero(vol),
        )
        .unwrap();
        assert!(matches!(
            estimate_origin_minus(&m, &Schedule::new(1.0, 2000, 0)),
            Err(Error::SiteOutsideVolume(_))
        ));
        let _ = Spin::Plus;
    }
}
