use std::path::Path;

use lrising::contour::{MarParams, OriginRule};
use lrising::sampler::{ScanOrder, Schedule, DEFAULT_BURN_IN, DEFAULT_THINNING};
use lrising::{BoundaryCondition, CouplingSpec, FieldSpec, Norm, Volume};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelBlock {
    pub d: usize,
    pub alpha: f64,
    pub j: f64,
    pub r_cut: f64,
    pub norm: Norm,
}

impl Default for ModelBlock {
    fn default() -> Self {
        ModelBlock {
            d: 2,
            alpha: 3.0,
            j: 1.0,
            r_cut: 4.0,
            norm: Norm::Euclidean,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolumeBlock {
    /// Box side lengths; the box is centred on the origin.
    pub sides: Vec<usize>,
}

impl Default for VolumeBlock {
    fn default() -> Self {
        VolumeBlock { sides: vec![4, 4] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunBlock {
    pub betas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub seed: u64,
    pub replicas: u64,
    pub sweeps: u64,
    pub burn_in: u64,
    pub thinning: u64,
    pub scan: ScanOrder,
}

impl Default for RunBlock {
    fn default() -> Self {
        RunBlock {
            betas: vec![0.5, 1.0, 2.0, 4.0],
            epsilons: vec![0.0],
            seed: 1,
            replicas: 4,
            sweeps: 11_000,
            burn_in: DEFAULT_BURN_IN,
            thinning: DEFAULT_THINNING,
            scan: ScanOrder::Lexicographic,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContoursBlock {
    pub ns: Vec<usize>,
    pub ls: Vec<u32>,
    pub rule: OriginRule,
    pub j: Option<usize>,
}

impl Default for ContoursBlock {
    fn default() -> Self {
        ContoursBlock {
            ns: vec![4, 5, 6, 8],
            ls: vec![0, 1, 2, 3],
            rule: OriginRule::Interior,
            j: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyBlock {
    /// Volume for the exhaustive flip-energy check.
    pub flip_sides: Vec<usize>,
    /// Volume for the concentration, bad-event and Dudley checks.
    pub disorder_sides: Vec<usize>,
    pub epsilon: f64,
    pub beta: f64,
    pub replicas: usize,
    pub lambdas: Vec<f64>,
    pub counting_ns: Vec<usize>,
    pub counting_ls: Vec<u32>,
    pub c4_r: f64,
    pub c4_a: f64,
    pub c4_k: f64,
    /// Contour length of the bad-event and Dudley families.
    pub family_n: usize,
    pub bad_event_c1: f64,
    pub bad_event_threshold: f64,
}

impl Default for VerifyBlock {
    fn default() -> Self {
        VerifyBlock {
            flip_sides: vec![3, 3],
            disorder_sides: vec![3, 3],
            epsilon: 0.5,
            beta: 1.0,
            replicas: 1000,
            lambdas: (1..=20).map(|k| f64::from(k) / 10.0).collect(),
            counting_ns: vec![4, 6, 8],
            counting_ls: vec![1, 2, 3],
            c4_r: 2.0,
            c4_a: 1.0,
            c4_k: 1.0,
            family_n: 4,
            bad_event_c1: 1.0,
            bad_event_threshold: 1.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelBlock,
    pub volume: VolumeBlock,
    pub bc: BoundaryCondition,
    pub field: FieldSpec,
    pub mar: MarParams,
    pub run: RunBlock,
    pub contours: ContoursBlock,
    pub verify: VerifyBlock,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = match path {
            None => ExperimentConfig::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        self.spec()?;
        if self.volume.sides.len() != self.model.d {
            return bad(format!(
                "volume has {} sides but the model dimension is {}",
                self.volume.sides.len(),
                self.model.d
            ));
        }
        for (name, sides) in [
            ("verify.flip_sides", &self.verify.flip_sides),
            ("verify.disorder_sides", &self.verify.disorder_sides),
        ] {
            if sides.len() != self.model.d || sides.contains(&0) {
                return bad(format!(
                    "{name} must have {} positive entries",
                    self.model.d
                ));
            }
        }
        Volume::centered_box(&self.volume.sides).map_err(|e| CliError::Config(e.to_string()))?;
        self.field
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.mar
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.run.betas.is_empty() || self.run.epsilons.is_empty() {
            return bad("run.betas and run.epsilons must be non-empty".into());
        }
        if self.run.betas.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return bad("run.betas must be finite and >= 0".into());
        }
        if self
            .run
            .epsilons
            .iter()
            .any(|e| !(e.is_finite() && *e >= 0.0))
        {
            return bad("run.epsilons must be finite and >= 0".into());
        }
        if self.run.replicas == 0 {
            return bad("run.replicas must be at least 1".into());
        }
        self.schedule(0.0)
            .validate()
            .map_err(|e| CliError::Config(format!("run: {e}")))?;
        if self.contours.ns.is_empty() || self.contours.ls.is_empty() {
            return bad("contours.ns and contours.ls must be non-empty".into());
        }
        let v = &self.verify;
        if !(v.beta > 0.0 && v.beta.is_finite()) || !(v.epsilon >= 0.0 && v.epsilon.is_finite()) {
            return bad("verify.beta must be > 0 and verify.epsilon >= 0".into());
        }
        if v.replicas < 2
            || v.lambdas.is_empty()
            || v.counting_ns.is_empty()
            || v.counting_ls.is_empty()
        {
            return bad("verify needs replicas >= 2 and non-empty grids".into());
        }
        if v.bad_event_c1.is_nan() || v.bad_event_c1 <= 0.0 {
            return bad("verify.bad_event_c1 must be > 0".into());
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<CouplingSpec, CliError> {
        let m = &self.model;
        CouplingSpec::new(m.j, m.alpha, m.d, m.r_cut)
            .map(|s| s.with_norm(m.norm))
            .map_err(|e| CliError::Config(format!("model: {e}")))
    }

    pub fn volume(&self) -> Volume {
        Volume::centered_box(&self.volume.sides).expect("validated")
    }

    pub fn schedule(&self, beta: f64) -> Schedule {
        Schedule {
            beta,
            sweeps: self.run.sweeps,
            burn_in: self.run.burn_in,
            thinning: self.run.thinning,
            seed: self.run.seed,
            scan: self.run.scan,
        }
    }

    pub fn counting_params(&self) -> lrising::verify::CountingParams {
        lrising::verify::CountingParams {
            r: self.verify.c4_r,
            a: self.verify.c4_a,
            k: self.verify.c4_k,
            j: self.contours.j,
        }
    }
}
