use std::sync::Arc;

use lrising::contour::{census, enumerate_contours_origin, origin_box, Contour, OriginRule};
use lrising::exact::{bad_event_sup, gibbs_expectation_with, ExactLimit, Observable};
use lrising::rng::derive_seed;
use lrising::sampler::{beta_sweep, disorder_ensemble};
use lrising::verify::{
    box_model, dudley_entropy_estimate, exhaustive_instances, family_volume, text_table,
    verify_concentration, verify_counting, verify_flip_energy_bound, verify_peierls, BoundReport,
    Verdict,
};
use lrising::{FieldRealization, FieldSpec, Model, Site, Volume};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::output::Artifacts;
use crate::{Bound, CliError};

/// Largest Monte Carlo volume without the override.
pub const MC_CAP: usize = 4096;
/// Largest census contour length without the override.
pub const CENSUS_CAP: usize = 10;
pub const CENSUS_CAP_OVERRIDE: usize = 12;
/// Largest exhaustive flip-energy volume without the override.
pub const FLIP_CAP: usize = 16;

pub struct Context {
    pub cfg: ExperimentConfig,
    pub override_guard: bool,
}

impl Context {
    fn limit(&self) -> ExactLimit {
        if self.override_guard {
            ExactLimit::overridden()
        } else {
            ExactLimit::default()
        }
    }

    fn base_model(&self, sides: &[usize]) -> Result<Model, CliError> {
        Ok(box_model(sides, &self.cfg.spec()?, self.cfg.bc.clone())?)
    }

    fn census_guard(&self, ns: &[usize]) -> Result<(), CliError> {
        let cap = if self.override_guard {
            CENSUS_CAP_OVERRIDE
        } else {
            CENSUS_CAP
        };
        match ns.iter().find(|&&n| n > cap) {
            Some(n) => Err(CliError::ScaleGuard(format!(
                "census length {n} exceeds {cap}"
            ))),
            None => Ok(()),
        }
    }

    fn mc_guard(&self, n: usize) -> Result<(), CliError> {
        if n > MC_CAP && !self.override_guard {
            return Err(CliError::ScaleGuard(format!(
                "volume {n} exceeds the Monte Carlo limit {MC_CAP}"
            )));
        }
        Ok(())
    }

    fn grid(&self) -> Vec<(f64, f64)> {
        let r = &self.cfg.run;
        r.betas
            .iter()
            .flat_map(|&b| r.epsilons.iter().map(move |&e| (b, e)))
            .collect()
    }
}

#[derive(Serialize)]
struct EnumerateRow {
    beta: f64,
    epsilon: f64,
    field_seed: Option<u64>,
    sites: usize,
    log_z: f64,
    p_origin_minus: f64,
    mean_origin_spin: f64,
    mean_energy: f64,
    total_mass: f64,
}

pub fn enumerate(ctx: &Context) -> Result<Artifacts, CliError> {
    let base = ctx.base_model(&ctx.cfg.volume.sides)?;
    let limit = ctx.limit();
    limit.check(base.len())?;
    let origin = base
        .volume()
        .index_of(&Site::origin(base.volume().dim()))
        .expect("centred boxes contain the origin");
    let vol = base.volume_arc().clone();
    let rows: Vec<EnumerateRow> = ctx
        .grid()
        .into_iter()
        .enumerate()
        .map(|(k, (beta, eps))| -> Result<EnumerateRow, CliError> {
            let (field, field_seed) = if eps > 0.0 {
                let seed = derive_seed(ctx.cfg.run.seed, "enumerate-field", k as u64);
                (
                    FieldSpec::GaussianIid { epsilon: eps, seed }.realize(vol.clone())?,
                    Some(seed),
                )
            } else {
                (ctx.cfg.field.realize(vol.clone())?, None)
            };
            let m = base.with_field(field)?;
            let obs = [
                Observable::One,
                Observable::Minus(origin),
                Observable::Spin(origin),
                Observable::Energy,
            ];
            let g = gibbs_expectation_with(&m, beta, &obs, limit)?;
            Ok(EnumerateRow {
                beta,
                epsilon: eps,
                field_seed,
                sites: m.len(),
                log_z: g.partition.log_z,
                p_origin_minus: g.means[1],
                mean_origin_spin: g.means[2],
                mean_energy: g.means[3],
                total_mass: g.means[0],
            })
        })
        .collect::<Result<_, _>>()?;
    let mut out = Artifacts::default();
    out.csv("enumerate.csv", &rows)?;
    Ok(out)
}

#[derive(Serialize)]
struct CensusCsvRow {
    n: usize,
    j: Option<usize>,
    rule: OriginRule,
    count: usize,
    l: u32,
    cover: usize,
}

#[derive(Serialize)]
struct CensusFamily<'a> {
    n: usize,
    contours: &'a [Contour],
}

pub fn contours(ctx: &Context) -> Result<Artifacts, CliError> {
    let c = &ctx.cfg.contours;
    ctx.census_guard(&c.ns)?;
    let table = census(ctx.cfg.model.d, &c.ns, c.j, &c.ls, c.rule, &ctx.cfg.mar)?;
    let mut rows = Vec::new();
    for (row, _) in &table {
        for &(l, cover) in &row.covers {
            rows.push(CensusCsvRow {
                n: row.n,
                j: row.j,
                rule: row.rule,
                count: row.count,
                l,
                cover,
            });
        }
    }
    let families: Vec<CensusFamily> = table
        .iter()
        .map(|(row, fam)| CensusFamily {
            n: row.n,
            contours: fam,
        })
        .collect();
    let mut out = Artifacts::default();
    out.csv("contours.csv", &rows)?;
    out.json("contours.json", &families)?;
    Ok(out)
}

#[derive(Serialize)]
struct SampleRow {
    beta: f64,
    epsilon: f64,
    replica: u64,
    field_seed: u64,
    chain_seed: u64,
    p_origin_minus: f64,
    std_error: f64,
    effective_samples: u64,
}

#[derive(Serialize)]
struct SampleSummaryRow {
    beta: f64,
    epsilon: f64,
    replicas: u64,
    p_origin_minus: f64,
    std_error: f64,
    seed: u64,
}

pub fn sample(ctx: &Context) -> Result<Artifacts, CliError> {
    let base = ctx.base_model(&ctx.cfg.volume.sides)?;
    ctx.mc_guard(base.len())?;
    let results = ctx
        .grid()
        .into_par_iter()
        .enumerate()
        .map(|(k, (beta, eps))| {
            let mut s = ctx.cfg.schedule(beta);
            s.seed = derive_seed(ctx.cfg.run.seed, "sample", k as u64);
            disorder_ensemble(&base, &s, eps, ctx.cfg.run.replicas).map(|e| (beta, e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for (beta, e) in &results {
        for r in &e.replicas {
            rows.push(SampleRow {
                beta: *beta,
                epsilon: e.epsilon,
                replica: r.replica,
                field_seed: r.field_seed,
                chain_seed: r.chain_seed,
                p_origin_minus: r.record.estimate,
                std_error: r.record.std_error,
                effective_samples: r.record.effective_samples,
            });
        }
        summary.push(SampleSummaryRow {
            beta: *beta,
            epsilon: e.epsilon,
            replicas: e.replicas.len() as u64,
            p_origin_minus: e.aggregate.estimate,
            std_error: e.aggregate.std_error,
            seed: e.aggregate.seed,
        });
    }
    let mut out = Artifacts::default();
    out.csv("sample.csv", &rows)?;
    out.csv("sample_summary.csv", &summary)?;
    Ok(out)
}

pub fn sweep(ctx: &Context) -> Result<Artifacts, CliError> {
    let vol = Arc::new(ctx.cfg.volume());
    ctx.mc_guard(vol.len())?;
    let r = &ctx.cfg.run;
    let rows = beta_sweep(
        vol,
        &ctx.cfg.spec()?,
        &ctx.cfg.bc,
        &ctx.cfg.schedule(0.0),
        &r.betas,
        &r.epsilons,
        r.replicas,
    )?;
    let mut out = Artifacts::default();
    out.csv("sweep.csv", &rows)?;
    Ok(out)
}

#[derive(Serialize)]
struct ConcentrationCsvRow {
    pair: &'static str,
    lambda: f64,
    freq_single: f64,
    se_single: f64,
    bound_single: f64,
    freq_diff: f64,
    se_diff: f64,
    bound_diff: f64,
}

#[derive(Serialize)]
struct JournalRow {
    replica: u64,
    seed: u64,
    epsilon: f64,
    beta: f64,
    sup: f64,
    argmax: Option<usize>,
    region_hash: Option<u64>,
    indicator: bool,
}

fn origin_family(
    n: usize,
    rule: OriginRule,
    ctx: &Context,
    j: Option<usize>,
) -> Result<Vec<Contour>, CliError> {
    ctx.census_guard(&[n])?;
    let bx = origin_box(ctx.cfg.model.d, n, rule)?;
    let fam = enumerate_contours_origin(n, j, &bx, rule, &ctx.cfg.mar)?;
    if fam.is_empty() {
        return Err(CliError::Config(format!(
            "no origin contours of length {n}"
        )));
    }
    Ok(fam)
}

fn family_model(ctx: &Context, fam: &[Contour]) -> Result<Model, CliError> {
    let vol = Arc::new(family_volume(fam)?);
    ctx.limit().check(vol.len())?;
    Ok(Model::new(
        vol.clone(),
        ctx.cfg.spec()?,
        ctx.cfg.bc.clone(),
        FieldRealization::zero(vol),
    )?)
}

fn flip_energy(ctx: &Context, out: &mut Artifacts) -> Result<Vec<BoundReport>, CliError> {
    let m = ctx.base_model(&ctx.cfg.verify.flip_sides)?;
    let cap = if ctx.override_guard {
        ctx.limit().0
    } else {
        FLIP_CAP
    };
    if m.len() > cap {
        return Err(CliError::ScaleGuard(format!(
            "flip-energy volume {} exceeds {cap}",
            m.len()
        )));
    }
    let inst = exhaustive_instances(m.volume_arc().clone(), m.boundary_condition(), &ctx.cfg.mar)?;
    let r = verify_flip_energy_bound(&m, &inst)?;
    out.json("verify_flip_energy.json", &r)?;
    Ok(vec![r])
}

fn concentration(ctx: &Context, out: &mut Artifacts) -> Result<Vec<BoundReport>, CliError> {
    let v = &ctx.cfg.verify;
    let base = ctx.base_model(&v.disorder_sides)?;
    ctx.limit().check(base.len())?;
    let d = ctx.cfg.model.d;
    let o = Site::origin(d);
    let e = o.shifted(0, 1);
    let single = |s: &Site| Volume::region(d, [s.clone()]);
    let a = single(&o)?;
    let pairs = [
        (
            "overlapping",
            a.clone(),
            Volume::region(d, [o.clone(), e.clone()])?,
        ),
        ("disjoint", a.clone(), single(&e)?),
    ];
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for (k, (label, a, b)) in pairs.iter().enumerate() {
        if !b.is_subset(base.volume()) {
            return Err(CliError::Config(
                "verify.disorder_sides is too small for the concentration pairs".into(),
            ));
        }
        let seed = derive_seed(ctx.cfg.run.seed, "verify-concentration", k as u64);
        let r = verify_concentration(
            &base,
            a,
            b,
            &v.lambdas,
            v.replicas,
            v.beta,
            v.epsilon,
            seed,
            ctx.limit(),
        )?;
        for row in &r.rows {
            rows.push(ConcentrationCsvRow {
                pair: label,
                lambda: row.lambda,
                freq_single: row.freq_single,
                se_single: row.se_single,
                bound_single: row.bound_single,
                freq_diff: row.freq_diff,
                se_diff: row.se_diff,
                bound_diff: row.bound_diff,
            });
        }
        let mut rep = r.report.clone();
        rep.name = format!("concentration_{label}");
        reports.push(rep);
        if k == 0 {
            reports.push(r.derivative.clone());
        }
    }
    out.csv("verify_concentration.csv", &rows)?;
    out.json("verify_concentration.json", &reports)?;
    Ok(reports)
}

fn counting(ctx: &Context, out: &mut Artifacts) -> Result<Vec<BoundReport>, CliError> {
    let v = &ctx.cfg.verify;
    ctx.census_guard(&v.counting_ns)?;
    let r = verify_counting(
        ctx.cfg.model.d,
        &v.counting_ns,
        &v.counting_ls,
        &ctx.cfg.mar,
        &ctx.cfg.counting_params(),
    )?;
    out.csv("verify_counting.csv", &r.rows)?;
    let reports = vec![r.b4.clone(), r.c4.clone(), r.cube_boundary.clone()];
    out.json("verify_counting.json", &reports)?;
    Ok(reports)
}

fn dudley(ctx: &Context, out: &mut Artifacts) -> Result<Vec<BoundReport>, CliError> {
    let v = &ctx.cfg.verify;
    let fam = origin_family(v.family_n, OriginRule::Volume, ctx, ctx.cfg.contours.j)?;
    let base = family_model(ctx, &fam)?;
    let seed = derive_seed(ctx.cfg.run.seed, "verify-dudley", 0);
    let r = dudley_entropy_estimate(
        &base,
        &fam,
        v.beta,
        v.epsilon,
        v.replicas,
        seed,
        ctx.limit(),
    )?;
    #[derive(Serialize)]
    struct CoverRow {
        epsilon: f64,
        covering_number: usize,
    }
    let rows: Vec<CoverRow> = r
        .covering
        .iter()
        .map(|&(e, c)| CoverRow {
            epsilon: e,
            covering_number: c,
        })
        .collect();
    out.csv("verify_dudley.csv", &rows)?;
    out.json("verify_dudley.json", &r)?;
    Ok(vec![r.report])
}

fn bad_event(ctx: &Context, out: &mut Artifacts) -> Result<Vec<BoundReport>, CliError> {
    let v = &ctx.cfg.verify;
    let fam = origin_family(v.family_n, OriginRule::Interior, ctx, None)?;
    let base = family_model(ctx, &fam)?;
    let vol = base.volume_arc().clone();
    let journal: Vec<JournalRow> = (0..v.replicas as u64)
        .into_par_iter()
        .map(|r| -> Result<JournalRow, CliError> {
            let seed = derive_seed(ctx.cfg.run.seed, "verify-bad-event", r);
            let field = FieldSpec::GaussianIid {
                epsilon: v.epsilon,
                seed,
            }
            .realize(vol.clone())?;
            let m = base.with_field(field)?;
            let rep = bad_event_sup(
                &m,
                v.beta,
                &fam,
                v.bad_event_c1,
                v.bad_event_threshold,
                ctx.limit(),
            )?;
            Ok(JournalRow {
                replica: r,
                seed,
                epsilon: v.epsilon,
                beta: v.beta,
                sup: rep.sup,
                argmax: rep.argmax,
                region_hash: rep.argmax.map(|i| fam[i].i_minus().content_hash()),
                indicator: rep.indicator,
            })
        })
        .collect::<Result<_, _>>()?;
    let freq = journal.iter().filter(|j| j.indicator).count() as f64 / journal.len() as f64;
    // largest C with freq ≤ exp(−C/ε²)
    let c = if freq == 0.0 {
        lrising::verify::PEIERLS_CAP
    } else if v.epsilon == 0.0 {
        0.0
    } else {
        -v.epsilon * v.epsilon * freq.ln()
    };
    let mut r = BoundReport::from_margin("bad_event", journal.len() as u64, 0, c, true);
    r.witnesses.push(("frequency".into(), freq));
    r.witnesses.push(("c".into(), c));
    if freq == 0.0 {
        r.notes
            .push("no replica hit the bad event; c is the search cap".into());
    }
    r.notes.push(format!(
        "family of {} origin contours of length {}, c1={}, threshold={}",
        fam.len(),
        v.family_n,
        v.bad_event_c1,
        v.bad_event_threshold
    ));
    out.csv("bad_event_journal.csv", &journal)?;
    out.json("verify_bad_event.json", &r)?;
    Ok(vec![r])
}

fn peierls(ctx: &Context, out: &mut Artifacts) -> Result<Vec<BoundReport>, CliError> {
    let base = ctx.base_model(&ctx.cfg.volume.sides)?;
    if base.len() > ctx.limit().0 {
        ctx.mc_guard(base.len())?;
    }
    let r = &ctx.cfg.run;
    let rep = verify_peierls(
        &base,
        &r.betas,
        &r.epsilons,
        r.replicas,
        &ctx.cfg.schedule(0.0),
        ctx.limit(),
    )?;
    out.csv("verify_peierls.csv", &rep.rows)?;
    out.json("verify_peierls.json", &rep.report)?;
    Ok(vec![rep.report])
}

pub fn verify(ctx: &Context, bound: Bound) -> Result<Artifacts, CliError> {
    let mut out = Artifacts::default();
    let mut reports = Vec::new();
    let all = bound == Bound::All;
    if all || bound == Bound::FlipEnergy {
        reports.extend(flip_energy(ctx, &mut out)?);
    }
    if all || bound == Bound::Concentration {
        reports.extend(concentration(ctx, &mut out)?);
    }
    if all || bound == Bound::Counting {
        reports.extend(counting(ctx, &mut out)?);
    }
    if all || bound == Bound::Dudley {
        reports.extend(dudley(ctx, &mut out)?);
    }
    if all || bound == Bound::BadEvent {
        reports.extend(bad_event(ctx, &mut out)?);
    }
    if all || bound == Bound::Peierls {
        reports.extend(peierls(ctx, &mut out)?);
    }
    let refs: Vec<&BoundReport> = reports.iter().collect();
    let table = text_table(&refs);
    out.text("verify_table.txt", table.clone());
    out.summary = table;
    out.violated = reports
        .iter()
        .filter(|r| r.verdict == Verdict::Violated)
        .map(|r| r.name.clone())
        .collect();
    Ok(out)
}
