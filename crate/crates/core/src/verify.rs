//! Finite-scale checks of the contour and disorder bounds.
//!
//! Existence constants are never fixed in advance. Each check reports the
//! extremal constant for which the inequality holds on the tested instances,
//! and the verdict follows from a margin by a fixed rule.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::contour::{
    census, extract_contours, straddling_pairs, surface_sum, Contour, ContourSet, MarParams,
    OriginRule,
};
use crate::error::{Error, Result};
use crate::exact::{
    delta_a_with, gibbs_expectation_with, log_partition_with, probability_minus, ExactLimit,
    Observable,
};
use crate::lattice::{Site, Volume};
use crate::model::{
    BoundaryCondition, CouplingSpec, FieldRealization, FieldSpec, FlipOnRegion, Model, SpinConfig,
};
use crate::rng::derive_seed;
use crate::sampler::{disorder_ensemble, Schedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated,
    Vacuous,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub name: String,
    /// Instances examined, vacuous ones included.
    pub instances: u64,
    /// Instances excluded as vacuous.
    pub excluded: u64,
    pub worst_margin: f64,
    pub witnesses: Vec<(String, f64)>,
    pub verdict: Verdict,
    /// The instance attaining the worst margin when the bound fails.
    pub witness_instance: Option<Value>,
    pub notes: Vec<String>,
}

impl BoundReport {
    /// Vacuous without non-excluded instances; otherwise holds iff
    /// `margin > 0` (`strict`) or `margin ≥ 0`.
    pub fn from_margin(
        name: &str,
        instances: u64,
        excluded: u64,
        margin: f64,
        strict: bool,
    ) -> Self {
        let verdict = if instances <= excluded {
            Verdict::Vacuous
        } else if (strict && margin > 0.0) || (!strict && margin >= 0.0) {
            Verdict::Holds
        } else {
            Verdict::Violated
        };
        BoundReport {
            name: name.into(),
            instances,
            excluded,
            worst_margin: margin,
            witnesses: Vec::new(),
            verdict,
            witness_instance: None,
            notes: Vec::new(),
        }
    }

    fn witness(mut self, name: &str, value: f64) -> Self {
        self.witnesses.push((name.into(), value));
        self
    }

    fn note(mut self, s: impl Into<String>) -> Self {
        self.notes.push(s.into());
        self
    }

    fn instance_if_violated(mut self, v: Value) -> Self {
        if self.verdict == Verdict::Violated {
            self.witness_instance = Some(v);
        }
        self
    }

    pub fn witness_value(&self, name: &str) -> Option<f64> {
        self.witnesses
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One aligned row for a text table.
    pub fn table_row(&self) -> String {
        let w: Vec<String> = self
            .witnesses
            .iter()
            .map(|(n, v)| format!("{n}={v:.6e}"))
            .collect();
        format!(
            "{:<28} {:>9} {:>8} {:>14.6e} {:<9} {}",
            self.name,
            self.instances,
            self.excluded,
            self.worst_margin,
            format!("{:?}", self.verdict).to_lowercase(),
            w.join(" ")
        )
    }
}

/// Text table of several reports.
pub fn text_table(reports: &[&BoundReport]) -> String {
    let mut s = format!(
        "{:<28} {:>9} {:>8} {:>14} {:<9} {}\n",
        "bound", "instances", "excluded", "worst_margin", "verdict", "witnesses"
    );
    for r in reports {
        let _ = writeln!(s, "{}", r.table_row());
    }
    s
}

fn dimension_note(d: usize) -> String {
    if d >= 3 {
        format!("checked at d={d}, finite volume")
    } else {
        format!("checked at d={d}; the bounds are proved for d>=3, so this is a finite-scale probe only")
    }
}

fn config_json(sigma: &SpinConfig) -> Value {
    json!(sigma.values())
}

/// Every configuration of `vol` with its contour set.
pub fn exhaustive_instances(
    vol: Arc<Volume>,
    bc: &BoundaryCondition,
    params: &MarParams,
) -> Result<Vec<(SpinConfig, ContourSet)>> {
    ExactLimit::default().check(vol.len())?;
    (0..(1u64 << vol.len()))
        .into_par_iter()
        .map(|bits| {
            let s = SpinConfig::from_bits(vol.clone(), bits);
            let g = extract_contours(&s, bc, params)?;
            Ok((s, g))
        })
        .collect()
}

/// `c* = −ΔH / Σ_γ (|γ| + F_{I_flip(γ)} + F_sp(γ))` over the external
/// contours, where `I_flip` is the interior whose spins are negated
/// (`I_−` for plus-labelled contours). Holds iff `min c* > 0`.
pub fn verify_flip_energy_bound(
    model: &Model,
    instances: &[(SpinConfig, ContourSet)],
) -> Result<BoundReport> {
    if instances.is_empty() {
        return Err(Error::Degenerate(
            "flip-energy check needs instances".into(),
        ));
    }
    let spec = model
        .spec()
        .ok_or_else(|| Error::InvalidParameter("flip-energy check needs a coupling spec".into()))?;
    let per: Vec<Option<(f64, f64)>> = instances
        .par_iter()
        .map(|(sigma, set)| -> Result<Option<(f64, f64)>> {
            if set.external().next().is_none() {
                return Ok(None);
            }
            let dh = crate::contour::flip_energy_tau_gamma(model, sigma, set)?.full;
            let mut denom = 0.0;
            for g in set.external() {
                let flipped = g.i_signed(g.label().flipped());
                denom += g.len() as f64
                    + surface_sum(flipped, spec)?.value
                    + surface_sum(g.sp_sites(), spec)?.value;
            }
            Ok(Some((-dh / denom, dh)))
        })
        .collect::<Result<_>>()?;
    let excluded = per.iter().filter(|p| p.is_none()).count() as u64;
    let (worst_i, c_star) = per
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.map(|(c, _)| (i, c)))
        .fold((None, f64::INFINITY), |(bi, bc), (i, c)| {
            if c < bc {
                (Some(i), c)
            } else {
                (bi, bc)
            }
        });
    let margin = if worst_i.is_some() { c_star } else { 0.0 };
    let mut r = BoundReport::from_margin(
        "flip_energy",
        instances.len() as u64,
        excluded,
        margin,
        true,
    )
    .note(dimension_note(spec.dim))
    .note(format!("alpha={}, r_cut={}", spec.alpha, spec.r_cut));
    if let Some(i) = worst_i {
        r = r
            .witness("c_star", c_star)
            .witness("delta_h_at_worst", per[i].unwrap().1);
        let (sigma, set) = &instances[i];
        r = r.instance_if_violated(json!({"sigma": config_json(sigma), "contours": set}));
    }
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub lambda: f64,
    pub freq_single: f64,
    pub se_single: f64,
    pub bound_single: f64,
    pub freq_diff: f64,
    pub se_diff: f64,
    pub bound_diff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub report: BoundReport,
    pub overlapping: bool,
    pub rows: Vec<ConcentrationRow>,
    pub derivative: BoundReport,
}

/// `2 exp(−λ² / (8 ε² k))`, or 0 probability mass allowed when `k = 0` and
/// `λ > 0`.
pub fn concentration_bound(lambda: f64, epsilon: f64, k: usize) -> f64 {
    if k == 0 || epsilon == 0.0 {
        return if lambda > 0.0 { 0.0 } else { 2.0 };
    }
    2.0 * (-lambda * lambda / (8.0 * epsilon * epsilon * k as f64)).exp()
}

fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Empirical tails of `|Δ_A|` and `|Δ_A − Δ_{A′}|` over Gaussian replicas of
/// `h_{A∪A′}` with `h` fixed elsewhere, against the concentration bounds.
/// Also runs the finite-difference derivative check on a few replicas.
#[allow(clippy::too_many_arguments)]
pub fn verify_concentration(
    base: &Model,
    a: &Volume,
    a_prime: &Volume,
    lambdas: &[f64],
    replicas: usize,
    beta: f64,
    epsilon: f64,
    seed: u64,
    limit: ExactLimit,
) -> Result<ConcentrationReport> {
    if beta <= 0.0 {
        return Err(Error::InvalidParameter(
            "concentration check needs beta > 0".into(),
        ));
    }
    if replicas == 0 || lambdas.is_empty() {
        return Err(Error::InvalidParameter(
            "need replicas and a lambda grid".into(),
        ));
    }
    let vol = base.volume_arc().clone();
    let outer = FieldSpec::GaussianIid {
        epsilon,
        seed: derive_seed(seed, "concentration-outer", 0),
    }
    .realize(vol.clone())?;
    let union = a.union(a_prime);
    let sym = a.symmetric_difference(a_prime);
    let overlapping = !a.intersection(a_prime).is_empty();
    let stats: Vec<(f64, f64)> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| -> Result<(f64, f64)> {
            let field = outer.resampled_on(&union, derive_seed(seed, "concentration", r))?;
            let m = base.with_field(field)?;
            let z = log_partition_with(&m, beta, limit)?.log_z;
            let za =
                log_partition_with(&m.with_field(m.field().apply_tau_a(a)?)?, beta, limit)?.log_z;
            let zb =
                log_partition_with(&m.with_field(m.field().apply_tau_a(a_prime)?)?, beta, limit)?
                    .log_z;
            let da = -(z - za) / beta;
            let db = -(z - zb) / beta;
            Ok((da, da - db))
        })
        .collect::<Result<_>>()?;
    let n = stats.len();
    let mut rows = Vec::with_capacity(lambdas.len());
    let mut margin = f64::INFINITY;
    let mut worst = None;
    for &lambda in lambdas {
        let fs = stats.iter().filter(|(d, _)| d.abs() >= lambda).count() as f64 / n as f64;
        let fd = stats.iter().filter(|(_, d)| d.abs() > lambda).count() as f64 / n as f64;
        let row = ConcentrationRow {
            lambda,
            freq_single: fs,
            se_single: binomial_se(fs, n),
            bound_single: concentration_bound(lambda, epsilon, a.len()),
            freq_diff: fd,
            se_diff: binomial_se(fd, n),
            bound_diff: concentration_bound(lambda, epsilon, sym.len()),
        };
        for m in [
            row.bound_single + 3.0 * row.se_single - row.freq_single,
            row.bound_diff + 3.0 * row.se_diff - row.freq_diff,
        ] {
            if m < margin {
                margin = m;
                worst = Some(lambda);
            }
        }
        rows.push(row);
    }
    let max_ratio = rows
        .iter()
        .filter(|r| r.bound_single > 0.0)
        .map(|r| r.freq_single / r.bound_single)
        .fold(0.0, f64::max);
    let report = BoundReport::from_margin(
        "concentration",
        (n * lambdas.len()) as u64,
        0,
        margin,
        false,
    )
    .witness("max_freq_over_bound", max_ratio)
    .note(dimension_note(vol.dim()))
    .note(format!(
        "|A|={}, |A'|={}, |A sym A'|={}, A and A' {}",
        a.len(),
        a_prime.len(),
        sym.len(),
        if overlapping {
            "overlap"
        } else {
            "are disjoint"
        }
    ))
    .note("bound constant read as 8*epsilon^2*|A|")
    .instance_if_violated(json!({ "lambda": worst }));
    let derivative = verify_delta_derivative(base, &outer, a, beta, 3.min(replicas), seed, limit)?;
    Ok(ConcentrationReport {
        report,
        overlapping,
        rows,
        derivative,
    })
}

/// Finite-difference step for derivative checks.
pub const FD_STEP: f64 = 1e-4;
/// Absolute tolerance of derivative checks.
pub const FD_TOL: f64 = 1e-3;

/// `∂Δ_A/∂h_v` by central differences in the raw field value `h_v`.
pub fn delta_derivative_fd(
    model: &Model,
    a: &Volume,
    beta: f64,
    v: usize,
    limit: ExactLimit,
) -> Result<f64> {
    let f = model.field();
    let shifted = |dh: f64| -> Result<f64> {
        let mut vals = f.values().to_vec();
        vals[v] += dh;
        let field = FieldRealization::from_raw(
            f.kind(),
            f.strength(),
            f.seed(),
            f.volume_arc().clone(),
            vals,
        )?;
        Ok(delta_a_with(&model.with_field(field)?, beta, a, limit)?.delta)
    };
    Ok((shifted(FD_STEP)? - shifted(-FD_STEP)?) / (2.0 * FD_STEP))
}

/// `−ε(⟨σ_v⟩_h ± ⟨σ_v⟩_{τ_A h})`, plus for `v ∈ A`.
pub fn delta_derivative_exact(
    model: &Model,
    a: &Volume,
    beta: f64,
    v: usize,
    limit: ExactLimit,
) -> Result<f64> {
    let eps = model.field().strength();
    let tau = model.with_field(model.field().apply_tau_a(a)?)?;
    let s = gibbs_expectation_with(model, beta, &[Observable::Spin(v)], limit)?.means[0];
    let st = gibbs_expectation_with(&tau, beta, &[Observable::Spin(v)], limit)?.means[0];
    let inside = a.contains(model.volume().site(v));
    Ok(if inside {
        -eps * (s + st)
    } else {
        -eps * (s - st)
    })
}

/// `|∂Δ_A/∂h_v| ≤ 2ε` at every site, on `draws` field draws.
pub fn verify_delta_derivative(
    base: &Model,
    outer: &FieldRealization,
    a: &Volume,
    beta: f64,
    draws: usize,
    seed: u64,
    limit: ExactLimit,
) -> Result<BoundReport> {
    let eps = outer.strength();
    let n = base.len();
    let vals: Vec<(u64, usize, f64)> = (0..draws as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<(u64, usize, f64)>> {
            let field = outer.resampled_on(a, derive_seed(seed, "derivative", r))?;
            let m = base.with_field(field)?;
            (0..n)
                .map(|v| Ok((r, v, delta_derivative_fd(&m, a, beta, v, limit)?.abs())))
                .collect()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let (worst, margin) = vals
        .iter()
        .map(|&(r, v, d)| ((r, v), 2.0 * eps + FD_TOL - d))
        .fold(
            ((0, 0), f64::INFINITY),
            |acc, x| if x.1 < acc.1 { x } else { acc },
        );
    let max_d = vals.iter().map(|x| x.2).fold(0.0, f64::max);
    Ok(
        BoundReport::from_margin("delta_derivative", vals.len() as u64, 0, margin, false)
            .witness("max_abs_derivative", max_d)
            .witness("two_epsilon", 2.0 * eps)
            .note(format!(
                "central differences, step {FD_STEP}, tolerance {FD_TOL}"
            ))
            .instance_if_violated(json!({"draw": worst.0, "site": worst.1})),
    )
}

/// Minimal `w ≥ 0` with `log_count ≤ w · coef` at every point; points with
/// `coef = 0` need `log_count ≤ 0`. Returns `(w, margin)` where a negative
/// margin means no finite witness exists.
fn fit_exponential(points: &[(f64, f64)]) -> (f64, f64) {
    let mut w: f64 = 0.0;
    let mut margin: f64 = 0.0;
    for &(coef, lc) in points {
        if coef > 0.0 {
            w = w.max(lc / coef);
        } else {
            margin = margin.min(-lc);
        }
    }
    (w, margin)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountingRow {
    pub family: String,
    pub n: usize,
    pub members: usize,
    pub l: u32,
    pub cover: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CountingParams {
    pub r: f64,
    pub a: f64,
    pub k: f64,
    /// Component bound `j` for the volume-rule family.
    pub j: Option<usize>,
}

impl Default for CountingParams {
    fn default() -> Self {
        CountingParams {
            r: 2.0,
            a: 1.0,
            k: 1.0,
            j: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountingReport {
    pub rows: Vec<CountingRow>,
    /// `|B_l(Γ_0(n))| ≤ exp(b₄ l n / 2^{l(d−1)})`.
    pub b4: BoundReport,
    /// The volume-rule family against the `c₄` form.
    pub c4: BoundReport,
    /// `2^{l(d−1)} ≤ b |∂_ex I ∩ (C ∪ C′)|` on straddling cube pairs.
    pub cube_boundary: BoundReport,
    /// Cover counts non-increasing in `l` for every `(family, n)`.
    pub monotone_covers: bool,
}

/// Exponent factor of the `c₄` form without `c₄`.
pub fn c4_coefficient(n: usize, l: u32, d: usize, p: &CountingParams) -> f64 {
    let lf = f64::from(l);
    let la = p.a.log2();
    let denom = p.r - d as f64 - 1.0 - la;
    let frac = if la == 0.0 { 0.0 } else { 2.0 * la / denom };
    let e1 = p.r * lf * (d as f64 - 1.0 - frac);
    let e2 = 2f64.powf(p.r * lf);
    lf.powf(p.k) * (n as f64 / 2f64.powf(e1) + n as f64 / 2f64.powf(e2) + 1.0)
}

/// Census-based counting checks on the grids `ns × ls`.
pub fn verify_counting(
    dim: usize,
    ns: &[usize],
    ls: &[u32],
    mar: &MarParams,
    p: &CountingParams,
) -> Result<CountingReport> {
    if ns.is_empty() || ls.is_empty() {
        return Err(Error::InvalidParameter(
            "counting grids must be non-empty".into(),
        ));
    }
    let interior = census(dim, ns, None, ls, OriginRule::Interior, mar)?;
    let volume = census(dim, ns, p.j, ls, OriginRule::Volume, mar)?;
    let mut rows = Vec::new();
    let mut b4_points = Vec::new();
    let mut c4_points = Vec::new();
    let mut monotone = true;
    for (label, fam) in [("interior", &interior), ("volume", &volume)] {
        for (row, _) in fam.iter() {
            let mut last = usize::MAX;
            for &(l, cover) in &row.covers {
                monotone &= cover <= last;
                last = cover;
                rows.push(CountingRow {
                    family: label.into(),
                    n: row.n,
                    members: row.count,
                    l,
                    cover,
                });
                if cover == 0 {
                    continue;
                }
                let lc = (cover as f64).ln();
                if label == "interior" {
                    let coef =
                        f64::from(l) * row.n as f64 / 2f64.powf(f64::from(l) * (dim as f64 - 1.0));
                    b4_points.push((coef, lc));
                } else {
                    c4_points.push((c4_coefficient(row.n, l, dim, p), lc));
                }
            }
        }
    }
    let (b4, b4_margin) = fit_exponential(&b4_points);
    let (c4, c4_margin) = fit_exponential(&c4_points);
    let b4_report = BoundReport::from_margin("counting_b4", b4_points.len() as u64, 0, b4_margin, false)
        .witness("b4", b4)
        .note(dimension_note(dim))
        .note("a negative margin means some l=0 point has more than one cube, so no finite constant exists");
    let c4_report =
        BoundReport::from_margin("counting_c4", c4_points.len() as u64, 0, c4_margin, false)
            .witness("c4", c4)
            .witness("r", p.r)
            .witness("a", p.a)
            .witness("k", p.k)
            .note(dimension_note(dim));
    // straddling pairs over every interior of both families, at every scale
    // up to the largest requested one (small interiors only half-fill l=0
    // cubes)
    let cube_ls: Vec<u32> = (0..=*ls.iter().max().expect("non-empty")).collect();
    let mut pair_points = 0u64;
    let mut b_min: f64 = 0.0;
    let mut min_hits = usize::MAX;
    let mut worst = None;
    for fam in [&interior, &volume] {
        for (_, members) in fam.iter() {
            for g in members {
                let region = g.interior();
                for &l in &cube_ls {
                    for inst in straddling_pairs(&region, l) {
                        pair_points += 1;
                        let need = 2f64.powf(f64::from(l) * (dim as f64 - 1.0));
                        if inst.boundary_hits < min_hits {
                            min_hits = inst.boundary_hits;
                            worst = Some(json!({"l": l, "pair": inst, "faces": g.faces()}));
                        }
                        if inst.boundary_hits > 0 {
                            b_min = b_min.max(need / inst.boundary_hits as f64);
                        }
                    }
                }
            }
        }
    }
    let cube_margin = if pair_points == 0 {
        0.0
    } else {
        min_hits as f64
    };
    let mut cube_report =
        BoundReport::from_margin("cube_boundary", pair_points, 0, cube_margin, true)
            .witness("b", b_min)
            .note("margin is the fewest exterior-boundary sites met by a straddling pair");
    if let Some(w) = worst {
        cube_report = cube_report.instance_if_violated(w);
    }
    Ok(CountingReport {
        rows,
        b4: b4_report,
        c4: c4_report,
        cube_boundary: cube_report,
        monotone_covers: monotone,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DudleyReport {
    pub report: BoundReport,
    /// `(ε, N(T, d₂, ε))` at each distinct distance level.
    pub covering: Vec<(f64, usize)>,
    pub diameter: f64,
    /// `∫_0^∞ sqrt(log N(ε)) dε`, exact for the step function.
    pub entropy_integral: f64,
    /// `Σ_{n≥0} 2^{n/2} e_n` with `e_n = inf{ε : N(ε) ≤ 2^{2^n}}`.
    pub dyadic_sum: f64,
    pub mean_sup: f64,
    pub se_sup: f64,
}

/// Minimal number of closed `eps`-balls centred in the family covering it.
/// Exact for up to 16 points, greedy beyond.
pub fn covering_number(dist: &[Vec<f64>], eps: f64) -> usize {
    let n = dist.len();
    if n == 0 {
        return 0;
    }
    let balls: Vec<u32> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| dist[i][j] <= eps)
                .fold(0u32, |m, j| m | 1 << j)
        })
        .collect();
    if n <= 16 {
        let full = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
        for k in 1..=n {
            if choose_cover(&balls, full, 0, k, 0) {
                return k;
            }
        }
        n
    } else {
        let mut covered = vec![false; n];
        let mut count = 0;
        for i in 0..n {
            if !covered[i] {
                count += 1;
                for j in 0..n {
                    if dist[i][j] <= eps {
                        covered[j] = true;
                    }
                }
            }
        }
        count
    }
}

fn choose_cover(balls: &[u32], full: u32, acc: u32, k: usize, start: usize) -> bool {
    if acc == full {
        return true;
    }
    if k == 0 {
        return false;
    }
    (start..balls.len()).any(|i| choose_cover(balls, full, acc | balls[i], k - 1, i + 1))
}

/// Dudley entropy comparison for `X_γ = Δ_{I_−(γ)}(h)` with `d₂` the replica
/// standard deviation of `X_s − X_t`. Reports the smallest `L` with
/// `E sup X − 3 se ≤ L · Σ 2^{n/2} e_n`.
pub fn dudley_entropy_estimate(
    base: &Model,
    family: &[Contour],
    beta: f64,
    epsilon: f64,
    replicas: usize,
    seed: u64,
    limit: ExactLimit,
) -> Result<DudleyReport> {
    if family.is_empty() || replicas < 2 {
        return Err(Error::InvalidParameter(
            "need a non-empty family and at least 2 replicas".into(),
        ));
    }
    let vol = base.volume_arc().clone();
    let samples: Vec<Vec<f64>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let field = FieldSpec::GaussianIid {
                epsilon,
                seed: derive_seed(seed, "dudley", r),
            }
            .realize(vol.clone())?;
            let m = base.with_field(field)?;
            family
                .iter()
                .map(|g| Ok(delta_a_with(&m, beta, g.i_minus(), limit)?.delta))
                .collect()
        })
        .collect::<Result<_>>()?;
    let t = family.len();
    let rn = replicas as f64;
    let mut dist = vec![vec![0.0; t]; t];
    for i in 0..t {
        for j in (i + 1)..t {
            let diffs: Vec<f64> = samples.iter().map(|s| s[i] - s[j]).collect();
            let mean = diffs.iter().sum::<f64>() / rn;
            let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (rn - 1.0);
            dist[i][j] = var.sqrt();
            dist[j][i] = dist[i][j];
        }
    }
    let diameter = dist.iter().flatten().cloned().fold(0.0, f64::max);
    if t > 1 && diameter == 0.0 {
        return Err(Error::Degenerate("all contour distances are zero".into()));
    }
    let mut levels: Vec<f64> = dist
        .iter()
        .flatten()
        .cloned()
        .filter(|&x| x > 0.0)
        .collect();
    levels.push(0.0);
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let covering: Vec<(f64, usize)> = levels
        .iter()
        .map(|&e| (e, covering_number(&dist, e)))
        .collect();
    // N is constant on [levels[i], levels[i+1])
    let mut integral = 0.0;
    for w in covering.windows(2) {
        integral += (w[1].0 - w[0].0) * (w[0].1 as f64).ln().sqrt();
    }
    let e_n = |cap: f64| {
        covering
            .iter()
            .find(|(_, c)| (*c as f64) <= cap)
            .map(|x| x.0)
            .unwrap_or(diameter)
    };
    let mut dyadic = 0.0;
    for n in 0..7 {
        let cap = 2f64.powf(2f64.powi(n));
        dyadic += 2f64.powf(f64::from(n) / 2.0) * e_n(cap);
    }
    let sups: Vec<f64> = samples
        .iter()
        .map(|s| s.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mean_sup = sups.iter().sum::<f64>() / rn;
    let se_sup =
        (sups.iter().map(|x| (x - mean_sup).powi(2)).sum::<f64>() / (rn - 1.0) / rn).sqrt();
    let lower = mean_sup - 3.0 * se_sup;
    let (l_min, margin) = if dyadic > 0.0 {
        ((lower / dyadic).max(0.0), 0.0)
    } else {
        (0.0, -lower.max(0.0))
    };
    let report = BoundReport::from_margin("dudley_entropy", replicas as u64, 0, margin, false)
        .witness("L", l_min)
        .witness("mean_sup", mean_sup)
        .witness("dyadic_sum", dyadic)
        .note(dimension_note(vol.dim()))
        .note("metric: replica standard deviation of Delta differences");
    Ok(DudleyReport {
        report,
        covering,
        diameter,
        entropy_integral: integral,
        dyadic_sum: dyadic,
        mean_sup,
        se_sup,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeierlsRow {
    pub beta: f64,
    pub epsilon: f64,
    pub p_origin_minus: f64,
    pub std_error: f64,
    pub method: Method,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeierlsReport {
    pub report: BoundReport,
    pub rows: Vec<PeierlsRow>,
}

/// `exp(−Cβ) + exp(−C/ε²)`, the second term dropped at `ε = 0`.
pub fn peierls_rhs(c: f64, beta: f64, epsilon: f64) -> f64 {
    let second = if epsilon > 0.0 {
        (-c / (epsilon * epsilon)).exp()
    } else {
        0.0
    };
    (-c * beta).exp() + second
}

/// Largest `C ≤ cap` with `p ≤ exp(−Cβ) + exp(−C/ε²)` at every point.
pub fn largest_peierls_constant(points: &[(f64, f64, f64)], cap: f64) -> f64 {
    let ok = |c: f64| points.iter().all(|&(b, e, p)| p <= peierls_rhs(c, b, e));
    if !ok(0.0) {
        return 0.0;
    }
    if ok(cap) {
        return cap;
    }
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub const PEIERLS_CAP: f64 = 1e6;

/// `P⁺[σ_0 = −1]` on the grid, exact where the volume allows it (averaged
/// over `replicas` field draws when `ε > 0`) and by Monte Carlo otherwise.
/// Holds iff the largest admissible `C′` is positive.
#[allow(clippy::too_many_arguments)]
pub fn verify_peierls(
    base: &Model,
    betas: &[f64],
    epsilons: &[f64],
    replicas: u64,
    schedule: &Schedule,
    limit: ExactLimit,
) -> Result<PeierlsReport> {
    if betas.is_empty() || epsilons.is_empty() {
        return Err(Error::InvalidParameter(
            "peierls grids must be non-empty".into(),
        ));
    }
    let origin = Site::origin(base.volume().dim());
    if !base.volume().contains(&origin) {
        return Err(Error::SiteOutsideVolume(format!(
            "origin {origin} is not in the volume"
        )));
    }
    let exact = base.len() <= limit.0;
    let vol = base.volume_arc().clone();
    let mut grid = Vec::new();
    for &b in betas {
        for &e in epsilons {
            grid.push((b, e));
        }
    }
    let rows: Vec<PeierlsRow> = grid
        .par_iter()
        .enumerate()
        .map(|(k, &(beta, eps))| -> Result<PeierlsRow> {
            let seed = derive_seed(schedule.seed, "peierls", k as u64);
            if exact {
                let draws = if eps > 0.0 { replicas.max(1) } else { 1 };
                let vals: Vec<f64> = (0..draws)
                    .map(|r| {
                        let m = if eps > 0.0 {
                            base.with_field(
                                FieldSpec::GaussianIid {
                                    epsilon: eps,
                                    seed: derive_seed(seed, "field", r),
                                }
                                .realize(vol.clone())?,
                            )?
                        } else {
                            base.with_field(FieldRealization::zero(vol.clone()))?
                        };
                        probability_minus(&m, beta, &origin, limit)
                    })
                    .collect::<Result<_>>()?;
                let agg = crate::sampler::ObservableRecord::aggregate("p", &vals, 0.0, seed);
                Ok(PeierlsRow {
                    beta,
                    epsilon: eps,
                    p_origin_minus: agg.estimate,
                    std_error: agg.std_error,
                    method: Method::Exact,
                })
            } else {
                let sched = Schedule {
                    beta,
                    seed,
                    ..*schedule
                };
                let ens = disorder_ensemble(base, &sched, eps, replicas.max(1))?;
                Ok(PeierlsRow {
                    beta,
                    epsilon: eps,
                    p_origin_minus: ens.aggregate.estimate,
                    std_error: ens.aggregate.std_error,
                    method: Method::MonteCarlo,
                })
            }
        })
        .collect::<Result<_>>()?;
    let points: Vec<(f64, f64, f64)> = rows
        .iter()
        .map(|r| (r.beta, r.epsilon, r.p_origin_minus))
        .collect();
    let c = largest_peierls_constant(&points, PEIERLS_CAP);
    let mut report = BoundReport::from_margin("peierls", rows.len() as u64, 0, c, true)
        .witness("c_prime", c)
        .note(dimension_note(base.volume().dim()));
    if c >= PEIERLS_CAP {
        report = report.note("C' reached the search cap");
    }
    let worst = points
        .iter()
        .map(|&(b, e, p)| (p - peierls_rhs(c.max(1e-12), b, e), b, e))
        .fold(
            (f64::NEG_INFINITY, 0.0, 0.0),
            |a, x| if x.0 > a.0 { x } else { a },
        );
    report = report.instance_if_violated(json!({"beta": worst.1, "epsilon": worst.2}));
    Ok(PeierlsReport { report, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapRecord {
    pub beta: f64,
    pub epsilon: f64,
    pub p_plus: f64,
    pub se_plus: f64,
    pub p_minus: f64,
    pub se_minus: f64,
    pub gap: f64,
    pub joint_se: f64,
}

impl GapRecord {
    /// Gap in units of the joint standard error.
    pub fn z_score(&self) -> f64 {
        if self.joint_se > 0.0 {
            self.gap / self.joint_se
        } else if self.gap > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

/// `P̂⁻[σ_0 = −1] − P̂⁺[σ_0 = −1]` by Monte Carlo. `plus` carries the plus
/// boundary condition; the minus model is derived from it.
pub fn boundary_gap(
    plus: &Model,
    schedule: &Schedule,
    epsilon: f64,
    replicas: u64,
) -> Result<GapRecord> {
    let minus = plus.with_boundary(plus.boundary_condition().negated())?;
    let sp = Schedule {
        seed: derive_seed(schedule.seed, "gap", 0),
        ..*schedule
    };
    let sm = Schedule {
        seed: derive_seed(schedule.seed, "gap", 1),
        ..*schedule
    };
    let p = disorder_ensemble(plus, &sp, epsilon, replicas)?.aggregate;
    let m = disorder_ensemble(&minus, &sm, epsilon, replicas)?.aggregate;
    Ok(GapRecord {
        beta: schedule.beta,
        epsilon,
        p_plus: p.estimate,
        se_plus: p.std_error,
        p_minus: m.estimate,
        se_minus: m.std_error,
        gap: m.estimate - p.estimate,
        joint_se: (p.std_error.powi(2) + m.std_error.powi(2)).sqrt(),
    })
}

/// Model on `sides` (centred box) with zero field.
pub fn box_model(sides: &[usize], spec: &CouplingSpec, bc: BoundaryCondition) -> Result<Model> {
    let vol = Arc::new(Volume::centered_box(sides)?);
    Model::new(vol.clone(), *spec, bc, FieldRealization::zero(vol))
}

/// Smallest centred box containing every `I_−(γ)` of a family.
pub fn family_volume(family: &[Contour]) -> Result<Volume> {
    let d = family
        .first()
        .map(Contour::dim)
        .ok_or_else(|| Error::Degenerate("empty family".into()))?;
    let mut h = vec![0i64; d];
    for g in family {
        for s in g.i_minus().iter().chain(std::iter::once(&Site::origin(d))) {
            for (k, c) in s.coords().iter().enumerate() {
                h[k] = h[k].max(c.abs());
            }
        }
    }
    let sides: Vec<usize> = h.iter().map(|&x| (2 * x + 1) as usize).collect();
    Volume::boxed(&sides, &Site(h.iter().map(|&x| -x).collect()))
}
