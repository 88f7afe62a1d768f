//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Built with `harness = false` so the lines always reach stdout.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use lrising::contour::{census, extract_contours, MarParams, OriginRule};
use lrising::exact::{identity_check_contour, probability_minus, ExactLimit};
use lrising::rng::derive_seed;
use lrising::sampler::{estimate_origin_minus, Schedule};
use lrising::verify::{
    boundary_gap, box_model, exhaustive_instances, verify_concentration, verify_counting,
    verify_flip_energy_bound, verify_peierls, CountingParams, Verdict,
};
use lrising::{BoundaryCondition, CouplingSpec, FieldSpec, Site, SpinConfig, Volume};
use rayon::prelude::*;

const SEED: u64 = 20_240_611;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn spec2() -> CouplingSpec {
    CouplingSpec::new(1.0, 3.0, 2, 4.0).unwrap()
}

fn plus() -> BoundaryCondition {
    BoundaryCondition::default()
}

/// Fraction of seeded chains whose estimate lands within 3 reported
/// standard errors of the exact value.
fn coverage(
    sides: &[usize],
    spec: &CouplingSpec,
    beta: f64,
    trials: u64,
    tag: u64,
) -> (f64, f64, usize) {
    let model = box_model(sides, spec, plus()).unwrap();
    let origin = Site::origin(sides.len());
    let exact = probability_minus(&model, beta, &origin, ExactLimit::default()).unwrap();
    let hits = (0..trials)
        .into_par_iter()
        .filter(|&t| {
            // ~10⁴ samples: shorter chains leave the binomial skew visible in
            // the 3-SE tail at p ≈ 0.05
            let s = Schedule::new(beta, 101_000, derive_seed(SEED, "coverage", tag * 1000 + t));
            let r = estimate_origin_minus(&model, &s).unwrap();
            (r.estimate - exact).abs() <= 3.0 * r.std_error
        })
        .count();
    (exact, hits as f64 / trials as f64, model.len())
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut cases: Vec<(Vec<usize>, CouplingSpec, f64)> = Vec::new();
    for a in 1..=4 {
        for b in a..=4 {
            cases.push((vec![a, b], spec2(), 0.2));
        }
    }
    cases.push((
        vec![2, 2, 2],
        CouplingSpec::new(1.0, 3.5, 3, 4.0).unwrap(),
        0.1,
    ));
    let mut worst = 1.0f64;
    let mut parts = Vec::new();
    for (k, (sides, spec, beta)) in cases.iter().enumerate() {
        let (exact, frac, _) = coverage(sides, spec, *beta, 100, k as u64);
        worst = worst.min(frac);
        let shape: Vec<String> = sides.iter().map(|s| s.to_string()).collect();
        parts.push(format!("{}:{:.2}(p={:.4})", shape.join("x"), frac, exact));
    }
    let secs = started.elapsed().as_secs_f64();
    Outcome {
        pass: worst >= 0.99 && secs < 600.0,
        detail: format!(
            "min coverage {worst:.2} over {} volumes, {secs:.1}s; {}",
            cases.len(),
            parts.join(" ")
        ),
    }
}

fn criterion_2() -> Outcome {
    let base = box_model(&[3, 3], &spec2(), plus()).unwrap();
    let vol = base.volume_arc().clone();
    let mar = MarParams::default();
    let mut worst = 0.0f64;
    let mut with_contour = 0;
    for t in 0..100u64 {
        let bits = derive_seed(SEED, "identity-sigma", t) & ((1 << vol.len()) - 1);
        let sigma = SpinConfig::from_bits(vol.clone(), bits);
        let field = FieldSpec::GaussianIid {
            epsilon: 0.5,
            seed: derive_seed(SEED, "identity-field", t),
        }
        .realize(vol.clone())
        .unwrap();
        let model = base.with_field(field).unwrap();
        let set = extract_contours(&sigma, &plus(), &mar).unwrap();
        let gamma = if set.is_empty() {
            None
        } else {
            with_contour += 1;
            let k = derive_seed(SEED, "identity-gamma", t) as usize % set.len();
            Some(&set.contours()[k])
        };
        let c = identity_check_contour(&model, 1.0, &sigma, gamma, ExactLimit::default()).unwrap();
        worst = worst.max(c.rel_error);
    }
    Outcome {
        pass: worst <= 1e-9,
        detail: format!(
            "max relative error {worst:.3e} over 100 triples ({with_contour} with a contour)"
        ),
    }
}

fn criterion_3() -> Outcome {
    let model = box_model(&[3, 3], &spec2(), plus()).unwrap();
    let inst =
        exhaustive_instances(model.volume_arc().clone(), &plus(), &MarParams::default()).unwrap();
    let r = verify_flip_energy_bound(&model, &inst).unwrap();
    let c = r.witness_value("c_star").unwrap_or(f64::NAN);
    Outcome {
        pass: r.instances == 512 && r.verdict == Verdict::Holds && c > 0.0,
        detail: format!(
            "{} instances, {} without contours, c*={c:.4}",
            r.instances, r.excluded
        ),
    }
}

fn criterion_4() -> Outcome {
    let base = box_model(&[3, 3], &spec2(), plus()).unwrap();
    let o = Site::origin(2);
    let a = Volume::region(2, [o.clone()]).unwrap();
    let a2 = Volume::region(2, [o.clone(), o.shifted(0, 1)]).unwrap();
    let lambdas: Vec<f64> = (1..=20).map(|k| f64::from(k) / 10.0).collect();
    let r = verify_concentration(
        &base,
        &a,
        &a2,
        &lambdas,
        10_000,
        1.0,
        0.5,
        SEED,
        ExactLimit::default(),
    )
    .unwrap();
    let worst = r
        .rows
        .iter()
        .map(|row| row.bound_single + 3.0 * row.se_single - row.freq_single)
        .fold(f64::INFINITY, f64::min);
    let deriv = r
        .derivative
        .witness_value("max_abs_derivative")
        .unwrap_or(f64::NAN);
    Outcome {
        pass: worst >= 0.0 && r.derivative.verdict == Verdict::Holds,
        detail: format!(
            "min slack {worst:.4} on 20 lambdas with 1e4 replicas; max |dDelta/dh| {deriv:.6} vs 2eps=1 ({:?})",
            r.derivative.verdict
        ),
    }
}

fn criterion_5() -> Outcome {
    let mar = MarParams::default();
    let rows = census(2, &[4, 5], None, &[0], OriginRule::Interior, &mar).unwrap();
    let (n4, n5) = (rows[0].0.count, rows[1].0.count);
    let c = verify_counting(2, &[4, 6, 8], &[1, 2, 3], &mar, &CountingParams::default()).unwrap();
    let b4 = c.b4.witness_value("b4").unwrap_or(f64::NAN);
    Outcome {
        pass: n4 == 1
            && n5 == 0
            && c.monotone_covers
            && c.b4.verdict == Verdict::Holds
            && b4 > 0.0
            && b4.is_finite(),
        detail: format!(
            "|G0(4)|={n4}, |G0(5)|={n5}, covers non-increasing: {}, b4={b4:.4}",
            c.monotone_covers
        ),
    }
}

fn criterion_6() -> Outcome {
    let model = box_model(&[4, 4], &spec2(), plus()).unwrap();
    let betas = [0.5, 1.0, 2.0, 4.0];
    let r = verify_peierls(
        &model,
        &betas,
        &[0.0],
        1,
        &Schedule::new(1.0, 11_000, SEED),
        ExactLimit::default(),
    )
    .unwrap();
    let ps: Vec<f64> = r.rows.iter().map(|x| x.p_origin_minus).collect();
    let shown: Vec<String> = ps.iter().map(|p| format!("{p:.3e}")).collect();
    let decreasing = ps.windows(2).all(|w| w[1] < w[0]);
    let c = r.report.witness_value("c_prime").unwrap_or(f64::NAN);
    let p0 = probability_minus(&model, 0.0, &Site::origin(2), ExactLimit::default()).unwrap();
    Outcome {
        pass: decreasing && c > 0.0 && p0 == 0.5,
        detail: format!(
            "P+ = [{}], strictly decreasing: {decreasing}, C'={c:.4}, P at beta=0: {p0}",
            shown.join(", ")
        ),
    }
}

fn criterion_7() -> Outcome {
    let started = Instant::now();
    let model = box_model(&[8, 8], &spec2(), plus()).unwrap();
    let g = boundary_gap(&model, &Schedule::new(2.0, 11_000, SEED), 0.0, 4).unwrap();
    let secs = started.elapsed().as_secs_f64();
    let z = g.z_score();
    Outcome {
        pass: z > 3.0 && secs < 900.0,
        detail: format!(
            "P-={:.4}, P+={:.4}, gap={:.4}, joint se={:.2e}, z={z:.1}, {secs:.1}s",
            g.p_minus, g.p_plus, g.gap, g.joint_se
        ),
    }
}

fn run_cli(out: &Path, config: Option<&Path>, args: &[&str]) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lrising"));
    cmd.arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    let status = cmd.args(args).output().unwrap();
    assert!(
        status.status.success(),
        "lrising {args:?} failed: {}",
        String::from_utf8_lossy(&status.stderr)
    );
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let commands: [&[&str]; 5] = [
        &["enumerate"],
        &["contours"],
        &["sample"],
        &["sweep"],
        &["verify", "all"],
    ];
    let mut compared = 0;
    let mut diffs = Vec::new();
    for (k, args) in commands.iter().enumerate() {
        let first = dir.path().join(format!("a{k}"));
        let second = dir.path().join(format!("b{k}"));
        run_cli(&first, None, args);
        // rerun from the recorded manifest
        let manifest: serde_json::Value =
            serde_json::from_slice(&std::fs::read(first.join("manifest.json")).unwrap()).unwrap();
        let cfg = dir.path().join(format!("cfg{k}.json"));
        std::fs::write(&cfg, serde_json::to_vec(&manifest["config"]).unwrap()).unwrap();
        run_cli(&second, Some(&cfg), args);
        for f in manifest["files"].as_array().unwrap() {
            let name = f.as_str().unwrap();
            if !name.ends_with(".csv") {
                continue;
            }
            compared += 1;
            if std::fs::read(first.join(name)).unwrap() != std::fs::read(second.join(name)).unwrap()
            {
                diffs.push(name.to_string());
            }
        }
    }
    Outcome {
        pass: compared > 0 && diffs.is_empty(),
        detail: format!("{compared} CSV files compared across 5 commands, differing: {diffs:?}"),
    }
}

fn main() {
    // `cargo test -- --list` and filters pass arguments; honour listing only.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let criteria: [Criterion; 8] = [
        ("exact engine vs Metropolis", criterion_1),
        ("density-ratio identity", criterion_2),
        ("flip-energy bound", criterion_3),
        ("concentration and derivative", criterion_4),
        ("contour census", criterion_5),
        ("Peierls observable", criterion_6),
        ("boundary gap on 8x8", criterion_7),
        ("determinism", criterion_8),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {} [{}] {name}: {}",
            k + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
