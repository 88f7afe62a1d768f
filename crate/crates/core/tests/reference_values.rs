//! Frozen reference numbers, each recomputed here from the definitions by a
//! plain double loop that shares no code with the engine beyond the site list.

use lrising::exact::{log_partition, probability_minus, ExactLimit};
use lrising::verify::box_model;
use lrising::{BoundaryCondition, CouplingSpec, Site, Volume};

const ALPHA: f64 = 3.0;
const R_CUT: f64 = 4.0;

fn dist(a: &[i64], b: &[i64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| ((x - y) * (x - y)) as f64)
        .sum::<f64>()
        .sqrt()
}

/// `(log Z, P[σ_0 = −1])` under the plus boundary condition, J = 1.
fn oracle(sides: &[usize], beta: f64) -> (f64, f64) {
    let vol = Volume::centered_box(sides).unwrap();
    let sites: Vec<Vec<i64>> = vol.iter().map(|s| s.coords().to_vec()).collect();
    let n = sites.len();
    let mut j = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..n {
            if a != b {
                j[a][b] = dist(&sites[a], &sites[b]).powf(-ALPHA);
            }
        }
    }
    // plus spins on every outside site within R_CUT
    let reach = R_CUT as i64;
    let field: Vec<f64> = sites
        .iter()
        .map(|x| {
            let mut acc = 0.0;
            for dx in -reach..=reach {
                for dy in -reach..=reach {
                    let y = vec![x[0] + dx, x[1] + dy];
                    let r = dist(x, &y);
                    if r > 0.0 && r <= R_CUT && !sites.contains(&y) {
                        acc += r.powf(-ALPHA);
                    }
                }
            }
            acc
        })
        .collect();
    let origin = sites
        .iter()
        .position(|s| s.iter().all(|&c| c == 0))
        .unwrap();
    let mut log_w = Vec::with_capacity(1 << n);
    let mut minus = Vec::new();
    for bits in 0..(1u64 << n) {
        let s: Vec<f64> = (0..n)
            .map(|i| if bits >> i & 1 == 1 { -1.0 } else { 1.0 })
            .collect();
        let mut h = 0.0;
        for a in 0..n {
            for b in (a + 1)..n {
                h -= j[a][b] * s[a] * s[b];
            }
            h -= field[a] * s[a];
        }
        log_w.push(-beta * h);
        if s[origin] < 0.0 {
            minus.push(-beta * h);
        }
    }
    let lse = |v: &[f64]| {
        let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
    };
    let log_z = lse(&log_w);
    (log_z, (lse(&minus) - log_z).exp())
}

fn engine(sides: &[usize], beta: f64) -> (f64, f64) {
    let spec = CouplingSpec::new(1.0, ALPHA, 2, R_CUT).unwrap();
    let m = box_model(sides, &spec, BoundaryCondition::Plus).unwrap();
    let z = log_partition(&m, beta).unwrap().log_z;
    let p = probability_minus(&m, beta, &Site::origin(2), ExactLimit::default()).unwrap();
    (z, p)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

#[test]
fn four_by_four_origin_probabilities() {
    let frozen = [
        (0.5, 41.69393564986324, 5.974776435817499e-4),
        (1.0, 83.36903801332886, 3.4435254656372833e-7),
        (2.0, 166.73806507913133, 1.1855997809528326e-13),
        (4.0, 333.4761301582589, 1.4056468365991855e-26),
    ];
    for (beta, log_z, p) in frozen {
        let (oz, op) = oracle(&[4, 4], beta);
        assert!(rel(oz, log_z) < 1e-12, "oracle log Z at beta={beta}: {oz}");
        assert!(rel(op, p) < 1e-9, "oracle P at beta={beta}: {op}");
        let (ez, ep) = engine(&[4, 4], beta);
        assert!(rel(ez, oz) < 1e-12);
        assert!(rel(ep, op) < 1e-9);
    }
}

#[test]
fn small_boxes_agree_with_oracle() {
    for sides in [[1, 1], [2, 2], [2, 3], [3, 3], [1, 4]] {
        for beta in [0.0, 0.1, 0.2, 0.5, 1.5] {
            let (oz, op) = oracle(&sides, beta);
            let (ez, ep) = engine(&sides, beta);
            assert!(
                (oz - ez).abs() < 1e-10 * oz.abs().max(1.0),
                "{sides:?} beta={beta}"
            );
            assert!(rel(op, ep) < 1e-9, "{sides:?} beta={beta}: {op} vs {ep}");
        }
    }
}

#[test]
fn rare_event_regime_at_moderate_beta() {
    // P[σ_0 = −1] at β = 0.5 barely moves between 2×2 and 4×4
    let ps: Vec<f64> = [[2, 2], [3, 3], [4, 4]]
        .iter()
        .map(|s| oracle(s, 0.5).1)
        .collect();
    for p in &ps {
        assert!((5.5e-4..6.5e-4).contains(p), "{ps:?}");
    }
}
