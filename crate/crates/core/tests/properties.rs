use std::sync::Arc;

use lrising::contour::{extract_contours, spin_boundary, MarParams};
use lrising::exact::{
    delta_a, gibbs_expectation, identity_check, probability_minus, ExactLimit, Observable,
};
use lrising::lattice::exterior_boundary;
use lrising::model::FlipOnRegion;
use lrising::rng::derive_seed;
use lrising::sampler::{detailed_balance_gap, run_chain_on, Schedule};
use lrising::verify::{box_model, concentration_bound, covering_number};
use lrising::{BoundaryCondition, CouplingSpec, FieldSpec, Model, Site, Spin, SpinConfig, Volume};
use proptest::prelude::*;

fn spec() -> CouplingSpec {
    CouplingSpec::new(1.0, 3.0, 2, 4.0).unwrap()
}

fn bc(plus: bool) -> BoundaryCondition {
    BoundaryCondition::uniform(if plus { Spin::Plus } else { Spin::Minus })
}

/// Model on a centred `a × b` box with a Gaussian field of strength `eps`.
fn model(a: usize, b: usize, plus: bool, eps: f64, seed: u64) -> Model {
    let m = box_model(&[a, b], &spec(), bc(plus)).unwrap();
    if eps == 0.0 {
        return m;
    }
    let f = FieldSpec::GaussianIid { epsilon: eps, seed }
        .realize(m.volume_arc().clone())
        .unwrap();
    m.with_field(f).unwrap()
}

fn config(m: &Model, bits: u64) -> SpinConfig {
    SpinConfig::from_bits(m.volume_arc().clone(), bits & ((1u64 << m.len()) - 1))
}

/// Subset of the model volume picked by the low bits of `mask`.
fn region(m: &Model, mask: u64) -> Volume {
    let sites = m
        .volume()
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, s)| s.clone());
    Volume::region(2, sites).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn single_flip_delta_matches_recomputation(
        a in 1usize..=4, b in 1usize..=4, plus: bool, eps in 0.0f64..2.0,
        seed: u64, bits: u64, pick: usize,
    ) {
        let m = model(a, b, plus, eps, seed);
        let s = config(&m, bits);
        let i = pick % m.len();
        let mut t = s.clone();
        t.flip_index(i);
        let full = m.energy(&t).unwrap().total - m.energy(&s).unwrap().total;
        prop_assert!(close(m.delta_single_flip(s.values(), i), full, 1e-10));
    }

    #[test]
    fn energy_breakdown_sums(a in 1usize..=4, b in 1usize..=4, plus: bool, eps in 0.0f64..2.0, seed: u64, bits: u64) {
        let m = model(a, b, plus, eps, seed);
        let e = m.energy(&config(&m, bits)).unwrap();
        prop_assert!(close(e.bulk_pair_term + e.boundary_term + e.field_term, e.total, 1e-12));
    }

    #[test]
    fn global_flip_symmetry(a in 1usize..=4, b in 1usize..=4, eps in 0.0f64..2.0, seed: u64, bits: u64) {
        let m = model(a, b, true, eps, seed);
        let all = m.volume().clone();
        let mirrored = m
            .with_boundary(m.boundary_condition().negated()).unwrap()
            .with_field(m.field().apply_tau_a(&all).unwrap()).unwrap();
        let s = config(&m, bits);
        let e = m.energy(&s).unwrap().total;
        let e2 = mirrored.energy(&s.negated()).unwrap().total;
        prop_assert!(close(e, e2, 1e-12));
    }

    #[test]
    fn energy_is_translation_invariant(a in 1usize..=3, b in 1usize..=3, dx in -5i64..5, dy in -5i64..5, bits: u64) {
        let v1 = Arc::new(Volume::boxed(&[a, b], &Site::new(vec![0, 0])).unwrap());
        let v2 = Arc::new(Volume::boxed(&[a, b], &Site::new(vec![dx, dy])).unwrap());
        let zero1 = FieldSpec::None.realize(v1.clone()).unwrap();
        let zero2 = FieldSpec::None.realize(v2.clone()).unwrap();
        let m1 = Model::new(v1.clone(), spec(), bc(true), zero1).unwrap();
        let m2 = Model::new(v2.clone(), spec(), bc(true), zero2).unwrap();
        let mask = (1u64 << v1.len()) - 1;
        let e1 = m1.energy(&SpinConfig::from_bits(v1, bits & mask)).unwrap().total;
        let e2 = m2.energy(&SpinConfig::from_bits(v2, bits & mask)).unwrap().total;
        prop_assert!(close(e1, e2, 1e-12));
    }

    #[test]
    fn tau_a_is_an_involution(a in 1usize..=4, b in 1usize..=4, eps in 0.1f64..2.0, seed: u64, bits: u64, mask: u64) {
        let m = model(a, b, true, eps, seed);
        let r = region(&m, mask);
        let s = config(&m, bits);
        prop_assert_eq!(s.apply_tau_a(&r).unwrap().apply_tau_a(&r).unwrap(), s.clone());
        let f = m.field();
        prop_assert_eq!(&f.apply_tau_a(&r).unwrap().apply_tau_a(&r).unwrap(), f);
        let flipped = s.apply_tau_a(&r).unwrap();
        prop_assert_eq!(s.differing_sites(&flipped).unwrap().len(), r.len());
    }

    #[test]
    fn gibbs_measure_is_normalized(a in 1usize..=3, b in 1usize..=3, plus: bool, beta in 0.0f64..2.0, eps in 0.0f64..1.0, seed: u64) {
        let m = model(a, b, plus, eps, seed);
        let o = m.volume().index_of(&Site::origin(2)).unwrap();
        let g = gibbs_expectation(&m, beta, &[Observable::One, Observable::Minus(o), Observable::Spin(o)]).unwrap();
        prop_assert!(close(g.means[0], 1.0, 1e-12));
        prop_assert!((0.0..=1.0).contains(&g.means[1]));
        // P[σ_o = −1] = (1 − ⟨σ_o⟩)/2
        prop_assert!((g.means[1] - (1.0 - g.means[2]) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn boundary_mirror_of_origin_probability(a in 1usize..=3, b in 1usize..=3, beta in 0.0f64..2.0) {
        let p = probability_minus(&model(a, b, true, 0.0, 0), beta, &Site::origin(2), ExactLimit::default()).unwrap();
        let q = probability_minus(&model(a, b, false, 0.0, 0), beta, &Site::origin(2), ExactLimit::default()).unwrap();
        prop_assert!((p + q - 1.0).abs() < 1e-12);
    }

    #[test]
    fn delta_is_antisymmetric_under_field_flip(a in 1usize..=3, b in 1usize..=3, beta in 0.1f64..2.0, eps in 0.1f64..1.0, seed: u64, mask: u64) {
        let m = model(a, b, true, eps, seed);
        let r = region(&m, mask);
        let d = delta_a(&m, beta, &r).unwrap().delta;
        let flipped = m.with_field(m.field().apply_tau_a(&r).unwrap()).unwrap();
        let d2 = delta_a(&flipped, beta, &r).unwrap().delta;
        prop_assert!((d + d2).abs() < 1e-9 * 1f64.max(d.abs()));
        // |Δ_A| ≤ 2ε Σ_A |h|
        let budget: f64 = r.iter().map(|s| 2.0 * eps * m.field().value(s).unwrap().abs()).sum();
        prop_assert!(d.abs() <= budget + 1e-9);
    }

    #[test]
    fn density_ratio_identity(a in 1usize..=3, b in 1usize..=3, beta in 0.1f64..2.0, eps in 0.0f64..1.0, seed: u64, bits: u64, mask: u64) {
        let m = model(a, b, true, eps, seed);
        let c = identity_check(&m, beta, &config(&m, bits), &region(&m, mask), ExactLimit::default()).unwrap();
        prop_assert!(c.rel_error <= 1e-9);
    }

    #[test]
    fn metropolis_detailed_balance(a in 1usize..=4, b in 1usize..=4, beta in 0.0f64..4.0, eps in 0.0f64..2.0, seed: u64, bits: u64, pick: usize) {
        let m = model(a, b, true, eps, seed);
        let gap = detailed_balance_gap(&m, beta, &config(&m, bits), pick % m.len()).unwrap();
        prop_assert!(gap < 1e-9);
    }

    #[test]
    fn spin_boundary_is_partitioned_by_contours(a in 1usize..=4, b in 1usize..=4, plus: bool, bits: u64) {
        let m = model(a, b, plus, 0.0, 0);
        let s = config(&m, bits);
        let faces = spin_boundary(&s, m.boundary_condition()).unwrap();
        let set = extract_contours(&s, m.boundary_condition(), &MarParams::default()).unwrap();
        prop_assert_eq!(set.total_faces(), faces.len());
        let mut seen = std::collections::BTreeSet::new();
        for g in set.contours() {
            for f in g.faces() {
                prop_assert!(faces.contains(f));
                prop_assert!(seen.insert(f.clone()));
            }
        }
        let uniform_bc = s.values().iter().all(|&v| v == if plus { 1 } else { -1 });
        prop_assert_eq!(set.is_empty(), uniform_bc);
    }

    #[test]
    fn concentration_bound_is_monotone(l1 in 0.0f64..5.0, l2 in 0.0f64..5.0, eps in 0.01f64..2.0, k in 1usize..20) {
        let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        prop_assert!(concentration_bound(hi, eps, k) <= concentration_bound(lo, eps, k));
        prop_assert!(concentration_bound(lo, eps, k) <= concentration_bound(lo, eps, k + 1));
        prop_assert!(concentration_bound(0.0, eps, k) == 2.0);
    }

    #[test]
    fn covering_number_decreases_with_radius(pts in prop::collection::vec(-5.0f64..5.0, 1..12), e1 in 0.0f64..4.0, e2 in 0.0f64..4.0) {
        let dist: Vec<Vec<f64>> = pts.iter().map(|x| pts.iter().map(|y| (x - y).abs()).collect()).collect();
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let n_lo = covering_number(&dist, lo);
        prop_assert!(covering_number(&dist, hi) <= n_lo);
        prop_assert!(n_lo >= 1 && n_lo <= pts.len());
    }

    #[test]
    fn volume_set_algebra(m1: u16, m2: u16) {
        let m = model(4, 4, true, 0.0, 0);
        let (x, y) = (region(&m, u64::from(m1)), region(&m, u64::from(m2)));
        prop_assert_eq!(x.union(&y).len() + x.intersection(&y).len(), x.len() + y.len());
        prop_assert_eq!(x.symmetric_difference(&y).len(), x.union(&y).len() - x.intersection(&y).len());
        prop_assert!(exterior_boundary(&x).iter().all(|s| !x.contains(s)));
    }

    #[test]
    fn derived_seeds_are_stable_and_label_sensitive(base: u64, i: u64) {
        prop_assert_eq!(derive_seed(base, "chain", i), derive_seed(base, "chain", i));
        prop_assert_ne!(derive_seed(base, "chain", i), derive_seed(base, "field", i));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn chains_replay_bit_identically(beta in 0.0f64..2.0, seed: u64) {
        let m = model(3, 3, true, 0.3, 11);
        let s = Schedule::new(beta, 300, seed).with_burn_in(100).with_thinning(1);
        let obs = [Observable::Minus(4), Observable::Energy];
        let a = run_chain_on(&m, &s, &obs).unwrap();
        let b = run_chain_on(&m, &s, &obs).unwrap();
        prop_assert_eq!(a.final_state, b.final_state);
        prop_assert_eq!(a.records, b.records);
    }
}
