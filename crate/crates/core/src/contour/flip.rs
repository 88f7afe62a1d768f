use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Volume;
use crate::model::{FlipEnergy, Model, Spin, SpinConfig};

use super::extract::ContourSet;

/// Which side of each external contour `τ_Γ` normalises to.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlipOrientation {
    /// Support sites take the contour's label; interiors of the opposite sign
    /// are negated, the others kept. Erases the contour.
    #[default]
    ByLabel,
    /// Support sites set to −1; `I_+` negated; `I_−` and `V(Γ)^c` kept,
    /// whatever the label.
    Minus,
}

/// `τ_Γ` applied over the external contours of `gamma`.
pub fn apply_tau_gamma(sigma: &SpinConfig, gamma: &ContourSet) -> Result<SpinConfig> {
    apply_tau_gamma_oriented(sigma, gamma, FlipOrientation::ByLabel)
}

pub fn apply_tau_gamma_oriented(
    sigma: &SpinConfig,
    gamma: &ContourSet,
    orientation: FlipOrientation,
) -> Result<SpinConfig> {
    if gamma.volume() != sigma.volume() {
        return Err(Error::DomainMismatch(
            "contour set belongs to another volume".into(),
        ));
    }
    let n = sigma.len();
    // 0 = untouched, 1 = kept interior, 2 = negated, 3 = forced to +, 4 = forced to −
    let mut role = vec![0u8; n];
    let claim = |sites: &Volume, r: u8, role: &mut Vec<u8>| -> Result<()> {
        for s in sites.iter() {
            let i = sigma
                .volume()
                .index_of(s)
                .ok_or_else(|| Error::DomainMismatch(format!("{s} is outside the volume")))?;
            if role[i] != 0 {
                return Err(Error::RegionOverlap(format!(
                    "{s} is claimed by two regions"
                )));
            }
            role[i] = r;
        }
        Ok(())
    };
    for c in gamma.external() {
        let keep_sign = match orientation {
            FlipOrientation::ByLabel => c.label(),
            FlipOrientation::Minus => Spin::Minus,
        };
        claim(c.i_signed(keep_sign), 1, &mut role)?;
        claim(c.i_signed(keep_sign.flipped()), 2, &mut role)?;
        claim(
            c.sp_sites(),
            if keep_sign == Spin::Plus { 3 } else { 4 },
            &mut role,
        )?;
    }
    let mut out = sigma.clone();
    for (i, r) in role.into_iter().enumerate() {
        match r {
            2 => out.flip_index(i),
            3 => out.set_index(i, 1),
            4 => out.set_index(i, -1),
            _ => {}
        }
    }
    Ok(out)
}

/// `H(τ_Γ σ) − H(σ)` by both energy paths.
pub fn flip_energy_tau_gamma(
    model: &Model,
    sigma: &SpinConfig,
    gamma: &ContourSet,
) -> Result<FlipEnergy> {
    let target = apply_tau_gamma(sigma, gamma)?;
    model.flip_energy_difference(sigma, &target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::{extract_contours, spin_boundary, Contour, Face, MarParams};
    use crate::lattice::Site;
    use crate::model::BoundaryCondition;
    use std::sync::Arc;

    fn s(c: &[i64]) -> Site {
        Site::new(c.to_vec())
    }

    #[test]
    fn empty_set_is_identity() {
        let vol = Arc::new(Volume::centered_box(&[3, 3]).unwrap());
        let c = SpinConfig::from_bits(vol.clone(), 0b010_000_000);
        let empty = ContourSet::empty(vol);
        assert_eq!(apply_tau_gamma(&c, &empty).unwrap(), c);
    }

    #[test]
    fn case_table_minus_orientation() {
        // all-plus σ with I_+ = {p}, sp = {q}
        let vol = Arc::new(Volume::centered_box(&[3, 1]).unwrap());
        let p = s(&[0, 0]);
        let q = s(&[1, 0]);
        let faces = vec![
            Face::between(&p, &s(&[-1, 0])).unwrap(),
            Face::between(&p, &q).unwrap(),
        ];
        let g = Contour::from_parts(
            vec![faces],
            Spin::Minus,
            Volume::region(2, [p.clone()]).unwrap(),
            Volume::empty(2),
            Volume::region(2, [q.clone()]).unwrap(),
        )
        .unwrap();
        let set = ContourSet::from_contours(vol.clone(), vec![g]);
        let plus = SpinConfig::uniform(vol, Spin::Plus);
        let out = apply_tau_gamma_oriented(&plus, &set, FlipOrientation::Minus).unwrap();
        assert_eq!(out.get(&p).unwrap(), Spin::Minus);
        assert_eq!(out.get(&q).unwrap(), Spin::Minus);
        assert_eq!(out.get(&s(&[-1, 0])).unwrap(), Spin::Plus);
    }

    #[test]
    fn sp_forced_regardless_of_sign() {
        let vol = Arc::new(Volume::centered_box(&[3, 3]).unwrap());
        let mut c = SpinConfig::uniform(vol.clone(), Spin::Plus);
        c.set(&s(&[0, 0]), Spin::Minus).unwrap();
        let set = extract_contours(&c, &BoundaryCondition::Plus, &MarParams::default()).unwrap();
        let out = apply_tau_gamma_oriented(&c, &set, FlipOrientation::Minus).unwrap();
        for x in set.contours()[0].sp_sites().iter() {
            assert_eq!(out.get(x).unwrap(), Spin::Minus);
        }
        let erased = apply_tau_gamma(&c, &set).unwrap();
        assert_eq!(erased, SpinConfig::uniform(vol, Spin::Plus));
    }

    #[test]
    fn overlapping_regions_rejected() {
        let vol = Arc::new(Volume::centered_box(&[3, 1]).unwrap());
        let p = s(&[0, 0]);
        let mk = |lo: i64| {
            Contour::from_parts(
                vec![vec![Face::new(s(&[lo, 0]), 0)]],
                Spin::Plus,
                Volume::empty(2),
                Volume::region(2, [p.clone()]).unwrap(),
                Volume::empty(2),
            )
            .unwrap()
        };
        let set = ContourSet::from_contours(vol.clone(), vec![mk(-1), mk(0)]);
        let c = SpinConfig::uniform(vol, Spin::Plus);
        assert!(matches!(
            apply_tau_gamma(&c, &set),
            Err(Error::RegionOverlap(_))
        ));
    }

    #[test]
    fn erasing_reduces_faces_on_small_boxes() {
        let vol = Arc::new(Volume::centered_box(&[3, 3]).unwrap());
        let bc = BoundaryCondition::Plus;
        for bits in 1u64..512 {
            let c = SpinConfig::from_bits(vol.clone(), bits);
            let set = extract_contours(&c, &bc, &MarParams::default()).unwrap();
            let t = apply_tau_gamma(&c, &set).unwrap();
            let before = spin_boundary(&c, &bc).unwrap().len();
            let after = spin_boundary(&t, &bc).unwrap().len();
            assert!(after < before, "config {bits:#b}: {before} -> {after}");
        }
    }
}
