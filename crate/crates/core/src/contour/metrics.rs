use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{diameter, CubeIndex, Norm, Site, Volume};
use crate::model::CouplingSpec;

use super::extract::Contour;

/// Minimum ℓ¹ distance between face midpoints of two contours.
pub fn contour_metric(g1: &Contour, g2: &Contour) -> f64 {
    let mut best = f64::INFINITY;
    for f in g1.faces() {
        for g in g2.faces() {
            best = best.min(f.midpoint_distance(g));
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiameterReport {
    /// Largest pairwise distance between sites of `V(γ)`.
    pub diameter: f64,
    pub volume: usize,
    /// `diam / |V|^{1/d}`: the largest `k_d` for which
    /// `diam ≥ k_d |V|^{1/d}` holds on this contour.
    pub k_witness: f64,
}

pub fn contour_diameter(gamma: &Contour, norm: Norm) -> DiameterReport {
    let v = gamma.v();
    let diameter = diameter(v.sites(), norm);
    let volume = v.len();
    let k_witness = if volume == 0 {
        0.0
    } else {
        diameter / (volume as f64).powf(1.0 / gamma.dim() as f64)
    };
    DiameterReport {
        diameter,
        volume,
        k_witness,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SurfaceSum {
    pub value: f64,
    /// Bound on the omitted `|y − x| > r_cut` part: `|A|` times the
    /// single-site tail.
    pub tail_bound: f64,
}

/// `F_A = Σ_{x ∈ A, y ∉ A, |y − x| ≤ r_cut} J_{xy}`.
pub fn surface_sum(region: &Volume, spec: &CouplingSpec) -> Result<SurfaceSum> {
    spec.validate()?;
    if region.is_empty() {
        return Ok(SurfaceSum {
            value: 0.0,
            tail_bound: 0.0,
        });
    }
    if region.dim() != spec.dim {
        return Err(Error::DimensionMismatch {
            expected: spec.dim,
            found: region.dim(),
        });
    }
    let kernel = spec.shell_kernel();
    let mut value = 0.0;
    for x in region.iter() {
        for (o, j) in &kernel {
            if !region.contains(&x.translated(o)) {
                value += j;
            }
        }
    }
    Ok(SurfaceSum {
        value,
        tail_bound: region.len() as f64 * spec.tail_bound(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SurfaceSums {
    pub f_i_plus: SurfaceSum,
    pub f_i_minus: SurfaceSum,
    pub f_sp: SurfaceSum,
}

/// `(F_{I_+}, F_{I_−}, F_sp)` of a contour.
pub fn surface_sums(gamma: &Contour, spec: &CouplingSpec) -> Result<SurfaceSums> {
    Ok(SurfaceSums {
        f_i_plus: surface_sum(gamma.i_plus(), spec)?,
        f_i_minus: surface_sum(gamma.i_minus(), spec)?,
        f_sp: surface_sum(gamma.sp_sites(), spec)?,
    })
}

/// Admissible `l`-cubes of a region and the printed boundary relation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdmissibleCubes {
    pub scale: u32,
    /// Cubes at least half filled by the region.
    pub cubes: Vec<CubeIndex>,
    /// Pairs `(C, C′)` with `C` admissible, `C′` not, and `|C ∩ C′| = 1`.
    pub boundary: Vec<(CubeIndex, CubeIndex)>,
}

/// Cubes at `scale` meeting `region`, with their intersection sizes.
fn cube_fill(region: &Volume, scale: u32) -> Vec<(CubeIndex, usize)> {
    let mut cubes: BTreeSet<CubeIndex> = BTreeSet::new();
    for s in region.iter() {
        cubes.extend(CubeIndex::containing(s, scale));
    }
    cubes
        .into_iter()
        .map(|c| {
            let k = c.sites().iter().filter(|s| region.contains(s)).count();
            (c, k)
        })
        .collect()
}

/// `2|C ∩ A| ≥ |C|`.
fn half_filled(k: usize, c: &CubeIndex) -> bool {
    2 * k >= c.size()
}

/// Cubes at `scale` that are at least half filled by `region`.
pub fn admissible_region_cubes(region: &Volume, scale: u32) -> AdmissibleCubes {
    let fill = cube_fill(region, scale);
    let cubes: Vec<CubeIndex> = fill
        .iter()
        .filter(|(c, k)| half_filled(*k, c))
        .map(|(c, _)| c.clone())
        .collect();
    let admissible: BTreeSet<&CubeIndex> = cubes.iter().collect();
    let d = region.dim();
    let mut boundary = Vec::new();
    for c in &cubes {
        // closed cubes share exactly one site only when their centres differ
        // by ±1 on every axis
        for signs in 0..(1u32 << d) {
            let offset: Vec<i64> = (0..d)
                .map(|i| if signs >> i & 1 == 1 { 1 } else { -1 })
                .collect();
            let other = CubeIndex::new(c.center.translated(&offset), scale);
            if admissible.contains(&other) {
                continue;
            }
            let shared = c.sites().intersection(&other.sites()).len();
            if shared == 1 {
                boundary.push((c.clone(), other));
            }
        }
    }
    AdmissibleCubes {
        scale,
        cubes,
        boundary,
    }
}

/// `𝒞_l(γ)` and `∂𝒞_l(γ)` relative to `I(γ)`.
pub fn admissible_cubes(gamma: &Contour, scale: u32) -> AdmissibleCubes {
    admissible_region_cubes(&gamma.interior(), scale)
}

/// Face-adjacent cube pair `(C, C′)` with `C` half filled by `A` and `C′`
/// less than half filled, together with `|∂_ex A ∩ (C ∪ C′)|`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CubePairInstance {
    pub full: CubeIndex,
    pub sparse: CubeIndex,
    pub boundary_hits: usize,
}

/// All face-adjacent cube pairs at `scale` straddling the admissibility
/// threshold of `region`.
pub fn straddling_pairs(region: &Volume, scale: u32) -> Vec<CubePairInstance> {
    if region.is_empty() {
        return Vec::new();
    }
    let ext = crate::lattice::exterior_boundary(region);
    let fill: std::collections::BTreeMap<CubeIndex, usize> =
        cube_fill(region, scale).into_iter().collect();
    let d = region.dim();
    let mut out = Vec::new();
    for (c, &k) in &fill {
        if !half_filled(k, c) {
            continue;
        }
        for axis in 0..d {
            for step in [-1i64, 1] {
                let other = CubeIndex::new(c.center.shifted(axis, step), scale);
                let ko = fill.get(&other).copied().unwrap_or(0);
                if half_filled(ko, &other) {
                    continue;
                }
                let u = c.sites().union(&other.sites());
                let boundary_hits = u.iter().filter(|s| ext.contains(s)).count();
                out.push(CubePairInstance {
                    full: c.clone(),
                    sparse: other,
                    boundary_hits,
                });
            }
        }
    }
    out
}

/// Cubes at one scale covering a contour family.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CubeCover {
    pub scale: u32,
    pub cubes: Vec<CubeIndex>,
    pub count: usize,
    /// Cover size of each contour on its own.
    pub per_contour: Vec<usize>,
}

/// Distinct `l`-cubes containing an endpoint of some face of some contour.
pub fn cube_cover_count(family: &[Contour], scale: u32) -> CubeCover {
    let mut all = BTreeSet::new();
    let mut per_contour = Vec::with_capacity(family.len());
    for g in family {
        let mut mine = BTreeSet::new();
        for s in g.touched_sites() {
            mine.extend(CubeIndex::containing(&s, scale));
        }
        per_contour.push(mine.len());
        all.extend(mine);
    }
    let cubes: Vec<CubeIndex> = all.into_iter().collect();
    CubeCover {
        scale,
        count: cubes.len(),
        cubes,
        per_contour,
    }
}

/// Sites of a family's faces, for cover diagnostics.
pub fn family_sites(family: &[Contour]) -> BTreeSet<Site> {
    family.iter().flat_map(|g| g.touched_sites()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::{extract_contours, MarParams};
    use crate::model::{BoundaryCondition, Spin, SpinConfig};
    use std::sync::Arc;

    fn s(c: &[i64]) -> Site {
        Site::new(c.to_vec())
    }

    fn island(sides: &[usize], minus: &[&[i64]]) -> Vec<Contour> {
        let vol = Arc::new(Volume::centered_box(sides).unwrap());
        let mut c = SpinConfig::uniform(vol, Spin::Plus);
        for m in minus {
            c.set(&s(m), Spin::Minus).unwrap();
        }
        extract_contours(&c, &BoundaryCondition::Plus, &MarParams::default())
            .unwrap()
            .contours()
            .to_vec()
    }

    #[test]
    fn metric_examples() {
        let gs = island(&[11, 3], &[&[0, 0], &[5, 0]]);
        assert_eq!(gs.len(), 2);
        let oracle = gs[0]
            .faces()
            .iter()
            .flat_map(|f| gs[1].faces().iter().map(move |g| f.midpoint_distance(g)))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(oracle, 4.0);
        assert_eq!(contour_metric(&gs[0], &gs[1]), 4.0);
        assert_eq!(contour_metric(&gs[1], &gs[0]), 4.0);
        assert_eq!(contour_metric(&gs[0], &gs[0]), 0.0);
    }

    #[test]
    fn diameter_of_unit_square() {
        let g = &island(&[3, 3], &[&[0, 0]])[0];
        let r = contour_diameter(g, Norm::Euclidean);
        assert_eq!(r.diameter, 2.0);
        assert_eq!(r.volume, 5);
        let t = g.translated(&[7, -3]);
        assert_eq!(contour_diameter(&t, Norm::Euclidean).diameter, 2.0);
    }

    #[test]
    fn surface_sum_examples() {
        let spec = CouplingSpec::new(1.0, 2.0, 1, 1.0).unwrap();
        let a = Volume::region(1, [s(&[0])]).unwrap();
        assert_eq!(surface_sum(&a, &spec).unwrap().value, 2.0);
        assert_eq!(surface_sum(&Volume::empty(1), &spec).unwrap().value, 0.0);
        let mut last = 0.0;
        for r in [1.0, 2.0, 3.0, 5.0, 8.0] {
            let v = surface_sum(&a, &spec.with_r_cut(r).unwrap()).unwrap().value;
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn admissible_cube_examples() {
        let g = &island(&[3, 3], &[&[0, 0]])[0];
        let l0 = admissible_cubes(g, 0);
        assert_eq!(l0.cubes, vec![CubeIndex::new(s(&[0, 0]), 0)]);
        assert!(l0.boundary.is_empty());
        assert!(admissible_cubes(g, 1).cubes.is_empty());
    }

    #[test]
    fn cover_of_unit_square() {
        let g = island(&[3, 3], &[&[0, 0]]);
        assert_eq!(cube_cover_count(&[], 0).count, 0);
        let c0 = cube_cover_count(&g, 0);
        assert_eq!(c0.count, family_sites(&g).len());
        assert_eq!(c0.count, 5);
        let mut last = usize::MAX;
        for l in 0..4 {
            let c = cube_cover_count(&g, l).count;
            assert!(c <= last);
            last = c;
        }
    }

    #[test]
    fn straddling_pairs_hit_the_boundary() {
        let a = Volume::region(2, [s(&[0, 0]), s(&[1, 0]), s(&[0, 1]), s(&[1, 1])]).unwrap();
        for l in 0..3 {
            for inst in straddling_pairs(&a, l) {
                assert!(inst.boundary_hits >= 1);
            }
        }
        assert_eq!(straddling_pairs(&a, 0).len(), 8);
    }
}
