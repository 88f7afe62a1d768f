use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{interior_boundary, Site, Volume};
use crate::model::{BoundaryCondition, SpinConfig};

use super::extract::{extract_contours, Contour, MarParams};
use super::face::Face;
use super::metrics::cube_cover_count;

/// How a contour must relate to the origin to be counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginRule {
    /// `0 ∈ I(γ)`.
    #[default]
    Interior,
    /// `0 ∈ V(γ)`.
    Volume,
}

impl OriginRule {
    fn admits(self, g: &Contour, origin: &Site) -> bool {
        match self {
            OriginRule::Interior => g.i_plus().contains(origin) || g.i_minus().contains(origin),
            OriginRule::Volume => {
                g.i_plus().contains(origin)
                    || g.i_minus().contains(origin)
                    || g.sp_sites().contains(origin)
            }
        }
    }

    /// Half-width of the origin-centred cube that must lie in the box for
    /// length-`n` contours to be found without truncation.
    pub fn required_half_width(self, n: usize) -> i64 {
        let h = (n / 2) as i64 - 1;
        match self {
            OriginRule::Interior => h.max(1),
            OriginRule::Volume => (h + 1).max(1),
        }
    }
}

/// The smallest origin-centred cube a census of length `n` needs.
pub fn origin_box(dim: usize, n: usize, rule: OriginRule) -> Result<Volume> {
    let h = rule.required_half_width(n);
    let side = (2 * h + 1) as usize;
    Volume::boxed(&vec![side; dim], &Site(vec![-h; dim]))
}

/// Contours with `|γ| = n` and at most `j` components, related to the origin
/// by `rule`, among plus-boundary configurations of `bx`.
///
/// Fails with [`Error::BoxTooSmall`] unless `bx` contains the cube of
/// [`OriginRule::required_half_width`] and no found interior reaches the
/// box's inner boundary.
pub fn enumerate_contours_origin(
    n: usize,
    j: Option<usize>,
    bx: &Volume,
    rule: OriginRule,
    params: &MarParams,
) -> Result<Vec<Contour>> {
    let d = bx.dim();
    let needed = origin_box(d, n, rule)?;
    if !needed.is_subset(bx) {
        return Err(Error::BoxTooSmall(format!(
            "length-{n} census needs the cube of half-width {} around the origin",
            rule.required_half_width(n)
        )));
    }
    let found = enumerate_contours_in_box(n, j, bx, rule, params)?;
    let rim = interior_boundary(bx);
    if let Some(g) = found
        .iter()
        .find(|g| g.interior().iter().any(|s| rim.contains(s)))
    {
        return Err(Error::BoxTooSmall(format!(
            "a length-{n} contour with {} faces reaches the box edge",
            g.len()
        )));
    }
    Ok(found)
}

/// Same as [`enumerate_contours_origin`] without the box-size checks; counts
/// may be truncated by the box.
pub fn enumerate_contours_in_box(
    n: usize,
    j: Option<usize>,
    bx: &Volume,
    rule: OriginRule,
    params: &MarParams,
) -> Result<Vec<Contour>> {
    params.validate()?;
    let origin = Site::origin(bx.dim());
    if !bx.contains(&origin) {
        return Err(Error::BoxTooSmall(
            "the box does not contain the origin".into(),
        ));
    }
    let vol = Arc::new(bx.clone());
    let plan = DfsPlan::new(bx);
    let split = plan.len().min(10);
    let prefixes: Vec<u64> = (0..(1u64 << split)).collect();
    let hits: Vec<Vec<Contour>> = prefixes
        .into_par_iter()
        .map(|prefix| -> Result<Vec<Contour>> {
            let mut spins = vec![1i8; plan.len()];
            let mut count = 0usize;
            for k in 0..split {
                spins[k] = if prefix >> k & 1 == 1 { -1 } else { 1 };
                count += plan.faces_added(&spins, k);
                if count > n {
                    return Ok(Vec::new());
                }
            }
            let mut out = Vec::new();
            let mut visit = |spins: &[i8]| -> Result<()> {
                let cfg = SpinConfig::from_values(vol.clone(), spins.to_vec())?;
                let set = match extract_contours(&cfg, &BoundaryCondition::Plus, params) {
                    Ok(s) => s,
                    Err(Error::NoValidPartition(_)) => return Ok(()),
                    Err(e) => return Err(e),
                };
                for g in set.contours() {
                    if g.len() == n
                        && j.is_none_or(|j| g.component_count() <= j)
                        && rule.admits(g, &origin)
                    {
                        out.push(g.clone());
                    }
                }
                Ok(())
            };
            plan.dfs(&mut spins, split, count, n, &mut visit)?;
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut unique: BTreeMap<Vec<Face>, Contour> = BTreeMap::new();
    for g in hits.into_iter().flatten() {
        unique.entry(g.faces().to_vec()).or_insert(g);
    }
    Ok(unique.into_values().collect())
}

/// Site order and neighbour tables for the face-count search.
struct DfsPlan {
    earlier: Vec<Vec<usize>>,
    outside: Vec<usize>,
}

impl DfsPlan {
    fn new(bx: &Volume) -> Self {
        let mut earlier = Vec::with_capacity(bx.len());
        let mut outside = Vec::with_capacity(bx.len());
        for (i, x) in bx.iter().enumerate() {
            let mut e = Vec::new();
            let mut o = 0;
            for y in x.neighbors() {
                match bx.index_of(&y) {
                    Some(k) if k < i => e.push(k),
                    Some(_) => {}
                    None => o += 1,
                }
            }
            earlier.push(e);
            outside.push(o);
        }
        DfsPlan { earlier, outside }
    }

    fn len(&self) -> usize {
        self.outside.len()
    }

    /// Faces completed by assigning site `k`: disagreements with earlier
    /// sites and, for a minus spin, with the plus shell.
    fn faces_added(&self, spins: &[i8], k: usize) -> usize {
        let mut c = self.earlier[k]
            .iter()
            .filter(|&&e| spins[e] != spins[k])
            .count();
        if spins[k] < 0 {
            c += self.outside[k];
        }
        c
    }

    fn dfs(
        &self,
        spins: &mut [i8],
        k: usize,
        count: usize,
        n: usize,
        visit: &mut dyn FnMut(&[i8]) -> Result<()>,
    ) -> Result<()> {
        if k == self.len() {
            if count == n {
                visit(spins)?;
            }
            return Ok(());
        }
        for v in [1i8, -1] {
            spins[k] = v;
            let c = count + self.faces_added(spins, k);
            if c <= n {
                self.dfs(spins, k + 1, c, n, visit)?;
            }
        }
        spins[k] = 1;
        Ok(())
    }
}

/// One line of a census table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CensusRow {
    pub n: usize,
    pub j: Option<usize>,
    pub rule: OriginRule,
    pub count: usize,
    /// `(l, |B_l|)` for each requested scale.
    pub covers: Vec<(u32, usize)>,
}

/// Census of origin contours for each length in `ns`, each in its own
/// minimal box, with cube-cover counts at the scales `ls`.
pub fn census(
    dim: usize,
    ns: &[usize],
    j: Option<usize>,
    ls: &[u32],
    rule: OriginRule,
    params: &MarParams,
) -> Result<Vec<(CensusRow, Vec<Contour>)>> {
    ns.iter()
        .map(|&n| {
            let bx = origin_box(dim, n, rule)?;
            let family = enumerate_contours_origin(n, j, &bx, rule, params)?;
            let covers = ls
                .iter()
                .map(|&l| (l, cube_cover_count(&family, l).count))
                .collect();
            Ok((
                CensusRow {
                    n,
                    j,
                    rule,
                    count: family.len(),
                    covers,
                },
                family,
            ))
        })
        .collect()
}
