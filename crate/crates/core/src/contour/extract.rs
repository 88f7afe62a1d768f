use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{exterior_boundary, Site, Volume};
use crate::model::{BoundaryCondition, Spin, SpinConfig};
use crate::rng::stable_hash64;

use super::face::{check_shell, spin_boundary, Face};

/// Parameters of an `(M, a, r)`-partition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarParams {
    pub m: f64,
    pub a: f64,
    pub r: u32,
}

impl Default for MarParams {
    fn default() -> Self {
        MarParams {
            m: 1.0,
            a: 1.0,
            r: 3,
        }
    }
}

impl MarParams {
    pub fn new(m: f64, a: f64, r: u32) -> Result<Self> {
        let p = MarParams { m, a, r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m.is_finite() && self.a > 0.0 && self.a.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "M and a must be positive, got {} and {}",
                self.m, self.a
            )));
        }
        if self.r == 0 || self.r > 31 {
            return Err(Error::InvalidParameter(format!(
                "r must be in 1..=31, got {}",
                self.r
            )));
        }
        Ok(())
    }

    /// `2^r − 1`.
    pub fn max_components(&self) -> usize {
        (1usize << self.r) - 1
    }

    /// `M · D^a`: separation two groups with smaller maximal component
    /// diameter `D` must exceed.
    pub fn separation(&self, d: f64) -> f64 {
        self.m * d.powf(self.a)
    }
}

/// Regions attached to a face set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interiors {
    pub i_plus: Volume,
    pub i_minus: Volume,
    /// Face endpoints in the volume that are not interior.
    pub sp_sites: Volume,
    /// `sp ∪ I_+ ∪ I_−`.
    pub v: Volume,
    /// Sign seen just outside the faces.
    pub label: Spin,
}

/// A contour: a group of connected face components.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Contour {
    dim: usize,
    faces: Vec<Face>,
    components: Vec<Vec<Face>>,
    label: Spin,
    i_plus: Volume,
    i_minus: Volume,
    sp_sites: Volume,
    external: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ContourRepr {
    dim: usize,
    faces: Vec<Face>,
    components: Vec<Vec<Face>>,
    label: Spin,
    i_plus: Vec<Site>,
    i_minus: Vec<Site>,
    sp_sites: Vec<Site>,
    external: bool,
}

impl<'de> Deserialize<'de> for Contour {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ContourRepr::deserialize(d)?;
        let reg = |v: Vec<Site>| Volume::region(r.dim, v).map_err(serde::de::Error::custom);
        let (i_plus, i_minus, sp_sites) = (reg(r.i_plus)?, reg(r.i_minus)?, reg(r.sp_sites)?);
        let mut c = Contour::from_parts(r.components, r.label, i_plus, i_minus, sp_sites)
            .map_err(serde::de::Error::custom)?;
        if c.faces != r.faces {
            return Err(serde::de::Error::custom(
                "faces differ from the union of components",
            ));
        }
        c.external = r.external;
        Ok(c)
    }
}

impl Contour {
    /// Assemble a contour from its components and regions.
    pub fn from_parts(
        mut components: Vec<Vec<Face>>,
        label: Spin,
        i_plus: Volume,
        i_minus: Volume,
        sp_sites: Volume,
    ) -> Result<Self> {
        components.retain(|c| !c.is_empty());
        for c in components.iter_mut() {
            c.sort();
            c.dedup();
        }
        components.sort();
        let mut faces: Vec<Face> = components.iter().flatten().cloned().collect();
        faces.sort();
        let n = faces.len();
        faces.dedup();
        if faces.is_empty() {
            return Err(Error::InvalidParameter(
                "a contour needs at least one face".into(),
            ));
        }
        if faces.len() != n {
            return Err(Error::InvalidParameter("components share faces".into()));
        }
        let dim = faces[0].lo.dim();
        if !i_plus.intersection(&i_minus).is_empty() {
            return Err(Error::RegionOverlap("I_+ and I_- intersect".into()));
        }
        if !sp_sites.intersection(&i_plus.union(&i_minus)).is_empty() {
            return Err(Error::RegionOverlap("sp sites meet the interior".into()));
        }
        Ok(Contour {
            dim,
            faces,
            components,
            label,
            i_plus,
            i_minus,
            sp_sites,
            external: true,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `|γ|`, the number of faces.
    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn components(&self) -> &[Vec<Face>] {
        &self.components
    }

    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn label(&self) -> Spin {
        self.label
    }

    pub fn i_plus(&self) -> &Volume {
        &self.i_plus
    }

    pub fn i_minus(&self) -> &Volume {
        &self.i_minus
    }

    /// Interior with the given sign.
    pub fn i_signed(&self, s: Spin) -> &Volume {
        match s {
            Spin::Plus => &self.i_plus,
            Spin::Minus => &self.i_minus,
        }
    }

    pub fn sp_sites(&self) -> &Volume {
        &self.sp_sites
    }

    /// `I(γ) = I_+ ∪ I_−`.
    pub fn interior(&self) -> Volume {
        self.i_plus.union(&self.i_minus)
    }

    /// `V(γ) = sp(γ) ∪ I(γ)`.
    pub fn v(&self) -> Volume {
        self.sp_sites.union(&self.interior())
    }

    /// Whether no other contour of its set encloses it.
    pub fn is_external(&self) -> bool {
        self.external
    }

    /// Every endpoint of every face, inside the volume or not.
    pub fn touched_sites(&self) -> BTreeSet<Site> {
        self.faces.iter().flat_map(|f| f.endpoints()).collect()
    }

    /// Largest ℓ¹ midpoint diameter among the components.
    pub fn max_component_diameter(&self) -> f64 {
        self.components
            .iter()
            .map(|c| faces_diameter(c))
            .fold(0.0, f64::max)
    }

    /// Same contour shifted by `offset`.
    pub fn translated(&self, offset: &[i64]) -> Contour {
        let shift = |f: &Face| Face::new(f.lo.translated(offset), f.axis);
        Contour {
            dim: self.dim,
            faces: self.faces.iter().map(shift).collect(),
            components: self
                .components
                .iter()
                .map(|c| c.iter().map(shift).collect())
                .collect(),
            label: self.label,
            i_plus: self.i_plus.translated(offset),
            i_minus: self.i_minus.translated(offset),
            sp_sites: self.sp_sites.translated(offset),
            external: self.external,
        }
    }
}

/// Contours of one configuration.
#[derive(Clone, Debug, Serialize)]
pub struct ContourSet {
    contours: Vec<Contour>,
    source_hash: u64,
    #[serde(skip)]
    volume: Arc<Volume>,
}

impl ContourSet {
    pub fn empty(volume: Arc<Volume>) -> Self {
        ContourSet {
            contours: Vec::new(),
            source_hash: 0,
            volume,
        }
    }

    /// A set built from explicit contours over `volume`; external flags are
    /// recomputed.
    pub fn from_contours(volume: Arc<Volume>, mut contours: Vec<Contour>) -> Self {
        mark_external(&mut contours);
        ContourSet {
            contours,
            source_hash: 0,
            volume,
        }
    }

    pub fn contours(&self) -> &[Contour] {
        &self.contours
    }

    pub fn len(&self) -> usize {
        self.contours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contours.is_empty()
    }

    pub fn source_hash(&self) -> u64 {
        self.source_hash
    }

    pub fn volume(&self) -> &Volume {
        &self.volume
    }

    pub fn external(&self) -> impl Iterator<Item = &Contour> {
        self.contours.iter().filter(|c| c.external)
    }

    /// `V(Γ)`, the union of `V(γ)`.
    pub fn v_gamma(&self) -> Volume {
        let mut out = Volume::empty(self.volume.dim());
        for c in &self.contours {
            out = out.union(&c.v());
        }
        out
    }

    pub fn total_faces(&self) -> usize {
        self.contours.iter().map(Contour::len).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn faces_diameter(faces: &[Face]) -> f64 {
    let mut best = 0.0f64;
    for (i, f) in faces.iter().enumerate() {
        for g in &faces[i + 1..] {
            best = best.max(f.midpoint_distance(g));
        }
    }
    best
}

fn faces_distance(a: &[Face], b: &[Face]) -> f64 {
    let mut best = f64::INFINITY;
    for f in a {
        for g in b {
            best = best.min(f.midpoint_distance(g));
        }
    }
    best
}

/// Connected components of a face set under [`Face::adjacent`], each sorted,
/// ordered by their smallest face.
pub fn face_components(faces: &BTreeSet<Face>) -> Vec<Vec<Face>> {
    let list: Vec<&Face> = faces.iter().collect();
    let index: HashMap<&Face, usize> = list.iter().enumerate().map(|(i, f)| (*f, i)).collect();
    let mut seen = vec![false; list.len()];
    let mut out = Vec::new();
    for start in 0..list.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![list[start].clone()];
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for g in list[i].adjacent() {
                if let Some(&j) = index.get(&g) {
                    if !seen[j] {
                        seen[j] = true;
                        comp.push(list[j].clone());
                        queue.push_back(j);
                    }
                }
            }
        }
        comp.sort();
        out.push(comp);
    }
    out
}

/// Flood fill from `∂_ex Λ` through `Λ ∪ ∂_ex Λ` without crossing `faces`;
/// the unreached sites of `Λ` form the interior.
pub fn compute_interiors(
    faces: &[Face],
    sigma: &SpinConfig,
    bc: &BoundaryCondition,
) -> Result<Interiors> {
    let vol = sigma.volume();
    let dim = vol.dim();
    let ext = exterior_boundary(vol);
    let blocked: HashSet<&Face> = faces.iter().collect();
    let mut reached: HashSet<Site> = ext.iter().cloned().collect();
    let mut queue: VecDeque<Site> = ext.iter().cloned().collect();
    while let Some(x) = queue.pop_front() {
        for y in x.neighbors() {
            if reached.contains(&y) || !(vol.contains(&y) || ext.contains(&y)) {
                continue;
            }
            if blocked.contains(&Face::between(&x, &y)?) {
                continue;
            }
            reached.insert(y.clone());
            queue.push_back(y);
        }
    }
    let interior = Volume::region(dim, vol.iter().filter(|s| !reached.contains(*s)).cloned())?;

    let spin = |s: &Site| sigma.extended(s, bc);
    let mut outside_sum = 0i64;
    let mut sp = BTreeSet::new();
    for f in faces {
        let [a, b] = f.endpoints();
        let (ra, rb) = (reached.contains(&a), reached.contains(&b));
        if ra != rb {
            let out = if ra { &a } else { &b };
            outside_sum += i64::from(spin(out)?);
        }
        for e in [a, b] {
            if vol.contains(&e) && !interior.contains(&e) {
                sp.insert(e);
            }
        }
    }
    let label = if outside_sum > 0 {
        Spin::Plus
    } else if outside_sum < 0 {
        Spin::Minus
    } else {
        bc.exterior_sign(vol)
    };

    let mut plus = BTreeSet::new();
    let mut minus = BTreeSet::new();
    for comp in blocked_components(&interior, &blocked)? {
        // sign just inside: the component-side endpoint of bounding faces
        let mut inside = 0i64;
        for f in faces {
            let [a, b] = f.endpoints();
            match (comp.contains(&a), comp.contains(&b)) {
                (true, false) => inside += i64::from(spin(&a)?),
                (false, true) => inside += i64::from(spin(&b)?),
                _ => {}
            }
        }
        let sign = if inside > 0 {
            Spin::Plus
        } else if inside < 0 {
            Spin::Minus
        } else {
            label.flipped()
        };
        let target = if sign == Spin::Plus {
            &mut plus
        } else {
            &mut minus
        };
        target.extend(comp.iter().cloned());
    }
    let i_plus = Volume::region(dim, plus)?;
    let i_minus = Volume::region(dim, minus)?;
    let sp_sites = Volume::region(dim, sp)?;
    let v = sp_sites.union(&interior);
    Ok(Interiors {
        i_plus,
        i_minus,
        sp_sites,
        v,
        label,
    })
}

/// Nearest-neighbour components of `region` that do not cross `blocked`.
fn blocked_components(region: &Volume, blocked: &HashSet<&Face>) -> Result<Vec<Volume>> {
    let mut seen: HashSet<&Site> = HashSet::new();
    let mut out = Vec::new();
    for start in region.iter() {
        if !seen.insert(start) {
            continue;
        }
        let mut comp = vec![start.clone()];
        let mut queue = VecDeque::from([start.clone()]);
        while let Some(x) = queue.pop_front() {
            for y in x.neighbors() {
                let Some(i) = region.index_of(&y) else {
                    continue;
                };
                let yref = region.site(i);
                if seen.contains(yref) || blocked.contains(&Face::between(&x, &y)?) {
                    continue;
                }
                seen.insert(yref);
                comp.push(y.clone());
                queue.push_back(y);
            }
        }
        out.push(Volume::region(region.dim(), comp)?);
    }
    Ok(out)
}

/// `(I_+, I_−, V)` of `γ` relative to `σ`.
pub fn interiors(gamma: &Contour, sigma: &SpinConfig, bc: &BoundaryCondition) -> Result<Interiors> {
    compute_interiors(gamma.faces(), sigma, bc)
}

fn config_hash(sigma: &SpinConfig, bc: &BoundaryCondition) -> Result<u64> {
    let mut bytes: Vec<u8> = sigma.values().iter().map(|&v| v as u8).collect();
    bytes.extend(sigma.volume().content_hash().to_le_bytes());
    bytes.extend(serde_json::to_vec(bc)?);
    Ok(stable_hash64(&bytes))
}

/// Partition `∂σ` into contours.
///
/// Connected face components start as singleton groups. While some pair of
/// groups sits no further apart than `M · (min of their maximal component
/// diameters)^a`, the closest such pair (ties broken by smallest faces) is
/// merged. Groups with more than `2^r − 1` components are rejected.
pub fn extract_contours(
    sigma: &SpinConfig,
    bc: &BoundaryCondition,
    params: &MarParams,
) -> Result<ContourSet> {
    params.validate()?;
    check_shell(sigma.volume(), bc)?;
    let boundary = spin_boundary(sigma, bc)?;
    let volume = sigma.volume_arc().clone();
    let source_hash = config_hash(sigma, bc)?;
    if boundary.is_empty() {
        return Ok(ContourSet {
            contours: Vec::new(),
            source_hash,
            volume,
        });
    }
    let comps = face_components(&boundary);
    let diam: Vec<f64> = comps.iter().map(|c| faces_diameter(c)).collect();
    let k = comps.len();
    let mut dist = vec![0.0; k * k];
    for i in 0..k {
        for j in (i + 1)..k {
            let d = faces_distance(&comps[i], &comps[j]);
            dist[i * k + j] = d;
            dist[j * k + i] = d;
        }
    }
    // groups: member component indices (sorted) and their maximal diameter
    let mut groups: Vec<(Vec<usize>, f64)> = (0..k).map(|i| (vec![i], diam[i])).collect();
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for p in 0..groups.len() {
            for q in (p + 1)..groups.len() {
                let d = groups[p]
                    .0
                    .iter()
                    .flat_map(|&i| groups[q].0.iter().map(move |&j| (i, j)))
                    .map(|(i, j)| dist[i * k + j])
                    .fold(f64::INFINITY, f64::min);
                let bound = params.separation(groups[p].1.min(groups[q].1));
                if d <= bound && best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, p, q));
                }
            }
        }
        let Some((_, p, q)) = best else { break };
        let (members, dq) = groups.remove(q);
        groups[p].0.extend(members);
        groups[p].0.sort_unstable();
        groups[p].1 = groups[p].1.max(dq);
    }

    let mut contours = Vec::with_capacity(groups.len());
    for (members, _) in groups {
        if members.len() > params.max_components() {
            return Err(Error::NoValidPartition(format!(
                "a group needs {} components, more than 2^{} - 1",
                members.len(),
                params.r
            )));
        }
        let components: Vec<Vec<Face>> = members.iter().map(|&i| comps[i].clone()).collect();
        let faces: Vec<Face> = components.iter().flatten().cloned().collect();
        let reg = compute_interiors(&faces, sigma, bc)?;
        contours.push(Contour::from_parts(
            components,
            reg.label,
            reg.i_plus,
            reg.i_minus,
            reg.sp_sites,
        )?);
    }
    contours.sort_by(|a, b| a.faces.cmp(&b.faces));
    mark_external(&mut contours);
    Ok(ContourSet {
        contours,
        source_hash,
        volume,
    })
}

/// A contour is internal when every volume endpoint of its faces lies in the
/// interior of another contour.
fn mark_external(contours: &mut [Contour]) {
    let interiors: Vec<Volume> = contours.iter().map(Contour::interior).collect();
    let flags: Vec<bool> = (0..contours.len())
        .map(|i| {
            let ends: Vec<Site> = contours[i].touched_sites().into_iter().collect();
            !interiors
                .iter()
                .enumerate()
                .any(|(j, int)| j != i && !int.is_empty() && ends.iter().all(|s| int.contains(s)))
        })
        .collect();
    for (c, f) in contours.iter_mut().zip(flags) {
        c.external = f;
    }
}
