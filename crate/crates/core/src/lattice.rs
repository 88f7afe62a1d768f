//! Finite subsets of `Z^d`: sites, volumes, nearest-neighbour boundaries,
//! dyadic m-cubes, rectangles and axis projections.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng::stable_hash64;

/// A lattice point of `Z^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub Vec<i64>);

impl Site {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        Site(coords.into())
    }

    pub fn origin(dim: usize) -> Self {
        Site(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    /// `self + k e_axis`.
    pub fn shifted(&self, axis: usize, k: i64) -> Site {
        let mut c = self.0.clone();
        c[axis] += k;
        Site(c)
    }

    pub fn translated(&self, offset: &[i64]) -> Site {
        Site(self.0.iter().zip(offset).map(|(a, b)| a + b).collect())
    }

    /// The `2d` nearest neighbours.
    pub fn neighbors(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.dim()).flat_map(move |axis| [self.shifted(axis, -1), self.shifted(axis, 1)])
    }

    pub fn l1_distance(&self, other: &Site) -> i64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Norm used for `|x - y|` in couplings, cutoffs and diameters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    Euclidean,
    Sup,
    Taxicab,
}

impl Norm {
    pub fn of(self, v: impl IntoIterator<Item = f64>) -> f64 {
        match self {
            Norm::Euclidean => v.into_iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Sup => v.into_iter().fold(0.0, |m, x| m.max(x.abs())),
            Norm::Taxicab => v.into_iter().map(f64::abs).sum(),
        }
    }

    pub fn distance(self, a: &Site, b: &Site) -> f64 {
        self.of(a.0.iter().zip(&b.0).map(|(x, y)| (x - y) as f64))
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Norm::Euclidean => 0,
            Norm::Sup => 1,
            Norm::Taxicab => 2,
        }
    }
}

/// A finite, lexicographically ordered set of sites of a common dimension.
///
/// General-purpose regions (interiors, flip sets) may be empty; use
/// [`Volume::new`] where a non-empty simulation volume is required.
#[derive(Clone, Debug)]
pub struct Volume {
    dim: usize,
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
}

impl PartialEq for Volume {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.sites == other.sites
    }
}

impl Eq for Volume {}

impl Volume {
    /// A non-empty volume without duplicates; the dimension is inferred.
    pub fn new(sites: Vec<Site>) -> Result<Self> {
        let dim = sites
            .first()
            .map(Site::dim)
            .ok_or_else(|| Error::InvalidVolume("volume must be non-empty".into()))?;
        if dim == 0 {
            return Err(Error::InvalidVolume("dimension must be at least 1".into()));
        }
        let n = sites.len();
        let vol = Self::region(dim, sites)?;
        if vol.len() != n {
            return Err(Error::InvalidVolume("duplicate sites".into()));
        }
        Ok(vol)
    }

    /// A possibly empty region; duplicates are merged.
    pub fn region(dim: usize, sites: impl IntoIterator<Item = Site>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for s in sites {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.dim(),
                });
            }
            set.insert(s);
        }
        Ok(Self::from_set(dim, set))
    }

    pub fn empty(dim: usize) -> Self {
        Self::from_set(dim, BTreeSet::new())
    }

    pub(crate) fn from_set(dim: usize, set: BTreeSet<Site>) -> Self {
        let sites: Vec<Site> = set.into_iter().collect();
        let index = sites
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, s)| (s, i))
            .collect();
        Volume { dim, sites, index }
    }

    /// The box `anchor + ∏ [0, side_i)`.
    pub fn boxed(sides: &[usize], anchor: &Site) -> Result<Self> {
        if sides.is_empty() || sides.contains(&0) {
            return Err(Error::InvalidVolume(format!("bad box sides {sides:?}")));
        }
        if anchor.dim() != sides.len() {
            return Err(Error::DimensionMismatch {
                expected: sides.len(),
                found: anchor.dim(),
            });
        }
        let mut set = BTreeSet::new();
        let mut k = vec![0usize; sides.len()];
        loop {
            set.insert(Site(
                anchor
                    .0
                    .iter()
                    .zip(&k)
                    .map(|(a, &o)| a + o as i64)
                    .collect(),
            ));
            let mut axis = sides.len();
            loop {
                if axis == 0 {
                    return Ok(Self::from_set(sides.len(), set));
                }
                axis -= 1;
                k[axis] += 1;
                if k[axis] < sides[axis] {
                    break;
                }
                k[axis] = 0;
            }
        }
    }

    /// A box of the given sides containing the origin as centrally as
    /// possible: axis `i` spans `[-(L-1)/2, L-1-(L-1)/2]`.
    pub fn centered_box(sides: &[usize]) -> Result<Self> {
        let anchor = Site(
            sides
                .iter()
                .map(|&l| -((l.max(1) as i64 - 1) / 2))
                .collect(),
        );
        Self::boxed(sides, &anchor)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Site> {
        self.sites.iter()
    }

    pub fn contains(&self, s: &Site) -> bool {
        self.index.contains_key(s)
    }

    pub fn index_of(&self, s: &Site) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn site(&self, i: usize) -> &Site {
        &self.sites[i]
    }

    pub fn is_subset(&self, other: &Volume) -> bool {
        self.sites.iter().all(|s| other.contains(s))
    }

    pub fn union(&self, other: &Volume) -> Volume {
        let set = self
            .sites
            .iter()
            .chain(other.sites.iter())
            .cloned()
            .collect();
        Self::from_set(self.dim, set)
    }

    pub fn intersection(&self, other: &Volume) -> Volume {
        let set = self
            .sites
            .iter()
            .filter(|s| other.contains(s))
            .cloned()
            .collect();
        Self::from_set(self.dim, set)
    }

    pub fn difference(&self, other: &Volume) -> Volume {
        let set = self
            .sites
            .iter()
            .filter(|s| !other.contains(s))
            .cloned()
            .collect();
        Self::from_set(self.dim, set)
    }

    pub fn symmetric_difference(&self, other: &Volume) -> Volume {
        self.difference(other).union(&other.difference(self))
    }

    pub fn translated(&self, offset: &[i64]) -> Volume {
        Self::from_set(
            self.dim,
            self.sites.iter().map(|s| s.translated(offset)).collect(),
        )
    }

    /// Stable content hash (SHA-256 prefix of the coordinate list).
    pub fn content_hash(&self) -> u64 {
        let mut buf = Vec::with_capacity(8 * self.dim * self.len() + 8);
        buf.extend_from_slice(&(self.dim as u64).to_le_bytes());
        for s in &self.sites {
            for c in &s.0 {
                buf.extend_from_slice(&c.to_le_bytes());
            }
        }
        stable_hash64(&buf)
    }

    /// Per-axis `(min, max)` coordinates; `None` for an empty region.
    pub fn bounding_box(&self) -> Option<Vec<(i64, i64)>> {
        let first = self.sites.first()?;
        let mut bb: Vec<(i64, i64)> = first.0.iter().map(|&c| (c, c)).collect();
        for s in &self.sites {
            for (b, &c) in bb.iter_mut().zip(&s.0) {
                b.0 = b.0.min(c);
                b.1 = b.1.max(c);
            }
        }
        Some(bb)
    }

    /// Connected components under nearest-neighbour adjacency.
    pub fn components(&self) -> Vec<Volume> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = BTreeSet::new();
            let mut queue = VecDeque::from([start]);
            while let Some(i) = queue.pop_front() {
                comp.insert(self.sites[i].clone());
                for nb in self.sites[i].neighbors() {
                    if let Some(j) = self.index_of(&nb) {
                        if !seen[j] {
                            seen[j] = true;
                            queue.push_back(j);
                        }
                    }
                }
            }
            out.push(Self::from_set(self.dim, comp));
        }
        out
    }
}

impl Serialize for Volume {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.sites.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Volume {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let sites = Vec::<Site>::deserialize(deserializer)?;
        Volume::new(sites).map_err(serde::de::Error::custom)
    }
}

impl<'a> IntoIterator for &'a Volume {
    type Item = &'a Site;
    type IntoIter = std::slice::Iter<'a, Site>;
    fn into_iter(self) -> Self::IntoIter {
        self.sites.iter()
    }
}

/// Identifies the m-cube `C_m(x)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CubeIndex {
    pub center: Site,
    pub scale: u32,
}

impl CubeIndex {
    pub fn new(center: Site, scale: u32) -> Self {
        CubeIndex { center, scale }
    }

    /// Per-axis inclusive coordinate bounds of the cube.
    pub fn bounds(&self) -> Vec<(i64, i64)> {
        if self.scale == 0 {
            return self.center.0.iter().map(|&c| (c, c)).collect();
        }
        let side = 1i64 << self.scale;
        let half = side / 2;
        self.center
            .0
            .iter()
            .map(|&c| (side * c - half, side * c + half))
            .collect()
    }

    pub fn contains(&self, s: &Site) -> bool {
        self.bounds()
            .iter()
            .zip(&s.0)
            .all(|(&(lo, hi), &c)| lo <= c && c <= hi)
    }

    /// Number of lattice points, `(2^m + 1)^d` for `m >= 1`.
    pub fn size(&self) -> usize {
        self.bounds()
            .iter()
            .map(|(lo, hi)| (hi - lo + 1) as usize)
            .product()
    }

    pub fn sites(&self) -> Volume {
        m_cube(&self.center, self.scale)
    }

    /// All cube indices at `scale` whose cube contains `s`.
    pub fn containing(s: &Site, scale: u32) -> Vec<CubeIndex> {
        if scale == 0 {
            return vec![CubeIndex::new(s.clone(), 0)];
        }
        let side = 1i64 << scale;
        let half = side / 2;
        // side*x - half <= c <= side*x + half  <=>  (c-half)/side <= x <= (c+half)/side
        let ranges: Vec<(i64, i64)> =
            s.0.iter()
                .map(|&c| {
                    (
                        (c - half).div_euclid(side) + i64::from((c - half).rem_euclid(side) != 0),
                        (c + half).div_euclid(side),
                    )
                })
                .collect();
        let mut out = Vec::new();
        let mut cur: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        loop {
            out.push(CubeIndex::new(Site(cur.clone()), scale));
            let mut axis = ranges.len();
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                cur[axis] += 1;
                if cur[axis] <= ranges[axis].1 {
                    break;
                }
                cur[axis] = ranges[axis].0;
            }
        }
    }
}

/// `C_m(x) = ∏_i [2^m x_i − 2^{m−1}, 2^m x_i + 2^{m−1}] ∩ Z^d`, and `{x}` for
/// `m = 0`.
pub fn m_cube(x: &Site, m: u32) -> Volume {
    let idx = CubeIndex::new(x.clone(), m);
    let bounds = idx.bounds();
    let sides: Vec<usize> = bounds
        .iter()
        .map(|(lo, hi)| (hi - lo + 1) as usize)
        .collect();
    let anchor = Site(bounds.iter().map(|b| b.0).collect());
    Volume::boxed(&sides, &anchor).expect("cube bounds are non-empty")
}

/// `∂_ex Λ = {x ∉ Λ : ∃ y ∈ Λ, |x − y| = 1}`.
pub fn exterior_boundary(vol: &Volume) -> Volume {
    let set = vol
        .iter()
        .flat_map(|s| s.neighbors().collect::<Vec<_>>())
        .filter(|n| !vol.contains(n))
        .collect();
    Volume::from_set(vol.dim(), set)
}

/// `∂_in Λ = {x ∈ Λ : ∃ y ∉ Λ, |x − y| = 1}`.
pub fn interior_boundary(vol: &Volume) -> Volume {
    let set = vol
        .iter()
        .filter(|s| s.neighbors().any(|n| !vol.contains(&n)))
        .cloned()
        .collect();
    Volume::from_set(vol.dim(), set)
}

/// Diameter of a site set under `norm` (0 for fewer than two sites).
pub fn diameter(sites: &[Site], norm: Norm) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in sites.iter().enumerate() {
        for b in &sites[i + 1..] {
            best = best.max(norm.distance(a, b));
        }
    }
    best
}

/// The rectangle `anchor + ∏_i [0, r_i)`; the anchor plays the role of the
/// `(1, …, 1)` corner.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rectangle {
    pub sides: Vec<usize>,
    pub anchor: Site,
}

impl Rectangle {
    pub fn new(sides: Vec<usize>, anchor: Site) -> Result<Self> {
        if sides.is_empty() || sides.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "rectangle sides must be >= 1, got {sides:?}"
            )));
        }
        if sides.len() != anchor.dim() {
            return Err(Error::DimensionMismatch {
                expected: sides.len(),
                found: anchor.dim(),
            });
        }
        Ok(Rectangle { sides, anchor })
    }

    pub fn dim(&self) -> usize {
        self.sides.len()
    }

    pub fn sites(&self) -> Volume {
        Volume::boxed(&self.sides, &self.anchor).expect("validated sides")
    }

    /// The face `ℛ_i = {x ∈ ℛ : x_i = anchor_i}`.
    pub fn face(&self, axis: usize) -> Volume {
        let mut sides = self.sides.clone();
        sides[axis] = 1;
        Volume::boxed(&sides, &self.anchor).expect("validated sides")
    }

    /// `l^i_x = {x + k e_i : 1 ≤ k ≤ r_i}`.
    pub fn line(&self, x: &Site, axis: usize) -> Vec<Site> {
        (1..=self.sides[axis] as i64)
            .map(|k| x.shifted(axis, k))
            .collect()
    }
}

/// Projection of a set onto one face of a rectangle.
#[derive(Clone, Debug, Serialize)]
pub struct AxisProjection {
    pub axis: usize,
    pub all: Volume,
    pub good: Volume,
    pub bad: Volume,
    /// `|∂_ex A ∩ ℛ|`
    pub exterior_in_rect: usize,
    /// `|P^G_i| ≤ |∂_ex A ∩ ℛ|`
    pub good_bound_holds: bool,
    /// Smallest `C` with `|P^B_i| ≤ C |ℛ_d|`.
    pub bad_constant: f64,
}

/// Projections `P_i`, good points `P^G_i` (lines that also meet `A \ ℛ`) and
/// bad points `P^B_i = P_i \ P^G_i` along `axis` (0-based).
pub fn projections(a: &Volume, rect: &Rectangle, axis: usize) -> Result<AxisProjection> {
    let dim = rect.dim();
    if axis >= dim {
        return Err(Error::AxisOutOfRange { axis, dim });
    }
    if !a.is_empty() && a.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: a.dim(),
        });
    }
    let rsites = rect.sites();
    let mut all = BTreeSet::new();
    let mut good = BTreeSet::new();
    for x in rect.face(axis).iter() {
        let line = rect.line(x, axis);
        if line.iter().any(|p| a.contains(p)) {
            all.insert(x.clone());
            if line.iter().any(|p| a.contains(p) && !rsites.contains(p)) {
                good.insert(x.clone());
            }
        }
    }
    let all = Volume::from_set(dim, all);
    let good = Volume::from_set(dim, good);
    let bad = all.difference(&good);
    let exterior_in_rect = exterior_boundary(a).intersection(&rsites).len();
    let last_face = rect.face(dim - 1).len();
    Ok(AxisProjection {
        axis,
        good_bound_holds: good.len() <= exterior_in_rect,
        bad_constant: bad.len() as f64 / last_face as f64,
        exterior_in_rect,
        all,
        good,
        bad,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectionSummary {
    pub per_axis: Vec<AxisProjection>,
    /// `Σ_i |P_i|`
    pub total: usize,
    pub exterior_in_rect: usize,
    /// Smallest `c` with `Σ_i |P_i| ≤ c |∂_ex A ∩ ℛ|` (infinite when the
    /// right-hand side vanishes but the left does not).
    pub sum_constant: f64,
}

pub fn projection_summary(a: &Volume, rect: &Rectangle) -> Result<ProjectionSummary> {
    let per_axis = (0..rect.dim())
        .map(|i| projections(a, rect, i))
        .collect::<Result<Vec<_>>>()?;
    let total: usize = per_axis.iter().map(|p| p.all.len()).sum();
    let exterior_in_rect = exterior_boundary(a).intersection(&rect.sites()).len();
    let sum_constant = match (total, exterior_in_rect) {
        (0, _) => 0.0,
        (_, 0) => f64::INFINITY,
        (t, e) => t as f64 / e as f64,
    };
    Ok(ProjectionSummary {
        per_axis,
        total,
        exterior_in_rect,
        sum_constant,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IsoperimetricCheck {
    /// `|Λ|^{1 − 1/d}`
    pub lhs: f64,
    /// `|∂_in Λ|`
    pub rhs: f64,
    pub holds: bool,
}

pub fn isoperimetric_check(vol: &Volume) -> Result<IsoperimetricCheck> {
    if vol.is_empty() {
        return Err(Error::InvalidVolume(
            "isoperimetric check needs a non-empty set".into(),
        ));
    }
    let d = vol.dim() as f64;
    let lhs = (vol.len() as f64).powf(1.0 - 1.0 / d);
    let rhs = interior_boundary(vol).len() as f64;
    Ok(IsoperimetricCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(c: &[i64]) -> Site {
        Site::new(c.to_vec())
    }

    fn vol(cs: &[&[i64]]) -> Volume {
        Volume::new(cs.iter().map(|c| s(c)).collect()).unwrap()
    }

    #[test]
    fn m_cube_examples() {
        assert_eq!(m_cube(&s(&[0]), 0), vol(&[&[0]]));
        assert_eq!(m_cube(&s(&[0, 0]), 0).len(), 1);
        assert_eq!(m_cube(&s(&[0]), 1), vol(&[&[-1], &[0], &[1]]));
        let c = m_cube(&s(&[1, 0]), 2);
        assert_eq!(c.len(), 25);
        assert_eq!(c.bounding_box().unwrap(), vec![(2, 6), (-2, 2)]);
    }

    #[test]
    fn m_cube_counts() {
        for d in 1..=3usize {
            for m in 1..=3u32 {
                let c = m_cube(&Site::origin(d), m);
                assert_eq!(c.len(), ((1usize << m) + 1).pow(d as u32));
            }
        }
    }

    #[test]
    fn containing_cubes_agree_with_membership() {
        for m in 0..=3u32 {
            for x in -9..=9i64 {
                for y in -5..=5i64 {
                    let p = s(&[x, y]);
                    let found = CubeIndex::containing(&p, m);
                    assert!(!found.is_empty());
                    for c in &found {
                        assert!(c.contains(&p), "{c:?} should contain {p}");
                    }
                    // brute force over nearby centers
                    let brute: Vec<_> = (-12..=12)
                        .flat_map(|a| (-6..=6).map(move |b| CubeIndex::new(s(&[a, b]), m)))
                        .filter(|c| c.contains(&p))
                        .collect();
                    assert_eq!(brute.len(), found.len());
                }
            }
        }
    }

    #[test]
    fn exterior_boundary_examples() {
        let e = exterior_boundary(&vol(&[&[0, 0]]));
        assert_eq!(e, vol(&[&[-1, 0], &[1, 0], &[0, -1], &[0, 1]]));
        assert_eq!(exterior_boundary(&vol(&[&[0], &[1]])), vol(&[&[-1], &[2]]));
        let b = Volume::boxed(&[2, 2], &s(&[0, 0])).unwrap();
        assert_eq!(exterior_boundary(&b).len(), 8);
    }

    #[test]
    fn interior_boundary_examples() {
        let b2 = Volume::boxed(&[2, 2], &s(&[0, 0])).unwrap();
        assert_eq!(interior_boundary(&b2), b2);
        let b4 = Volume::boxed(&[4, 4], &s(&[0, 0])).unwrap();
        assert_eq!(interior_boundary(&b4).len(), 12);
        let line = Volume::boxed(&[6], &s(&[0])).unwrap();
        assert_eq!(interior_boundary(&line), vol(&[&[0], &[5]]));
    }

    #[test]
    fn projection_examples() {
        let rect = Rectangle::new(vec![3, 3], s(&[1, 1])).unwrap();
        let one = vol(&[&[2, 2]]);
        let p = projections(&one, &rect, 0).unwrap();
        assert_eq!(p.all.len(), 1);

        let empty = Volume::empty(2);
        for axis in 0..2 {
            let p = projections(&empty, &rect, axis).unwrap();
            assert!(p.all.is_empty() && p.good.is_empty() && p.bad.is_empty());
        }

        let full = rect.sites();
        let p = projections(&full, &rect, 0).unwrap();
        assert_eq!(p.all.len(), 3);
        assert!(matches!(
            projections(&full, &rect, 2),
            Err(Error::AxisOutOfRange { .. })
        ));
    }

    #[test]
    fn good_points_need_set_beyond_rectangle() {
        let rect = Rectangle::new(vec![3, 3], s(&[1, 1])).unwrap();
        // a row that sticks out through the far face along axis 0
        let a = vol(&[&[2, 2], &[3, 2], &[4, 2]]);
        let p = projections(&a, &rect, 0).unwrap();
        assert_eq!(p.good, vol(&[&[1, 2]]));
        assert!(p.bad.is_empty());
    }

    #[test]
    fn isoperimetric_examples() {
        let b2 = Volume::boxed(&[2, 2], &s(&[0, 0])).unwrap();
        let c = isoperimetric_check(&b2).unwrap();
        assert_eq!((c.lhs, c.rhs, c.holds), (2.0, 4.0, true));
        let c = isoperimetric_check(&vol(&[&[0, 0]])).unwrap();
        assert_eq!((c.lhs, c.rhs, c.holds), (1.0, 1.0, true));
        assert!(isoperimetric_check(&Volume::empty(2)).is_err());
    }

    #[test]
    fn volume_validation_and_json() {
        assert!(Volume::new(vec![]).is_err());
        assert!(Volume::new(vec![s(&[0]), s(&[0])]).is_err());
        assert!(Volume::new(vec![s(&[0]), s(&[0, 1])]).is_err());
        let v = vol(&[&[1, 0], &[0, 0]]);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, "[[0,0],[1,0]]");
        let back: Volume = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<Volume>("[[0,0],[1]]").is_err());
        assert!(serde_json::from_str::<Volume>("[]").is_err());
    }

    #[test]
    fn centered_box_contains_origin() {
        for l in 1..=8usize {
            let b = Volume::centered_box(&[l, l]).unwrap();
            assert!(b.contains(&Site::origin(2)));
            assert_eq!(b.len(), l * l);
        }
        let b = Volume::centered_box(&[4, 4]).unwrap();
        assert_eq!(b.bounding_box().unwrap(), vec![(-1, 2), (-1, 2)]);
    }
}
