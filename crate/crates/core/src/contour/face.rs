use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{exterior_boundary, Site};
use crate::model::{BoundaryCondition, SpinConfig};

/// The dual face between `lo` and `lo + e_axis`.
///
/// `lo` is the lexicographically smaller endpoint, which makes the pair a
/// canonical key.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Face {
    pub lo: Site,
    pub axis: usize,
}

impl Face {
    pub fn new(lo: Site, axis: usize) -> Self {
        Face { lo, axis }
    }

    /// The face separating two nearest neighbours.
    pub fn between(x: &Site, y: &Site) -> Result<Face> {
        if x.dim() != y.dim() || x.l1_distance(y) != 1 {
            return Err(Error::InvalidParameter(format!(
                "{x} and {y} are not nearest neighbours"
            )));
        }
        let axis = (0..x.dim())
            .find(|&i| x.0[i] != y.0[i])
            .expect("distinct sites");
        let lo = if x < y { x.clone() } else { y.clone() };
        Ok(Face { lo, axis })
    }

    pub fn hi(&self) -> Site {
        self.lo.shifted(self.axis, 1)
    }

    pub fn endpoints(&self) -> [Site; 2] {
        [self.lo.clone(), self.hi()]
    }

    /// Twice the midpoint, so it stays on the integer lattice.
    pub fn doubled_midpoint(&self) -> Vec<i64> {
        let mut m: Vec<i64> = self.lo.0.iter().map(|c| 2 * c).collect();
        m[self.axis] += 1;
        m
    }

    /// Inverse of [`Face::doubled_midpoint`]; `None` unless exactly one
    /// coordinate is odd.
    pub fn from_doubled_midpoint(m: &[i64]) -> Option<Face> {
        let mut odd = m.iter().enumerate().filter(|(_, c)| c.rem_euclid(2) == 1);
        let (axis, _) = odd.next()?;
        if odd.next().is_some() {
            return None;
        }
        let lo = Site(
            m.iter()
                .enumerate()
                .map(|(i, &c)| if i == axis { (c - 1) / 2 } else { c / 2 })
                .collect(),
        );
        Some(Face { lo, axis })
    }

    /// Faces sharing a codimension-two cell with this one.
    pub fn adjacent(&self) -> Vec<Face> {
        let m = self.doubled_midpoint();
        let d = m.len();
        let mut out = Vec::with_capacity(6 * d);
        for b in (0..d).filter(|&b| b != self.axis) {
            for sb in [-1i64, 1] {
                let mut p = m.clone();
                p[b] += 2 * sb;
                out.extend(Face::from_doubled_midpoint(&p));
                for sa in [-1i64, 1] {
                    let mut q = m.clone();
                    q[self.axis] += sa;
                    q[b] += sb;
                    out.extend(Face::from_doubled_midpoint(&q));
                }
            }
        }
        out
    }

    /// ℓ¹ distance between midpoints.
    pub fn midpoint_distance(&self, other: &Face) -> f64 {
        let a = self.doubled_midpoint();
        let b = other.doubled_midpoint();
        a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<i64>() as f64 / 2.0
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}", self.lo, self.hi())
    }
}

/// `∂σ`: nearest-neighbour faces across which the extended configuration
/// (σ in the volume, η outside) changes sign.
pub fn spin_boundary(sigma: &SpinConfig, bc: &BoundaryCondition) -> Result<BTreeSet<Face>> {
    let vol = sigma.volume();
    let mut faces = BTreeSet::new();
    for (i, x) in vol.iter().enumerate() {
        let sx = sigma.value_at(i);
        for axis in 0..vol.dim() {
            for step in [-1i64, 1] {
                let y = x.shifted(axis, step);
                let sy = match vol.index_of(&y) {
                    Some(j) => {
                        if j < i {
                            continue;
                        }
                        sigma.value_at(j)
                    }
                    None => bc.spin_at(&y)?,
                };
                if sx != sy {
                    faces.insert(Face::between(x, &y)?);
                }
            }
        }
    }
    Ok(faces)
}

/// Checks that an explicit boundary condition covers `∂_ex Λ`.
pub(crate) fn check_shell(vol: &crate::lattice::Volume, bc: &BoundaryCondition) -> Result<()> {
    if let BoundaryCondition::Explicit(_) = bc {
        for y in exterior_boundary(vol).iter() {
            bc.spin_at(y)?;
        }
    }
    Ok(())
}
