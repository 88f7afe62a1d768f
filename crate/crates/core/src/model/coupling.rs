use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Norm, Site, Volume};

use super::BoundaryCondition;

/// Parameters of `J_{xy} = J |x − y|^{−α}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    pub j: f64,
    pub alpha: f64,
    pub dim: usize,
    /// Truncation radius for sums over the complement of a volume.
    pub r_cut: f64,
    #[serde(default)]
    pub norm: Norm,
}

impl CouplingSpec {
    pub fn new(j: f64, alpha: f64, dim: usize, r_cut: f64) -> Result<Self> {
        let spec = CouplingSpec {
            j,
            alpha,
            dim,
            r_cut,
            norm: Norm::Euclidean,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_norm(mut self, norm: Norm) -> Self {
        self.norm = norm;
        self
    }

    pub fn with_r_cut(mut self, r_cut: f64) -> Result<Self> {
        self.r_cut = r_cut;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        if !(self.j > 0.0 && self.j.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "J must be > 0, got {}",
                self.j
            )));
        }
        if !(self.alpha > self.dim as f64 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "alpha must exceed the dimension {}, got {}",
                self.dim, self.alpha
            )));
        }
        if !(self.r_cut >= 1.0 && self.r_cut.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "r_cut must be >= 1, got {}",
                self.r_cut
            )));
        }
        Ok(())
    }

    /// `J r^{−α}` for `r > 0`.
    pub fn at_distance(&self, r: f64) -> f64 {
        self.j * r.powf(-self.alpha)
    }

    /// Integer offsets `o ≠ 0` with `|o| ≤ r_cut`, paired with `J_{0,o}`.
    pub fn shell_kernel(&self) -> Vec<(Vec<i64>, f64)> {
        let reach = self.r_cut.floor() as i64;
        lattice_offsets(self.dim, reach)
            .filter_map(|o| {
                let r = self.norm.of(o.iter().map(|&c| c as f64));
                (r > 0.0 && r <= self.r_cut).then(|| (o, self.at_distance(r)))
            })
            .collect()
    }

    /// Integral-comparison estimate of `Σ_{|y| > r_cut} J_{0,y}`:
    /// `J ω_d r_cut^{d−α} / (α − d)`.
    pub fn tail_bound(&self) -> f64 {
        let d = self.dim as f64;
        self.j * sphere_area(self.dim) * self.r_cut.powf(d - self.alpha) / (self.alpha - d)
    }
}

/// `J_{xy}`; zero on the diagonal.
pub fn coupling(x: &Site, y: &Site, spec: &CouplingSpec) -> f64 {
    if x == y {
        return 0.0;
    }
    spec.at_distance(spec.norm.distance(x, y))
}

pub(crate) fn lattice_offsets(dim: usize, reach: i64) -> impl Iterator<Item = Vec<i64>> {
    let side = (2 * reach + 1) as usize;
    let total = side.pow(dim as u32);
    (0..total).map(move |mut k| {
        let mut o = vec![0i64; dim];
        for c in o.iter_mut().rev() {
            *c = (k % side) as i64 - reach;
            k /= side;
        }
        o
    })
}

/// `Γ(k/2)` for positive integer `k`.
fn gamma_half(k: u32) -> f64 {
    let mut g = if k % 2 == 0 {
        1.0
    } else {
        std::f64::consts::PI.sqrt()
    };
    let mut x = if k % 2 == 0 { 1.0 } else { 0.5 };
    while x < k as f64 / 2.0 - 1e-9 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Surface area of the unit sphere in `R^d`.
fn sphere_area(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half(d as u32)
}

/// Boundary field `b_x` with its truncation-tail estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryField {
    pub value: f64,
    /// Magnitude bound on the omitted `|y − x| > r_cut` contribution for a
    /// uniform boundary condition.
    pub tail_bound: f64,
}

/// `b_x = Σ_{y ∉ Λ, |y − x| ≤ r_cut} J_{xy} η_y`.
pub fn boundary_field(
    x: &Site,
    vol: &Volume,
    bc: &BoundaryCondition,
    spec: &CouplingSpec,
) -> Result<BoundaryField> {
    if !vol.contains(x) {
        return Err(Error::SiteOutsideVolume(x.to_string()));
    }
    let kernel = spec.shell_kernel();
    Ok(BoundaryField {
        value: boundary_field_with_kernel(x, vol, bc, &kernel)?,
        tail_bound: spec.tail_bound(),
    })
}

pub(crate) fn boundary_field_with_kernel(
    x: &Site,
    vol: &Volume,
    bc: &BoundaryCondition,
    kernel: &[(Vec<i64>, f64)],
) -> Result<f64> {
    let mut total = 0.0;
    for (o, jv) in kernel {
        let y = x.translated(o);
        if !vol.contains(&y) {
            total += jv * f64::from(bc.spin_at(&y)?);
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SummabilityVerdict {
    ConvergesBelow,
    ConvergesAbove,
    Diverging,
}

#[derive(Clone, Debug, Serialize)]
pub struct SummabilityReport {
    /// `(R, Σ_{1 < |x| ≤ R} |x_1| J_{0,x})`
    pub partial_sums: Vec<(f64, f64)>,
    /// `J_{0,e_1}`
    pub target: f64,
    /// Exponent `d + 1 − α` of the tail integral `∫_R^∞ r^{d−α} dr`.
    pub tail_exponent: f64,
    /// Integral tail beyond the largest radius; `None` when it diverges.
    pub tail_estimate: Option<f64>,
    pub verdict: SummabilityVerdict,
}

/// Partial sums of `Σ_{|x|>1} |x_1| J_{0,x}` against `J_{0,e_1}`.
pub fn summability_diagnostic(spec: &CouplingSpec, radii: &[f64]) -> Result<SummabilityReport> {
    spec.validate()?;
    if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) || radii[0] <= 1.0 {
        return Err(Error::InvalidParameter(
            "radius grid must be strictly increasing and start above 1".into(),
        ));
    }
    let rmax = *radii.last().unwrap();
    let mut terms: Vec<(f64, f64)> = lattice_offsets(spec.dim, rmax.floor() as i64)
        .filter_map(|o| {
            let r = spec.norm.of(o.iter().map(|&c| c as f64));
            (r > 1.0 && r <= rmax).then(|| (r, o[0].unsigned_abs() as f64 * spec.at_distance(r)))
        })
        .collect();
    terms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut partial_sums = Vec::with_capacity(radii.len());
    let mut acc = 0.0;
    let mut it = terms.iter().peekable();
    for &r in radii {
        while let Some(&&(tr, v)) = it.peek() {
            if tr > r {
                break;
            }
            acc += v;
            it.next();
        }
        partial_sums.push((r, acc));
    }
    let d = spec.dim as f64;
    let tail_exponent = d + 1.0 - spec.alpha;
    // ω_d · E|cos θ| = 2 π^{(d−1)/2} / Γ((d+1)/2)
    let shell_const =
        2.0 * std::f64::consts::PI.powf((d - 1.0) / 2.0) / gamma_half(spec.dim as u32 + 1);
    let target = spec.j;
    let (tail_estimate, verdict) = if tail_exponent >= 0.0 {
        (None, SummabilityVerdict::Diverging)
    } else {
        let tail = spec.j * shell_const * rmax.powf(tail_exponent) / (-tail_exponent);
        let total = acc + tail;
        let v = if total < target {
            SummabilityVerdict::ConvergesBelow
        } else {
            SummabilityVerdict::ConvergesAbove
        };
        (Some(tail), v)
    };
    Ok(SummabilityReport {
        partial_sums,
        target,
        tail_exponent,
        tail_estimate,
        verdict,
    })
}

/// Dense `N × N` matrix of bulk couplings for a fixed volume.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    data: Vec<f64>,
    key: CouplingKey,
}

/// Cache key identifying the inputs a coupling matrix was built from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingKey {
    pub dim: u32,
    pub alpha: f64,
    pub j: f64,
    pub r_cut: f64,
    pub norm: Norm,
    pub volume_hash: u64,
}

const CACHE_MAGIC: &[u8; 4] = b"LRCM";
const CACHE_VERSION: u32 = 1;

impl CouplingMatrix {
    pub fn build(vol: &Volume, spec: &CouplingSpec) -> Result<Self> {
        spec.validate()?;
        if vol.dim() != spec.dim {
            return Err(Error::DimensionMismatch {
                expected: spec.dim,
                found: vol.dim(),
            });
        }
        let n = vol.len();
        let sites = vol.sites();
        let data: Vec<f64> = (0..n)
            .into_par_iter()
            .flat_map_iter(|i| (0..n).map(move |j| coupling(&sites[i], &sites[j], spec)))
            .collect();
        Ok(CouplingMatrix {
            n,
            data,
            key: Self::key_for(vol, spec),
        })
    }

    /// Matrix from explicit row-major entries; must be symmetric with a zero
    /// diagonal.
    pub fn from_dense(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DomainMismatch(format!(
                "{} entries for a {n}x{n} matrix",
                data.len()
            )));
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(Error::InvalidParameter(
                    "coupling diagonal must vanish".into(),
                ));
            }
            for j in 0..i {
                if data[i * n + j] != data[j * n + i] {
                    return Err(Error::InvalidParameter(
                        "coupling matrix must be symmetric".into(),
                    ));
                }
            }
        }
        Ok(CouplingMatrix {
            n,
            data,
            key: CouplingKey {
                dim: 0,
                alpha: 0.0,
                j: 0.0,
                r_cut: 0.0,
                norm: Norm::Euclidean,
                volume_hash: 0,
            },
        })
    }

    pub fn key_for(vol: &Volume, spec: &CouplingSpec) -> CouplingKey {
        CouplingKey {
            dim: spec.dim as u32,
            alpha: spec.alpha,
            j: spec.j,
            r_cut: spec.r_cut,
            norm: spec.norm,
            volume_hash: vol.content_hash(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn key(&self) -> &CouplingKey {
        &self.key
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Write the matrix as little-endian binary with its key header.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&self.key.dim.to_le_bytes())?;
        w.write_all(&[self.key.norm.as_u8()])?;
        for v in [self.key.alpha, self.key.j, self.key.r_cut] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.key.volume_hash.to_le_bytes())?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Load a cached matrix, rejecting it unless its key matches `expected`.
    pub fn load(path: &Path, expected: &CouplingKey) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Inconsistent(
                "not a coupling-matrix cache file".into(),
            ));
        }
        let version = read_u32(&mut r)?;
        if version != CACHE_VERSION {
            return Err(Error::Inconsistent(format!(
                "unsupported cache version {version}"
            )));
        }
        let dim = read_u32(&mut r)?;
        let mut norm = [0u8; 1];
        r.read_exact(&mut norm)?;
        let alpha = read_f64(&mut r)?;
        let j = read_f64(&mut r)?;
        let r_cut = read_f64(&mut r)?;
        let volume_hash = read_u64(&mut r)?;
        let n = read_u64(&mut r)? as usize;
        let found = CouplingKey {
            dim,
            alpha,
            j,
            r_cut,
            norm: match norm[0] {
                0 => Norm::Euclidean,
                1 => Norm::Sup,
                2 => Norm::Taxicab,
                other => return Err(Error::Inconsistent(format!("bad norm tag {other}"))),
            },
            volume_hash,
        };
        if found != *expected {
            return Err(Error::Inconsistent(format!(
                "cache key mismatch: expected {expected:?}, found {found:?}"
            )));
        }
        let mut data = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            data.push(read_f64(&mut r)?);
        }
        Ok(CouplingMatrix {
            n,
            data,
            key: found,
        })
    }

    /// Load from `path` when a matching cache exists, otherwise build and
    /// write it.
    pub fn cached(path: &Path, vol: &Volume, spec: &CouplingSpec) -> Result<Self> {
        let key = Self::key_for(vol, spec);
        if path.exists() {
            if let Ok(m) = Self::load(path, &key) {
                if m.len() == vol.len() {
                    return Ok(m);
                }
            }
        }
        let m = Self::build(vol, spec)?;
        m.save(path)?;
        Ok(m)
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}
