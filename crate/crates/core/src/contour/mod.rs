//! Spin boundaries, contours, interiors, the erase map `τ_Γ`, origin census
//! and cube covers.

mod census;
mod extract;
mod face;
mod flip;
mod metrics;

pub use census::{
    census, enumerate_contours_in_box, enumerate_contours_origin, origin_box, CensusRow, OriginRule,
};
pub use extract::{
    compute_interiors, extract_contours, face_components, interiors, Contour, ContourSet,
    Interiors, MarParams,
};
pub use face::{spin_boundary, Face};
pub use flip::{apply_tau_gamma, apply_tau_gamma_oriented, flip_energy_tau_gamma, FlipOrientation};
pub use metrics::{
    admissible_cubes, admissible_region_cubes, contour_diameter, contour_metric, cube_cover_count,
    family_sites, straddling_pairs, surface_sum, surface_sums, AdmissibleCubes, CubeCover,
    CubePairInstance, DiameterReport, SurfaceSum, SurfaceSums,
};
