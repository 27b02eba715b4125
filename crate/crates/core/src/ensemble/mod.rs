//! Spatial inhomogeneity: coplanar-waveguide field maps, donor depth
//! profiles and weighted ensemble averages.

mod average;
mod cpw;
mod implant;

pub use average::{
    build_ensemble, calibrate_b1, compensated_sum, default_depth_grid, default_lateral_grid, detection_weight, ensemble_average,
    ensemble_echo_sweep, ensemble_rabi_trace, uniform_grid, EnsemblePoint, EnsembleSpec, PRUNE_THRESHOLD,
};
pub use cpw::{cpw_fields, elliptic_k, CpwGeometry, FieldMap, FieldMapRow, FieldSource};
pub use implant::{implant_weights, DepthProfile, Epilayer, GaussianImplant, ImplantProfile, ImplantTable};
