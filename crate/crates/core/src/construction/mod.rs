//! The local deformation: shear flow, rescaled deformation, rotation, and
//! their gluing into torus maps.

mod flow;
mod index_adjust;
mod local;
mod periodic;
mod pipeline;
mod profiles;

pub use flow::{DriftMonitor, IntegratorSettings, ShearFlow};
pub use index_adjust::{index_adjust, IndexAdjustLocal, IndexAdjustParams};
pub use local::{
    build_f1, compose_rotation, cone_target, derive_cone_parameters, measure_k, sampled_aperture,
    solve_eta, ConeCertificate, RescaledDeformation, RotatedDeformation, RotationCertificate,
    SpectrumTriple, CERT_BOUNDARY, CERT_POINTS,
};
pub use periodic::{
    check_orbit_disjoint, least_period, periodic_adaptation, periodic_points, PeriodicAdaptation,
};
pub use pipeline::{
    build, BaseSpec, Construction, ConstructionParams, ConstructionReport, DeformationParams,
    DeformationReport, IndexAdjustReport,
};
pub use profiles::{build_bump, BumpBuild, BumpProfile, Cutoff, TimeRamp};
