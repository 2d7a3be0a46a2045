//! Leggett-type inequality toolkit: measurement geometry, quantum
//! predictions, the η-generalized bound, counting statistics, simulated
//! experiments and non-signaling audits.

pub mod error;
pub mod experiment;
pub mod geometry;
pub mod leggett;
pub mod nosig;
pub mod quantum;
pub mod stats;

pub use error::{Error, Result};
pub use experiment::{
    asymmetry_study, eta_threshold_report, run_scan, run_scan_detailed, AsymmetryReport, EtaReport, Geometry,
    Misalignment, ScanConfig, ScanRow,
};
pub use geometry::{
    rotate_settings, standard_triplets, tetrahedron_triplets, xi_lower_bound, BlochVector, SettingsEnsemble,
    SettingsTriplet, Side, Vec3,
};
pub use leggett::{leggett_bound, LeggettBoundParams, LocalBox, ViolationRegion};
pub use nosig::{AuditOptions, AuditReport, DiscreteNSModel, Sign};
pub use quantum::{correlation, predicted_l, quantum_l, CorrelationModel, Noise};
pub use stats::{CountQuad, Estimate, QuadRecord};
