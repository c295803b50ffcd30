//! Statistical experiments on the lattice model and its continuum limit.

pub mod appendix;
pub mod census;
pub mod eigen;
pub mod fdd;
pub mod report;
pub mod tightness;
pub mod window;

pub use appendix::{meeting_probability, stay_positive_scaling, MeetingEndpoints, MeetingRow, StayPositiveRow};
pub use census::{eta_good_census, EtaGoodCensus};
pub use eigen::{eigen_convergence, eigen_convergence_with, grid_project, rescaled_norm, EigenConvergence, EigenRow};
pub use fdd::{bridge_fdd_samples, chain_fdd_samples, fdd_compare, FddComparison};
pub use report::{Check, ExperimentReport, Metric, Table};
pub use tightness::{tightness_probe, TightnessRow};
pub use window::{tv_window, WindowRow, WindowStudy};
