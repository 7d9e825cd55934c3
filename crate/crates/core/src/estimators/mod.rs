//! Estimators turning sample streams into diffusion constants, covariance
//! decay, uniqueness bounds and normality tests.

pub mod certificate;
pub mod clt;
pub mod covariance;
pub mod diffusion;
pub mod dobrushin;
pub mod mixing;
pub mod sigma;
pub mod stats;

pub use certificate::{lower_bound_certificate, LowerBoundCertificate};
pub use clt::{clt_test, CltOptions, CltReport};
pub use covariance::{covariance_decay, covariance_decay_ibp, CovarianceDecay};
pub use diffusion::{diffusion, DiffusionEstimate};
pub use dobrushin::{dobrushin_bound, DobrushinReport};
pub use mixing::{mixing_proxy, MixingTable};
pub use sigma::{sigma_sq_estimate, SigmaSqEstimate};
