//! Full counting statistics of photons transmitted through a collective
//! medium of `N` two-level emitters placed between bosonic reservoirs.

pub mod analytics;
pub mod error;
pub mod fluctuation;
pub mod fcs;
pub mod liouvillian;
pub mod linalg;
pub mod model;
pub mod numdiff;
pub mod oracle;
pub mod spectral;
pub mod transient;

pub use error::{FcsError, Result};
pub use linalg::C64;
pub use model::{ReservoirLabel, ReservoirParams, SystemParams};
