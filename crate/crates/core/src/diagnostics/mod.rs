//! Exact moment formulas, enumeration oracles and Monte Carlo reports.

pub mod enumeration;
pub mod exact;
pub mod fit;
pub mod sweep;
pub mod verdict;

pub use enumeration::{enumeration_suite, Check, EnumerationReport};
pub use exact::{martingale_variances, mixingale_norms};
pub use fit::{rate_fit, RateFit};
pub use sweep::{
    lln_report, max_inequality_report, run_sweep, saa_report, HorizonRun, LlnRow, MaxInequalityReport,
    MaxInequalityRow, McConfig, PathRecord, SaaReport, SaaRow, Sweep,
};
pub use verdict::{martingale_fit, mixingale_fit, verify, Flag, Verification};
