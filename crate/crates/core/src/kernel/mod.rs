//! Deterministic model quantities: kernel weights, their limits and the
//! exact moments that follow from them.

pub mod cache;
pub mod limits;
pub mod params;
pub mod quadrature;
pub mod table;

pub use cache::{load_or_build, CacheOutcome};
pub use limits::{history_variance_limit, rho, theta_limit, SeriesValue, ThetaLimit};
pub use params::{standard_c_h, ModelParams, QuadratureConfig};
pub use table::{build_kernel_table, compute_g, compute_j, KernelTable};
