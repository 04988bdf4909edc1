//! Deterministic numerical kernels and the reproducible random source shared
//! by all simulation modules.

pub mod ode;
pub mod quad;
pub mod rng;
pub mod root;

pub use ode::{rk4_flow, rk4_step, scalar_field, FlowField, FnField};
pub use quad::{
    adaptive_quad, adaptive_quad_endpoint_sqrt, adaptive_quad_to_inf, QuadratureResult,
};
pub use rng::{sample_exponential, sample_poisson_count, RandomStream};
pub use root::bisect_root;
