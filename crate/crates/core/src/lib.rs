//! Adaptive meshing of growing skin surfaces with relaxed scheduling.
//!
//! Mesh elements are classified against lower and upper size buffers, and
//! each acceptable element is re-checked only after a closed-form safe
//! interval during which it provably cannot become unacceptable.
//!
//! Layers, bottom up:
//!
//! - [`geometry`]: weighted points, the regular triangulation, and the mixed
//!   complex with the Standard-Form frame of every cell.
//! - [`kinetics`]: the skin function, the normal motion of surface samples,
//!   trajectory integration and the reflection construction.
//! - [`scheduler`]: element classification, safe intervals and the
//!   early-warning event queue.
//! - [`mesh`]: restricted Delaunay triangulation and the restructuring
//!   operations (contraction, insertion, flips).
//! - [`feasibility`]: the parameter conditions and their feasible region.
//! - [`driver`]: growth simulation tying everything together.
//!
//! # Time
//!
//! Spheres grow as `w_i(t) = w_i + t` and the surface at growth time `t` is
//! `g^{-1}(t)`. Point motion and all safe intervals are expressed in the
//! kinetic time `tau = t / 2`, in which the Standard-Form polynomial `g / 2`
//! of the containing cell equals `tau` and samples move with speed
//! `1 / (2 |xi|)`.

pub mod driver;
pub mod error;
pub mod feasibility;
pub mod geometry;
pub mod kinetics;
pub mod mesh;
pub mod scheduler;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{MixedComplex, Vec3, WeightedSphere};

/// Convert growth time `t` to kinetic time.
#[inline]
pub fn kinetic_time(growth: f64) -> f64 {
    0.5 * growth
}

/// Convert kinetic time to growth time `t`.
#[inline]
pub fn growth_time(kinetic: f64) -> f64 {
    2.0 * kinetic
}
