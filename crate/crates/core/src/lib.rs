//! Partitioned Runge-Kutta integrators for mechanical systems with
//! nonholonomic constraints, on vector spaces and on matrix Lie groups.

pub mod error;
pub mod harness;
pub mod lie_mechanics;
pub mod liegroup;
pub mod mechanics;
pub mod nlsolve;
pub mod prk_lie;
pub mod prk_vec;
pub mod systems;
pub mod tableau;
