//! Example systems.

mod lie;
mod vector;

pub use lie::{BallOnTurntable, HeavyTop, Unicycle};
pub use vector::{ChaoticSystem, Cvt, HarmonicOscillator, NonholonomicParticle, PlanarPendulum, CHAOTIC_ENERGY};
