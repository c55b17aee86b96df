//! Joint UAV trajectory and NOMA multicast power planning.
//!
//! A single UAV at fixed altitude serves `G` multicast groups over `N` time
//! slots. The crate maximizes the total multicast rate by alternating
//! between a trajectory step (successive geometric programs) and a power
//! step (difference-of-concave linearization), offline on a known user
//! trace or online slot by slot.

pub mod asm;
pub mod condense;
pub mod convex;
pub mod error;
pub mod io;
pub mod mobility;
pub mod online;
pub mod model;
pub mod power;
pub mod trajectory;

pub use error::{Error, Result};
