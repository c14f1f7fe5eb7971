//! Invariant extended Kalman filtering for bipedal walking on dynamic rigid
//! surfaces.
//!
//! The filter state lives on SE_3(3) (base orientation, velocity, position and
//! support-foot position). Besides the usual leg-kinematics position
//! measurement, a right-invariant orientation measurement aligns the support
//! foot's normal with the known surface normal, which makes base yaw
//! observable whenever the surface tilts away from level.
//!
//! * [`liegroup`]: SO(3) and SE_3(3) operations.
//! * [`models`]: process model and the two invariant measurement models.
//! * [`filter`]: propagation, update and the foot-swap jump.
//! * [`sim`]: rocking-treadmill ground truth and sensor synthesis.
//! * [`harness`]: Monte Carlo trials, metrics and CSV reports.

pub mod error;
pub mod filter;
pub mod harness;
pub mod liegroup;
pub mod models;
pub mod seed;
pub mod sim;
pub mod stream;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/lie_groups.md")]
    mod lie_groups {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/filter.md")]
    mod filter {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/monte_carlo.md")]
    mod monte_carlo {}
}
