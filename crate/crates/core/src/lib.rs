//! Extended Cosserat rod with uniform cross-sectional inflation, reduced to
//! generalized coordinates through polynomial strain bases.

pub mod basis;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod kinematics;
pub mod liegroup;
pub mod loads;
pub mod material;

pub use error::{Error, Result};
