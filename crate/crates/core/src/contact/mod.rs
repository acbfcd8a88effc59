//! Foot-ground contact and terrain.

pub mod soft;
pub mod terrain;

pub use soft::{contact_force, sample_compliance, ComplianceRange, ContactForce, ContactParams};
pub use terrain::{TerrainConfig, TerrainField};
