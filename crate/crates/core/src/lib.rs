//! Mining commit histories for transplantable code organs, extracting the
//! definitions they depend on, and grafting them into host projects.

pub mod classify;
pub mod code;
pub mod config;
pub mod host;
pub mod ingest;
pub mod organ;
pub mod report;
pub mod transplant;
pub mod vein;
