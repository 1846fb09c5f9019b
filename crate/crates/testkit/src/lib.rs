//! Test support: an independent reference semantics ([`naive`]) and seeded
//! generators for random theories and settings ([`gen`]).

pub mod campaign;
pub mod gen;
pub mod naive;
