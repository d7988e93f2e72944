//! Desk-scale simulation of quantum-communication protocols: dense state
//! simulation, gate circuits, Kraus noise channels, teleportation and
//! broadcasting, photonic remote-operator protocols, anonymous veto, and
//! the COW/DPS key-rate model.

pub mod circuits;
pub mod error;
pub mod linalg;
pub mod noise;
pub mod qav;
pub mod qkd;
pub mod qstate;
pub mod rio;
pub mod rng;
pub mod teleport;
