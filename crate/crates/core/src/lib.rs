//! Immune-inspired security pipeline for simulated wireless sensor networks.
//!
//! The crate models a small sensor field as a deterministic discrete-event
//! world and layers four defensive mechanisms on top of it:
//!
//! - [`tracking`]: binary closer/farther proximity readings weight candidate
//!   target positions and classify motion as approaching, receding or
//!   suspicious.
//! - [`admission`]: newcomers are credential-checked and probed with tagged
//!   honeypot packets; forwarding a tagged packet off the approved database
//!   set proves hostility.
//! - [`ais`]: the immune core — bitstring affinity, negative-selection
//!   detector generation and clonal-selection maturation with a memory set.
//! - [`response`]: confirmed hostiles are confronted by a detector-led team
//!   that floods them with fake packets until their energy source is spent,
//!   optionally followed by a decoy counter-attack.
//!
//! [`optimizer`] reuses the clonal engine on a continuous benchmark landscape,
//! and [`harness`] wires everything into seeded, reproducible scenario runs
//! with CSV metrics. Every run is a pure function of its scenario and seed.

pub mod admission;
pub mod ais;
pub mod cli;
pub mod harness;
pub mod optimizer;
pub mod response;
pub mod tracking;
pub mod world;
