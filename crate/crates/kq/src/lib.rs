//! Quench dynamics of a dissipative Kitaev chain.
//!
//! The chain's quasiparticle modes decouple in momentum space; each mode
//! exchanges excitations with a thermal bath whose coupling follows a
//! power-law spectral density. This crate evolves the per-mode occupations
//! under sudden quenches and linear temperature ramps, reduces them to the
//! excitation density, and extracts the scaling observables (power-law
//! exponents, shifted power laws, peak/crossover/transition times) that
//! characterize the universal relaxation of the driven open system.

pub mod analysis;
pub mod bath;
pub mod chain;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod par;
pub mod quadrature;
pub mod runner;
pub mod schedule;
pub mod sum;
pub mod validate;
