//! Pricing and hedging engine for derivatives on network-capacity
//! resources.
//!
//! Resource spot prices are modelled as correlated Ito processes. The
//! `network` module enumerates candidate router paths and builds the
//! path-resource incidence matrix, `pricing` values network call options
//! on the cheapest path (direct Monte Carlo and a Girsanov-decomposed
//! estimator) along with their deltas, and `hedging` simulates
//! continuous and interval delta hedging of a single-asset call.

pub mod cli;
pub mod hedging;
pub mod math;
pub mod network;
pub mod pricing;
pub mod sde;
