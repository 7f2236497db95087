//! Exact compiler and simulator for heralded Dicke-state sculpting schemes.
//!
//! The pipeline has three layers:
//!
//! 1. [`graph`]: directed "sculpting" graphs whose disjoint cycle covers
//!    encode the terms of an entangled target state, together with the
//!    bipartite (circle/dot) view whose perfect matchings are in bijection
//!    with those covers.
//! 2. [`engine`]: the second-quantized sculpting operator read off a graph,
//!    applied exactly to the paired initial state to produce the target.
//! 3. [`circuit`] / [`sim`]: a five-step linear-optical realization on
//!    `5n + 2nk` spatial modes, an exact Fock-space simulator for it, and
//!    the heralding analysis (accepted detector patterns, feed-forward
//!    corrections, success probability).
//!
//! Coefficient arithmetic is generic over [`coeff::Coeff`]; the
//! [`coeff::Exact`] backend keeps every amplitude in the ring
//! `Q(i, sqrt(2), sqrt(3), ...)` so fidelities can be certified equal to 1
//! rather than merely close to it, while [`coeff::C64`] trades that for
//! speed on larger instances.

pub mod circuit;
pub mod coeff;
pub mod engine;
pub mod fock;
pub mod graph;
pub mod sim;
