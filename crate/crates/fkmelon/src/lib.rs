//! Laboratory for non-intersecting planar random-cluster interfaces and their
//! scaling limits.
//!
//! The crate is organised around three layers:
//!
//! * discrete percolation on a finite box: [`lattice`] (geometry, edge
//!   configurations, cluster labelling) and [`gibbs`] (heat-bath dynamics for
//!   the random-cluster measure, exact enumeration, planar duality);
//! * cluster geometry and effective random walks: [`geometry`] (cone points,
//!   diamond decompositions, synchronized skeletons) and [`walks`] (directed
//!   walk systems confined to the Weyl chamber, Karlin-McGregor counts,
//!   Weyl-restricted transition kernels, harmonic-function estimation);
//! * continuum reference objects and experiments: [`watermelon`] (ordered
//!   Brownian bridge samplers and densities) and [`harness`] (inverse
//!   correlation length estimation, scaling fits, convergence and repulsion
//!   diagnostics, report serialization).
//!
//! Every randomized routine takes an explicit seed and derives per-decision
//! randomness from counter-based streams ([`rng`]), so runs are reproducible
//! across thread counts.

pub mod geometry;
pub mod gibbs;
pub mod harness;
pub mod lattice;
pub mod rng;
pub mod stats;
pub mod walks;
pub mod watermelon;
