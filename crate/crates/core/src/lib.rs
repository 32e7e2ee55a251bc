//! Coevolving action-opinion dynamics on two-layer influence networks.
//!
//! Every individual carries a binary action in `{-1,+1}` and a continuous
//! opinion in `[-1,+1]`. Actions are observed over one weighted layer,
//! opinions are exchanged over a second layer, and activated individuals
//! play a joint best response to both. A committed minority pins a subset
//! of actions and/or opinions at `+1`; this crate answers two questions
//! about such an intervention:
//!
//! * does it steer the whole population to the `+1` consensus
//!   ([`equilibrium::consensus_guaranteed`]), and
//! * what is a smallest set of individuals to commit
//!   ([`search::minimize_control_set`]).
//!
//! The [`dynamics`] module is the simulation engine, [`equilibrium`] the
//! exact fixed-point computation the verdicts are built on, and [`search`]
//! the subset-search machinery together with closed-form thresholds for
//! homogeneous complete graphs. [`net`] holds network ingestion,
//! generation, and validation. The `coevo` binary wires these into
//! file-driven experiments; see [`cli`].

pub mod cli;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod net;
pub mod rng;
pub mod search;

use std::collections::BTreeSet;

/// Node indices are `0..n`. Sets of nodes are ordered so that every
/// iteration over them is deterministic.
pub type NodeSet = BTreeSet<usize>;

pub use error::{Error, Result};

/// Convenience constructor for a [`NodeSet`] from anything yielding indices.
pub fn nodeset<I: IntoIterator<Item = usize>>(iter: I) -> NodeSet {
    iter.into_iter().collect()
}
