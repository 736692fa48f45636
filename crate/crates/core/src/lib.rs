//! Synonymous variational inference and rate-distortion-perception limits on
//! finite alphabets.
//!
//! The crate is organised around five layers:
//!
//! * [`prob`]: distributions, synset partitions, entropies, divergences and
//!   the synset-level (semantic) measures built on them.
//! * [`svi`]: the synonymous variational lower bound and its decompositions,
//!   evaluated exactly on fully discrete latent models.
//! * [`likelihood`]: the synset constant `f`, the mean term `delta_p` and the
//!   identity `f = KL + delta_p`, plus the Gaussian likelihood reduction.
//! * [`rdp`]: Blahut-Arimoto, the rate-distortion-perception solver and the
//!   synonymous rate.
//! * [`codec`]: a runnable synonymous source codec with a static range coder.
//!
//! All information quantities are reported in bits unless a [`Unit`] says
//! otherwise.

pub mod codec;
pub mod config;
mod error;
pub mod likelihood;
pub mod prob;
pub mod random;
pub mod rdp;
pub mod svi;

pub use error::{Error, Result};
pub use prob::{ConditionalTable, FiniteDistribution, JointDistribution, SynsetPartition, Unit};
pub use rdp::{Channel, DistortionMatrix, RdpPoint, SolverConfig};
