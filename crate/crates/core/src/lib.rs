//! Distributed two-qubit entanglement simulation.
//!
//! Each half of an entangled pair can live on a different node and be
//! operated on without coordination; a measurement on one side ships a
//! notice that lets the other side reconcile its local state. On top of the
//! simulator sit a channel-noise layer, a BB84 run, and a sweep harness.
//!
//! Layers, bottom up:
//! - [`linalg`]: 2×2 / 4×4 complex algebra, density matrices, Kraus operators
//! - [`register`]: registers of independent qubits, gates, measurement
//! - [`entangle`]: pair bookkeeping and the reconcile procedure
//! - [`wire`], [`node`], [`transport`]: framed envelopes, the serial
//!   per-process dispatcher, and loopback/TCP transports
//! - [`noise`], [`bb84`], [`experiment`]: channel models, key distribution
//!   runs, sweeps and summaries

pub mod bb84;
pub mod demo;
pub mod entangle;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod node;
pub mod noise;
pub mod register;
pub mod rng;
pub mod transport;
pub mod wire;

pub use entangle::{EprMatrix, PairId, Side};
pub use error::{QentError, Result};
pub use linalg::{AmplitudePair, Gate};
pub use node::Node;
pub use register::{QuantumRegister, RegisterId};
pub use rng::RandomSource;
