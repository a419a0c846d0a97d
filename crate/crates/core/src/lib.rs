//! Reversible garbled circuits for non-interactive delegation of
//! Toffoli + phase ("C+P") quantum circuits.
//!
//! A client hides each input qubit by mapping `|0> -> |k0>`, `|1> -> |k1>`
//! for secret key strings, and sends the server a garbled table per gate.
//! The server evaluates the tables on the key registers as a pure basis
//! permutation plus phases, and returns the key registers; the client maps
//! the output keys back to qubits.
//!
//! Module map:
//!
//! * [`oracle`]: the random oracle (hash-derived or lazily sampled table)
//! * [`sym`]: single-key and three-key tagged symmetric schemes
//! * [`circuit`]: the C+P circuit IR, text format, phase expansion and the
//!   universal-machine transform
//! * [`sim`]: sparse state vectors and small dense utilities
//! * [`encoding`]: key schedules, the key encoding and its cost model
//! * [`garble`] / [`evaluate`]: table construction and server evaluation
//! * [`delegation`]: end-to-end protocols (GBC, blind, Shor, QKDM)
//! * [`security`]: executable distinguishing games
//! * [`net_io`]: binary formats and the client/server exchange

pub mod bits;
pub mod circuit;
pub mod delegation;
pub mod encoding;
pub mod error;
pub mod evaluate;
pub mod garble;
pub mod net_io;
pub mod oracle;
pub mod security;
pub mod seed;
pub mod sim;
pub mod sym;

pub use error::{Error, Result};
