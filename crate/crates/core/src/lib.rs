//! Blind identification of linear parameter-varying FIR systems.
//!
//! The scheduling variable is never measured. It is modelled as the hidden
//! state path of an HMM whose emissions are Gaussian around the LPV-FIR
//! output, and estimated jointly with polynomial coefficient functions by
//! alternating Viterbi decoding, Baum-Welch updates of the chain, and
//! closed-form coordinate updates of the coefficient matrix.
//!
//! Module map:
//! - [`model`]: grids, coefficient matrices, simulation and the benchmark plant.
//! - [`hmm`]: log-space forward, Viterbi and forward-backward machinery.
//! - [`estimation`]: coordinate updates of the coefficient matrix.
//! - [`pso`]: particle-swarm initialization.
//! - [`qsvbw`]: the alternating identification driver.
//! - [`eval`]: BFR/SNR scoring and dataset splitting.
//! - [`io`]: CSV and JSON file formats.
//! - [`cli`]: command implementations behind the `blpv` binary.

pub mod cli;
pub mod error;
pub mod estimation;
pub mod eval;
pub mod hmm;
pub mod io;
pub mod math;
pub mod model;
pub mod pso;
pub mod qsvbw;

pub use error::{Error, Result};
pub use estimation::{FitContext, SweepReport};
pub use eval::Score;
pub use hmm::{EmissionTable, HmmParams, InitialDist, TransitionMatrix};
pub use model::{CoeffMatrix, Dataset, LpvFirModel, SchedulingGrid};
pub use pso::SwarmConfig;
pub use qsvbw::{IdentifiedModel, Orientation, QsvbwConfig, QsvbwResult};
