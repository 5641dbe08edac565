//! Rewriting codes for multilevel flash memory.
//!
//! Cells hold levels `0..q` that can only go up until the whole memory is
//! erased. A *flash code* stores `k` bits in `n` cells and supports some
//! number of single-bit flips before an erasure is unavoidable; a *buffer
//! code* stores the last `r` symbols of a stream instead.
//!
//! Codecs: [`twobit`], [`indexless`], [`staged`], [`constrate`] and
//! [`buffer`]. Closed-form bounds live in [`bounds`] and [`buffer`];
//! [`verifier`] computes exact guarantees on small instances.

pub mod bounds;
pub mod buffer;
pub mod cells;
pub mod constrate;
pub mod error;
pub mod indexless;
pub mod scheme;
pub mod staged;
pub mod twobit;
pub mod verifier;

pub use buffer::{BufferCode, BufferConfig, BufferWindow};
pub use cells::{CellVector, InfoVector, Level, WriteOutcome};
pub use constrate::{ConstRateCode, ConstRateConfig, ConstRateState};
pub use error::{Error, Result};
pub use indexless::{Block, BlockStatus, IndexlessCode, IndexlessConfig};
pub use scheme::{trace_line, Decoded, InputDomain, Scheme};
pub use staged::{IndexVariant, StagedCode, StagedConfig, StagedState};
pub use twobit::{TwoBitCode, TwoBitConfig};
pub use verifier::{Outcome, VerificationReport};
