//! A uniform interface over every codec, used by the verifier and the CLI.

use std::fmt;
use std::hash::Hash;

use crate::buffer::BufferWindow;
use crate::cells::{InfoVector, Level, WriteOutcome};
use crate::error::Result;

/// What a single write carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputDomain {
    /// Flash codes: the index of the bit that flips, in `0..k`.
    BitIndex(usize),
    /// Buffer codes: the new symbol, in `0..ell`.
    Symbol(u32),
}

impl InputDomain {
    pub fn size(&self) -> u32 {
        match *self {
            InputDomain::BitIndex(k) => k as u32,
            InputDomain::Symbol(l) => l,
        }
    }
}

/// The stored content of a state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decoded {
    Info(InfoVector),
    Window(BufferWindow),
}

impl fmt::Display for Decoded {
    /// `info=<v0>,...` or `buffer=<oldest>,...,<newest>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decoded::Info(v) => write!(f, "info={v}"),
            Decoded::Window(w) => write!(f, "buffer={}", w.oldest_first_string()),
        }
    }
}

/// A deterministic write-once-style code: initial state, encoder, decoder.
///
/// Every decision-relevant fact must live in `State`; the verifier
/// deduplicates on it.
pub trait Scheme: Sync {
    type State: Clone + Eq + Hash + fmt::Debug + Send + Sync;

    fn name(&self) -> String;

    fn initial(&self) -> Self::State;

    fn domain(&self) -> InputDomain;

    fn write(&self, state: &Self::State, input: u32) -> Result<WriteOutcome<Self::State>>;

    fn decode(&self, state: &Self::State) -> Result<Decoded>;

    /// Every physical cell, in a fixed order.
    fn cells(&self, state: &Self::State) -> Vec<Level>;

    /// `n(q - 1)` over all physical cells, used cells or not.
    fn capacity(&self) -> u64;

    fn serialize(&self, state: &Self::State) -> String;

    fn deserialize(&self, text: &str) -> Result<Self::State>;

    /// The state part of a trace line, e.g. `cells=0,1,0`.
    fn trace_fields(&self, state: &Self::State) -> String;
}

/// `i` for a bit index, `b` for a buffer symbol.
pub fn input_label(domain: InputDomain) -> &'static str {
    match domain {
        InputDomain::BitIndex(_) => "i",
        InputDomain::Symbol(_) => "b",
    }
}

/// One line of a write trace: `w=<write> <i|b>=<input> <state fields> <decoded>`.
///
/// `input` is `None` for the initial state, printed as `-`. Flash codes
/// label the input `i` (the bit index), buffer codes `b` (the symbol).
pub fn trace_line<S: Scheme>(scheme: &S, write: usize, input: Option<u32>, state: &S::State) -> String {
    let label = input_label(scheme.domain());
    let input = input.map_or_else(|| "-".to_string(), |i| i.to_string());
    let decoded = match scheme.decode(state) {
        Ok(d) => d.to_string(),
        Err(_) => "decode=error".to_string(),
    };
    format!("w={write} {label}={input} {} {decoded}", scheme.trace_fields(state))
}
