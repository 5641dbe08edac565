//! Workloads shared by the benchmarks.

use flashcode::verifier::trial_inputs;
use flashcode::{Scheme, WriteOutcome};

/// Seeded input sequence long enough to exhaust most small memories.
pub fn inputs_for<S: Scheme>(scheme: &S, len: usize) -> Vec<u32> {
    trial_inputs(scheme.domain(), 0x5eed, 0, len)
}

/// Writes `inputs` until the first erasure and returns the number of writes.
pub fn write_until_erase<S: Scheme>(scheme: &S, inputs: &[u32]) -> usize {
    let mut state = scheme.initial();
    for (w, &i) in inputs.iter().enumerate() {
        match scheme.write(&state, i).expect("valid input") {
            WriteOutcome::Written(next) => state = next,
            WriteOutcome::Erase => return w,
        }
    }
    inputs.len()
}
