//! Exhaustive and randomized certification of write guarantees.
//!
//! The exhaustive search treats the adversary as choosing every input. The
//! guaranteed number of writes is one less than the length of the shortest
//! input sequence that ends in an erasure, found by breadth-first search
//! over the deterministic transition graph. Frontiers are kept in
//! lexicographic order of the paths that reach them, so the first erasure
//! found is also the lexicographically smallest shortest witness. Successor
//! computation is parallel; merging is sequential, so the result does not
//! depend on thread count.

use std::collections::HashMap;
use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::buffer::BufferWindow;
use crate::cells::{self, InfoVector, WriteOutcome};
use crate::error::{Error, Result};
use crate::scheme::{Decoded, InputDomain, Scheme};

pub const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// Every input sequence of length `t` succeeds; `witness` has length
    /// `t + 1` and erases on its last write.
    Certified { t: u64, witness: Vec<u32> },
    /// The budget ran out with no erasure within `depth` writes.
    Inconclusive { depth: u64 },
    /// Every reachable state was expanded and none erases. Only possible
    /// for a scheme that can write forever.
    NoErase,
}

#[derive(Clone, Debug)]
pub struct VerificationReport {
    pub scheme: String,
    pub outcome: Outcome,
    pub states_explored: u64,
    pub capacity: u64,
    pub wall_time: Duration,
}

impl VerificationReport {
    pub fn t(&self) -> Option<u64> {
        match self.outcome {
            Outcome::Certified { t, .. } => Some(t),
            _ => None,
        }
    }

    pub fn witness(&self) -> Option<&[u32]> {
        match &self.outcome {
            Outcome::Certified { witness, .. } => Some(witness),
            _ => None,
        }
    }

    /// `n(q - 1) - t`.
    pub fn deficiency(&self) -> Option<u64> {
        self.t().map(|t| self.capacity.saturating_sub(t))
    }
}

impl fmt::Display for VerificationReport {
    /// One `key=value` pair per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scheme={}", self.scheme)?;
        match &self.outcome {
            Outcome::Certified { t, witness } => {
                writeln!(f, "outcome=certified")?;
                writeln!(f, "t={t}")?;
                writeln!(f, "deficiency={}", self.capacity.saturating_sub(*t))?;
                writeln!(f, "witness={}", cells::join(witness))?;
            }
            Outcome::Inconclusive { depth } => {
                writeln!(f, "outcome=inconclusive")?;
                writeln!(f, "depth={depth}")?;
            }
            Outcome::NoErase => writeln!(f, "outcome=no-erase")?,
        }
        writeln!(f, "capacity={}", self.capacity)?;
        writeln!(f, "states={}", self.states_explored)?;
        writeln!(f, "wall_ms={}", self.wall_time.as_millis())
    }
}

fn inputs_of(domain: InputDomain) -> std::ops::Range<u32> {
    0..domain.size()
}

/// Shortest erase-forcing sequence by breadth-first search. `budget` caps
/// the number of distinct states stored.
pub fn min_writes_exhaustive<S: Scheme>(scheme: &S, budget: u64) -> Result<VerificationReport> {
    let start = Instant::now();
    let inputs: Vec<u32> = inputs_of(scheme.domain()).collect();
    // parent links: (parent index, input) for every stored state
    let mut links: Vec<(usize, u32)> = vec![(usize::MAX, 0)];
    let mut index: HashMap<S::State, usize> = HashMap::new();
    let init = scheme.initial();
    index.insert(init.clone(), 0);
    let mut frontier: Vec<(usize, S::State)> = vec![(0, init)];
    let mut depth = 0u64;

    let path_to = |links: &[(usize, u32)], mut at: usize| {
        let mut path = Vec::new();
        while links[at].0 != usize::MAX {
            path.push(links[at].1);
            at = links[at].0;
        }
        path.reverse();
        path
    };

    let outcome = loop {
        if frontier.is_empty() {
            break Outcome::NoErase;
        }
        let successors: Vec<Vec<WriteOutcome<S::State>>> = frontier
            .par_iter()
            .map(|(_, s)| inputs.iter().map(|&i| scheme.write(s, i)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;

        let mut erase = None;
        'scan: for ((at, _), outs) in frontier.iter().zip(&successors) {
            for (&i, out) in inputs.iter().zip(outs) {
                if out.is_erase() {
                    erase = Some((*at, i));
                    break 'scan;
                }
            }
        }
        if let Some((at, i)) = erase {
            let mut witness = path_to(&links, at);
            witness.push(i);
            break Outcome::Certified { t: depth, witness };
        }

        let mut next = Vec::new();
        let mut over_budget = false;
        for ((at, _), outs) in frontier.iter().zip(successors) {
            for (&i, out) in inputs.iter().zip(outs) {
                let WriteOutcome::Written(s) = out else { unreachable!("erase handled above") };
                if index.contains_key(&s) {
                    continue;
                }
                if index.len() as u64 >= budget {
                    over_budget = true;
                    break;
                }
                let id = links.len();
                links.push((*at, i));
                index.insert(s.clone(), id);
                next.push((id, s));
            }
            if over_budget {
                break;
            }
        }
        if over_budget {
            break Outcome::Inconclusive { depth };
        }
        frontier = next;
        depth += 1;
    };

    Ok(VerificationReport {
        scheme: scheme.name(),
        outcome,
        states_explored: index.len() as u64,
        capacity: scheme.capacity(),
        wall_time: start.elapsed(),
    })
}

/// The same quantity by iterative deepening, as an independent cross-check.
/// Returns `None` if `max_depth` writes never force an erasure.
pub fn min_writes_iddfs<S: Scheme>(scheme: &S, max_depth: u64) -> Result<Option<u64>> {
    // state -> largest remaining depth known not to reach an erasure
    let mut safe: HashMap<S::State, u64> = HashMap::new();
    let inputs: Vec<u32> = inputs_of(scheme.domain()).collect();

    fn reaches<S: Scheme>(
        scheme: &S,
        inputs: &[u32],
        s: &S::State,
        left: u64,
        safe: &mut HashMap<S::State, u64>,
    ) -> Result<bool> {
        if left == 0 || safe.get(s).is_some_and(|&d| d >= left) {
            return Ok(false);
        }
        for &i in inputs {
            match scheme.write(s, i)? {
                WriteOutcome::Erase => return Ok(true),
                WriteOutcome::Written(next) => {
                    if reaches(scheme, inputs, &next, left - 1, safe)? {
                        return Ok(true);
                    }
                }
            }
        }
        safe.insert(s.clone(), left);
        Ok(false)
    }

    let init = scheme.initial();
    for limit in 1..=max_depth + 1 {
        if reaches(scheme, &inputs, &init, limit, &mut safe)? {
            return Ok(Some(limit - 1));
        }
    }
    Ok(None)
}

/// Most writes any input sequence achieves before an erasure.
pub fn max_writes<S: Scheme>(scheme: &S, budget: u64) -> Result<Option<u64>> {
    let inputs: Vec<u32> = inputs_of(scheme.domain()).collect();
    let mut memo: HashMap<S::State, u64> = HashMap::new();

    fn longest<S: Scheme>(
        scheme: &S,
        inputs: &[u32],
        s: &S::State,
        memo: &mut HashMap<S::State, u64>,
        budget: u64,
    ) -> Result<Option<u64>> {
        if let Some(&v) = memo.get(s) {
            return Ok(Some(v));
        }
        if memo.len() as u64 >= budget {
            return Ok(None);
        }
        let mut best = 0;
        for &i in inputs {
            if let WriteOutcome::Written(next) = scheme.write(s, i)? {
                match longest(scheme, inputs, &next, memo, budget)? {
                    Some(v) => best = best.max(v + 1),
                    None => return Ok(None),
                }
            }
        }
        memo.insert(s.clone(), best);
        Ok(Some(best))
    }

    longest(scheme, &inputs, &scheme.initial(), &mut memo, budget)
}

/// Replays `witness` and checks that only its last write erases.
pub fn replay_witness<S: Scheme>(scheme: &S, witness: &[u32]) -> Result<bool> {
    let Some((&last, prefix)) = witness.split_last() else {
        return Ok(false);
    };
    let mut s = scheme.initial();
    for &i in prefix {
        match scheme.write(&s, i)? {
            WriteOutcome::Written(next) => s = next,
            WriteOutcome::Erase => return Ok(false),
        }
    }
    Ok(scheme.write(&s, last)?.is_erase())
}

/// The last `r` entries of `history`, newest first, zero padded.
pub fn window_oracle(history: &[u8], r: usize, ell: u32) -> BufferWindow {
    debug_assert!(history.iter().all(|&b| u32::from(b) < ell));
    let newest: Vec<u8> = history
        .iter()
        .rev()
        .copied()
        .chain(std::iter::repeat(0))
        .take(r)
        .collect();
    BufferWindow::from_newest_first(newest)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Failure {
    /// 1-based write number.
    pub step: usize,
    pub reason: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "write {}: {}", self.step, self.reason)
    }
}

#[derive(Clone, Debug)]
pub struct RunResult<St> {
    /// Writes that completed.
    pub writes: usize,
    /// Whether the run stopped on an erasure.
    pub erased: bool,
    pub failure: Option<Failure>,
    pub final_state: St,
}

impl<St> RunResult<St> {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Replays `inputs`, checking every step, and stops at the first erasure
/// or the first failed check.
///
/// Checked at each step: no cell goes down and some cell goes up; the state
/// survives a serialization round trip; a flash code's decoded vector
/// differs from the previous one in exactly the written bit; a buffer
/// code's window equals the last `r` written symbols.
pub fn consistency_run<S: Scheme>(scheme: &S, inputs: &[u32]) -> Result<RunResult<S::State>> {
    let mut s = scheme.initial();
    let mut history: Vec<u8> = Vec::new();
    let mut prev = scheme.decode(&s)?;
    let fail = |s: S::State, writes: usize, reason: String| RunResult {
        writes,
        erased: false,
        failure: Some(Failure { step: writes + 1, reason }),
        final_state: s,
    };
    for (w, &input) in inputs.iter().enumerate() {
        if input >= scheme.domain().size() {
            return Err(Error::Contract(format!("input {input} outside the input domain")));
        }
        let next = match scheme.write(&s, input) {
            Ok(WriteOutcome::Written(next)) => next,
            Ok(WriteOutcome::Erase) => {
                return Ok(RunResult { writes: w, erased: true, failure: None, final_state: s })
            }
            Err(e) => return Ok(fail(s, w, format!("encoder error: {e}"))),
        };
        let (a, b) = (scheme.cells(&s), scheme.cells(&next));
        if a.len() != b.len() || a.iter().zip(&b).any(|(x, y)| y < x) {
            return Ok(fail(s, w, "a cell level went down".into()));
        }
        if a == b {
            return Ok(fail(s, w, "the write changed no cell".into()));
        }
        match scheme.deserialize(&scheme.serialize(&next)) {
            Ok(back) if back == next => {}
            _ => return Ok(fail(s, w, "state does not survive serialization".into())),
        }
        let got = match scheme.decode(&next) {
            Ok(d) => d,
            Err(e) => return Ok(fail(s, w, format!("decoder error: {e}"))),
        };
        match (&prev, &got) {
            (Decoded::Info(before), Decoded::Info(after)) => {
                let diff = before.diff(after);
                if diff != [input as usize] {
                    return Ok(fail(
                        s,
                        w,
                        format!("writing bit {input} changed bits {diff:?}"),
                    ));
                }
            }
            (_, Decoded::Window(window)) => {
                history.push(input as u8);
                let want = window_oracle(&history, window.len(), scheme.domain().size());
                if *window != want {
                    return Ok(fail(
                        s,
                        w,
                        format!("window {} should be {}", window.oldest_first_string(), want.oldest_first_string()),
                    ));
                }
            }
            _ => return Ok(fail(s, w, "decoder changed output kind".into())),
        }
        prev = got;
        s = next;
    }
    Ok(RunResult { writes: inputs.len(), erased: false, failure: None, final_state: s })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomSummary {
    pub scheme: String,
    pub rng: &'static str,
    pub seed: u64,
    pub trials: u64,
    pub horizon: usize,
    /// Fewest and most writes over trials that erased.
    pub min_writes: Option<usize>,
    pub max_writes: Option<usize>,
    pub mean_writes: f64,
    pub erased_trials: u64,
    /// Largest `n(q - 1) - writes` over trials that erased.
    pub max_deficiency: Option<u64>,
    pub violations: Vec<(u64, Failure)>,
}

impl fmt::Display for RandomSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<u64>| v.map_or_else(|| "-".to_string(), |v| v.to_string());
        writeln!(f, "scheme={}", self.scheme)?;
        writeln!(f, "rng={}", self.rng)?;
        writeln!(f, "seed={}", self.seed)?;
        writeln!(f, "trials={}", self.trials)?;
        writeln!(f, "horizon={}", self.horizon)?;
        writeln!(f, "erased_trials={}", self.erased_trials)?;
        writeln!(f, "min_writes={}", opt(self.min_writes.map(|v| v as u64)))?;
        writeln!(f, "max_writes={}", opt(self.max_writes.map(|v| v as u64)))?;
        writeln!(f, "mean_writes={:.3}", self.mean_writes)?;
        writeln!(f, "max_deficiency={}", opt(self.max_deficiency))?;
        writeln!(f, "violations={}", self.violations.len())?;
        for (trial, failure) in &self.violations {
            writeln!(f, "violation trial={trial} {failure}")?;
        }
        Ok(())
    }
}

/// Random inputs for one trial; the stream number keeps trials independent.
pub fn trial_inputs(domain: InputDomain, seed: u64, trial: u64, horizon: usize) -> Vec<u32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    (0..horizon).map(|_| rng.random_range(0..domain.size())).collect()
}

/// Runs `trials` independent uniformly random input sequences of length
/// `horizon`, each under [`consistency_run`].
pub fn random_adversary<S: Scheme>(scheme: &S, trials: u64, horizon: usize, seed: u64) -> Result<RandomSummary> {
    let runs: Vec<(u64, RunResult<S::State>)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let inputs = trial_inputs(scheme.domain(), seed, trial, horizon);
            consistency_run(scheme, &inputs).map(|r| (trial, r))
        })
        .collect::<Result<_>>()?;
    let capacity = scheme.capacity();
    let erased: Vec<usize> = runs.iter().filter(|(_, r)| r.erased).map(|(_, r)| r.writes).collect();
    let total: usize = runs.iter().map(|(_, r)| r.writes).sum();
    Ok(RandomSummary {
        scheme: scheme.name(),
        rng: "ChaCha8",
        seed,
        trials,
        horizon,
        min_writes: erased.iter().copied().min(),
        max_writes: erased.iter().copied().max(),
        mean_writes: if trials == 0 { 0.0 } else { total as f64 / trials as f64 },
        erased_trials: erased.len() as u64,
        max_deficiency: erased.iter().map(|&w| capacity.saturating_sub(w as u64)).max(),
        violations: runs
            .into_iter()
            .filter_map(|(trial, r)| r.failure.map(|f| (trial, f)))
            .collect(),
    })
}

/// Deliberate faults for testing the checks themselves.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    /// Decode flips the first bit (or symbol) once the total cell level
    /// reaches the given weight.
    CorruptDecodeAtWeight(u64),
    /// Writes from a state of the given weight leave it unchanged.
    SkipWriteAtWeight(u64),
}

/// Wraps a scheme and injects a [`Mutation`].
#[derive(Clone, Debug)]
pub struct Mutant<S> {
    pub inner: S,
    pub mutation: Mutation,
}

impl<S: Scheme> Scheme for Mutant<S> {
    type State = S::State;

    fn name(&self) -> String {
        format!("mutant({})", self.inner.name())
    }

    fn initial(&self) -> S::State {
        self.inner.initial()
    }

    fn domain(&self) -> InputDomain {
        self.inner.domain()
    }

    fn write(&self, state: &S::State, input: u32) -> Result<WriteOutcome<S::State>> {
        match self.mutation {
            Mutation::SkipWriteAtWeight(w) if cells::weight(&self.inner.cells(state)) == w => {
                Ok(WriteOutcome::Written(state.clone()))
            }
            _ => self.inner.write(state, input),
        }
    }

    fn decode(&self, state: &S::State) -> Result<Decoded> {
        let d = self.inner.decode(state)?;
        match self.mutation {
            Mutation::CorruptDecodeAtWeight(w) if cells::weight(&self.inner.cells(state)) >= w => Ok(match d {
                Decoded::Info(v) => {
                    let mut bits = v.bits().to_vec();
                    if let Some(b) = bits.first_mut() {
                        *b ^= 1;
                    }
                    Decoded::Info(InfoVector::from_bits(bits)?)
                }
                Decoded::Window(w) => {
                    let mut sym = w.newest_first().to_vec();
                    if let Some(b) = sym.first_mut() {
                        *b ^= 1;
                    }
                    Decoded::Window(BufferWindow::from_newest_first(sym))
                }
            }),
            _ => Ok(d),
        }
    }

    fn cells(&self, state: &S::State) -> Vec<crate::cells::Level> {
        self.inner.cells(state)
    }

    fn capacity(&self) -> u64 {
        self.inner.capacity()
    }

    fn serialize(&self, state: &S::State) -> String {
        self.inner.serialize(state)
    }

    fn deserialize(&self, text: &str) -> Result<S::State> {
        self.inner.deserialize(text)
    }

    fn trace_fields(&self, state: &S::State) -> String {
        self.inner.trace_fields(state)
    }
}
