//! Cell-state vectors, information vectors and the arithmetic shared by
//! every construction in the crate.
//!
//! Cells are indexed from zero. Levels are stored as `u16`, which caps the
//! number of levels per cell at 2^16.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A single cell level.
pub type Level = u16;

/// Largest supported number of levels per cell.
pub const MAX_Q: u32 = 1 << 16;

/// Checks that `q` is a usable level count.
pub fn check_q(q: u32) -> Result<()> {
    if !(2..=MAX_Q).contains(&q) {
        return Err(Error::InvalidConfig(format!(
            "q must be in [2, {MAX_Q}], got {q}"
        )));
    }
    Ok(())
}

/// The state of `n` cells, each holding a level in `0..q`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellVector {
    q: u32,
    levels: Vec<Level>,
}

impl CellVector {
    /// All-zero state of `n` cells.
    pub fn zeros(n: usize, q: u32) -> Result<Self> {
        Self::new(q, vec![0; n])
    }

    pub fn new(q: u32, levels: Vec<Level>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidConfig("a cell vector needs at least one cell".into()));
        }
        Self::region(q, levels)
    }

    /// Like [`CellVector::new`] but allows zero cells. Used for memory
    /// regions that a configuration may leave empty.
    pub fn region(q: u32, levels: Vec<Level>) -> Result<Self> {
        check_q(q)?;
        if let Some((j, &l)) = levels.iter().enumerate().find(|(_, &l)| u32::from(l) >= q) {
            return Err(Error::InvalidConfig(format!(
                "cell {j} has level {l}, outside [0, {}]",
                q - 1
            )));
        }
        Ok(Self { q, levels })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// Highest level a cell can hold.
    pub fn top(&self) -> Level {
        (self.q - 1) as Level
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn level(&self, j: usize) -> Level {
        self.levels[j]
    }

    /// Raises cell `j` to `level`. Lowering a cell or exceeding `q - 1` is a
    /// contract violation.
    pub fn raise_to(&mut self, j: usize, level: Level) -> Result<()> {
        let cur = self.levels[j];
        if level < cur {
            return Err(Error::Contract(format!(
                "cell {j} would drop from level {cur} to {level}"
            )));
        }
        if u32::from(level) >= self.q {
            return Err(Error::Contract(format!(
                "cell {j} would exceed level {}",
                self.q - 1
            )));
        }
        self.levels[j] = level;
        Ok(())
    }

    /// Adds `delta` levels to cell `j`.
    pub fn bump(&mut self, j: usize, delta: Level) -> Result<()> {
        let target = self.levels[j]
            .checked_add(delta)
            .ok_or(Error::Overflow("cell level"))?;
        self.raise_to(j, target)
    }

    pub fn weight(&self) -> u64 {
        weight(&self.levels)
    }

    pub fn parity(&self) -> u8 {
        parity(&self.levels)
    }

    pub fn count_at_level(&self, level: Level) -> usize {
        self.levels.iter().filter(|&&l| l == level).count()
    }

    pub fn max_level(&self) -> Level {
        self.levels.iter().copied().max().unwrap_or(0)
    }

    /// Total number of level transitions the vector offers from zero,
    /// `n(q - 1)`.
    pub fn capacity(&self) -> u64 {
        self.levels.len() as u64 * u64::from(self.q - 1)
    }
}

/// Integer sum of the levels.
pub fn weight(levels: &[Level]) -> u64 {
    levels.iter().map(|&l| u64::from(l)).sum()
}

/// Weight modulo two.
pub fn parity(levels: &[Level]) -> u8 {
    (weight(levels) % 2) as u8
}

/// True iff no cell decreased from `before` to `after`.
pub fn is_monotone_step(before: &CellVector, after: &CellVector) -> Result<bool> {
    if before.len() != after.len() || before.q != after.q {
        return Err(Error::Contract(format!(
            "cannot compare a {}-cell q={} vector with a {}-cell q={} vector",
            before.len(),
            before.q,
            after.len(),
            after.q
        )));
    }
    Ok(before
        .levels
        .iter()
        .zip(&after.levels)
        .all(|(x, y)| y >= x))
}

impl fmt::Display for CellVector {
    /// `q=<q> cells=<l1>,<l2>,...`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q={} cells={}", self.q, join(&self.levels))
    }
}

impl CellVector {
    /// Parses the textual form, accepting an empty cell list.
    pub fn parse_region(s: &str) -> Result<Self> {
        let (q, levels) = parse_text(s)?;
        CellVector::region(q, levels)
    }
}

impl FromStr for CellVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (q, levels) = parse_text(s)?;
        CellVector::new(q, levels)
    }
}

fn parse_text(s: &str) -> Result<(u32, Vec<Level>)> {
    let line = s.trim();
    let mut parts = line.split(' ').filter(|p| !p.is_empty());
    let (Some(qpart), Some(cpart), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(Error::Parse(format!(
            "expected `q=<int> cells=<l1>,...,<ln>`, got `{line}`"
        )));
    };
    let q = qpart
        .strip_prefix("q=")
        .ok_or_else(|| Error::Parse(format!("missing `q=` in `{line}`")))?
        .parse::<u32>()
        .map_err(|e| Error::Parse(format!("bad q: {e}")))?;
    let cells = cpart
        .strip_prefix("cells=")
        .ok_or_else(|| Error::Parse(format!("missing `cells=` in `{line}`")))?;
    Ok((q, parse_list::<Level>(cells)?))
}

/// Comma-joins a sequence of displayable values.
pub fn join<T: fmt::Display>(items: &[T]) -> String {
    let mut out = String::new();
    for (i, v) in items.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&v.to_string());
    }
    out
}

/// Parses a comma-separated list with no spaces.
pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| {
            t.parse::<T>()
                .map_err(|e| Error::Parse(format!("bad list element `{t}`: {e}")))
        })
        .collect()
}

/// The `k` stored bits of a flash code.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct InfoVector(Vec<u8>);

impl InfoVector {
    pub fn zeros(k: usize) -> Self {
        Self(vec![0; k])
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Contract("information bits must be 0 or 1".into()));
        }
        Ok(Self(bits))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, bit: u8) {
        self.0[i] = bit & 1;
    }

    pub fn toggle(&mut self, i: usize) {
        self.0[i] ^= 1;
    }

    /// Positions where `self` and `other` differ.
    pub fn diff(&self, other: &InfoVector) -> Vec<usize> {
        self.0
            .iter()
            .zip(&other.0)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| i)
            .collect()
    }
}

impl fmt::Display for InfoVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&join(&self.0))
    }
}

/// Result of asking an encoder for a write.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WriteOutcome<S = CellVector> {
    /// The successor state.
    Written(S),
    /// No successor exists without a block erasure.
    Erase,
}

impl<S> WriteOutcome<S> {
    pub fn is_erase(&self) -> bool {
        matches!(self, WriteOutcome::Erase)
    }

    pub fn written(self) -> Option<S> {
        match self {
            WriteOutcome::Written(s) => Some(s),
            WriteOutcome::Erase => None,
        }
    }

    pub fn map<T>(self, f: impl FnOnce(S) -> T) -> WriteOutcome<T> {
        match self {
            WriteOutcome::Written(s) => WriteOutcome::Written(f(s)),
            WriteOutcome::Erase => WriteOutcome::Erase,
        }
    }
}
