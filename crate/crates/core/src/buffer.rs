//! Buffer codes: keep the last `r` written symbols readable.
//!
//! The multi-cell code stores a binary window of `r` symbols in `n >= 2r`
//! cells, one layer of levels at a time. Within a layer the window slides
//! one cell to the right per write; once it reaches the end, the cells in
//! front of it are lifted to the layer level and the next layer starts
//! behind it while the tail of the old window is still readable. That gives
//! `n - r` writes per layer and `(q - 1)(n - r)` in total.
//!
//! Positions below are 1-based, as in the construction, and converted at
//! the point of indexing.
//!
//! Two constants differ from a literal reading of the construction. The
//! decoder subtracts `m - 1` from the current layer and `max(m - 2, 0)` from
//! the previous one, where `m` is the highest level present: with layer
//! `L` using levels `L - 1` and `L`, those are the layer bases, and the
//! worked example for `n = 11, q = 3, r = 4` only replays under them. A
//! zero written inside a layer lifts the lowest cell still at `m - 1` to
//! `m`, which is what the same example does between its 10th and 11th
//! writes.

use std::fmt;

use crate::cells::{self, CellVector, Level, WriteOutcome};
use crate::error::{Error, Result};
use crate::scheme::{Decoded, InputDomain, Scheme};

/// The last `r` symbols, newest first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BufferWindow(Vec<u8>);

impl BufferWindow {
    pub fn zeros(r: usize) -> Self {
        Self(vec![0; r])
    }

    pub fn from_newest_first(symbols: Vec<u8>) -> Self {
        Self(symbols)
    }

    pub fn from_oldest_first(mut symbols: Vec<u8>) -> Self {
        symbols.reverse();
        Self(symbols)
    }

    /// Window after writing `inputs` into an all-zero buffer of length `r`.
    pub fn after(r: usize, inputs: &[u8]) -> Self {
        let mut w = Self::zeros(r);
        for &b in inputs {
            w.push(b);
        }
        w
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn newest_first(&self) -> &[u8] {
        &self.0
    }

    pub fn oldest_first(&self) -> Vec<u8> {
        self.0.iter().rev().copied().collect()
    }

    /// Shifts in `symbol` as the newest entry; the oldest one drops out.
    pub fn push(&mut self, symbol: u8) {
        if self.0.is_empty() {
            return;
        }
        self.0.pop();
        self.0.insert(0, symbol);
    }

    pub fn oldest_first_string(&self) -> String {
        cells::join(&self.oldest_first())
    }
}

impl fmt::Display for BufferWindow {
    /// Newest first.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&cells::join(&self.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BufferConfig {
    n: usize,
    q: u32,
    r: usize,
}

impl BufferConfig {
    pub fn new(n: usize, q: u32, r: usize) -> Result<Self> {
        Self::with_alphabet(n, q, r, 2)
    }

    pub fn with_alphabet(n: usize, q: u32, r: usize, ell: u32) -> Result<Self> {
        cells::check_q(q)?;
        if ell != 2 {
            return Err(Error::Unsupported(format!(
                "the multi-cell buffer code is binary, got an alphabet of {ell}"
            )));
        }
        if r == 0 || n < 2 * r {
            return Err(Error::InvalidConfig(format!(
                "buffer code needs r >= 1 and n >= 2r, got n={n}, r={r}"
            )));
        }
        Ok(Self { n, q, r })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn r(&self) -> usize {
        self.r
    }

    fn check(&self, x: &CellVector) -> Result<()> {
        if x.len() != self.n || x.q() != self.q {
            return Err(Error::Contract(format!(
                "buffer code expects {} cells with q={}, got {} cells with q={}",
                self.n,
                self.q,
                x.len(),
                x.q()
            )));
        }
        Ok(())
    }
}

pub fn buf_decode(cfg: &BufferConfig, x: &CellVector) -> Result<BufferWindow> {
    cfg.check(x)?;
    let (n, r) = (cfg.n, cfg.r);
    let m = x.max_level();
    if m == 0 {
        return Ok(BufferWindow::zeros(r));
    }
    let n_m = x.count_at_level(m);
    let cell = |pos: usize| x.level(pos - 1);
    let symbol = |i: usize, level: Level, base: Level| -> Result<u8> {
        match level.checked_sub(base) {
            Some(v @ (0 | 1)) => Ok(v as u8),
            _ => Err(Error::Corrupted(format!(
                "buffer symbol {i} reads level {level} over base {base}"
            ))),
        }
    };
    let mut v = Vec::with_capacity(r);
    for i in 1..=r {
        let (pos, base) = if n_m >= r || i <= n_m {
            (r + n_m + 1 - i, m - 1)
        } else {
            (n + n_m + 1 - i, m.saturating_sub(2))
        };
        if pos > n {
            return Err(Error::Corrupted(format!("{n_m} cells at the top level {m}")));
        }
        v.push(symbol(i, cell(pos), base)?);
    }
    Ok(BufferWindow(v))
}

pub fn buf_encode(cfg: &BufferConfig, x: &CellVector, b: u8) -> Result<WriteOutcome> {
    cfg.check(x)?;
    if b > 1 {
        return Err(Error::Contract(format!("buffer symbol {b} is not binary")));
    }
    let (n, r) = (cfg.n, cfg.r);
    let mut y = x.levels().to_vec();
    let m = x.max_level();
    let n_m = x.count_at_level(m);
    let first = if b == 1 { r + 1 } else { 1 };
    if m == 0 {
        y[first - 1] = 1;
    } else if n_m >= n - r {
        if m + 1 > x.top() {
            return Ok(WriteOutcome::Erase);
        }
        for cell in &mut y[..n - r + 1] {
            *cell = (*cell).max(m);
        }
        y[first - 1] = m + 1;
    } else {
        // The oldest symbol of the previous layer is no longer needed. When
        // n = 2r its cell is the one written next, so it is released first.
        if n_m < r {
            let tail = n - r + 1 + n_m;
            y[tail - 1] = y[tail - 1].max(m - 1);
        }
        let pos = r + n_m + 1;
        y[pos - 1] += Level::from(b);
        if b == 0 {
            let lift = y[..n_m + r]
                .iter()
                .position(|&l| l + 1 == m)
                .ok_or_else(|| Error::Corrupted(format!("no cell at level {} to lift", m - 1)))?;
            y[lift] = m;
        }
    }
    Ok(WriteOutcome::Written(CellVector::new(cfg.q, y)?))
}

/// `(q - 1)(n - r)`.
pub fn guaranteed_writes_buffer(n: u64, q: u64, r: u64) -> u64 {
    (q - 1) * (n - r)
}

/// Layer-copying construction: `(q - 1)(n - 2r + 1) + r - 1`.
pub fn baseline_writes(n: u64, q: u64, r: u64) -> u64 {
    (q - 1) * (n + 1 - 2 * r) + r - 1
}

pub fn euler_phi(n: u64) -> u64 {
    let mut result = n;
    let mut rest = n;
    let mut p = 2;
    while p * p <= rest {
        if rest.is_multiple_of(p) {
            while rest.is_multiple_of(p) {
                rest /= p;
            }
            result -= result / p;
        }
        p += 1;
    }
    if rest > 1 {
        result -= result / rest;
    }
    result
}

fn checked_pow(base: u64, exp: u64) -> Result<u64> {
    let exp = u32::try_from(exp).map_err(|_| Error::Overflow("exponent"))?;
    base.checked_pow(exp).ok_or(Error::Overflow("power"))
}

/// Number of necklaces of length `r` over `ell` symbols, which is the
/// number of cycles the rotation map splits the `ell^r` strings into.
pub fn cycle_count(ell: u64, r: u64) -> Result<u64> {
    if r == 0 {
        return Err(Error::InvalidConfig("cycle count needs r >= 1".into()));
    }
    let mut sum: u64 = 0;
    for d in (1..=r).filter(|d| r.is_multiple_of(*d)) {
        let term = euler_phi(r / d)
            .checked_mul(checked_pow(ell, d)?)
            .ok_or(Error::Overflow("cycle sum"))?;
        sum = sum.checked_add(term).ok_or(Error::Overflow("cycle sum"))?;
    }
    if !sum.is_multiple_of(r) {
        return Err(Error::Contract(format!("necklace sum {sum} not divisible by {r}")));
    }
    Ok(sum / r)
}

/// Upper bound on single-cell writes, `floor((q - ell^r) / cycles) + r`.
pub fn bound_single_cell_new(q: u64, ell: u64, r: u64) -> Result<u64> {
    check_alphabet(ell, r)?;
    let words = checked_pow(ell, r)?;
    if q < words {
        return Err(Error::InvalidConfig(format!("needs q >= ell^r = {words}, got q={q}")));
    }
    Ok((q - words) / cycle_count(ell, r)? + r)
}

/// Earlier single-cell upper bound,
/// `floor((q-1)/(ell^r-1)) r + floor(log_ell(((q-1) mod (ell^r-1)) + 1))`.
pub fn bound_single_cell_old(q: u64, ell: u64, r: u64) -> Result<u64> {
    check_alphabet(ell, r)?;
    if q == 0 {
        return Err(Error::InvalidConfig("q must be positive".into()));
    }
    let span = checked_pow(ell, r)? - 1;
    let rest = (q - 1) % span + 1;
    Ok((q - 1) / span * r + u64::from(rest.ilog(ell)))
}

/// Writes of the earlier single-cell construction, `floor(q / 2^(r-1)) + r - 2`.
pub fn prior_single_cell_writes(q: u64, r: u64) -> Result<u64> {
    if q == 0 || r == 0 {
        return Err(Error::InvalidConfig("needs q >= 1 and r >= 1".into()));
    }
    let scale = checked_pow(2, r - 1)?;
    Ok((q / scale + r).saturating_sub(2))
}

fn check_alphabet(ell: u64, r: u64) -> Result<()> {
    if ell < 2 || r == 0 {
        return Err(Error::InvalidConfig(format!("needs ell >= 2 and r >= 1, got ell={ell}, r={r}")));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct BufferCode {
    cfg: BufferConfig,
}

impl BufferCode {
    pub fn new(cfg: BufferConfig) -> Self {
        Self { cfg }
    }

    pub fn config(&self) -> &BufferConfig {
        &self.cfg
    }

    pub fn header(&self) -> String {
        format!("scheme=buffer n={} q={} r={}", self.cfg.n, self.cfg.q, self.cfg.r)
    }
}

impl Scheme for BufferCode {
    type State = CellVector;

    fn name(&self) -> String {
        format!("buffer n={} q={} r={}", self.cfg.n, self.cfg.q, self.cfg.r)
    }

    fn initial(&self) -> CellVector {
        CellVector::zeros(self.cfg.n, self.cfg.q).expect("validated")
    }

    fn domain(&self) -> InputDomain {
        InputDomain::Symbol(2)
    }

    fn write(&self, state: &CellVector, input: u32) -> Result<WriteOutcome> {
        let b = u8::try_from(input).map_err(|_| Error::Contract(format!("symbol {input} is not binary")))?;
        buf_encode(&self.cfg, state, b)
    }

    fn decode(&self, state: &CellVector) -> Result<Decoded> {
        buf_decode(&self.cfg, state).map(Decoded::Window)
    }

    fn cells(&self, state: &CellVector) -> Vec<Level> {
        state.levels().to_vec()
    }

    fn capacity(&self) -> u64 {
        self.cfg.n as u64 * u64::from(self.cfg.q - 1)
    }

    fn serialize(&self, state: &CellVector) -> String {
        format!("{}\n{}", self.header(), state)
    }

    fn deserialize(&self, text: &str) -> Result<CellVector> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let (Some(header), Some(body), None) = (lines.next(), lines.next(), lines.next()) else {
            return Err(Error::Parse("buffer state needs a header line and a cell line".into()));
        };
        if header != self.header() {
            return Err(Error::Parse(format!(
                "header `{header}` does not match `{}`",
                self.header()
            )));
        }
        let x: CellVector = body.parse()?;
        self.cfg.check(&x)?;
        Ok(x)
    }

    fn trace_fields(&self, state: &CellVector) -> String {
        format!("cells={}", cells::join(state.levels()))
    }
}
