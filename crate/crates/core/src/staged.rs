//! Multi-stage flash code.
//!
//! Stage 0 is the index-less code on blocks of `K = 2^s` cells
//! (`s = ceil(log2 k)`, extra bits frozen at zero). When it runs out, the
//! parity region is re-cut into blocks of half the size, the surviving
//! (non-full) blocks are re-labelled through a batch of `2(K - 1)` index
//! blocks, and writing continues. Stage `r` uses blocks of `K / 2^r` cells
//! and index batch `r`, for `r = 1..s-1`.
//!
//! Two index layouts are supported:
//!
//! * per-stage: every batch has its own cells, and an index block is a
//!   base-`q` number over `ceil(log_q(K + 2))` cells;
//! * stacked binary: an index block is a binary number over
//!   `ceil(log2(K + 2))` cells, and up to `q - 1` consecutive batches share
//!   one group of cells, each batch one level higher than the last.
//!
//! In both layouts an index value of `0` marks a parity block that is free,
//! `i + 1` marks the block holding bit `i`, and the all-ones value marks a
//! full (or nonexistent) block. The `j`-th live index block always describes
//! the `j`-th live parity block.
//!
//! The current stage is not stored: it is the highest batch holding any cell
//! above that batch's base level, or 0 if there is none.

use std::fmt;

use crate::cells::{self, CellVector, InfoVector, Level, WriteOutcome};
use crate::error::{Error, Result};
use crate::indexless::{self, status_of, BlockStatus, Layout};
use crate::scheme::{Decoded, InputDomain, Scheme};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IndexVariant {
    PerStage,
    StackedBinary,
}

impl IndexVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            IndexVariant::PerStage => "per-stage",
            IndexVariant::StackedBinary => "stacked-binary",
        }
    }
}

impl fmt::Display for IndexVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for IndexVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-stage" => Ok(IndexVariant::PerStage),
            "stacked-binary" => Ok(IndexVariant::StackedBinary),
            other => Err(Error::Parse(format!("unknown index variant `{other}`"))),
        }
    }
}

/// `ceil(log2 k)` for `k >= 1`.
pub fn ceil_log2(k: u64) -> u32 {
    assert!(k >= 1);
    64 - (k - 1).leading_zeros()
}

/// Smallest `d` with `base^d >= x`.
pub fn ceil_log(base: u64, x: u64) -> u32 {
    assert!(base >= 2);
    let mut d = 0;
    let mut p: u64 = 1;
    while p < x {
        p = p.saturating_mul(base);
        d += 1;
    }
    d
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StagedConfig {
    k: usize,
    bits: usize,
    q: u32,
    variant: IndexVariant,
    stages: usize,
    index_len: usize,
    n_parity: usize,
    m: usize,
    n_index: usize,
}

impl StagedConfig {
    /// Lays out `n` cells in total: the parity region first, then the index
    /// region. Cells that do not fit a whole block stay unused.
    pub fn new(n: usize, k: usize, q: u32, variant: IndexVariant) -> Result<Self> {
        let shape = Self::shape(k, q, variant)?;
        let min = Self::minimum_n(k, q, variant)?;
        if n < min {
            return Err(Error::InvalidConfig(format!(
                "{variant} staged code with k={k}, q={q} needs n >= {min} \
                 ({} index cells plus {} parity cells), got n={n}",
                shape.n_index,
                shape.bits * shape.bits
            )));
        }
        let n_parity = n - shape.n_index;
        Ok(Self { n_parity, m: n_parity / shape.bits, ..shape })
    }

    /// Sizes the memory from the parity region: `n_parity` cells for blocks
    /// plus exactly the index cells the layout needs.
    pub fn with_parity_cells(n_parity: usize, k: usize, q: u32, variant: IndexVariant) -> Result<Self> {
        let shape = Self::shape(k, q, variant)?;
        Self::new(n_parity + shape.n_index, k, q, variant)
    }

    /// Smallest total cell count for which the layout has `m >= K` blocks.
    pub fn minimum_n(k: usize, q: u32, variant: IndexVariant) -> Result<usize> {
        let shape = Self::shape(k, q, variant)?;
        Ok(shape.n_index + shape.bits * shape.bits)
    }

    fn shape(k: usize, q: u32, variant: IndexVariant) -> Result<Self> {
        cells::check_q(q)?;
        if k < 2 {
            return Err(Error::InvalidConfig(format!("staged code needs k >= 2, got {k}")));
        }
        let stages = ceil_log2(k as u64) as usize;
        let bits = 1usize << stages;
        let per_batch = 2 * (bits - 1);
        let batches = stages - 1;
        let (index_len, n_index) = match variant {
            IndexVariant::PerStage => {
                let mu = ceil_log(u64::from(q), bits as u64 + 2) as usize;
                (mu, batches * per_batch * mu)
            }
            IndexVariant::StackedBinary => {
                let mu = ceil_log(2, bits as u64 + 2) as usize;
                let groups = batches.div_ceil(q as usize - 1);
                (mu, groups * per_batch * mu)
            }
        };
        Ok(Self { k, bits, q, variant, stages, index_len, n_parity: 0, m: 0, n_index })
    }

    pub fn n(&self) -> usize {
        self.n_parity + self.n_index
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn variant(&self) -> IndexVariant {
        self.variant
    }

    /// Bits actually laid out, `2^s`.
    pub fn padded_k(&self) -> usize {
        self.bits
    }

    /// Number of encoding stages `s`.
    pub fn stages(&self) -> usize {
        self.stages
    }

    /// Cells per index block (`mu` or `mu'`).
    pub fn index_len(&self) -> usize {
        self.index_len
    }

    /// Stage-0 block count `m`.
    pub fn blocks(&self) -> usize {
        self.m
    }

    pub fn parity_cells(&self) -> usize {
        self.n_parity
    }

    pub fn index_cells(&self) -> usize {
        self.n_index
    }

    /// Index blocks per batch.
    pub fn batch_blocks(&self) -> usize {
        2 * (self.bits - 1)
    }

    fn top(&self) -> Level {
        (self.q - 1) as Level
    }

    fn parity_layout(&self, stage: usize) -> Layout {
        Layout {
            top: self.top(),
            block_len: self.bits >> stage,
            blocks: self.m << stage,
            bits: self.bits,
        }
    }

    /// First cell of batch `b` (1-based) and the level it counts from.
    fn batch_origin(&self, b: usize) -> (usize, Level) {
        let span = self.batch_blocks() * self.index_len;
        match self.variant {
            IndexVariant::PerStage => ((b - 1) * span, 0),
            IndexVariant::StackedBinary => {
                let layers = self.q as usize - 1;
                ((b - 1) / layers * span, ((b - 1) % layers) as Level)
            }
        }
    }

    fn radix(&self) -> u64 {
        match self.variant {
            IndexVariant::PerStage => u64::from(self.q),
            IndexVariant::StackedBinary => 2,
        }
    }

    /// Value of an index block whose cells are all at their highest digit.
    pub fn full_index_value(&self) -> u64 {
        self.radix().pow(self.index_len as u32) - 1
    }
}

/// Parity region plus index region.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StagedState {
    pub parity: CellVector,
    pub index: CellVector,
}

/// View of one index batch.
struct Batch<'a> {
    cfg: &'a StagedConfig,
    start: usize,
    base: Level,
}

impl<'a> Batch<'a> {
    fn new(cfg: &'a StagedConfig, b: usize) -> Self {
        let (start, base) = cfg.batch_origin(b);
        Self { cfg, start, base }
    }

    fn cells<'s>(&self, index: &'s [Level], slot: usize) -> &'s [Level] {
        let at = self.start + slot * self.cfg.index_len;
        &index[at..at + self.cfg.index_len]
    }

    fn read(&self, index: &[Level], slot: usize) -> Result<u64> {
        let radix = self.cfg.radix();
        let mut u = 0;
        for &l in self.cells(index, slot) {
            let digit = l.checked_sub(self.base).map(u64::from).filter(|&d| d < radix);
            let Some(d) = digit else {
                return Err(Error::Corrupted(format!(
                    "index cell at level {l} outside the batch levels {}..={}",
                    self.base,
                    u64::from(self.base) + radix - 1
                )));
            };
            u = u * radix + d;
        }
        Ok(u)
    }

    fn is_full(&self, index: &[Level], slot: usize) -> Result<bool> {
        Ok(self.read(index, slot)? == self.cfg.full_index_value())
    }

    /// Writes `u` most-significant digit first. Digits only ever grow along
    /// 0 -> i + 1 -> full.
    fn set(&self, index: &mut [Level], slot: usize, u: u64) -> Result<()> {
        let radix = self.cfg.radix();
        let len = self.cfg.index_len;
        let at = self.start + slot * len;
        let mut rest = u;
        for p in (0..len).rev() {
            let digit = (rest % radix) as Level;
            rest /= radix;
            let target = self.base + digit;
            if target < index[at + p] {
                return Err(Error::Contract(format!(
                    "index block {slot} cannot move to value {u} without lowering a cell"
                )));
            }
            index[at + p] = target;
        }
        if rest != 0 {
            return Err(Error::Contract(format!("index value {u} does not fit")));
        }
        Ok(())
    }

    fn started(&self, index: &[Level]) -> bool {
        let span = self.cfg.batch_blocks() * self.cfg.index_len;
        index[self.start..self.start + span].iter().any(|&l| l > self.base)
    }
}

/// Current stage of `state`.
pub fn stage_of(cfg: &StagedConfig, state: &StagedState) -> usize {
    (1..cfg.stages)
        .rev()
        .find(|&b| Batch::new(cfg, b).started(state.index.levels()))
        .unwrap_or(0)
}

/// Lowest-indexed non-full cell of the block gains a level.
fn increment(block: &mut [Level], top: Level) -> Result<()> {
    let cell = block
        .iter_mut()
        .find(|l| **l < top)
        .ok_or_else(|| Error::Contract("increment on a full block".into()))?;
    *cell += 1;
    Ok(())
}

/// Pairs each live parity block with its live index block, in order.
fn live_pairs(cfg: &StagedConfig, state: &StagedState, stage: usize) -> Result<Vec<(usize, usize)>> {
    let layout = cfg.parity_layout(stage);
    let batch = Batch::new(cfg, stage);
    let parity = state.parity.levels();
    let index = state.index.levels();
    let mut pairs = Vec::new();
    let mut slot = 0;
    for j in 0..layout.blocks {
        if status_of(layout.block(parity, j), layout.top) == BlockStatus::Full {
            continue;
        }
        while slot < cfg.batch_blocks() && batch.is_full(index, slot)? {
            slot += 1;
        }
        if slot == cfg.batch_blocks() {
            return Err(Error::Corrupted(format!(
                "live parity block {j} has no live index block in batch {stage}"
            )));
        }
        pairs.push((j, slot));
        slot += 1;
    }
    for s in slot..cfg.batch_blocks() {
        if !batch.is_full(index, s)? {
            return Err(Error::Corrupted(format!(
                "index block {s} of batch {stage} is live but has no parity block"
            )));
        }
    }
    Ok(pairs)
}

fn decode_stage(cfg: &StagedConfig, state: &StagedState, stage: usize) -> Result<InfoVector> {
    if stage == 0 {
        return indexless::decode_blocks(&cfg.parity_layout(0), state.parity.levels());
    }
    let layout = cfg.parity_layout(stage);
    let batch = Batch::new(cfg, stage);
    let mut v = InfoVector::zeros(cfg.bits);
    let mut seen = vec![false; cfg.bits];
    for (j, slot) in live_pairs(cfg, state, stage)? {
        let u = batch.read(state.index.levels(), slot)?;
        if u == 0 {
            continue;
        }
        let i = (u - 1) as usize;
        if i >= cfg.bits {
            return Err(Error::Corrupted(format!("index block {slot} holds {u}")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::Corrupted(format!("bit {i} is held by two parity blocks")));
        }
        v.set(i, cells::parity(layout.block(state.parity.levels(), j)));
    }
    Ok(v)
}

fn check_state(cfg: &StagedConfig, state: &StagedState) -> Result<()> {
    if state.parity.len() != cfg.n_parity
        || state.index.len() != cfg.n_index
        || state.parity.q() != cfg.q
        || state.index.q() != cfg.q
    {
        return Err(Error::Contract("state does not match the staged layout".into()));
    }
    Ok(())
}

/// Decodes all `K` laid-out bits, padding included.
fn decode_padded(cfg: &StagedConfig, state: &StagedState) -> Result<InfoVector> {
    check_state(cfg, state)?;
    decode_stage(cfg, state, stage_of(cfg, state))
}

pub fn staged_decode(cfg: &StagedConfig, state: &StagedState) -> Result<InfoVector> {
    let v = decode_padded(cfg, state)?;
    if v.bits()[cfg.k..].iter().any(|&b| b != 0) {
        return Err(Error::Corrupted("padding bit is set".into()));
    }
    InfoVector::from_bits(v.bits()[..cfg.k].to_vec())
}

/// Decoder of stage `r >= 1`, applied regardless of the detected stage.
pub fn decode_r(cfg: &StagedConfig, state: &StagedState, r: usize) -> Result<InfoVector> {
    check_state(cfg, state)?;
    if r == 0 || r >= cfg.stages {
        return Err(Error::Contract(format!("stage {r} has no index batch")));
    }
    decode_stage(cfg, state, r)
}

/// Encoder of stage `r >= 1`.
pub fn encode_r(cfg: &StagedConfig, state: &StagedState, r: usize, i: usize) -> Result<WriteOutcome<StagedState>> {
    check_state(cfg, state)?;
    if r == 0 || r >= cfg.stages {
        return Err(Error::Contract(format!("stage {r} has no index batch")));
    }
    if i >= cfg.bits {
        return Err(Error::Contract(format!("bit index {i} outside 0..{}", cfg.bits)));
    }
    let layout = cfg.parity_layout(r);
    let batch = Batch::new(cfg, r);
    let pairs = live_pairs(cfg, state, r)?;
    let want = i as u64 + 1;
    let full = cfg.full_index_value();

    let mut parity = state.parity.levels().to_vec();
    let mut index = state.index.levels().to_vec();

    let find = |index: &[Level], u: u64| -> Result<Option<(usize, usize)>> {
        for &(j, slot) in &pairs {
            if batch.read(index, slot)? == u {
                return Ok(Some((j, slot)));
            }
        }
        Ok(None)
    };
    let (j, slot) = if let Some((j, slot)) = find(&index, want)? {
        increment(layout.block_mut(&mut parity, j), layout.top)?;
        (j, slot)
    } else if let Some((j, slot)) = find(&index, 0)? {
        batch.set(&mut index, slot, want)?;
        // an unassigned bit reads 0, so its new value is 1
        if cells::parity(layout.block(&parity, j)) != 1 {
            increment(layout.block_mut(&mut parity, j), layout.top)?;
        }
        (j, slot)
    } else {
        return Ok(WriteOutcome::Erase);
    };
    if status_of(layout.block(&parity, j), layout.top) == BlockStatus::Full {
        batch.set(&mut index, slot, full)?;
    }
    Ok(WriteOutcome::Written(StagedState {
        parity: CellVector::region(cfg.q, parity)?,
        index: CellVector::region(cfg.q, index)?,
    }))
}

/// Moves a state whose stage `r - 1` encoder is exhausted into stage `r`,
/// carrying the current information vector over.
pub fn transition(cfg: &StagedConfig, state: &StagedState, r: usize) -> Result<WriteOutcome<StagedState>> {
    check_state(cfg, state)?;
    if r == 0 || r >= cfg.stages {
        return Err(Error::Contract(format!("no transition into stage {r}")));
    }
    let v = decode_stage(cfg, state, r - 1)?;
    let layout = cfg.parity_layout(r);
    let mut parity = state.parity.levels().to_vec();
    let mut index = state.index.levels().to_vec();

    let live: Vec<usize> = (0..layout.blocks)
        .filter(|&j| status_of(layout.block(&parity, j), layout.top).is_live())
        .collect();
    if live.len() < cfg.bits {
        return Ok(WriteOutcome::Erase);
    }
    if live.len() > cfg.batch_blocks() {
        return Err(Error::Corrupted(format!(
            "{} live blocks entering stage {r}, more than the {} index blocks",
            live.len(),
            cfg.batch_blocks()
        )));
    }

    if cfg.variant == IndexVariant::StackedBinary && r >= 2 {
        // retire the previous batch: its whole group moves to its ceiling
        let (start, base) = cfg.batch_origin(r - 1);
        let span = cfg.batch_blocks() * cfg.index_len;
        for l in &mut index[start..start + span] {
            *l = (*l).max(base + 1);
        }
    }

    let batch = Batch::new(cfg, r);
    let full = cfg.full_index_value();
    for slot in 0..cfg.batch_blocks() {
        let u = if slot < cfg.bits {
            slot as u64 + 1
        } else if slot < live.len() {
            0
        } else {
            full
        };
        batch.set(&mut index, slot, u)?;
    }
    for (bit, &j) in live.iter().take(cfg.bits).enumerate() {
        if cells::parity(layout.block(&parity, j)) != v.get(bit) {
            increment(layout.block_mut(&mut parity, j), layout.top)?;
            if status_of(layout.block(&parity, j), layout.top) == BlockStatus::Full {
                batch.set(&mut index, bit, full)?;
            }
        }
    }
    Ok(WriteOutcome::Written(StagedState {
        parity: CellVector::region(cfg.q, parity)?,
        index: CellVector::region(cfg.q, index)?,
    }))
}

/// Records a flip of bit `i`, moving to later stages as earlier ones run out.
pub fn staged_encode(cfg: &StagedConfig, state: &StagedState, i: usize) -> Result<WriteOutcome<StagedState>> {
    check_state(cfg, state)?;
    if i >= cfg.k {
        return Err(Error::Contract(format!("bit index {i} outside 0..{}", cfg.k)));
    }
    let mut r = stage_of(cfg, state);
    let mut cur = state.clone();
    loop {
        let out = if r == 0 {
            let mut parity = cur.parity.levels().to_vec();
            if indexless::encode_blocks(&cfg.parity_layout(0), &mut parity, i)? {
                WriteOutcome::Written(StagedState {
                    parity: CellVector::region(cfg.q, parity)?,
                    index: cur.index.clone(),
                })
            } else {
                WriteOutcome::Erase
            }
        } else {
            encode_r(cfg, &cur, r, i)?
        };
        if let WriteOutcome::Written(next) = out {
            return Ok(WriteOutcome::Written(next));
        }
        if r + 1 >= cfg.stages {
            return Ok(WriteOutcome::Erase);
        }
        r += 1;
        match transition(cfg, &cur, r)? {
            WriteOutcome::Written(next) => cur = next,
            WriteOutcome::Erase => return Ok(WriteOutcome::Erase),
        }
    }
}

fn s_minus_one(k: u64) -> u64 {
    u64::from(ceil_log2(k.max(1))).saturating_sub(1)
}

/// Levels wasted by per-stage index cells,
/// `2(q - 1)(k - 1)(s - 1) ceil(log_q(k + 2))`.
pub fn per_stage_index_term(k: u64, q: u64) -> u64 {
    2 * (q - 1) * k.saturating_sub(1) * s_minus_one(k) * u64::from(ceil_log(q, k + 2))
}

/// Levels wasted by stacked binary index cells,
/// `2(q - 1)(k - 1) ceil((s - 1)/(q - 1)) ceil(log2(k + 2))`.
pub fn stacked_index_term(k: u64, q: u64) -> u64 {
    2 * (q - 1) * k.saturating_sub(1) * s_minus_one(k).div_ceil(q - 1) * u64::from(ceil_log(2, k + 2))
}

/// Everything but the index cells: partition leftovers `(q-1)(k-1)`, the
/// last stage's unfinished 2-cell blocks, at most `(k-1)(2q-3)`, both
/// rounded up to `3(q-1)(k-1)`, plus one level per parity fix in each of
/// the `s - 1` transitions.
fn non_index_terms(k: u64, q: u64) -> u64 {
    3 * (q - 1) * k.saturating_sub(1) + k * s_minus_one(k)
}

/// Deficiency bound of the per-stage layout,
/// `(q-1)(k-1)(2(s-1) ceil(log_q(k+2)) + 3) + k(s-1)`. `n` does not enter.
pub fn bound_th2(_n: u64, k: u64, q: u64) -> u64 {
    per_stage_index_term(k, q) + non_index_terms(k, q)
}

/// Deficiency bound of the stacked layout: the stacked index term plus the
/// same non-index terms as [`bound_th2`].
pub fn bound_main(_n: u64, k: u64, q: u64) -> u64 {
    stacked_index_term(k, q) + non_index_terms(k, q)
}

#[derive(Clone, Debug)]
pub struct StagedCode {
    cfg: StagedConfig,
}

impl StagedCode {
    pub fn new(cfg: StagedConfig) -> Self {
        Self { cfg }
    }

    pub fn config(&self) -> &StagedConfig {
        &self.cfg
    }

    /// The deficiency bound matching this layout.
    pub fn deficiency_bound(&self) -> u64 {
        let (n, k, q) = (self.cfg.n() as u64, self.cfg.k as u64, u64::from(self.cfg.q));
        match self.cfg.variant {
            IndexVariant::PerStage => bound_th2(n, k, q),
            IndexVariant::StackedBinary => bound_main(n, k, q),
        }
    }

    pub fn header(&self) -> String {
        format!(
            "scheme=staged variant={} n={} k={} q={}",
            self.cfg.variant,
            self.cfg.n(),
            self.cfg.k,
            self.cfg.q
        )
    }
}

impl Scheme for StagedCode {
    type State = StagedState;

    fn name(&self) -> String {
        format!(
            "staged variant={} n={} k={} q={}",
            self.cfg.variant,
            self.cfg.n(),
            self.cfg.k,
            self.cfg.q
        )
    }

    fn initial(&self) -> StagedState {
        StagedState {
            parity: CellVector::region(self.cfg.q, vec![0; self.cfg.n_parity]).expect("validated"),
            index: CellVector::region(self.cfg.q, vec![0; self.cfg.n_index]).expect("validated"),
        }
    }

    fn domain(&self) -> InputDomain {
        InputDomain::BitIndex(self.cfg.k)
    }

    fn write(&self, state: &StagedState, input: u32) -> Result<WriteOutcome<StagedState>> {
        staged_encode(&self.cfg, state, input as usize)
    }

    fn decode(&self, state: &StagedState) -> Result<Decoded> {
        staged_decode(&self.cfg, state).map(Decoded::Info)
    }

    fn cells(&self, state: &StagedState) -> Vec<Level> {
        let mut all = state.parity.levels().to_vec();
        all.extend_from_slice(state.index.levels());
        all
    }

    fn capacity(&self) -> u64 {
        self.cfg.n() as u64 * u64::from(self.cfg.q - 1)
    }

    fn serialize(&self, state: &StagedState) -> String {
        format!("{}\n{}\n{}", self.header(), state.parity, state.index)
    }

    fn deserialize(&self, text: &str) -> Result<StagedState> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let (Some(header), Some(p), Some(x), None) = (lines.next(), lines.next(), lines.next(), lines.next()) else {
            return Err(Error::Parse("staged state needs a header line and two region lines".into()));
        };
        if header != self.header() {
            return Err(Error::Parse(format!(
                "header `{header}` does not match `{}`",
                self.header()
            )));
        }
        let state = StagedState {
            parity: CellVector::parse_region(p)?,
            index: CellVector::parse_region(x)?,
        };
        check_state(&self.cfg, &state)?;
        Ok(state)
    }

    fn trace_fields(&self, state: &StagedState) -> String {
        format!(
            "stage={} parity={} index={}",
            stage_of(&self.cfg, state),
            cells::join(state.parity.levels()),
            cells::join(state.index.levels())
        )
    }
}
