//! Index-less indexed flash code.
//!
//! Memory is cut into `m = floor(n / k)` blocks of `k` cells; each block
//! represents one bit. The bit value is the block parity, and the bit index
//! is implied by the cyclic order in which the block's cells are filled:
//! the block for bit `i` fills cell `i` first, then `i + 1`, and so on
//! modulo `k`. The zeros of an active block therefore always form a single
//! cyclic run, and the bit index is the cell right after that run.

use std::fmt;

use crate::cells::{self, CellVector, InfoVector, Level, WriteOutcome};
use crate::error::{Error, Result};
use crate::scheme::{Decoded, InputDomain, Scheme};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockStatus {
    Empty,
    Active,
    Full,
}

impl BlockStatus {
    pub fn is_live(self) -> bool {
        self != BlockStatus::Full
    }
}

pub(crate) fn status_of(cells: &[Level], top: Level) -> BlockStatus {
    if cells.iter().all(|&l| l == 0) {
        BlockStatus::Empty
    } else if cells.iter().all(|&l| l == top) {
        BlockStatus::Full
    } else {
        BlockStatus::Active
    }
}

/// Where the write cursor of an active block sits.
enum Cursor {
    /// Zeros at `start, start + 1, ..` (cyclic), `len` of them.
    ZeroRun { start: usize, len: usize },
    /// No zeros left; `cell` is the only one below the top level.
    LastCell { cell: usize },
}

fn cursor(cells: &[Level], top: Level) -> Result<Cursor> {
    let k = cells.len();
    let zeros = cells.iter().filter(|&&l| l == 0).count();
    match status_of(cells, top) {
        BlockStatus::Empty => {
            return Err(Error::UndefinedIndex("empty block carries no index".into()))
        }
        BlockStatus::Full => {
            return Err(Error::UndefinedIndex("full block carries no index".into()))
        }
        BlockStatus::Active => {}
    }
    if zeros > 0 {
        let mut starts = (0..k).filter(|&j| cells[j] == 0 && cells[(j + k - 1) % k] != 0);
        let start = starts.next().expect("a partial zero set has a run start");
        if starts.next().is_some() {
            return Err(Error::Corrupted(format!(
                "block {cells:?} has more than one run of zeros"
            )));
        }
        Ok(Cursor::ZeroRun { start, len: zeros })
    } else {
        let mut open = (0..k).filter(|&j| cells[j] < top);
        let cell = open.next().expect("an active block has an open cell");
        if open.next().is_some() {
            return Err(Error::Corrupted(format!(
                "block {cells:?} has no zeros but several open cells"
            )));
        }
        Ok(Cursor::LastCell { cell })
    }
}

pub(crate) fn read_index_raw(cells: &[Level], top: Level) -> Result<usize> {
    let k = cells.len();
    Ok(match cursor(cells, top)? {
        Cursor::ZeroRun { start, len } => (start + len) % k,
        Cursor::LastCell { cell } => (cell + 1) % k,
    })
}

pub(crate) fn block_write_raw(cells: &mut [Level], top: Level) -> Result<()> {
    let k = cells.len();
    match cursor(cells, top)? {
        Cursor::ZeroRun { start, .. } => {
            let prev = (start + k - 1) % k;
            if cells[prev] < top {
                cells[prev] += 1;
            } else {
                cells[start] = 1;
            }
        }
        Cursor::LastCell { cell } => cells[cell] += 1,
    }
    Ok(())
}

pub(crate) fn block_write_new_raw(i: usize, cells: &mut [Level], top: Level) -> Result<()> {
    if status_of(cells, top) != BlockStatus::Empty {
        return Err(Error::Contract("write_new needs an empty block".into()));
    }
    if i >= cells.len() {
        return Err(Error::Contract(format!(
            "bit index {i} outside a {}-cell block",
            cells.len()
        )));
    }
    cells[i] = 1;
    Ok(())
}

/// One group of `k` cells.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Block {
    q: u32,
    cells: Vec<Level>,
}

impl Block {
    pub fn new(q: u32, cells: Vec<Level>) -> Result<Self> {
        // reuse the range checks
        let v = CellVector::new(q, cells)?;
        Ok(Self { q, cells: v.levels().to_vec() })
    }

    pub fn empty(k: usize, q: u32) -> Result<Self> {
        Self::new(q, vec![0; k])
    }

    pub fn cells(&self) -> &[Level] {
        &self.cells
    }

    fn top(&self) -> Level {
        (self.q - 1) as Level
    }

    pub fn status(&self) -> BlockStatus {
        status_of(&self.cells, self.top())
    }

    pub fn parity(&self) -> u8 {
        cells::parity(&self.cells)
    }

    /// The bit this active block represents.
    pub fn read_index(&self) -> Result<usize> {
        read_index_raw(&self.cells, self.top())
    }

    /// Advances the block by one level along its cyclic writing order.
    pub fn write(&self) -> Result<Block> {
        if self.status() == BlockStatus::Full {
            return Err(Error::Contract("cannot write to a full block".into()));
        }
        let mut next = self.clone();
        block_write_raw(&mut next.cells, self.top())?;
        Ok(next)
    }

    /// Starts an empty block on bit `i`.
    pub fn write_new(&self, i: usize) -> Result<Block> {
        let mut next = self.clone();
        block_write_new_raw(i, &mut next.cells, self.top())?;
        Ok(next)
    }
}

impl fmt::Display for Block {
    /// Compact digit form used in fixtures, e.g. `(0210)`; levels above 9 are
    /// comma-separated.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.q <= 10 {
            f.write_str("(")?;
            for l in &self.cells {
                write!(f, "{l}")?;
            }
            f.write_str(")")
        } else {
            write!(f, "({})", cells::join(&self.cells))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexlessConfig {
    n: usize,
    k: usize,
    q: u32,
    block_len: usize,
    m: usize,
}

impl IndexlessConfig {
    /// When `k` is odd and `q` even the blocks get `k + 1` cells and the extra
    /// bit stays zero, so that a full block always has even weight.
    pub fn new(n: usize, k: usize, q: u32) -> Result<Self> {
        cells::check_q(q)?;
        if k == 0 {
            return Err(Error::InvalidConfig("k must be positive".into()));
        }
        let block_len = if k % 2 == 1 && q.is_multiple_of(2) { k + 1 } else { k };
        let m = n / block_len;
        if m < block_len {
            return Err(Error::InvalidConfig(format!(
                "need at least {block_len} blocks of {block_len} cells (n >= {}), got n={n}",
                block_len * block_len
            )));
        }
        Ok(Self { n, k, q, block_len, m })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// Cells per block (`k`, or `k + 1` when padded).
    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn blocks(&self) -> usize {
        self.m
    }

    fn check(&self, x: &CellVector) -> Result<()> {
        if x.len() != self.n || x.q() != self.q {
            return Err(Error::Contract(format!(
                "expected {} cells with q={}, got {} cells with q={}",
                self.n,
                self.q,
                x.len(),
                x.q()
            )));
        }
        Ok(())
    }
}

/// Block layout shared with the staged construction, which runs the same
/// maps on its parity region.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Layout {
    pub top: Level,
    pub block_len: usize,
    pub blocks: usize,
    /// Number of distinct bit indices the blocks may carry.
    pub bits: usize,
}

impl Layout {
    pub fn block<'a>(&self, levels: &'a [Level], j: usize) -> &'a [Level] {
        &levels[j * self.block_len..(j + 1) * self.block_len]
    }

    pub fn block_mut<'a>(&self, levels: &'a mut [Level], j: usize) -> &'a mut [Level] {
        &mut levels[j * self.block_len..(j + 1) * self.block_len]
    }
}

pub(crate) fn decode_blocks(layout: &Layout, levels: &[Level]) -> Result<InfoVector> {
    let mut v = InfoVector::zeros(layout.bits);
    let mut seen = vec![false; layout.bits];
    for j in 0..layout.blocks {
        let b = layout.block(levels, j);
        if status_of(b, layout.top) != BlockStatus::Active {
            continue;
        }
        let i = read_index_raw(b, layout.top)?;
        if i >= layout.bits {
            return Err(Error::Corrupted(format!("block {j} carries unused bit index {i}")));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::Corrupted(format!("two active blocks carry bit {i}")));
        }
        v.set(i, cells::parity(b));
    }
    Ok(v)
}

/// Returns `false` when the write needs an erasure.
pub(crate) fn encode_blocks(layout: &Layout, levels: &mut [Level], i: usize) -> Result<bool> {
    for j in 0..layout.blocks {
        let b = layout.block(levels, j);
        if status_of(b, layout.top) == BlockStatus::Active && read_index_raw(b, layout.top)? == i {
            block_write_raw(layout.block_mut(levels, j), layout.top)?;
            return Ok(true);
        }
    }
    for j in 0..layout.blocks {
        if status_of(layout.block(levels, j), layout.top) == BlockStatus::Empty {
            block_write_new_raw(i, layout.block_mut(levels, j), layout.top)?;
            return Ok(true);
        }
    }
    Ok(false)
}

fn layout_of(cfg: &IndexlessConfig) -> Layout {
    Layout {
        top: (cfg.q - 1) as Level,
        block_len: cfg.block_len,
        blocks: cfg.m,
        bits: cfg.block_len,
    }
}

pub fn decode0(cfg: &IndexlessConfig, x: &CellVector) -> Result<InfoVector> {
    cfg.check(x)?;
    let v = decode_blocks(&layout_of(cfg), x.levels())?;
    if v.bits()[cfg.k..].iter().any(|&b| b != 0) {
        return Err(Error::Corrupted("padding bit is set".into()));
    }
    InfoVector::from_bits(v.bits()[..cfg.k].to_vec())
}

pub fn encode0(cfg: &IndexlessConfig, x: &CellVector, i: usize) -> Result<WriteOutcome> {
    cfg.check(x)?;
    if i >= cfg.k {
        return Err(Error::Contract(format!("bit index {i} outside 0..{}", cfg.k)));
    }
    let mut levels = x.levels().to_vec();
    if encode_blocks(&layout_of(cfg), &mut levels, i)? {
        Ok(WriteOutcome::Written(CellVector::new(cfg.q, levels)?))
    } else {
        Ok(WriteOutcome::Erase)
    }
}

/// Number of active blocks in `x`.
pub fn active_blocks(cfg: &IndexlessConfig, x: &CellVector) -> usize {
    let layout = layout_of(cfg);
    (0..cfg.m)
        .filter(|&j| status_of(layout.block(x.levels(), j), layout.top) == BlockStatus::Active)
        .count()
}

/// `(k - 1)((k + 1)(q - 1) - 1)`: levels left behind by at most `k - 1`
/// barely started blocks.
pub fn aux_deficiency_bound(k: u64, q: u64) -> u64 {
    if k == 0 {
        return 0;
    }
    (k - 1) * ((k + 1) * (q - 1) - 1)
}

/// Cells that do not fit in a whole block: at most `k - 1` of them, each
/// worth `q - 1` levels.
pub fn partition_leftover_bound(k: u64, q: u64) -> u64 {
    k.saturating_sub(1) * (q - 1)
}

#[derive(Clone, Debug)]
pub struct IndexlessCode {
    cfg: IndexlessConfig,
}

impl IndexlessCode {
    pub fn new(cfg: IndexlessConfig) -> Self {
        Self { cfg }
    }

    pub fn config(&self) -> &IndexlessConfig {
        &self.cfg
    }
}

impl Scheme for IndexlessCode {
    type State = CellVector;

    fn name(&self) -> String {
        format!("indexless n={} k={} q={}", self.cfg.n, self.cfg.k, self.cfg.q)
    }

    fn initial(&self) -> CellVector {
        CellVector::zeros(self.cfg.n, self.cfg.q).expect("validated config")
    }

    fn domain(&self) -> InputDomain {
        InputDomain::BitIndex(self.cfg.k)
    }

    fn write(&self, state: &CellVector, input: u32) -> Result<WriteOutcome> {
        encode0(&self.cfg, state, input as usize)
    }

    fn decode(&self, state: &CellVector) -> Result<Decoded> {
        decode0(&self.cfg, state).map(Decoded::Info)
    }

    fn cells(&self, state: &CellVector) -> Vec<Level> {
        state.levels().to_vec()
    }

    fn capacity(&self) -> u64 {
        self.cfg.n as u64 * u64::from(self.cfg.q - 1)
    }

    fn serialize(&self, state: &CellVector) -> String {
        state.to_string()
    }

    fn deserialize(&self, text: &str) -> Result<CellVector> {
        let x: CellVector = text.trim().parse()?;
        self.cfg.check(&x)?;
        Ok(x)
    }

    fn trace_fields(&self, state: &CellVector) -> String {
        format!("cells={}", cells::join(state.levels()))
    }
}
