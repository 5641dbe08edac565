//! Constant-rate flash code.
//!
//! The first `n - k` cells form the index group, split into `m` blocks of
//! `ceil(log2(k + 1))` cells; the last `k` cells form the parity group.
//! Writing runs in `q - 1` phases. In phase `p` each flip of bit `i` stores
//! `i + 1` in binary, with cell levels `p - 1` and `p`, in the next unused
//! index block. When a phase has used all `m` blocks, the current bits are
//! copied into the parity group at levels `p - 1` and `p`, every index cell
//! is raised to `p`, and phase `p + 1` starts. Bits are decoded as the
//! parity snapshot with the current phase's flips replayed on top.
//!
//! Storing `i + 1` rather than `i` keeps a used block distinguishable from
//! an unused one, so every used block has a cell at the phase level.

use crate::cells::{self, CellVector, InfoVector, Level, WriteOutcome};
use crate::error::{Error, Result};
use crate::scheme::{Decoded, InputDomain, Scheme};
use crate::staged::ceil_log2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConstRateConfig {
    n: usize,
    k: usize,
    q: u32,
    block_len: usize,
    m: usize,
}

impl ConstRateConfig {
    pub fn new(n: usize, k: usize, q: u32) -> Result<Self> {
        Self::with_alphabet(n, k, q, 2)
    }

    /// Only the binary phase alphabet is implemented; larger alphabets are
    /// refused rather than approximated.
    pub fn with_alphabet(n: usize, k: usize, q: u32, alphabet: u32) -> Result<Self> {
        cells::check_q(q)?;
        if alphabet != 2 {
            return Err(Error::Unsupported(format!(
                "constant-rate phases over a {alphabet}-ary alphabet are not implemented, only binary"
            )));
        }
        if k == 0 || n <= k {
            return Err(Error::InvalidConfig(format!(
                "constant-rate code needs n > k >= 1, got n={n}, k={k}"
            )));
        }
        let block_len = ceil_log2(k as u64 + 1) as usize;
        let m = (n - k) / block_len;
        if m == 0 {
            return Err(Error::InvalidConfig(format!(
                "{} index cells cannot hold one {block_len}-cell index block",
                n - k
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

    /// Cells per index block.
    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// Index blocks, i.e. writes per phase.
    pub fn blocks(&self) -> usize {
        self.m
    }

    fn phases(&self) -> Level {
        (self.q - 1) as Level
    }
}

/// `m(q - 1)`.
pub fn guaranteed_writes_constrate(cfg: &ConstRateConfig) -> u64 {
    cfg.m as u64 * u64::from(cfg.q - 1)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConstRateState {
    pub index: CellVector,
    pub parity: CellVector,
}

impl ConstRateState {
    pub fn fresh(cfg: &ConstRateConfig) -> Self {
        Self {
            index: CellVector::region(cfg.q, vec![0; cfg.n - cfg.k]).expect("checked q"),
            parity: CellVector::region(cfg.q, vec![0; cfg.k]).expect("checked q"),
        }
    }
}

struct Phase {
    /// 1-based phase number.
    p: Level,
    /// Index values of the used blocks, in order.
    used: Vec<usize>,
    base: InfoVector,
}

fn check_shape(cfg: &ConstRateConfig, x: &ConstRateState) -> Result<()> {
    if x.index.len() != cfg.n - cfg.k
        || x.parity.len() != cfg.k
        || x.index.q() != cfg.q
        || x.parity.q() != cfg.q
    {
        return Err(Error::Contract("state does not match the constant-rate layout".into()));
    }
    Ok(())
}

fn read_phase(cfg: &ConstRateConfig, x: &ConstRateState) -> Result<Phase> {
    check_shape(cfg, x)?;
    let index = x.index.levels();
    let blocks = &index[..cfg.m * cfg.block_len];
    let p = blocks.iter().copied().max().unwrap_or(0).max(1);
    let mut used = Vec::new();
    for (b, block) in blocks.chunks(cfg.block_len).enumerate() {
        let mut value = 0usize;
        for &l in block {
            if l + 1 < p || l > p {
                return Err(Error::Corrupted(format!(
                    "index block {b} has a cell at level {l} during phase {p}"
                )));
            }
            value = value * 2 + usize::from(l + 1 - p);
        }
        // in phase 1 an unused block is all zeros, which reads as 0 too
        if value == 0 {
            continue;
        }
        if used.len() != b {
            return Err(Error::Corrupted(format!("index block {b} is used after an unused one")));
        }
        if value > cfg.k {
            return Err(Error::Corrupted(format!("index block {b} holds {value}, above k={}", cfg.k)));
        }
        used.push(value - 1);
    }
    let mut base = InfoVector::zeros(cfg.k);
    if p >= 2 {
        for (j, &l) in x.parity.levels().iter().enumerate() {
            match l.checked_sub(p - 2) {
                Some(bit @ (0 | 1)) => base.set(j, bit as u8),
                _ => {
                    return Err(Error::Corrupted(format!(
                        "parity cell {j} at level {l} during phase {p}"
                    )))
                }
            }
        }
    } else if x.parity.levels().iter().any(|&l| l != 0) {
        return Err(Error::Corrupted("parity group written during phase 1".into()));
    }
    Ok(Phase { p, used, base })
}

fn replay(phase: &Phase) -> InfoVector {
    let mut v = phase.base.clone();
    for &i in &phase.used {
        v.toggle(i);
    }
    v
}

pub fn cr_decode(cfg: &ConstRateConfig, x: &ConstRateState) -> Result<InfoVector> {
    read_phase(cfg, x).map(|phase| replay(&phase))
}

/// Current phase (1-based) and blocks used in it.
pub fn cr_phase(cfg: &ConstRateConfig, x: &ConstRateState) -> Result<(u32, usize)> {
    let phase = read_phase(cfg, x)?;
    Ok((u32::from(phase.p), phase.used.len()))
}

pub fn cr_encode(cfg: &ConstRateConfig, x: &ConstRateState, i: usize) -> Result<WriteOutcome<ConstRateState>> {
    if i >= cfg.k {
        return Err(Error::Contract(format!("bit index {i} outside 0..{}", cfg.k)));
    }
    let phase = read_phase(cfg, x)?;
    let mut index = x.index.levels().to_vec();
    let mut parity = x.parity.levels().to_vec();
    let mut p = phase.p;
    let mut slot = phase.used.len();
    if slot == cfg.m {
        if p == cfg.phases() {
            return Ok(WriteOutcome::Erase);
        }
        let v = replay(&phase);
        for (j, cell) in parity.iter_mut().enumerate() {
            let next = (p - 1) + Level::from(v.get(j));
            if next < *cell {
                return Err(Error::Corrupted(format!("parity snapshot would lower cell {j}")));
            }
            *cell = next;
        }
        for cell in &mut index {
            *cell = (*cell).max(p);
        }
        p += 1;
        slot = 0;
    }
    let value = i + 1;
    let block = &mut index[slot * cfg.block_len..(slot + 1) * cfg.block_len];
    for (d, cell) in block.iter_mut().enumerate() {
        let bit = (value >> (cfg.block_len - 1 - d)) & 1;
        *cell = (p - 1) + bit as Level;
    }
    Ok(WriteOutcome::Written(ConstRateState {
        index: CellVector::region(cfg.q, index)?,
        parity: CellVector::region(cfg.q, parity)?,
    }))
}

#[derive(Clone, Debug)]
pub struct ConstRateCode {
    cfg: ConstRateConfig,
}

impl ConstRateCode {
    pub fn new(cfg: ConstRateConfig) -> Self {
        Self { cfg }
    }

    pub fn config(&self) -> &ConstRateConfig {
        &self.cfg
    }

    pub fn header(&self) -> String {
        format!("scheme=constrate n={} k={} q={}", self.cfg.n, self.cfg.k, self.cfg.q)
    }
}

impl Scheme for ConstRateCode {
    type State = ConstRateState;

    fn name(&self) -> String {
        format!("constrate n={} k={} q={}", self.cfg.n, self.cfg.k, self.cfg.q)
    }

    fn initial(&self) -> ConstRateState {
        ConstRateState::fresh(&self.cfg)
    }

    fn domain(&self) -> InputDomain {
        InputDomain::BitIndex(self.cfg.k)
    }

    fn write(&self, state: &ConstRateState, input: u32) -> Result<WriteOutcome<ConstRateState>> {
        cr_encode(&self.cfg, state, input as usize)
    }

    fn decode(&self, state: &ConstRateState) -> Result<Decoded> {
        cr_decode(&self.cfg, state).map(Decoded::Info)
    }

    fn cells(&self, state: &ConstRateState) -> Vec<Level> {
        let mut all = state.index.levels().to_vec();
        all.extend_from_slice(state.parity.levels());
        all
    }

    fn capacity(&self) -> u64 {
        self.cfg.n as u64 * u64::from(self.cfg.q - 1)
    }

    fn serialize(&self, state: &ConstRateState) -> String {
        format!("{}\n{}\n{}", self.header(), state.index, state.parity)
    }

    fn deserialize(&self, text: &str) -> Result<ConstRateState> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let (Some(header), Some(ix), Some(px), None) = (lines.next(), lines.next(), lines.next(), lines.next()) else {
            return Err(Error::Parse("constant-rate state needs a header line and two group lines".into()));
        };
        if header != self.header() {
            return Err(Error::Parse(format!(
                "header `{header}` does not match `{}`",
                self.header()
            )));
        }
        let state = ConstRateState {
            index: CellVector::parse_region(ix)?,
            parity: CellVector::parse_region(px)?,
        };
        check_shape(&self.cfg, &state)?;
        Ok(state)
    }

    fn trace_fields(&self, state: &ConstRateState) -> String {
        let phase = cr_phase(&self.cfg, state).map_or_else(|_| "?".to_string(), |(p, _)| p.to_string());
        format!(
            "phase={phase} index={} parity={}",
            cells::join(state.index.levels()),
            cells::join(state.parity.levels())
        )
    }
}
