//! Acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so that every criterion prints a
//! single `PASS` or `FAIL` line; the process exits non-zero if any fails.
//! Expected numbers come from oracles written here, not from the library's
//! own formula functions.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use flashcode::cells::{CellVector, Level, WriteOutcome};
use flashcode::indexless::Block;
use flashcode::staged::stage_of;
use flashcode::verifier::{
    consistency_run, max_writes, min_writes_exhaustive, min_writes_iddfs, random_adversary, replay_witness,
    trial_inputs, DEFAULT_BUDGET,
};
use flashcode::{
    buffer, trace_line, BufferCode, BufferConfig, ConstRateCode, ConstRateConfig, IndexVariant, IndexlessCode,
    IndexlessConfig, Scheme, StagedCode, StagedConfig, TwoBitCode, TwoBitConfig,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn ceil_log(base: u64, x: u64) -> u64 {
    let (mut d, mut p) = (0, 1);
    while p < x {
        p *= base;
        d += 1;
    }
    d
}

fn two_bit_exactness() -> Outcome {
    let mut notes = Vec::new();
    for (n, q) in [(2u64, 3u64), (2, 5), (3, 3), (3, 5), (4, 3)] {
        let code = TwoBitCode::new(TwoBitConfig::new(n as usize, q as u32).map_err(err)?);
        let report = min_writes_exhaustive(&code, DEFAULT_BUDGET).map_err(err)?;
        let t = report.t().ok_or_else(|| format!("n={n} q={q}: {:?}", report.outcome))?;
        let claimed = (n - 1) * (q - 1) + (q - 1) / 2;
        ensure(t >= claimed, || format!("n={n} q={q}: t={t} below {claimed}"))?;
        let cross = min_writes_iddfs(&code, t + 2).map_err(err)?;
        ensure(cross == Some(t), || format!("n={n} q={q}: iterative deepening gives {cross:?}, search gives {t}"))?;
        ensure(replay_witness(&code, report.witness().unwrap()).map_err(err)?, || {
            format!("n={n} q={q}: witness does not replay")
        })?;
        let tag = if t == claimed { "=" } else { ">" };
        notes.push(format!("({n},{q}) t={t}{tag}{claimed}"));
    }
    Ok(notes.join(" "))
}

fn indexless_golden_orders() -> Outcome {
    // cell-writing orders for a k=4, q=3 block, one chain per bit
    let chains: [[&str; 9]; 4] = [
        ["0000", "1000", "2000", "2100", "2200", "2210", "2220", "2221", "2222"],
        ["0000", "0100", "0200", "0210", "0220", "0221", "0222", "1222", "2222"],
        ["0000", "0010", "0020", "0021", "0022", "1022", "2022", "2122", "2222"],
        ["0000", "0001", "0002", "1002", "2002", "2102", "2202", "2212", "2222"],
    ];
    for (i, chain) in chains.iter().enumerate() {
        let mut block = Block::empty(4, 3).map_err(err)?;
        ensure(block.to_string() == format!("({})", chain[0]), || format!("bit {i}: start {block}"))?;
        for (step, want) in chain.iter().enumerate().skip(1) {
            block = if step == 1 { block.write_new(i) } else { block.write() }.map_err(err)?;
            ensure(block.to_string() == format!("({want})"), || {
                format!("bit {i} step {step}: got {block}, want ({want})")
            })?;
            if step < 8 {
                let idx = block.read_index().map_err(err)?;
                ensure(idx == i, || format!("bit {i} step {step}: index reads {idx}"))?;
            }
        }
    }
    Ok("4 chains x 8 transitions".into())
}

fn indexless_deficiency() -> Outcome {
    let (n, k) = (16u64, 4u64);
    let mut notes = Vec::new();
    for q in [3u64, 5] {
        let code = IndexlessCode::new(IndexlessConfig::new(n as usize, k as usize, q as u32).map_err(err)?);
        let summary = random_adversary(&code, 1000, 10 * (n * q) as usize, 0xACE0 + q).map_err(err)?;
        let bound = (k - 1) * ((k + 1) * (q - 1) - 1) + (k - 1) * (q - 1);
        ensure(summary.violations.is_empty(), || format!("q={q}: {}", summary.violations[0].1))?;
        ensure(summary.erased_trials == 1000, || format!("q={q}: only {} trials erased", summary.erased_trials))?;
        let worst = summary.max_deficiency.unwrap();
        ensure(worst <= bound, || format!("q={q}: deficiency {worst} above {bound}"))?;
        notes.push(format!("q={q} worst={worst}<={bound}"));
    }
    Ok(notes.join(" "))
}

/// Staged bound recomputed from its parts.
fn staged_bound(k: u64, q: u64, variant: IndexVariant) -> u64 {
    let s = ceil_log(2, k);
    let sm1 = s.saturating_sub(1);
    let index = match variant {
        IndexVariant::PerStage => 2 * (q - 1) * (k - 1) * sm1 * ceil_log(q, k + 2),
        IndexVariant::StackedBinary => 2 * (q - 1) * (k - 1) * sm1.div_ceil(q - 1) * ceil_log(2, k + 2),
    };
    index + 3 * (q - 1) * (k - 1) + k * sm1
}

fn staged_consistency() -> Outcome {
    let k = 4usize;
    let mut notes = Vec::new();
    for q in [3u32, 4] {
        for variant in [IndexVariant::PerStage, IndexVariant::StackedBinary] {
            let cfg = StagedConfig::with_parity_cells(16, k, q, variant).map_err(err)?;
            let code = StagedCode::new(cfg);
            let bound = staged_bound(k as u64, u64::from(q), variant);
            let capacity = cfg.n() as u64 * u64::from(q - 1);
            let (mut worst, mut reached_last) = (0, 0);
            for trial in 0..500 {
                let inputs = trial_inputs(code.domain(), 0x57A6 + u64::from(q), trial, 10 * capacity as usize);
                let run = consistency_run(&code, &inputs).map_err(err)?;
                if let Some(f) = run.failure {
                    return Err(format!("q={q} {variant} trial {trial}: {f}"));
                }
                ensure(run.erased, || format!("q={q} {variant} trial {trial}: no erasure"))?;
                worst = worst.max(capacity - run.writes as u64);
                if stage_of(&cfg, &run.final_state) + 1 == cfg.stages() {
                    reached_last += 1;
                }
            }
            ensure(worst <= bound, || format!("q={q} {variant}: deficiency {worst} above {bound}"))?;
            ensure(reached_last > 0, || format!("q={q} {variant}: no run left stage 0"))?;
            notes.push(format!("q={q} {variant} n={} worst={worst}<={bound} staged={reached_last}/500", cfg.n()));
        }
    }
    Ok(notes.join(" "))
}

/// Example table: written bit, buffer oldest first, cells.
const TABLE: [(Option<u8>, [u8; 4], [Level; 11]); 15] = [
    (None, [0, 0, 0, 0], [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0]),
    (Some(1), [0, 0, 0, 1], [0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0]),
    (Some(1), [0, 0, 1, 1], [0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0]),
    (Some(0), [0, 1, 1, 0], [1, 0, 0, 0, 1, 1, 0, 0, 0, 0, 0]),
    (Some(0), [1, 1, 0, 0], [1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0]),
    (Some(1), [1, 0, 0, 1], [1, 1, 0, 0, 1, 1, 0, 0, 1, 0, 0]),
    (Some(0), [0, 0, 1, 0], [1, 1, 1, 0, 1, 1, 0, 0, 1, 0, 0]),
    (Some(0), [0, 1, 0, 0], [1, 1, 1, 1, 1, 1, 0, 0, 1, 0, 0]),
    (Some(1), [1, 0, 0, 1], [1, 1, 1, 1, 2, 1, 1, 1, 1, 0, 0]),
    (Some(1), [0, 0, 1, 1], [1, 1, 1, 1, 2, 2, 1, 1, 1, 0, 0]),
    (Some(1), [0, 1, 1, 1], [1, 1, 1, 1, 2, 2, 2, 1, 1, 1, 0]),
    (Some(0), [1, 1, 1, 0], [2, 1, 1, 1, 2, 2, 2, 1, 1, 1, 1]),
    (Some(1), [1, 1, 0, 1], [2, 1, 1, 1, 2, 2, 2, 1, 2, 1, 1]),
    (Some(1), [1, 0, 1, 1], [2, 1, 1, 1, 2, 2, 2, 1, 2, 2, 1]),
    // printed with the previous row's cells; corrected here
    (Some(0), [0, 1, 1, 0], [2, 2, 1, 1, 2, 2, 2, 1, 2, 2, 1]),
];
const PRINTED_ROW_14: [Level; 11] = [2, 1, 1, 1, 2, 2, 2, 1, 2, 2, 1];

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// After `s` writes into `n` cells holding `r` symbols, the top level is
/// `x + 1` and holds `y` cells, where `s = x(n - r) + y`, `1 <= y <= n - r`.
fn max_level_lemma(n: usize, r: usize, s: usize, x: &CellVector) -> Result<(), String> {
    if s == 0 {
        return ensure(x.max_level() == 0, || "fresh memory is not zero".into());
    }
    let per = n - r;
    let (layers, y) = ((s - 1) / per, (s - 1) % per + 1);
    let top = x.max_level();
    ensure(usize::from(top) == layers + 1 && x.count_at_level(top) == y, || {
        format!("after {s} writes: top {top} with {} cells, want {} with {y}", x.count_at_level(top), layers + 1)
    })
}

fn buffer_golden_trace() -> Outcome {
    let (n, q, r) = (11, 3, 4);
    let code = BufferCode::new(BufferConfig::new(n, q, r).map_err(err)?);
    let mut x = code.initial();
    for (w, (bit, window, cells)) in TABLE.iter().enumerate() {
        if let Some(b) = bit {
            x = code.write(&x, u32::from(*b)).map_err(err)?.written().ok_or("unexpected erasure")?;
        }
        let want = format!(
            "w={w} b={} cells={} buffer={}",
            bit.map_or("-".to_string(), |b| b.to_string()),
            join(cells),
            join(window)
        );
        let got = trace_line(&code, w, bit.map(u32::from), &x);
        ensure(got == want, || format!("row {w}: got `{got}`, want `{want}`"))?;
        max_level_lemma(n, r, w, &x)?;
    }
    let printed = CellVector::new(q, PRINTED_ROW_14.to_vec()).map_err(err)?;
    ensure(max_level_lemma(n, r, 14, &printed).is_err(), || "printed row 14 satisfies the lemma".into())?;
    ensure(code.write(&x, 0).map_err(err)?.is_erase(), || "write 15 does not erase".into())?;
    Ok("rows 0-13 verbatim, row 14 corrected; printed row 14 has 6 top cells, lemma needs 7".into())
}

/// Newest-first last `r` symbols, zero padded.
fn true_window(history: &[u8], r: usize) -> Vec<u8> {
    (0..r).map(|i| if i < history.len() { history[history.len() - 1 - i] } else { 0 }).collect()
}

struct BufferWalk {
    cfg: BufferConfig,
    t: usize,
    sequences: u64,
}

impl BufferWalk {
    fn walk(&mut self, x: &CellVector, history: &mut Vec<u8>) -> Result<(), String> {
        let s = history.len();
        max_level_lemma(self.cfg.n(), self.cfg.r(), s, x)?;
        for b in 0..2u8 {
            let out = buffer::buf_encode(&self.cfg, x, b).map_err(err)?;
            if s == self.t {
                ensure(out.is_erase(), || format!("write {} succeeds after {history:?}", s + 1))?;
                continue;
            }
            let WriteOutcome::Written(y) = out else {
                return Err(format!("erasure at write {} after {history:?}", s + 1));
            };
            ensure(x.levels().iter().zip(y.levels()).all(|(a, b)| b >= a), || "a level went down".into())?;
            history.push(b);
            let got = buffer::buf_decode(&self.cfg, &y).map_err(err)?;
            ensure(got.newest_first() == true_window(history, self.cfg.r()), || {
                format!("window {} after {history:?}", got.oldest_first_string())
            })?;
            self.walk(&y, history)?;
            history.pop();
        }
        if s == self.t {
            self.sequences += 1;
        }
        Ok(())
    }
}

fn buffer_exhaustive() -> Outcome {
    let mut notes = Vec::new();
    for (n, r, q) in [(4usize, 2usize, 2u32), (5, 2, 3), (6, 2, 3), (6, 3, 2)] {
        let cfg = BufferConfig::new(n, q, r).map_err(err)?;
        let t = (q as usize - 1) * (n - r);
        let mut walk = BufferWalk { cfg, t, sequences: 0 };
        walk.walk(&CellVector::zeros(n, q).map_err(err)?, &mut Vec::new())?;
        ensure(walk.sequences == 1 << t, || format!("({n},{r},{q}): {} sequences", walk.sequences))?;
        let code = BufferCode::new(cfg);
        let bfs = min_writes_exhaustive(&code, DEFAULT_BUDGET).map_err(err)?.t();
        let most = max_writes(&code, DEFAULT_BUDGET).map_err(err)?;
        ensure(bfs == Some(t as u64) && most == Some(t as u64), || {
            format!("({n},{r},{q}): search gives {bfs:?}..{most:?}, want {t}")
        })?;
        notes.push(format!("({n},{r},{q}) t={t} seqs={}", walk.sequences));
    }
    Ok(notes.join(" "))
}

fn max_level_everywhere() -> Outcome {
    let mut runs = 0;
    for (n, q, r) in [(11usize, 3u32, 4usize), (8, 4, 4), (9, 5, 3), (20, 6, 5), (12, 7, 6)] {
        let code = BufferCode::new(BufferConfig::new(n, q, r).map_err(err)?);
        for trial in 0..200 {
            let inputs = trial_inputs(code.domain(), 0x1E77A, trial, (q as usize) * n);
            let mut x = code.initial();
            for (s, &b) in inputs.iter().enumerate() {
                max_level_lemma(n, r, s, &x).map_err(|e| format!("({n},{q},{r}) trial {trial}: {e}"))?;
                match code.write(&x, b).map_err(err)? {
                    WriteOutcome::Written(y) => x = y,
                    WriteOutcome::Erase => {
                        ensure(s == (q as usize - 1) * (n - r), || format!("({n},{q},{r}): erased at {s}"))?;
                        break;
                    }
                }
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} random runs at every step, plus the trace and exhaustive walks"))
}

fn bound_dominance() -> Outcome {
    let mut points = 0;
    for ell in [2u64, 3] {
        for r in [2u64, 3, 4] {
            for q in ell.pow(r as u32)..=1000 {
                let new = buffer::bound_single_cell_new(q, ell, r).map_err(err)?;
                let old = buffer::bound_single_cell_old(q, ell, r).map_err(err)?;
                ensure(new <= old, || format!("ell={ell} r={r} q={q}: new {new} > old {old}"))?;
                points += 1;
            }
        }
    }
    Ok(format!("{points} grid points"))
}

/// Orbits of cyclic rotation on length-`r` strings over `ell` symbols.
fn rotation_orbits(ell: usize, r: usize) -> u64 {
    let total = ell.pow(r as u32);
    let digits = |mut x: usize| {
        let mut d = vec![0; r];
        for slot in d.iter_mut().rev() {
            *slot = x % ell;
            x /= ell;
        }
        d
    };
    let mut canon = std::collections::BTreeSet::new();
    for x in 0..total {
        let d = digits(x);
        let least = (0..r).map(|s| [&d[s..], &d[..s]].concat()).min().unwrap();
        canon.insert(least);
    }
    canon.len() as u64
}

fn cycle_count_oracle() -> Outcome {
    for ell in 1..=3usize {
        for r in 1..=6usize {
            let got = buffer::cycle_count(ell as u64, r as u64).map_err(err)?;
            let want = rotation_orbits(ell, r);
            ensure(got == want, || format!("ell={ell} r={r}: {got} vs {want}"))?;
        }
    }
    let spots = (buffer::cycle_count(2, 2).map_err(err)?, buffer::cycle_count(2, 3).map_err(err)?);
    ensure(spots == (3, 4), || format!("spot values {spots:?}"))?;
    Ok("ell<=3, r<=6; (2,2)=3, (2,3)=4".into())
}

fn constrate_exact() -> Outcome {
    let mut notes = Vec::new();
    for (k, n, q) in [(2usize, 8usize, 3u32), (4, 20, 3)] {
        let code = ConstRateCode::new(ConstRateConfig::new(n, k, q).map_err(err)?);
        let m = (n - k) / ceil_log(2, k as u64 + 1) as usize;
        let want = (m * (q as usize - 1)) as u64;
        let least = min_writes_exhaustive(&code, DEFAULT_BUDGET).map_err(err)?;
        let most = max_writes(&code, DEFAULT_BUDGET).map_err(err)?;
        ensure(least.t() == Some(want) && most == Some(want), || {
            format!("(k={k},n={n},q={q}): writes range {:?}..{most:?}, want {want}", least.t())
        })?;
        notes.push(format!("(k={k},n={n},q={q}) m={m} t={want} states={}", least.states_explored));
    }
    Ok(notes.join(" "))
}

/// Worst observed deficiency of the stacked staged code over k log2 k.
fn deficiency_growth_report() -> String {
    let q = 3u32;
    let mut parts = Vec::new();
    for k in [4usize, 8, 16] {
        let cfg = StagedConfig::with_parity_cells(k * k, k, q, IndexVariant::StackedBinary).unwrap();
        let code = StagedCode::new(cfg);
        let horizon = 4 * cfg.n() * (q as usize);
        let summary = random_adversary(&code, 100, horizon, 0xDEF1).unwrap();
        let worst = summary.max_deficiency.unwrap_or(0);
        let ratio = worst as f64 / (k as f64 * (k as f64).log2());
        parts.push(format!("k={k} n={} deficiency={worst} ratio={ratio:.2}", cfg.n()));
    }
    parts.join(" ")
}

/// Name, time limit and check.
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("two-bit exactness", Duration::from_secs(10), two_bit_exactness),
        ("index-less golden orders", Duration::from_secs(5), indexless_golden_orders),
        ("index-less deficiency", Duration::from_secs(30), indexless_deficiency),
        ("staged consistency", Duration::from_secs(60), staged_consistency),
        ("buffer golden trace", Duration::from_secs(5), buffer_golden_trace),
        ("buffer exhaustiveness", Duration::from_secs(60), buffer_exhaustive),
        ("max-level lemma", Duration::from_secs(30), max_level_everywhere),
        ("bound dominance", Duration::from_secs(5), bound_dominance),
        ("cycle-count oracle", Duration::from_secs(5), cycle_count_oracle),
        ("constant-rate exactness", Duration::from_secs(60), constrate_exact),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= *limit {
                Ok(detail)
            } else {
                Err(format!("took {elapsed:.1?}, limit {limit:?}"))
            }
        });
        match result {
            Ok(detail) => println!("criterion {:>2} PASS {name} [{elapsed:.2?}]: {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name} [{elapsed:.2?}]: {reason}", i + 1);
            }
        }
    }
    println!("report: {}", deficiency_growth_report());
    if failed == 0 {
        println!("acceptance: all 10 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 10 criteria failed");
        ExitCode::FAILURE
    }
}
