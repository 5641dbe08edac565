//! The search routines of the verifier checked against each other on small
//! instances of every scheme.

use flashcode::bounds::lower_bound_deficiency;
use flashcode::verifier::{self, Mutant, Mutation};
use flashcode::*;

const BUDGET: u64 = 2_000_000;

struct Facts {
    t: u64,
    longest: u64,
}

fn cross_check<S: Scheme>(scheme: &S) -> Facts {
    let report = verifier::min_writes_exhaustive(scheme, BUDGET).unwrap();
    let t = report.t().unwrap_or_else(|| panic!("{}: {:?}", scheme.name(), report.outcome));
    let witness = report.witness().unwrap();
    assert_eq!(witness.len() as u64, t + 1);
    assert!(verifier::replay_witness(scheme, witness).unwrap());

    let iddfs = verifier::min_writes_iddfs(scheme, t + 1).unwrap();
    assert_eq!(iddfs, Some(t), "{}", scheme.name());

    let longest = verifier::max_writes(scheme, BUDGET).unwrap().expect("bounded search");
    assert!(t <= longest && longest <= scheme.capacity(), "{}: t={t} longest={longest}", scheme.name());

    // The witness ends in an erasure, so no prefix of it fails a check.
    let run = verifier::consistency_run(scheme, witness).unwrap();
    assert!(run.passed(), "{}: {:?}", scheme.name(), run.failure);
    assert!(run.erased);
    assert_eq!(run.writes as u64, t);
    Facts { t, longest }
}

fn flash_lower_bound<S: Scheme>(scheme: &S, n: u64, k: u64, q: u64, t: u64) {
    let deficiency = n * (q - 1) - t;
    let bound = lower_bound_deficiency(n, k, q);
    assert!(deficiency >= bound.floor(), "{}: deficiency {deficiency} < {bound}", scheme.name());
}

#[test]
fn twobit_searches_agree() {
    for (n, q) in [(2, 3), (3, 3), (2, 4), (3, 4), (2, 5)] {
        let code = TwoBitCode::new(TwoBitConfig::new(n, q).unwrap());
        let f = cross_check(&code);
        flash_lower_bound(&code, n as u64, 2, u64::from(q), f.t);
    }
}

#[test]
fn indexless_searches_agree() {
    for (n, k, q) in [(4, 2, 3), (9, 3, 3), (4, 2, 4)] {
        let cfg = IndexlessConfig::new(n, k, q).unwrap();
        let code = IndexlessCode::new(cfg);
        let f = cross_check(&code);
        flash_lower_bound(&code, n as u64, k as u64, u64::from(q), f.t);
    }
}

#[test]
fn constrate_searches_agree() {
    for (n, k, q) in [(4, 2, 3), (6, 3, 3)] {
        let cfg = ConstRateConfig::new(n, k, q).unwrap();
        let code = ConstRateCode::new(cfg);
        let f = cross_check(&code);
        flash_lower_bound(&code, n as u64, k as u64, u64::from(q), f.t);
    }
}

#[test]
fn staged_searches_agree() {
    for variant in [IndexVariant::PerStage, IndexVariant::StackedBinary] {
        let n = StagedConfig::minimum_n(2, 3, variant).unwrap();
        let code = StagedCode::new(StagedConfig::new(n, 2, 3, variant).unwrap());
        let f = cross_check(&code);
        flash_lower_bound(&code, n as u64, 2, 3, f.t);
    }
}

#[test]
fn buffer_searches_agree_with_the_closed_form() {
    for (n, q, r) in [(2, 3, 1), (4, 3, 2), (5, 3, 2), (6, 3, 3), (6, 4, 2)] {
        let code = BufferCode::new(BufferConfig::new(n, q, r).unwrap());
        let f = cross_check(&code);
        let formula = flashcode::buffer::guaranteed_writes_buffer(n as u64, u64::from(q), r as u64);
        assert_eq!(f.t, formula, "buffer n={n} q={q} r={r}");
        // Every write of a buffer code raises the same number of cells in
        // the worst case and the best case alike.
        assert_eq!(f.longest, f.t, "buffer n={n} q={q} r={r}");
    }
}

#[test]
fn serialized_states_rehydrate() {
    let code = StagedCode::new(StagedConfig::with_parity_cells(16, 4, 3, IndexVariant::StackedBinary).unwrap());
    for trial in 0..20 {
        let inputs = verifier::trial_inputs(code.domain(), 11, trial, 200);
        let run = verifier::consistency_run(&code, &inputs).unwrap();
        assert!(run.passed(), "{:?}", run.failure);
        let text = code.serialize(&run.final_state);
        let back = code.deserialize(&text).unwrap();
        assert_eq!(code.serialize(&back), text);
        assert_eq!(code.decode(&back).unwrap(), code.decode(&run.final_state).unwrap());
    }
}

#[test]
fn random_runs_never_beat_the_exhaustive_minimum() {
    let code = BufferCode::new(BufferConfig::new(6, 4, 2).unwrap());
    let t = verifier::min_writes_exhaustive(&code, BUDGET).unwrap().t().unwrap();
    let summary = verifier::random_adversary(&code, 200, 64, 3).unwrap();
    assert!(summary.violations.is_empty());
    assert!(summary.min_writes.unwrap() as u64 >= t);
}

#[test]
fn mutants_are_caught() {
    let code = TwoBitCode::new(TwoBitConfig::new(3, 4).unwrap());
    for mutation in [Mutation::CorruptDecodeAtWeight(3), Mutation::SkipWriteAtWeight(2)] {
        let mutant = Mutant { inner: code.clone(), mutation };
        let summary = verifier::random_adversary(&mutant, 50, 40, 1).unwrap();
        assert!(!summary.violations.is_empty(), "{mutation:?} went unnoticed");
    }
}
