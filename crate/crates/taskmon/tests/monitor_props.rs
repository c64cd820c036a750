//! Structural properties of compiled monitors.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{consistency_registry, random_spec};
use taskmon::ast::SpecAst;
use taskmon::bench;
use taskmon::compile::{compile, compile_with, CompileOptions};
use taskmon::monitor::RegisterKind;
use taskmon::parser::parse_spec;

/// Every compiled spec passes the structural validator (the acceptance
/// suite runs the full thousand; this is the fast everyday version).
#[test]
fn random_specs_compile_validator_clean() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xFACADE);
    for i in 0..300 {
        let spec = random_spec(&mut rng, 5);
        let monitor = compile(&spec);
        let violations = monitor.validate();
        assert!(violations.is_empty(), "case {i}: {spec:?} -> {violations:?}");
        // depths are defined for every valid monitor
        monitor.longest_path_depths().unwrap();
    }
}

/// Register accounting: one goal register per achieve leaf, one constraint
/// register per ensuring conjunct (shared across its distributed copies),
/// and one recording register per sequencing node whose first operand has
/// several final states.
#[test]
fn register_count_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    for _ in 0..300 {
        let spec = random_spec(&mut rng, 5);
        let monitor = compile(&spec);
        let goals = monitor
            .registers()
            .iter()
            .filter(|r| r.kind == RegisterKind::Goal)
            .count();
        assert_eq!(goals, spec.achieve_count());
        let constraints = monitor
            .registers()
            .iter()
            .filter(|r| r.kind == RegisterKind::Constraint)
            .count();
        assert_eq!(constraints, ensuring_conjuncts(&spec));
        let records = monitor
            .registers()
            .iter()
            .filter(|r| r.kind == RegisterKind::Record)
            .count();
        assert_eq!(records, multi_final_seqs(&spec));
    }
}

fn ensuring_conjuncts(spec: &SpecAst) -> usize {
    match spec {
        SpecAst::Achieve(_) => 0,
        SpecAst::Ensuring(s, p) => p.top_conjuncts().len() + ensuring_conjuncts(s),
        SpecAst::Seq(a, b) | SpecAst::Choice(a, b) => {
            ensuring_conjuncts(a) + ensuring_conjuncts(b)
        }
    }
}

/// Final-state count of the compiled sub-monitor: 1 for achieve, carried
/// through ensuring and seq (the second operand's), summed for choice.
fn final_count(spec: &SpecAst) -> usize {
    match spec {
        SpecAst::Achieve(_) => 1,
        SpecAst::Ensuring(s, _) => final_count(s),
        SpecAst::Seq(_, b) => final_count(b),
        SpecAst::Choice(a, b) => final_count(a) + final_count(b),
    }
}

fn multi_final_seqs(spec: &SpecAst) -> usize {
    match spec {
        SpecAst::Achieve(_) => 0,
        SpecAst::Ensuring(s, _) => multi_final_seqs(s),
        SpecAst::Seq(a, b) => {
            multi_final_seqs(a)
                + multi_final_seqs(b)
                + usize::from(final_count(a) > 1)
        }
        SpecAst::Choice(a, b) => multi_final_seqs(a) + multi_final_seqs(b),
    }
}

/// Guard sign agreement on every transition of every benchmark monitor,
/// over randomized states and register valuations.
#[test]
fn guard_bool_iff_quant_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);
    for entry in bench::suite() {
        let registry = entry.env.registry();
        let ast = parse_spec(entry.spec_text, &registry).unwrap();
        let monitor = compile(&ast);
        let dims = match entry.env {
            taskmon::env::EnvKind::CartPole => 4,
            _ => 3,
        };
        for _ in 0..400 {
            let state: Vec<f64> = (0..dims).map(|_| rng.random_range(-12.0..12.0)).collect();
            let valuation: Vec<f64> = (0..monitor.n_registers())
                .map(|_| rng.random_range(-12.0..12.0))
                .collect();
            for t in monitor.transitions() {
                let b = t.guard.eval_bool(&state, &valuation, &registry);
                let q = t
                    .guard
                    .eval_quant(&state, &valuation, &registry, monitor.sentinel());
                assert_eq!(b, q > 0.0, "guard {} at {state:?} {valuation:?}", t.guard);
            }
        }
    }
}

/// The conjunct-splitting flag only changes register bookkeeping, never
/// the state graph.
#[test]
fn split_flag_preserves_state_graph() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x50F7);
    let unsplit = CompileOptions {
        split_conjuncts: false,
        ..Default::default()
    };
    for _ in 0..100 {
        let spec = random_spec(&mut rng, 4);
        let a = compile(&spec);
        let b = compile_with(&spec, &unsplit);
        assert_eq!(a.n_states(), b.n_states());
        assert_eq!(a.transitions().len(), b.transitions().len());
        assert_eq!(a.finals(), b.finals());
        assert!(b.validate().is_empty());
        assert!(a.n_registers() >= b.n_registers());
    }
}

/// Compiling is a pure function of the AST and options.
#[test]
fn compilation_is_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7EA);
    let _ = consistency_registry();
    for _ in 0..50 {
        let spec = random_spec(&mut rng, 4);
        let a = compile(&spec);
        let b = compile(&spec);
        assert_eq!(a.fingerprint(), b.fingerprint());
    }
}
