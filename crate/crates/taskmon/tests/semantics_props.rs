//! Property tests for the reference semantics.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{consistency_registry, random_rollout, random_spec};
use taskmon::ast::SpecAst;
use taskmon::predicate::{PredicateAst, PredicateRegistry};
use taskmon::semantics::{eval_bool, eval_quant, Rollout};

/// Sign agreement: the Boolean semantics holds exactly when the
/// quantitative value is positive, for randomized specs and rollouts.
#[test]
fn bool_iff_quant_positive() {
    let reg = consistency_registry();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    for _ in 0..1000 {
        let spec = random_spec(&mut rng, 4);
        let t = rand::Rng::random_range(&mut rng, 1..=6);
        let zeta = random_rollout(&mut rng, t);
        let b = eval_bool(&spec, &zeta, &reg);
        let q = eval_quant(&spec, &zeta, &reg).unwrap();
        assert_eq!(b, q > 0.0, "spec {spec:?} on {zeta:?}: bool {b}, quant {q}");
    }
}

/// Once an `achieve` holds it keeps holding as the rollout is extended.
#[test]
fn achieve_is_monotone_under_extension() {
    let reg = consistency_registry();
    let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF);
    let mut checked = 0;
    for _ in 0..2000 {
        let spec = SpecAst::achieve(common::random_predicate(&mut rng, 2));
        let t = rand::Rng::random_range(&mut rng, 1..=5);
        let zeta = random_rollout(&mut rng, t);
        if !eval_bool(&spec, &zeta, &reg) {
            continue;
        }
        checked += 1;
        let mut extended = zeta.clone();
        extended.push(
            vec![0.0, 0.0],
            vec![
                rand::Rng::random_range(&mut rng, -5.0..5.0),
                rand::Rng::random_range(&mut rng, -5.0..5.0),
            ],
        );
        assert!(eval_bool(&spec, &extended, &reg));
    }
    assert!(checked > 100, "generator never satisfied anything");
}

/// A naive evaluator with no memoization, used as a second route for the
/// sequencing clause (brute force over every split point).
fn naive_bool(spec: &SpecAst, states: &[Vec<f64>], reg: &PredicateRegistry) -> bool {
    let t = states.len() - 1;
    match spec {
        SpecAst::Achieve(b) => (0..t).any(|i| b.eval_bool(&states[i], reg)),
        SpecAst::Ensuring(s, b) => {
            naive_bool(s, states, reg) && (0..t).all(|i| b.eval_bool(&states[i], reg))
        }
        SpecAst::Seq(s1, s2) => (0..t).any(|i| {
            naive_bool(s1, &states[..=i], reg) && naive_bool(s2, &states[i..], reg)
        }),
        SpecAst::Choice(s1, s2) => naive_bool(s1, states, reg) || naive_bool(s2, states, reg),
    }
}

fn naive_quant(spec: &SpecAst, states: &[Vec<f64>], reg: &PredicateRegistry) -> f64 {
    let t = states.len() - 1;
    match spec {
        SpecAst::Achieve(b) => (0..t)
            .map(|i| b.eval_quant(&states[i], reg))
            .fold(f64::NEG_INFINITY, f64::max),
        SpecAst::Ensuring(s, b) => (0..t)
            .map(|i| b.eval_quant(&states[i], reg))
            .fold(naive_quant(s, states, reg), f64::min),
        SpecAst::Seq(s1, s2) => (0..t)
            .map(|i| {
                naive_quant(s1, &states[..=i], reg).min(naive_quant(s2, &states[i..], reg))
            })
            .fold(f64::NEG_INFINITY, f64::max),
        SpecAst::Choice(s1, s2) => {
            naive_quant(s1, states, reg).max(naive_quant(s2, states, reg))
        }
    }
}

#[test]
fn seq_split_matches_brute_force() {
    let reg = consistency_registry();
    let mut rng = ChaCha8Rng::seed_from_u64(0xD00D);
    for _ in 0..400 {
        let spec = random_spec(&mut rng, 4);
        let t = rand::Rng::random_range(&mut rng, 1..=6);
        let zeta = random_rollout(&mut rng, t);
        assert_eq!(
            eval_bool(&spec, &zeta, &reg),
            naive_bool(&spec, zeta.states(), &reg)
        );
        let fast = eval_quant(&spec, &zeta, &reg).unwrap();
        let slow = naive_quant(&spec, zeta.states(), &reg);
        assert_eq!(fast, slow);
    }
}

// proptest strategies for ASTs over a tiny nullary-atom alphabet; the
// parser round-trip is about structure, not predicate arithmetic
fn atom_strategy() -> impl Strategy<Value = PredicateAst> {
    prop_oneof![
        Just(PredicateAst::atom("p", vec![])),
        Just(PredicateAst::atom("q", vec![])),
        (any::<i32>(), any::<i32>()).prop_map(|(a, b)| PredicateAst::atom(
            "near",
            vec![f64::from(a % 100), f64::from(b % 100) / 4.0]
        )),
    ]
}

fn pred_strategy() -> impl Strategy<Value = PredicateAst> {
    atom_strategy().prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| PredicateAst::and(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| PredicateAst::or(a, b)),
        ]
    })
}

fn spec_strategy() -> impl Strategy<Value = SpecAst> {
    let leaf = pred_strategy().prop_map(SpecAst::achieve);
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), pred_strategy()).prop_map(|(s, p)| SpecAst::ensuring(s, p)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| SpecAst::seq(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| SpecAst::choice(a, b)),
        ]
    })
}

fn roundtrip_registry() -> PredicateRegistry {
    let mut reg = PredicateRegistry::new();
    for name in ["p", "q"] {
        reg.register(taskmon::predicate::AtomicPredicateDecl::from_quant(
            name,
            0,
            |_, _| 1.0,
        ))
        .unwrap();
    }
    reg.register(taskmon::predicate::AtomicPredicateDecl::from_quant(
        "near",
        2,
        |s: &[f64], p: &[f64]| 1.0 - (s[0] - p[0]).abs().max((s[1] - p[1]).abs()),
    ))
    .unwrap();
    reg
}

proptest! {
    /// print then parse reproduces the AST exactly.
    #[test]
    fn print_parse_round_trip(ast in spec_strategy()) {
        let reg = roundtrip_registry();
        let text = taskmon::printer::print_spec(&ast);
        let back = taskmon::parser::parse_spec(&text, &reg).unwrap();
        prop_assert_eq!(back, ast);
    }

    /// the evaluator never disagrees with itself across memo layouts
    /// (fresh evaluations of the same inputs are equal)
    #[test]
    fn evaluation_is_deterministic(seed in 0u64..500) {
        let reg = consistency_registry();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, 3);
        let zeta = random_rollout(&mut rng, 4);
        prop_assert_eq!(
            eval_bool(&spec, &zeta, &reg),
            eval_bool(&spec, &zeta, &reg)
        );
    }
}

/// Windowing convention pinned: the sub-rollout passed to the right of a
/// split starts at the split state and keeps the final state.
#[test]
fn split_window_convention() {
    let reg = consistency_registry();
    // near(0,0) holds only at s1; near(2,2) holds only at s2; horizon 3
    let states = vec![
        vec![-3.0, -3.0],
        vec![0.0, 0.0],
        vec![2.0, 2.0],
        vec![-3.0, -3.0],
    ];
    let zeta = Rollout::from_states(states).unwrap();
    let spec = SpecAst::seq(
        SpecAst::achieve(PredicateAst::atom("near", vec![0.0, 0.0])),
        SpecAst::achieve(PredicateAst::atom("near", vec![2.0, 2.0])),
    );
    assert!(eval_bool(&spec, &zeta, &reg));
    // flipping the order cannot be satisfied on this rollout
    let flipped = SpecAst::seq(
        SpecAst::achieve(PredicateAst::atom("near", vec![2.0, 2.0])),
        SpecAst::achieve(PredicateAst::atom("near", vec![0.0, 0.0])),
    );
    assert!(!eval_bool(&flipped, &zeta, &reg));
}
