//! Shared generators for the integration suites.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use taskmon::ast::SpecAst;
use taskmon::predicate::{AtomicPredicateDecl, PredicateAst, PredicateRegistry};
use taskmon::semantics::Rollout;

/// Atoms whose Boolean reading is `robustness > 0` by construction, over
/// planar states, mirroring the built-in reach/avoid/fuel shapes plus an
/// affine family for variety.
pub fn consistency_registry() -> PredicateRegistry {
    let mut reg = PredicateRegistry::new();
    reg.register(AtomicPredicateDecl::from_quant("near", 2, |s, p| {
        1.0 - (s[0] - p[0]).abs().max((s[1] - p[1]).abs())
    }))
    .unwrap();
    reg.register(AtomicPredicateDecl::from_quant("clear", 4, |s, p| {
        taskmon::predicate::signed_box_distance(&s[..2], &[p[0], p[2]], &[p[1], p[3]])
    }))
    .unwrap();
    reg.register(AtomicPredicateDecl::from_quant("plane", 3, |s, p| {
        p[0] * s[0] + p[1] * s[1] + p[2]
    }))
    .unwrap();
    reg
}

/// Random atom over [`consistency_registry`].
pub fn random_atom(rng: &mut ChaCha8Rng) -> PredicateAst {
    match rng.random_range(0..3) {
        0 => PredicateAst::atom(
            "near",
            vec![rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)],
        ),
        1 => {
            let x = rng.random_range(-4.0..2.0);
            let y = rng.random_range(-4.0..2.0);
            PredicateAst::atom(
                "clear",
                vec![x, x + rng.random_range(0.5..3.0), y, y + rng.random_range(0.5..3.0)],
            )
        }
        _ => PredicateAst::atom(
            "plane",
            vec![
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-2.0..2.0),
            ],
        ),
    }
}

pub fn random_predicate(rng: &mut ChaCha8Rng, depth: usize) -> PredicateAst {
    if depth == 0 || rng.random_range(0..3) == 0 {
        return random_atom(rng);
    }
    let l = random_predicate(rng, depth - 1);
    let r = random_predicate(rng, depth - 1);
    if rng.random_range(0..2) == 0 {
        PredicateAst::and(l, r)
    } else {
        PredicateAst::or(l, r)
    }
}

/// Random specification of depth at most `depth`, over the given atom
/// generator.
pub fn random_spec_with(
    rng: &mut ChaCha8Rng,
    depth: usize,
    atom: &mut impl FnMut(&mut ChaCha8Rng) -> PredicateAst,
) -> SpecAst {
    if depth <= 1 {
        return SpecAst::achieve(atom(rng));
    }
    match rng.random_range(0..8) {
        0 | 1 => SpecAst::achieve(atom(rng)),
        2 | 3 => SpecAst::ensuring(random_spec_with(rng, depth - 1, atom), atom(rng)),
        4 | 5 => SpecAst::seq(
            random_spec_with(rng, depth - 1, atom),
            random_spec_with(rng, depth - 1, atom),
        ),
        _ => SpecAst::choice(
            random_spec_with(rng, depth - 1, atom),
            random_spec_with(rng, depth - 1, atom),
        ),
    }
}

pub fn random_spec(rng: &mut ChaCha8Rng, depth: usize) -> SpecAst {
    random_spec_with(rng, depth, &mut random_atom)
}

/// Random planar rollout with `t` actions (states drawn uniformly in a box).
pub fn random_rollout(rng: &mut ChaCha8Rng, t: usize) -> Rollout {
    let states = (0..=t)
        .map(|_| vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
        .collect();
    Rollout::from_states(states).unwrap()
}
