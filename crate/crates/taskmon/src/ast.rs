//! Specification AST.
//!
//! A specification is a finite tree whose leaves are `Achieve` nodes over
//! predicate trees. `Ensuring` attaches a state constraint to a
//! sub-specification, `Seq` runs two specifications one after the other,
//! and `Choice` accepts either.

use serde::{Deserialize, Serialize};

use crate::predicate::{PredicateAst, PredicateRegistry};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SpecAst {
    Achieve(PredicateAst),
    Ensuring(Box<SpecAst>, PredicateAst),
    Seq(Box<SpecAst>, Box<SpecAst>),
    Choice(Box<SpecAst>, Box<SpecAst>),
}

impl SpecAst {
    pub fn achieve(p: PredicateAst) -> Self {
        SpecAst::Achieve(p)
    }

    pub fn ensuring(spec: SpecAst, p: PredicateAst) -> Self {
        SpecAst::Ensuring(Box::new(spec), p)
    }

    pub fn seq(a: SpecAst, b: SpecAst) -> Self {
        SpecAst::Seq(Box::new(a), Box::new(b))
    }

    pub fn choice(a: SpecAst, b: SpecAst) -> Self {
        SpecAst::Choice(Box::new(a), Box::new(b))
    }

    pub fn resolves_in(&self, registry: &PredicateRegistry) -> bool {
        match self {
            SpecAst::Achieve(p) => p.resolves_in(registry),
            SpecAst::Ensuring(s, p) => s.resolves_in(registry) && p.resolves_in(registry),
            SpecAst::Seq(a, b) | SpecAst::Choice(a, b) => {
                a.resolves_in(registry) && b.resolves_in(registry)
            }
        }
    }

    /// Number of `Achieve` leaves.
    pub fn achieve_count(&self) -> usize {
        match self {
            SpecAst::Achieve(_) => 1,
            SpecAst::Ensuring(s, _) => s.achieve_count(),
            SpecAst::Seq(a, b) | SpecAst::Choice(a, b) => a.achieve_count() + b.achieve_count(),
        }
    }

    /// Number of interior nodes of each kind: (ensuring, seq, choice).
    pub fn node_counts(&self) -> (usize, usize, usize) {
        match self {
            SpecAst::Achieve(_) => (0, 0, 0),
            SpecAst::Ensuring(s, _) => {
                let (e, q, c) = s.node_counts();
                (e + 1, q, c)
            }
            SpecAst::Seq(a, b) => {
                let (e1, q1, c1) = a.node_counts();
                let (e2, q2, c2) = b.node_counts();
                (e1 + e2, q1 + q2 + 1, c1 + c2)
            }
            SpecAst::Choice(a, b) => {
                let (e1, q1, c1) = a.node_counts();
                let (e2, q2, c2) = b.node_counts();
                (e1 + e2, q1 + q2, c1 + c2 + 1)
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            SpecAst::Achieve(_) => 1,
            SpecAst::Ensuring(s, _) => 1 + s.depth(),
            SpecAst::Seq(a, b) | SpecAst::Choice(a, b) => 1 + a.depth().max(b.depth()),
        }
    }
}
