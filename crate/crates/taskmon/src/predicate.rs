//! Atomic predicates and predicate trees.
//!
//! An atomic predicate pairs a Boolean evaluation with a quantitative
//! (robustness) evaluation over environment states. The two must agree in
//! sign: the Boolean holds exactly when the robustness is strictly positive.
//! Predicate trees combine atoms with `and`/`or`; conjunction takes the min
//! of robustness values and disjunction the max, which preserves the sign
//! agreement.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

type BoolFn = Arc<dyn Fn(&[f64], &[f64]) -> bool + Send + Sync>;
type QuantFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// A named atomic predicate with paired Boolean and robustness evaluations.
///
/// `arity` is the number of numeric parameters the atom takes in
/// specification text; both evaluators receive `(state, params)`.
#[derive(Clone)]
pub struct AtomicPredicateDecl {
    pub name: String,
    pub arity: usize,
    bool_eval: BoolFn,
    quant_eval: QuantFn,
}

impl AtomicPredicateDecl {
    pub fn new(
        name: impl Into<String>,
        arity: usize,
        bool_eval: impl Fn(&[f64], &[f64]) -> bool + Send + Sync + 'static,
        quant_eval: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            arity,
            bool_eval: Arc::new(bool_eval),
            quant_eval: Arc::new(quant_eval),
        }
    }

    /// Declare an atom from its robustness function alone; the Boolean
    /// evaluation is `quant > 0`, making the sign agreement hold by
    /// construction.
    pub fn from_quant(
        name: impl Into<String>,
        arity: usize,
        quant_eval: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + Clone + 'static,
    ) -> Self {
        let q = quant_eval.clone();
        Self::new(
            name,
            arity,
            move |s, p| q(s, p) > 0.0,
            quant_eval,
        )
    }

    pub fn eval_bool(&self, state: &[f64], params: &[f64]) -> bool {
        (self.bool_eval)(state, params)
    }

    pub fn eval_quant(&self, state: &[f64], params: &[f64]) -> f64 {
        (self.quant_eval)(state, params)
    }
}

impl fmt::Debug for AtomicPredicateDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AtomicPredicateDecl")
            .field("name", &self.name)
            .field("arity", &self.arity)
            .finish()
    }
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("predicate `{0}` is already registered")]
    DuplicateName(String),
}

/// Registry of atomic predicates, keyed by unique name.
#[derive(Clone, Debug, Default)]
pub struct PredicateRegistry {
    by_name: BTreeMap<String, AtomicPredicateDecl>,
}

impl PredicateRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, decl: AtomicPredicateDecl) -> Result<(), RegistryError> {
        if self.by_name.contains_key(&decl.name) {
            return Err(RegistryError::DuplicateName(decl.name));
        }
        self.by_name.insert(decl.name.clone(), decl);
        Ok(())
    }

    pub fn lookup(&self, name: &str) -> Option<&AtomicPredicateDecl> {
        self.by_name.get(name)
    }

    pub fn len(&self) -> usize {
        self.by_name.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_name.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.by_name.keys().map(|s| s.as_str())
    }
}

/// A negation-free predicate tree over registered atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PredicateAst {
    Atom { name: String, params: Vec<f64> },
    And(Box<PredicateAst>, Box<PredicateAst>),
    Or(Box<PredicateAst>, Box<PredicateAst>),
}

impl PredicateAst {
    pub fn atom(name: impl Into<String>, params: Vec<f64>) -> Self {
        PredicateAst::Atom {
            name: name.into(),
            params,
        }
    }

    pub fn and(l: PredicateAst, r: PredicateAst) -> Self {
        PredicateAst::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: PredicateAst, r: PredicateAst) -> Self {
        PredicateAst::Or(Box::new(l), Box::new(r))
    }

    /// Every atom resolves in `registry` with matching arity.
    pub fn resolves_in(&self, registry: &PredicateRegistry) -> bool {
        match self {
            PredicateAst::Atom { name, params } => registry
                .lookup(name)
                .is_some_and(|d| d.arity == params.len()),
            PredicateAst::And(l, r) | PredicateAst::Or(l, r) => {
                l.resolves_in(registry) && r.resolves_in(registry)
            }
        }
    }

    pub fn eval_bool(&self, state: &[f64], registry: &PredicateRegistry) -> bool {
        match self {
            PredicateAst::Atom { name, params } => {
                let decl = registry
                    .lookup(name)
                    .unwrap_or_else(|| panic!("unresolved atom `{name}`"));
                decl.eval_bool(state, params)
            }
            PredicateAst::And(l, r) => l.eval_bool(state, registry) && r.eval_bool(state, registry),
            PredicateAst::Or(l, r) => l.eval_bool(state, registry) || r.eval_bool(state, registry),
        }
    }

    pub fn eval_quant(&self, state: &[f64], registry: &PredicateRegistry) -> f64 {
        match self {
            PredicateAst::Atom { name, params } => {
                let decl = registry
                    .lookup(name)
                    .unwrap_or_else(|| panic!("unresolved atom `{name}`"));
                decl.eval_quant(state, params)
            }
            PredicateAst::And(l, r) => l
                .eval_quant(state, registry)
                .min(r.eval_quant(state, registry)),
            PredicateAst::Or(l, r) => l
                .eval_quant(state, registry)
                .max(r.eval_quant(state, registry)),
        }
    }

    /// Top-level conjuncts: `a and (b and c)` yields `[a, b, c]`.
    pub fn top_conjuncts(&self) -> Vec<&PredicateAst> {
        match self {
            PredicateAst::And(l, r) => {
                let mut out = l.top_conjuncts();
                out.extend(r.top_conjuncts());
                out
            }
            other => vec![other],
        }
    }
}

/// d∞ from a point to an axis-aligned box, signed: positive outside,
/// zero on the boundary, negative inside (depth to the nearest face).
pub fn signed_box_distance(point: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    debug_assert_eq!(point.len(), lo.len());
    debug_assert_eq!(point.len(), hi.len());
    let mut outside: f64 = 0.0;
    let mut depth = f64::INFINITY;
    for d in 0..point.len() {
        let below = lo[d] - point[d];
        let above = point[d] - hi[d];
        outside = outside.max(below.max(above));
        depth = depth.min((point[d] - lo[d]).min(hi[d] - point[d]));
    }
    if outside > 0.0 {
        outside
    } else {
        -depth.max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reach_decl() -> AtomicPredicateDecl {
        AtomicPredicateDecl::from_quant("reach", 2, |s, p| {
            1.0 - (s[0] - p[0]).abs().max((s[1] - p[1]).abs())
        })
    }

    fn avoid_decl() -> AtomicPredicateDecl {
        AtomicPredicateDecl::from_quant("avoid", 4, |s, p| {
            signed_box_distance(&s[..2], &[p[0], p[2]], &[p[1], p[3]])
        })
    }

    #[test]
    fn register_reach_then_avoid() {
        let mut reg = PredicateRegistry::new();
        reg.register(reach_decl()).unwrap();
        assert_eq!(reg.len(), 1);
        // robustness of reach x at s is 1 - d∞(s, x)
        let d = reg.lookup("reach").unwrap();
        assert_eq!(d.eval_quant(&[5.0, 10.0, 7.0], &[5.0, 10.0]), 1.0);
        reg.register(avoid_decl()).unwrap();
        assert_eq!(reg.len(), 2);
    }

    #[test]
    fn duplicate_registration_fails() {
        let mut reg = PredicateRegistry::new();
        reg.register(reach_decl()).unwrap();
        let err = reg.register(reach_decl()).unwrap_err();
        assert!(matches!(err, RegistryError::DuplicateName(n) if n == "reach"));
    }

    #[test]
    fn avoid_robustness_is_signed_box_distance() {
        let mut reg = PredicateRegistry::new();
        reg.register(avoid_decl()).unwrap();
        let d = reg.lookup("avoid").unwrap();
        let o = [4.0, 6.0, 4.0, 6.0];
        // outside: d∞((3,5), [4,6]x[4,6]) = 1
        assert_eq!(d.eval_quant(&[3.0, 5.0], &o), 1.0);
        // inside: negative, bool false
        assert!(d.eval_quant(&[5.0, 5.0], &o) <= 0.0);
        assert!(!d.eval_bool(&[5.0, 5.0], &o));
        // boundary: zero robustness, bool false
        assert_eq!(d.eval_quant(&[4.0, 5.0], &o), 0.0);
        assert!(!d.eval_bool(&[4.0, 5.0], &o));
    }

    #[test]
    fn tree_eval_min_max() {
        let mut reg = PredicateRegistry::new();
        reg.register(reach_decl()).unwrap();
        reg.register(avoid_decl()).unwrap();
        let p = PredicateAst::and(
            PredicateAst::atom("reach", vec![0.0, 0.0]),
            PredicateAst::atom("avoid", vec![4.0, 6.0, 4.0, 6.0]),
        );
        let s = [0.5, 0.0];
        let reach_q: f64 = 1.0 - 0.5;
        let avoid_q = 3.5;
        assert_eq!(p.eval_quant(&s, &reg), reach_q.min(avoid_q));
        assert!(p.eval_bool(&s, &reg));

        let q = PredicateAst::or(
            PredicateAst::atom("reach", vec![9.0, 9.0]),
            PredicateAst::atom("reach", vec![0.0, 0.0]),
        );
        assert_eq!(q.eval_quant(&s, &reg), 0.5);
    }

    #[test]
    fn top_conjuncts_flatten() {
        let a = PredicateAst::atom("a", vec![]);
        let b = PredicateAst::atom("b", vec![]);
        let c = PredicateAst::atom("c", vec![]);
        let t = PredicateAst::and(a.clone(), PredicateAst::and(b.clone(), c.clone()));
        let parts = t.top_conjuncts();
        assert_eq!(parts, vec![&a, &b, &c]);
        // or is not split
        let t2 = PredicateAst::or(a.clone(), b);
        assert_eq!(t2.top_conjuncts().len(), 1);
    }

    #[test]
    fn signed_distance_geometry() {
        let lo = [4.0, 4.0];
        let hi = [6.0, 6.0];
        // brute-force oracle: min over a dense grid of box points
        let s = [3.0, 5.0];
        let mut best = f64::INFINITY;
        let n = 200;
        for i in 0..=n {
            for j in 0..=n {
                let ox = lo[0] + (hi[0] - lo[0]) * i as f64 / n as f64;
                let oy = lo[1] + (hi[1] - lo[1]) * j as f64 / n as f64;
                best = best.min((s[0] - ox).abs().max((s[1] - oy).abs()));
            }
        }
        assert!((signed_box_distance(&s, &lo, &hi) - best).abs() < 1e-9);
        assert_eq!(signed_box_distance(&s, &lo, &hi), 1.0);
    }
}
