//! Reference evaluation of specifications over finite rollouts.
//!
//! This is the ground-truth path used by tests and by the baseline reward
//! mode; the production reward path goes through the compiled monitor.
//!
//! Index convention (surprising, so stated up front): a rollout of length
//! `t` has states `s_0..s_t`; the temporal operators quantify over `i < t`,
//! so the final state `s_t` is never inspected. A single-state rollout
//! (`t = 0`) therefore satisfies no `achieve`, and its quantitative value
//! is undefined — the public entry point reports an error rather than
//! silently returning −∞.

use thiserror::Error;

use crate::ast::SpecAst;
use crate::predicate::PredicateRegistry;

/// A finite alternating state/action sequence; `actions.len() + 1 == states.len()`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rollout {
    states: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
}

#[derive(Debug, Error)]
pub enum RolloutError {
    #[error("a rollout needs {states} state(s) for {actions} action(s)")]
    LengthMismatch { states: usize, actions: usize },
    #[error("a rollout needs at least one state")]
    Empty,
}

impl Rollout {
    pub fn new(states: Vec<Vec<f64>>, actions: Vec<Vec<f64>>) -> Result<Self, RolloutError> {
        if states.is_empty() {
            return Err(RolloutError::Empty);
        }
        if actions.len() + 1 != states.len() {
            return Err(RolloutError::LengthMismatch {
                states: states.len(),
                actions: actions.len(),
            });
        }
        Ok(Self { states, actions })
    }

    /// States only; action slots are filled with empty vectors.
    pub fn from_states(states: Vec<Vec<f64>>) -> Result<Self, RolloutError> {
        if states.is_empty() {
            return Err(RolloutError::Empty);
        }
        let actions = vec![Vec::new(); states.len() - 1];
        Ok(Self { states, actions })
    }

    /// Rollout length `t` (the number of actions).
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn actions(&self) -> &[Vec<f64>] {
        &self.actions
    }

    pub fn push(&mut self, action: Vec<f64>, state: Vec<f64>) {
        self.actions.push(action);
        self.states.push(state);
    }
}

#[derive(Debug, Error)]
pub enum SemanticsError {
    #[error("quantitative value of a length-0 rollout is undefined")]
    DegenerateRollout,
}

/// Boolean satisfaction of `spec` on `zeta`.
pub fn eval_bool(spec: &SpecAst, zeta: &Rollout, registry: &PredicateRegistry) -> bool {
    Evaluator::new(spec, zeta, registry).bool_window(spec, 0, zeta.len())
}

/// Quantitative (robustness) value of `spec` on `zeta`; positive iff
/// [`eval_bool`] holds, given sign-consistent atomic predicates.
pub fn eval_quant(
    spec: &SpecAst,
    zeta: &Rollout,
    registry: &PredicateRegistry,
) -> Result<f64, SemanticsError> {
    if zeta.is_empty() {
        return Err(SemanticsError::DegenerateRollout);
    }
    Ok(Evaluator::new(spec, zeta, registry).quant_window(spec, 0, zeta.len()))
}

/// Window evaluator with memoization keyed by (node, lo, hi). Windows are
/// state index ranges: the sub-rollout from `s_lo` through `s_hi`, whose
/// length is `hi - lo`. The seq clause splits a window at every interior
/// point, which without memoization is exponential in nesting depth.
struct Evaluator<'a> {
    zeta: &'a Rollout,
    registry: &'a PredicateRegistry,
    ids: std::collections::HashMap<*const SpecAst, usize>,
    memo_bool: Vec<Option<bool>>,
    memo_quant: Vec<Option<f64>>,
    n_windows: usize,
}

impl<'a> Evaluator<'a> {
    fn new(spec: &'a SpecAst, zeta: &'a Rollout, registry: &'a PredicateRegistry) -> Self {
        let mut nodes = Vec::new();
        collect_nodes(spec, &mut nodes);
        let ids: std::collections::HashMap<_, _> =
            nodes.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let n_states = zeta.states().len();
        let n_windows = n_states * n_states;
        Self {
            zeta,
            registry,
            memo_bool: vec![None; n_windows * ids.len()],
            memo_quant: vec![None; n_windows * ids.len()],
            ids,
            n_windows,
        }
    }

    fn slot(&self, node: &SpecAst, lo: usize, hi: usize) -> usize {
        let idx = self.ids[&(node as *const SpecAst)];
        let n = self.zeta.states().len();
        idx * self.n_windows + lo * n + hi
    }

    fn bool_window(&mut self, node: &SpecAst, lo: usize, hi: usize) -> bool {
        let slot = self.slot(node, lo, hi);
        if let Some(v) = self.memo_bool[slot] {
            return v;
        }
        let states = self.zeta.states();
        let v = match node {
            SpecAst::Achieve(b) => (lo..hi).any(|i| b.eval_bool(&states[i], self.registry)),
            SpecAst::Ensuring(s, b) => {
                (lo..hi).all(|i| b.eval_bool(&states[i], self.registry))
                    && self.bool_window(s, lo, hi)
            }
            SpecAst::Seq(s1, s2) => {
                (lo..hi).any(|m| self.bool_window(s1, lo, m) && self.bool_window(s2, m, hi))
            }
            SpecAst::Choice(s1, s2) => {
                self.bool_window(s1, lo, hi) || self.bool_window(s2, lo, hi)
            }
        };
        self.memo_bool[slot] = Some(v);
        v
    }

    fn quant_window(&mut self, node: &SpecAst, lo: usize, hi: usize) -> f64 {
        let slot = self.slot(node, lo, hi);
        if let Some(v) = self.memo_quant[slot] {
            return v;
        }
        let states = self.zeta.states();
        let v = match node {
            SpecAst::Achieve(b) => (lo..hi)
                .map(|i| b.eval_quant(&states[i], self.registry))
                .fold(f64::NEG_INFINITY, f64::max),
            SpecAst::Ensuring(s, b) => {
                let inner = self.quant_window(s, lo, hi);
                (lo..hi)
                    .map(|i| b.eval_quant(&states[i], self.registry))
                    .fold(inner, f64::min)
            }
            SpecAst::Seq(s1, s2) => (lo..hi)
                .map(|m| {
                    self.quant_window(s1, lo, m)
                        .min(self.quant_window(s2, m, hi))
                })
                .fold(f64::NEG_INFINITY, f64::max),
            SpecAst::Choice(s1, s2) => self
                .quant_window(s1, lo, hi)
                .max(self.quant_window(s2, lo, hi)),
        };
        self.memo_quant[slot] = Some(v);
        v
    }
}

fn collect_nodes(node: &SpecAst, out: &mut Vec<*const SpecAst>) {
    out.push(node as *const SpecAst);
    match node {
        SpecAst::Achieve(_) => {}
        SpecAst::Ensuring(s, _) => collect_nodes(s, out),
        SpecAst::Seq(a, b) | SpecAst::Choice(a, b) => {
            collect_nodes(a, out);
            collect_nodes(b, out);
        }
    }
}
