//! Product of an environment and a task monitor.
//!
//! An augmented state pairs the environment state with the monitor state
//! and register valuation; an augmented action pairs an environment action
//! with the id of an enabled monitor transition. Register updates read the
//! pre-step environment state (the update runs on the state the guard was
//! checked against, not the successor).
//!
//! Rewards are rollout-level: the terminal reward is the monitor's reward
//! expression at the final augmented state when the monitor ended final,
//! and bottom otherwise. The shaped reward replaces bottom with a total
//! three-part score: how close the stuck suffix came to leaving its
//! monitor state, a depth bonus, and an offset keeping every non-final
//! score below every final reward.

use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::env::Environment;
use crate::monitor::{StateId, TaskMonitor, TransitionId};
use crate::predicate::PredicateRegistry;
use crate::semantics::Rollout;

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedState {
    pub env_state: Vec<f64>,
    pub monitor_state: StateId,
    pub valuation: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedAction {
    pub env_action: Vec<f64>,
    pub transition: TransitionId,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AugmentedRollout {
    pub states: Vec<AugmentedState>,
    pub actions: Vec<AugmentedAction>,
}

impl AugmentedRollout {
    pub fn start(s0: AugmentedState) -> Self {
        Self {
            states: vec![s0],
            actions: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn last(&self) -> &AugmentedState {
        self.states.last().expect("rollout has at least one state")
    }

    pub fn push(&mut self, action: AugmentedAction, next: AugmentedState) {
        self.actions.push(action);
        self.states.push(next);
    }

    /// Drop the monitor components, leaving the environment rollout.
    pub fn project(&self) -> Rollout {
        Rollout::new(
            self.states.iter().map(|s| s.env_state.clone()).collect(),
            self.actions.iter().map(|a| a.env_action.clone()).collect(),
        )
        .expect("augmented rollout is well-formed")
    }
}

/// Initial augmented state: environment initial state, initial monitor
/// state, initial register valuation.
pub fn reset(env: &dyn Environment, monitor: &TaskMonitor, rng: &mut ChaCha8Rng) -> AugmentedState {
    AugmentedState {
        env_state: env.reset(rng),
        monitor_state: monitor.initial(),
        valuation: monitor.initial_valuation().to_vec(),
    }
}

/// All transitions out of the current monitor state whose guards hold at
/// (env state, valuation). Never empty: the self loop's guard is true.
pub fn enabled_transitions(
    state: &AugmentedState,
    monitor: &TaskMonitor,
    registry: &PredicateRegistry,
) -> Vec<TransitionId> {
    monitor
        .transitions_from(state.monitor_state)
        .iter()
        .copied()
        .filter(|tid| {
            monitor
                .transition(*tid)
                .guard
                .eval_bool(&state.env_state, &state.valuation, registry)
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum StepError {
    #[error("transition {0:?} does not leave monitor state {1}")]
    WrongSource(TransitionId, StateId),
    #[error("transition {0:?} is disabled at the current augmented state")]
    Disabled(TransitionId),
}

/// One augmented step: the environment steps stochastically, the monitor
/// moves along the chosen transition, and registers update from the
/// pre-step environment state.
pub fn step(
    state: &AugmentedState,
    action: &AugmentedAction,
    env: &dyn Environment,
    monitor: &TaskMonitor,
    registry: &PredicateRegistry,
    rng: &mut ChaCha8Rng,
) -> Result<AugmentedState, StepError> {
    let t = monitor.transition(action.transition);
    if t.source != state.monitor_state {
        return Err(StepError::WrongSource(action.transition, state.monitor_state));
    }
    if !t.guard.eval_bool(&state.env_state, &state.valuation, registry) {
        return Err(StepError::Disabled(action.transition));
    }
    let valuation = crate::monitor::eval_update(
        &t.update,
        &state.env_state,
        &state.valuation,
        registry,
    );
    let env_state = env.step(&state.env_state, &action.env_action, rng);
    Ok(AugmentedState {
        env_state,
        monitor_state: t.target,
        valuation,
    })
}

/// Terminal reward of a full-horizon rollout: the final state's reward
/// expression if the monitor ended in a final state, bottom otherwise.
/// Bottom stands apart from all reals and never enters arithmetic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TerminalReward {
    Value(f64),
    Bottom,
}

impl TerminalReward {
    pub fn is_positive(&self) -> bool {
        matches!(self, TerminalReward::Value(v) if *v > 0.0)
    }

    pub fn value_or(&self, bottom: f64) -> f64 {
        match self {
            TerminalReward::Value(v) => *v,
            TerminalReward::Bottom => bottom,
        }
    }
}

pub fn terminal_reward(
    rollout: &AugmentedRollout,
    monitor: &TaskMonitor,
    registry: &PredicateRegistry,
) -> TerminalReward {
    let last = rollout.last();
    if !monitor.is_final(last.monitor_state) {
        return TerminalReward::Bottom;
    }
    let expr = monitor
        .reward(last.monitor_state)
        .expect("final state carries a reward");
    TerminalReward::Value(expr.eval(&last.env_state, &last.valuation, registry))
}

#[derive(Debug, Error)]
#[error("alpha is undefined on final monitor state {0}")]
pub struct AlphaUndefined(pub StateId);

/// Proximity of a non-final augmented state to leaving its monitor state:
/// the max quantitative guard value over non-self outgoing transitions.
pub fn alpha(
    state: &AugmentedState,
    monitor: &TaskMonitor,
    registry: &PredicateRegistry,
) -> Result<f64, AlphaUndefined> {
    alpha_at(
        &state.env_state,
        state.monitor_state,
        &state.valuation,
        monitor,
        registry,
    )
}

/// [`alpha`] with the monitor state supplied separately (the shaped reward
/// evaluates the stuck state's guards along earlier steps).
pub fn alpha_at(
    env_state: &[f64],
    q: StateId,
    valuation: &[f64],
    monitor: &TaskMonitor,
    registry: &PredicateRegistry,
) -> Result<f64, AlphaUndefined> {
    if monitor.is_final(q) {
        return Err(AlphaUndefined(q));
    }
    Ok(monitor
        .non_self_from(q)
        .map(|t| {
            t.guard
                .eval_quant(env_state, valuation, registry, monitor.sentinel())
        })
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Error)]
pub enum ShapingError {
    #[error("c_upper must be non-negative, got {0}")]
    NegativeCUpper(f64),
    #[error(transparent)]
    Invalid(#[from] crate::monitor::InvalidMonitor),
}

/// Constants stratifying the shaped reward: a lower bound on final-state
/// rewards, an upper bound on |alpha| over non-final states, and the
/// longest-path depths of the monitor graph.
#[derive(Clone, Debug)]
pub struct ShapingConstants {
    pub c_lower: f64,
    pub c_upper: f64,
    pub depths: Vec<usize>,
    pub max_depth: usize,
}

impl ShapingConstants {
    pub fn new(c_lower: f64, c_upper: f64, monitor: &TaskMonitor) -> Result<Self, ShapingError> {
        if c_upper < 0.0 {
            return Err(ShapingError::NegativeCUpper(c_upper));
        }
        let (depths, max_depth) = monitor.longest_path_depths()?;
        Ok(Self {
            c_lower,
            c_upper,
            depths,
            max_depth,
        })
    }

    /// Estimate the constants from the environment's nominal state box.
    ///
    /// Register values that guards can observe are recorded or running-min
    /// robustness values of the monitor's predicates (the sentinel never
    /// reaches a guard: guards out of the initial state read no
    /// registers, and every other state is entered after at least one
    /// update). So an upper bound on any guard's |robustness| is the max
    /// |robustness| of any atomic predicate over the box, sampled on a
    /// grid with a safety margin. c_lower defaults to -sentinel, an
    /// intentionally loose bound; both are checked at runtime and
    /// overridable in configuration.
    pub fn estimate(
        monitor: &TaskMonitor,
        env: &dyn Environment,
        registry: &PredicateRegistry,
    ) -> Result<Self, ShapingError> {
        let mut atoms: Vec<crate::predicate::PredicateAst> = Vec::new();
        let mut push_pred = |p: &crate::predicate::PredicateAst| {
            collect_atoms(p, &mut atoms);
        };
        for t in monitor.transitions() {
            collect_guard_atoms(&t.guard, &mut push_pred);
            for e in t.update.values() {
                collect_val_atoms(e, &mut push_pred);
            }
        }
        let bounds = env.state_bounds();
        let mut peak: f64 = 0.0;
        for s in grid_points(&bounds, 5) {
            for a in &atoms {
                peak = peak.max(a.eval_quant(&s, registry).abs());
            }
        }
        let c_upper = (1.25 * peak).max(1.0);
        Self::new(-monitor.sentinel(), c_upper, monitor)
    }

    pub fn with_overrides(mut self, c_lower: Option<f64>, c_upper: Option<f64>) -> Self {
        if let Some(l) = c_lower {
            self.c_lower = l;
        }
        if let Some(u) = c_upper {
            self.c_upper = u;
        }
        self
    }

    pub fn depth(&self, q: StateId) -> usize {
        self.depths[q.0 as usize]
    }
}

fn collect_atoms(p: &crate::predicate::PredicateAst, out: &mut Vec<crate::predicate::PredicateAst>) {
    use crate::predicate::PredicateAst as P;
    match p {
        P::Atom { .. } => {
            if !out.contains(p) {
                out.push(p.clone());
            }
        }
        P::And(l, r) | P::Or(l, r) => {
            collect_atoms(l, out);
            collect_atoms(r, out);
        }
    }
}

fn collect_guard_atoms(
    g: &crate::monitor::GuardExpr,
    f: &mut impl FnMut(&crate::predicate::PredicateAst),
) {
    use crate::monitor::GuardExpr as G;
    match g {
        G::True => {}
        G::Pred(p) => f(p),
        G::GtZero(_) => {}
        G::And(a, b) => {
            collect_guard_atoms(a, f);
            collect_guard_atoms(b, f);
        }
    }
}

fn collect_val_atoms(
    e: &crate::monitor::ValExpr,
    f: &mut impl FnMut(&crate::predicate::PredicateAst),
) {
    use crate::monitor::ValExpr as V;
    match e {
        V::Const(_) | V::Reg(_) => {}
        V::PredQ(p) => f(p),
        V::Min(a, b) => {
            collect_val_atoms(a, f);
            collect_val_atoms(b, f);
        }
    }
}

fn grid_points(bounds: &[(f64, f64)], per_dim: usize) -> Vec<Vec<f64>> {
    let mut points = vec![Vec::new()];
    for &(lo, hi) in bounds {
        let mut next = Vec::with_capacity(points.len() * per_dim);
        for p in &points {
            for k in 0..per_dim {
                let x = lo + (hi - lo) * k as f64 / (per_dim - 1) as f64;
                let mut q = p.clone();
                q.push(x);
                next.push(q);
            }
        }
        points = next;
    }
    points
}

/// Shaped rollout reward: total, and ordered like the terminal reward.
///
/// If the monitor ended final this is exactly the terminal reward.
/// Otherwise, with `i` the first index of the final stable monitor-state
/// suffix, it is the sum of `max_{i<=j<T} alpha(s_j, q_T, v_j)`, the depth
/// bonus `2*C_u*(d_{q_T} - D)`, and the offset `C_l`. If the stuck state
/// was entered on the very last step the max is over an empty range; we
/// fall back to alpha at the last state.
pub fn shaped_reward(
    rollout: &AugmentedRollout,
    monitor: &TaskMonitor,
    registry: &PredicateRegistry,
    c: &ShapingConstants,
) -> f64 {
    match terminal_reward(rollout, monitor, registry) {
        TerminalReward::Value(v) => v,
        TerminalReward::Bottom => {
            let t_end = rollout.len();
            let q_t = rollout.last().monitor_state;
            let mut i = t_end;
            while i > 0 && rollout.states[i - 1].monitor_state == q_t {
                i -= 1;
            }
            let alpha_term = if i < t_end {
                (i..t_end)
                    .map(|j| {
                        let s = &rollout.states[j];
                        alpha_at(&s.env_state, q_t, &s.valuation, monitor, registry)
                            .expect("stuck state is non-final")
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            } else {
                let s = rollout.last();
                alpha_at(&s.env_state, q_t, &s.valuation, monitor, registry)
                    .expect("stuck state is non-final")
            };
            let d = c.depth(q_t) as f64;
            let max_d = c.max_depth as f64;
            alpha_term + 2.0 * c.c_upper * (d - max_d) + c.c_lower
        }
    }
}
