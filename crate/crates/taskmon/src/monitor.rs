//! Task-monitor intermediate representation.
//!
//! A task monitor is a finite automaton over monitor states with a set of
//! real-valued registers. Transitions carry a guard over (environment
//! state, registers) and an update map assigning new register values;
//! registers not mentioned by an update keep their value. Final states
//! carry a reward expression over the registers, evaluated at episode end.
//!
//! Monitors built by [`crate::compile`] satisfy the structural properties
//! checked by [`TaskMonitor::validate`]: self loops everywhere with the
//! true guard, acyclicity modulo self loops, finals exactly the non-self
//! sinks, reachability in both directions, and at most one transition per
//! ordered state pair.
//!
//! Unbounded register initialization ("+∞") uses a large finite sentinel
//! (default 1e6) so that register arithmetic and network inputs stay
//! finite; every comparison in this module is against ordinary reals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::predicate::{PredicateAst, PredicateRegistry};
use crate::printer::print_pred;

pub const DEFAULT_SENTINEL: f64 = 1e6;

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct StateId(pub u32);

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct RegisterId(pub u32);

#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct TransitionId(pub u32);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

/// Numeric expression over the current environment state and registers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ValExpr {
    Const(f64),
    Reg(RegisterId),
    /// Robustness of a predicate at the current environment state.
    PredQ(PredicateAst),
    Min(Box<ValExpr>, Box<ValExpr>),
}

impl ValExpr {
    pub fn eval(&self, state: &[f64], valuation: &[f64], registry: &PredicateRegistry) -> f64 {
        match self {
            ValExpr::Const(c) => *c,
            ValExpr::Reg(r) => valuation[r.0 as usize],
            ValExpr::PredQ(p) => p.eval_quant(state, registry),
            ValExpr::Min(a, b) => a
                .eval(state, valuation, registry)
                .min(b.eval(state, valuation, registry)),
        }
    }

    /// Min over a register set, folded in ascending id order.
    pub fn min_of_regs(regs: impl IntoIterator<Item = RegisterId>) -> ValExpr {
        let set: BTreeSet<RegisterId> = regs.into_iter().collect();
        let mut it = set.into_iter();
        let first = ValExpr::Reg(it.next().expect("non-empty register set"));
        it.fold(first, |acc, r| {
            ValExpr::Min(Box::new(acc), Box::new(ValExpr::Reg(r)))
        })
    }

    /// The register set of a pure min-over-registers expression, if this is one.
    pub fn as_reg_min_set(&self) -> Option<BTreeSet<RegisterId>> {
        match self {
            ValExpr::Reg(r) => Some(BTreeSet::from([*r])),
            ValExpr::Min(a, b) => {
                let mut s = a.as_reg_min_set()?;
                s.extend(b.as_reg_min_set()?);
                Some(s)
            }
            _ => None,
        }
    }

    pub fn registers(&self, out: &mut BTreeSet<RegisterId>) {
        match self {
            ValExpr::Const(_) | ValExpr::PredQ(_) => {}
            ValExpr::Reg(r) => {
                out.insert(*r);
            }
            ValExpr::Min(a, b) => {
                a.registers(out);
                b.registers(out);
            }
        }
    }
}

impl fmt::Display for ValExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValExpr::Const(c) => write!(f, "{c}"),
            ValExpr::Reg(r) => write!(f, "x{}", r.0),
            ValExpr::PredQ(p) => write!(f, "[{}]q", print_pred(p)),
            ValExpr::Min(a, b) => write!(f, "min({a}, {b})"),
        }
    }
}

/// Transition guard: predicate over (environment state, registers).
///
/// Guards have paired Boolean and quantitative readings that agree in sign:
/// the Boolean holds exactly when the quantitative value is positive. The
/// true literal reads as the sentinel quantitatively.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GuardExpr {
    True,
    /// Predicate over the environment state only.
    Pred(PredicateAst),
    /// `e > 0` for a register expression `e`; quantitatively reads as `e`.
    GtZero(ValExpr),
    And(Box<GuardExpr>, Box<GuardExpr>),
}

impl GuardExpr {
    pub fn and(a: GuardExpr, b: GuardExpr) -> GuardExpr {
        match (a, b) {
            (GuardExpr::True, g) | (g, GuardExpr::True) => g,
            (a, b) => GuardExpr::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn eval_bool(&self, state: &[f64], valuation: &[f64], registry: &PredicateRegistry) -> bool {
        match self {
            GuardExpr::True => true,
            GuardExpr::Pred(p) => p.eval_bool(state, registry),
            GuardExpr::GtZero(e) => e.eval(state, valuation, registry) > 0.0,
            GuardExpr::And(a, b) => {
                a.eval_bool(state, valuation, registry) && b.eval_bool(state, valuation, registry)
            }
        }
    }

    pub fn eval_quant(
        &self,
        state: &[f64],
        valuation: &[f64],
        registry: &PredicateRegistry,
        sentinel: f64,
    ) -> f64 {
        match self {
            GuardExpr::True => sentinel,
            GuardExpr::Pred(p) => p.eval_quant(state, registry),
            GuardExpr::GtZero(e) => e.eval(state, valuation, registry),
            GuardExpr::And(a, b) => a
                .eval_quant(state, valuation, registry, sentinel)
                .min(b.eval_quant(state, valuation, registry, sentinel)),
        }
    }

    pub fn registers(&self, out: &mut BTreeSet<RegisterId>) {
        match self {
            GuardExpr::True | GuardExpr::Pred(_) => {}
            GuardExpr::GtZero(e) => e.registers(out),
            GuardExpr::And(a, b) => {
                a.registers(out);
                b.registers(out);
            }
        }
    }
}

impl fmt::Display for GuardExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GuardExpr::True => write!(f, "true"),
            GuardExpr::Pred(p) => write!(f, "{}", print_pred(p)),
            GuardExpr::GtZero(e) => write!(f, "{e} > 0"),
            GuardExpr::And(a, b) => write!(f, "{a} && {b}"),
        }
    }
}

/// Per-register assignments; registers not mentioned keep their value.
/// All right-hand sides read the pre-step valuation (simultaneous update).
pub type UpdateMap = BTreeMap<RegisterId, ValExpr>;

pub fn eval_update(
    update: &UpdateMap,
    state: &[f64],
    valuation: &[f64],
    registry: &PredicateRegistry,
) -> Vec<f64> {
    let mut next = valuation.to_vec();
    for (r, e) in update {
        next[r.0 as usize] = e.eval(state, valuation, registry);
    }
    next
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegisterKind {
    /// Records a goal predicate's robustness when its transition fires.
    Goal,
    /// Running minimum of a constraint predicate's robustness.
    Constraint,
    /// Records the first operand's reward when a sequencing bridge fires.
    Record,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegisterInfo {
    pub name: String,
    pub kind: RegisterKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub id: TransitionId,
    pub source: StateId,
    pub target: StateId,
    pub guard: GuardExpr,
    pub update: UpdateMap,
}

impl Transition {
    pub fn is_self_loop(&self) -> bool {
        self.source == self.target
    }
}

/// Assembled monitor with adjacency caches. Persist via
/// [`TaskMonitor::into_parts`] / [`TaskMonitor::assemble`].
#[derive(Clone, Debug)]
pub struct TaskMonitor {
    n_states: u32,
    initial: StateId,
    registers: Vec<RegisterInfo>,
    initial_valuation: Vec<f64>,
    transitions: Vec<Transition>,
    finals: BTreeSet<StateId>,
    rewards: BTreeMap<StateId, ValExpr>,
    sentinel: f64,
    out: Vec<Vec<TransitionId>>,
    self_loops: Vec<Option<TransitionId>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorParts {
    pub n_states: u32,
    pub initial: StateId,
    pub registers: Vec<RegisterInfo>,
    pub initial_valuation: Vec<f64>,
    /// (source, guard, update, target) tuples; ids are assigned by
    /// (source, target) order at assembly so action spaces are stable.
    pub transitions: Vec<(StateId, GuardExpr, UpdateMap, StateId)>,
    pub finals: BTreeSet<StateId>,
    pub rewards: BTreeMap<StateId, ValExpr>,
    pub sentinel: f64,
}

impl TaskMonitor {
    pub fn assemble(parts: MonitorParts) -> TaskMonitor {
        let mut tuples = parts.transitions;
        tuples.sort_by_key(|(s, _, _, t)| (*s, *t));
        let transitions: Vec<Transition> = tuples
            .into_iter()
            .enumerate()
            .map(|(i, (source, guard, update, target))| Transition {
                id: TransitionId(i as u32),
                source,
                target,
                guard,
                update,
            })
            .collect();
        let n = parts.n_states as usize;
        let mut out = vec![Vec::new(); n];
        let mut self_loops = vec![None; n];
        for t in &transitions {
            out[t.source.0 as usize].push(t.id);
            if t.is_self_loop() {
                self_loops[t.source.0 as usize] = Some(t.id);
            }
        }
        TaskMonitor {
            n_states: parts.n_states,
            initial: parts.initial,
            registers: parts.registers,
            initial_valuation: parts.initial_valuation,
            transitions,
            finals: parts.finals,
            rewards: parts.rewards,
            sentinel: parts.sentinel,
            out,
            self_loops,
        }
    }

    pub fn into_parts(self) -> MonitorParts {
        MonitorParts {
            n_states: self.n_states,
            initial: self.initial,
            registers: self.registers,
            initial_valuation: self.initial_valuation,
            transitions: self
                .transitions
                .into_iter()
                .map(|t| (t.source, t.guard, t.update, t.target))
                .collect(),
            finals: self.finals,
            rewards: self.rewards,
            sentinel: self.sentinel,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states as usize
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.n_states).map(StateId)
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn registers(&self) -> &[RegisterInfo] {
        &self.registers
    }

    pub fn n_registers(&self) -> usize {
        self.registers.len()
    }

    pub fn initial_valuation(&self) -> &[f64] {
        &self.initial_valuation
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transition(&self, id: TransitionId) -> &Transition {
        &self.transitions[id.0 as usize]
    }

    pub fn finals(&self) -> &BTreeSet<StateId> {
        &self.finals
    }

    pub fn is_final(&self, q: StateId) -> bool {
        self.finals.contains(&q)
    }

    pub fn reward(&self, q: StateId) -> Option<&ValExpr> {
        self.rewards.get(&q)
    }

    pub fn rewards(&self) -> &BTreeMap<StateId, ValExpr> {
        &self.rewards
    }

    pub fn sentinel(&self) -> f64 {
        self.sentinel
    }

    pub fn transitions_from(&self, q: StateId) -> &[TransitionId] {
        &self.out[q.0 as usize]
    }

    pub fn self_loop(&self, q: StateId) -> Option<TransitionId> {
        self.self_loops[q.0 as usize]
    }

    /// Non-self transitions out of `q`, in id order.
    pub fn non_self_from(&self, q: StateId) -> impl Iterator<Item = &Transition> {
        self.out[q.0 as usize]
            .iter()
            .map(|id| self.transition(*id))
            .filter(|t| !t.is_self_loop())
    }

    pub fn non_self_out_degree(&self, q: StateId) -> usize {
        self.non_self_from(q).count()
    }

    /// Stable content hash used to pair policy checkpoints with the monitor
    /// they were trained against.
    pub fn fingerprint(&self) -> String {
        let parts = MonitorParts {
            n_states: self.n_states,
            initial: self.initial,
            registers: self.registers.clone(),
            initial_valuation: self.initial_valuation.clone(),
            transitions: self
                .transitions
                .iter()
                .map(|t| (t.source, t.guard.clone(), t.update.clone(), t.target))
                .collect(),
            finals: self.finals.clone(),
            rewards: self.rewards.clone(),
            sentinel: self.sentinel,
        };
        let json = serde_json::to_string(&parts).expect("monitor serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Longest-path depth of every state from the initial state, ignoring
    /// self loops, plus the maximum depth D.
    pub fn longest_path_depths(&self) -> Result<(Vec<usize>, usize), InvalidMonitor> {
        let n = self.n_states();
        let mut indeg = vec![0usize; n];
        for t in &self.transitions {
            if !t.is_self_loop() {
                indeg[t.target.0 as usize] += 1;
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut queue: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        while let Some(i) = queue.pop() {
            order.push(i);
            for tid in &self.out[i] {
                let t = self.transition(*tid);
                if t.is_self_loop() {
                    continue;
                }
                let j = t.target.0 as usize;
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    queue.push(j);
                }
            }
        }
        if order.len() != n {
            return Err(InvalidMonitor::Cyclic);
        }
        let mut depth = vec![usize::MAX; n];
        depth[self.initial.0 as usize] = 0;
        // ids are topological by construction, but use the computed order
        // so hand-built monitors work too
        for &i in &order {
            if depth[i] == usize::MAX {
                continue;
            }
            for tid in &self.out[i] {
                let t = self.transition(*tid);
                if t.is_self_loop() {
                    continue;
                }
                let j = t.target.0 as usize;
                let cand = depth[i] + 1;
                if depth[j] == usize::MAX || depth[j] < cand {
                    depth[j] = cand;
                }
            }
        }
        if depth.contains(&usize::MAX) {
            return Err(InvalidMonitor::Unreachable);
        }
        let max = depth.iter().copied().max().unwrap_or(0);
        Ok((depth, max))
    }

    /// Check the structural properties the constructions guarantee. An
    /// empty list means the monitor is well-formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.n_states();

        if self.initial_valuation.len() != self.registers.len() {
            out.push(Violation::ValuationLength {
                expected: self.registers.len(),
                got: self.initial_valuation.len(),
            });
        }
        if self.initial.0 >= self.n_states {
            out.push(Violation::BadStateRef { state: self.initial });
        }

        let n_regs = self.registers.len() as u32;
        let mut regs = BTreeSet::new();
        for t in &self.transitions {
            if t.source.0 >= self.n_states || t.target.0 >= self.n_states {
                out.push(Violation::BadStateRef { state: t.source });
                continue;
            }
            regs.clear();
            t.guard.registers(&mut regs);
            for (r, e) in &t.update {
                regs.insert(*r);
                e.registers(&mut regs);
            }
            if let Some(bad) = regs.iter().find(|r| r.0 >= n_regs) {
                out.push(Violation::BadRegisterRef {
                    transition: t.id,
                    register: *bad,
                });
            }
        }

        // one transition per ordered pair
        let mut pairs = BTreeSet::new();
        for t in &self.transitions {
            if !pairs.insert((t.source, t.target)) {
                out.push(Violation::DuplicateTransitionPair {
                    source: t.source,
                    target: t.target,
                });
            }
        }

        // self loops everywhere, with the true guard
        for q in self.states() {
            match self.self_loop(q) {
                None => out.push(Violation::MissingSelfLoop { state: q }),
                Some(tid) => {
                    if self.transition(tid).guard != GuardExpr::True {
                        out.push(Violation::SelfLoopGuardNotTrue { state: q });
                    }
                }
            }
        }

        // finals are exactly the non-self sinks, and carry rewards
        for q in self.states() {
            let sink = self.non_self_out_degree(q) == 0;
            match (sink, self.is_final(q)) {
                (true, false) => out.push(Violation::NonFinalSink { state: q }),
                (false, true) => out.push(Violation::FinalHasNonSelfExit { state: q }),
                _ => {}
            }
        }
        for q in &self.finals {
            if !self.rewards.contains_key(q) {
                out.push(Violation::RewardMissing { state: *q });
            }
        }
        for q in self.rewards.keys() {
            if !self.finals.contains(q) {
                out.push(Violation::RewardForNonFinal { state: *q });
            }
        }

        // acyclicity modulo self loops
        let mut indeg = vec![0usize; n];
        for t in &self.transitions {
            if !t.is_self_loop() && (t.target.0 as usize) < n {
                indeg[t.target.0 as usize] += 1;
            }
        }
        let mut removed = 0;
        let mut queue: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        while let Some(i) = queue.pop() {
            removed += 1;
            for tid in &self.out[i] {
                let t = self.transition(*tid);
                if t.is_self_loop() {
                    continue;
                }
                let j = t.target.0 as usize;
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    queue.push(j);
                }
            }
        }
        if removed != n {
            out.push(Violation::CycleBeyondSelfLoops);
        } else {
            // reachability both ways (only meaningful on acyclic graphs)
            let mut seen = vec![false; n];
            let mut stack = vec![self.initial.0 as usize];
            while let Some(i) = stack.pop() {
                if seen[i] {
                    continue;
                }
                seen[i] = true;
                for tid in &self.out[i] {
                    let t = self.transition(*tid);
                    if !t.is_self_loop() {
                        stack.push(t.target.0 as usize);
                    }
                }
            }
            for q in self.states() {
                if !seen[q.0 as usize] {
                    out.push(Violation::Unreachable { state: q });
                }
            }

            let mut co = vec![false; n];
            let mut stack: Vec<usize> = self.finals.iter().map(|q| q.0 as usize).collect();
            // walk edges backwards
            let mut preds = vec![Vec::new(); n];
            for t in &self.transitions {
                if !t.is_self_loop() {
                    preds[t.target.0 as usize].push(t.source.0 as usize);
                }
            }
            while let Some(i) = stack.pop() {
                if co[i] {
                    continue;
                }
                co[i] = true;
                stack.extend(&preds[i]);
            }
            for q in self.states() {
                if !co[q.0 as usize] {
                    out.push(Violation::CannotReachFinal { state: q });
                }
            }
        }

        out
    }

    /// Graphviz rendering: states labeled with rewards, edges with guards
    /// and updates.
    pub fn to_dot(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let _ = writeln!(s, "digraph task_monitor {{");
        let _ = writeln!(s, "  rankdir=LR;");
        let _ = writeln!(s, "  start [shape=point];");
        for q in self.states() {
            let shape = if self.is_final(q) {
                "doublecircle"
            } else {
                "circle"
            };
            let label = match self.reward(q) {
                Some(r) => format!("{q}\\nrho: {r}"),
                None => format!("{q}"),
            };
            let _ = writeln!(s, "  {q} [shape={shape}, label=\"{label}\"];");
        }
        let init = self
            .registers
            .iter()
            .zip(&self.initial_valuation)
            .map(|(r, v)| format!("{} = {v}", r.name))
            .collect::<Vec<_>>()
            .join("\\n");
        let _ = writeln!(s, "  start -> {} [label=\"{init}\"];", self.initial);
        for t in &self.transitions {
            let mut label = format!("S: {}", t.guard);
            for (r, e) in &t.update {
                let _ = write!(label, "\\n{} <- {e}", self.registers[r.0 as usize].name);
            }
            let _ = writeln!(s, "  {} -> {} [label=\"{label}\"];", t.source, t.target);
        }
        let _ = writeln!(s, "}}");
        s
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InvalidMonitor {
    #[error("monitor graph has a cycle beyond self loops")]
    Cyclic,
    #[error("monitor has states unreachable from the initial state")]
    Unreachable,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    CycleBeyondSelfLoops,
    MissingSelfLoop { state: StateId },
    SelfLoopGuardNotTrue { state: StateId },
    DuplicateTransitionPair { source: StateId, target: StateId },
    FinalHasNonSelfExit { state: StateId },
    NonFinalSink { state: StateId },
    Unreachable { state: StateId },
    CannotReachFinal { state: StateId },
    RewardMissing { state: StateId },
    RewardForNonFinal { state: StateId },
    ValuationLength { expected: usize, got: usize },
    BadStateRef { state: StateId },
    BadRegisterRef { transition: TransitionId, register: RegisterId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::CycleBeyondSelfLoops => write!(f, "cycle beyond self loops"),
            Violation::MissingSelfLoop { state } => write!(f, "{state} has no self loop"),
            Violation::SelfLoopGuardNotTrue { state } => {
                write!(f, "self loop on {state} is guarded")
            }
            Violation::DuplicateTransitionPair { source, target } => {
                write!(f, "more than one transition from {source} to {target}")
            }
            Violation::FinalHasNonSelfExit { state } => {
                write!(f, "final state {state} has non-self outgoing transitions")
            }
            Violation::NonFinalSink { state } => {
                write!(f, "{state} has no non-self exits but is not final")
            }
            Violation::Unreachable { state } => {
                write!(f, "{state} is unreachable from the initial state")
            }
            Violation::CannotReachFinal { state } => {
                write!(f, "no final state is reachable from {state}")
            }
            Violation::RewardMissing { state } => {
                write!(f, "final state {state} has no reward expression")
            }
            Violation::RewardForNonFinal { state } => {
                write!(f, "non-final state {state} carries a reward expression")
            }
            Violation::ValuationLength { expected, got } => {
                write!(f, "initial valuation has {got} entries for {expected} registers")
            }
            Violation::BadStateRef { state } => write!(f, "reference to unknown state {state}"),
            Violation::BadRegisterRef { transition, register } => write!(
                f,
                "transition {} references unknown register x{}",
                transition.0, register.0
            ),
        }
    }
}
