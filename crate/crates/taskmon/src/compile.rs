//! Construction of task monitors from specification ASTs.
//!
//! Base construction per node:
//! - `achieve b`: two states, a goal register recording the robustness of
//!   `b` on the crossing transition, reward = that register.
//! - `ensuring`: same state graph, one running-min register per constraint
//!   conjunct (one for the whole predicate with `split_conjuncts` off)
//!   threaded through every transition's update, reward wrapped in a min.
//! - `seq`: disjoint union of the state graphs; each final state of the
//!   first operand gets a bridge to every successor of the second
//!   operand's initial state (including that state itself, via its self
//!   loop), guarded by the second's guard evaluated at its initial
//!   valuation conjoined with "first's reward positive"; the bridge update
//!   resets the second operand's registers as if the episode started there.
//! - `or`: initial states merged into a fresh state whose self loop merges
//!   both initial self-loop updates; finals and rewards dispatch per side.
//!
//! [`compile`] distributes each `ensuring` node across `seq`/`or` down to
//! the achieve leaves (a semantics-preserving rewrite), allocating that
//! node's constraint registers once and sharing them across the
//! distributed copies. This makes sequencing bridges check the constraint
//! registers ("are the constraints still satisfiable before continuing")
//! and keeps one running-min per constraint for the whole episode.
//! When the first operand of a `seq` has a single final state, its reward
//! expression is inlined into the combined reward instead of allocating a
//! recording register; with several finals (e.g. a choice), a recording
//! register captures the exited side's reward at bridge time.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ast::SpecAst;
use crate::monitor::{
    GuardExpr, MonitorParts, RegisterId, RegisterInfo, RegisterKind, StateId, TaskMonitor,
    UpdateMap, ValExpr, DEFAULT_SENTINEL,
};
use crate::predicate::PredicateAst;

#[derive(Clone, Debug)]
pub struct CompileOptions {
    /// Give each top-level conjunct of an `ensuring` predicate its own
    /// running-min register.
    pub split_conjuncts: bool,
    /// Finite stand-in for +∞ register initialization.
    pub sentinel: f64,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            split_conjuncts: true,
            sentinel: DEFAULT_SENTINEL,
        }
    }
}

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("operand monitor's initial state is final; composition is undefined")]
    InitialIsFinal,
    #[error("operand monitor's initial state has no self loop")]
    MissingInitialSelfLoop,
    #[error("register collision after renaming: {0}")]
    RegisterCollision(String),
}

/// Identity of one constraint conjunct of one `ensuring` node.
type ConstraintKey = (u32, u32);

/// Monitor under construction. The initial state is always state 0, and
/// state ids are topological (every non-self transition goes up in id).
struct Sub {
    n_states: u32,
    registers: Vec<RegisterInfo>,
    v0: Vec<f64>,
    transitions: Vec<(StateId, GuardExpr, UpdateMap, StateId)>,
    finals: BTreeSet<StateId>,
    rewards: BTreeMap<StateId, ValExpr>,
    constraint_regs: BTreeMap<ConstraintKey, RegisterId>,
}

impl Sub {
    fn finalize(mut self, sentinel: f64) -> TaskMonitor {
        let mut goal = 0;
        let mut con = 0;
        let mut rec = 0;
        for info in &mut self.registers {
            info.name = match info.kind {
                RegisterKind::Goal => {
                    goal += 1;
                    format!("g{}", goal - 1)
                }
                RegisterKind::Constraint => {
                    con += 1;
                    format!("c{}", con - 1)
                }
                RegisterKind::Record => {
                    rec += 1;
                    format!("r{}", rec - 1)
                }
            };
        }
        TaskMonitor::assemble(MonitorParts {
            n_states: self.n_states,
            initial: StateId(0),
            registers: self.registers,
            initial_valuation: self.v0,
            transitions: self.transitions,
            finals: self.finals,
            rewards: self.rewards,
            sentinel,
        })
    }
}

fn remap_val(e: &ValExpr, map: &[RegisterId]) -> ValExpr {
    match e {
        ValExpr::Const(c) => ValExpr::Const(*c),
        ValExpr::Reg(r) => ValExpr::Reg(map[r.0 as usize]),
        ValExpr::PredQ(p) => ValExpr::PredQ(p.clone()),
        ValExpr::Min(a, b) => ValExpr::Min(
            Box::new(remap_val(a, map)),
            Box::new(remap_val(b, map)),
        ),
    }
}

fn remap_guard(g: &GuardExpr, map: &[RegisterId]) -> GuardExpr {
    match g {
        GuardExpr::True => GuardExpr::True,
        GuardExpr::Pred(p) => GuardExpr::Pred(p.clone()),
        GuardExpr::GtZero(e) => GuardExpr::GtZero(remap_val(e, map)),
        GuardExpr::And(a, b) => GuardExpr::And(
            Box::new(remap_guard(a, map)),
            Box::new(remap_guard(b, map)),
        ),
    }
}

fn remap_update(u: &UpdateMap, map: &[RegisterId]) -> UpdateMap {
    u.iter()
        .map(|(r, e)| (map[r.0 as usize], remap_val(e, map)))
        .collect()
}

/// Substitute the given registers by constants and fold constant mins.
fn peval_val(e: &ValExpr, subst: &BTreeMap<RegisterId, f64>) -> ValExpr {
    match e {
        ValExpr::Const(c) => ValExpr::Const(*c),
        ValExpr::Reg(r) => match subst.get(r) {
            Some(v) => ValExpr::Const(*v),
            None => ValExpr::Reg(*r),
        },
        ValExpr::PredQ(p) => ValExpr::PredQ(p.clone()),
        ValExpr::Min(a, b) => match (peval_val(a, subst), peval_val(b, subst)) {
            (ValExpr::Const(x), ValExpr::Const(y)) => ValExpr::Const(x.min(y)),
            (a, b) => ValExpr::Min(Box::new(a), Box::new(b)),
        },
    }
}

fn peval_guard(g: &GuardExpr, subst: &BTreeMap<RegisterId, f64>) -> GuardExpr {
    match g {
        GuardExpr::True => GuardExpr::True,
        GuardExpr::Pred(p) => GuardExpr::Pred(p.clone()),
        GuardExpr::GtZero(e) => GuardExpr::GtZero(peval_val(e, subst)),
        GuardExpr::And(a, b) => {
            GuardExpr::and(peval_guard(a, subst), peval_guard(b, subst))
        }
    }
}

fn peval_update(u: &UpdateMap, subst: &BTreeMap<RegisterId, f64>) -> UpdateMap {
    u.iter()
        .map(|(r, e)| (*r, peval_val(e, subst)))
        .collect()
}

fn min_merge(a: &ValExpr, b: &ValExpr) -> ValExpr {
    match (a.as_reg_min_set(), b.as_reg_min_set()) {
        (Some(mut s), Some(t)) => {
            s.extend(t);
            ValExpr::min_of_regs(s)
        }
        _ => ValExpr::Min(Box::new(a.clone()), Box::new(b.clone())),
    }
}

/// Two-state monitor for a single goal predicate, with the active shared
/// constraints threaded through every transition.
fn leaf_achieve(b: &PredicateAst, active: &[(ConstraintKey, PredicateAst)], sentinel: f64) -> Sub {
    let mut registers = vec![RegisterInfo {
        name: String::new(),
        kind: RegisterKind::Goal,
    }];
    let mut v0 = vec![0.0];
    let goal = RegisterId(0);
    let mut constraint_regs = BTreeMap::new();
    let mut cons = UpdateMap::new();
    for (key, pred) in active {
        let r = RegisterId(registers.len() as u32);
        registers.push(RegisterInfo {
            name: String::new(),
            kind: RegisterKind::Constraint,
        });
        v0.push(sentinel);
        constraint_regs.insert(*key, r);
        cons.insert(
            r,
            ValExpr::Min(
                Box::new(ValExpr::Reg(r)),
                Box::new(ValExpr::PredQ(pred.clone())),
            ),
        );
    }
    let mut crossing = cons.clone();
    crossing.insert(goal, ValExpr::PredQ(b.clone()));
    let transitions = vec![
        (StateId(0), GuardExpr::True, cons.clone(), StateId(0)),
        (StateId(0), GuardExpr::Pred(b.clone()), crossing, StateId(1)),
        (StateId(1), GuardExpr::True, cons, StateId(1)),
    ];
    let mut reward_regs: BTreeSet<RegisterId> = constraint_regs.values().copied().collect();
    reward_regs.insert(goal);
    Sub {
        n_states: 2,
        registers,
        v0,
        transitions,
        finals: BTreeSet::from([StateId(1)]),
        rewards: BTreeMap::from([(StateId(1), ValExpr::min_of_regs(reward_regs))]),
        constraint_regs,
    }
}

/// Merge m2's registers into m1's space: constraint registers with a key
/// already present in m1 are identified, everything else is appended.
/// Returns (register map for m2 ids, set of appended ("local") new ids).
fn merge_registers(m1: &mut Sub, m2: &Sub) -> Result<(Vec<RegisterId>, BTreeSet<RegisterId>), CompileError> {
    let rev2: BTreeMap<RegisterId, ConstraintKey> = m2
        .constraint_regs
        .iter()
        .map(|(k, r)| (*r, *k))
        .collect();
    let mut map = Vec::with_capacity(m2.registers.len());
    let mut local = BTreeSet::new();
    for (i, info) in m2.registers.iter().enumerate() {
        let old = RegisterId(i as u32);
        let shared = rev2
            .get(&old)
            .and_then(|k| m1.constraint_regs.get(k))
            .copied();
        match shared {
            Some(r1) => {
                if m1.v0[r1.0 as usize] != m2.v0[i] {
                    return Err(CompileError::RegisterCollision(format!(
                        "shared constraint register initialized to {} and {}",
                        m1.v0[r1.0 as usize], m2.v0[i]
                    )));
                }
                map.push(r1);
            }
            None => {
                let r = RegisterId(m1.registers.len() as u32);
                m1.registers.push(info.clone());
                m1.v0.push(m2.v0[i]);
                map.push(r);
                local.insert(r);
            }
        }
    }
    for (k, r2) in &m2.constraint_regs {
        m1.constraint_regs.entry(*k).or_insert(map[r2.0 as usize]);
    }
    Ok((map, local))
}

fn seq_sub(mut m1: Sub, m2: Sub, _sentinel: f64) -> Result<Sub, CompileError> {
    let (reg_map, local) = merge_registers(&mut m1, &m2)?;
    let state_off = m1.n_states;
    let smap = |s: StateId| StateId(s.0 + state_off);

    // values the second operand's own registers start from, for evaluating
    // its initial-state guards and updates "as if the episode started here"
    let local_v0: BTreeMap<RegisterId, f64> = local
        .iter()
        .map(|r| (*r, m1.v0[r.0 as usize]))
        .collect();

    // a recording register is only needed when the exited final state (and
    // with it the first operand's reward) is ambiguous at episode end
    let multi_final = m1.finals.len() > 1;
    let record = if multi_final {
        let r = RegisterId(m1.registers.len() as u32);
        m1.registers.push(RegisterInfo {
            name: String::new(),
            kind: RegisterKind::Record,
        });
        m1.v0.push(0.0);
        Some(r)
    } else {
        None
    };

    let mut transitions = std::mem::take(&mut m1.transitions);
    let m2_initial_out: Vec<&(StateId, GuardExpr, UpdateMap, StateId)> = m2
        .transitions
        .iter()
        .filter(|(s, _, _, _)| *s == StateId(0))
        .collect();
    for (s, g, u, t) in &m2.transitions {
        transitions.push((
            smap(*s),
            remap_guard(g, &reg_map),
            remap_update(u, &reg_map),
            smap(*t),
        ));
    }
    for qf in &m1.finals {
        let rho1 = m1.rewards[qf].clone();
        let sigma_r = GuardExpr::GtZero(rho1.clone());
        for (_, g, u, t) in &m2_initial_out {
            let guard = GuardExpr::and(
                peval_guard(&remap_guard(g, &reg_map), &local_v0),
                sigma_r.clone(),
            );
            let mut update = peval_update(&remap_update(u, &reg_map), &local_v0);
            if let Some(r) = record {
                update.insert(r, rho1.clone());
            }
            transitions.push((*qf, guard, update, smap(*t)));
        }
    }

    let suffix = match record {
        Some(r) => ValExpr::Reg(r),
        None => {
            debug_assert_eq!(m1.finals.len(), 1);
            m1.rewards.values().next().expect("final has reward").clone()
        }
    };
    let rewards = m2
        .rewards
        .iter()
        .map(|(q, e)| (smap(*q), min_merge(&remap_val(e, &reg_map), &suffix)))
        .collect();

    Ok(Sub {
        n_states: m1.n_states + m2.n_states,
        registers: m1.registers,
        v0: m1.v0,
        transitions,
        finals: m2.finals.iter().map(|q| smap(*q)).collect(),
        rewards,
        constraint_regs: m1.constraint_regs,
    })
}

fn choice_sub(mut m1: Sub, m2: Sub, _sentinel: f64) -> Result<Sub, CompileError> {
    let (reg_map, _local) = merge_registers(&mut m1, &m2)?;
    // new initial state takes id 0 in place of both old initials; other
    // states of m1 keep their ids, m2's shift after them
    let off = m1.n_states - 1;
    let smap2 = |s: StateId| {
        if s == StateId(0) {
            StateId(0)
        } else {
            StateId(s.0 + off)
        }
    };

    let take_self_loop = |ts: &[(StateId, GuardExpr, UpdateMap, StateId)]| -> Result<UpdateMap, CompileError> {
        ts.iter()
            .find(|(s, _, _, t)| *s == StateId(0) && *t == StateId(0))
            .map(|(_, _, u, _)| u.clone())
            .ok_or(CompileError::MissingInitialSelfLoop)
    };
    let u1 = take_self_loop(&m1.transitions)?;
    let u2 = remap_update(&take_self_loop(&m2.transitions)?, &reg_map);
    let mut merged = u1;
    for (r, e) in u2 {
        match merged.get(&r) {
            None => {
                merged.insert(r, e);
            }
            Some(prev) if *prev == e => {}
            Some(prev) => {
                return Err(CompileError::RegisterCollision(format!(
                    "initial self-loop updates disagree on x{}: {prev} vs {e}",
                    r.0
                )));
            }
        }
    }

    let mut transitions = Vec::new();
    transitions.push((StateId(0), GuardExpr::True, merged, StateId(0)));
    for (s, g, u, t) in &m1.transitions {
        if *s == StateId(0) && *t == StateId(0) {
            continue;
        }
        transitions.push((*s, g.clone(), u.clone(), *t));
    }
    for (s, g, u, t) in &m2.transitions {
        if *s == StateId(0) && *t == StateId(0) {
            continue;
        }
        transitions.push((
            smap2(*s),
            remap_guard(g, &reg_map),
            remap_update(u, &reg_map),
            smap2(*t),
        ));
    }

    let mut finals: BTreeSet<StateId> = m1.finals.clone();
    let mut rewards = m1.rewards.clone();
    for q in &m2.finals {
        finals.insert(smap2(*q));
    }
    for (q, e) in &m2.rewards {
        rewards.insert(smap2(*q), remap_val(e, &reg_map));
    }

    Ok(Sub {
        n_states: m1.n_states + m2.n_states - 1,
        registers: m1.registers,
        v0: m1.v0,
        transitions,
        finals,
        rewards,
        constraint_regs: m1.constraint_regs,
    })
}

fn conjunct_keys(
    b: &PredicateAst,
    node: u32,
    opts: &CompileOptions,
) -> Vec<(ConstraintKey, PredicateAst)> {
    if opts.split_conjuncts {
        b.top_conjuncts()
            .into_iter()
            .enumerate()
            .map(|(j, p)| ((node, j as u32), p.clone()))
            .collect()
    } else {
        vec![((node, 0), b.clone())]
    }
}

fn rec(
    spec: &SpecAst,
    active: &[(ConstraintKey, PredicateAst)],
    counter: &mut u32,
    opts: &CompileOptions,
) -> Result<Sub, CompileError> {
    match spec {
        SpecAst::Achieve(b) => Ok(leaf_achieve(b, active, opts.sentinel)),
        SpecAst::Ensuring(inner, b) => {
            let node = *counter;
            *counter += 1;
            let mut next = active.to_vec();
            next.extend(conjunct_keys(b, node, opts));
            rec(inner, &next, counter, opts)
        }
        SpecAst::Seq(a, b) => {
            let m1 = rec(a, active, counter, opts)?;
            let m2 = rec(b, active, counter, opts)?;
            seq_sub(m1, m2, opts.sentinel)
        }
        SpecAst::Choice(a, b) => {
            let m1 = rec(a, active, counter, opts)?;
            let m2 = rec(b, active, counter, opts)?;
            choice_sub(m1, m2, opts.sentinel)
        }
    }
}

/// Compile a specification into a task monitor with default options.
pub fn compile(spec: &SpecAst) -> TaskMonitor {
    compile_with(spec, &CompileOptions::default())
}

pub fn compile_with(spec: &SpecAst, opts: &CompileOptions) -> TaskMonitor {
    let mut counter = 0;
    let sub = rec(spec, &[], &mut counter, opts)
        .expect("construction over compiler-built operands cannot collide");
    sub.finalize(opts.sentinel)
}

/// Standalone two-state construction for `achieve b`.
pub fn compile_achieve(b: &PredicateAst) -> TaskMonitor {
    compile_achieve_with(b, &CompileOptions::default())
}

pub fn compile_achieve_with(b: &PredicateAst, opts: &CompileOptions) -> TaskMonitor {
    leaf_achieve(b, &[], opts.sentinel).finalize(opts.sentinel)
}

/// Standalone constraint construction: same state graph as `m`, one
/// running-min register per conjunct threaded through every transition,
/// rewards wrapped in a min with those registers.
pub fn compile_ensuring(m: &TaskMonitor, b: &PredicateAst) -> TaskMonitor {
    compile_ensuring_with(m, b, &CompileOptions::default())
}

pub fn compile_ensuring_with(
    m: &TaskMonitor,
    b: &PredicateAst,
    opts: &CompileOptions,
) -> TaskMonitor {
    let mut parts = m.clone().into_parts();
    let conjuncts: Vec<PredicateAst> = if opts.split_conjuncts {
        b.top_conjuncts().into_iter().cloned().collect()
    } else {
        vec![b.clone()]
    };
    let mut new_regs = Vec::new();
    let existing = parts
        .registers
        .iter()
        .filter(|r| r.kind == RegisterKind::Constraint)
        .count();
    for (i, pred) in conjuncts.iter().enumerate() {
        let r = RegisterId(parts.registers.len() as u32);
        parts.registers.push(RegisterInfo {
            name: format!("c{}", existing + i),
            kind: RegisterKind::Constraint,
        });
        parts.initial_valuation.push(parts.sentinel);
        new_regs.push((r, pred.clone()));
    }
    for (_, _, update, _) in &mut parts.transitions {
        for (r, pred) in &new_regs {
            update.insert(
                *r,
                ValExpr::Min(
                    Box::new(ValExpr::Reg(*r)),
                    Box::new(ValExpr::PredQ(pred.clone())),
                ),
            );
        }
    }
    let reg_min = ValExpr::min_of_regs(new_regs.iter().map(|(r, _)| *r));
    for e in parts.rewards.values_mut() {
        *e = min_merge(e, &reg_min);
    }
    TaskMonitor::assemble(parts)
}

fn to_sub(m: &TaskMonitor) -> Result<Sub, CompileError> {
    if m.is_final(m.initial()) {
        return Err(CompileError::InitialIsFinal);
    }
    if m.self_loop(m.initial()).is_none() {
        return Err(CompileError::MissingInitialSelfLoop);
    }
    // state 0 must be the initial state; swap if a hand-built monitor differs
    let init = m.initial();
    let swap = |s: StateId| {
        if s == init {
            StateId(0)
        } else if s == StateId(0) {
            init
        } else {
            s
        }
    };
    let parts = m.clone().into_parts();
    Ok(Sub {
        n_states: parts.n_states,
        registers: parts.registers,
        v0: parts.initial_valuation,
        transitions: parts
            .transitions
            .into_iter()
            .map(|(s, g, u, t)| (swap(s), g, u, swap(t)))
            .collect(),
        finals: parts.finals.iter().map(|q| swap(*q)).collect(),
        rewards: parts.rewards.into_iter().map(|(q, e)| (swap(q), e)).collect(),
        constraint_regs: BTreeMap::new(),
    })
}

/// Standalone sequencing of two monitors; register spaces are disjoint by
/// construction (the second operand's registers are renamed into fresh ids).
pub fn compile_seq(m1: &TaskMonitor, m2: &TaskMonitor) -> Result<TaskMonitor, CompileError> {
    let sentinel = m1.sentinel();
    let sub = seq_sub(to_sub(m1)?, to_sub(m2)?, sentinel)?;
    Ok(sub.finalize(sentinel))
}

/// Standalone choice between two monitors, merging their initial states.
pub fn compile_choice(m1: &TaskMonitor, m2: &TaskMonitor) -> Result<TaskMonitor, CompileError> {
    let sentinel = m1.sentinel();
    let sub = choice_sub(to_sub(m1)?, to_sub(m2)?, sentinel)?;
    Ok(sub.finalize(sentinel))
}
