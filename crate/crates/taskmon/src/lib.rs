//! Compositional task specifications for reinforcement learning.
//!
//! The pipeline: a textual specification (`achieve` / `ensuring` / `;` /
//! `or` over user-registered atomic predicates) is parsed into an AST,
//! compiled into a finite task monitor with real-valued registers, and
//! producted with an environment into an augmented MDP whose terminal and
//! shaped rollout rewards drive a random-search policy trainer with one
//! small network per monitor state.
//!
//! Modules:
//! - [`predicate`]: atomic predicate registry and predicate trees.
//! - [`ast`]: specification AST.
//! - [`parser`] / [`printer`]: concrete `.spec` syntax.
//! - [`semantics`]: reference Boolean/quantitative evaluation over rollouts.
//! - [`monitor`]: task-monitor IR, structural validator, longest-path depths.
//! - [`compile`]: construction of monitors from ASTs.
//! - [`augmented`]: environment × monitor product, rewards, shaping, projection.
//! - [`policy`]: per-monitor-state networks and checkpoints.
//! - [`ars`]: random-search trainer and evaluation.
//! - [`env`]: built-in environments (point robot, cart-pole, grid).
//! - [`bench`]: named benchmarks, learning-curve CSVs, sample-complexity report.

pub mod ars;
pub mod ast;
pub mod augmented;
pub mod bench;
pub mod compile;
pub mod config;
pub mod env;
pub mod monitor;
pub mod parser;
pub mod policy;
pub mod predicate;
pub mod printer;
pub mod semantics;
pub mod trace;
