//! Small deterministic grid world, used as an exhaustively enumerable
//! system for oracle-vs-monitor equivalence checks.
//!
//! State (i, j) as reals; four actions move one cell (up/down/left/right
//! encoded as 0..4 in the first action coordinate), clamped at the borders.

use rand_chacha::ChaCha8Rng;

use super::Environment;
use crate::predicate::{AtomicPredicateDecl, PredicateRegistry};

#[derive(Clone, Debug)]
pub struct GridEnv {
    pub width: usize,
    pub height: usize,
    pub start: (usize, usize),
    pub horizon: usize,
}

impl Default for GridEnv {
    fn default() -> Self {
        Self {
            width: 4,
            height: 4,
            start: (0, 0),
            horizon: 4,
        }
    }
}

impl GridEnv {
    pub const N_ACTIONS: usize = 4;
}

impl Environment for GridEnv {
    fn state_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&self, _rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![self.start.0 as f64, self.start.1 as f64]
    }

    fn step(&self, state: &[f64], action: &[f64], _rng: &mut ChaCha8Rng) -> Vec<f64> {
        let (mut i, mut j) = (state[0] as i64, state[1] as i64);
        match action[0] as i64 {
            0 => j += 1,
            1 => j -= 1,
            2 => i -= 1,
            3 => i += 1,
            other => panic!("grid action out of range: {other}"),
        }
        i = i.clamp(0, self.width as i64 - 1);
        j = j.clamp(0, self.height as i64 - 1);
        vec![i as f64, j as f64]
    }

    fn state_bounds(&self) -> Vec<(f64, f64)> {
        vec![
            (0.0, self.width as f64 - 1.0),
            (0.0, self.height as f64 - 1.0),
        ]
    }
}

/// Built-in predicates: `cell(i, j)` (at that cell; robustness 1 - d∞)
/// and `off(i, j)` (away from that cell; robustness d∞ - 1/2).
pub fn registry() -> PredicateRegistry {
    let mut reg = PredicateRegistry::new();
    reg.register(AtomicPredicateDecl::from_quant("cell", 2, |s, p| {
        1.0 - (s[0] - p[0]).abs().max((s[1] - p[1]).abs())
    }))
    .expect("fresh registry");
    reg.register(AtomicPredicateDecl::from_quant("off", 2, |s, p| {
        (s[0] - p[0]).abs().max((s[1] - p[1]).abs()) - 0.5
    }))
    .expect("fresh registry");
    reg
}
