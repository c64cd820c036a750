//! Per-monitor-state policy networks.
//!
//! A modular policy holds one small MLP per monitor state. Module `N_q`
//! maps (environment state ++ registers) through two ReLU hidden layers of
//! 30 units to a tanh output of width `m + k`, where `m` is the
//! environment action dimension and `k` the non-self out-degree of `q`.
//! The first `m` outputs are the environment action; output `m + j` scores
//! the `j`-th non-self transition out of `q` (id order). The self loop
//! scores a fixed 0, so leaving a state requires a strictly positive
//! score, and disabled transitions are masked out entirely.
//!
//! The baseline policy is a single MLP from the environment state alone
//! (two hidden layers of 50) to the environment action; it carries no
//! monitor memory by construction.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augmented::{enabled_transitions, AugmentedAction, AugmentedState};
use crate::monitor::TaskMonitor;
use crate::predicate::PredicateRegistry;

pub const MODULE_HIDDEN: [usize; 2] = [30, 30];
pub const BASELINE_HIDDEN: [usize; 2] = [50, 50];

/// Fully connected network, ReLU hidden activations, tanh output.
/// Parameters are a flat vector: per layer, row-major weights then biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

impl Mlp {
    pub fn zeros(sizes: Vec<usize>) -> Mlp {
        let n = Self::param_count(&sizes);
        Mlp {
            sizes,
            params: vec![0.0; n],
        }
    }

    pub fn param_count(sizes: &[usize]) -> usize {
        sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn forward(&self, input: &[f64], scratch: &mut Scratch, out: &mut Vec<f64>) {
        debug_assert_eq!(input.len(), self.sizes[0]);
        let n_layers = self.sizes.len() - 1;
        let mut offset = 0;
        scratch.a.clear();
        scratch.a.extend_from_slice(input);
        for layer in 0..n_layers {
            let (n_in, n_out) = (self.sizes[layer], self.sizes[layer + 1]);
            scratch.b.clear();
            for o in 0..n_out {
                let row = &self.params[offset + o * n_in..offset + (o + 1) * n_in];
                let bias = self.params[offset + n_out * n_in + o];
                let mut z = bias;
                for (w, x) in row.iter().zip(&scratch.a) {
                    z += w * x;
                }
                scratch.b.push(if layer + 1 == n_layers {
                    z.tanh()
                } else {
                    z.max(0.0)
                });
            }
            offset += n_in * n_out + n_out;
            std::mem::swap(&mut scratch.a, &mut scratch.b);
        }
        out.clear();
        out.extend_from_slice(&scratch.a);
    }
}

/// Reusable forward-pass buffers.
#[derive(Clone, Debug, Default)]
pub struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
    pub out: Vec<f64>,
    pub input: Vec<f64>,
}

/// Optional input scaling: environment dimensions divided by their nominal
/// bound, register values clipped. Off by default; register scales differ
/// wildly and the trainer works on raw inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputNorm {
    pub env_scale: Vec<f64>,
    pub reg_clip: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModularPolicy {
    pub modules: Vec<Mlp>,
    pub env_dim: usize,
    pub action_dim: usize,
    pub n_registers: usize,
    pub fingerprint: String,
    pub normalize: Option<InputNorm>,
}

impl ModularPolicy {
    /// Zero-initialized module set for a monitor: one module per state,
    /// including finals (whose output is just the environment action).
    pub fn for_monitor(monitor: &TaskMonitor, env_dim: usize, action_dim: usize) -> ModularPolicy {
        let n_in = env_dim + monitor.n_registers();
        let modules = monitor
            .states()
            .map(|q| {
                let k = monitor.non_self_out_degree(q);
                let sizes = vec![
                    n_in,
                    MODULE_HIDDEN[0],
                    MODULE_HIDDEN[1],
                    action_dim + k,
                ];
                Mlp::zeros(sizes)
            })
            .collect();
        ModularPolicy {
            modules,
            env_dim,
            action_dim,
            n_registers: monitor.n_registers(),
            fingerprint: monitor.fingerprint(),
            normalize: None,
        }
    }

    pub fn n_params(&self) -> usize {
        self.modules.iter().map(Mlp::n_params).sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for m in &self.modules {
            out.extend_from_slice(&m.params);
        }
        out
    }

    pub fn set_flat(&mut self, theta: &[f64]) {
        debug_assert_eq!(theta.len(), self.n_params());
        let mut off = 0;
        for m in &mut self.modules {
            let n = m.params.len();
            m.params.copy_from_slice(&theta[off..off + n]);
            off += n;
        }
    }

    fn fill_input(&self, state: &AugmentedState, input: &mut Vec<f64>) {
        input.clear();
        match &self.normalize {
            None => {
                input.extend_from_slice(&state.env_state);
                input.extend_from_slice(&state.valuation);
            }
            Some(norm) => {
                for (x, s) in state.env_state.iter().zip(&norm.env_scale) {
                    input.push(x / s.max(1.0));
                }
                for v in &state.valuation {
                    input.push(v.clamp(-norm.reg_clip, norm.reg_clip));
                }
            }
        }
    }

    /// Choose an augmented action: the first `m` outputs are the
    /// environment action; the enabled transition with the highest score
    /// wins, where the self loop holds a fixed score of 0 and ties keep
    /// the earlier candidate (so an all-zero network self-loops).
    pub fn act(
        &self,
        state: &AugmentedState,
        monitor: &TaskMonitor,
        registry: &PredicateRegistry,
        scratch: &mut Scratch,
    ) -> AugmentedAction {
        let q = state.monitor_state;
        let mut input = std::mem::take(&mut scratch.input);
        self.fill_input(state, &mut input);
        let mut out = std::mem::take(&mut scratch.out);
        self.modules[q.0 as usize].forward(&input, scratch, &mut out);
        let env_action = out[..self.action_dim].to_vec();

        let enabled = enabled_transitions(state, monitor, registry);
        let self_loop = monitor.self_loop(q).expect("states carry self loops");
        let mut best = self_loop;
        let mut best_score = 0.0;
        for (j, t) in monitor.non_self_from(q).enumerate() {
            if !enabled.contains(&t.id) {
                continue;
            }
            let score = out[self.action_dim + j];
            if score > best_score {
                best = t.id;
                best_score = score;
            }
        }
        scratch.input = input;
        scratch.out = out;
        AugmentedAction {
            env_action,
            transition: best,
        }
    }
}

/// Single-network baseline policy over the environment state alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonolithicPolicy {
    pub net: Mlp,
    pub env_dim: usize,
    pub action_dim: usize,
}

impl MonolithicPolicy {
    pub fn new(env_dim: usize, action_dim: usize) -> MonolithicPolicy {
        MonolithicPolicy {
            net: Mlp::zeros(vec![
                env_dim,
                BASELINE_HIDDEN[0],
                BASELINE_HIDDEN[1],
                action_dim,
            ]),
            env_dim,
            action_dim,
        }
    }

    pub fn act_env(&self, env_state: &[f64], scratch: &mut Scratch) -> Vec<f64> {
        let mut out = std::mem::take(&mut scratch.out);
        self.net.forward(env_state, scratch, &mut out);
        let action = out.clone();
        scratch.out = out;
        action
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PolicySet {
    Modular(ModularPolicy),
    Monolithic(MonolithicPolicy),
}

impl PolicySet {
    pub fn n_params(&self) -> usize {
        match self {
            PolicySet::Modular(p) => p.n_params(),
            PolicySet::Monolithic(p) => p.net.n_params(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        match self {
            PolicySet::Modular(p) => p.flat(),
            PolicySet::Monolithic(p) => p.net.params.clone(),
        }
    }

    pub fn set_flat(&mut self, theta: &[f64]) {
        match self {
            PolicySet::Modular(p) => p.set_flat(theta),
            PolicySet::Monolithic(p) => p.net.params.copy_from_slice(theta),
        }
    }

    pub fn as_modular(&self) -> Option<&ModularPolicy> {
        match self {
            PolicySet::Modular(p) => Some(p),
            PolicySet::Monolithic(_) => None,
        }
    }
}

/// An environment policy with internal monitor memory, obtained from an
/// augmented policy. Memory starts at (initial state, initial valuation)
/// and advances by the chosen transition's target and update.
pub struct ProjectedPolicy<'a> {
    policy: &'a ModularPolicy,
    monitor: &'a TaskMonitor,
    registry: &'a PredicateRegistry,
    memory_state: crate::monitor::StateId,
    memory_valuation: Vec<f64>,
    scratch: Scratch,
}

impl<'a> ProjectedPolicy<'a> {
    pub fn new(
        policy: &'a ModularPolicy,
        monitor: &'a TaskMonitor,
        registry: &'a PredicateRegistry,
    ) -> Self {
        Self {
            policy,
            monitor,
            registry,
            memory_state: monitor.initial(),
            memory_valuation: monitor.initial_valuation().to_vec(),
            scratch: Scratch::default(),
        }
    }

    pub fn reset(&mut self) {
        self.memory_state = self.monitor.initial();
        self.memory_valuation = self.monitor.initial_valuation().to_vec();
    }

    pub fn memory(&self) -> (crate::monitor::StateId, &[f64]) {
        (self.memory_state, &self.memory_valuation)
    }

    /// Environment action for the current environment state; advances the
    /// internal (monitor state, valuation) memory.
    pub fn act(&mut self, env_state: &[f64]) -> Vec<f64> {
        let aug = AugmentedState {
            env_state: env_state.to_vec(),
            monitor_state: self.memory_state,
            valuation: self.memory_valuation.clone(),
        };
        let action = self
            .policy
            .act(&aug, self.monitor, self.registry, &mut self.scratch);
        let t = self.monitor.transition(action.transition);
        self.memory_valuation = crate::monitor::eval_update(
            &t.update,
            env_state,
            &self.memory_valuation,
            self.registry,
        );
        self.memory_state = t.target;
        action.env_action
    }
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint was trained against a different monitor (fingerprint {got} vs {want})")]
    FingerprintMismatch { got: String, want: String },
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    policy: CheckpointPolicy,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum CheckpointPolicy {
    Modular(ModularPolicy),
    Monolithic(MonolithicPolicy),
}

const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(policy: &PolicySet, path: &Path) -> Result<(), CheckpointError> {
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        policy: match policy {
            PolicySet::Modular(p) => CheckpointPolicy::Modular(p.clone()),
            PolicySet::Monolithic(p) => CheckpointPolicy::Monolithic(p.clone()),
        },
    };
    let json = serde_json::to_string(&file)?;
    std::fs::write(path, json)?;
    Ok(())
}

/// Load a checkpoint; when `expect_monitor` is given, modular checkpoints
/// must match its fingerprint.
pub fn load_checkpoint(
    path: &Path,
    expect_monitor: Option<&TaskMonitor>,
) -> Result<PolicySet, CheckpointError> {
    let text = std::fs::read_to_string(path)?;
    let file: CheckpointFile = serde_json::from_str(&text)?;
    if file.version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(file.version));
    }
    let policy = match file.policy {
        CheckpointPolicy::Modular(p) => {
            if let Some(m) = expect_monitor {
                let want = m.fingerprint();
                if p.fingerprint != want {
                    return Err(CheckpointError::FingerprintMismatch {
                        got: p.fingerprint,
                        want,
                    });
                }
            }
            PolicySet::Modular(p)
        }
        CheckpointPolicy::Monolithic(p) => PolicySet::Monolithic(p),
    };
    Ok(policy)
}
