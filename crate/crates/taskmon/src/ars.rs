//! Random-search policy training over the augmented MDP.
//!
//! Each iteration samples Gaussian perturbation directions over the
//! concatenated parameters of all modules, evaluates the + and -
//! perturbations by rollout, and moves the parameters along the
//! top-scoring directions weighted by reward differences and normalized
//! by the reward standard deviation. No state normalization is applied by
//! default.
//!
//! Reward modes:
//! - `shaped`: the shaped rollout reward (total, stratified by depth);
//! - `unshaped`: the terminal reward, with bottom mapped to the C_l bound
//!   (a constant plateau, so search only progresses if a sampled policy
//!   reaches a final monitor state);
//! - `tltl`: the quantitative semantics of the specification evaluated on
//!   the environment rollout, with a single memoryless network.
//!
//! Satisfaction estimates always come from the Boolean semantics oracle on
//! projected rollouts, never from reward signs. The two must agree on the
//! claiming side: a positive terminal reward with an unsatisfied
//! projection is a soundness bug and aborts training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::SpecAst;
use crate::augmented::{
    reset, shaped_reward, step, terminal_reward, AugmentedRollout, ShapingConstants,
    TerminalReward,
};
use crate::env::{clamp_action, Environment};
use crate::monitor::TaskMonitor;
use crate::policy::{ModularPolicy, MonolithicPolicy, PolicySet, Scratch};
use crate::predicate::PredicateRegistry;
use crate::semantics::{eval_bool, eval_quant, Rollout, SemanticsError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArsConfig {
    pub directions: usize,
    pub top_directions: usize,
    pub step_size: f64,
    pub perturb_stddev: f64,
    pub rollouts_per_eval: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for ArsConfig {
    fn default() -> Self {
        Self {
            directions: 30,
            top_directions: 15,
            step_size: 0.02,
            perturb_stddev: 0.03,
            rollouts_per_eval: 1,
            iterations: 100,
            seed: 0,
        }
    }
}

impl ArsConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.directions == 0 || self.rollouts_per_eval == 0 {
            return Err(TrainError::BadConfig(
                "directions and rollouts_per_eval must be positive".into(),
            ));
        }
        if self.top_directions == 0 || self.top_directions > self.directions {
            return Err(TrainError::BadConfig(format!(
                "top_directions must be in 1..={}, got {}",
                self.directions, self.top_directions
            )));
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.step_size) || !positive(self.perturb_stddev) {
            return Err(TrainError::BadConfig(
                "step_size and perturb_stddev must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Training rollouts consumed per iteration.
    pub fn samples_per_iteration(&self) -> u64 {
        2 * self.directions as u64 * self.rollouts_per_eval as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    Shaped,
    Unshaped,
    Tltl,
}

impl RewardMode {
    pub fn parse(name: &str) -> Option<RewardMode> {
        match name {
            "shaped" => Some(RewardMode::Shaped),
            "unshaped" => Some(RewardMode::Unshaped),
            "tltl" => Some(RewardMode::Tltl),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RewardMode::Shaped => "shaped",
            RewardMode::Unshaped => "unshaped",
            RewardMode::Tltl => "tltl",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub samples: u64,
    pub satisfaction: f64,
    pub mean_shaped_reward: f64,
    pub iteration: u32,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Diagnostics {
    /// Environment actions that left the action box and were clamped.
    pub clamped_actions: u64,
    /// Final rewards at or below the configured C_l bound.
    pub c_lower_violations: u64,
    /// Shaping alpha terms above the configured C_u bound.
    pub c_upper_violations: u64,
    /// Rollouts whose projection satisfies the specification while the
    /// monitor run ended non-final (the policy left credit unclaimed).
    pub unclaimed_satisfaction: u64,
}

impl Diagnostics {
    fn absorb(&mut self, other: &Diagnostics) {
        self.clamped_actions += other.clamped_actions;
        self.c_lower_violations += other.c_lower_violations;
        self.c_upper_violations += other.c_upper_violations;
        self.unclaimed_satisfaction += other.unclaimed_satisfaction;
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("non-finite reward at iteration {iteration}: {detail}")]
    NonFiniteReward { iteration: u32, detail: String },
    #[error(
        "positive terminal reward on a rollout whose projection does not satisfy \
         the specification (iteration {iteration})"
    )]
    SoundnessViolation { iteration: u32 },
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

/// Everything a training run reads; shared read-only across direction
/// evaluations.
#[derive(Clone, Copy)]
pub struct TrainContext<'a> {
    pub env: &'a dyn Environment,
    pub monitor: &'a TaskMonitor,
    pub spec: &'a SpecAst,
    pub registry: &'a PredicateRegistry,
    pub shaping: &'a ShapingConstants,
    /// Opt-in input scaling for modular policies.
    pub input_norm: Option<&'a crate::policy::InputNorm>,
}

pub struct TrainOutcome {
    pub policy: PolicySet,
    pub curve: Vec<CurvePoint>,
    pub diagnostics: Diagnostics,
}

struct RolloutScore {
    reward: f64,
    satisfied: bool,
    diag: Diagnostics,
}

fn run_modular_rollout(
    policy: &ModularPolicy,
    ctx: &TrainContext<'_>,
    rng: &mut ChaCha8Rng,
    scratch: &mut Scratch,
) -> (AugmentedRollout, u64) {
    let mut rollout = AugmentedRollout::start(reset(ctx.env, ctx.monitor, rng));
    let mut clamps = 0;
    for _ in 0..ctx.env.horizon() {
        let mut action = policy.act(rollout.last(), ctx.monitor, ctx.registry, scratch);
        if clamp_action(&mut action.env_action) {
            clamps += 1;
        }
        let next = step(rollout.last(), &action, ctx.env, ctx.monitor, ctx.registry, rng)
            .expect("policy picks enabled transitions only");
        rollout.push(action, next);
    }
    (rollout, clamps)
}

fn run_env_rollout(
    policy: &MonolithicPolicy,
    env: &dyn Environment,
    rng: &mut ChaCha8Rng,
    scratch: &mut Scratch,
) -> (Rollout, u64) {
    let mut state = env.reset(rng);
    let mut rollout = Rollout::from_states(vec![state.clone()]).expect("one state");
    let mut clamps = 0;
    for _ in 0..env.horizon() {
        let mut action = policy.act_env(&state, scratch);
        if clamp_action(&mut action) {
            clamps += 1;
        }
        state = env.step(&state, &action, rng);
        rollout.push(action, state.clone());
    }
    (rollout, clamps)
}

/// Run one rollout under the given policy and score it in the given mode.
fn score_rollout(
    policy: &PolicySet,
    ctx: &TrainContext<'_>,
    mode: RewardMode,
    rng: &mut ChaCha8Rng,
    scratch: &mut Scratch,
) -> Result<RolloutScore, ScoreError> {
    let mut diag = Diagnostics::default();
    match (mode, policy) {
        (RewardMode::Tltl, PolicySet::Monolithic(p)) => {
            let (rollout, clamps) = run_env_rollout(p, ctx.env, rng, scratch);
            diag.clamped_actions = clamps;
            let reward = eval_quant(ctx.spec, &rollout, ctx.registry)?;
            let satisfied = eval_bool(ctx.spec, &rollout, ctx.registry);
            Ok(RolloutScore {
                reward,
                satisfied,
                diag,
            })
        }
        (RewardMode::Shaped | RewardMode::Unshaped, PolicySet::Modular(p)) => {
            let (rollout, clamps) = run_modular_rollout(p, ctx, rng, scratch);
            diag.clamped_actions = clamps;
            let terminal = terminal_reward(&rollout, ctx.monitor, ctx.registry);
            let projected = rollout.project();
            let satisfied = eval_bool(ctx.spec, &projected, ctx.registry);
            if terminal.is_positive() && !satisfied {
                return Err(ScoreError::Unsound);
            }
            if satisfied && !terminal.is_positive() {
                diag.unclaimed_satisfaction = 1;
            }
            if let TerminalReward::Value(v) = terminal {
                if v <= ctx.shaping.c_lower {
                    diag.c_lower_violations = 1;
                }
            }
            let reward = match mode {
                RewardMode::Shaped => {
                    let r = shaped_reward(&rollout, ctx.monitor, ctx.registry, ctx.shaping);
                    if terminal == TerminalReward::Bottom {
                        // alpha term = r - depth and offset terms
                        let d = ctx.shaping.depth(rollout.last().monitor_state) as f64;
                        let alpha_term = r
                            - 2.0 * ctx.shaping.c_upper * (d - ctx.shaping.max_depth as f64)
                            - ctx.shaping.c_lower;
                        if alpha_term.abs() > ctx.shaping.c_upper {
                            diag.c_upper_violations = 1;
                        }
                    }
                    r
                }
                RewardMode::Unshaped => terminal.value_or(ctx.shaping.c_lower),
                RewardMode::Tltl => unreachable!(),
            };
            Ok(RolloutScore {
                reward,
                satisfied,
                diag,
            })
        }
        _ => Err(ScoreError::PolicyModeMismatch),
    }
}

enum ScoreError {
    Unsound,
    Semantics(SemanticsError),
    PolicyModeMismatch,
    NonFinite(f64),
}

impl From<SemanticsError> for ScoreError {
    fn from(e: SemanticsError) -> Self {
        ScoreError::Semantics(e)
    }
}

fn score_to_train_error(e: ScoreError, iteration: u32) -> TrainError {
    match e {
        ScoreError::Unsound => TrainError::SoundnessViolation { iteration },
        ScoreError::Semantics(s) => TrainError::Semantics(s),
        ScoreError::PolicyModeMismatch => {
            TrainError::BadConfig("policy kind does not match reward mode".into())
        }
        ScoreError::NonFinite(v) => TrainError::NonFiniteReward {
            iteration,
            detail: format!("rollout reward {v}"),
        },
    }
}

struct DirectionResult {
    reward_plus: f64,
    reward_minus: f64,
    satisfied: u64,
    rollouts: u64,
    reward_sum: f64,
    diag: Diagnostics,
}

pub struct Trainer<'a> {
    ctx: TrainContext<'a>,
    cfg: ArsConfig,
    mode: RewardMode,
    policy: PolicySet,
    theta: Vec<f64>,
    rng: ChaCha8Rng,
    curve: Vec<CurvePoint>,
    samples: u64,
    iteration: u32,
    diagnostics: Diagnostics,
}

impl<'a> Trainer<'a> {
    pub fn new(
        ctx: TrainContext<'a>,
        cfg: ArsConfig,
        mode: RewardMode,
    ) -> Result<Trainer<'a>, TrainError> {
        cfg.validate()?;
        if ctx.env.horizon() == 0 {
            return Err(TrainError::BadConfig("environment horizon must be positive".into()));
        }
        let policy = match mode {
            RewardMode::Shaped | RewardMode::Unshaped => {
                let mut p = ModularPolicy::for_monitor(
                    ctx.monitor,
                    ctx.env.state_dim(),
                    ctx.env.action_dim(),
                );
                p.normalize = ctx.input_norm.cloned();
                PolicySet::Modular(p)
            }
            RewardMode::Tltl => PolicySet::Monolithic(MonolithicPolicy::new(
                ctx.env.state_dim(),
                ctx.env.action_dim(),
            )),
        };
        let theta = policy.flat();
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Trainer {
            ctx,
            cfg,
            mode,
            policy,
            theta,
            rng,
            curve: Vec::new(),
            samples: 0,
            iteration: 0,
            diagnostics: Diagnostics::default(),
        })
    }

    pub fn policy(&self) -> &PolicySet {
        &self.policy
    }

    pub fn curve(&self) -> &[CurvePoint] {
        &self.curve
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    pub fn mode(&self) -> RewardMode {
        self.mode
    }

    /// One search iteration: sample directions, evaluate both signs of
    /// each, move along the top directions, append a curve point.
    pub fn iteration(&mut self) -> Result<&CurvePoint, TrainError> {
        let dim = self.theta.len();
        let nu = self.cfg.perturb_stddev;
        let direction_seeds: Vec<u64> = (0..self.cfg.directions)
            .map(|_| self.rng.random::<u64>())
            .collect();

        let ctx = self.ctx;
        let mode = self.mode;
        let base_policy = &self.policy;
        let theta = &self.theta;
        let rollouts_per_eval = self.cfg.rollouts_per_eval;

        let eval_direction = |seed: &u64| -> Result<DirectionResult, ScoreError> {
            let mut drng = ChaCha8Rng::seed_from_u64(*seed);
            let delta: Vec<f64> = (0..dim)
                .map(|_| StandardNormal.sample(&mut drng))
                .collect();
            let mut scratch = Scratch::default();
            let mut result = DirectionResult {
                reward_plus: 0.0,
                reward_minus: 0.0,
                satisfied: 0,
                rollouts: 0,
                reward_sum: 0.0,
                diag: Diagnostics::default(),
            };
            let mut shifted = base_policy.clone();
            let mut params = vec![0.0; dim];
            for (sign, slot) in [(1.0, 0usize), (-1.0, 1usize)] {
                for i in 0..dim {
                    params[i] = theta[i] + sign * nu * delta[i];
                }
                shifted.set_flat(&params);
                let mut total = 0.0;
                for _ in 0..rollouts_per_eval {
                    let mut rrng = ChaCha8Rng::seed_from_u64(drng.random::<u64>());
                    let score = score_rollout(&shifted, &ctx, mode, &mut rrng, &mut scratch)?;
                    if !score.reward.is_finite() {
                        return Err(ScoreError::NonFinite(score.reward));
                    }
                    total += score.reward;
                    result.rollouts += 1;
                    result.reward_sum += score.reward;
                    result.satisfied += score.satisfied as u64;
                    result.diag.absorb(&score.diag);
                }
                let mean = total / rollouts_per_eval as f64;
                if slot == 0 {
                    result.reward_plus = mean;
                } else {
                    result.reward_minus = mean;
                }
            }
            Ok(result)
        };

        let results: Result<Vec<DirectionResult>, ScoreError> = if dim >= 512 {
            direction_seeds.par_iter().map(eval_direction).collect()
        } else {
            direction_seeds.iter().map(eval_direction).collect()
        };
        let results = results.map_err(|e| score_to_train_error(e, self.iteration))?;

        // rank directions by their better side, keep the top block
        let mut order: Vec<usize> = (0..results.len()).collect();
        order.sort_by(|&a, &b| {
            let sa = results[a].reward_plus.max(results[a].reward_minus);
            let sb = results[b].reward_plus.max(results[b].reward_minus);
            sb.total_cmp(&sa).then(a.cmp(&b))
        });
        let top = &order[..self.cfg.top_directions];

        let used: Vec<f64> = top
            .iter()
            .flat_map(|&d| [results[d].reward_plus, results[d].reward_minus])
            .collect();
        let mean = used.iter().sum::<f64>() / used.len() as f64;
        let var = used.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / used.len() as f64;
        let sigma = var.sqrt();

        if sigma > 1e-12 {
            let scale = self.cfg.step_size / (self.cfg.top_directions as f64 * sigma);
            for &d in top {
                let gain = results[d].reward_plus - results[d].reward_minus;
                if gain == 0.0 {
                    continue;
                }
                let mut drng = ChaCha8Rng::seed_from_u64(direction_seeds[d]);
                for theta_i in self.theta.iter_mut() {
                    let delta_i: f64 = StandardNormal.sample(&mut drng);
                    *theta_i += scale * gain * delta_i;
                }
            }
            self.policy.set_flat(&self.theta);
        }

        let total_rollouts: u64 = results.iter().map(|r| r.rollouts).sum();
        let total_sat: u64 = results.iter().map(|r| r.satisfied).sum();
        let total_reward: f64 = results.iter().map(|r| r.reward_sum).sum();
        for r in &results {
            self.diagnostics.absorb(&r.diag);
        }
        self.samples += total_rollouts;
        let point = CurvePoint {
            samples: self.samples,
            satisfaction: total_sat as f64 / total_rollouts as f64,
            mean_shaped_reward: total_reward / total_rollouts as f64,
            iteration: self.iteration,
            seed: self.cfg.seed,
        };
        self.iteration += 1;
        self.curve.push(point);
        Ok(self.curve.last().expect("just pushed"))
    }

    pub fn into_outcome(self) -> TrainOutcome {
        TrainOutcome {
            policy: self.policy,
            curve: self.curve,
            diagnostics: self.diagnostics,
        }
    }
}

/// Run `cfg.iterations` search iterations.
pub fn train(
    ctx: TrainContext<'_>,
    cfg: ArsConfig,
    mode: RewardMode,
) -> Result<TrainOutcome, TrainError> {
    let mut trainer = Trainer::new(ctx, cfg, mode)?;
    for _ in 0..cfg.iterations {
        trainer.iteration()?;
    }
    Ok(trainer.into_outcome())
}

/// One rollout of a modular policy, for trace dumps and inspection.
/// Baseline policies have no augmented rollout to dump.
pub fn sample_augmented_rollout(
    policy: &PolicySet,
    ctx: &TrainContext<'_>,
    rng: &mut ChaCha8Rng,
) -> Option<AugmentedRollout> {
    match policy {
        PolicySet::Modular(p) => {
            let mut scratch = Scratch::default();
            Some(run_modular_rollout(p, ctx, rng, &mut scratch).0)
        }
        PolicySet::Monolithic(_) => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalReport {
    pub mean_reward: f64,
    pub satisfaction: f64,
    pub diagnostics: Diagnostics,
}

/// Estimate mean reward and satisfaction probability over `n` fresh
/// rollouts. Satisfaction comes from the Boolean oracle on projections.
pub fn evaluate(
    policy: &PolicySet,
    ctx: &TrainContext<'_>,
    mode: RewardMode,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<EvalReport, TrainError> {
    assert!(n >= 1, "evaluation needs at least one rollout");
    let mut scratch = Scratch::default();
    let mut reward_sum = 0.0;
    let mut sat = 0u64;
    let mut diag = Diagnostics::default();
    for _ in 0..n {
        let mut rrng = ChaCha8Rng::seed_from_u64(rng.random::<u64>());
        let score = score_rollout(policy, ctx, mode, &mut rrng, &mut scratch)
            .map_err(|e| score_to_train_error(e, u32::MAX))?;
        reward_sum += score.reward;
        sat += score.satisfied as u64;
        diag.absorb(&score.diag);
    }
    Ok(EvalReport {
        mean_reward: reward_sum / n as f64,
        satisfaction: sat as f64 / n as f64,
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augmented::AugmentedState;
    use crate::compile::compile;
    use crate::env::{EnvKind, PointRobotEnv};
    use crate::monitor::StateId;
    use crate::parser::parse_spec;
    use crate::policy::ProjectedPolicy;

    struct Fixture {
        env: PointRobotEnv,
        monitor: TaskMonitor,
        spec: SpecAst,
        registry: PredicateRegistry,
        shaping: ShapingConstants,
    }

    fn fixture(spec_text: &str) -> Fixture {
        let registry = EnvKind::PointRobot.registry();
        let spec = parse_spec(spec_text, &registry).unwrap();
        let monitor = compile(&spec);
        let env = PointRobotEnv::default();
        let shaping = ShapingConstants::estimate(&monitor, &env, &registry).unwrap();
        Fixture {
            env,
            monitor,
            spec,
            registry,
            shaping,
        }
    }

    impl Fixture {
        fn ctx(&self) -> TrainContext<'_> {
            TrainContext {
                env: &self.env,
                monitor: &self.monitor,
                spec: &self.spec,
                registry: &self.registry,
                shaping: &self.shaping,
                input_norm: None,
            }
        }
    }

    const PHI1: &str = "achieve reach(5, 10) ensuring avoid(4, 6, 4, 6)";
    const PHI7: &str = "achieve (reach(5, 10); reach(5, 0); reach(10, 0); reach(10, 10); \
                        reach(0, 0)) ensuring avoid(4, 6, 4, 6)";

    #[test]
    fn zero_network_acts_zero_and_self_loops() {
        let f = fixture(PHI1);
        let policy =
            crate::policy::ModularPolicy::for_monitor(&f.monitor, f.env.state_dim(), f.env.action_dim());
        let mut scratch = Scratch::default();
        let state = AugmentedState {
            env_state: vec![5.0, 9.5, 7.0], // inside the goal box: crossing enabled
            monitor_state: StateId(0),
            valuation: f.monitor.initial_valuation().to_vec(),
        };
        let action = policy.act(&state, &f.monitor, &f.registry, &mut scratch);
        assert_eq!(action.env_action, vec![0.0, 0.0]);
        // tie at score zero keeps the self loop
        assert!(f.monitor.transition(action.transition).is_self_loop());
    }

    #[test]
    fn positive_score_is_masked_when_guard_is_false() {
        let f = fixture(PHI1);
        let mut policy =
            crate::policy::ModularPolicy::for_monitor(&f.monitor, f.env.state_dim(), f.env.action_dim());
        // bias the transition-score output of the initial module hard positive
        let sizes = policy.modules[0].sizes.clone();
        let n_out = *sizes.last().unwrap();
        let n_params = policy.modules[0].params.len();
        let bias_base = n_params - n_out;
        policy.modules[0].params[bias_base + f.env.action_dim()] = 10.0;
        let mut scratch = Scratch::default();

        // far from the goal the crossing is disabled: self loop regardless
        let far = AugmentedState {
            env_state: vec![5.0, 0.0, 7.0],
            monitor_state: StateId(0),
            valuation: f.monitor.initial_valuation().to_vec(),
        };
        let action = policy.act(&far, &f.monitor, &f.registry, &mut scratch);
        assert!(f.monitor.transition(action.transition).is_self_loop());

        // inside the goal box the positive score takes the crossing
        let near = AugmentedState {
            env_state: vec![5.0, 9.5, 7.0],
            monitor_state: StateId(0),
            valuation: f.monitor.initial_valuation().to_vec(),
        };
        let action = policy.act(&near, &f.monitor, &f.registry, &mut scratch);
        assert!(!f.monitor.transition(action.transition).is_self_loop());

        // final states only ever self-loop
        let final_q = *f.monitor.finals().iter().next().unwrap();
        let done = AugmentedState {
            env_state: vec![5.0, 9.5, 7.0],
            monitor_state: final_q,
            valuation: f.monitor.initial_valuation().to_vec(),
        };
        let action = policy.act(&done, &f.monitor, &f.registry, &mut scratch);
        assert!(f.monitor.transition(action.transition).is_self_loop());
    }

    #[test]
    fn zero_iterations_returns_initial_policy_and_empty_curve() {
        let f = fixture(PHI1);
        let cfg = ArsConfig {
            iterations: 0,
            seed: 3,
            ..Default::default()
        };
        let out = train(f.ctx(), cfg, RewardMode::Shaped).unwrap();
        assert!(out.curve.is_empty());
        assert!(out.policy.flat().iter().all(|p| *p == 0.0));
    }

    #[test]
    fn identical_seeds_reproduce_curves_bitwise() {
        let f = fixture(PHI1);
        let cfg = ArsConfig {
            directions: 6,
            top_directions: 3,
            iterations: 4,
            seed: 7,
            ..Default::default()
        };
        let a = train(f.ctx(), cfg, RewardMode::Shaped).unwrap();
        let b = train(f.ctx(), cfg, RewardMode::Shaped).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.policy.flat(), b.policy.flat());
        let c = train(
            f.ctx(),
            ArsConfig {
                seed: 8,
                ..cfg
            },
            RewardMode::Shaped,
        )
        .unwrap();
        assert_ne!(a.curve, c.curve);
    }

    #[test]
    fn curve_samples_increase_by_fixed_increment() {
        let f = fixture(PHI1);
        let cfg = ArsConfig {
            directions: 5,
            top_directions: 2,
            rollouts_per_eval: 3,
            iterations: 4,
            seed: 1,
            ..Default::default()
        };
        let out = train(f.ctx(), cfg, RewardMode::Shaped).unwrap();
        let per_iter = cfg.samples_per_iteration();
        assert_eq!(per_iter, 30);
        for (i, p) in out.curve.iter().enumerate() {
            assert_eq!(p.samples, per_iter * (i as u64 + 1));
            assert_eq!(p.iteration, i as u32);
            assert_eq!(p.seed, 1);
            assert!(p.mean_shaped_reward.is_finite());
        }
    }

    #[test]
    fn tltl_mode_uses_a_single_memoryless_network() {
        let f = fixture(PHI1);
        let cfg = ArsConfig {
            directions: 4,
            top_directions: 2,
            iterations: 2,
            seed: 5,
            ..Default::default()
        };
        let out = train(f.ctx(), cfg, RewardMode::Tltl).unwrap();
        let PolicySet::Monolithic(p) = &out.policy else {
            panic!("tltl trains a single network");
        };
        // input is the environment state alone: registers never enter
        assert_eq!(p.net.sizes[0], f.env.state_dim());
        assert_eq!(p.net.sizes, vec![3, 50, 50, 2]);
    }

    #[test]
    fn random_policy_fails_a_deep_sequencing_task() {
        let f = fixture(PHI7);
        let cfg = ArsConfig {
            directions: 2,
            top_directions: 1,
            iterations: 1,
            seed: 0,
            ..Default::default()
        };
        let out = train(f.ctx(), cfg, RewardMode::Shaped).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let report = evaluate(&out.policy, &f.ctx(), RewardMode::Shaped, 50, &mut rng).unwrap();
        assert!(report.satisfaction <= 0.05, "{}", report.satisfaction);
    }

    #[test]
    fn evaluate_is_deterministic_given_a_seed() {
        let f = fixture(PHI1);
        let policy = PolicySet::Modular(crate::policy::ModularPolicy::for_monitor(
            &f.monitor,
            f.env.state_dim(),
            f.env.action_dim(),
        ));
        let run = |seed: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            evaluate(&policy, &f.ctx(), RewardMode::Shaped, 1, &mut rng).unwrap()
        };
        assert_eq!(run(9), run(9));
    }

    #[test]
    fn config_validation() {
        let ok = ArsConfig::default();
        assert!(ok.validate().is_ok());
        assert!(ArsConfig {
            top_directions: 31,
            ..ok
        }
        .validate()
        .is_err());
        assert!(ArsConfig {
            step_size: 0.0,
            ..ok
        }
        .validate()
        .is_err());
        assert!(ArsConfig {
            directions: 0,
            ..ok
        }
        .validate()
        .is_err());
    }

    /// The projected policy with monitor memory reproduces the augmented
    /// rollout's environment projection step for step under a shared seed,
    /// and therefore the same satisfaction outcomes.
    #[test]
    fn projected_policy_matches_augmented_rollouts() {
        let f = fixture(PHI1);
        // a lightly trained policy so transitions actually fire sometimes
        let cfg = ArsConfig {
            directions: 8,
            top_directions: 4,
            iterations: 20,
            seed: 2,
            ..Default::default()
        };
        let out = train(f.ctx(), cfg, RewardMode::Shaped).unwrap();
        let modular = out.policy.as_modular().unwrap();

        for seed in 0..20u64 {
            // augmented rollout
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut scratch = Scratch::default();
            let ctx = f.ctx();
            let (aug, _) = run_modular_rollout(modular, &ctx, &mut rng, &mut scratch);

            // projected policy on the bare environment, same rng stream
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut proj = ProjectedPolicy::new(modular, &f.monitor, &f.registry);
            assert_eq!(proj.memory().0, f.monitor.initial());
            assert_eq!(proj.memory().1, f.monitor.initial_valuation());
            let mut state = f.env.reset(&mut rng);
            let mut states = vec![state.clone()];
            for _ in 0..f.env.horizon() {
                let mut action = proj.act(&state);
                crate::env::clamp_action(&mut action);
                state = f.env.step(&state, &action, &mut rng);
                states.push(state.clone());
            }
            let projected = aug.project();
            assert_eq!(projected.states(), &states[..]);
            // monitor memory ended where the augmented run ended
            assert_eq!(proj.memory().0, aug.last().monitor_state);
        }
    }
}
