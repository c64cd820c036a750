//! Built-in environments and their predicate registries.

pub mod cartpole;
pub mod grid;
pub mod point;

use rand_chacha::ChaCha8Rng;

pub use cartpole::CartPoleEnv;
pub use grid::GridEnv;
pub use point::PointRobotEnv;

use crate::predicate::PredicateRegistry;

/// A finite-horizon stochastic environment. `step` is pure given the RNG
/// stream, so rollouts parallelize with independent streams.
pub trait Environment: Send + Sync {
    fn state_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    fn horizon(&self) -> usize;
    /// Sample an initial state.
    fn reset(&self, rng: &mut ChaCha8Rng) -> Vec<f64>;
    /// One transition; `action` is expected inside the action box.
    fn step(&self, state: &[f64], action: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64>;
    /// Nominal per-dimension bounds on reachable states, used to estimate
    /// shaping constants. Not a hard guarantee.
    fn state_bounds(&self) -> Vec<(f64, f64)>;
}

/// Clamp an action into [-1,1] per coordinate; reports whether anything
/// was out of range so callers can count clamps.
pub fn clamp_action(action: &mut [f64]) -> bool {
    let mut clamped = false;
    for a in action.iter_mut() {
        if *a < -1.0 {
            *a = -1.0;
            clamped = true;
        } else if *a > 1.0 {
            *a = 1.0;
            clamped = true;
        }
    }
    clamped
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvKind {
    PointRobot,
    CartPole,
    Grid,
}

impl EnvKind {
    pub fn parse(name: &str) -> Option<EnvKind> {
        match name {
            "point" | "pointrobot" | "point-robot" => Some(EnvKind::PointRobot),
            "cartpole" | "cart-pole" => Some(EnvKind::CartPole),
            "grid" => Some(EnvKind::Grid),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvKind::PointRobot => "point",
            EnvKind::CartPole => "cartpole",
            EnvKind::Grid => "grid",
        }
    }

    /// The environment's built-in atomic predicates.
    pub fn registry(&self) -> PredicateRegistry {
        match self {
            EnvKind::PointRobot => point::registry(),
            EnvKind::CartPole => cartpole::registry(),
            EnvKind::Grid => grid::registry(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamp_reports_out_of_box_components() {
        let mut a = vec![0.5, -0.25];
        assert!(!clamp_action(&mut a));
        assert_eq!(a, vec![0.5, -0.25]);
        let mut b = vec![1.75, -3.0];
        assert!(clamp_action(&mut b));
        assert_eq!(b, vec![1.0, -1.0]);
    }

    #[test]
    fn env_kind_names_round_trip() {
        for kind in [EnvKind::PointRobot, EnvKind::CartPole, EnvKind::Grid] {
            assert_eq!(EnvKind::parse(kind.name()), Some(kind));
        }
        assert_eq!(EnvKind::parse("simulator"), None);
    }
}
