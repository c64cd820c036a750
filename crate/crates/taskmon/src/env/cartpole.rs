//! Continuous-action cart-pole.
//!
//! State (x, x_dot, theta, theta_dot). The scalar action in [-1,1] is
//! scaled by 10 N. Physics constants and the 0.02 s Euler step follow the
//! standard open-source cart-pole definition; there is no early
//! termination — episodes run to the fixed horizon and the `balance`
//! predicate (|theta| < pi/15) does the penalizing.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use super::Environment;
use crate::predicate::{AtomicPredicateDecl, PredicateRegistry};

const GRAVITY: f64 = 9.8;
const MASS_CART: f64 = 1.0;
const MASS_POLE: f64 = 0.1;
const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
const HALF_POLE_LENGTH: f64 = 0.5;
const POLE_MASS_LENGTH: f64 = MASS_POLE * HALF_POLE_LENGTH;
const FORCE_MAG: f64 = 10.0;
const TAU: f64 = 0.02;

pub const BALANCE_LIMIT: f64 = std::f64::consts::PI / 15.0;

#[derive(Clone, Debug)]
pub struct CartPoleEnv {
    pub horizon: usize,
}

impl Default for CartPoleEnv {
    fn default() -> Self {
        Self { horizon: 200 }
    }
}

impl Environment for CartPoleEnv {
    fn state_dim(&self) -> usize {
        4
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let u = Uniform::new(-0.05, 0.05).expect("static bounds");
        (0..4).map(|_| u.sample(rng)).collect()
    }

    fn step(&self, state: &[f64], action: &[f64], _rng: &mut ChaCha8Rng) -> Vec<f64> {
        let (x, x_dot, theta, theta_dot) = (state[0], state[1], state[2], state[3]);
        let force = FORCE_MAG * action[0];
        let cos = theta.cos();
        let sin = theta.sin();
        let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS;
        let theta_acc = (GRAVITY * sin - cos * temp)
            / (HALF_POLE_LENGTH * (4.0 / 3.0 - MASS_POLE * cos * cos / TOTAL_MASS));
        let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS;
        vec![
            x + TAU * x_dot,
            x_dot + TAU * x_acc,
            theta + TAU * theta_dot,
            theta_dot + TAU * theta_acc,
        ]
    }

    fn state_bounds(&self) -> Vec<(f64, f64)> {
        vec![(-5.0, 5.0), (-15.0, 15.0), (-10.0, 10.0), (-15.0, 15.0)]
    }
}

/// Built-in predicates: `reach(c)` on the cart position with the same
/// ∞-norm unit box as the planar reach, and `balance` (pole within
/// pi/15 of vertical).
pub fn registry() -> PredicateRegistry {
    let mut reg = PredicateRegistry::new();
    reg.register(AtomicPredicateDecl::from_quant("reach", 1, |s, p| {
        1.0 - (s[0] - p[0]).abs()
    }))
    .expect("fresh registry");
    reg.register(AtomicPredicateDecl::from_quant("balance", 0, |s, _| {
        BALANCE_LIMIT - s[2].abs()
    }))
    .expect("fresh registry");
    reg
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn one_euler_step_by_hand() {
        let env = CartPoleEnv::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = [0.0, 0.0, 0.1, 0.0];
        let a = [0.5];
        let got = env.step(&s, &a, &mut rng);

        let force = 5.0;
        let cos = 0.1f64.cos();
        let sin = 0.1f64.sin();
        let temp = (force + 0.05 * 0.0 * sin) / 1.1;
        let theta_acc = (9.8 * sin - cos * temp) / (0.5 * (4.0 / 3.0 - 0.1 * cos * cos / 1.1));
        let x_acc = temp - 0.05 * theta_acc * cos / 1.1;
        assert_eq!(got[0], 0.0);
        assert!((got[1] - 0.02 * x_acc).abs() < 1e-12);
        assert_eq!(got[2], 0.1);
        assert!((got[3] - 0.02 * theta_acc).abs() < 1e-12);
    }

    #[test]
    fn balance_boundary() {
        let reg = registry();
        let b = reg.lookup("balance").unwrap();
        assert!(b.eval_bool(&[0.0, 0.0, 0.0, 0.0], &[]));
        assert!(!b.eval_bool(&[0.0, 0.0, BALANCE_LIMIT, 0.0], &[]));
        assert_eq!(b.eval_quant(&[0.0, 0.0, BALANCE_LIMIT, 0.0], &[]), 0.0);
    }

    #[test]
    fn reset_is_near_zero_and_seeded() {
        let env = CartPoleEnv::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = env.reset(&mut rng);
        assert!(s.iter().all(|x| x.abs() < 0.05));
        let mut rng2 = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(env.reset(&mut rng2), s);
    }
}
