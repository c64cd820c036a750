//! 2D point robot with a fuel budget.
//!
//! State (x, y, r): planar position plus remaining fuel. Actions are
//! bounded velocities in [-1,1]^2. Position moves by the action plus
//! Gaussian noise; fuel drains proportionally to speed times distance
//! from the y-axis: r' = r - 0.1 * |x| * ||a||. Fuel may go negative;
//! penalizing that is the specification's business, not the dynamics'.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Environment;
use crate::predicate::{signed_box_distance, AtomicPredicateDecl, PredicateRegistry};

#[derive(Clone, Debug)]
pub struct PointRobotEnv {
    pub noise_sigma: f64,
    pub horizon: usize,
    pub initial: [f64; 3],
}

impl Default for PointRobotEnv {
    fn default() -> Self {
        Self {
            noise_sigma: 0.05,
            horizon: 40,
            initial: [5.0, 0.0, 7.0],
        }
    }
}

impl Environment for PointRobotEnv {
    fn state_dim(&self) -> usize {
        3
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reset(&self, _rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.initial.to_vec()
    }

    fn step(&self, state: &[f64], action: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let (ex, ey) = if self.noise_sigma > 0.0 {
            let nx: f64 = StandardNormal.sample(rng);
            let ny: f64 = StandardNormal.sample(rng);
            (self.noise_sigma * nx, self.noise_sigma * ny)
        } else {
            (0.0, 0.0)
        };
        let speed = (action[0] * action[0] + action[1] * action[1]).sqrt();
        vec![
            state[0] + action[0] + ex,
            state[1] + action[1] + ey,
            state[2] - 0.1 * state[0].abs() * speed,
        ]
    }

    fn state_bounds(&self) -> Vec<(f64, f64)> {
        // |Δpos| per step is at most 1 plus a noise allowance
        let reach = self.horizon as f64 * (1.0 + 5.0 * self.noise_sigma);
        let (x0, y0, r0) = (self.initial[0], self.initial[1], self.initial[2]);
        let xmax = x0.abs() + reach;
        let max_fuel_burn = 0.1 * xmax * std::f64::consts::SQRT_2 * self.horizon as f64;
        vec![
            (x0 - reach, x0 + reach),
            (y0 - reach, y0 + reach),
            (r0 - max_fuel_burn, r0 + 1.0),
        ]
    }
}

/// Built-in predicates: `reach(cx, cy)` (within an ∞-norm unit box of the
/// target), `avoid(x_lo, x_hi, y_lo, y_hi)` (outside the closed box;
/// robustness is the signed box distance, negative inside so that the
/// Boolean and quantitative readings agree in sign), and `fuel_positive`
/// (remaining fuel, as its own robustness).
pub fn registry() -> PredicateRegistry {
    let mut reg = PredicateRegistry::new();
    reg.register(AtomicPredicateDecl::from_quant("reach", 2, |s, p| {
        1.0 - (s[0] - p[0]).abs().max((s[1] - p[1]).abs())
    }))
    .expect("fresh registry");
    reg.register(AtomicPredicateDecl::from_quant("avoid", 4, |s, p| {
        signed_box_distance(&s[..2], &[p[0], p[2]], &[p[1], p[3]])
    }))
    .expect("fresh registry");
    reg.register(AtomicPredicateDecl::from_quant("fuel_positive", 0, |s, _| s[2]))
        .expect("fresh registry");
    reg
}
