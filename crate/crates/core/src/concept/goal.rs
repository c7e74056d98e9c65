use std::fmt;
use std::sync::Arc;

use crate::world::WorldState;

/// Tolerance for necessary goals, whose costs are exactly zero when met.
pub const NECESSARY_EPSILON: f64 = 1e-9;

type CostFn<S> = dyn Fn(&S, &S) -> f64 + Send + Sync;

/// Non-negative cost of a state relative to the state at the start of the
/// task; the goal is met when the cost is within `epsilon`.
pub struct GoalPredicate<S> {
    cost: Arc<CostFn<S>>,
    pub epsilon: f64,
}

impl<S> Clone for GoalPredicate<S> {
    fn clone(&self) -> Self {
        Self {
            cost: Arc::clone(&self.cost),
            epsilon: self.epsilon,
        }
    }
}

impl<S> fmt::Debug for GoalPredicate<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GoalPredicate")
            .field("epsilon", &self.epsilon)
            .finish_non_exhaustive()
    }
}

impl<S> GoalPredicate<S> {
    pub fn new(epsilon: f64, cost: impl Fn(&S, &S) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            cost: Arc::new(cost),
            epsilon,
        }
    }

    /// Cost of `now`; non-finite costs are reported as infinite.
    pub fn cost(&self, start: &S, now: &S) -> f64 {
        let c = (self.cost)(start, now);
        if c.is_nan() {
            f64::INFINITY
        } else {
            c.max(0.0)
        }
    }

    pub fn satisfied(&self, start: &S, now: &S) -> bool {
        self.cost(start, now) <= self.epsilon
    }
}

#[derive(Debug, Clone)]
pub enum SufficientGoal {
    Predicate(GoalPredicate<WorldState>),
    /// Met when the listed tasks, run from the end state, all succeed.
    SubsequentTask(Vec<String>),
}
