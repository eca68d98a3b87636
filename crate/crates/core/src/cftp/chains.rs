use super::{FiniteStateSpace, MonotoneUpdate, UpdateFunction};

fn down(x: u8) -> u8 {
    x.saturating_sub(1)
}

fn up(x: u8) -> u8 {
    (x + 1).min(2)
}

/// Walk on {0, 1, 2}: down if `u < 1/3`, up if `u > 2/3`, otherwise hold.
/// Moves off the ends are absorbed by the wall. Doubly stochastic, so its
/// stationary law is uniform.
#[derive(Clone, Copy, Debug, Default)]
pub struct ReflectingWalk;

impl UpdateFunction for ReflectingWalk {
    type State = u8;

    fn draws_per_step(&self) -> usize {
        1
    }

    fn step(&self, x: &u8, u: &[f64]) -> u8 {
        if u[0] < 1.0 / 3.0 {
            down(*x)
        } else if u[0] > 2.0 / 3.0 {
            up(*x)
        } else {
            *x
        }
    }
}

/// Walk on {0, 1, 2}: with probability 0.2 jump to 0, otherwise a fair
/// down/up step against the walls. One step coalesces exactly when it
/// resets.
#[derive(Clone, Copy, Debug, Default)]
pub struct ResetWalk;

impl ResetWalk {
    pub const RESET_PROBABILITY: f64 = 0.2;
}

impl UpdateFunction for ResetWalk {
    type State = u8;

    fn draws_per_step(&self) -> usize {
        1
    }

    fn step(&self, x: &u8, u: &[f64]) -> u8 {
        if u[0] < Self::RESET_PROBABILITY {
            0
        } else if u[0] < 0.6 {
            down(*x)
        } else {
            up(*x)
        }
    }
}

macro_rules! three_state_space {
    ($t:ty) => {
        impl FiniteStateSpace for $t {
            fn state_count(&self) -> u128 {
                3
            }

            fn states(&self) -> Vec<u8> {
                vec![0, 1, 2]
            }
        }

        impl MonotoneUpdate for $t {
            fn precedes(&self, a: &u8, b: &u8) -> bool {
                a <= b
            }

            fn bottom(&self) -> u8 {
                0
            }

            fn top(&self) -> u8 {
                2
            }
        }
    };
}

three_state_space!(ReflectingWalk);
three_state_space!(ResetWalk);
