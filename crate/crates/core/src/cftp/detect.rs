use super::{Coalescence, CoalescenceDetector, FiniteStateSpace, MonotoneUpdate, UpdateFunction};
use crate::error::{Result, SimError};

/// Largest state space the exhaustive detector will enumerate.
pub const MAX_ENUMERATED_STATES: u128 = 10_000;

/// Applies the block to every state. Sound and complete.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExhaustiveDetector;

impl<U: FiniteStateSpace> CoalescenceDetector<U> for ExhaustiveDetector {
    fn detect(&self, update: &U, block: &[f64]) -> Result<Coalescence<U::State>> {
        let size = update.state_count();
        if size > MAX_ENUMERATED_STATES {
            return Err(SimError::StateSpaceTooLarge {
                size,
                limit: MAX_ENUMERATED_STATES,
            });
        }
        let mut states = update.states().into_iter();
        let Some(first) = states.next() else {
            return Err(SimError::EmptyInput);
        };
        let image = update.apply_block(&first, block);
        for x in states {
            if update.apply_block(&x, block) != image {
                return Ok(Coalescence::NotCoalesced);
            }
        }
        Ok(Coalescence::Coalesced(image))
    }
}

/// Runs only the bottom and top chains. Sound for monotone updates.
#[derive(Clone, Debug)]
pub struct MonotoneDetector<S> {
    bottom: S,
    top: S,
}

impl<S> MonotoneDetector<S> {
    pub fn new(bottom: S, top: S) -> Self {
        Self { bottom, top }
    }

    pub fn for_update<U: MonotoneUpdate<State = S>>(update: &U) -> Self {
        Self::new(update.bottom(), update.top())
    }
}

impl<U: MonotoneUpdate> CoalescenceDetector<U> for MonotoneDetector<U::State> {
    fn detect(&self, update: &U, block: &[f64]) -> Result<Coalescence<U::State>> {
        let mut lo = self.bottom.clone();
        let mut hi = self.top.clone();
        for (step, u) in block.chunks_exact(update.draws_per_step()).enumerate() {
            lo = update.step(&lo, u);
            hi = update.step(&hi, u);
            if !update.precedes(&lo, &hi) {
                return Err(SimError::MonotonicityViolation { step });
            }
        }
        Ok(if lo == hi {
            Coalescence::Coalesced(lo)
        } else {
            Coalescence::NotCoalesced
        })
    }
}

fn check_block_len<U: UpdateFunction>(update: &U, t: u64, block: &[f64]) -> Result<()> {
    if update.block_size(t) != Some(block.len()) {
        return Err(SimError::ContractViolation(format!(
            "block has {} uniforms, {t} steps need {}",
            block.len(),
            t as u128 * update.draws_per_step() as u128
        )));
    }
    Ok(())
}

/// Does `phi_t(., block)` map every state to one state?
pub fn exhaustive_detector<U: FiniteStateSpace>(
    update: &U,
    t: u64,
    block: &[f64],
) -> Result<Coalescence<U::State>> {
    check_block_len(update, t, block)?;
    ExhaustiveDetector.detect(update, block)
}

/// Bounding-chain detection from `bottom` and `top`.
pub fn monotone_detector<U: MonotoneUpdate>(
    update: &U,
    t: u64,
    block: &[f64],
    bottom: U::State,
    top: U::State,
) -> Result<Coalescence<U::State>> {
    check_block_len(update, t, block)?;
    MonotoneDetector::new(bottom, top).detect(update, block)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cftp::{Graph, IsingModel, ReflectingWalk, Spins};
    use crate::randomness::RandomStream;

    struct Constant;

    impl UpdateFunction for Constant {
        type State = u8;
        fn draws_per_step(&self) -> usize {
            1
        }
        fn step(&self, _: &u8, _: &[f64]) -> u8 {
            4
        }
    }

    impl FiniteStateSpace for Constant {
        fn state_count(&self) -> u128 {
            5
        }
        fn states(&self) -> Vec<u8> {
            (0..5).collect()
        }
    }

    /// Identity on {0, 1, 2}, ordered as integers.
    struct Identity;

    impl UpdateFunction for Identity {
        type State = u8;
        fn draws_per_step(&self) -> usize {
            1
        }
        fn step(&self, s: &u8, _: &[f64]) -> u8 {
            *s
        }
    }

    impl FiniteStateSpace for Identity {
        fn state_count(&self) -> u128 {
            3
        }
        fn states(&self) -> Vec<u8> {
            vec![0, 1, 2]
        }
    }

    impl MonotoneUpdate for Identity {
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

    /// Order-reversing map on {0, 1}.
    struct Swap;

    impl UpdateFunction for Swap {
        type State = u8;
        fn draws_per_step(&self) -> usize {
            1
        }
        fn step(&self, s: &u8, _: &[f64]) -> u8 {
            1 - *s
        }
    }

    impl MonotoneUpdate for Swap {
        fn precedes(&self, a: &u8, b: &u8) -> bool {
            a <= b
        }
        fn bottom(&self) -> u8 {
            0
        }
        fn top(&self) -> u8 {
            1
        }
    }

    #[test]
    fn constant_map_coalesces() {
        let mut s = RandomStream::from_seed(1);
        for _ in 0..20 {
            let b = s.uniforms(3);
            assert_eq!(
                exhaustive_detector(&Constant, 3, &b).unwrap(),
                Coalescence::Coalesced(4)
            );
        }
    }

    #[test]
    fn identity_never_coalesces() {
        let b = [0.1, 0.5];
        assert_eq!(
            exhaustive_detector(&Identity, 2, &b).unwrap(),
            Coalescence::NotCoalesced
        );
        assert_eq!(
            monotone_detector(&Identity, 2, &b, 0, 2).unwrap(),
            Coalescence::NotCoalesced
        );
    }

    #[test]
    fn reflecting_walk_two_downs_coalesce_at_zero() {
        let b = [0.1, 0.2];
        assert_eq!(
            exhaustive_detector(&ReflectingWalk, 2, &b).unwrap(),
            Coalescence::Coalesced(0)
        );
        // One down-move is not enough for the top state.
        assert_eq!(
            exhaustive_detector(&ReflectingWalk, 1, &b[..1]).unwrap(),
            Coalescence::NotCoalesced
        );
    }

    #[test]
    fn equal_bounds_coalesce_without_steps() {
        assert_eq!(
            monotone_detector(&Identity, 0, &[], 1, 1).unwrap(),
            Coalescence::Coalesced(1)
        );
    }

    #[test]
    fn non_monotone_update_is_reported() {
        assert_eq!(
            monotone_detector(&Swap, 1, &[0.5], 0, 1),
            Err(SimError::MonotonicityViolation { step: 0 })
        );
    }

    #[test]
    fn wrong_block_length_rejected() {
        assert!(matches!(
            exhaustive_detector(&Constant, 2, &[0.1]),
            Err(SimError::ContractViolation(_))
        ));
    }

    #[test]
    fn large_space_refused() {
        let big = IsingModel::new(Graph::grid(4, 4), 0.1).unwrap();
        let b = vec![0.5; 2];
        assert!(matches!(
            exhaustive_detector(&big, 1, &b),
            Err(SimError::StateSpaceTooLarge { size: 65536, .. })
        ));
    }

    #[test]
    fn ising_beta_zero_couples_after_every_site_updated() {
        // At beta = 0 the threshold is 1/2 whatever the neighbours, so the
        // two chains agree at every site that has been touched.
        let model = IsingModel::new(Graph::grid(2, 2), 0.0).unwrap();
        let n = 4;
        let mut s = RandomStream::from_seed(8);
        for _ in 0..200 {
            let mut lo = Spins::all(n, -1);
            let mut hi = Spins::all(n, 1);
            let mut touched = [false; 4];
            let mut steps = 0;
            while !touched.iter().all(|&t| t) {
                let u = s.uniforms(2);
                touched[model.site_of(u[0])] = true;
                lo = model.step(&lo, &u);
                hi = model.step(&hi, &u);
                steps += 1;
                assert_eq!(lo == hi, touched.iter().all(|&t| t));
            }
            assert!(steps >= n);
        }
    }
}
