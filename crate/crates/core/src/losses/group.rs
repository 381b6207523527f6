//! Reward normalization within a group of samples.
//!
//! Advantages are rewards centered by the group mean and scaled by the
//! population standard deviation (floored at `eps_std`). Members with
//! positive advantage form the preferred side, the rest the dispreferred
//! side, each weighted by `|advantage|`. Centering makes the two sides'
//! weight totals equal, and a group whose rewards are all identical
//! carries no signal at all: it is flagged degenerate and skipped by
//! callers.

use crate::error::{CoreError, CoreResult};
use crate::scalar::Real;

/// Centered, scale-normalized scores: `(r_i - mean) / max(std, eps_std)`
/// with the population convention (divide by the group size). All-equal
/// rewards yield exact zeros.
pub fn advantages<R: Real>(rewards: &[R], eps_std: R) -> Vec<R> {
    assert!(!rewards.is_empty(), "advantages over an empty group");
    assert!(eps_std > R::zero(), "eps_std must be positive");
    if rewards.iter().all(|&r| r == rewards[0]) {
        return vec![R::zero(); rewards.len()];
    }
    let n = R::from_usize(rewards.len()).expect("group size fits the scalar");
    let mean = rewards.iter().fold(R::zero(), |a, &r| a + r) / n;
    let var = rewards.iter().fold(R::zero(), |a, &r| {
        let d = r - mean;
        a + d * d
    }) / n;
    let denom = var.sqrt().max(eps_std);
    if rewards.len() == 2 && var.sqrt() >= eps_std {
        // A distinct pair standardizes to exactly +-1; computing it through
        // mean and sqrt would smudge the last bit and the pairwise
        // equivalence with it.
        let one = R::one();
        return if rewards[0] > rewards[1] { vec![one, -one] } else { vec![-one, one] };
    }
    rewards.iter().map(|&r| (r - mean) / denom).collect()
}

/// One rolled-out sample with its reward and normalized advantage.
#[derive(Debug, Clone)]
pub struct GroupMember<R: Real> {
    pub x: Vec<R>,
    pub reward: R,
    pub advantage: R,
}

impl<R: Real> GroupMember<R> {
    /// Contrast weight `|advantage|`.
    pub fn weight(&self) -> R {
        self.advantage.abs()
    }

    /// Preferred side: strictly positive advantage.
    pub fn is_positive(&self) -> bool {
        self.advantage > R::zero()
    }
}

/// A group of samples generated under one condition, scored together.
#[derive(Debug, Clone)]
pub struct Group<R: Real> {
    /// Condition the samples were generated under (`None` = unconditional).
    pub cond: Option<usize>,
    pub members: Vec<GroupMember<R>>,
    /// All rewards equal: no preference signal, skip this group.
    pub degenerate: bool,
}

impl<R: Real> Group<R> {
    pub fn new(
        cond: Option<usize>,
        samples: Vec<Vec<R>>,
        rewards: &[R],
        eps_std: R,
    ) -> CoreResult<Self> {
        if samples.len() != rewards.len() {
            return Err(CoreError::Shape {
                what: "group rewards",
                expected: samples.len(),
                got: rewards.len(),
            });
        }
        if samples.len() < 2 {
            return Err(CoreError::invalid("a group needs at least two members"));
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(CoreError::NonFinite { op: "group reward".into() });
        }
        let degenerate = rewards.iter().all(|&r| r == rewards[0]);
        let adv = advantages(rewards, eps_std);
        let members = samples
            .into_iter()
            .zip(rewards.iter().zip(adv.iter()))
            .map(|(x, (&reward, &advantage))| GroupMember { x, reward, advantage })
            .collect();
        Ok(Group { cond, members, degenerate })
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// Weight totals of the preferred and dispreferred sides, accumulated
    /// in member order. Centering forces them equal up to rounding.
    pub fn weight_sums(&self) -> (R, R) {
        let mut pos = R::zero();
        let mut neg = R::zero();
        for m in &self.members {
            if m.is_positive() {
                pos += m.weight();
            } else {
                neg += m.weight();
            }
        }
        (pos, neg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{uniform, SeededRng};
    use rand::SeedableRng;

    const EPS_STD: f64 = 1e-8;

    #[test]
    fn advantages_match_hand_computed_values() {
        // [1,2,3]: mean 2, population std sqrt(2/3); scores +-1.2247448713915890.
        let a = advantages(&[1.0, 2.0, 3.0], EPS_STD);
        assert!((a[0] + 1.224_744_871_391_589).abs() <= 1e-15);
        assert!(a[1].abs() <= 1e-15);
        assert!((a[2] - 1.224_744_871_391_589).abs() <= 1e-15);
        // [1,3]: mean 2, population std 1; scores -1 and +1 exactly.
        let b = advantages(&[1.0, 3.0], EPS_STD);
        assert_eq!(b, vec![-1.0, 1.0]);
    }

    #[test]
    fn all_equal_rewards_give_exact_zeros() {
        let a = advantages(&[0.1, 0.1, 0.1, 0.1], EPS_STD);
        assert!(a.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn advantages_are_invariant_to_positive_affine_reward_maps() {
        let r = [0.3, 0.9, 0.1, 0.55, 0.7];
        let base = advantages(&r, EPS_STD);
        let mapped: Vec<f64> = r.iter().map(|&v| 2.5 * v - 7.0).collect();
        let shifted = advantages(&mapped, EPS_STD);
        for (a, b) in base.iter().zip(shifted.iter()) {
            assert!((a - b).abs() <= 1e-9, "affine invariance broke: {a} vs {b}");
        }
    }

    #[test]
    fn tiny_spread_is_floored_not_amplified() {
        // Spread 1e-12 around 0.5: raw std ~ 4e-13 < eps_std, so the floor
        // keeps advantages from exploding.
        let a = advantages(&[0.5 - 1e-12, 0.5 + 1e-12], EPS_STD);
        assert!(a[1] > 0.0 && a[1] < 1e-3);
        assert!((a[0] + a[1]).abs() <= 1e-16);
    }

    #[test]
    fn weight_sums_agree_across_group_sizes() {
        let mut rng = SeededRng::seed_from_u64(99);
        for size in 2..=24 {
            for _ in 0..30 {
                let rewards: Vec<f64> = (0..size).map(|_| uniform(&mut rng, 0.0, 1.0)).collect();
                let samples = vec![vec![0.0, 0.0]; size];
                let g = Group::new(None, samples, &rewards, EPS_STD).unwrap();
                if g.degenerate {
                    continue;
                }
                let (pos, neg) = g.weight_sums();
                assert!((pos - neg).abs() <= 1e-9, "size {size}: {pos} vs {neg}");
                assert!(pos > 0.0);
            }
        }
    }

    #[test]
    fn group_construction_validates_input() {
        assert!(Group::<f64>::new(None, vec![vec![0.0]], &[1.0], EPS_STD).is_err());
        assert!(Group::<f64>::new(None, vec![vec![0.0]; 3], &[1.0, 2.0], EPS_STD).is_err());
        assert!(Group::<f64>::new(None, vec![vec![0.0]; 2], &[f64::NAN, 0.0], EPS_STD).is_err());
        let g = Group::new(Some(3), vec![vec![0.0]; 2], &[0.7, 0.7], EPS_STD).unwrap();
        assert!(g.degenerate);
        assert_eq!(g.size(), 2);
    }

    #[test]
    fn partition_is_by_advantage_sign() {
        let g = Group::new(None, vec![vec![0.0]; 3], &[1.0, 2.0, 3.0], EPS_STD).unwrap();
        assert!(!g.members[0].is_positive());
        assert!(!g.members[1].is_positive()); // zero advantage sits on the negative side
        assert!(g.members[2].is_positive());
        assert_eq!(g.members[1].weight(), 0.0);
    }
}
