use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{optimize_with_scales, AssortmentSolution, Locks, StoreInstance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontMember {
    #[serde(flatten)]
    pub solution: AssortmentSolution,
    pub dominated: bool,
}

/// Distinct assortments from a trade-off sweep, by ascending lambda.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoFront {
    pub store_index: usize,
    pub k: usize,
    pub solutions: Vec<FrontMember>,
}

impl ParetoFront {
    pub fn non_dominated(&self) -> impl Iterator<Item = &AssortmentSolution> {
        self.solutions.iter().filter(|m| !m.dominated).map(|m| &m.solution)
    }
}

/// Flags each `(revenue, higg)` point as non-dominated (`true`) or not.
/// `a` dominates `b` when it has at least the revenue and at most the Higg
/// score of `b`, strictly better in one. Identical points never dominate each
/// other.
pub fn non_dominated_filter(points: &[(f64, f64)]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[b].0.total_cmp(&points[a].0).then(points[a].1.total_cmp(&points[b].1))
    });

    let mut flags = vec![true; points.len()];
    // Lowest higg among points with strictly higher revenue than the group.
    let mut best_higher = f64::INFINITY;
    let mut start = 0;
    while start < order.len() {
        let revenue = points[order[start]].0;
        let end = start + order[start..].iter().take_while(|&&i| points[i].0 == revenue).count();
        // Sorted by higg ascending within the group.
        let group_min = points[order[start]].1;
        for &i in &order[start..end] {
            let higg = points[i].1;
            flags[i] = !(best_higher <= higg || group_min < higg);
        }
        best_higher = best_higher.min(group_min);
        start = end;
    }
    flags
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidRequest("lambda grid is empty".into()));
    }
    if let Some(l) = grid.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(Error::InvalidRequest(format!("lambda {l} outside [0, 1]")));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidRequest("lambda grid must be strictly ascending".into()));
    }
    Ok(())
}

/// Evenly spaced grid of `count` values from 0 to 1 inclusive.
pub fn even_grid(count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count).map(|i| i as f64 / (count - 1) as f64).collect(),
    }
}

/// Runs one top-k selection per lambda with the store's scales held fixed,
/// keeps the first (lowest-lambda) occurrence of each distinct product set
/// and flags dominated members.
pub fn pareto_front(
    instance: &StoreInstance,
    k: usize,
    lambda_grid: &[f64],
    locks: &Locks,
    normalize: bool,
) -> Result<ParetoFront> {
    check_grid(lambda_grid)?;
    let scales = instance.scales();
    let mut seen = HashSet::new();
    let mut solutions = Vec::new();
    for &lambda in lambda_grid {
        let solution = optimize_with_scales(instance, k, lambda, locks, &scales, normalize)?;
        if seen.insert(solution.product_ids.clone()) {
            solutions.push(solution);
        }
    }
    let points: Vec<(f64, f64)> = solutions.iter().map(|s| (s.revenue_score, s.higg_score)).collect();
    let flags = non_dominated_filter(&points);
    Ok(ParetoFront {
        store_index: instance.store_index,
        k,
        solutions: solutions
            .into_iter()
            .zip(flags)
            .map(|(solution, keep)| FrontMember { solution, dominated: !keep })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::tests::instance;
    use crate::optimizer::Candidate;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pairwise(points: &[(f64, f64)]) -> Vec<bool> {
        points
            .iter()
            .map(|b| {
                !points.iter().any(|a| a.0 >= b.0 && a.1 <= b.1 && (a.0 > b.0 || a.1 < b.1))
            })
            .collect()
    }

    #[test]
    fn strict_domination() {
        assert_eq!(non_dominated_filter(&[(10.0, 5.0), (9.0, 6.0)]), vec![true, false]);
    }

    #[test]
    fn duplicates_are_both_kept() {
        assert_eq!(non_dominated_filter(&[(10.0, 5.0), (10.0, 5.0)]), vec![true, true]);
    }

    #[test]
    fn equal_revenue_lower_higg_dominates() {
        assert_eq!(non_dominated_filter(&[(10.0, 6.0), (10.0, 5.0), (11.0, 7.0)]), vec![false, true, true]);
        assert!(non_dominated_filter(&[]).is_empty());
    }

    #[test]
    fn matches_pairwise_on_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(2000);
        let points: Vec<(f64, f64)> = (0..2000)
            .map(|_| (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)))
            .collect();
        assert_eq!(non_dominated_filter(&points), pairwise(&points));
    }

    proptest! {
        #[test]
        fn filter_agrees_with_pairwise(points in prop::collection::vec((0u8..8, 0u8..8), 0..60)) {
            let points: Vec<(f64, f64)> = points.into_iter().map(|(a, b)| (a as f64, b as f64)).collect();
            prop_assert_eq!(non_dominated_filter(&points), pairwise(&points));
        }
    }

    #[test]
    fn single_lambda_front() {
        let inst = instance(&[10.0, 5.0, 1.0], &[98.0, 62.0, 31.0]);
        let front = pareto_front(&inst, 1, &[0.0], &Locks::default(), true).unwrap();
        assert_eq!(front.solutions.len(), 1);
        assert!(!front.solutions[0].dominated);
    }

    #[test]
    fn identical_optima_collapse() {
        // p00 is best on both objectives, so every lambda picks it.
        let inst = instance(&[10.0, 5.0], &[1.0, 2.0]);
        let front = pareto_front(&inst, 1, &[0.0, 1.0], &Locks::default(), true).unwrap();
        assert_eq!(front.solutions.len(), 1);
        assert_eq!(front.solutions[0].solution.trade_off_lambda, 0.0);
    }

    #[test]
    fn grid_validation() {
        let inst = instance(&[10.0, 5.0], &[1.0, 2.0]);
        for grid in [vec![], vec![0.5, 0.5], vec![0.6, 0.2], vec![0.0, 1.5]] {
            let err = pareto_front(&inst, 1, &grid, &Locks::default(), true).unwrap_err();
            assert_eq!(err.kind(), "InvalidRequest");
        }
    }

    #[test]
    fn hundred_product_sweep_is_monotone_and_non_dominated() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let cands = (0..100)
            .map(|j| Candidate {
                id: format!("p{j:03}"),
                revenue: rng.random_range(0.0..2000.0),
                higg: rng.random_range(4.0..60.0),
            })
            .collect();
        let inst = StoreInstance::new(0, cands);
        let front = pareto_front(&inst, 10, &even_grid(21), &Locks::default(), true).unwrap();
        let points: Vec<(f64, f64)> =
            front.solutions.iter().map(|m| (m.solution.revenue_score, m.solution.higg_score)).collect();
        assert!(pairwise(&points).into_iter().all(|nd| nd));
        assert!(front.solutions.iter().all(|m| !m.dominated));
        for w in front.solutions.windows(2) {
            assert!(w[0].solution.trade_off_lambda < w[1].solution.trade_off_lambda);
            assert!(w[1].solution.revenue_score <= w[0].solution.revenue_score);
            assert!(w[1].solution.higg_score <= w[0].solution.higg_score);
        }
        assert!(front.solutions.len() > 1);
    }

    #[test]
    fn even_grid_endpoints() {
        assert_eq!(even_grid(3), vec![0.0, 0.5, 1.0]);
        assert_eq!(even_grid(101)[100], 1.0);
        assert_eq!(even_grid(1), vec![0.0]);
    }
}
