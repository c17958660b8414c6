//! Exhaustive enumeration over all k-subsets, for checking top-k selection.

use std::cmp::Ordering;

use super::{build_solution, check_request, objective_value, AssortmentSolution, Locks, ObjectiveScales, StoreInstance};
use crate::error::{Error, Result};

/// Largest number of subsets the oracle will enumerate.
pub const ENUMERATION_LIMIT: u64 = 1_000_000;

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n.saturating_sub(k));
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Advances `combo` to the next k-combination of `0..n` in lexicographic
/// order. Returns false after the last one.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let Some(i) = (0..k).rev().find(|&i| combo[i] < n - k + i) else {
        return false;
    };
    combo[i] += 1;
    for j in i + 1..k {
        combo[j] = combo[j - 1] + 1;
    }
    true
}

fn sorted_ids(instance: &StoreInstance, combo: &[usize]) -> Vec<String> {
    let mut ids: Vec<String> = combo.iter().map(|&j| instance.candidates[j].id.clone()).collect();
    ids.sort();
    ids
}

/// Evaluates the weighted-sum objective on every feasible k-subset and
/// returns the best. Among exact objective ties the lexicographically
/// smallest sorted id list wins.
pub fn brute_force_oracle(
    instance: &StoreInstance,
    k: usize,
    trade_off_lambda: f64,
    locks: &Locks,
    scales: &ObjectiveScales,
    normalize: bool,
) -> Result<AssortmentSolution> {
    let n = instance.len();
    if binomial(n, k) > ENUMERATION_LIMIT as u128 {
        return Err(Error::InstanceTooLarge { n, k, limit: ENUMERATION_LIMIT });
    }
    let resolved = check_request(instance, k, trade_off_lambda, locks)?;
    let locked_out: Vec<usize> = (0..n)
        .filter(|j| resolved.excluded[*j] && !resolved.locked_in.contains(j))
        .collect();

    let mut combo: Vec<usize> = (0..k).collect();
    let mut best: Option<(f64, Vec<String>, Vec<usize>)> = None;
    loop {
        let feasible = resolved.locked_in.iter().all(|j| combo.contains(j))
            && !locked_out.iter().any(|j| combo.contains(j));
        if feasible {
            let value = objective_value(instance, &combo, trade_off_lambda, k, scales, normalize);
            let replace = match &best {
                None => true,
                Some((best_value, best_ids, _)) => match value.total_cmp(best_value) {
                    Ordering::Greater => true,
                    Ordering::Equal => sorted_ids(instance, &combo) < *best_ids,
                    Ordering::Less => false,
                },
            };
            if replace {
                best = Some((value, sorted_ids(instance, &combo), combo.clone()));
            }
        }
        if !next_combination(&mut combo, n) {
            break;
        }
    }

    // check_request guarantees at least one feasible subset exists.
    let (_, _, combo) = best.expect("feasible subset");
    Ok(build_solution(instance, &combo, trade_off_lambda, k, scales, normalize))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::tests::instance;
    use crate::optimizer::{optimize_with_scales, Candidate};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn enumerates_every_combination() {
        let mut combo = vec![0, 1, 2];
        let mut count = 1;
        while next_combination(&mut combo, 10) {
            count += 1;
        }
        assert_eq!(count, 120);
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(40, 20), 137_846_528_820);
    }

    #[test]
    fn full_subset_when_k_equals_n() {
        let inst = instance(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]);
        let sol = brute_force_oracle(&inst, 3, 0.5, &Locks::default(), &inst.scales(), true).unwrap();
        assert_eq!(sol.product_ids, vec!["p00", "p01", "p02"]);
    }

    #[test]
    fn singleton_max_revenue() {
        let inst = instance(&[1.0, 7.0, 3.0, 2.0], &[3.0, 2.0, 1.0, 0.0]);
        let sol = brute_force_oracle(&inst, 1, 0.0, &Locks::default(), &inst.scales(), false).unwrap();
        assert_eq!(sol.product_ids, vec!["p01"]);
    }

    #[test]
    fn refuses_large_instances() {
        let inst = instance(&[1.0; 40], &[1.0; 40]);
        let err = brute_force_oracle(&inst, 20, 0.5, &Locks::default(), &inst.scales(), true).unwrap_err();
        assert_eq!(err.kind(), "InstanceTooLarge");
    }

    #[test]
    fn seeded_ten_product_instance_matches_top_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(20_180_401);
        let revenue: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..500.0)).collect();
        let higg: Vec<f64> = (0..10).map(|_| rng.random_range(5.0..60.0)).collect();
        let inst = instance(&revenue, &higg);
        let scales = inst.scales();
        let oracle = brute_force_oracle(&inst, 3, 0.5, &Locks::default(), &scales, true).unwrap();
        let fast = optimize_with_scales(&inst, 3, 0.5, &Locks::default(), &scales, true).unwrap();
        assert_eq!(fast, oracle);
    }

    fn candidates() -> impl Strategy<Value = Vec<Candidate>> {
        // Candidates share entries of a small pool so exact ties occur, but
        // only between identical products.
        let pool = prop::collection::vec((0.0f64..500.0, 1.0f64..60.0), 4);
        let picks = prop::collection::vec(0usize..4, 1..=12);
        (pool, picks).prop_map(|(pool, picks)| {
            picks
                .into_iter()
                .enumerate()
                .map(|(j, p)| Candidate {
                    id: format!("p{:02}", (j * 7) % 13),
                    revenue: pool[p].0,
                    higg: pool[p].1,
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn top_k_is_exactly_optimal(
            cands in candidates(),
            k_raw in 1usize..=5,
            lambda_step in 0usize..=4,
            normalize in any::<bool>(),
            lock_mask in any::<u16>(),
        ) {
            let n = cands.len();
            let k = k_raw.min(n);
            let lambda = lambda_step as f64 * 0.25;
            let inst = StoreInstance::new(0, cands);
            let mut locks = Locks::default();
            for j in 0..n {
                match (lock_mask >> j) & 0b11 {
                    1 if locks.locked_in.len() < k / 2 => { locks.locked_in.insert(inst.candidates[j].id.clone()); }
                    2 if j % 3 == 0 => { locks.locked_out.insert(inst.candidates[j].id.clone()); }
                    _ => {}
                }
            }
            let scales = inst.scales();
            let fast = optimize_with_scales(&inst, k, lambda, &locks, &scales, normalize);
            let slow = brute_force_oracle(&inst, k, lambda, &locks, &scales, normalize);
            match (fast, slow) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(a), Err(b)) => prop_assert_eq!(a.kind(), b.kind()),
                (a, b) => prop_assert!(false, "disagree: {:?} vs {:?}", a, b),
            }
        }
    }
}
