/// Sums values in ascending order so that any permutation of the same
/// multiset produces a bit-identical result.
pub fn canonical_sum(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_independent() {
        let a = [0.1, 1e16, -1e16, 0.7, 3.3];
        let b = [3.3, -1e16, 0.7, 1e16, 0.1];
        assert_eq!(canonical_sum(&a).to_bits(), canonical_sum(&b).to_bits());
        assert_eq!(canonical_sum(&[]), 0.0);
    }
}
