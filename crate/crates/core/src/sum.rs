/// Pairwise (tree) summation in the given order.
pub fn pairwise(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise(&xs[..mid]) + pairwise(&xs[mid..])
}

#[cfg(test)]
mod tests {
    #[test]
    fn matches_naive_on_small_input() {
        let xs: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(super::pairwise(&xs), 5050.0);
        assert_eq!(super::pairwise(&[]), 0.0);
    }
}
