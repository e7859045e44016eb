/// Softmin-like score `-log2((1/N) sum 2^{-k_i})` over the CZ counts of the
/// prospective samples out of `total` raw samples. Infinite when nothing
/// passed.
pub fn score(cz_counts: &[usize], total: usize) -> f64 {
    let Some(&k0) = cz_counts.iter().min() else {
        return f64::INFINITY;
    };
    assert!(total >= cz_counts.len() && total > 0, "total must cover the accepted samples");
    let sum: f64 = cz_counts.iter().map(|&k| (-((k - k0) as f64)).exp2()).sum();
    k0 as f64 + ((total as f64).log2() - sum.log2())
}
