//! Concordant-pair counting shared by the generalization weight, the task
//! similarity and the ensemble weights.

/// Counts pairs `(j, k)`, `j < k`, whose order under `a` agrees with their
/// order under `b`. A tie in either sequence contributes one half.
pub fn concordant_pairs(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "concordance needs equal-length sequences");
    let n = a.len();
    let mut twice = 0u64;
    for j in 0..n {
        for k in j + 1..n {
            if a[j] == a[k] || b[j] == b[k] {
                twice += 1;
            } else if (a[j] < a[k]) == (b[j] < b[k]) {
                twice += 2;
            }
        }
    }
    twice as f64 / 2.0
}

pub fn pair_count(n: usize) -> f64 {
    if n < 2 {
        0.0
    } else {
        (n * (n - 1)) as f64 / 2.0
    }
}

/// `2 F / (n (n - 1))`, the concordant fraction in `[0, 1]`.
pub fn concordance_ratio(a: &[f64], b: &[f64]) -> f64 {
    let pairs = pair_count(a.len());
    if pairs == 0.0 {
        return 0.0;
    }
    concordant_pairs(a, b) / pairs
}
