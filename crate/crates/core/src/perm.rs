//! Optimal label assignment between two sets of `G` components.
//!
//! A permutation is stored as `perm[a] = b`: item `a` on the left side is
//! assigned to item `b` on the right side.

/// Largest `G` for which all `G!` permutations are enumerated. Above this the
/// Hungarian algorithm is used.
pub const EXHAUSTIVE_LIMIT: usize = 8;

/// Permutation minimizing `sum_a cost[a][perm[a]]`.
///
/// Enumerates permutations in lexicographic order starting from the identity
/// and only replaces the incumbent on strict improvement, so ties resolve to
/// the lexicographically smallest optimum.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let g = cost.len();
    if g > EXHAUSTIVE_LIMIT {
        return hungarian(cost);
    }
    let mut perm: Vec<usize> = (0..g).collect();
    let mut best = perm.clone();
    let mut best_cost = total(cost, &perm);
    while next_permutation(&mut perm) {
        let c = total(cost, &perm);
        if c < best_cost {
            best_cost = c;
            best.copy_from_slice(&perm);
        }
    }
    best
}

/// Permutation maximizing `sum_a score[a][perm[a]]`.
pub fn max_score_assignment(score: &[Vec<f64>]) -> Vec<usize> {
    let neg: Vec<Vec<f64>> = score.iter().map(|row| row.iter().map(|v| -v).collect()).collect();
    min_cost_assignment(&neg)
}

pub fn total(cost: &[Vec<f64>], perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(a, &b)| cost[a][b]).sum()
}

pub fn inverse(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (a, &b) in perm.iter().enumerate() {
        inv[b] = a;
    }
    inv
}

pub fn is_identity(perm: &[usize]) -> bool {
    perm.iter().enumerate().all(|(a, &b)| a == b)
}

/// Advances to the next permutation in lexicographic order. Returns `false`
/// after the last one.
pub fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// O(G^3) Hungarian algorithm with potentials.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // way[j] / p[j] use 1-based columns; p[j] is the row matched to column j.
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn enumerates_all_permutations() {
        let mut p = vec![0, 1, 2, 3];
        let mut count = 1;
        while next_permutation(&mut p) {
            count += 1;
        }
        assert_eq!(count, 24);
        assert_eq!(p, vec![3, 2, 1, 0]);
    }

    #[test]
    fn ties_prefer_identity() {
        let cost = vec![vec![1.0; 3]; 3];
        assert_eq!(min_cost_assignment(&cost), vec![0, 1, 2]);
    }

    proptest! {
        #[test]
        fn hungarian_matches_enumeration(vals in prop::collection::vec(0.0f64..10.0, 36)) {
            let cost: Vec<Vec<f64>> = vals.chunks(6).map(|c| c.to_vec()).collect();
            let a = min_cost_assignment(&cost);
            let b = hungarian(&cost);
            prop_assert!((total(&cost, &a) - total(&cost, &b)).abs() < 1e-9);
        }
    }

    #[test]
    fn large_problem_uses_hungarian() {
        let g = 12;
        let cost: Vec<Vec<f64>> = (0..g)
            .map(|a| {
                (0..g)
                    .map(|b| if b == (a + 5) % g { 0.0 } else { 1.0 + (a * b) as f64 })
                    .collect()
            })
            .collect();
        let perm = min_cost_assignment(&cost);
        for (a, &b) in perm.iter().enumerate() {
            assert_eq!(b, (a + 5) % g);
        }
        assert_eq!(inverse(&perm)[5 % g], 0);
    }
}
