//! Starting allocations for a chain.

use rand::Rng;

use crate::model::Dataset;

/// Lloyd's k-means on the flattened `K * n` response vectors, seeded with
/// k-means++. Returns one label per subject.
pub fn kmeans_labels<R: Rng + ?Sized>(data: &Dataset, g: usize, rng: &mut R) -> Vec<usize> {
    let n_sub = data.n_subjects();
    if g <= 1 || n_sub == 0 {
        return vec![0; n_sub];
    }
    let dim = data.n_entries() * data.n_times();
    let row = |i: usize| &data.responses()[i * dim..(i + 1) * dim];
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();

    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(g);
    centers.push(row(rng.random_range(0..n_sub)).to_vec());
    let mut d2: Vec<f64> = (0..n_sub).map(|i| dist(row(i), &centers[0])).collect();
    while centers.len() < g {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n_sub - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            rng.random_range(0..n_sub)
        };
        centers.push(row(next).to_vec());
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(dist(row(i), centers.last().unwrap()));
        }
    }

    let mut labels = vec![0usize; n_sub];
    for iter in 0..100 {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let best = (0..g)
                .map(|c| (c, dist(row(i), &centers[c])))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(c, _)| c)
                .unwrap();
            if best != *label || iter == 0 {
                changed |= best != *label;
                *label = best;
            }
        }
        let mut sums = vec![vec![0.0; dim]; g];
        let mut counts = vec![0usize; g];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(row(i)) {
                *s += v;
            }
        }
        for c in 0..g {
            if counts[c] == 0 {
                // Re-seed an empty cluster at the point farthest from its center.
                let far = (0..n_sub)
                    .max_by(|&a, &b| dist(row(a), &centers[labels[a]]).total_cmp(&dist(row(b), &centers[labels[b]])))
                    .unwrap();
                centers[c] = row(far).to_vec();
                labels[far] = c;
                changed = true;
            } else {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        if !changed && iter > 0 {
            break;
        }
    }
    labels
}

pub fn random_labels<R: Rng + ?Sized>(n_sub: usize, g: usize, rng: &mut R) -> Vec<usize> {
    (0..n_sub).map(|_| rng.random_range(0..g.max(1))).collect()
}
