//! Post-processing of retained draws: DIC, ECR relabeling and posterior
//! summaries.

use nalgebra::DMatrix;

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::gibbs::PosteriorSamples;
use crate::perm;

/// Minimum number of retained sweeps accepted by [`compute_dic`].
pub const MIN_DIC_SWEEPS: usize = 10;

/// DIC ingredients for one fitted model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dic {
    /// `-2 * mean(log p(y | theta))`.
    pub mean_deviance: f64,
    /// `2 * var(log p(y | theta))` (sample variance).
    pub p_v: f64,
    /// `mean_deviance + p_v`.
    pub dic: f64,
}

/// DIC from a sequence of observed-data log likelihood draws.
pub fn dic_from_log_likelihoods(ll: &[f64]) -> Result<Dic> {
    if ll.len() < 2 {
        return Err(Error::config(format!(
            "DIC needs at least 2 log-likelihood draws, got {}",
            ll.len()
        )));
    }
    let n = ll.len() as f64;
    let mean = ll.iter().sum::<f64>() / n;
    let var = ll.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let mean_deviance = -2.0 * mean;
    let p_v = 2.0 * var;
    Ok(Dic {
        mean_deviance,
        p_v,
        dic: mean_deviance + p_v,
    })
}

pub fn compute_dic(samples: &PosteriorSamples) -> Result<Dic> {
    if samples.kept() < MIN_DIC_SWEEPS {
        return Err(Error::config(format!(
            "DIC needs at least {MIN_DIC_SWEEPS} retained sweeps, got {}",
            samples.kept()
        )));
    }
    dic_from_log_likelihoods(&samples.log_likelihoods())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DicEntry {
    pub components: usize,
    pub dic: Dic,
}

/// DIC over a range of component counts and the selected `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct DicReport {
    pub entries: Vec<DicEntry>,
    pub selected: usize,
}

/// DIC values closer than this are treated as tied.
pub const DIC_TIE_TOLERANCE: f64 = 1e-9;

impl DicReport {
    /// Picks the minimum DIC; near-ties go to the smaller `G`.
    pub fn new(mut entries: Vec<DicEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::config("DIC report needs at least one model"));
        }
        entries.sort_by_key(|e| e.components);
        let mut best = entries[0];
        for e in &entries[1..] {
            if e.dic.dic < best.dic.dic - DIC_TIE_TOLERANCE {
                best = *e;
            }
        }
        Ok(DicReport {
            selected: best.components,
            entries,
        })
    }
}

/// ECR permutation for one sweep: `perm[g]` is the new label of component
/// `g`, chosen to maximize the number of subjects whose relabeled allocation
/// agrees with `pivot`.
pub fn ecr_permutation(z: &[usize], pivot: &[usize], n_components: usize) -> Vec<usize> {
    let mut agree = vec![vec![0.0; n_components]; n_components];
    for (&a, &b) in z.iter().zip(pivot) {
        agree[a][b] += 1.0;
    }
    perm::max_score_assignment(&agree)
}

/// Allocation of the retained sweep with the highest observed-data log
/// likelihood.
pub fn default_pivot(samples: &PosteriorSamples) -> Option<Vec<usize>> {
    samples
        .draws
        .iter()
        .max_by(|a, b| a.log_likelihood.total_cmp(&b.log_likelihood))
        .map(|d| d.z.clone())
}

/// Relabels every sweep by its ECR permutation against `pivot`, permuting
/// allocations and all per-component parameters consistently. Also returns
/// the permutation applied to each sweep.
pub fn relabel_ecr(samples: &PosteriorSamples, pivot: &[usize]) -> (PosteriorSamples, Vec<Vec<usize>>) {
    let g = samples.n_components;
    let mut out = samples.clone();
    let mut perms = Vec::with_capacity(samples.kept());
    for draw in &mut out.draws {
        let p = ecr_permutation(&draw.z, pivot, g);
        if !perm::is_identity(&p) {
            let old = std::mem::take(&mut draw.components);
            let mut slots: Vec<Option<_>> = (0..g).map(|_| None).collect();
            for (a, c) in old.into_iter().enumerate() {
                slots[p[a]] = Some(c);
            }
            draw.components = slots
                .into_iter()
                .map(|c| c.expect("permutation is a bijection"))
                .collect();
            for zi in &mut draw.z {
                *zi = p[*zi];
            }
        }
        perms.push(p);
    }
    (out, perms)
}

/// Type-7 sample quantile (linear interpolation between order statistics) of
/// already sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty sample");
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pointwise posterior band of one component mean.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBand {
    pub component: usize,
    pub entry: usize,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Posterior summary of one logistic coefficient contrast
/// `delta_gp - delta_Gp` against the last component.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSummary {
    pub component: usize,
    pub coefficient: usize,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryReport {
    pub level: f64,
    pub trajectories: Vec<TrajectoryBand>,
    pub logistic: Vec<CoefficientSummary>,
    /// `N x G` fraction of retained sweeps allocating subject `i` to `g`.
    pub allocation: DMatrix<f64>,
}

impl SummaryReport {
    pub fn trajectory(&self, g: usize, k: usize) -> Option<&TrajectoryBand> {
        self.trajectories.iter().find(|t| t.component == g && t.entry == k)
    }
}

/// 95% posterior summary.
pub fn summarize(samples: &PosteriorSamples, basis: &BasisSet) -> Result<SummaryReport> {
    summarize_with_level(samples, basis, 0.95)
}

pub fn summarize_with_level(samples: &PosteriorSamples, basis: &BasisSet, level: f64) -> Result<SummaryReport> {
    if samples.kept() == 0 {
        return Err(Error::config("no retained sweeps to summarize"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config(format!("credible level must lie in (0, 1), got {level}")));
    }
    let (plo, phi) = (0.5 * (1.0 - level), 1.0 - 0.5 * (1.0 - level));
    let g_count = samples.n_components;
    let first = &samples.draws[0];
    let k_count = first.components[0].entries.len();
    let n = basis.n();
    let design = basis.design();
    let kept = samples.kept();

    let mut trajectories = Vec::with_capacity(g_count * k_count);
    let mut column = vec![0.0; kept];
    for g in 0..g_count {
        for k in 0..k_count {
            // curves[(s, j)]: mean of sweep s at time j
            let mut curves = DMatrix::zeros(kept, n);
            for (s, d) in samples.draws.iter().enumerate() {
                let mu = &design * &d.components[g].entries[k].theta;
                curves.row_mut(s).copy_from(&mu.transpose());
            }
            let mut band = TrajectoryBand {
                component: g,
                entry: k,
                mean: vec![0.0; n],
                lower: vec![0.0; n],
                upper: vec![0.0; n],
            };
            for j in 0..n {
                column.copy_from_slice(curves.column(j).as_slice());
                band.mean[j] = column.iter().sum::<f64>() / kept as f64;
                column.sort_by(f64::total_cmp);
                band.lower[j] = quantile_sorted(&column, plo).min(band.mean[j]);
                band.upper[j] = quantile_sorted(&column, phi).max(band.mean[j]);
            }
            trajectories.push(band);
        }
    }

    let p1 = first.components[0].delta.len();
    let mut logistic = Vec::new();
    for g in 0..g_count.saturating_sub(1) {
        for p in 0..p1 {
            for (s, d) in samples.draws.iter().enumerate() {
                column[s] = d.components[g].delta[p] - d.components[g_count - 1].delta[p];
            }
            let mean = column.iter().sum::<f64>() / kept as f64;
            column.sort_by(f64::total_cmp);
            logistic.push(CoefficientSummary {
                component: g,
                coefficient: p,
                mean,
                lower: quantile_sorted(&column, plo).min(mean),
                upper: quantile_sorted(&column, phi).max(mean),
            });
        }
    }

    let n_sub = first.z.len();
    let mut allocation = DMatrix::zeros(n_sub, g_count);
    for d in &samples.draws {
        for (i, &g) in d.z.iter().enumerate() {
            allocation[(i, g)] += 1.0;
        }
    }
    allocation /= kept as f64;

    Ok(SummaryReport {
        level,
        trajectories,
        logistic,
        allocation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{build_basis, TimeGrid};
    use crate::gibbs::Draw;
    use crate::model::{ComponentParams, EntryParams};
    use crate::perm::next_permutation;
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use rand::Rng;

    fn component(tag: f64, p: usize) -> ComponentParams {
        ComponentParams {
            entries: vec![EntryParams {
                theta: DVector::from_element(p, tag),
                tau_sq: 1.0 + tag,
                sigma_sq: 2.0 + tag,
            }],
            delta: DVector::from_element(2, tag),
            zeta: DVector::zeros(3),
            kappa_sq: 1.0,
        }
    }

    fn samples(zs: Vec<Vec<usize>>, g: usize, lls: Vec<f64>) -> PosteriorSamples {
        let draws = zs
            .into_iter()
            .zip(&lls)
            .enumerate()
            .map(|(s, (z, &ll))| Draw {
                sweep: s + 1,
                components: (0..g).map(|h| component(h as f64, 3)).collect(),
                z,
                log_likelihood: ll,
            })
            .collect();
        PosteriorSamples {
            n_components: g,
            draws,
            sweep_log_likelihood: lls,
        }
    }

    #[test]
    fn dic_examples() {
        let d = dic_from_log_likelihoods(&[-10.0, -12.0]).unwrap();
        assert_abs_diff_eq!(d.mean_deviance, 22.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.p_v, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.dic, 26.0, epsilon = 1e-12);
        let d = dic_from_log_likelihoods(&[-7.5; 12]).unwrap();
        assert_eq!((d.p_v, d.dic), (0.0, 15.0));
        assert!(dic_from_log_likelihoods(&[-1.0]).is_err());
    }

    #[test]
    fn compute_dic_needs_ten_sweeps() {
        let s = samples(vec![vec![0]; 9], 1, vec![-3.0; 9]);
        assert!(matches!(compute_dic(&s), Err(Error::Config(_))));
        let s = samples(vec![vec![0]; 10], 1, vec![-3.0; 10]);
        assert_eq!(compute_dic(&s).unwrap().dic, 6.0);
    }

    fn entry(g: usize, dic: f64) -> DicEntry {
        DicEntry {
            components: g,
            dic: Dic {
                mean_deviance: dic,
                p_v: 0.0,
                dic,
            },
        }
    }

    #[test]
    fn dic_selection_and_ties() {
        let r = DicReport::new(vec![entry(3, 50.0), entry(1, 70.0), entry(2, 40.0)]).unwrap();
        assert_eq!(r.selected, 2);
        assert_eq!(
            r.entries.iter().map(|e| e.components).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
        let r = DicReport::new(vec![entry(2, 40.0), entry(3, 40.0 - 5e-10)]).unwrap();
        assert_eq!(r.selected, 2);
        let r = DicReport::new(vec![entry(2, 40.0)]).unwrap();
        assert_eq!(r.selected, 2);
        assert!(DicReport::new(vec![]).is_err());
    }

    #[test]
    fn ecr_examples() {
        let pivot = vec![0, 0, 1, 1, 2];
        assert_eq!(ecr_permutation(&pivot, &pivot, 3), vec![0, 1, 2]);
        let swapped: Vec<usize> = pivot.iter().map(|&g| [1, 0, 2][g]).collect();
        assert_eq!(ecr_permutation(&swapped, &pivot, 3), vec![1, 0, 2]);
        assert_eq!(ecr_permutation(&[1, 1, 0], &[0, 0, 1], 2), vec![1, 0]);
    }

    fn brute_force_agreement(z: &[usize], pivot: &[usize], g: usize) -> usize {
        let mut p: Vec<usize> = (0..g).collect();
        let mut best = 0;
        loop {
            let score = z.iter().zip(pivot).filter(|(a, b)| p[**a] == **b).count();
            best = best.max(score);
            if !next_permutation(&mut p) {
                return best;
            }
        }
    }

    #[test]
    fn ecr_is_optimal_against_brute_force() {
        let mut rng = RngStream::new(7, 0);
        for g in 2..=4 {
            for _ in 0..50 {
                let n = 12;
                let pivot: Vec<usize> = (0..n).map(|_| rng.random_range(0..g)).collect();
                let z: Vec<usize> = (0..n).map(|_| rng.random_range(0..g)).collect();
                let p = ecr_permutation(&z, &pivot, g);
                let score = z.iter().zip(&pivot).filter(|(a, b)| p[**a] == **b).count();
                assert_eq!(score, brute_force_agreement(&z, &pivot, g));
            }
        }
    }

    #[test]
    fn relabeling_moves_parameters_with_labels() {
        let pivot = vec![0, 0, 1];
        let s = samples(vec![vec![0, 0, 1], vec![1, 1, 0]], 2, vec![-1.0, -2.0]);
        let (out, perms) = relabel_ecr(&s, &pivot);
        assert_eq!(perms, vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(out.draws[1].z, pivot);
        // the draw's original component 1 now sits in slot 0
        assert_eq!(out.draws[1].components[0].entries[0].sigma_sq, 3.0);
        assert_eq!(out.draws[1].components[1].entries[0].sigma_sq, 2.0);
        assert_eq!(out.log_likelihoods(), s.log_likelihoods());
        assert_eq!(out.draws[0], s.draws[0]);
        assert_eq!(default_pivot(&s).unwrap(), vec![0, 0, 1]);
    }

    fn basis() -> BasisSet {
        build_basis(&TimeGrid::uniform(4).unwrap(), 1).unwrap()
    }

    #[test]
    fn quantile_rule() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 5.0);
        assert_eq!(quantile_sorted(&xs, 0.5), 3.0);
        assert_abs_diff_eq!(quantile_sorted(&xs, 0.1), 1.4, epsilon = 1e-12);
        assert_eq!(quantile_sorted(&[2.0], 0.3), 2.0);
    }

    #[test]
    fn summary_examples() {
        let b = basis();
        let one = samples(vec![vec![1, 0, 1]], 2, vec![-1.0]);
        let r = summarize(&one, &b).unwrap();
        let t = r.trajectory(1, 0).unwrap();
        assert_eq!(t.lower, t.mean);
        assert_eq!(t.upper, t.mean);
        assert_eq!(r.allocation[(0, 1)], 1.0);
        assert_eq!(r.allocation[(1, 0)], 1.0);

        // two sweeps whose curves differ by exactly 1 at every time point:
        // only the intercept moves
        let mut two = samples(vec![vec![0, 0, 0], vec![0, 0, 0]], 1, vec![-1.0, -1.0]);
        let base = two.draws[0].components[0].entries[0].theta.clone();
        two.draws[1].components[0].entries[0].theta[0] = base[0] + 1.0;
        let r = summarize(&two, &b).unwrap();
        let t = r.trajectory(0, 0).unwrap();
        let c = (b.design() * &base)[2];
        assert_abs_diff_eq!(t.mean[2], c + 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(t.lower[2], c + 0.025, epsilon = 1e-12);
        assert_abs_diff_eq!(t.upper[2], c + 0.975, epsilon = 1e-12);
    }

    #[test]
    fn logistic_summaries_are_contrasts_against_the_last_component() {
        let s = samples(vec![vec![0, 1, 2]; 3], 3, vec![-1.0; 3]);
        let r = summarize(&s, &basis()).unwrap();
        assert_eq!(r.logistic.len(), 2 * 2);
        // delta_g is filled with g, so the contrast with component 2 is g - 2
        for c in &r.logistic {
            assert_eq!(c.mean, c.component as f64 - 2.0);
        }
    }

    #[test]
    fn band_and_allocation_invariants() {
        let mut rng = RngStream::new(8, 0);
        let g = 3;
        let zs: Vec<Vec<usize>> = (0..40)
            .map(|_| (0..5).map(|_| rng.random_range(0..g)).collect())
            .collect();
        let mut s = samples(zs, g, vec![-1.0; 40]);
        for d in &mut s.draws {
            for c in &mut d.components {
                for v in c.entries[0].theta.iter_mut() {
                    *v += crate::rng::standard_normal(&mut rng);
                }
            }
        }
        let r95 = summarize(&s, &basis()).unwrap();
        let r99 = summarize_with_level(&s, &basis(), 0.99).unwrap();
        for (a, b) in r95.trajectories.iter().zip(&r99.trajectories) {
            for j in 0..a.mean.len() {
                assert!(a.lower[j] <= a.mean[j] && a.mean[j] <= a.upper[j]);
                assert!(b.lower[j] <= a.lower[j] && a.upper[j] <= b.upper[j]);
            }
        }
        for i in 0..5 {
            assert_abs_diff_eq!(r95.allocation.row(i).sum(), 1.0, epsilon = 1e-12);
        }
        assert!(summarize_with_level(&s, &basis(), 1.0).is_err());
    }
}
