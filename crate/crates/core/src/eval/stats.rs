//! Rank correlation and p-value combination.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use super::{EvalError, RatingsMatrix};

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn check_pair(xs: &[f64], ys: &[f64]) -> Result<(), EvalError> {
    if xs.len() != ys.len() {
        return Err(EvalError::Degenerate(format!("length mismatch: {} vs {}", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(EvalError::Degenerate(format!("need at least 3 observations, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(EvalError::Degenerate("non-finite observation".into()));
    }
    Ok(())
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    check_pair(xs, ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys)).ok_or_else(|| EvalError::Degenerate("constant input".into()))
}

/// Regularized upper incomplete gamma `Q(a, x)`.
///
/// Series for `P` below `x = a + 1`, Lentz continued fraction for `Q` above.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "gamma_q domain: a > 0, x >= 0");
    if x == 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    let log_prefix = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..10_000 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (1.0 - sum * log_prefix.exp()).max(0.0)
    } else {
        const TINY: f64 = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (log_prefix.exp() * h).min(1.0)
    }
}

/// Survival function of the chi-square distribution with `dof` degrees of freedom.
pub fn chi_square_sf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(dof / 2.0, x / 2.0)
}

/// Fisher's method: `X = -2 sum ln p` against chi-square with `2k` dof.
pub fn fisher_combined(pvalues: &[f64]) -> Result<f64, EvalError> {
    if pvalues.is_empty() {
        return Err(EvalError::Domain("no p-values to combine".into()));
    }
    let mut x = 0.0;
    for &p in pvalues {
        if !(p > 0.0 && p <= 1.0) {
            return Err(EvalError::Domain(format!("p-value {p} outside (0, 1]")));
        }
        x -= 2.0 * p.ln();
    }
    Ok(chi_square_sf(x, 2.0 * pvalues.len() as f64))
}

/// Largest fold size handled by the exact permutation distribution.
pub const EXACT_PERMUTATION_MAX: usize = 10;

/// Smallest p-value reported, so that Fisher's statistic stays finite.
pub const P_FLOOR: f64 = f64::MIN_POSITIVE;

/// One-sided (positive association) p-value for Spearman's rho.
///
/// Exact over all permutations for `n <= 10`, Student-t approximation with
/// `n - 2` dof otherwise.
pub fn spearman_pvalue(xs: &[f64], ys: &[f64]) -> Result<(f64, f64), EvalError> {
    let rho = spearman(xs, ys)?;
    let n = xs.len();
    let p = if n <= EXACT_PERMUTATION_MAX {
        exact_upper_tail(&average_ranks(xs), &average_ranks(ys))
    } else if rho >= 1.0 {
        0.0
    } else if rho <= -1.0 {
        1.0
    } else {
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("dof is positive");
        dist.sf(t)
    };
    Ok((rho, p.clamp(P_FLOOR, 1.0)))
}

/// Fraction of permutations of `ry` whose rank cross-product reaches the
/// observed one. Mean and variance of ranks are permutation invariant, so
/// the cross-product orders permutations exactly as rho does.
fn exact_upper_tail(rx: &[f64], ry: &[f64]) -> f64 {
    let dot = |y: &[f64]| rx.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let observed = dot(ry) - 1e-9;
    let mut perm = ry.to_vec();
    let n = perm.len();
    let mut c = vec![0usize; n];
    let (mut hits, mut total) = (u64::from(dot(&perm) >= observed), 1u64);
    // Heap's algorithm
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            hits += u64::from(dot(&perm) >= observed);
            total += 1;
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanConsistency {
    pub mean_rho: f64,
    /// `(rater id, rho against the mean of the others)` for included raters.
    pub per_rater: Vec<(String, f64)>,
    /// Raters whose correlation was undefined (constant ratings on either side).
    pub excluded: Vec<String>,
}

/// Mean leave-one-out Spearman between each rater and the mean of the rest.
pub fn human_consistency(ratings: &RatingsMatrix) -> Result<HumanConsistency, EvalError> {
    let k = ratings.rater_count();
    let n = ratings.image_count();
    if k < 2 || n < 3 {
        return Err(EvalError::Degenerate(format!("need >= 2 raters and >= 3 images, got {k} x {n}")));
    }
    let mut per_rater = Vec::new();
    let mut excluded = Vec::new();
    for r in 0..k {
        let others: Vec<f64> = (0..n)
            .map(|i| (0..k).filter(|&o| o != r).map(|o| ratings.value(o, i)).sum::<f64>() / (k - 1) as f64)
            .collect();
        match spearman(ratings.rater(r), &others) {
            Ok(rho) => per_rater.push((ratings.rater_ids()[r].clone(), rho)),
            Err(_) => excluded.push(ratings.rater_ids()[r].clone()),
        }
    }
    if per_rater.is_empty() {
        return Err(EvalError::Degenerate("every rater was degenerate".into()));
    }
    let mean_rho = per_rater.iter().map(|(_, r)| r).sum::<f64>() / per_rater.len() as f64;
    Ok(HumanConsistency { mean_rho, per_rater, excluded })
}
