//! Spacing-based test statistics on wedges and their subsections.

use crate::error::{Error, Result};
use crate::geometry::WedgeScan;
use serde::{Deserialize, Serialize};

/// `beta(z) = (2z - 1) 1_{(0,1)}(z)`.
pub fn beta(z: f64) -> f64 {
    if z > 0.0 && z < 1.0 {
        2.0 * z - 1.0
    } else {
        0.0
    }
}

/// Multiscale penalty `Gamma(delta) = sqrt(2 log(e / delta))`.
///
/// `delta = span / (n - 1)` may exceed one when a single wedge captures
/// nearly the whole sample; the formula stays real for `delta < e`, so no
/// clamping is applied.
pub fn gamma_penalty(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < std::f64::consts::E) {
        return Err(Error::InvalidInput(format!(
            "gamma penalty requires delta in (0, e), got {delta}"
        )));
    }
    Ok((2.0 * (std::f64::consts::E / delta).ln()).sqrt())
}

/// Index pair selecting the subsection between the j-th and k-th ordered
/// projected distances; index 0 denotes the vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubsectionIndex {
    pub j: usize,
    pub k: usize,
}

impl SubsectionIndex {
    pub fn new(j: usize, k: usize, n_max: usize) -> Result<Self> {
        if !(j < k && k <= n_max && k - j > 1) {
            return Err(Error::InvalidInput(format!(
                "subsection indices require 0 <= j < k <= {n_max} and k - j > 1, got ({j}, {k})"
            )));
        }
        Ok(SubsectionIndex { j, k })
    }

    /// Number of projected distances between the endpoints.
    pub fn span(&self) -> usize {
        self.k - self.j
    }
}

/// A raw spacing statistic together with its summand count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatisticValue {
    pub value: f64,
    pub count: usize,
}

/// Whole-wedge statistic `T_K = sum_j beta((P_e X_(j) / P_e X_(N))^d)`.
pub fn statistic_wedge(scan: &WedgeScan, d: usize) -> Result<StatisticValue> {
    let n = scan.count();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "wedge statistic needs at least 2 observations, got {n}"
        )));
    }
    statistic_subsection(scan, SubsectionIndex::new(0, n, n)?, d)
}

/// Subsection statistic over the ordered projected distances between
/// indices `j` and `k`, with the vertex convention `P_e X_(0) = 0`.
pub fn statistic_subsection(
    scan: &WedgeScan,
    idx: SubsectionIndex,
    d: usize,
) -> Result<StatisticValue> {
    let n = scan.count();
    if idx.k > n {
        return Err(Error::InvalidInput(format!(
            "subsection upper index {} exceeds scan count {n}",
            idx.k
        )));
    }
    let dist = |i: usize| -> f64 {
        if i == 0 {
            0.0
        } else {
            scan.distances[i - 1]
        }
    };
    let de = d as f64;
    let lo = dist(idx.j).powf(de);
    let hi = dist(idx.k).powf(de);
    let denom = hi - lo;
    if denom <= 0.0 {
        return Err(Error::DegenerateScale(format!(
            "tied projected distances at indices ({}, {})",
            idx.j, idx.k
        )));
    }
    let mut value = 0.0;
    for l in idx.j + 1..idx.k {
        value += beta((dist(l).powf(de) - lo) / denom);
    }
    Ok(StatisticValue { value, count: idx.span() - 1 })
}

/// Two-sided normalization `sqrt(3/(span-1)) |T| - Gamma(span/(n-1))`.
pub fn normalize(stat: &StatisticValue, n: usize, span: usize) -> Result<f64> {
    normalized_term(stat.value.abs(), n, span)
}

/// One-sided variant, large when the statistic is strongly negative.
pub fn normalize_one_sided(stat: &StatisticValue, n: usize, span: usize) -> Result<f64> {
    normalized_term(-stat.value, n, span)
}

fn normalized_term(oriented: f64, n: usize, span: usize) -> Result<f64> {
    if span < 2 {
        return Err(Error::InvalidInput("normalization requires span >= 2".into()));
    }
    if n < 3 {
        return Err(Error::InvalidInput("normalization requires n >= 3".into()));
    }
    let gamma = gamma_penalty(span as f64 / (n as f64 - 1.0))?;
    Ok((3.0 / (span as f64 - 1.0)).sqrt() * oriented - gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Wedge, WedgeScan};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn scan_from_distances(distances: Vec<f64>) -> WedgeScan {
        let wedge = Wedge::new(
            Point::from(vec![0.0, 0.0]),
            vec![1.0, 0.0],
            std::f64::consts::FRAC_PI_4,
            distances.last().copied().unwrap_or(1.0).max(1.0),
        )
        .unwrap();
        let member_indices = (0..distances.len()).collect();
        WedgeScan { wedge, member_indices, distances }
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta(0.5), 0.0);
        assert_eq!(beta(0.75), 0.5);
        assert_eq!(beta(0.0), 0.0);
        assert_eq!(beta(1.0), 0.0);
    }

    #[test]
    fn gamma_examples() {
        assert_abs_diff_eq!(gamma_penalty(1.0).unwrap(), 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            gamma_penalty(1.0 / std::f64::consts::E).unwrap(),
            2.0,
            epsilon = 1e-12
        );
        assert!(gamma_penalty(0.0).is_err());
        assert!(gamma_penalty(std::f64::consts::E).is_err());
        assert!(gamma_penalty(1.1).is_ok());
    }

    #[test]
    fn wedge_statistic_examples() {
        let s = scan_from_distances(vec![0.5, 1.0]);
        assert_abs_diff_eq!(statistic_wedge(&s, 2).unwrap().value, -0.5, epsilon = 1e-15);

        let s = scan_from_distances(vec![0.2, 0.5, 1.0]);
        assert_abs_diff_eq!(statistic_wedge(&s, 1).unwrap().value, -0.6, epsilon = 1e-15);

        let s = scan_from_distances(vec![0.25, 0.5, 0.75, 1.0]);
        assert_abs_diff_eq!(statistic_wedge(&s, 1).unwrap().value, 0.0, epsilon = 1e-15);

        let s = scan_from_distances(vec![0.3]);
        assert!(matches!(
            statistic_wedge(&s, 1),
            Err(crate::error::Error::InsufficientData(_))
        ));
    }

    #[test]
    fn subsection_examples() {
        let s = scan_from_distances(vec![0.2, 0.4, 1.0]);
        let idx = SubsectionIndex::new(1, 3, 3).unwrap();
        assert_abs_diff_eq!(
            statistic_subsection(&s, idx, 1).unwrap().value,
            -0.5,
            epsilon = 1e-15
        );

        let s = scan_from_distances(vec![0.3, 0.6]);
        let idx = SubsectionIndex::new(0, 2, 2).unwrap();
        let v = statistic_subsection(&s, idx, 1).unwrap();
        assert_eq!(v.count, 1);
        assert_abs_diff_eq!(v.value, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn subsection_index_validation() {
        assert!(SubsectionIndex::new(0, 1, 5).is_err());
        assert!(SubsectionIndex::new(2, 2, 5).is_err());
        assert!(SubsectionIndex::new(0, 6, 5).is_err());
        assert!(SubsectionIndex::new(0, 2, 5).is_ok());
    }

    #[test]
    fn degenerate_scale_is_an_error() {
        let s = scan_from_distances(vec![0.5, 0.5, 1.0]);
        let idx = SubsectionIndex::new(1, 2, 3);
        assert!(idx.is_err());
        let idx = SubsectionIndex::new(0, 3, 3).unwrap();
        assert!(statistic_subsection(&s, idx, 1).is_ok());
        // tied endpoints
        let s = scan_from_distances(vec![0.5, 0.5, 0.5]);
        let idx = SubsectionIndex::new(1, 3, 3).unwrap();
        assert!(matches!(
            statistic_subsection(&s, idx, 1),
            Err(crate::error::Error::DegenerateScale(_))
        ));
    }

    #[test]
    fn normalize_examples() {
        let stat = StatisticValue { value: 0.0, count: 1 };
        let expect = -(2.0 * (1.0 + 50f64.ln())).sqrt();
        assert_abs_diff_eq!(normalize(&stat, 101, 2).unwrap(), expect, epsilon = 1e-12);

        let stat = StatisticValue { value: -1.5, count: 3 };
        assert_abs_diff_eq!(
            normalize_one_sided(&stat, 50, 4).unwrap(),
            normalize(&stat, 50, 4).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn null_moments_of_normalized_sum() {
        // sum of beta over independent uniforms: mean 0, variance m/3
        let mut rng = crate::rng::replicate_rng(5, 0);
        let m = 25usize;
        let reps = 200_000usize;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..reps {
            let s: f64 = (0..m).map(|_| beta(rand::Rng::gen::<f64>(&mut rng))).sum();
            let z = (3.0 / m as f64).sqrt() * s;
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / reps as f64;
        let var = sumsq / reps as f64 - mean * mean;
        let se = (1.0 / reps as f64).sqrt();
        assert!(mean.abs() <= 3.0 * se, "mean {mean} out of range");
        assert!((var - 1.0).abs() <= 0.02, "variance {var} out of range");
    }

    #[test]
    fn monotone_density_sign_property() {
        // f proportional to the projected distance (increasing along the
        // wedge) makes the mean statistic positive; the reversed density
        // makes it negative.
        let mut rng = crate::rng::replicate_rng(6, 0);
        let d = 2usize;
        let mut mean_inc = 0.0;
        let mut mean_dec = 0.0;
        let reps = 2000usize;
        for _ in 0..reps {
            // axial coordinate of uniform-on-wedge ~ t^(d-1); increasing
            // density f ~ t adds one power, decreasing divides by it
            let m = 30usize;
            let inc: Vec<f64> =
                (0..m).map(|_| rand::Rng::gen::<f64>(&mut rng).powf(1.0 / (d as f64 + 1.0))).collect();
            let dec: Vec<f64> =
                (0..m).map(|_| rand::Rng::gen::<f64>(&mut rng).powf(1.0 / (d as f64 - 0.5))).collect();
            for (values, acc) in [(inc, &mut mean_inc), (dec, &mut mean_dec)] {
                let mut v = values;
                v.sort_by(f64::total_cmp);
                let scan = scan_from_distances(v);
                *acc += statistic_wedge(&scan, d).unwrap().value;
            }
        }
        assert!(mean_inc / reps as f64 > 0.05);
        assert!(mean_dec / (reps as f64) < -0.05);
    }

    proptest! {
        #[test]
        fn beta_antisymmetry(z in 0.0001f64..0.9999) {
            prop_assert!((beta(z) + beta(1.0 - z)).abs() < 1e-12);
        }

        #[test]
        fn statistic_bounded_by_count(mut distances in proptest::collection::vec(0.01f64..1.0, 2..40)) {
            distances.sort_by(f64::total_cmp);
            distances.dedup();
            prop_assume!(distances.len() >= 2);
            let scan = scan_from_distances(distances);
            let stat = statistic_wedge(&scan, 2).unwrap();
            prop_assert!(stat.value.abs() <= stat.count as f64 + 1e-12);
        }

        #[test]
        fn gamma_is_decreasing(a in 0.01f64..1.0, b in 0.01f64..1.0) {
            prop_assume!(a < b);
            prop_assert!(gamma_penalty(a).unwrap() > gamma_penalty(b).unwrap());
        }
    }
}
