//! Simulation of the null distributions of the maximum statistics and the
//! calibrated thresholds.
//!
//! Replicates draw from streams derived from `(seed, replicate index)` via
//! [`crate::rng::replicate_rng`], so a simulation returns bit-identical
//! quantiles regardless of how many workers execute it.

use crate::error::{Error, Result};
use crate::geometry::{Point, Sample};
use crate::rng::replicate_rng;
use crate::statistics::gamma_penalty;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Which maximum statistic the null simulation targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullFlavor {
    /// Max over wedges of the two-sided normalized statistic.
    TwoSidedWedge,
    /// Max over wedges of the one-sided (mode-test) normalized statistic.
    OneSidedWedge,
    /// Max over wedges and all admissible subsections, two-sided.
    MultiscaleSubsections,
}

/// Configuration of a null simulation, conditional on the observed counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullConfig {
    pub counts: Vec<usize>,
    pub n: usize,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
    pub flavor: NullFlavor,
    /// Cap on the number of span levels in the subsection ladder; pairs are
    /// restricted to a geometric ladder whenever this is set or a wedge
    /// holds more than 200 observations.
    pub max_scales: Option<usize>,
}

impl NullConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Parameter("alpha must lie in (0, 1)".into()));
        }
        if self.reps < 100 {
            return Err(Error::Parameter("null simulation needs at least 100 replicates".into()));
        }
        if self.n < 3 {
            return Err(Error::Parameter("null simulation requires n >= 3".into()));
        }
        if !self.counts.iter().any(|&c| c >= 2) {
            return Err(Error::InsufficientData(
                "every wedge holds fewer than 2 observations".into(),
            ));
        }
        Ok(())
    }
}

/// Provenance of a simulated critical constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantileSource {
    Simulated(NullConfig),
    Calibrated(CalibrationRecord),
}

/// A simulated critical constant with its simulation metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullQuantile {
    pub kappa: f64,
    pub source: QuantileSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicate_values: Option<Vec<f64>>,
}

/// Empirical `(1 - alpha)`-quantile: the `ceil((1 - alpha) reps)`-th order
/// statistic of the replicate values.
pub fn empirical_quantile(values: &[f64], alpha: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let reps = sorted.len();
    let idx = (((1.0 - alpha) * reps as f64).ceil() as usize).clamp(1, reps);
    sorted[idx - 1]
}

/// Span set for the multiscale subsection statistic on a wedge with `count`
/// observations: the full pair set for small wedges, otherwise a geometric
/// ladder of spans `{count, count/2, count/4, ...}` with all offsets.
pub fn subsection_spans(count: usize, max_scales: Option<usize>) -> Vec<usize> {
    if count < 2 {
        return Vec::new();
    }
    let use_ladder = max_scales.is_some() || count > 200;
    if !use_ladder {
        return (2..=count).collect();
    }
    let mut spans = Vec::new();
    let mut s = count;
    while s >= 2 {
        spans.push(s);
        s /= 2;
    }
    if let Some(cap) = max_scales {
        spans.truncate(cap.max(1));
    }
    spans
}

/// Per-replicate maximum of the configured flavor over one set of uniform
/// draws. `Sum beta(U_(j))` is accumulated as `2 sum U_j - m` on both the
/// wedge and subsection paths so that shared draws give identical values.
fn replicate_max<R: Rng>(config: &NullConfig, rng: &mut R) -> f64 {
    let n = config.n as f64;
    let mut best = f64::NEG_INFINITY;
    for &count in &config.counts {
        if count < 2 {
            continue;
        }
        let m = count - 1;
        let mut uniforms: Vec<f64> = (0..m).map(|_| rng.gen::<f64>()).collect();
        let gamma_whole = gamma_penalty(count as f64 / (n - 1.0)).expect("count within range");
        match config.flavor {
            NullFlavor::TwoSidedWedge | NullFlavor::OneSidedWedge => {
                let sum_u: f64 = uniforms.iter().sum();
                let t = 2.0 * sum_u - m as f64;
                let oriented = if config.flavor == NullFlavor::TwoSidedWedge { t.abs() } else { -t };
                let stat = (3.0 / m as f64).sqrt() * oriented - gamma_whole;
                if stat > best {
                    best = stat;
                }
            }
            NullFlavor::MultiscaleSubsections => {
                uniforms.sort_by(f64::total_cmp);
                // knots[0] = 0 (vertex convention), knots[count] = 1
                let mut knots = Vec::with_capacity(count + 1);
                knots.push(0.0);
                knots.extend_from_slice(&uniforms);
                knots.push(1.0);
                // prefix[i] = sum of knots[1..=i]
                let mut prefix = vec![0.0; count + 1];
                for i in 1..=count {
                    prefix[i] = prefix[i - 1] + knots[i];
                }
                for span in subsection_spans(count, config.max_scales) {
                    let ms = span - 1;
                    let scale = (3.0 / ms as f64).sqrt();
                    let gamma = gamma_penalty(span as f64 / (n - 1.0)).expect("span within range");
                    for j in 0..=count - span {
                        let k = j + span;
                        let width = knots[k] - knots[j];
                        if width <= 0.0 {
                            continue; // tied draws, probability zero
                        }
                        let interior = prefix[k - 1] - prefix[j];
                        let t = 2.0 * (interior - ms as f64 * knots[j]) / width - ms as f64;
                        let stat = scale * t.abs() - gamma;
                        if stat > best {
                            best = stat;
                        }
                    }
                }
            }
        }
    }
    best
}

/// Simulates the `(1 - alpha)`-quantile of the configured maximum statistic
/// conditional on the counts.
pub fn simulate_null(config: &NullConfig) -> Result<NullQuantile> {
    simulate_null_with_values(config, false)
}

/// As [`simulate_null`], optionally retaining the replicate maxima.
pub fn simulate_null_with_values(config: &NullConfig, keep_values: bool) -> Result<NullQuantile> {
    config.validate()?;
    let values: Vec<f64> = (0..config.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(config.seed, rep);
            replicate_max(config, &mut rng)
        })
        .collect();
    let kappa = empirical_quantile(&values, config.alpha);
    Ok(NullQuantile {
        kappa,
        source: QuantileSource::Simulated(config.clone()),
        replicate_values: keep_values.then_some(values),
    })
}

/// Metadata of an empirical calibration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub procedure: String,
    pub alpha: f64,
    pub reps: usize,
    pub reference_lower: Point,
    pub reference_upper: Point,
    pub n: usize,
    pub seed: u64,
}

/// Configuration for [`calibrate`].
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    pub alpha: f64,
    pub reps: usize,
    pub reference_lower: Point,
    pub reference_upper: Point,
    pub n: usize,
    pub seed: u64,
    pub procedure: String,
}

/// Draws `n` points uniformly on an axis-aligned box.
pub fn sample_uniform_box<R: Rng>(rng: &mut R, n: usize, lower: &Point, upper: &Point) -> Sample {
    let d = lower.dim();
    let points = (0..n)
        .map(|_| {
            let coords = (0..d)
                .map(|j| {
                    let (l, u) = (lower.coords[j], upper.coords[j]);
                    l + (u - l) * rng.gen::<f64>()
                })
                .collect();
            Point { coords }
        })
        .collect();
    Sample::new(points).expect("n >= 1 and fixed dimension")
}

/// Empirically calibrated threshold for a threshold-monotone decision rule.
///
/// `critical_kappa` must return, for a sample, the largest threshold at
/// which the procedure still makes a discovery (`None` when no threshold
/// makes one). Per replicate the rule is evaluated on uniform data from the
/// reference box; the returned constant is the empirical `(1 - alpha)`-
/// quantile of those critical thresholds, so the discovery frequency under
/// uniform data equals `alpha` up to Monte-Carlo error.
pub fn calibrate<F>(critical_kappa: F, config: &CalibrationConfig) -> Result<NullQuantile>
where
    F: Fn(&Sample) -> Option<f64> + Sync,
{
    if !(config.alpha > 0.0 && config.alpha <= 1.0) {
        return Err(Error::Parameter("alpha must lie in (0, 1]".into()));
    }
    if config.reps == 0 {
        return Err(Error::Parameter("calibration needs at least one replicate".into()));
    }
    if config.reference_lower.dim() != config.reference_upper.dim()
        || config
            .reference_lower
            .coords
            .iter()
            .zip(&config.reference_upper.coords)
            .any(|(l, u)| l >= u)
    {
        return Err(Error::InvalidInput("degenerate reference box".into()));
    }
    let values: Vec<f64> = (0..config.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut rng = replicate_rng(config.seed, rep);
            let sample =
                sample_uniform_box(&mut rng, config.n, &config.reference_lower, &config.reference_upper);
            critical_kappa(&sample).unwrap_or(f64::NEG_INFINITY)
        })
        .collect();
    let kappa = empirical_quantile(&values, config.alpha);
    Ok(NullQuantile {
        kappa,
        source: QuantileSource::Calibrated(CalibrationRecord {
            procedure: config.procedure.clone(),
            alpha: config.alpha,
            reps: config.reps,
            reference_lower: config.reference_lower.clone(),
            reference_upper: config.reference_upper.clone(),
            n: config.n,
            seed: config.seed,
        }),
        replicate_values: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn config(counts: Vec<usize>, n: usize, flavor: NullFlavor) -> NullConfig {
        NullConfig { counts, n, alpha: 0.05, reps: 1000, seed: 7, flavor, max_scales: None }
    }

    #[test]
    fn quantile_convention() {
        let values: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(empirical_quantile(&values, 0.05), 95.0);
        assert_eq!(empirical_quantile(&values, 1.0), 1.0);
        assert_eq!(empirical_quantile(&values, 1e-12), 100.0);
    }

    #[test]
    fn single_wedge_closed_form() {
        // one wedge with 2 observations: the statistic is
        // sqrt(3)|beta(U)| - Gamma(1) with exact (1-a)-quantile
        // sqrt(3)(1-a) - sqrt(2)
        let mut cfg = config(vec![2], 3, NullFlavor::TwoSidedWedge);
        cfg.reps = 100_000;
        let q = simulate_null(&cfg).unwrap();
        let expect = 3f64.sqrt() * 0.95 - 2f64.sqrt();
        assert!((q.kappa - expect).abs() < 0.02, "got {} want {}", q.kappa, expect);
    }

    #[test]
    fn determinism_across_worker_counts() {
        let cfg = config(vec![8, 17, 31], 100, NullFlavor::OneSidedWedge);
        let mut kappas = Vec::new();
        for workers in [1usize, 2, 8] {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
            kappas.push(pool.install(|| simulate_null(&cfg).unwrap().kappa));
        }
        assert_eq!(kappas[0].to_bits(), kappas[1].to_bits());
        assert_eq!(kappas[0].to_bits(), kappas[2].to_bits());
    }

    #[test]
    fn quantile_monotone_in_alpha() {
        let cfg = config(vec![10, 10], 50, NullFlavor::TwoSidedWedge);
        let values = simulate_null_with_values(&cfg, true).unwrap().replicate_values.unwrap();
        assert!(empirical_quantile(&values, 0.01) >= empirical_quantile(&values, 0.10));
    }

    #[test]
    fn counts_permutation_invariance_in_distribution() {
        // permuting the counts changes the draw order but not the
        // distribution of maxima; compare quantiles loosely
        let a = simulate_null(&NullConfig { reps: 4000, ..config(vec![5, 20, 11], 100, NullFlavor::TwoSidedWedge) })
            .unwrap();
        let b = simulate_null(&NullConfig { reps: 4000, seed: 8, ..config(vec![20, 11, 5], 100, NullFlavor::TwoSidedWedge) })
            .unwrap();
        assert!((a.kappa - b.kappa).abs() < 0.15);
    }

    #[test]
    fn multiscale_single_pair_matches_two_sided() {
        // with exactly one admissible pair (count 2 gives only (0,2)) the
        // multiscale maximum equals the two-sided wedge maximum on shared
        // draws, bit for bit
        let two = config(vec![2, 2], 12, NullFlavor::TwoSidedWedge);
        let multi = NullConfig { flavor: NullFlavor::MultiscaleSubsections, ..two.clone() };
        for rep in 0..50 {
            let mut ra = replicate_rng(7, rep);
            let mut rb = replicate_rng(7, rep);
            let a = super::replicate_max(&two, &mut ra);
            let b = super::replicate_max(&multi, &mut rb);
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn multiscale_dominates_two_sided() {
        let two = config(vec![9, 14], 60, NullFlavor::TwoSidedWedge);
        let multi = NullConfig { flavor: NullFlavor::MultiscaleSubsections, ..two.clone() };
        for rep in 0..200 {
            let a = super::replicate_max(&two, &mut replicate_rng(3, rep));
            let b = super::replicate_max(&multi, &mut replicate_rng(3, rep));
            assert!(b >= a - 1e-12);
        }
    }

    #[test]
    fn span_ladder() {
        assert_eq!(subsection_spans(6, None), vec![2, 3, 4, 5, 6]);
        assert_eq!(subsection_spans(20, Some(3)), vec![20, 10, 5]);
        let big = subsection_spans(300, None);
        assert_eq!(big, vec![300, 150, 75, 37, 18, 9, 4, 2]);
        assert!(subsection_spans(1, None).is_empty());
    }

    #[test]
    fn rejects_all_small_counts() {
        let cfg = config(vec![1, 0, 1], 10, NullFlavor::TwoSidedWedge);
        assert!(matches!(simulate_null(&cfg), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn calibrate_alpha_one_returns_minimum() {
        let cfg = CalibrationConfig {
            alpha: 1.0,
            reps: 50,
            reference_lower: Point::from(vec![0.0, 0.0]),
            reference_upper: Point::from(vec![1.0, 1.0]),
            n: 10,
            seed: 3,
            procedure: "test".into(),
        };
        let q = calibrate(|s| Some(s.points()[0].coords[0]), &cfg).unwrap();
        let mins: Vec<f64> = (0..50u64)
            .map(|rep| {
                let mut rng = replicate_rng(3, rep);
                sample_uniform_box(&mut rng, 10, &cfg.reference_lower, &cfg.reference_upper)
                    .points()[0]
                    .coords[0]
            })
            .collect();
        let expect = mins.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(q.kappa, expect, epsilon = 0.0);
    }

    #[test]
    fn calibrate_rejects_degenerate_box() {
        let cfg = CalibrationConfig {
            alpha: 0.05,
            reps: 10,
            reference_lower: Point::from(vec![1.0, 0.0]),
            reference_upper: Point::from(vec![1.0, 1.0]),
            n: 10,
            seed: 3,
            procedure: "test".into(),
        };
        assert!(calibrate(|_| None, &cfg).is_err());
    }
}
