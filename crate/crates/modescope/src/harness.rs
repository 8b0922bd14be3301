//! Simulation studies (level/power tables, grid detection frequencies) and
//! the brute-force oracle for the conditional-uniformity property that the
//! whole statistic rests on.

use crate::error::{Error, Result};
use crate::geometry::{scan_wedge, standard_normal, wedge_contains, Grid, Point, Sample, Wedge};
use crate::inference::{
    calibrate_local_mode, calibrate_mode_detection, detect_modes_with_kappa, local_mode_test,
    local_mode_test_with_kappa, ModeDetection, ProcedureConfig, ThresholdMode, WedgeFamily,
};
use crate::nullsim::sample_uniform_box;
use crate::rng::replicate_rng;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// A normal component: mean and covariance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalSpec {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl NormalSpec {
    pub fn diagonal(mean: Vec<f64>, variances: Vec<f64>) -> Self {
        let d = mean.len();
        let cov = (0..d)
            .map(|i| (0..d).map(|j| if i == j { variances[i] } else { 0.0 }).collect())
            .collect();
        NormalSpec { mean, cov }
    }

    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Self {
        let d = mean.len();
        Self::diagonal(mean, vec![variance; d])
    }
}

/// Sampling distribution of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensitySpec {
    UniformBox { lower: Point, upper: Point },
    Normal(NormalSpec),
    Mixture { weights: Vec<f64>, components: Vec<NormalSpec> },
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
fn cholesky(cov: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let d = cov.len();
    for row in cov {
        if row.len() != d {
            return Err(Error::InvalidInput("covariance matrix is not square".into()));
        }
    }
    for i in 0..d {
        for j in 0..i {
            if (cov[i][j] - cov[j][i]).abs() > 1e-9 * (1.0 + cov[i][j].abs()) {
                return Err(Error::InvalidInput("covariance matrix is not symmetric".into()));
            }
        }
    }
    let mut l = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let v = cov[i][i] - s;
                if v <= 0.0 {
                    return Err(Error::InvalidInput(
                        "covariance matrix is not positive definite".into(),
                    ));
                }
                l[i][j] = v.sqrt();
            } else {
                l[i][j] = (cov[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

fn sample_normal<R: Rng>(rng: &mut R, spec: &NormalSpec, chol: &[Vec<f64>]) -> Point {
    let d = spec.mean.len();
    let z: Vec<f64> = (0..d).map(|_| standard_normal(rng)).collect();
    let coords = (0..d)
        .map(|i| spec.mean[i] + (0..=i).map(|k| chol[i][k] * z[k]).sum::<f64>())
        .collect();
    Point { coords }
}

impl DensitySpec {
    pub fn dim(&self) -> usize {
        match self {
            DensitySpec::UniformBox { lower, .. } => lower.dim(),
            DensitySpec::Normal(n) => n.mean.len(),
            DensitySpec::Mixture { components, .. } => components[0].mean.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DensitySpec::UniformBox { lower, upper } => {
                if lower.dim() != upper.dim()
                    || lower.coords.iter().zip(&upper.coords).any(|(l, u)| l >= u)
                {
                    return Err(Error::InvalidInput("degenerate uniform box".into()));
                }
            }
            DensitySpec::Normal(n) => {
                cholesky(&n.cov)?;
            }
            DensitySpec::Mixture { weights, components } => {
                if weights.len() != components.len() || components.is_empty() {
                    return Err(Error::InvalidInput(
                        "mixture weights and components must align and be nonempty".into(),
                    ));
                }
                if weights.iter().any(|&w| w <= 0.0) {
                    return Err(Error::InvalidInput("mixture weights must be positive".into()));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidInput("mixture weights must sum to 1".into()));
                }
                let d = components[0].mean.len();
                for c in components {
                    if c.mean.len() != d {
                        return Err(Error::InvalidInput("mixture components of mixed dimension".into()));
                    }
                    cholesky(&c.cov)?;
                }
            }
        }
        Ok(())
    }

    /// Draws `n` points; categorical-then-Gaussian composition for mixtures.
    pub fn sample<R: Rng>(&self, rng: &mut R, n: usize) -> Result<Sample> {
        let points = match self {
            DensitySpec::UniformBox { lower, upper } => {
                return Ok(sample_uniform_box(rng, n, lower, upper));
            }
            DensitySpec::Normal(spec) => {
                let chol = cholesky(&spec.cov)?;
                (0..n).map(|_| sample_normal(rng, spec, &chol)).collect()
            }
            DensitySpec::Mixture { weights, components } => {
                let chols: Vec<Vec<Vec<f64>>> =
                    components.iter().map(|c| cholesky(&c.cov)).collect::<Result<_>>()?;
                let mut cdf = Vec::with_capacity(weights.len());
                let mut acc = 0.0;
                for w in weights {
                    acc += w;
                    cdf.push(acc);
                }
                (0..n)
                    .map(|_| {
                        let u: f64 = rng.gen();
                        let idx = cdf.iter().position(|&c| u <= c).unwrap_or(cdf.len() - 1);
                        sample_normal(rng, &components[idx], &chols[idx])
                    })
                    .collect()
            }
        };
        Sample::new(points)
    }
}

/// Equal-weight mixture of three well-separated normals with peaks near
/// (0, 2), (-2, 0), and (2, 0); the standard multi-mode benchmark of the
/// test suite.
pub fn three_peak_mixture() -> DensitySpec {
    DensitySpec::Mixture {
        weights: vec![1.0 / 3.0; 3],
        components: vec![
            NormalSpec::isotropic(vec![-0.05, 2.1], 0.5),
            NormalSpec::isotropic(vec![-1.9, -0.07], 0.2),
            NormalSpec::isotropic(vec![2.0, -0.1], 0.25),
        ],
    }
}

/// One simulation scenario: a sampling density, sample size, replication
/// count, and master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub density: DensitySpec,
    pub n: usize,
    pub runs: usize,
    pub seed: u64,
}

/// An estimated rejection/detection frequency with its binomial standard
/// error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionSummary {
    pub runs: usize,
    pub rejections: usize,
    pub frequency: f64,
    pub std_error: f64,
}

impl RejectionSummary {
    fn from_counts(rejections: usize, runs: usize) -> Self {
        let f = if runs == 0 { 0.0 } else { rejections as f64 / runs as f64 };
        let se = if runs == 0 { 0.0 } else { (f * (1.0 - f) / runs as f64).sqrt() };
        RejectionSummary { runs, rejections, frequency: f, std_error: se }
    }
}

/// Per-study seed for the threshold machinery, decoupled from the data
/// streams which use (seed, replicate) directly.
fn threshold_seed(seed: u64, rep: u64) -> u64 {
    seed ^ (rep.wrapping_add(1)).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Frequency of mode detection at `x0` across replications of the scenario.
/// Calibrated thresholds are computed once per study (the reference box
/// must be set in the config); raw thresholds are re-simulated per
/// replicate, conditional on that replicate's counts.
pub fn run_level_power(
    scenario: &Scenario,
    x0: &Point,
    family: &WedgeFamily,
    config: &ProcedureConfig,
) -> Result<RejectionSummary> {
    scenario.density.validate()?;
    let shared_kappa = match config.mode {
        ThresholdMode::Calibrated => Some(calibrate_local_mode(family, x0, scenario.n, config)?),
        ThresholdMode::Raw => None,
    };
    let detections: usize = (0..scenario.runs as u64)
        .into_par_iter()
        .map(|rep| -> Result<usize> {
            let mut rng = replicate_rng(scenario.seed, rep);
            let sample = scenario.density.sample(&mut rng, scenario.n)?;
            let result = match &shared_kappa {
                Some(kappa) => local_mode_test_with_kappa(&sample, x0, family, kappa)?,
                None => {
                    let cfg = ProcedureConfig {
                        seed: threshold_seed(config.seed, rep),
                        ..config.clone()
                    };
                    local_mode_test(&sample, x0, family, &cfg)?
                }
            };
            Ok(result.mode_detected as usize)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(RejectionSummary::from_counts(detections, scenario.runs))
}

/// Detection frequency at one grid vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexFrequency {
    pub location: Point,
    pub summary: RejectionSummary,
}

/// Grid-detection study output: per-vertex detection frequencies plus the
/// any-mode rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionStudy {
    pub runs: usize,
    pub per_vertex: Vec<VertexFrequency>,
    pub any_mode: RejectionSummary,
}

/// Frequency, per grid vertex, at which grid-wide detection flags a mode
/// there across replications of the scenario.
pub fn run_mode_detection_study(
    scenario: &Scenario,
    grid: &Grid,
    family: &WedgeFamily,
    config: &ProcedureConfig,
) -> Result<DetectionStudy> {
    scenario.density.validate()?;
    if scenario.runs == 0 {
        return Ok(DetectionStudy {
            runs: 0,
            per_vertex: Vec::new(),
            any_mode: RejectionSummary::from_counts(0, 0),
        });
    }
    let shared_kappa = match config.mode {
        ThresholdMode::Calibrated => {
            Some(calibrate_mode_detection(family, grid, scenario.n, config)?)
        }
        ThresholdMode::Raw => None,
    };
    let per_rep: Vec<ModeDetection> = (0..scenario.runs as u64)
        .into_par_iter()
        .map(|rep| -> Result<ModeDetection> {
            let mut rng = replicate_rng(scenario.seed, rep);
            let sample = scenario.density.sample(&mut rng, scenario.n)?;
            match &shared_kappa {
                Some(kappa) => detect_modes_with_kappa(&sample, grid, family, kappa, config.alpha),
                None => {
                    let cfg = ProcedureConfig {
                        seed: threshold_seed(config.seed, rep),
                        ..config.clone()
                    };
                    crate::inference::detect_modes(&sample, grid, family, &cfg)
                }
            }
        })
        .collect::<Result<_>>()?;
    let vertices = grid.vertices();
    let mut counts = vec![0usize; vertices.len()];
    let mut any = 0usize;
    for det in &per_rep {
        let mut hit = false;
        for v in &det.vertices {
            if v.mode_detected {
                counts[v.vertex] += 1;
                hit = true;
            }
        }
        if hit {
            any += 1;
        }
    }
    let per_vertex = vertices
        .into_iter()
        .zip(counts)
        .map(|(location, c)| VertexFrequency {
            location,
            summary: RejectionSummary::from_counts(c, scenario.runs),
        })
        .collect();
    Ok(DetectionStudy {
        runs: scenario.runs,
        per_vertex,
        any_mode: RejectionSummary::from_counts(any, scenario.runs),
    })
}

/// Conservative axis-aligned bounding box of a wedge.
fn wedge_bounding_box(wedge: &Wedge) -> (Point, Point) {
    let d = wedge.dim();
    let spread = wedge.angle.tan() * wedge.length;
    let mut lower = vec![0.0; d];
    let mut upper = vec![0.0; d];
    for m in 0..d {
        let axis = wedge.length * wedge.direction[m];
        let cross: f64 = wedge.complement_basis.iter().map(|b| b[m].abs()).sum::<f64>() * spread;
        lower[m] = wedge.vertex.coords[m] + axis.min(0.0) - cross;
        upper[m] = wedge.vertex.coords[m] + axis.max(0.0) + cross;
    }
    (Point { coords: lower }, Point { coords: upper })
}

/// Uniform rejection sampler on a wedge. The acceptance ratio is the wedge
/// volume over its bounding-box volume — at least 1/(2^(d-1) d) for the
/// half-opening angles used here, so the expected number of proposals per
/// accepted point is modest.
pub fn sample_uniform_wedge<R: Rng>(rng: &mut R, wedge: &Wedge, n: usize) -> Result<Vec<Point>> {
    let (lower, upper) = wedge_bounding_box(wedge);
    let d = wedge.dim();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let coords: Vec<f64> = (0..d)
            .map(|m| lower.coords[m] + (upper.coords[m] - lower.coords[m]) * rng.gen::<f64>())
            .collect();
        let p = Point { coords };
        if wedge_contains(wedge, &p)? {
            out.push(p);
        }
    }
    Ok(out)
}

/// Sampler for the density proportional to the projected distance on the
/// wedge (a linearly increasing density along the axis), via thinning of
/// the uniform sampler.
pub fn sample_linear_wedge<R: Rng>(rng: &mut R, wedge: &Wedge, n: usize) -> Result<Vec<Point>> {
    let e = &wedge.direction;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = sample_uniform_wedge(rng, wedge, 1)?.pop().expect("one point requested");
        let t = crate::geometry::signed_projected_distance(&p, &wedge.vertex, e)?;
        if rng.gen::<f64>() * wedge.length < t {
            out.push(p);
        }
    }
    Ok(out)
}

/// Goodness-of-fit summary of the conditional-uniformity oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub reps: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
    pub mean_distance: f64,
}

fn ks_distance_to_uniform(mut z: Vec<f64>) -> f64 {
    z.sort_by(f64::total_cmp);
    let m = z.len() as f64;
    z.iter()
        .enumerate()
        .map(|(i, &v)| {
            let hi = (i as f64 + 1.0) / m - v;
            let lo = v - i as f64 / m;
            hi.max(lo)
        })
        .fold(0.0, f64::max)
}

fn oracle_run(
    wedge: &Wedge,
    n_points: usize,
    reps: usize,
    seed: u64,
    linear: bool,
) -> Result<OracleSummary> {
    if n_points < 3 {
        return Err(Error::Parameter("oracle needs at least 3 points per run".into()));
    }
    let d = wedge.dim();
    let results: Vec<f64> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| -> Result<f64> {
            let mut rng = replicate_rng(seed, rep);
            let points = if linear {
                sample_linear_wedge(&mut rng, wedge, n_points)?
            } else {
                sample_uniform_wedge(&mut rng, wedge, n_points)?
            };
            let sample = Sample::new(points)?;
            let scan = scan_wedge(&sample, wedge)?;
            // every sampled point lies in the wedge
            debug_assert_eq!(scan.count(), n_points);
            let top = scan.distances[scan.count() - 1].powi(d as i32);
            let z: Vec<f64> = scan.distances[..scan.count() - 1]
                .iter()
                .map(|&t| t.powi(d as i32) / top)
                .collect();
            Ok(ks_distance_to_uniform(z))
        })
        .collect::<Result<_>>()?;
    // asymptotic 5% critical value of the KS distance
    let critical = 1.3581 / ((n_points as f64 - 1.0).sqrt());
    let rejections = results.iter().filter(|&&dist| dist > critical).count();
    Ok(OracleSummary {
        reps,
        rejections,
        rejection_rate: rejections as f64 / reps as f64,
        mean_distance: results.iter().sum::<f64>() / reps as f64,
    })
}

/// Brute-force check that, for uniform data on a wedge, the normalized
/// d-th-power distance ratios are distributed as uniform order statistics:
/// per rep, a Kolmogorov-Smirnov test at nominal 5%.
pub fn uniformity_oracle(wedge: &Wedge, n_points: usize, reps: usize, seed: u64) -> Result<OracleSummary> {
    oracle_run(wedge, n_points, reps, seed, false)
}

/// Power check of the oracle itself: under the linearly increasing density
/// the KS test must reject far above its nominal rate.
pub fn uniformity_oracle_linear(
    wedge: &Wedge,
    n_points: usize,
    reps: usize,
    seed: u64,
) -> Result<OracleSummary> {
    oracle_run(wedge, n_points, reps, seed, true)
}
