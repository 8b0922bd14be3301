//! The three headline procedures — local mode test, global monotonicity
//! map, and grid-based mode detection — plus the closed-form constants that
//! guide the choice of the scale parameters.

use crate::error::{Error, Result};
use crate::geometry::{default_scales, direction_set, Grid, Point, Sample, ScaleParams, Wedge, WedgeScan};
use crate::geometry::scan_wedge;
use crate::nullsim::{
    calibrate, simulate_null, subsection_spans, CalibrationConfig, NullConfig, NullFlavor,
    NullQuantile, QuantileSource,
};
use crate::statistics::{
    gamma_penalty, normalize_one_sided, statistic_subsection, statistic_wedge, SubsectionIndex,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// How the critical constant kappa is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Simulated conditional on the observed wedge counts (conservative).
    Raw,
    /// Empirically calibrated so the discovery rate under uniform reference
    /// data equals alpha.
    Calibrated,
}

/// Shared knobs of the three procedures.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcedureConfig {
    pub alpha: f64,
    pub mode: ThresholdMode,
    pub reps: usize,
    pub seed: u64,
    /// Reference box for calibration; defaults to the sample's bounding box.
    pub reference_box: Option<(Point, Point)>,
    /// Span-ladder cap for subsection scans, see
    /// [`crate::nullsim::subsection_spans`].
    pub max_scales: Option<usize>,
}

impl ProcedureConfig {
    pub fn new(alpha: f64, mode: ThresholdMode, seed: u64) -> Self {
        ProcedureConfig { alpha, mode, reps: 1000, seed, reference_box: None, max_scales: None }
    }
}

/// A fixed wedge shape (length, opening angle, direction set) that can be
/// anchored at any vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeFamily {
    pub length: f64,
    pub angle: f64,
    pub directions: Vec<Vec<f64>>,
}

impl WedgeFamily {
    /// Derives length, angle, and directions from the scale parameters.
    pub fn from_scales(p: &ScaleParams) -> Result<Self> {
        let (length, angle) = default_scales(p)?;
        let directions = direction_set(p.d, angle, p.epsilon)?;
        Ok(WedgeFamily { length, angle, directions })
    }

    /// Explicit geometry; directions must be unit vectors of one dimension.
    pub fn explicit(length: f64, angle: f64, directions: Vec<Vec<f64>>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::InvalidInput("direction set is empty".into()));
        }
        let d = directions[0].len();
        for e in &directions {
            if e.len() != d {
                return Err(Error::InvalidInput("directions of mixed dimension".into()));
            }
        }
        // Wedge::new re-validates angle, length, and unit norm
        let probe = Point::from(vec![0.0; d]);
        for e in &directions {
            Wedge::new(probe.clone(), e.clone(), angle, length)?;
        }
        Ok(WedgeFamily { length, angle, directions })
    }

    pub fn dim(&self) -> usize {
        self.directions[0].len()
    }

    pub fn wedges_at(&self, x0: &Point) -> Result<Vec<Wedge>> {
        self.directions
            .iter()
            .map(|e| Wedge::new(x0.clone(), e.clone(), self.angle, self.length))
            .collect()
    }
}

/// Outcome of one thresholded statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    IncreaseRejected,
    DecreaseRejected,
    None,
    InsufficientData,
}

/// Decision on one wedge (or one subsection of it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WedgeDecision {
    /// Index into the family's direction set.
    pub wedge: usize,
    pub count: usize,
    pub t: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub scale: SubsectionIndex,
}

impl WedgeDecision {
    fn insufficient(wedge: usize, count: usize) -> Self {
        WedgeDecision {
            wedge,
            count,
            t: 0.0,
            threshold: 0.0,
            verdict: Verdict::InsufficientData,
            scale: SubsectionIndex { j: 0, k: count },
        }
    }
}

/// Result of the local mode test at a candidate point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTestResult {
    pub x0: Point,
    pub mode_detected: bool,
    pub per_wedge: Vec<WedgeDecision>,
    pub kappa: NullQuantile,
}

/// One entry of the monotonicity map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDecision {
    pub vertex: usize,
    pub direction: usize,
    #[serde(flatten)]
    pub decision: WedgeDecision,
}

/// Simultaneous monotonicity decisions over a grid of wedges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityMap {
    pub grid: Grid,
    pub family: WedgeFamily,
    pub alpha: f64,
    pub use_subsections: bool,
    pub kappa: NullQuantile,
    pub decisions: Vec<MapDecision>,
}

/// Mode test outcome at one grid vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexModeResult {
    pub vertex: usize,
    pub location: Point,
    pub mode_detected: bool,
    pub per_wedge: Vec<WedgeDecision>,
}

/// Grid-wide mode detection: flagged vertices localize modes to one mesh
/// cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeDetection {
    pub grid: Grid,
    pub alpha: f64,
    /// Localization precision of the reported modes (the grid mesh).
    pub precision: f64,
    pub kappa: NullQuantile,
    pub vertices: Vec<VertexModeResult>,
    pub modes: Vec<Point>,
}

/// Closed-form constants of the scale-condition bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub d: usize,
    pub j: usize,
    pub d_value: f64,
    /// Lower bound on `C1^{d+4} C2^{d-1}`.
    pub c_bound: f64,
}

/// Threshold `sqrt((span - 1)/3) (kappa + Gamma(span/(n - 1)))`.
pub fn critical_value(span: usize, n: usize, kappa: f64) -> Result<f64> {
    if span < 2 {
        return Err(Error::Parameter(format!("critical value needs span >= 2, got {span}")));
    }
    let gamma = gamma_penalty(span as f64 / (n as f64 - 1.0))?;
    Ok(((span as f64 - 1.0) / 3.0).sqrt() * (kappa + gamma))
}

fn two_sided_verdict(t: f64, threshold: f64) -> Verdict {
    if t < -threshold {
        Verdict::IncreaseRejected
    } else if t > threshold {
        Verdict::DecreaseRejected
    } else {
        Verdict::None
    }
}

fn one_sided_verdict(t: f64, threshold: f64) -> Verdict {
    if t < -threshold {
        Verdict::IncreaseRejected
    } else {
        Verdict::None
    }
}

fn scan_family(sample: &Sample, family: &WedgeFamily, x0: &Point) -> Result<Vec<WedgeScan>> {
    family
        .wedges_at(x0)?
        .into_iter()
        .map(|w| scan_wedge(sample, &w))
        .collect()
}

/// Largest kappa at which the all-wedges-reject-increasing rule still
/// declares a mode: the minimum over wedges of the one-sided normalized
/// statistic. `None` when some wedge cannot reject (fewer than 2 points).
pub fn mode_critical_kappa(sample: &Sample, family: &WedgeFamily, x0: &Point) -> Result<Option<f64>> {
    let n = sample.len();
    let mut min_stat = f64::INFINITY;
    for scan in scan_family(sample, family, x0)? {
        let count = scan.count();
        if count < 2 {
            return Ok(None);
        }
        let stat = statistic_wedge(&scan, sample.dim())?;
        let normalized = normalize_one_sided(&stat, n, count)?;
        if normalized < min_stat {
            min_stat = normalized;
        }
    }
    Ok(Some(min_stat))
}

fn reference_box(sample: &Sample, config: &ProcedureConfig) -> (Point, Point) {
    config.reference_box.clone().unwrap_or_else(|| sample.bounding_box())
}

fn placeholder_quantile(config: NullConfig) -> NullQuantile {
    // no wedge has 2 observations, so no test can reject at any threshold;
    // the recorded kappa is immaterial
    NullQuantile { kappa: 0.0, source: QuantileSource::Simulated(config), replicate_values: None }
}

fn simulated_kappa(
    counts: Vec<usize>,
    n: usize,
    flavor: NullFlavor,
    config: &ProcedureConfig,
) -> Result<NullQuantile> {
    let null_config = NullConfig {
        counts,
        n,
        alpha: config.alpha,
        reps: config.reps,
        seed: config.seed,
        flavor,
        max_scales: config.max_scales,
    };
    if null_config.counts.iter().any(|&c| c >= 2) {
        simulate_null(&null_config)
    } else {
        Ok(placeholder_quantile(null_config))
    }
}

/// Calibrates the local mode test at `x0` on uniform reference data; the
/// reference box must be set in the config (there is no sample to default
/// from).
pub fn calibrate_local_mode(
    family: &WedgeFamily,
    x0: &Point,
    n: usize,
    config: &ProcedureConfig,
) -> Result<NullQuantile> {
    let (lower, upper) = config
        .reference_box
        .clone()
        .ok_or_else(|| Error::Parameter("calibration requires a reference box".into()))?;
    let family = family.clone();
    let x0 = x0.clone();
    calibrate(
        move |s: &Sample| mode_critical_kappa(s, &family, &x0).ok().flatten(),
        &CalibrationConfig {
            alpha: config.alpha,
            reps: config.reps,
            reference_lower: lower,
            reference_upper: upper,
            n,
            seed: config.seed,
            procedure: "local-mode-test".into(),
        },
    )
}

/// Calibrates grid-wide mode detection on uniform reference data; the grid
/// procedure discovers a mode iff some vertex passes, so its critical kappa
/// is the max over vertices of the per-vertex critical kappa.
pub fn calibrate_mode_detection(
    family: &WedgeFamily,
    grid: &Grid,
    n: usize,
    config: &ProcedureConfig,
) -> Result<NullQuantile> {
    let (lower, upper) = config
        .reference_box
        .clone()
        .ok_or_else(|| Error::Parameter("calibration requires a reference box".into()))?;
    let family = family.clone();
    let vertices = grid.vertices();
    calibrate(
        move |s: &Sample| {
            vertices
                .iter()
                .filter_map(|v| mode_critical_kappa(s, &family, v).ok().flatten())
                .max_by(f64::total_cmp)
        },
        &CalibrationConfig {
            alpha: config.alpha,
            reps: config.reps,
            reference_lower: lower,
            reference_upper: upper,
            n,
            seed: config.seed,
            procedure: "detect-modes".into(),
        },
    )
}

/// Tests for a mode of the density at `x0`: every wedge anchored there must
/// reject that the density is increasing along its axis.
pub fn local_mode_test(
    sample: &Sample,
    x0: &Point,
    family: &WedgeFamily,
    config: &ProcedureConfig,
) -> Result<ModeTestResult> {
    if sample.len() < 3 {
        return Err(Error::InsufficientData("local mode test requires n >= 3".into()));
    }
    if sample.dim() != family.dim() || sample.dim() != x0.dim() {
        return Err(Error::InvalidInput("dimension mismatch between sample, x0, and wedges".into()));
    }
    let n = sample.len();
    let kappa = match config.mode {
        ThresholdMode::Raw => {
            let scans = scan_family(sample, family, x0)?;
            let counts: Vec<usize> = scans.iter().map(WedgeScan::count).collect();
            simulated_kappa(counts, n, NullFlavor::OneSidedWedge, config)?
        }
        ThresholdMode::Calibrated => {
            let boxed = ProcedureConfig {
                reference_box: Some(reference_box(sample, config)),
                ..config.clone()
            };
            calibrate_local_mode(family, x0, n, &boxed)?
        }
    };
    local_mode_test_with_kappa(sample, x0, family, &kappa)
}

/// Applies the local mode test with a precomputed threshold constant, e.g.
/// one calibration shared across many replicates of a study.
pub fn local_mode_test_with_kappa(
    sample: &Sample,
    x0: &Point,
    family: &WedgeFamily,
    kappa: &NullQuantile,
) -> Result<ModeTestResult> {
    let scans = scan_family(sample, family, x0)?;
    let per_wedge = decide_mode_wedges(&scans, sample.dim(), sample.len(), kappa.kappa)?;
    let mode_detected =
        !per_wedge.is_empty() && per_wedge.iter().all(|d| d.verdict == Verdict::IncreaseRejected);
    Ok(ModeTestResult { x0: x0.clone(), mode_detected, per_wedge, kappa: kappa.clone() })
}

fn decide_mode_wedges(
    scans: &[WedgeScan],
    d: usize,
    n: usize,
    kappa: f64,
) -> Result<Vec<WedgeDecision>> {
    scans
        .iter()
        .enumerate()
        .map(|(i, scan)| {
            let count = scan.count();
            if count < 2 {
                return Ok(WedgeDecision::insufficient(i, count));
            }
            let stat = statistic_wedge(scan, d)?;
            let threshold = critical_value(count, n, kappa)?;
            Ok(WedgeDecision {
                wedge: i,
                count,
                t: stat.value,
                threshold,
                verdict: one_sided_verdict(stat.value, threshold),
                scale: SubsectionIndex { j: 0, k: count },
            })
        })
        .collect()
}

/// Simultaneous two-sided monotonicity tests on every wedge (and optionally
/// every admissible subsection) anchored at the grid vertices. All decisions
/// share one simulated kappa, which gives the family-wise error guarantee.
pub fn monotonicity_map(
    sample: &Sample,
    grid: &Grid,
    family: &WedgeFamily,
    use_subsections: bool,
    config: &ProcedureConfig,
) -> Result<MonotonicityMap> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    if sample.dim() != family.dim() || sample.dim() != grid.dim() {
        return Err(Error::InvalidInput("dimension mismatch between sample, grid, and wedges".into()));
    }
    let n = sample.len();
    let d = sample.dim();
    let scans: Vec<Vec<WedgeScan>> = grid
        .vertices()
        .par_iter()
        .map(|v| scan_family(sample, family, v))
        .collect::<Result<_>>()?;
    let counts: Vec<usize> =
        scans.iter().flat_map(|per_vertex| per_vertex.iter().map(WedgeScan::count)).collect();
    let flavor = if use_subsections {
        NullFlavor::MultiscaleSubsections
    } else {
        NullFlavor::TwoSidedWedge
    };
    let kappa = simulated_kappa(counts, n, flavor, config)?;
    let decisions: Vec<MapDecision> = scans
        .par_iter()
        .enumerate()
        .map(|(v, per_vertex)| {
            let mut out = Vec::new();
            for (i, scan) in per_vertex.iter().enumerate() {
                for decision in
                    wedge_map_decisions(scan, i, d, n, kappa.kappa, use_subsections, config.max_scales)?
                {
                    out.push(MapDecision { vertex: v, direction: i, decision });
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(MonotonicityMap {
        grid: grid.clone(),
        family: family.clone(),
        alpha: config.alpha,
        use_subsections,
        kappa,
        decisions,
    })
}

fn wedge_map_decisions(
    scan: &WedgeScan,
    wedge: usize,
    d: usize,
    n: usize,
    kappa: f64,
    use_subsections: bool,
    max_scales: Option<usize>,
) -> Result<Vec<WedgeDecision>> {
    let count = scan.count();
    if count < 2 {
        return Ok(vec![WedgeDecision::insufficient(wedge, count)]);
    }
    let mut out = Vec::new();
    let spans = if use_subsections { subsection_spans(count, max_scales) } else { vec![count] };
    for span in spans {
        let threshold = critical_value(span, n, kappa)?;
        for j in 0..=count - span {
            let idx = SubsectionIndex::new(j, j + span, count)?;
            let stat = match statistic_subsection(scan, idx, d) {
                Ok(stat) => stat,
                // tied projected distances make this one scale degenerate;
                // skip it rather than failing the whole map
                Err(Error::DegenerateScale(_)) => continue,
                Err(e) => return Err(e),
            };
            out.push(WedgeDecision {
                wedge,
                count,
                t: stat.value,
                threshold,
                verdict: two_sided_verdict(stat.value, threshold),
                scale: idx,
            });
        }
    }
    Ok(out)
}

/// Runs the all-wedges-reject-increasing mode rule at every grid vertex
/// with a single shared threshold; flagged vertices localize modes to the
/// mesh.
pub fn detect_modes(
    sample: &Sample,
    grid: &Grid,
    family: &WedgeFamily,
    config: &ProcedureConfig,
) -> Result<ModeDetection> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    if sample.dim() != family.dim() || sample.dim() != grid.dim() {
        return Err(Error::InvalidInput("dimension mismatch between sample, grid, and wedges".into()));
    }
    let n = sample.len();
    let kappa = match config.mode {
        ThresholdMode::Raw => {
            let counts = grid
                .vertices()
                .par_iter()
                .map(|v| scan_family(sample, family, v))
                .collect::<Result<Vec<_>>>()?
                .iter()
                .flat_map(|per_vertex| per_vertex.iter().map(WedgeScan::count))
                .collect();
            simulated_kappa(counts, n, NullFlavor::OneSidedWedge, config)?
        }
        ThresholdMode::Calibrated => {
            let boxed = ProcedureConfig {
                reference_box: Some(reference_box(sample, config)),
                ..config.clone()
            };
            calibrate_mode_detection(family, grid, n, &boxed)?
        }
    };
    detect_modes_with_kappa(sample, grid, family, &kappa, config.alpha)
}

/// Grid-wide mode detection with a precomputed threshold constant.
pub fn detect_modes_with_kappa(
    sample: &Sample,
    grid: &Grid,
    family: &WedgeFamily,
    kappa: &NullQuantile,
    alpha: f64,
) -> Result<ModeDetection> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    let n = sample.len();
    let d = sample.dim();
    let vertices = grid.vertices();
    let scans: Vec<Vec<WedgeScan>> = vertices
        .par_iter()
        .map(|v| scan_family(sample, family, v))
        .collect::<Result<_>>()?;
    let results: Vec<VertexModeResult> = scans
        .par_iter()
        .enumerate()
        .map(|(v, per_vertex)| {
            let per_wedge = decide_mode_wedges(per_vertex, d, n, kappa.kappa)?;
            let mode_detected = !per_wedge.is_empty()
                && per_wedge.iter().all(|dec| dec.verdict == Verdict::IncreaseRejected);
            Ok(VertexModeResult {
                vertex: v,
                location: vertices[v].clone(),
                mode_detected,
                per_wedge,
            })
        })
        .collect::<Result<_>>()?;
    let modes = results
        .iter()
        .filter(|r| r.mode_detected)
        .map(|r| r.location.clone())
        .collect();
    Ok(ModeDetection {
        grid: grid.clone(),
        alpha,
        precision: grid.mesh,
        kappa: kappa.clone(),
        vertices: results,
        modes,
    })
}

/// Closed-form constant of the one-sided "reject decreasing" condition:
/// `2 sqrt(2) (2d+j)(d+j)` over
/// `j (1 - d/(d+j))^{(d+j)/d} [1 - d^2/(2(2d+j)^2)(-1 + sqrt(1 + 4((2d+j)/d)^2))]^{1/2}`.
/// `j = 2` covers the local test, `j = 1` grid detection.
pub fn d_minus(d: usize, j: usize) -> Result<f64> {
    check_dj(d, j)?;
    let (df, jf) = (d as f64, j as f64);
    let num = 2.0 * 2f64.sqrt() * (2.0 * df + jf) * (df + jf);
    let base = jf * (1.0 - df / (df + jf)).powf((df + jf) / df);
    let ratio = (2.0 * df + jf) / df;
    let inner = 1.0 - df * df / (2.0 * (2.0 * df + jf).powi(2)) * (-1.0 + (1.0 + 4.0 * ratio * ratio).sqrt());
    Ok(num / (base * inner.sqrt()))
}

/// Closed-form lower bound for the complementary "reject increasing"
/// condition.
pub fn d_plus_lower(d: usize, j: usize) -> Result<f64> {
    check_dj(d, j)?;
    let (df, jf) = (d as f64, j as f64);
    let s = 2.0 * df + jf;
    let num = jf * (df + jf) * 2.0 * 2f64.sqrt();
    let t1 = s * (-1.0 + (1.0 + 2.0 * jf * jf / (s * s)).sqrt());
    let t2 = (1.0 - jf * jf / (2.0 * s * s) * (-1.0 + (1.0 + 4.0 * s * s / (jf * jf)).sqrt())).sqrt();
    Ok(num / (t1 * t2))
}

fn check_dj(d: usize, j: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidInput("dimension must be at least 1".into()));
    }
    if !(j == 1 || j == 2) {
        return Err(Error::InvalidInput(format!("order j must be 1 or 2, got {j}")));
    }
    Ok(())
}

/// Evaluates the constant `D` for the requested order and the implied lower
/// bound on `C1^{d+4} C2^{d-1}`. Guidance only, never enforced at runtime.
///
/// `c` bounds the curvature at the mode; `f_at_mode` bounds the density
/// there (the bound carries a factor 4 for the local test, `j = 2`).
pub fn theory_constants(d: usize, j: usize, c: f64, f_at_mode: f64) -> Result<TheoryConstants> {
    if !(c > 0.0) || !(f_at_mode > 0.0) {
        return Err(Error::InvalidInput("c and f_at_mode must be positive".into()));
    }
    let d_value = d_minus(d, j)?;
    let factor = if j == 2 { 4.0 } else { 1.0 };
    let c_bound = factor * d_value * d_value / (c * c) * f_at_mode / (d as f64 + 4.0);
    Ok(TheoryConstants { d, j, d_value, c_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::standard_normal;
    use crate::rng::replicate_rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn normal_sample(n: usize, seed: u64) -> Sample {
        let mut rng = replicate_rng(seed, 0);
        let points = (0..n)
            .map(|_| Point::from(vec![standard_normal(&mut rng), standard_normal(&mut rng)]))
            .collect();
        Sample::new(points).unwrap()
    }

    fn uniform_sample(n: usize, half: f64, seed: u64) -> Sample {
        let mut rng = replicate_rng(seed, 0);
        let points = (0..n)
            .map(|_| Point::from(vec![rng.gen_range(-half..half), rng.gen_range(-half..half)]))
            .collect();
        Sample::new(points).unwrap()
    }

    fn family_n(n: usize) -> WedgeFamily {
        WedgeFamily::from_scales(&ScaleParams::new(2.0, 9.65, 1e-2, n, 2).unwrap()).unwrap()
    }

    fn quick_config(mode: ThresholdMode, seed: u64) -> ProcedureConfig {
        ProcedureConfig { reps: 300, ..ProcedureConfig::new(0.05, mode, seed) }
    }

    #[test]
    fn critical_value_examples() {
        let g = gamma_penalty(2.0 / 100.0).unwrap();
        assert_abs_diff_eq!(critical_value(2, 101, 0.0).unwrap(), (1f64 / 3.0).sqrt() * g, epsilon = 1e-12);
        let g5 = gamma_penalty(5.0 / 99.0).unwrap();
        assert_abs_diff_eq!(critical_value(5, 100, -g5).unwrap(), 0.0, epsilon = 1e-12);
        // increasing in kappa and in span for kappa >= 0
        assert!(critical_value(5, 100, 1.0).unwrap() > critical_value(5, 100, 0.5).unwrap());
        assert!(critical_value(9, 100, 0.5).unwrap() > critical_value(5, 100, 0.5).unwrap());
        assert!(critical_value(1, 100, 0.0).is_err());
    }

    #[test]
    fn mode_found_in_strong_peak() {
        // n=500 standard normal at the true mode: the raw test detects a
        // mode with very high probability; one replicate suffices as a
        // smoke check with a fixed seed
        let sample = normal_sample(500, 42);
        let family = family_n(500);
        let result = local_mode_test(
            &sample,
            &Point::from(vec![0.0, 0.0]),
            &family,
            &quick_config(ThresholdMode::Calibrated, 1),
        )
        .unwrap();
        assert!(result.mode_detected);
        assert!(result.per_wedge.iter().all(|d| d.verdict == Verdict::IncreaseRejected));
    }

    #[test]
    fn no_mode_in_uniform_data() {
        let sample = uniform_sample(500, 2.5, 9);
        let family = family_n(500);
        let result = local_mode_test(
            &sample,
            &Point::from(vec![0.0, 0.0]),
            &family,
            &quick_config(ThresholdMode::Raw, 1),
        )
        .unwrap();
        assert!(!result.mode_detected);
    }

    #[test]
    fn empty_wedges_block_detection() {
        // all data far away in one octant: some wedge at the origin is empty
        let points = (0..20)
            .map(|i| Point::from(vec![10.0 + i as f64, 10.0]))
            .collect();
        let sample = Sample::new(points).unwrap();
        // explicit family: the sample-size rule would demand n large enough
        // for the default angle to be admissible
        let family = WedgeFamily::explicit(
            2.0,
            std::f64::consts::FRAC_PI_4,
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]],
        )
        .unwrap();
        let config = ProcedureConfig {
            reference_box: Some((Point::from(vec![-1.0, -1.0]), Point::from(vec![20.0, 20.0]))),
            ..quick_config(ThresholdMode::Raw, 1)
        };
        let result =
            local_mode_test(&sample, &Point::from(vec![0.0, 0.0]), &family, &config).unwrap();
        assert!(!result.mode_detected);
        assert!(result.per_wedge.iter().any(|d| d.verdict == Verdict::InsufficientData));
    }

    #[test]
    fn decision_consistency() {
        // recomputing T and the threshold from raw inputs reproduces the
        // recorded verdicts
        let sample = normal_sample(300, 5);
        let family = family_n(300);
        let x0 = Point::from(vec![0.1, -0.2]);
        let result =
            local_mode_test(&sample, &x0, &family, &quick_config(ThresholdMode::Raw, 2)).unwrap();
        let scans = scan_family(&sample, &family, &x0).unwrap();
        for dec in &result.per_wedge {
            let scan = &scans[dec.wedge];
            assert_eq!(scan.count(), dec.count);
            if dec.verdict == Verdict::InsufficientData {
                assert!(dec.count < 2);
                continue;
            }
            let stat = statistic_wedge(scan, 2).unwrap();
            assert_abs_diff_eq!(stat.value, dec.t, epsilon = 0.0);
            let threshold = critical_value(dec.count, sample.len(), result.kappa.kappa).unwrap();
            assert_abs_diff_eq!(threshold, dec.threshold, epsilon = 0.0);
            assert_eq!(one_sided_verdict(stat.value, threshold), dec.verdict);
        }
    }

    #[test]
    fn calibrated_threshold_not_larger_than_raw() {
        let sample = normal_sample(200, 17);
        let family = family_n(200);
        let x0 = Point::from(vec![0.0, 0.0]);
        let cfg_box = Some((Point::from(vec![-2.5, -2.5]), Point::from(vec![2.5, 2.5])));
        let raw = local_mode_test(
            &sample,
            &x0,
            &family,
            &ProcedureConfig { reference_box: cfg_box.clone(), reps: 1000, ..quick_config(ThresholdMode::Raw, 3) },
        )
        .unwrap();
        let cal = local_mode_test(
            &sample,
            &x0,
            &family,
            &ProcedureConfig { reference_box: cfg_box, reps: 1000, ..quick_config(ThresholdMode::Calibrated, 3) },
        )
        .unwrap();
        assert!(cal.kappa.kappa <= raw.kappa.kappa);
    }

    #[test]
    fn map_verdicts_match_density_shape() {
        // standard normal: wedges pointing away from the origin should see
        // decreasing density, wedges pointing toward it increasing density
        let sample = normal_sample(50_000, 23);
        let family = WedgeFamily::explicit(
            1.0,
            std::f64::consts::FRAC_PI_4,
            vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
        )
        .unwrap();
        let grid = crate::geometry::build_grid(
            Point::from(vec![-1.5, -0.1]),
            Point::from(vec![1.5, 0.1]),
            1.5,
        )
        .unwrap();
        assert_eq!(grid.len(), 3);
        let map = monotonicity_map(&sample, &grid, &family, false, &quick_config(ThresholdMode::Raw, 4))
            .unwrap();
        // vertex 1 is near the origin; direction 0 points to +x (density
        // falls), direction 1 to -x (density falls as well)
        let at = |v: usize, dir: usize| {
            map.decisions
                .iter()
                .find(|m| m.vertex == v && m.direction == dir)
                .map(|m| m.decision.verdict)
                .unwrap()
        };
        assert_eq!(at(1, 0), Verdict::IncreaseRejected);
        assert_eq!(at(1, 1), Verdict::IncreaseRejected);
        // vertex 0 at x = -1.5: density rises toward the origin (+x)
        assert_eq!(at(0, 0), Verdict::DecreaseRejected);
        assert_eq!(at(2, 1), Verdict::DecreaseRejected);
    }

    #[test]
    fn map_subsections_share_kappa_and_extend_pairs() {
        let sample = normal_sample(400, 31);
        let family = family_n(400);
        let grid = crate::geometry::build_grid(
            Point::from(vec![-0.5, -0.5]),
            Point::from(vec![0.5, 0.5]),
            1.0,
        )
        .unwrap();
        let cfg = ProcedureConfig { max_scales: Some(3), ..quick_config(ThresholdMode::Raw, 6) };
        let whole = monotonicity_map(&sample, &grid, &family, false, &cfg).unwrap();
        let multi = monotonicity_map(&sample, &grid, &family, true, &cfg).unwrap();
        assert!(multi.decisions.len() > whole.decisions.len());
        for m in &multi.decisions {
            if m.decision.verdict != Verdict::InsufficientData {
                let c = critical_value(m.decision.scale.span(), sample.len(), multi.kappa.kappa)
                    .unwrap();
                assert_abs_diff_eq!(c, m.decision.threshold, epsilon = 0.0);
            }
        }
    }

    #[test]
    fn detect_modes_flags_true_peak_vertex() {
        let sample = normal_sample(2000, 8);
        let family = family_n(2000);
        let grid = crate::geometry::build_grid(
            Point::from(vec![-1.0, -1.0]),
            Point::from(vec![1.0, 1.0]),
            1.0,
        )
        .unwrap();
        let det = detect_modes(&sample, &grid, &family, &quick_config(ThresholdMode::Calibrated, 2))
            .unwrap();
        assert_eq!(det.precision, 1.0);
        assert!(det.modes.iter().any(|p| p.coords == vec![0.0, 0.0]), "modes: {:?}", det.modes);
    }

    #[test]
    fn detect_modes_quiet_on_uniform() {
        let sample = uniform_sample(2000, 3.0, 12);
        let family = family_n(2000);
        let grid = crate::geometry::build_grid(
            Point::from(vec![-1.0, -1.0]),
            Point::from(vec![1.0, 1.0]),
            1.0,
        )
        .unwrap();
        let det =
            detect_modes(&sample, &grid, &family, &quick_config(ThresholdMode::Raw, 2)).unwrap();
        assert!(det.modes.is_empty());
    }

    #[test]
    fn affine_invariance_of_verdicts() {
        // joint rotation of sample, candidate point, and directions leaves
        // every verdict identical (projections are rotation-equivariant)
        let sample = normal_sample(300, 14);
        let theta: f64 = 0.7;
        let (c, s) = (theta.cos(), theta.sin());
        let rot = |p: &Point| Point::from(vec![
            c * p.coords[0] - s * p.coords[1],
            s * p.coords[0] + c * p.coords[1],
        ]);
        let rotated = Sample::new(sample.points().iter().map(rot).collect()).unwrap();
        let family = family_n(300);
        let rot_family = WedgeFamily::explicit(
            family.length,
            family.angle,
            family
                .directions
                .iter()
                .map(|e| {
                    let p = rot(&Point::from(e.clone()));
                    p.coords
                })
                .collect(),
        )
        .unwrap();
        let x0 = Point::from(vec![0.3, -0.1]);
        let cfg = quick_config(ThresholdMode::Raw, 21);
        let a = local_mode_test(&sample, &x0, &family, &cfg).unwrap();
        let b = local_mode_test(&rotated, &rot(&x0), &rot_family, &cfg).unwrap();
        assert_eq!(a.mode_detected, b.mode_detected);
        for (da, db) in a.per_wedge.iter().zip(&b.per_wedge) {
            assert_eq!(da.count, db.count);
            assert_eq!(da.verdict, db.verdict);
            assert_abs_diff_eq!(da.t, db.t, epsilon = 1e-9);
        }
    }

    #[test]
    fn theory_constant_regressions() {
        // frozen by direct evaluation of the closed forms
        assert_abs_diff_eq!(d_minus(2, 2).unwrap(), 160.26462127065156, epsilon = 1e-9);
        assert_abs_diff_eq!(d_minus(2, 1).unwrap(), 268.9107433124395, epsilon = 1e-9);
        assert_abs_diff_eq!(d_minus(3, 2).unwrap(), 313.8837382059194, epsilon = 1e-9);
        assert_abs_diff_eq!(d_plus_lower(2, 2).unwrap(), 42.18047832229648, epsilon = 1e-9);
        assert_abs_diff_eq!(d_plus_lower(2, 1).unwrap(), 47.80022724255632, epsilon = 1e-9);
        // second, structurally different evaluation of the j = 2 constant
        let d = 2.0f64;
        let independent = (2f64.sqrt() * (2.0 * d + 2.0) * (d + 2.0))
            / ((1.0 - d / (d + 2.0)).powf((d + 2.0) / d)
                * (1.0
                    - d * d / (2.0 * (2.0 * d + 2.0).powi(2))
                        * (-1.0 + (1.0 + 4.0 * ((2.0 * d + 2.0) / d).powi(2)).sqrt()))
                .sqrt());
        assert_abs_diff_eq!(d_minus(2, 2).unwrap(), independent, epsilon = 1e-9);
    }

    #[test]
    fn theory_bound_substitution_and_monotonicity() {
        let t = theory_constants(2, 2, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(t.c_bound, 4.0 * t.d_value * t.d_value / 6.0, epsilon = 1e-9);
        let tighter_c = theory_constants(2, 2, 2.0, 1.0).unwrap();
        assert!(tighter_c.c_bound < t.c_bound);
        let larger_f = theory_constants(2, 2, 1.0, 2.0).unwrap();
        assert!(larger_f.c_bound > t.c_bound);
        assert!(theory_constants(0, 2, 1.0, 1.0).is_err());
        assert!(theory_constants(2, 3, 1.0, 1.0).is_err());
        assert!(theory_constants(2, 2, 0.0, 1.0).is_err());
    }
}
