//! Wedges, direction sets, scales and grids.
//!
//! A wedge is a truncated cone with vertex `x0`, axis direction `e`,
//! half-opening angle `phi` per complement coordinate and length `l`.
//! Membership is strict at the vertex (the projected distance must be
//! positive) and inclusive at the length and side faces.

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

const UNIT_TOL: f64 = 1e-12;

/// A point in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidInput("point must have dimension >= 1".into()));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("point coordinates must be finite".into()));
        }
        Ok(Point { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Point { coords }
    }
}

/// An ordered collection of points sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    points: Vec<Point>,
    dim: usize,
}

impl Sample {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        let dim = match points.first() {
            Some(p) => p.dim(),
            None => return Err(Error::InvalidInput("sample is empty".into())),
        };
        if points.iter().any(|p| p.dim() != dim) {
            return Err(Error::InvalidInput("sample points have mixed dimensions".into()));
        }
        Ok(Sample { points, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Componentwise bounding box of the sample.
    pub fn bounding_box(&self) -> (Point, Point) {
        let mut lo = self.points[0].coords.clone();
        let mut hi = lo.clone();
        for p in &self.points {
            for (j, &c) in p.coords.iter().enumerate() {
                if c < lo[j] {
                    lo[j] = c;
                }
                if c > hi[j] {
                    hi[j] = c;
                }
            }
        }
        (lo.into(), hi.into())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Deterministic orthonormal basis of the orthogonal complement of `e`.
///
/// Gram-Schmidt over the standard basis, keeping the first d-1 directions
/// with a non-degenerate residual. For an axis vector this returns the
/// remaining axes in canonical order.
pub fn orthonormal_complement(e: &[f64]) -> Result<Vec<Vec<f64>>> {
    let d = e.len();
    if e.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidInput("direction has non-finite entries".into()));
    }
    if (norm(e) - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidInput(format!(
            "direction must be unit-norm, got |e| = {}",
            norm(e)
        )));
    }
    let mut basis: Vec<Vec<f64>> = vec![e.to_vec()];
    for axis in 0..d {
        if basis.len() == d {
            break;
        }
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        for b in &basis {
            let c = dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
        let nv = norm(&v);
        if nv > 1e-6 {
            for vi in &mut v {
                *vi /= nv;
            }
            // second orthogonalization pass for numerical hygiene
            for b in &basis {
                let c = dot(&v, b);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= c * bi;
                }
            }
            let nv = norm(&v);
            for vi in &mut v {
                *vi /= nv;
            }
            basis.push(v);
        }
    }
    debug_assert_eq!(basis.len(), d);
    Ok(basis.split_off(1))
}

/// Signed distance of the projection of `x` onto the line through `x0` in
/// direction `e`.
pub fn signed_projected_distance(x: &Point, x0: &Point, e: &[f64]) -> Result<f64> {
    if x.dim() != x0.dim() || x.dim() != e.len() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    Ok(x.coords
        .iter()
        .zip(&x0.coords)
        .zip(e)
        .map(|((xi, x0i), ei)| (xi - x0i) * ei)
        .sum())
}

/// A truncated wedge.
#[derive(Debug, Clone, PartialEq)]
pub struct Wedge {
    pub vertex: Point,
    pub direction: Vec<f64>,
    pub complement_basis: Vec<Vec<f64>>,
    pub angle: f64,
    pub length: f64,
}

impl Wedge {
    /// Builds a wedge, deriving the complement basis from the direction.
    pub fn new(vertex: Point, direction: Vec<f64>, angle: f64, length: f64) -> Result<Self> {
        if vertex.dim() != direction.len() {
            return Err(Error::InvalidInput("vertex/direction dimension mismatch".into()));
        }
        if !(angle > 0.0 && angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Parameter(format!(
                "wedge angle must lie in (0, pi/2), got {angle}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Parameter(format!("wedge length must be positive, got {length}")));
        }
        let complement_basis = orthonormal_complement(&direction)?;
        Ok(Wedge { vertex, direction, complement_basis, angle, length })
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }
}

/// Membership test, strict at the vertex and inclusive elsewhere.
pub fn wedge_contains(wedge: &Wedge, x: &Point) -> Result<bool> {
    let p = signed_projected_distance(x, &wedge.vertex, &wedge.direction)?;
    if !(p > 0.0 && p <= wedge.length) {
        return Ok(false);
    }
    let bound = wedge.angle.tan() * p;
    for e_i in &wedge.complement_basis {
        let s = signed_projected_distance(x, &wedge.vertex, e_i)?;
        if s.abs() > bound {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The observations falling in a wedge, sorted by projected distance.
#[derive(Debug, Clone, PartialEq)]
pub struct WedgeScan {
    pub wedge: Wedge,
    pub member_indices: Vec<usize>,
    pub distances: Vec<f64>,
}

impl WedgeScan {
    pub fn count(&self) -> usize {
        self.distances.len()
    }
}

/// Scans a sample for wedge members; ties in the projected distance are
/// broken by ascending sample index.
pub fn scan_wedge(sample: &Sample, wedge: &Wedge) -> Result<WedgeScan> {
    if sample.dim() != wedge.dim() {
        return Err(Error::InvalidInput("sample/wedge dimension mismatch".into()));
    }
    let mut members: Vec<(f64, usize)> = Vec::new();
    for (i, x) in sample.points().iter().enumerate() {
        if wedge_contains(wedge, x)? {
            let p = signed_projected_distance(x, &wedge.vertex, &wedge.direction)?;
            members.push((p, i));
        }
    }
    members.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(WedgeScan {
        wedge: wedge.clone(),
        member_indices: members.iter().map(|&(_, i)| i).collect(),
        distances: members.iter().map(|&(p, _)| p).collect(),
    })
}

/// Sample-size driven scale constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub c1: f64,
    pub c2: f64,
    pub epsilon: f64,
    pub n: usize,
    pub d: usize,
}

impl ScaleParams {
    pub fn new(c1: f64, c2: f64, epsilon: f64, n: usize, d: usize) -> Result<Self> {
        if !(c1 > 0.0 && c2 > 0.0) {
            return Err(Error::Parameter("C1 and C2 must be positive".into()));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Parameter("epsilon must lie in (0, 1)".into()));
        }
        if n < 3 {
            return Err(Error::Parameter("sample size must be at least 3".into()));
        }
        if d == 0 {
            return Err(Error::Parameter("dimension must be at least 1".into()));
        }
        Ok(ScaleParams { c1, c2, epsilon, n, d })
    }
}

/// Wedge length and angle as functions of the sample size:
/// length `C1 (log n)^{(d-1)/(d+4)} (log n / n)^{1/(d+4)}`, angle
/// `C2 / (2 log n)`.
pub fn default_scales(p: &ScaleParams) -> Result<(f64, f64)> {
    let n = p.n as f64;
    let d = p.d as f64;
    let logn = n.ln();
    let length = p.c1 * logn.powf((d - 1.0) / (d + 4.0)) * (logn / n).powf(1.0 / (d + 4.0));
    let angle = p.c2 / (2.0 * logn);
    if angle >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::Parameter(format!(
            "C2 too large for this n: angle {angle} >= pi/2"
        )));
    }
    Ok((length, angle))
}

/// Internal seed for the sphere candidate set used by `direction_set` in
/// dimension three and above. Fixed so the packing is reproducible.
const DIRECTION_CANDIDATE_SEED: u64 = 0x6d6f_6465_7363_6f70;
const DIRECTION_CANDIDATES: usize = 8192;

/// A set of pairwise well-separated unit directions.
///
/// In dimension two this tiles the circle with `floor(pi/angle + 1e-2)`
/// equally spaced directions. In higher dimensions candidates on the sphere
/// are accepted greedily under the pairwise constraint
/// `angle(e_i, e_j) >= (2 + epsilon) arctan(sqrt(d-1) tan(phi))`.
pub fn direction_set(d: usize, angle: f64, epsilon: f64) -> Result<Vec<Vec<f64>>> {
    if !(angle > 0.0 && angle < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Parameter("angle must lie in (0, pi/2)".into()));
    }
    if d < 2 {
        return Err(Error::Parameter("direction sets require dimension >= 2".into()));
    }
    if d == 2 {
        let m = (std::f64::consts::PI / angle + 1e-2).floor() as i64;
        if m < 1 {
            return Err(Error::Parameter("angle too large: no direction fits".into()));
        }
        let m = m as usize;
        return Ok((0..m)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                vec![t.cos(), t.sin()]
            })
            .collect());
    }
    let min_sep = (2.0 + epsilon) * ((d as f64 - 1.0).sqrt() * angle.tan()).atan();
    let mut accepted: Vec<Vec<f64>> = Vec::new();
    let mut axis = vec![0.0; d];
    axis[0] = 1.0;
    accepted.push(axis);
    let mut rng = crate::rng::replicate_rng(DIRECTION_CANDIDATE_SEED, 0);
    for _ in 0..DIRECTION_CANDIDATES {
        let mut v: Vec<f64> = (0..d).map(|_| standard_normal(&mut rng)).collect();
        let nv = norm(&v);
        if nv < 1e-12 {
            continue;
        }
        for vi in &mut v {
            *vi /= nv;
        }
        let ok = accepted
            .iter()
            .all(|a| dot(a, &v).clamp(-1.0, 1.0).acos() >= min_sep);
        if ok {
            accepted.push(v);
        }
    }
    Ok(accepted)
}

/// Box-Muller draw; used where a full distribution crate is not warranted.
pub(crate) fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u1: f64 = rng.gen::<f64>();
        if u1 <= f64::MIN_POSITIVE {
            continue;
        }
        let u2: f64 = rng.gen::<f64>();
        return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
    }
}

/// An axis-aligned equidistant grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lower: Point,
    pub upper: Point,
    pub mesh: f64,
    steps: Vec<usize>,
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    pub fn len(&self) -> usize {
        self.steps.iter().map(|&s| s + 1).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Vertex at flat index `idx`, in row-major order over the axes.
    pub fn vertex(&self, mut idx: usize) -> Point {
        let mut coords = vec![0.0; self.dim()];
        for j in (0..self.dim()).rev() {
            let count = self.steps[j] + 1;
            let i = idx % count;
            idx /= count;
            coords[j] = self.lower.coords[j] + i as f64 * self.mesh;
        }
        coords.into()
    }

    pub fn vertices(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.vertex(i)).collect()
    }
}

/// Grid over `[lower, upper]` with the given mesh. Each axis runs from the
/// lower coordinate in steps of `mesh` up to `upper + 1e-9 mesh`.
pub fn build_grid(lower: Point, upper: Point, mesh: f64) -> Result<Grid> {
    if !(mesh > 0.0 && mesh.is_finite()) {
        return Err(Error::InvalidInput(format!("mesh must be positive, got {mesh}")));
    }
    if lower.dim() != upper.dim() {
        return Err(Error::InvalidInput("box dimension mismatch".into()));
    }
    if lower.coords.iter().zip(&upper.coords).any(|(l, u)| l >= u) {
        return Err(Error::InvalidInput("box lower bound must be componentwise below upper".into()));
    }
    let steps: Vec<usize> = lower
        .coords
        .iter()
        .zip(&upper.coords)
        .map(|(l, u)| ((u - l) / mesh + 1e-9).floor() as usize)
        .collect();
    Ok(Grid { lower, upper, mesh, steps })
}
