//! Validated finite pointed metric spaces and their purely metric quantities:
//! Gromov products, midpoint sets, metric segments, and property-(Z) margins.
//!
//! A `FiniteMetricSpace` is immutable after construction and every operation
//! here is a pure function of its inputs, so values can be shared freely
//! across threads. Margins and defects are exact finite minima computed by
//! exhaustive loops, never sampled.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};

/// Unordered pair of distinct point indices, stored in canonical order with
/// an orientation flag so the original `(x, y)` is recoverable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairId {
    lo: usize,
    hi: usize,
    swapped: bool,
}

impl PairId {
    pub fn new(x: usize, y: usize) -> Result<Self> {
        if x == y {
            return Err(Error::DegeneratePair { x, y });
        }
        Ok(if x < y {
            PairId {
                lo: x,
                hi: y,
                swapped: false,
            }
        } else {
            PairId {
                lo: y,
                hi: x,
                swapped: true,
            }
        })
    }

    /// First point in the original orientation.
    pub fn x(&self) -> usize {
        if self.swapped {
            self.hi
        } else {
            self.lo
        }
    }

    /// Second point in the original orientation.
    pub fn y(&self) -> usize {
        if self.swapped {
            self.lo
        } else {
            self.hi
        }
    }

    /// The pair as `(min, max)`.
    pub fn canonical(&self) -> (usize, usize) {
        (self.lo, self.hi)
    }

    pub fn is_swapped(&self) -> bool {
        self.swapped
    }

    /// Same pair with the orientation reversed.
    pub fn flipped(&self) -> Self {
        PairId {
            lo: self.lo,
            hi: self.hi,
            swapped: !self.swapped,
        }
    }
}

impl fmt::Display for PairId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x(), self.y())
    }
}

/// A validated pointed metric space on finitely many points.
///
/// Distances live in a dense row-major matrix. The base point is the
/// distinguished point of the pointed space; functions are re-based against
/// it when a vanishing-at-base normalization is requested.
#[derive(Debug, Clone)]
pub struct FiniteMetricSpace {
    n: usize,
    dist: Vec<f64>,
    base: usize,
    labels: Option<Vec<String>>,
    coords: Option<Vec<Vec<f64>>>,
    diameter: f64,
    min_positive: f64,
}

/// Shared handle used by values that keep a reference to their space.
pub type SpaceHandle = Arc<FiniteMetricSpace>;

impl FiniteMetricSpace {
    /// Validates a distance matrix and base index against all the metric
    /// invariants: zero diagonal, symmetry, positivity off the diagonal, and
    /// the triangle inequality at relative tolerance `cfg.tol_triangle`
    /// scaled by the largest entry.
    ///
    /// Re-validating an accepted space succeeds and keeps the matrix
    /// entries bit-identical.
    pub fn validate(matrix: Vec<Vec<f64>>, base: usize, cfg: &Config) -> Result<Self> {
        cfg.validate()?;
        let n = matrix.len();
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        for (row, r) in matrix.iter().enumerate() {
            if r.len() != n {
                return Err(Error::NotSquare {
                    row,
                    len: r.len(),
                    n,
                });
            }
        }
        if base >= n {
            return Err(Error::BadBaseIndex { base, n });
        }

        let mut dist = Vec::with_capacity(n * n);
        for r in &matrix {
            dist.extend_from_slice(r);
        }
        let scale = dist.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()));
        let tol = cfg.tol_triangle * scale.max(1.0);

        for i in 0..n {
            let dii = dist[i * n + i];
            if dii != 0.0 {
                return Err(Error::NonzeroDiagonal { i, value: dii });
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let fwd = dist[i * n + j];
                let bwd = dist[j * n + i];
                if fwd < 0.0 {
                    return Err(Error::NegativeDistance { i, j, value: fwd });
                }
                if (fwd - bwd).abs() > tol {
                    return Err(Error::Asymmetry {
                        i,
                        j,
                        forward: fwd,
                        backward: bwd,
                    });
                }
                if fwd == 0.0 {
                    return Err(Error::DuplicatePoint { i, j });
                }
            }
        }
        // exhaustive triangle scan; report the worst triple
        let mut worst: Option<(usize, usize, usize, f64)> = None;
        for i in 0..n {
            for k in 0..n {
                let dik = dist[i * n + k];
                for j in 0..n {
                    let defect = dik - dist[i * n + j] - dist[j * n + k];
                    if defect > tol && worst.map_or(true, |w| defect > w.3) {
                        worst = Some((i, j, k, defect));
                    }
                }
            }
        }
        if let Some((i, j, k, defect)) = worst {
            return Err(Error::TriangleViolation { i, j, k, defect });
        }

        let mut diameter = 0.0_f64;
        let mut min_positive = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                let d = dist[i * n + j];
                diameter = diameter.max(d);
                min_positive = min_positive.min(d);
            }
        }
        if n == 1 {
            min_positive = 0.0;
        }

        Ok(FiniteMetricSpace {
            n,
            dist,
            base,
            labels: None,
            coords: None,
            diameter,
            min_positive,
        })
    }

    /// Attaches optional per-point labels (provenance only).
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::ValueCountMismatch {
                got: labels.len(),
                expected: self.n,
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Attaches optional per-point coordinates (provenance only).
    pub fn with_coords(mut self, coords: Vec<Vec<f64>>) -> Result<Self> {
        if coords.len() != self.n {
            return Err(Error::ValueCountMismatch {
                got: coords.len(),
                expected: self.n,
            });
        }
        self.coords = Some(coords);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base(&self) -> usize {
        self.base
    }

    /// Distance between points `i` and `j`.
    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Smallest positive distance (the sample mesh). Zero for a singleton.
    pub fn min_positive_distance(&self) -> f64 {
        self.min_positive
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    pub fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.n {
            Err(Error::IndexOutOfRange { index, n: self.n })
        } else {
            Ok(())
        }
    }

    pub(crate) fn check_pair(&self, x: usize, y: usize) -> Result<()> {
        self.check_index(x)?;
        self.check_index(y)?;
        if x == y {
            return Err(Error::DegeneratePair { x, y });
        }
        Ok(())
    }

    /// All unordered pairs `(i, j)` with `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| (i, j)))
    }

    /// The matrix as rows, for serialization.
    pub fn matrix_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.dist[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }
}

/// Gromov product `(x,y)_z = (d(x,z) + d(y,z) - d(x,y)) / 2`.
///
/// Nonnegative on a valid space up to rounding; tiny negatives are clamped
/// to zero. Zero exactly when `z` lies metrically between `x` and `y`.
pub fn gromov_product(m: &FiniteMetricSpace, x: usize, y: usize, z: usize) -> Result<f64> {
    m.check_index(x)?;
    m.check_index(y)?;
    m.check_index(z)?;
    let value = 0.5 * (m.d(x, z) + m.d(y, z) - m.d(x, y));
    Ok(value.max(0.0))
}

/// Relaxed midpoint set: all `z` with
/// `max(d(x,z), d(y,z)) <= (1 + delta)/2 * d(x,y)` up to `tol_eq`.
///
/// Monotone in `delta`; for `delta >= 1` it contains both endpoints.
pub fn midpoint_set(
    m: &FiniteMetricSpace,
    x: usize,
    y: usize,
    delta: f64,
    cfg: &Config,
) -> Result<Vec<usize>> {
    m.check_pair(x, y)?;
    if delta < 0.0 {
        return Err(Error::NegativeRelaxation { delta });
    }
    let bound = 0.5 * (1.0 + delta) * m.d(x, y) + cfg.eq_slack(m.diameter());
    Ok((0..m.n())
        .filter(|&z| m.d(x, z).max(m.d(y, z)) <= bound)
        .collect())
}

/// Relative midpoint defect:
/// `min over z of max(d(x,z), d(z,y)) / (d(x,y)/2) - 1`.
///
/// Zero exactly when an exact metric midpoint exists; every point of the
/// space competes, so a two-point space scores 1.
pub fn midpoint_defect(m: &FiniteMetricSpace, x: usize, y: usize) -> Result<f64> {
    let excess = midpoint_excess(m, x, y)?;
    Ok(excess / (0.5 * m.d(x, y)))
}

/// Absolute midpoint excess: `min over z of max(d(x,z), d(z,y)) - d(x,y)/2`.
///
/// Length units. On a mesh-`h` sample of a length space this is `O(h)`
/// uniformly over pairs, which makes it the right aggregate for a
/// length-defect diagnostic (the relative defect is identically 1 at
/// mesh-adjacent pairs of any grid).
pub fn midpoint_excess(m: &FiniteMetricSpace, x: usize, y: usize) -> Result<f64> {
    m.check_pair(x, y)?;
    let best = (0..m.n())
        .map(|z| m.d(x, z).max(m.d(z, y)))
        .fold(f64::INFINITY, f64::min);
    Ok((best - 0.5 * m.d(x, y)).max(0.0))
}

/// Metric segment `[x,y] = { z : d(x,z) + d(z,y) <= d(x,y) + tol_eq }`.
///
/// Always contains `x` and `y`; a cardinality above 2 is exactly the
/// "some point lies strictly between" criterion.
pub fn metric_segment(
    m: &FiniteMetricSpace,
    x: usize,
    y: usize,
    cfg: &Config,
) -> Result<Vec<usize>> {
    m.check_pair(x, y)?;
    let bound = m.d(x, y) + cfg.eq_slack(m.diameter());
    Ok((0..m.n())
        .filter(|&z| m.d(x, z) + m.d(z, y) <= bound)
        .collect())
}

/// Pairwise property-(Z) margin:
/// `min over z not in {x,y} of (x,y)_z / min(d(x,z), d(y,z))`.
///
/// Returns `+inf` on a two-point space (empty quantifier). Together with
/// `metric_segment`, a margin at or below the threshold is equivalent to the
/// segment being nontrivial: on a finite space a zero ratio requires a
/// vanishing Gromov product.
pub fn pair_z_margin(m: &FiniteMetricSpace, x: usize, y: usize) -> Result<f64> {
    m.check_pair(x, y)?;
    let mut best = f64::INFINITY;
    for z in 0..m.n() {
        if z == x || z == y {
            continue;
        }
        let num = 0.5 * (m.d(x, z) + m.d(y, z) - m.d(x, y));
        let den = m.d(x, z).min(m.d(y, z));
        let ratio = (num / den).max(0.0);
        if ratio < best {
            best = ratio;
        }
    }
    Ok(best)
}

/// Relative scale at which the sample probes the pair:
/// `min over z not in {x,y} of min(d(x,z), d(y,z)) / d(x,y)`; `+inf` when no
/// other point exists.
///
/// A value of 1 or more means no third point is strictly closer to either
/// endpoint than the endpoints are to each other, so the absence of a
/// between-point witness carries no information below the pair's own scale.
pub fn witness_scale(m: &FiniteMetricSpace, x: usize, y: usize) -> Result<f64> {
    m.check_pair(x, y)?;
    let dxy = m.d(x, y);
    let mut best = f64::INFINITY;
    for z in 0..m.n() {
        if z == x || z == y {
            continue;
        }
        let s = m.d(x, z).min(m.d(y, z)) / dxy;
        if s < best {
            best = s;
        }
    }
    Ok(best)
}

/// Whether the sample fails to probe the pair below its own scale.
pub fn is_scale_limited(m: &FiniteMetricSpace, x: usize, y: usize, cfg: &Config) -> Result<bool> {
    Ok(witness_scale(m, x, y)? >= 1.0 - cfg.tol_eq)
}

/// Aggregate metric diagnostics over all pairs of a space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceDiagnostics {
    pub n: usize,
    pub pair_count: usize,
    /// Max over pairs of the absolute midpoint excess (length units).
    /// `O(h)` on a mesh-`h` sample of a length space; a diagnostic, not a
    /// verdict about the underlying space.
    pub length_defect: f64,
    pub length_defect_pair: Option<PairId>,
    /// Max over pairs of the relative midpoint defect. Identically 1 on any
    /// uniform grid because mesh-adjacent pairs have no midpoint candidates.
    pub max_midpoint_defect: f64,
    /// Max over pairs of the property-(Z) margin. `+inf` only on a two-point
    /// space; reported as `None` in serialized form then.
    pub max_z_margin: Option<f64>,
    /// Pair attaining the max margin. Ties prefer pairs that the sample
    /// probes below their own scale, then larger distance, then index order.
    pub max_z_margin_pair: Option<PairId>,
    /// Pairs whose metric segment is trivial (just the endpoints).
    pub trivial_segment_pairs: Vec<PairId>,
    /// Number of pairs with a margin at the zero threshold.
    pub zero_margin_pairs: usize,
    /// Number of pairs the sample cannot probe below their own scale.
    pub scale_limited_pairs: usize,
}

/// Scans all pairs and aggregates midpoint defects, (Z)-margins and trivial
/// segments. A singleton space yields an empty report.
pub fn space_diagnostics(m: &FiniteMetricSpace, cfg: &Config) -> Result<SpaceDiagnostics> {
    let mut diag = SpaceDiagnostics {
        n: m.n(),
        pair_count: 0,
        length_defect: 0.0,
        length_defect_pair: None,
        max_midpoint_defect: 0.0,
        max_z_margin: None,
        max_z_margin_pair: None,
        trivial_segment_pairs: Vec::new(),
        zero_margin_pairs: 0,
        scale_limited_pairs: 0,
    };
    if m.n() < 2 {
        return Ok(diag);
    }
    let threshold = cfg.margin_threshold(m.diameter());
    // (margin, probed below scale, distance) of the current best margin pair
    let mut best_margin: Option<(f64, bool, f64, PairId)> = None;
    for (x, y) in m.pairs() {
        diag.pair_count += 1;
        let pair = PairId::new(x, y)?;

        let excess = midpoint_excess(m, x, y)?;
        if excess > diag.length_defect {
            diag.length_defect = excess;
            diag.length_defect_pair = Some(pair);
        }
        let defect = excess / (0.5 * m.d(x, y));
        diag.max_midpoint_defect = diag.max_midpoint_defect.max(defect);

        let margin = pair_z_margin(m, x, y)?;
        if margin <= threshold {
            diag.zero_margin_pairs += 1;
        }
        let limited = is_scale_limited(m, x, y, cfg)?;
        if limited {
            diag.scale_limited_pairs += 1;
        }
        let candidate = (margin, !limited, m.d(x, y), pair);
        let replace = match &best_margin {
            None => true,
            Some((bm, bp, bd, _)) => {
                if margin > bm + cfg.tol_eq {
                    true
                } else if (margin - bm).abs() <= cfg.tol_eq {
                    // tie: prefer probed pairs, then larger distance
                    (!limited && !bp) || (!limited == *bp && m.d(x, y) > *bd)
                } else {
                    false
                }
            }
        };
        if replace {
            best_margin = Some(candidate);
        }

        if metric_segment(m, x, y, cfg)?.len() <= 2 {
            diag.trivial_segment_pairs.push(pair);
        }
    }
    if let Some((margin, _, _, pair)) = best_margin {
        diag.max_z_margin = if margin.is_finite() {
            Some(margin)
        } else {
            None
        };
        diag.max_z_margin_pair = Some(pair);
    }
    Ok(diag)
}
