//! Lipschitz functions on finite spaces: exact norms with attaining pairs,
//! inf/sup extension envelopes, and the explicit constructions used by the
//! free-space analysis (the two-point quotient function `f_xy`, extensions
//! with a prescribed steep pair, peaking candidates, and averaging families).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::space::{FiniteMetricSpace, PairId, SpaceHandle};

/// A pair together with the signed difference quotient of a function there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeWitness {
    pub pair: PairId,
    pub slope: f64,
}

/// A real function on the points of a space, with its Lipschitz norm and an
/// attaining pair cached at construction.
///
/// Values are immutable after construction; the norm cache is eager, so the
/// type is safe to share across threads.
#[derive(Debug, Clone)]
pub struct LipschitzFunction {
    space: SpaceHandle,
    values: Vec<f64>,
    norm: f64,
    witness: Option<SlopeWitness>,
}

impl LipschitzFunction {
    pub fn new(space: SpaceHandle, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.n() {
            return Err(Error::ValueCountMismatch {
                got: values.len(),
                expected: space.n(),
            });
        }
        let (norm, witness) = compute_norm(&space, &values);
        Ok(LipschitzFunction {
            space,
            values,
            norm,
            witness,
        })
    }

    /// Builds the function point by point.
    pub fn from_fn(space: &SpaceHandle, f: impl Fn(usize) -> f64) -> Result<Self> {
        let values = (0..space.n()).map(f).collect();
        LipschitzFunction::new(Arc::clone(space), values)
    }

    /// The 1-Lipschitz distance function `d(., anchor)`.
    pub fn distance_to(space: &SpaceHandle, anchor: usize) -> Result<Self> {
        space.check_index(anchor)?;
        LipschitzFunction::from_fn(space, |i| space.d(i, anchor))
    }

    pub fn space(&self) -> &FiniteMetricSpace {
        &self.space
    }

    pub fn space_handle(&self) -> &SpaceHandle {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Cached Lipschitz norm (0 on a singleton space).
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// The norm together with its attaining pair. The witness is oriented so
    /// the slope is nonnegative, and ties are broken by the smallest
    /// canonical pair.
    pub fn lip_norm(&self) -> Result<(f64, SlopeWitness)> {
        match self.witness {
            Some(w) => Ok((self.norm, w)),
            None => Err(Error::SingletonSpace),
        }
    }

    /// Signed difference quotient `(f(x) - f(y)) / d(x,y)`.
    pub fn slope(&self, x: usize, y: usize) -> f64 {
        (self.values[x] - self.values[y]) / self.space.d(x, y)
    }

    /// Same function shifted so it vanishes at the base point.
    pub fn rebased(&self) -> Self {
        let shift = self.values[self.space.base()];
        let values = self.values.iter().map(|v| v - shift).collect();
        LipschitzFunction {
            space: Arc::clone(&self.space),
            values,
            norm: self.norm,
            witness: self.witness,
        }
    }

    pub fn is_base_normalized(&self, cfg: &Config) -> bool {
        self.values[self.space.base()].abs() <= cfg.eq_slack(self.norm * self.space.diameter())
    }

    /// Pointwise linear combination `a*self + b*other` on the same space.
    pub fn combine(&self, a: f64, other: &LipschitzFunction, b: f64) -> Result<Self> {
        if other.values.len() != self.values.len() {
            return Err(Error::ValueCountMismatch {
                got: other.values.len(),
                expected: self.values.len(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| a * u + b * v)
            .collect();
        LipschitzFunction::new(Arc::clone(&self.space), values)
    }
}

fn compute_norm(space: &FiniteMetricSpace, values: &[f64]) -> (f64, Option<SlopeWitness>) {
    let n = space.n();
    if n < 2 {
        return (0.0, None);
    }
    let mut best = 0.0_f64;
    let mut witness: Option<SlopeWitness> = None;
    for i in 0..n {
        for j in (i + 1)..n {
            let slope = (values[i] - values[j]) / space.d(i, j);
            let mag = slope.abs();
            // strict improvement keeps the lexicographically first maximizer
            if witness.is_none() || mag > best {
                best = mag;
                let pair = if slope >= 0.0 {
                    PairId::new(i, j).expect("i < j")
                } else {
                    PairId::new(j, i).expect("i < j")
                };
                witness = Some(SlopeWitness { pair, slope: mag });
            }
        }
    }
    (best, witness)
}

fn check_subset(m: &FiniteMetricSpace, subset: &[usize]) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::InvalidSubset("subset is empty".into()));
    }
    let mut seen = vec![false; m.n()];
    for &i in subset {
        m.check_index(i)?;
        if seen[i] {
            return Err(Error::InvalidSubset(format!("duplicate index {i}")));
        }
        seen[i] = true;
    }
    Ok(())
}

/// Verifies that `values` is `l`-Lipschitz on `subset`, reporting the worst
/// offending pair otherwise.
fn check_lipschitz_on_subset(
    m: &FiniteMetricSpace,
    subset: &[usize],
    values: &[f64],
    l: f64,
    cfg: &Config,
) -> Result<()> {
    let scale = 1.0 + l.abs() * m.diameter();
    let slack = cfg.eq_slack(scale);
    let mut worst: Option<(usize, usize, f64, f64)> = None;
    for a in 0..subset.len() {
        for b in (a + 1)..subset.len() {
            let (i, j) = (subset[a], subset[b]);
            let gap = (values[a] - values[b]).abs();
            let excess = gap - l * m.d(i, j);
            if excess > slack && worst.map_or(true, |w| excess > w.3) {
                worst = Some((i, j, gap / m.d(i, j), excess));
            }
        }
    }
    if let Some((i, j, slope, _)) = worst {
        return Err(Error::NotLipschitzOnSubset {
            constant: l,
            i,
            j,
            slope,
        });
    }
    Ok(())
}

/// Largest `l`-Lipschitz extension of `values` on `subset`:
/// the inf-envelope `u -> min over x in subset of g(x) + l * d(x,u)`.
///
/// The data must already be `l`-Lipschitz on the subset; the extension then
/// agrees with it there and has Lipschitz norm at most `l`.
pub fn mcshane_extend(
    space: &SpaceHandle,
    subset: &[usize],
    values: &[f64],
    l: f64,
    cfg: &Config,
) -> Result<LipschitzFunction> {
    check_subset(space, subset)?;
    if values.len() != subset.len() {
        return Err(Error::ValueCountMismatch {
            got: values.len(),
            expected: subset.len(),
        });
    }
    check_lipschitz_on_subset(space, subset, values, l, cfg)?;
    LipschitzFunction::from_fn(space, |u| {
        subset
            .iter()
            .zip(values)
            .map(|(&x, &g)| g + l * space.d(x, u))
            .fold(f64::INFINITY, f64::min)
    })
}

/// Smallest `l`-Lipschitz extension of `values` on `subset`:
/// the sup-envelope `u -> max over x in subset of g(x) - l * d(x,u)`.
pub fn whitney_extend(
    space: &SpaceHandle,
    subset: &[usize],
    values: &[f64],
    l: f64,
    cfg: &Config,
) -> Result<LipschitzFunction> {
    check_subset(space, subset)?;
    if values.len() != subset.len() {
        return Err(Error::ValueCountMismatch {
            got: values.len(),
            expected: subset.len(),
        });
    }
    check_lipschitz_on_subset(space, subset, values, l, cfg)?;
    LipschitzFunction::from_fn(space, |u| {
        subset
            .iter()
            .zip(values)
            .map(|(&x, &g)| g - l * space.d(x, u))
            .fold(f64::NEG_INFINITY, f64::max)
    })
}

/// Extends a 1-Lipschitz function on a subset to a `(1+eps)`-Lipschitz
/// function on the whole space that is steep across a prescribed pair
/// `(u, v)`: the result satisfies `f(u) - f(v) >= d(u,v)`.
///
/// Requires `u, v` outside the subset and the pair condition
/// `(d(x,y) + d(u,v)) / (1+eps) <= d(x,u) + d(y,v)` for all subset points
/// `x, y` (checked; the worst offending pair is reported). The values at `u`
/// and `v` are fixed first (inf over the subset at `u`, then sup over the
/// subset and `u` at `v`) and the result is completed by the inf-envelope.
pub fn daugavet_extension(
    space: &SpaceHandle,
    subset: &[usize],
    values: &[f64],
    u: usize,
    v: usize,
    eps: f64,
    cfg: &Config,
) -> Result<LipschitzFunction> {
    check_subset(space, subset)?;
    if values.len() != subset.len() {
        return Err(Error::ValueCountMismatch {
            got: values.len(),
            expected: subset.len(),
        });
    }
    space.check_pair(u, v)?;
    if !(eps > 0.0) {
        return Err(Error::EpsilonOutOfRange {
            eps,
            max: f64::INFINITY,
        });
    }
    if subset.contains(&u) || subset.contains(&v) {
        return Err(Error::PointsInSubset { u, v });
    }
    check_lipschitz_on_subset(space, subset, values, 1.0, cfg)?;

    // pair condition, exhaustively over the subset square
    let duv = space.d(u, v);
    let slack = cfg.eq_slack(1.0 + space.diameter());
    let mut worst: Option<(usize, usize, f64, f64)> = None;
    for &x in subset {
        for &y in subset {
            let lhs = (space.d(x, y) + duv) / (1.0 + eps);
            let rhs = space.d(x, u) + space.d(y, v);
            if lhs > rhs + slack && worst.map_or(true, |w| lhs - rhs > w.2 - w.3) {
                worst = Some((x, y, lhs, rhs));
            }
        }
    }
    if let Some((x, y, lhs, rhs)) = worst {
        return Err(Error::PairConditionViolated { x, y, lhs, rhs });
    }

    let l = 1.0 + eps;
    let fu = subset
        .iter()
        .zip(values)
        .map(|(&x, &g)| g + l * space.d(x, u))
        .fold(f64::INFINITY, f64::min);
    let fv = subset
        .iter()
        .zip(values)
        .map(|(&x, &g)| g - l * space.d(x, v))
        .chain(std::iter::once(fu - l * space.d(u, v)))
        .fold(f64::NEG_INFINITY, f64::max);

    let mut ext_subset: Vec<usize> = subset.to_vec();
    ext_subset.push(u);
    ext_subset.push(v);
    let mut ext_values: Vec<f64> = values.to_vec();
    ext_values.push(fu);
    ext_values.push(fv);
    mcshane_extend(space, &ext_subset, &ext_values, l, cfg)
}

/// The two-point quotient function
/// `f_xy(t) = (d(x,y)/2) * (d(t,y) - d(t,x)) / (d(t,y) + d(t,x))`.
///
/// Takes the values `d(x,y)/2` at `x` and `-d(x,y)/2` at `y`, so its slope
/// across the pair is exactly 1, and its Lipschitz norm never exceeds 1.
pub fn f_xy(space: &SpaceHandle, x: usize, y: usize) -> Result<LipschitzFunction> {
    space.check_pair(x, y)?;
    let half = 0.5 * space.d(x, y);
    LipschitzFunction::from_fn(space, |t| {
        let dty = space.d(t, y);
        let dtx = space.d(t, x);
        half * (dty - dtx) / (dty + dtx)
    })
}

/// Result of `peaking_candidate`: the candidate function together with the
/// points where neither branch of the piecewise construction applied and the
/// value was filled with 0.
#[derive(Debug, Clone)]
pub struct PeakingCandidate {
    pub g: LipschitzFunction,
    /// Points where the piecewise construction was undefined. Nonempty fill
    /// signals that the pair does not satisfy the construction's hypothesis.
    pub zero_filled: Vec<usize>,
}

/// Builds the norm-one candidate `g = (f + f_xy) / 2` whose slope approaches
/// 1 only near the pair `(x, y)`, where `f` is the piecewise cone function
///
/// ```text
/// f(z) =  max(d(x,y)/2 - (1-eps1) d(z,x), 0)   if d(z,y) >= d(z,x) and
///                                                 d(z,y) + (1-2 eps1) d(z,x) >= d(x,y)
/// f(z) = -max(d(x,y)/2 - (1-eps1) d(z,y), 0)   if d(z,x) >= d(z,y) and
///                                                 d(z,x) + (1-2 eps1) d(z,y) >= d(x,y)
/// ```
///
/// Points covered by neither branch get the value 0 and are flagged. A
/// resulting norm above 1 is reported as `NormOverflow`; it indicates the
/// branch conditions failed on an input whose pair admits near-between
/// witnesses.
pub fn peaking_candidate(
    space: &SpaceHandle,
    x: usize,
    y: usize,
    eps1: f64,
    cfg: &Config,
) -> Result<PeakingCandidate> {
    space.check_pair(x, y)?;
    if !(eps1 > 0.0 && eps1 < 0.5) {
        return Err(Error::EpsilonOutOfRange {
            eps: eps1,
            max: 0.5,
        });
    }
    let dxy = space.d(x, y);
    let slack = cfg.eq_slack(1.0 + space.diameter());
    let mut zero_filled = Vec::new();
    let mut f_values = Vec::with_capacity(space.n());
    for z in 0..space.n() {
        let dzx = space.d(z, x);
        let dzy = space.d(z, y);
        let branch_pos = dzy >= dzx - slack && dzy + (1.0 - 2.0 * eps1) * dzx >= dxy - slack;
        let branch_neg = dzx >= dzy - slack && dzx + (1.0 - 2.0 * eps1) * dzy >= dxy - slack;
        let value = if branch_pos {
            (0.5 * dxy - (1.0 - eps1) * dzx).max(0.0)
        } else if branch_neg {
            -(0.5 * dxy - (1.0 - eps1) * dzy).max(0.0)
        } else {
            zero_filled.push(z);
            0.0
        };
        f_values.push(value);
    }
    let f = LipschitzFunction::new(Arc::clone(space), f_values)?;
    let fxy = f_xy(space, x, y)?;
    let g = f.combine(0.5, &fxy, 0.5)?;
    if g.norm() > 1.0 + cfg.tol_eq {
        return Err(Error::NormOverflow { norm: g.norm() });
    }
    Ok(PeakingCandidate { g, zero_filled })
}

/// Result of `averaging_family`.
#[derive(Debug, Clone)]
pub struct AveragingFamily {
    pub functions: Vec<LipschitzFunction>,
    /// Lipschitz norm of `g - (1/n) sum f_i`.
    pub defect: f64,
    /// The guaranteed ceiling `(4 + 2 eps) / n`.
    pub bound: f64,
    /// Largest number of family members that disagree with `g` at a single
    /// point. At most 1 when the balls are disjoint.
    pub max_disagreements_per_point: usize,
}

/// Builds the family `f_1, ..., f_n` with `f_i = f` on the pair `(x_i, y_i)`
/// and `f_i = g` outside the ball `B(x_i, radius)`, each completed by the
/// `(1+eps)`-Lipschitz inf-envelope, and measures how far the average sits
/// from `g`.
///
/// The balls must be pairwise disjoint and each must contain its `y_i`; each
/// prescription must be `(1+eps)`-Lipschitz on its domain. Both conditions
/// are checked. The defect always satisfies `(4 + 2 eps) / n` up to
/// tolerance because at every point at most one member differs from `g`.
pub fn averaging_family(
    f: &LipschitzFunction,
    g: &LipschitzFunction,
    pairs: &[PairId],
    radius: f64,
    eps: f64,
    cfg: &Config,
) -> Result<AveragingFamily> {
    let space = f.space_handle();
    if g.values().len() != space.n() {
        return Err(Error::ValueCountMismatch {
            got: g.values().len(),
            expected: space.n(),
        });
    }
    if pairs.is_empty() {
        return Err(Error::InvalidSubset("no pairs given".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::EpsilonOutOfRange {
            eps,
            max: f64::INFINITY,
        });
    }
    let n = space.n();
    let family = pairs.len();
    let l = 1.0 + eps;

    // ball membership per pair
    let mut in_ball = vec![vec![false; n]; family];
    for (i, pair) in pairs.iter().enumerate() {
        let (x_i, y_i) = (pair.x(), pair.y());
        space.check_pair(x_i, y_i)?;
        for z in 0..n {
            in_ball[i][z] = space.d(x_i, z) <= radius;
        }
        if !in_ball[i][y_i] {
            return Err(Error::WitnessOutsideBall { i, y: y_i });
        }
    }
    for i in 0..family {
        for j in (i + 1)..family {
            if let Some(witness) = (0..n).find(|&z| in_ball[i][z] && in_ball[j][z]) {
                return Err(Error::BallsOverlap { i, j, witness });
            }
        }
    }

    let mut functions = Vec::with_capacity(family);
    for (i, pair) in pairs.iter().enumerate() {
        let (x_i, y_i) = (pair.x(), pair.y());
        let mut subset = Vec::new();
        let mut values = Vec::new();
        subset.push(x_i);
        values.push(f.value(x_i));
        subset.push(y_i);
        values.push(f.value(y_i));
        for z in 0..n {
            if !in_ball[i][z] {
                subset.push(z);
                values.push(g.value(z));
            }
        }
        check_lipschitz_on_subset(space, &subset, &values, l, cfg).map_err(|err| match err {
            Error::NotLipschitzOnSubset {
                constant,
                i: a,
                j: b,
                slope,
            } => Error::PrescriptionNotLipschitz {
                index: i,
                constant,
                i: a,
                j: b,
                slope,
            },
            other => other,
        })?;
        functions.push(mcshane_extend(space, &subset, &values, l, cfg)?);
    }

    let inv = 1.0 / family as f64;
    let mut avg_diff = Vec::with_capacity(n);
    for z in 0..n {
        let mean: f64 = functions.iter().map(|fi| fi.value(z)).sum::<f64>() * inv;
        avg_diff.push(g.value(z) - mean);
    }
    let defect = LipschitzFunction::new(Arc::clone(space), avg_diff)?.norm();

    let slack = cfg.eq_slack(1.0 + g.norm() * space.diameter());
    let mut max_disagreements = 0usize;
    for z in 0..n {
        let count = functions
            .iter()
            .filter(|fi| (fi.value(z) - g.value(z)).abs() > slack)
            .count();
        max_disagreements = max_disagreements.max(count);
    }

    Ok(AveragingFamily {
        functions,
        defect,
        bound: (4.0 + 2.0 * eps) / family as f64,
        max_disagreements_per_point: max_disagreements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::FiniteMetricSpace;

    fn cfg() -> Config {
        Config::default()
    }

    fn line_space(points: &[f64]) -> SpaceHandle {
        let matrix = points
            .iter()
            .map(|&a| points.iter().map(|&b| (a - b).abs()).collect())
            .collect();
        Arc::new(FiniteMetricSpace::validate(matrix, 0, &cfg()).unwrap())
    }

    #[test]
    fn norm_of_distance_to_base_is_one() {
        let m = line_space(&[0.0, 0.3, 1.0]);
        let f = LipschitzFunction::distance_to(&m, 0).unwrap();
        let (norm, witness) = f.lip_norm().unwrap();
        assert!((norm - 1.0).abs() < 1e-12);
        let (a, b) = (witness.pair.x(), witness.pair.y());
        assert!(a == 0 || b == 0);
    }

    #[test]
    fn norm_of_constant_is_zero() {
        let m = line_space(&[0.0, 1.0, 2.5]);
        let f = LipschitzFunction::from_fn(&m, |_| 7.0).unwrap();
        assert_eq!(f.norm(), 0.0);
    }

    #[test]
    fn norm_witness_ties_break_lexicographically() {
        // identity on {0, 1, 3}: slope 1 at every pair, first pair wins
        let m = line_space(&[0.0, 1.0, 3.0]);
        let f = LipschitzFunction::from_fn(&m, |i| [0.0, 1.0, 3.0][i]).unwrap();
        let (norm, witness) = f.lip_norm().unwrap();
        assert!((norm - 1.0).abs() < 1e-12);
        assert_eq!(witness.pair.canonical(), (0, 1));
        assert!(witness.slope >= 0.0);
    }

    #[test]
    fn singleton_norm_errors() {
        let m = Arc::new(FiniteMetricSpace::validate(vec![vec![0.0]], 0, &cfg()).unwrap());
        let f = LipschitzFunction::from_fn(&m, |_| 0.0).unwrap();
        assert!(matches!(f.lip_norm(), Err(Error::SingletonSpace)));
    }

    #[test]
    fn mcshane_is_identity_on_full_subset() {
        let m = line_space(&[0.0, 0.5, 1.0]);
        let values = vec![0.1, 0.4, 0.2];
        let subset = vec![0, 1, 2];
        let f = mcshane_extend(&m, &subset, &values, 1.0, &cfg()).unwrap();
        for (i, &v) in values.iter().enumerate() {
            assert!((f.value(i) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn envelopes_agree_on_a_geodesic_gap() {
        let m = line_space(&[0.0, 1.0, 2.0]);
        let subset = vec![0, 2];
        let values = vec![0.0, 2.0];
        let lower = whitney_extend(&m, &subset, &values, 1.0, &cfg()).unwrap();
        let upper = mcshane_extend(&m, &subset, &values, 1.0, &cfg()).unwrap();
        assert!((lower.value(1) - 1.0).abs() < 1e-12);
        assert!((upper.value(1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_point_envelopes_are_distance_cones() {
        let m = line_space(&[0.0, 0.7, 1.5]);
        let upper = mcshane_extend(&m, &[0], &[0.0], 1.0, &cfg()).unwrap();
        let lower = whitney_extend(&m, &[0], &[0.0], 1.0, &cfg()).unwrap();
        for i in 0..3 {
            assert!((upper.value(i) - m.d(i, 0)).abs() < 1e-12);
            assert!((lower.value(i) + m.d(i, 0)).abs() < 1e-12);
        }
    }

    #[test]
    fn infeasible_subset_data_is_rejected() {
        let m = line_space(&[0.0, 0.5, 1.0]);
        let err = mcshane_extend(&m, &[0, 1], &[0.0, 2.0], 1.0, &cfg()).unwrap_err();
        assert!(matches!(err, Error::NotLipschitzOnSubset { .. }));
    }

    #[test]
    fn daugavet_extension_from_base_only() {
        let m = line_space(&[0.0, 0.25, 0.5, 0.75, 1.0]);
        let ext = daugavet_extension(&m, &[0], &[0.0], 2, 3, 0.1, &cfg()).unwrap();
        assert!(ext.value(2) - ext.value(3) >= m.d(2, 3) - 1e-9);
        assert!(ext.norm() <= 1.1 * (1.0 + 1e-9));
        assert!((ext.value(0) - 0.0).abs() < 1e-12);
    }

    #[test]
    fn daugavet_extension_rejects_pair_condition_failure() {
        // two intervals at mesh 1/2: subset midpoints, steep pair across the gap
        let m = line_space(&[0.0, 0.5, 1.0, 2.0, 2.5, 3.0]);
        let err = daugavet_extension(&m, &[1, 4], &[0.0, 0.0], 2, 3, 0.1, &cfg()).unwrap_err();
        assert!(matches!(err, Error::PairConditionViolated { .. }));
    }

    #[test]
    fn daugavet_extension_rejects_points_in_subset() {
        let m = line_space(&[0.0, 0.5, 1.0]);
        let err = daugavet_extension(&m, &[0, 1], &[0.0, 0.5], 1, 2, 0.1, &cfg()).unwrap_err();
        assert!(matches!(err, Error::PointsInSubset { .. }));
    }

    #[test]
    fn f_xy_endpoint_values_and_norm() {
        let m = line_space(&[0.0, 0.5, 1.0, 2.0, 2.5, 3.0]);
        let f = f_xy(&m, 2, 3).unwrap();
        let d = m.d(2, 3);
        assert!((f.value(2) - 0.5 * d).abs() < 1e-12);
        assert!((f.value(3) + 0.5 * d).abs() < 1e-12);
        assert!((f.slope(2, 3) - 1.0).abs() < 1e-12);
        assert!(f.norm() <= 1.0 + 1e-12);
        // equidistant points sit on the zero level
        let tri = Arc::new(
            FiniteMetricSpace::validate(
                vec![
                    vec![0.0, 2.0, 1.0],
                    vec![2.0, 0.0, 1.0],
                    vec![1.0, 1.0, 0.0],
                ],
                0,
                &cfg(),
            )
            .unwrap(),
        );
        let f = f_xy(&tri, 0, 1).unwrap();
        assert!(f.value(2).abs() < 1e-12);
    }

    #[test]
    fn f_xy_slope_bound_holds_on_a_crooked_space() {
        let matrix = vec![
            vec![0.0, 1.0, 1.5, 0.9],
            vec![1.0, 0.0, 0.8, 1.7],
            vec![1.5, 0.8, 0.0, 1.2],
            vec![0.9, 1.7, 1.2, 0.0],
        ];
        let m = Arc::new(FiniteMetricSpace::validate(matrix, 0, &cfg()).unwrap());
        for x in 0..4 {
            for y in 0..4 {
                if x == y {
                    continue;
                }
                let f = f_xy(&m, x, y).unwrap();
                let dxy = m.d(x, y);
                for u in 0..4 {
                    for v in 0..4 {
                        if u == v {
                            continue;
                        }
                        let bound = dxy / (m.d(x, u) + m.d(u, y)).max(m.d(x, v) + m.d(v, y));
                        assert!(
                            f.slope(u, v) <= bound + 1e-9,
                            "slope bound fails at x={x} y={y} u={u} v={v}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn peaking_candidate_has_unit_slope_at_the_pair() {
        let m = line_space(&[0.0, 0.5, 1.0, 2.0, 2.5, 3.0]);
        let peak = peaking_candidate(&m, 2, 3, 0.1, &cfg()).unwrap();
        assert!((peak.g.slope(2, 3) - 1.0).abs() < 1e-9);
        assert!(peak.g.norm() <= 1.0 + 1e-9);
        assert!(peak.zero_filled.is_empty());
    }

    #[test]
    fn peaking_candidate_overflows_on_a_witnessed_pair() {
        // endpoints of a geodesic grid admit between-point witnesses, so the
        // branch conditions fail on the interior and the fill breaks the norm
        let m = line_space(&[0.0, 0.25, 0.5, 0.75, 1.0]);
        let result = peaking_candidate(&m, 0, 4, 0.1, &cfg());
        match result {
            Err(Error::NormOverflow { norm }) => assert!(norm > 1.0),
            Ok(peak) => panic!(
                "expected norm overflow, got norm {} with {} filled points",
                peak.g.norm(),
                peak.zero_filled.len()
            ),
            Err(other) => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn peaking_candidate_flags_uncovered_points() {
        // a near-midpoint z fails both branch conditions; the zero fill
        // keeps the norm at 1 and the point is reported
        let matrix = vec![
            vec![0.0, 2.0, 1.05, 3.0],
            vec![2.0, 0.0, 1.05, 3.0],
            vec![1.05, 1.05, 0.0, 3.0],
            vec![3.0, 3.0, 3.0, 0.0],
        ];
        let m = Arc::new(FiniteMetricSpace::validate(matrix, 0, &cfg()).unwrap());
        let peak = peaking_candidate(&m, 0, 1, 0.1, &cfg()).unwrap();
        assert_eq!(peak.zero_filled, vec![2]);
        assert!(peak.g.norm() <= 1.0 + 1e-9);
    }

    #[test]
    fn averaging_family_single_ball() {
        let m = line_space(&[0.0, 0.1, 0.2, 0.5, 0.8, 1.0]);
        let f = LipschitzFunction::distance_to(&m, 0).unwrap();
        let g = LipschitzFunction::from_fn(&m, |_| 0.0).unwrap();
        let pair = PairId::new(1, 2).unwrap();
        let fam = averaging_family(&f, &g, &[pair], 0.15, 0.5, &cfg()).unwrap();
        assert_eq!(fam.functions.len(), 1);
        assert!(fam.defect <= fam.bound + 1e-9);
        assert!(fam.max_disagreements_per_point <= 1);
        // the prescribed pair keeps the slope of f
        let fi = &fam.functions[0];
        assert!((fi.slope(1, 2) - f.slope(1, 2)).abs() < 1e-12);
    }

    #[test]
    fn averaging_family_rejects_overlapping_balls() {
        let m = line_space(&[0.0, 0.1, 0.2, 0.3, 0.4, 1.0]);
        let f = LipschitzFunction::distance_to(&m, 0).unwrap();
        let g = LipschitzFunction::from_fn(&m, |_| 0.0).unwrap();
        let pairs = vec![PairId::new(0, 1).unwrap(), PairId::new(2, 3).unwrap()];
        let err = averaging_family(&f, &g, &pairs, 0.25, 0.5, &cfg()).unwrap_err();
        assert!(matches!(err, Error::BallsOverlap { .. }));
    }

    #[test]
    fn rebased_vanishes_at_base() {
        let m = line_space(&[0.0, 1.0, 3.0]);
        let f = f_xy(&m, 1, 2).unwrap();
        let r = f.rebased();
        assert_eq!(r.value(0), 0.0);
        assert!((r.norm() - f.norm()).abs() < 1e-12);
        assert!(r.is_base_normalized(&cfg()));
    }
}
