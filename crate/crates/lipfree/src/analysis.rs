//! Classification machinery for molecule pairs and Daugavet-type
//! diagnostics on finite samples.
//!
//! A pair of points either admits arbitrarily good near-between witnesses
//! (its margin vanishes and its metric segment is nontrivial) or its
//! molecule is a strongly exposed candidate. Three independent criteria
//! decide this: the property-(Z) margin, a two-sided Gromov-product
//! infimum, and segment cardinality. `classify_pair` evaluates all three and
//! hard-errors if they ever disagree.
//!
//! All searches are exact and exhaustive. Absence results are evidence at
//! the sample's resolution, never proofs about an underlying continuum; the
//! `scale_limited` flag marks pairs the sample cannot probe below their own
//! length, where a candidate verdict is a discretization artifact rather
//! than geometry.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::lipschitz::LipschitzFunction;
use crate::space::{
    gromov_product, is_scale_limited, metric_segment, pair_z_margin, witness_scale,
    FiniteMetricSpace, PairId,
};

/// Verdict for a single pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    /// No vanishing-margin witness exists: the molecule is a strongly
    /// exposed candidate of the sample.
    StronglyExposedCandidate,
    /// Some third point witnesses the pair with a vanishing margin.
    ZWitnessed,
}

/// Full classification record for one pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairClassification {
    pub pair: PairId,
    /// `min over z of (x,y)_z / min(d(x,z), d(y,z))`; infinite on a
    /// two-point space.
    pub z_margin: f64,
    /// Gromov-product infimum excluding a half-distance ball around `y`.
    pub gromov_inf_xy: f64,
    /// Same infimum with the roles of `x` and `y` exchanged.
    pub gromov_inf_yx: f64,
    pub segment_size: usize,
    /// Finest relative scale at which the sample probes the pair.
    pub witness_scale: f64,
    /// True when no third point is strictly closer to an endpoint than the
    /// endpoints are to each other.
    pub scale_limited: bool,
    pub verdict: Verdict,
}

/// Infimum over `u` outside `{x}` and outside the open ball `B(y, eps_ball)`
/// of the ratio `(y,x)_u / (u,y)_x`, with the convention that a vanishing
/// denominator yields `+inf`. Returns `+inf` when the index set is empty.
///
/// The open-ball exclusion keeps exact metric midpoints (which sit at
/// distance `d(x,y)/2` from both endpoints) inside the index set, so the
/// criterion matches segment nontriviality exactly on finite spaces.
pub fn gromov_infimum(
    m: &FiniteMetricSpace,
    x: usize,
    y: usize,
    eps_ball: f64,
    cfg: &Config,
) -> Result<f64> {
    m.check_pair(x, y)?;
    if !(eps_ball > 0.0) {
        return Err(Error::EpsilonOutOfRange {
            eps: eps_ball,
            max: f64::INFINITY,
        });
    }
    let zero = cfg.eq_slack(m.diameter());
    let mut best = f64::INFINITY;
    for u in 0..m.n() {
        if u == x || m.d(u, y) < eps_ball {
            continue;
        }
        let num = gromov_product(m, y, x, u)?;
        let den = gromov_product(m, u, y, x)?;
        let ratio = if den <= zero {
            f64::INFINITY
        } else {
            num / den
        };
        if ratio < best {
            best = ratio;
        }
    }
    Ok(best)
}

/// Classifies one pair by all three criteria and checks their agreement.
///
/// The Gromov infima run at `eps_ball = d(x,y)/2` in both orientations; the
/// verdict is taken from the margin. `CriteriaDisagreement` signals an
/// internal inconsistency and never fires on a valid space.
pub fn classify_pair(
    m: &FiniteMetricSpace,
    x: usize,
    y: usize,
    cfg: &Config,
) -> Result<PairClassification> {
    m.check_pair(x, y)?;
    let threshold = cfg.margin_threshold(m.diameter());
    let z_margin = pair_z_margin(m, x, y)?;
    let half = 0.5 * m.d(x, y);
    let gromov_inf_xy = gromov_infimum(m, x, y, half, cfg)?;
    let gromov_inf_yx = gromov_infimum(m, y, x, half, cfg)?;
    let segment_size = metric_segment(m, x, y, cfg)?.len();

    let by_margin = z_margin <= threshold;
    let by_infimum = gromov_inf_xy.min(gromov_inf_yx) <= threshold;
    let by_segment = segment_size > 2;
    if by_margin != by_infimum || by_margin != by_segment {
        return Err(Error::CriteriaDisagreement {
            x,
            y,
            z_margin,
            inf_xy: gromov_inf_xy,
            inf_yx: gromov_inf_yx,
            segment_size,
        });
    }

    Ok(PairClassification {
        pair: PairId::new(x, y)?,
        z_margin,
        gromov_inf_xy,
        gromov_inf_yx,
        segment_size,
        witness_scale: witness_scale(m, x, y)?,
        scale_limited: is_scale_limited(m, x, y, cfg)?,
        verdict: if by_margin {
            Verdict::ZWitnessed
        } else {
            Verdict::StronglyExposedCandidate
        },
    })
}

/// Aggregate view of a full classification run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationSummary {
    pub pair_count: usize,
    pub z_witnessed: usize,
    /// Raw candidate verdicts, including pairs at the sample's resolution.
    pub candidates: usize,
    /// Candidate pairs the sample cannot probe below their own scale.
    pub scale_limited_candidates: usize,
    /// Candidate pairs probed below their own scale: the pairs whose
    /// molecules the sample genuinely singles out as strongly exposed.
    pub exposed_pairs: Vec<PairId>,
    /// Largest finite margin and where it is attained; ties prefer exposed
    /// pairs, then larger pair distance.
    pub max_z_margin: Option<f64>,
    pub max_z_margin_pair: Option<PairId>,
}

/// Classification of every unordered pair plus the summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Classification {
    pub records: Vec<PairClassification>,
    pub summary: ClassificationSummary,
}

/// Classifies all unordered pairs of the space. Pair records are computed in
/// parallel and returned in index order.
pub fn classify_all(m: &FiniteMetricSpace, cfg: &Config) -> Result<Classification> {
    let pairs: Vec<(usize, usize)> = m.pairs().collect();
    let records: Vec<PairClassification> = pairs
        .par_iter()
        .map(|&(x, y)| classify_pair(m, x, y, cfg))
        .collect::<Result<Vec<_>>>()?;

    let mut summary = ClassificationSummary {
        pair_count: records.len(),
        z_witnessed: 0,
        candidates: 0,
        scale_limited_candidates: 0,
        exposed_pairs: Vec::new(),
        max_z_margin: None,
        max_z_margin_pair: None,
    };
    let mut best: Option<(f64, bool, f64, PairId)> = None;
    for rec in &records {
        match rec.verdict {
            Verdict::ZWitnessed => summary.z_witnessed += 1,
            Verdict::StronglyExposedCandidate => {
                summary.candidates += 1;
                if rec.scale_limited {
                    summary.scale_limited_candidates += 1;
                } else {
                    summary.exposed_pairs.push(rec.pair);
                }
            }
        }
        let (x, y) = rec.pair.canonical();
        let d = m.d(x, y);
        let exposed = !rec.scale_limited;
        let replace = match &best {
            None => true,
            Some((bm, bex, bd, _)) => {
                if rec.z_margin > bm + cfg.tol_eq {
                    true
                } else if (rec.z_margin - bm).abs() <= cfg.tol_eq {
                    (exposed && !bex) || (exposed == *bex && d > *bd)
                } else {
                    false
                }
            }
        };
        if replace {
            best = Some((rec.z_margin, exposed, d, rec.pair));
        }
    }
    if let Some((margin, _, _, pair)) = best {
        summary.max_z_margin = margin.is_finite().then_some(margin);
        summary.max_z_margin_pair = Some(pair);
    }
    Ok(Classification { records, summary })
}

/// Peaking quality of a candidate function at resolution `rho`: one minus
/// the largest absolute slope over pairs outside the `rho`-neighbourhood of
/// `(x, y)` and `(y, x)`. Positive values certify peaking at that
/// resolution; an empty exterior yields the sentinel 1.
pub fn peak_verify(
    g: &LipschitzFunction,
    x: usize,
    y: usize,
    rho: f64,
    cfg: &Config,
) -> Result<f64> {
    let m = g.space();
    m.check_pair(x, y)?;
    if g.norm() > 1.0 + cfg.tol_eq {
        return Err(Error::NotNormalized {
            what: "function",
            norm: g.norm(),
        });
    }
    let slope_xy = g.slope(x, y);
    if (slope_xy - 1.0).abs() > cfg.eq_slack(1.0) {
        return Err(Error::NotSlopeOneAtPair {
            x,
            y,
            slope: slope_xy,
        });
    }
    let mut max_outside: Option<f64> = None;
    for u in 0..m.n() {
        for v in (u + 1)..m.n() {
            let in_u = (m.d(u, x) < rho && m.d(v, y) < rho) || (m.d(u, y) < rho && m.d(v, x) < rho);
            if in_u {
                continue;
            }
            let s = g.slope(u, v).abs();
            if max_outside.map_or(true, |b| s > b) {
                max_outside = Some(s);
            }
        }
    }
    Ok(match max_outside {
        Some(s) => 1.0 - s,
        None => 1.0,
    })
}

/// Outcome of a steep-pair search constrained by a finite subset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DaugavetSearchResult {
    pub subset: Vec<usize>,
    /// The best pair when the search succeeds.
    pub pair: Option<PairId>,
    /// Best bottleneck ratio `min over subset pairs of
    /// (d(x,u) + d(y,v)) / (d(x,y) + d(u,v))` among slope-qualifying pairs;
    /// zero when no pair qualifies.
    pub achieved_margin: f64,
    /// Probe slope at the best pair.
    pub slope: f64,
}

impl DaugavetSearchResult {
    pub fn found(&self) -> bool {
        self.pair.is_some()
    }
}

/// Exhaustive search for an ordered pair `(u, v)` whose probe slope exceeds
/// `1 - eps` and which keeps `(d(x,y) + d(u,v)) / (1 + ...)` under control
/// against every subset pair: among qualifying pairs the bottleneck ratio is
/// maximized, and the result is reported found when that ratio reaches
/// `1 - eps`. Absence at a smaller margin is finite-scale evidence against
/// the extension property, never a proof.
pub fn find_daugavet_pair(
    g: &LipschitzFunction,
    subset: &[usize],
    eps: f64,
    cfg: &Config,
) -> Result<DaugavetSearchResult> {
    let m = g.space();
    if subset.is_empty() {
        return Err(Error::InvalidSubset("subset is empty".into()));
    }
    for &i in subset {
        m.check_index(i)?;
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::EpsilonOutOfRange { eps, max: 1.0 });
    }
    if (g.norm() - 1.0).abs() > cfg.tol_eq {
        return Err(Error::NotNormalized {
            what: "probe function",
            norm: g.norm(),
        });
    }

    let slope_floor = 1.0 - eps - cfg.tol_eq;
    let mut best: Option<(f64, PairId, f64)> = None;
    for u in 0..m.n() {
        for v in 0..m.n() {
            if u == v {
                continue;
            }
            let slope = g.slope(u, v);
            if slope <= slope_floor {
                continue;
            }
            let duv = m.d(u, v);
            let mut ratio = f64::INFINITY;
            for &x in subset {
                for &y in subset {
                    let r = (m.d(x, u) + m.d(y, v)) / (m.d(x, y) + duv);
                    if r < ratio {
                        ratio = r;
                    }
                }
            }
            if best.as_ref().map_or(true, |(b, _, _)| ratio > *b) {
                best = Some((ratio, PairId::new(u, v)?, slope));
            }
        }
    }

    Ok(match best {
        Some((ratio, pair, slope)) => DaugavetSearchResult {
            subset: subset.to_vec(),
            pair: (ratio >= 1.0 - eps - cfg.tol_eq).then_some(pair),
            achieved_margin: ratio,
            slope,
        },
        None => DaugavetSearchResult {
            subset: subset.to_vec(),
            pair: None,
            achieved_margin: 0.0,
            slope: 0.0,
        },
    })
}

/// Shortest distance among pairs whose slope exceeds `norm - eps`, with the
/// attaining pair. Infinite only when no pair qualifies, which cannot happen
/// for positive `eps` since the norm witness always does.
pub fn local_slope_search(
    f: &LipschitzFunction,
    eps: f64,
    _cfg: &Config,
) -> Result<(f64, Option<PairId>)> {
    let m = f.space();
    if m.n() < 2 {
        return Err(Error::SingletonSpace);
    }
    let floor = f.norm() - eps;
    let mut best: Option<(f64, PairId)> = None;
    for u in 0..m.n() {
        for v in (u + 1)..m.n() {
            let slope = f.slope(u, v).abs();
            if slope > floor {
                let d = m.d(u, v);
                if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                    best = Some((d, PairId::new(u, v)?));
                }
            }
        }
    }
    Ok(match best {
        Some((d, p)) => (d, Some(p)),
        None => (f64::INFINITY, None),
    })
}

/// Outcome of the contraction experiment around a steep pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionOutcome {
    /// Qualifying pair with the smallest relative distance, if any qualifies.
    pub pair: Option<PairId>,
    /// Smallest `d(u,v) / d(x,y)` among qualifying pairs; infinite if none.
    pub best_ratio: f64,
    /// The contraction ceiling `eps / (1 - eps)^2`.
    pub bound: f64,
    /// Whether some qualifying pair beats the ceiling.
    pub success: bool,
}

/// Searches for a pair `(u, v)` with slope above `(1 - eps) * norm` and
/// distance below `eps / (1-eps)^2` times `d(x,y)`. Requires
/// `0 < eps < 1/4` and that the pair `(x, y)` itself is steep enough.
/// Meaningful as a diagnostic on fine samples of length-like spaces.
pub fn lemalocal_experiment(
    f: &LipschitzFunction,
    x: usize,
    y: usize,
    eps: f64,
    cfg: &Config,
) -> Result<ContractionOutcome> {
    let m = f.space();
    m.check_pair(x, y)?;
    if !(eps > 0.0 && eps < 0.25) {
        return Err(Error::EpsilonOutOfRange { eps, max: 0.25 });
    }
    let required = (1.0 - eps) * f.norm();
    let slope_xy = f.slope(x, y);
    if slope_xy <= required - cfg.tol_eq {
        return Err(Error::PreconditionSlope {
            slope: slope_xy,
            required,
        });
    }
    let dxy = m.d(x, y);
    let bound = eps / ((1.0 - eps) * (1.0 - eps));
    let mut best: Option<(f64, PairId)> = None;
    for u in 0..m.n() {
        for v in (u + 1)..m.n() {
            let slope = f.slope(u, v).abs();
            if slope > required {
                let ratio = m.d(u, v) / dxy;
                if best.as_ref().map_or(true, |(br, _)| ratio < *br) {
                    best = Some((ratio, PairId::new(u, v)?));
                }
            }
        }
    }
    Ok(match best {
        Some((ratio, pair)) => ContractionOutcome {
            pair: Some(pair),
            best_ratio: ratio,
            bound,
            success: ratio < bound,
        },
        None => ContractionOutcome {
            pair: None,
            best_ratio: f64::INFINITY,
            bound,
            success: false,
        },
    })
}

/// Points whose `delta`-ball contains a pair with slope above `norm - eps`.
///
/// `delta` must be at least the smallest positive distance of the sample. A
/// zero-norm function yields the empty set by convention. On refining
/// samples of a length-like space the cardinality grows; at fixed size it is
/// a diagnostic only.
pub fn spreading_local_set(
    f: &LipschitzFunction,
    eps: f64,
    delta: f64,
    cfg: &Config,
) -> Result<Vec<usize>> {
    let m = f.space();
    if m.n() < 2 {
        return Err(Error::SingletonSpace);
    }
    let mesh = m.min_positive_distance();
    if delta < mesh - cfg.tol_eq {
        return Err(Error::ScaleBelowMesh { scale: delta, mesh });
    }
    if f.norm() <= cfg.tol_eq {
        return Ok(Vec::new());
    }
    let floor = f.norm() - eps;
    let ball_bound = delta + cfg.eq_slack(m.diameter());
    let mut out = Vec::new();
    for center in 0..m.n() {
        let members: Vec<usize> = (0..m.n())
            .filter(|&z| m.d(center, z) <= ball_bound)
            .collect();
        let mut qualifies = false;
        'outer: for (a, &u) in members.iter().enumerate() {
            for &v in members.iter().skip(a + 1) {
                if f.slope(u, v).abs() > floor {
                    qualifies = true;
                    break 'outer;
                }
            }
        }
        if qualifies {
            out.push(center);
        }
    }
    Ok(out)
}
