//! Deterministic space builders: interval and circle grids, the two-interval
//! compact with a gap, star-shaped tree samples, explicit point clouds, and
//! seeded random spaces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::space::FiniteMetricSpace;

/// Norm used to turn coordinates into distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmbientNorm {
    Euclidean,
    Sup,
    Taxicab,
}

impl AmbientNorm {
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            AmbientNorm::Euclidean => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            AmbientNorm::Sup => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
            AmbientNorm::Taxicab => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

/// Declarative description of a gallery space; building the same spec twice
/// yields bit-identical matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpaceSpec {
    /// `n` evenly spaced points on `[0, 1]`.
    Interval { n: usize },
    /// `n` evenly spaced points on a circle, geodesic (arc-length) distance
    /// by default, chordal on request.
    Circle {
        n: usize,
        circumference: f64,
        chordal: bool,
    },
    /// `[0, 1] and [2, 3]` sampled at the given mesh; the gap pair sits at
    /// the inner endpoints.
    TwoIntervals { mesh: f64 },
    /// A star-shaped tree: `legs` arms of `points_per_leg` points each plus
    /// the center, path metric along the arms.
    RTreeStar {
        legs: usize,
        points_per_leg: usize,
        leg_length: f64,
    },
    /// Explicit coordinates under a chosen norm.
    EuclideanPoints {
        points: Vec<Vec<f64>>,
        norm: AmbientNorm,
    },
    /// Seeded random space: either a point cloud in the unit cube, or a
    /// random symmetric matrix forced into a metric by shortest-path
    /// closure.
    Random {
        n: usize,
        seed: u64,
        dim: usize,
        norm: AmbientNorm,
        closure: bool,
    },
}

impl SpaceSpec {
    /// Short deterministic name used in reports and file metadata.
    pub fn name(&self) -> String {
        match self {
            SpaceSpec::Interval { n } => format!("interval_n{n}"),
            SpaceSpec::Circle { n, chordal, .. } => {
                format!("circle_n{n}{}", if *chordal { "_chordal" } else { "" })
            }
            SpaceSpec::TwoIntervals { mesh } => format!("two_intervals_mesh{mesh}"),
            SpaceSpec::RTreeStar {
                legs,
                points_per_leg,
                ..
            } => format!("r_tree_star_{legs}x{points_per_leg}"),
            SpaceSpec::EuclideanPoints { points, .. } => {
                format!("euclidean_points_n{}", points.len())
            }
            SpaceSpec::Random {
                n, seed, closure, ..
            } => format!(
                "random_n{n}_seed{seed}{}",
                if *closure { "_closure" } else { "" }
            ),
        }
    }
}

/// Default circumference for circle grids.
pub const DEFAULT_CIRCUMFERENCE: f64 = std::f64::consts::TAU;

/// Builds and validates the space described by `spec`. Deterministic for a
/// fixed spec, including the seed of random kinds.
pub fn build(spec: &SpaceSpec, cfg: &Config) -> Result<FiniteMetricSpace> {
    match spec {
        SpaceSpec::Interval { n } => build_interval(*n, cfg),
        SpaceSpec::Circle {
            n,
            circumference,
            chordal,
        } => build_circle(*n, *circumference, *chordal, cfg),
        SpaceSpec::TwoIntervals { mesh } => build_two_intervals(*mesh, cfg),
        SpaceSpec::RTreeStar {
            legs,
            points_per_leg,
            leg_length,
        } => build_r_tree_star(*legs, *points_per_leg, *leg_length, cfg),
        SpaceSpec::EuclideanPoints { points, norm } => build_points(points, *norm, cfg),
        SpaceSpec::Random {
            n,
            seed,
            dim,
            norm,
            closure,
        } => {
            if *closure {
                build_random_closure(*n, *seed, cfg)
            } else {
                build_random_points(*n, *seed, *dim, *norm, cfg)
            }
        }
    }
}

fn build_interval(n: usize, cfg: &Config) -> Result<FiniteMetricSpace> {
    if n == 0 {
        return Err(Error::BadSpec("interval needs at least one point".into()));
    }
    let coords: Vec<f64> = if n == 1 {
        vec![0.0]
    } else {
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    };
    from_line(&coords, cfg)
}

fn build_circle(
    n: usize,
    circumference: f64,
    chordal: bool,
    cfg: &Config,
) -> Result<FiniteMetricSpace> {
    if n < 3 {
        return Err(Error::BadSpec("circle needs at least three points".into()));
    }
    if !(circumference > 0.0) {
        return Err(Error::BadSpec("circumference must be positive".into()));
    }
    let step = circumference / n as f64;
    let radius = circumference / std::f64::consts::TAU;
    let matrix: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let k = i.abs_diff(j).min(n - i.abs_diff(j));
                    if chordal {
                        2.0 * radius * (std::f64::consts::PI * k as f64 / n as f64).sin()
                    } else {
                        k as f64 * step
                    }
                })
                .collect()
        })
        .collect();
    let coords = (0..n)
        .map(|i| {
            let angle = std::f64::consts::TAU * i as f64 / n as f64;
            vec![radius * angle.cos(), radius * angle.sin()]
        })
        .collect();
    FiniteMetricSpace::validate(matrix, 0, cfg)?.with_coords(coords)
}

fn build_two_intervals(mesh: f64, cfg: &Config) -> Result<FiniteMetricSpace> {
    if !(mesh > 0.0 && mesh <= 1.0) {
        return Err(Error::BadSpec("mesh must lie in (0, 1]".into()));
    }
    let m = (1.0 / mesh).round();
    if (m * mesh - 1.0).abs() > 1e-9 {
        return Err(Error::BadSpec("mesh must divide the unit interval".into()));
    }
    let m = m as usize;
    let mut coords: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
    coords.extend((0..=m).map(|i| 2.0 + i as f64 / m as f64));
    from_line(&coords, cfg)
}

/// Index of the inner-left endpoint (the point at 1) of a two-interval
/// sample at the given mesh; the gap partner sits at the next index.
pub fn two_intervals_gap_pair(mesh: f64) -> Result<(usize, usize)> {
    let m = (1.0 / mesh).round() as usize;
    Ok((m, m + 1))
}

fn build_r_tree_star(
    legs: usize,
    points_per_leg: usize,
    leg_length: f64,
    cfg: &Config,
) -> Result<FiniteMetricSpace> {
    if legs < 2 || points_per_leg == 0 {
        return Err(Error::BadSpec(
            "star tree needs at least two legs with one point each".into(),
        ));
    }
    if !(leg_length > 0.0) {
        return Err(Error::BadSpec("leg length must be positive".into()));
    }
    // point 0 is the center; leg l occupies indices 1 + l*points_per_leg ..
    let n = 1 + legs * points_per_leg;
    let arm = |idx: usize| -> (usize, f64) {
        // (leg, distance from center); center is leg usize::MAX
        if idx == 0 {
            (usize::MAX, 0.0)
        } else {
            let leg = (idx - 1) / points_per_leg;
            let pos = (idx - 1) % points_per_leg + 1;
            (leg, pos as f64 * leg_length / points_per_leg as f64)
        }
    };
    let matrix: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let (li, ai) = arm(i);
                    let (lj, aj) = arm(j);
                    if li == lj {
                        (ai - aj).abs()
                    } else {
                        ai + aj
                    }
                })
                .collect()
        })
        .collect();
    let labels = (0..n)
        .map(|i| {
            let (leg, a) = arm(i);
            if i == 0 {
                "center".to_string()
            } else {
                format!("leg{leg}+{a:.6}")
            }
        })
        .collect();
    FiniteMetricSpace::validate(matrix, 0, cfg)?.with_labels(labels)
}

fn build_points(points: &[Vec<f64>], norm: AmbientNorm, cfg: &Config) -> Result<FiniteMetricSpace> {
    if points.is_empty() {
        return Err(Error::BadSpec("no points given".into()));
    }
    let dim = points[0].len();
    if dim == 0 || points.iter().any(|p| p.len() != dim) {
        return Err(Error::BadSpec(
            "points must share a positive dimension".into(),
        ));
    }
    let matrix = points
        .iter()
        .map(|a| points.iter().map(|b| norm.distance(a, b)).collect())
        .collect();
    FiniteMetricSpace::validate(matrix, 0, cfg)?.with_coords(points.to_vec())
}

fn build_random_points(
    n: usize,
    seed: u64,
    dim: usize,
    norm: AmbientNorm,
    cfg: &Config,
) -> Result<FiniteMetricSpace> {
    if n == 0 || dim == 0 {
        return Err(Error::BadSpec("need n >= 1 and dim >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // redraw on (vanishingly unlikely) near-duplicates
    for _attempt in 0..16 {
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let distinct =
            (0..n).all(|i| ((i + 1)..n).all(|j| norm.distance(&points[i], &points[j]) > 1e-9));
        if distinct {
            return build_points(&points, norm, cfg);
        }
    }
    Err(Error::BadSpec("could not draw distinct points".into()))
}

fn build_random_closure(n: usize, seed: u64, cfg: &Config) -> Result<FiniteMetricSpace> {
    if n == 0 {
        return Err(Error::BadSpec("need n >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = vec![0.0_f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let w = rng.gen_range(0.5..1.5);
            d[i * n + j] = w;
            d[j * n + i] = w;
        }
    }
    // Floyd-Warshall closure, then repair sweeps until the stored matrix
    // satisfies every triangle exactly (floating-point min-plus fixpoint)
    loop {
        let mut changed = false;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = d[i * n + k] + d[k * n + j];
                    if via < d[i * n + j] {
                        d[i * n + j] = via;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let matrix = (0..n).map(|i| d[i * n..(i + 1) * n].to_vec()).collect();
    FiniteMetricSpace::validate(matrix, 0, cfg)
}

fn from_line(coords: &[f64], cfg: &Config) -> Result<FiniteMetricSpace> {
    let matrix = coords
        .iter()
        .map(|&a| coords.iter().map(|&b| (a - b).abs()).collect())
        .collect();
    FiniteMetricSpace::validate(matrix, 0, cfg)?
        .with_coords(coords.iter().map(|&c| vec![c]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> Config {
        Config::default()
    }

    #[test]
    fn interval_five_points() {
        let m = build(&SpaceSpec::Interval { n: 5 }, &cfg()).unwrap();
        assert_eq!(m.n(), 5);
        for i in 0..5 {
            for j in 0..5 {
                let expected = (i as f64 - j as f64).abs() / 4.0;
                assert!((m.d(i, j) - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn circle_four_points_antipodal_distance() {
        let m = build(
            &SpaceSpec::Circle {
                n: 4,
                circumference: 4.0,
                chordal: false,
            },
            &cfg(),
        )
        .unwrap();
        assert_eq!(m.d(0, 2), 2.0);
        assert_eq!(m.d(0, 1), 1.0);
        assert_eq!(m.d(1, 3), 2.0);
    }

    #[test]
    fn chordal_circle_differs_from_geodesic() {
        let geo = build(
            &SpaceSpec::Circle {
                n: 8,
                circumference: DEFAULT_CIRCUMFERENCE,
                chordal: false,
            },
            &cfg(),
        )
        .unwrap();
        let chord = build(
            &SpaceSpec::Circle {
                n: 8,
                circumference: DEFAULT_CIRCUMFERENCE,
                chordal: true,
            },
            &cfg(),
        )
        .unwrap();
        assert!(chord.d(0, 4) < geo.d(0, 4));
        // chordal antipodal distance is the diameter 2R
        assert!((chord.d(0, 4) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_intervals_quarter_mesh() {
        let m = build(&SpaceSpec::TwoIntervals { mesh: 0.25 }, &cfg()).unwrap();
        assert_eq!(m.n(), 10);
        let (a, b) = two_intervals_gap_pair(0.25).unwrap();
        assert_eq!((a, b), (4, 5));
        assert_eq!(m.d(a, b), 1.0);
        assert_eq!(m.d(0, a), 1.0);
    }

    #[test]
    fn star_tree_distances() {
        let m = build(
            &SpaceSpec::RTreeStar {
                legs: 3,
                points_per_leg: 2,
                leg_length: 1.0,
            },
            &cfg(),
        )
        .unwrap();
        assert_eq!(m.n(), 7);
        // tips of two different legs are joined through the center
        let tip1 = 2;
        let tip2 = 4;
        assert!((m.d(tip1, tip2) - 2.0).abs() < 1e-12);
        assert!((m.d(0, tip1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_builders_are_deterministic_and_valid() {
        for closure in [false, true] {
            let spec = SpaceSpec::Random {
                n: 9,
                seed: 42,
                dim: 3,
                norm: AmbientNorm::Euclidean,
                closure,
            };
            let a = build(&spec, &cfg()).unwrap();
            let b = build(&spec, &cfg()).unwrap();
            assert_eq!(a.matrix_rows(), b.matrix_rows());
        }
    }

    #[test]
    fn closure_output_revalidates_with_zero_defect() {
        let spec = SpaceSpec::Random {
            n: 12,
            seed: 7,
            dim: 1,
            norm: AmbientNorm::Euclidean,
            closure: true,
        };
        let m = build(&spec, &cfg()).unwrap();
        // exact triangle check with no tolerance at all
        for i in 0..m.n() {
            for j in 0..m.n() {
                for k in 0..m.n() {
                    assert!(m.d(i, k) <= m.d(i, j) + m.d(j, k));
                }
            }
        }
    }

    #[test]
    fn ambient_norms_disagree_off_axis() {
        let points = [vec![0.0, 0.0], vec![1.0, 1.0]];
        let e = AmbientNorm::Euclidean.distance(&points[0], &points[1]);
        let s = AmbientNorm::Sup.distance(&points[0], &points[1]);
        let t = AmbientNorm::Taxicab.distance(&points[0], &points[1]);
        assert!((e - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(s, 1.0);
        assert_eq!(t, 2.0);
    }

    #[test]
    fn bad_specs_are_rejected() {
        assert!(build(&SpaceSpec::Interval { n: 0 }, &cfg()).is_err());
        assert!(build(&SpaceSpec::TwoIntervals { mesh: 0.3 }, &cfg()).is_err());
        assert!(build(
            &SpaceSpec::Circle {
                n: 2,
                circumference: 1.0,
                chordal: false
            },
            &cfg()
        )
        .is_err());
    }
}
