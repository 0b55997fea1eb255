//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    // -- configuration --
    #[error("config field {field} = {value} is outside (0, 1)")]
    BadConfig { field: &'static str, value: f64 },

    // -- metric validation --
    #[error("distance matrix is not square: row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("matrix is empty")]
    EmptyMatrix,
    #[error("asymmetric distances at ({i},{j}): {forward} vs {backward}")]
    Asymmetry {
        i: usize,
        j: usize,
        forward: f64,
        backward: f64,
    },
    #[error(
        "triangle inequality violated at ({i},{j},{k}): d({i},{k}) exceeds the detour by {defect}"
    )]
    TriangleViolation {
        i: usize,
        j: usize,
        k: usize,
        defect: f64,
    },
    #[error("duplicate points: d({i},{j}) = 0 off the diagonal")]
    DuplicatePoint { i: usize, j: usize },
    #[error("negative distance at ({i},{j}): {value}")]
    NegativeDistance { i: usize, j: usize, value: f64 },
    #[error("nonzero diagonal entry at {i}: {value}")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("base index {base} out of range for {n} points")]
    BadBaseIndex { base: usize, n: usize },

    // -- argument checks shared across modules --
    #[error("point index {index} out of range for {n} points")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("pair ({x},{y}) is degenerate: the two indices coincide")]
    DegeneratePair { x: usize, y: usize },
    #[error("operation needs at least two points")]
    SingletonSpace,
    #[error("relaxation delta {delta} must be nonnegative")]
    NegativeRelaxation { delta: f64 },
    #[error("invalid subset: {0}")]
    InvalidSubset(String),
    #[error("function has {got} values but the space has {expected} points")]
    ValueCountMismatch { got: usize, expected: usize },
    #[error("epsilon {eps} outside the admissible range (0, {max})")]
    EpsilonOutOfRange { eps: f64, max: f64 },

    // -- Lipschitz extensions and constructions --
    #[error("values are not {constant}-Lipschitz on the subset: pair ({i},{j}) has slope {slope}")]
    NotLipschitzOnSubset {
        constant: f64,
        i: usize,
        j: usize,
        slope: f64,
    },
    #[error("extension pair condition fails at subset pair ({x},{y}): needs {lhs} <= {rhs}")]
    PairConditionViolated {
        x: usize,
        y: usize,
        lhs: f64,
        rhs: f64,
    },
    #[error("points {u} and {v} must lie outside the subset")]
    PointsInSubset { u: usize, v: usize },
    #[error("candidate function has Lipschitz norm {norm}, above the allowed 1")]
    NormOverflow { norm: f64 },
    #[error("balls around pairs {i} and {j} overlap at point {witness}")]
    BallsOverlap { i: usize, j: usize, witness: usize },
    #[error("pair {i}: point {y} lies outside the ball around its partner")]
    WitnessOutsideBall { i: usize, y: usize },
    #[error("prescription {index} is not {constant}-Lipschitz: pair ({i},{j}) has slope {slope}")]
    PrescriptionNotLipschitz {
        index: usize,
        constant: f64,
        i: usize,
        j: usize,
        slope: f64,
    },

    // -- free space --
    #[error("chain weights sum to {sum}, not zero")]
    UnbalancedChain { sum: f64 },
    #[error("{what} has norm {norm}, expected 1")]
    NotNormalized { what: &'static str, norm: f64 },
    #[error("point {z} is not strictly between {x} and {y}")]
    NotBetween { x: usize, y: usize, z: usize },
    #[error("flow solver stalled after {iterations} augmentations")]
    SolverStall { iterations: usize },

    // -- analysis --
    #[error(
        "classification criteria disagree at ({x},{y}): z-margin {z_margin}, \
         gromov infima ({inf_xy}, {inf_yx}), segment size {segment_size}"
    )]
    CriteriaDisagreement {
        x: usize,
        y: usize,
        z_margin: f64,
        inf_xy: f64,
        inf_yx: f64,
        segment_size: usize,
    },
    #[error("probe slope {slope} at the pair does not meet the required {required}")]
    PreconditionSlope { slope: f64, required: f64 },
    #[error("probe function slope at ({x},{y}) is {slope}, expected 1")]
    NotSlopeOneAtPair { x: usize, y: usize, slope: f64 },
    #[error("scale {scale} is below the smallest positive distance {mesh}")]
    ScaleBelowMesh { scale: f64, mesh: f64 },

    // -- gallery and io --
    #[error("bad space spec: {0}")]
    BadSpec(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, err: &std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}
