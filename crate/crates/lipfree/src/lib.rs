//! A computational laboratory for the geometry of Lipschitz-free spaces
//! over finite metric spaces.
//!
//! The crate turns the basic objects of free-space geometry into exact,
//! testable computations on finite samples:
//!
//! * validated pointed metric spaces with Gromov products, midpoint sets,
//!   metric segments, and near-between margins ([`space`]);
//! * Lipschitz functions with exact norms, inf/sup extension envelopes, and
//!   the explicit constructions behind steep-pair extensions, peaking
//!   functions, and averaging families ([`lipschitz`]);
//! * balanced chains and molecules with their Kantorovich-Rubinstein norm,
//!   computed by an exact min-cost flow and certified by a norming
//!   1-Lipschitz dual function ([`free_space`]);
//! * a classification engine that decides, by three cross-checked criteria,
//!   whether a molecule is a strongly exposed candidate, plus Daugavet-type
//!   searches and locality diagnostics ([`analysis`]);
//! * deterministic gallery builders and JSON space files and reports
//!   ([`gallery`], [`io`]).
//!
//! Everything is exact and exhaustive at the sample: margins are finite
//! minima, searches scan all pairs, and absence results are evidence at the
//! sample's resolution rather than statements about an underlying continuum.

pub mod analysis;
pub mod config;
pub mod error;
pub mod free_space;
pub mod gallery;
pub mod io;
pub mod lipschitz;
pub mod space;

pub use analysis::{
    classify_all, classify_pair, find_daugavet_pair, gromov_infimum, lemalocal_experiment,
    local_slope_search, peak_verify, spreading_local_set, Classification, ClassificationSummary,
    ContractionOutcome, DaugavetSearchResult, PairClassification, Verdict,
};
pub use config::{gap_tolerance, Config};
pub use error::{Error, Result};
pub use free_space::{
    kr_norm, kr_norm_dual, kr_norm_primal, molecule, molecule_decompose, slice_membership, Chain,
    DualCertificate, FlowArc, FlowSolution, KrNorm, Molecule, MoleculeDecomposition,
};
pub use gallery::{build, AmbientNorm, SpaceSpec};
pub use io::{build_report, load_space, save_report, save_space, Report};
pub use lipschitz::{
    averaging_family, daugavet_extension, f_xy, mcshane_extend, peaking_candidate, whitney_extend,
    AveragingFamily, LipschitzFunction, PeakingCandidate, SlopeWitness,
};
pub use space::{
    gromov_product, is_scale_limited, metric_segment, midpoint_defect, midpoint_excess,
    midpoint_set, pair_z_margin, space_diagnostics, witness_scale, FiniteMetricSpace, PairId,
    SpaceDiagnostics, SpaceHandle,
};
