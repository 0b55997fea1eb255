//! Space file serialization, report assembly, and atomic writes.
//!
//! Space files are JSON objects holding the distance matrix row by row; the
//! matrix is the ground truth and coordinates are provenance. Saving and
//! re-loading reproduces every entry bit-exactly. A CSV alternative accepts
//! a bare matrix with base point 0.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::analysis::{classify_all, ClassificationSummary};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::free_space::{kr_norm, molecule};
use crate::space::{space_diagnostics, FiniteMetricSpace, PairId, SpaceHandle};

/// On-disk layout of a space file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub base_point: usize,
    pub distance_matrix: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<PointMeta>>,
}

/// Optional per-point metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<f64>>,
}

/// Writes a space to `path` as JSON, atomically (write-temp-then-rename).
pub fn save_space(m: &FiniteMetricSpace, name: Option<&str>, path: &Path) -> Result<()> {
    let points = match (m.labels(), m.coords()) {
        (None, None) => None,
        (labels, coords) => Some(
            (0..m.n())
                .map(|i| PointMeta {
                    label: labels.map(|l| l[i].clone()),
                    coords: coords.map(|c| c[i].clone()),
                })
                .collect(),
        ),
    };
    let file = SpaceFile {
        name: name.map(str::to_owned),
        base_point: m.base(),
        distance_matrix: m.matrix_rows(),
        points,
    };
    let body = serde_json::to_string_pretty(&file).expect("space file serializes");
    atomic_write(path, body.as_bytes())
}

/// Loads and validates a space file. JSON by default; a `.csv` extension
/// selects the bare-matrix format with base point 0.
pub fn load_space(path: &Path, cfg: &Config) -> Result<(FiniteMetricSpace, Option<String>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, &e))?;
    if path.extension().is_some_and(|ext| ext == "csv") {
        let m = parse_csv_matrix(&text, cfg)?;
        return Ok((m, None));
    }
    let file: SpaceFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut space = FiniteMetricSpace::validate(file.distance_matrix, file.base_point, cfg)?;
    if let Some(points) = file.points {
        if points.len() != space.n() {
            return Err(Error::ValueCountMismatch {
                got: points.len(),
                expected: space.n(),
            });
        }
        if points.iter().all(|p| p.label.is_some()) {
            space = space.with_labels(
                points
                    .iter()
                    .map(|p| p.label.clone().unwrap_or_default())
                    .collect(),
            )?;
        }
        if points.iter().all(|p| p.coords.is_some()) {
            space = space.with_coords(
                points
                    .iter()
                    .map(|p| p.coords.clone().unwrap_or_default())
                    .collect(),
            )?;
        }
    }
    Ok((space, file.name))
}

fn parse_csv_matrix(text: &str, cfg: &Config) -> Result<FiniteMetricSpace> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> = trimmed
            .split(',')
            .map(|cell| cell.trim().parse::<f64>())
            .collect();
        match row {
            Ok(r) => rows.push(r),
            Err(e) => {
                return Err(Error::Parse {
                    line: lineno + 1,
                    column: 0,
                    message: e.to_string(),
                })
            }
        }
    }
    FiniteMetricSpace::validate(rows, 0, cfg)
}

/// Writes bytes via a temporary file in the same directory, then renames.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, &e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, &e))
}

/// Rounds to the given number of significant decimal digits. Applied to
/// every float a report emits so reports are stable across platforms.
pub fn round_sig(value: f64, digits: u32) -> f64 {
    if value == 0.0 || !value.is_finite() {
        return value;
    }
    let magnitude = value.abs().log10().floor() as i32;
    let factor = 10f64.powi(digits as i32 - 1 - magnitude);
    (value * factor).round() / factor
}

const REPORT_DIGITS: u32 = 12;

fn sig(value: f64) -> Option<f64> {
    value.is_finite().then(|| round_sig(value, REPORT_DIGITS))
}

fn pair_tuple(p: &PairId) -> (usize, usize) {
    p.canonical()
}

/// Space header in a report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceSummary {
    pub name: Option<String>,
    pub n: usize,
    pub base_point: usize,
    pub diameter: Option<f64>,
    pub min_positive_distance: Option<f64>,
}

/// Diagnostics section of a report; infinite margins become `null`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub pair_count: usize,
    pub length_defect: Option<f64>,
    pub length_defect_pair: Option<(usize, usize)>,
    pub max_midpoint_defect: Option<f64>,
    pub max_z_margin: Option<f64>,
    pub max_z_margin_pair: Option<(usize, usize)>,
    pub trivial_segment_count: usize,
    /// Trivial-segment pairs, truncated for very large spaces.
    pub trivial_segment_pairs: Vec<(usize, usize)>,
    pub trivial_segment_pairs_truncated: bool,
    pub zero_margin_pairs: usize,
    pub scale_limited_pairs: usize,
}

/// Classification section of a report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub pair_count: usize,
    pub z_witnessed: usize,
    pub candidates: usize,
    pub scale_limited_candidates: usize,
    /// Candidate pairs the sample probes below their own scale.
    pub strongly_exposed_pairs: Vec<(usize, usize)>,
    pub max_z_margin: Option<f64>,
    pub max_z_margin_pair: Option<(usize, usize)>,
}

impl ClassificationReport {
    pub fn from_summary(summary: &ClassificationSummary) -> Self {
        ClassificationReport {
            pair_count: summary.pair_count,
            z_witnessed: summary.z_witnessed,
            candidates: summary.candidates,
            scale_limited_candidates: summary.scale_limited_candidates,
            strongly_exposed_pairs: summary.exposed_pairs.iter().map(pair_tuple).collect(),
            max_z_margin: summary.max_z_margin.and_then(sig),
            max_z_margin_pair: summary.max_z_margin_pair.as_ref().map(pair_tuple),
        }
    }
}

/// One sampled norm computation with its certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateSample {
    pub pair: (usize, usize),
    pub distance: Option<f64>,
    pub primal_cost: Option<f64>,
    pub dual_value: Option<f64>,
    pub gap: Option<f64>,
}

/// Self-contained analysis report: embeds the tool version and the config
/// that produced it. The timestamp is optional so byte-identical reruns are
/// possible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_unix: Option<u64>,
    pub config: Config,
    pub space: SpaceSummary,
    pub diagnostics: DiagnosticsReport,
    pub classification: ClassificationReport,
    pub norm_certificates: Vec<CertificateSample>,
}

const TRIVIAL_PAIR_CAP: usize = 1000;

/// Runs the full pipeline (diagnostics, classification, sampled norm
/// certificates) and assembles the report.
pub fn build_report(
    space: &SpaceHandle,
    name: Option<&str>,
    cfg: &Config,
    with_timestamp: bool,
) -> Result<Report> {
    let diag = space_diagnostics(space, cfg)?;
    let classification = if space.n() >= 2 {
        ClassificationReport::from_summary(&classify_all(space, cfg)?.summary)
    } else {
        ClassificationReport {
            pair_count: 0,
            z_witnessed: 0,
            candidates: 0,
            scale_limited_candidates: 0,
            strongly_exposed_pairs: Vec::new(),
            max_z_margin: None,
            max_z_margin_pair: None,
        }
    };

    // a deterministic handful of molecule certificates: the first pair, the
    // base against the farthest point, a diameter pair, and the margin pair
    let mut sample_pairs: Vec<(usize, usize)> = Vec::new();
    if space.n() >= 2 {
        sample_pairs.push((0, 1));
        let base = space.base();
        let far = (0..space.n())
            .filter(|&i| i != base)
            .max_by(|&a, &b| {
                space
                    .d(base, a)
                    .partial_cmp(&space.d(base, b))
                    .expect("distances are not NaN")
                    .then(b.cmp(&a))
            })
            .expect("n >= 2");
        sample_pairs.push((base.min(far), base.max(far)));
        if let Some((x, y)) = space.pairs().max_by(|&(a, b), &(c, d)| {
            space
                .d(a, b)
                .partial_cmp(&space.d(c, d))
                .expect("distances are not NaN")
                .then((c, d).cmp(&(a, b)))
        }) {
            sample_pairs.push((x, y));
        }
        if let Some(p) = &classification.max_z_margin_pair {
            sample_pairs.push(*p);
        }
        sample_pairs.sort_unstable();
        sample_pairs.dedup();
    }
    let mut norm_certificates = Vec::new();
    for (x, y) in sample_pairs {
        let mol = molecule(space, x, y, cfg)?;
        let result = kr_norm(&mol.chain)?;
        norm_certificates.push(CertificateSample {
            pair: (x, y),
            distance: sig(space.d(x, y)),
            primal_cost: sig(result.flow.cost),
            dual_value: sig(result.certificate.value),
            gap: sig(result.gap()),
        });
    }

    let truncated = diag.trivial_segment_pairs.len() > TRIVIAL_PAIR_CAP;
    Ok(Report {
        tool: "lipfree".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        timestamp_unix: with_timestamp.then(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        }),
        config: *cfg,
        space: SpaceSummary {
            name: name.map(str::to_owned),
            n: space.n(),
            base_point: space.base(),
            diameter: sig(space.diameter()),
            min_positive_distance: sig(space.min_positive_distance()),
        },
        diagnostics: DiagnosticsReport {
            pair_count: diag.pair_count,
            length_defect: sig(diag.length_defect),
            length_defect_pair: diag.length_defect_pair.as_ref().map(pair_tuple),
            max_midpoint_defect: sig(diag.max_midpoint_defect),
            max_z_margin: diag.max_z_margin.and_then(sig),
            max_z_margin_pair: diag.max_z_margin_pair.as_ref().map(pair_tuple),
            trivial_segment_count: diag.trivial_segment_pairs.len(),
            trivial_segment_pairs: diag
                .trivial_segment_pairs
                .iter()
                .take(TRIVIAL_PAIR_CAP)
                .map(pair_tuple)
                .collect(),
            trivial_segment_pairs_truncated: truncated,
            zero_margin_pairs: diag.zero_margin_pairs,
            scale_limited_pairs: diag.scale_limited_pairs,
        },
        classification,
        norm_certificates,
    })
}

/// Serializes a report as pretty JSON and writes it atomically.
pub fn save_report(report: &Report, path: &Path) -> Result<()> {
    let body = serde_json::to_string_pretty(report).expect("report serializes");
    atomic_write(path, body.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::{build, SpaceSpec};
    use std::sync::Arc;

    fn cfg() -> Config {
        Config::default()
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let m = build(
            &SpaceSpec::Random {
                n: 7,
                seed: 3,
                dim: 2,
                norm: crate::gallery::AmbientNorm::Euclidean,
                closure: false,
            },
            &cfg(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("space.json");
        save_space(&m, Some("random7"), &path).unwrap();
        let (loaded, name) = load_space(&path, &cfg()).unwrap();
        assert_eq!(name.as_deref(), Some("random7"));
        assert_eq!(m.matrix_rows(), loaded.matrix_rows());
        assert_eq!(m.base(), loaded.base());
        assert_eq!(m.coords(), loaded.coords());
    }

    #[test]
    fn identical_specs_save_identical_bytes() {
        let spec = SpaceSpec::Random {
            n: 6,
            seed: 11,
            dim: 2,
            norm: crate::gallery::AmbientNorm::Taxicab,
            closure: true,
        };
        let dir = tempfile::tempdir().unwrap();
        let mut bodies = Vec::new();
        for run in 0..2 {
            let m = build(&spec, &cfg()).unwrap();
            let path = dir.path().join(format!("s{run}.json"));
            save_space(&m, Some("twice"), &path).unwrap();
            bodies.push(fs::read(&path).unwrap());
        }
        assert_eq!(bodies[0], bodies[1]);
    }

    #[test]
    fn malformed_json_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        fs::write(&path, "{ not json").unwrap();
        match load_space(&path, &cfg()) {
            Err(Error::Parse { line, .. }) => assert!(line >= 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn asymmetric_matrix_fails_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("asym.json");
        fs::write(
            &path,
            r#"{"base_point":0,"distance_matrix":[[0.0,1.0],[2.0,0.0]]}"#,
        )
        .unwrap();
        assert!(matches!(
            load_space(&path, &cfg()),
            Err(Error::Asymmetry { .. })
        ));
    }

    #[test]
    fn csv_matrix_loads_with_base_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        fs::write(&path, "0, 1, 2\n1, 0, 1\n2, 1, 0\n").unwrap();
        let (m, name) = load_space(&path, &cfg()).unwrap();
        assert_eq!(m.n(), 3);
        assert_eq!(m.base(), 0);
        assert!(name.is_none());
    }

    #[test]
    fn report_is_deterministic_without_timestamp() {
        let m = Arc::new(build(&SpaceSpec::TwoIntervals { mesh: 0.25 }, &cfg()).unwrap());
        let a = build_report(&m, Some("ti"), &cfg(), false).unwrap();
        let b = build_report(&m, Some("ti"), &cfg(), false).unwrap();
        let ja = serde_json::to_string_pretty(&a).unwrap();
        let jb = serde_json::to_string_pretty(&b).unwrap();
        assert_eq!(ja, jb);
        assert!(a.timestamp_unix.is_none());
    }

    #[test]
    fn report_flags_the_gap_pair() {
        let m = Arc::new(build(&SpaceSpec::TwoIntervals { mesh: 0.25 }, &cfg()).unwrap());
        let report = build_report(&m, Some("ti"), &cfg(), false).unwrap();
        assert_eq!(report.classification.strongly_exposed_pairs, vec![(4, 5)]);
        assert_eq!(report.diagnostics.max_z_margin, Some(1.0));
        assert!(!report.norm_certificates.is_empty());
        for sample in &report.norm_certificates {
            assert!(sample.gap.unwrap_or(f64::INFINITY) <= 1e-8);
        }
    }

    #[test]
    fn round_sig_keeps_twelve_digits() {
        assert_eq!(round_sig(1.0 / 3.0, 12), 0.333333333333);
        assert_eq!(round_sig(0.0, 12), 0.0);
        assert_eq!(round_sig(123456.789, 3), 123000.0);
        assert!(round_sig(f64::INFINITY, 12).is_infinite());
    }
}
