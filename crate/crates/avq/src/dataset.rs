//! CSV ingestion, MOS aggregation, and assembly of the feature/target table
//! used for model training.
//!
//! Three CSV inputs are understood, all UTF-8 with `.` as decimal separator
//! and either LF or CRLF line endings:
//!
//! * conditions: `condition_id,resolution,bitrate_class,bandwidth_class,plr_percent,jitter_ms`
//! * metadata:   `condition_id,bits_per_pixel_per_frame,av_delay_ms,duration_s,frame_count,video_stream_size_kb,audio_stream_size_kb`
//! * ratings:    `condition_id,subject_id,score`

use crate::domain::{
    effective_bandwidth_kbps, profile_for, BandwidthClass, BitrateClass, FeatureVector, MosRecord,
    RatingRecord, Resolution, SourceProfile, TestCondition, ACR_MAX, ACR_MIN, FEATURE_NAMES,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;
use thiserror::Error;

/// CSV header of the metadata file.
pub const METADATA_HEADER: &str = "condition_id,bits_per_pixel_per_frame,av_delay_ms,duration_s,frame_count,video_stream_size_kb,audio_stream_size_kb";

/// CSV header of the ratings file.
pub const RATINGS_HEADER: &str = "condition_id,subject_id,score";

/// Container-header scalars for one recorded file, keyed by condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetadataRecord {
    pub condition_id: String,
    pub bits_per_pixel_per_frame: f64,
    pub av_delay_ms: f64,
    pub duration_s: f64,
    pub frame_count: f64,
    pub video_stream_size_kb: f64,
    pub audio_stream_size_kb: f64,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}:{line}: malformed row: {msg}")]
    MalformedRow {
        path: String,
        line: u64,
        msg: String,
    },
    #[error("{path}:{line}: ACR score {score} outside {ACR_MIN}..={ACR_MAX}")]
    ScoreOutOfRange {
        path: String,
        line: u64,
        score: i64,
    },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    HeaderMismatch {
        path: String,
        expected: &'static str,
        found: String,
    },
    #[error("no ratings to aggregate")]
    EmptyGroup,
    #[error("record references unknown condition `{0}`")]
    MissingCondition(String),
    #[error("no metadata record for condition `{0}`")]
    MissingMetadata(String),
    #[error("feature dimensionality mismatch: expected {expected}, got {got}")]
    DimensionalityMismatch { expected: usize, got: usize },
    #[error("duplicate condition `{0}` in dataset rows")]
    DuplicateCondition(String),
    #[error("target MOS {mos} for `{condition_id}` outside [1, 5]")]
    TargetOutOfRange { condition_id: String, mos: f64 },
    #[error("non-finite feature value in row for `{0}`")]
    NonFiniteFeature(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn read_to_string(path: &Path) -> Result<String, DatasetError> {
    let mut buf = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut buf))
        .map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
    Ok(buf)
}

/// Iterate the data rows of a simple comma-separated file, validating the
/// header. Yields (1-based line number, fields). Quoting is not interpreted;
/// none of the formats uses quoted fields.
fn parse_rows(
    path: &Path,
    content: &str,
    expected_header: &'static str,
) -> Result<Vec<(u64, Vec<String>)>, DatasetError> {
    let path_str = path.display().to_string();
    let mut lines = content.lines();
    let header = lines.next().unwrap_or("").trim_end_matches('\r');
    if header != expected_header {
        return Err(DatasetError::HeaderMismatch {
            path: path_str,
            expected: expected_header,
            found: header.to_string(),
        });
    }
    let want = expected_header.split(',').count();
    let mut rows = Vec::new();
    for (i, raw) in lines.enumerate() {
        let line = (i + 2) as u64;
        let trimmed = raw.trim_end_matches('\r');
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<String> = trimmed.split(',').map(|s| s.trim().to_string()).collect();
        if fields.len() != want {
            return Err(DatasetError::MalformedRow {
                path: path_str.clone(),
                line,
                msg: format!("expected {want} fields, found {}", fields.len()),
            });
        }
        rows.push((line, fields));
    }
    Ok(rows)
}

fn parse_field<T: std::str::FromStr>(
    path: &Path,
    line: u64,
    name: &str,
    value: &str,
) -> Result<T, DatasetError> {
    value.parse().map_err(|_| DatasetError::MalformedRow {
        path: path.display().to_string(),
        line,
        msg: format!("invalid {name}: `{value}`"),
    })
}

/// Parse a ratings CSV. Scores outside the ACR range are rejected with the
/// offending line number; a header-only file yields an empty list.
pub fn ingest_ratings(path: &Path) -> Result<Vec<RatingRecord>, DatasetError> {
    let content = read_to_string(path)?;
    let mut records = Vec::new();
    for (line, fields) in parse_rows(path, &content, RATINGS_HEADER)? {
        let score: i64 = parse_field(path, line, "score", &fields[2])?;
        if score < i64::from(ACR_MIN) || score > i64::from(ACR_MAX) {
            return Err(DatasetError::ScoreOutOfRange {
                path: path.display().to_string(),
                line,
                score,
            });
        }
        records.push(RatingRecord {
            condition_id: fields[0].clone(),
            subject_id: fields[1].clone(),
            score: score as u8,
        });
    }
    Ok(records)
}

/// Parse a metadata CSV.
pub fn ingest_metadata(path: &Path) -> Result<Vec<MetadataRecord>, DatasetError> {
    let content = read_to_string(path)?;
    let mut records = Vec::new();
    for (line, fields) in parse_rows(path, &content, METADATA_HEADER)? {
        records.push(MetadataRecord {
            condition_id: fields[0].clone(),
            bits_per_pixel_per_frame: parse_field(path, line, "bits_per_pixel_per_frame", &fields[1])?,
            av_delay_ms: parse_field(path, line, "av_delay_ms", &fields[2])?,
            duration_s: parse_field(path, line, "duration_s", &fields[3])?,
            frame_count: parse_field(path, line, "frame_count", &fields[4])?,
            video_stream_size_kb: parse_field(path, line, "video_stream_size_kb", &fields[5])?,
            audio_stream_size_kb: parse_field(path, line, "audio_stream_size_kb", &fields[6])?,
        });
    }
    Ok(records)
}

/// Parse a conditions CSV as written by the matrix generator.
pub fn ingest_conditions(path: &Path) -> Result<Vec<TestCondition>, DatasetError> {
    let content = read_to_string(path)?;
    let mut conditions = Vec::new();
    for (line, fields) in parse_rows(path, &content, crate::domain::CONDITIONS_HEADER)? {
        let bad = |name: &str, value: &str| DatasetError::MalformedRow {
            path: path.display().to_string(),
            line,
            msg: format!("invalid {name}: `{value}`"),
        };
        let resolution =
            Resolution::from_label(&fields[1]).ok_or_else(|| bad("resolution", &fields[1]))?;
        let bitrate_class =
            BitrateClass::from_label(&fields[2]).ok_or_else(|| bad("bitrate_class", &fields[2]))?;
        let bandwidth_class = BandwidthClass::from_label(&fields[3])
            .ok_or_else(|| bad("bandwidth_class", &fields[3]))?;
        conditions.push(TestCondition {
            condition_id: fields[0].clone(),
            resolution,
            bitrate_class,
            bandwidth_class,
            plr_percent: parse_field(path, line, "plr_percent", &fields[4])?,
            jitter_ms: parse_field(path, line, "jitter_ms", &fields[5])?,
        });
    }
    Ok(conditions)
}

/// Render ratings in the ingestible CSV format.
pub fn ratings_to_csv(records: &[RatingRecord]) -> String {
    let mut out = String::from(RATINGS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!("{},{},{}\n", r.condition_id, r.subject_id, r.score));
    }
    out
}

/// Render metadata records in the ingestible CSV format.
pub fn metadata_to_csv(records: &[MetadataRecord]) -> String {
    let mut out = String::from(METADATA_HEADER);
    out.push('\n');
    for m in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            m.condition_id,
            m.bits_per_pixel_per_frame,
            m.av_delay_ms,
            m.duration_s,
            m.frame_count,
            m.video_stream_size_kb,
            m.audio_stream_size_kb
        ));
    }
    out
}

/// Two-sided 95% critical values of Student's t for df 1..=40; the standard
/// table used for small-sample confidence intervals. Larger df fall back to
/// the normal approximation.
const T_CRIT_975: [f64; 40] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160,
    2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056,
    2.052, 2.048, 2.045, 2.042, 2.040, 2.037, 2.035, 2.032, 2.030, 2.028, 2.026, 2.024, 2.023,
    2.021,
];

const Z_975: f64 = 1.960;

/// t(0.975, df), tabulated for df 1..=40, 1.96 beyond.
pub fn t_critical_975(df: usize) -> f64 {
    if df == 0 {
        return 0.0;
    }
    if df <= T_CRIT_975.len() {
        T_CRIT_975[df - 1]
    } else {
        Z_975
    }
}

/// Aggregate per-subject ratings into per-condition MOS records.
///
/// MOS is the arithmetic mean, stddev the sample standard deviation
/// (n-1 denominator, 0 when n = 1), and the CI half-width
/// t(0.975, n-1) * stddev / sqrt(n). Output is sorted by condition id.
pub fn aggregate_mos(ratings: &[RatingRecord]) -> Result<Vec<MosRecord>, DatasetError> {
    if ratings.is_empty() {
        return Err(DatasetError::EmptyGroup);
    }
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in ratings {
        groups
            .entry(r.condition_id.as_str())
            .or_default()
            .push(f64::from(r.score));
    }
    let mut out = Vec::with_capacity(groups.len());
    for (condition_id, scores) in groups {
        let n = scores.len();
        let mos = scores.iter().sum::<f64>() / n as f64;
        let stddev = if n > 1 {
            let ss: f64 = scores.iter().map(|s| (s - mos) * (s - mos)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let ci95_halfwidth = if n > 1 {
            t_critical_975(n - 1) * stddev / (n as f64).sqrt()
        } else {
            0.0
        };
        out.push(MosRecord {
            condition_id: condition_id.to_string(),
            mos,
            n_subjects: n,
            stddev,
            ci95_halfwidth,
        });
    }
    Ok(out)
}

/// Digest of one input file, recorded in dataset provenance and manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDigest {
    pub path: String,
    pub sha256: String,
}

/// One training row: a condition's feature vector and its target MOS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub condition_id: String,
    pub features: Vec<f64>,
    pub target_mos: f64,
    /// 95% CI half-width of the subjective MOS, when rating dispersion is
    /// known. Used for outlier-ratio reporting.
    pub ci95_halfwidth: Option<f64>,
}

/// Immutable feature/target table. All rows share one feature ordering and
/// dimensionality; condition ids are unique; targets lie in [1, 5].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    feature_names: Vec<String>,
    rows: Vec<DatasetRow>,
    provenance: Vec<SourceDigest>,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, rows: Vec<DatasetRow>) -> Result<Self, DatasetError> {
        let dim = feature_names.len();
        let mut seen = HashMap::new();
        for row in &rows {
            if row.features.len() != dim {
                return Err(DatasetError::DimensionalityMismatch {
                    expected: dim,
                    got: row.features.len(),
                });
            }
            if !(1.0..=5.0).contains(&row.target_mos) {
                return Err(DatasetError::TargetOutOfRange {
                    condition_id: row.condition_id.clone(),
                    mos: row.target_mos,
                });
            }
            if !row.features.iter().all(|v| v.is_finite()) {
                return Err(DatasetError::NonFiniteFeature(row.condition_id.clone()));
            }
            if seen.insert(row.condition_id.clone(), ()).is_some() {
                return Err(DatasetError::DuplicateCondition(row.condition_id.clone()));
            }
        }
        Ok(Dataset {
            feature_names,
            rows,
            provenance: Vec::new(),
        })
    }

    pub fn with_provenance(mut self, provenance: Vec<SourceDigest>) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &[DatasetRow] {
        &self.rows
    }

    pub fn provenance(&self) -> &[SourceDigest] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Feature dimensionality.
    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target_mos).collect()
    }

    /// (min, max) of the targets; (NaN, NaN) when empty.
    pub fn target_range(&self) -> (f64, f64) {
        self.rows.iter().fold((f64::NAN, f64::NAN), |(lo, hi), r| {
            (
                if lo.is_nan() { r.target_mos } else { lo.min(r.target_mos) },
                if hi.is_nan() { r.target_mos } else { hi.max(r.target_mos) },
            )
        })
    }

    /// New dataset holding the given rows (by index, in the given order).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            feature_names: self.feature_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Assemble the feature vector for one condition from its profile and
/// container metadata. Network fields come straight from the condition and
/// the effective bandwidth cap.
pub fn assemble_features(
    condition: &TestCondition,
    profile: &SourceProfile,
    metadata: &MetadataRecord,
) -> FeatureVector {
    FeatureVector {
        bits_per_pixel_per_frame: metadata.bits_per_pixel_per_frame,
        av_delay_ms: metadata.av_delay_ms,
        duration_s: metadata.duration_s,
        frame_count: metadata.frame_count,
        video_stream_size_kb: metadata.video_stream_size_kb,
        audio_stream_size_kb: metadata.audio_stream_size_kb,
        overall_bitrate_kbps: profile.overall_bitrate_kbps,
        resolution_pixels: condition.resolution.pixel_count() as f64,
        plr_percent: condition.plr_percent,
        jitter_ms: f64::from(condition.jitter_ms),
        bandwidth_kbps: effective_bandwidth_kbps(profile, condition.bandwidth_class),
    }
}

/// Join conditions, profiles, metadata and MOS records into a training
/// table: one row per MOS record, ordered like `conditions`. The join is
/// pure, so permuting the input record order does not change the output.
pub fn build_dataset(
    conditions: &[TestCondition],
    profiles: &[SourceProfile],
    metadata: &[MetadataRecord],
    mos_records: &[MosRecord],
) -> Result<Dataset, DatasetError> {
    let condition_by_id: HashMap<&str, (usize, &TestCondition)> = conditions
        .iter()
        .enumerate()
        .map(|(i, c)| (c.condition_id.as_str(), (i, c)))
        .collect();
    let metadata_by_id: HashMap<&str, &MetadataRecord> = metadata
        .iter()
        .map(|m| (m.condition_id.as_str(), m))
        .collect();

    let mut rows: Vec<(usize, DatasetRow)> = Vec::with_capacity(mos_records.len());
    for mos in mos_records {
        let (position, condition) = condition_by_id
            .get(mos.condition_id.as_str())
            .copied()
            .ok_or_else(|| DatasetError::MissingCondition(mos.condition_id.clone()))?;
        let meta = metadata_by_id
            .get(mos.condition_id.as_str())
            .copied()
            .ok_or_else(|| DatasetError::MissingMetadata(mos.condition_id.clone()))?;
        let profile = profile_for(profiles, condition.resolution, condition.bitrate_class)
            .ok_or_else(|| DatasetError::MissingMetadata(mos.condition_id.clone()))?;
        let features = assemble_features(condition, profile, meta);
        rows.push((
            position,
            DatasetRow {
                condition_id: mos.condition_id.clone(),
                features: features.to_values().to_vec(),
                target_mos: mos.mos,
                ci95_halfwidth: Some(mos.ci95_halfwidth),
            },
        ));
    }
    rows.sort_by_key(|(position, _)| *position);

    Dataset::new(
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        rows.into_iter().map(|(_, row)| row).collect(),
    )
}
