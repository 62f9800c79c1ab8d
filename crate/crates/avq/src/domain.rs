//! Core value types for the audiovisual test space: the influence-factor
//! condition matrix, the built-in source encoding profiles, subjective
//! ratings with their per-condition MOS aggregates, and the fixed-order
//! numeric feature vector consumed by the regression models.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Video resolution of a source file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Resolution {
    /// 1920x1080 pixels.
    Hd1080,
    /// 1280x720 pixels.
    Hd720,
}

impl Resolution {
    /// All resolutions in canonical matrix order.
    pub const ALL: [Resolution; 2] = [Resolution::Hd1080, Resolution::Hd720];

    pub fn width(self) -> u32 {
        match self {
            Resolution::Hd1080 => 1920,
            Resolution::Hd720 => 1280,
        }
    }

    pub fn height(self) -> u32 {
        match self {
            Resolution::Hd1080 => 1080,
            Resolution::Hd720 => 720,
        }
    }

    /// Total pixel count (width x height).
    pub fn pixel_count(self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    pub fn label(self) -> &'static str {
        match self {
            Resolution::Hd1080 => "HD1080",
            Resolution::Hd720 => "HD720",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "HD1080" => Some(Resolution::Hd1080),
            "HD720" => Some(Resolution::Hd720),
            _ => None,
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Target encoding quality of a source file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BitrateClass {
    /// High quality.
    Hq,
    /// Middle quality.
    Mq,
    /// Low quality.
    Lq,
}

impl BitrateClass {
    /// All bitrate classes in canonical matrix order.
    pub const ALL: [BitrateClass; 3] = [BitrateClass::Hq, BitrateClass::Mq, BitrateClass::Lq];

    pub fn label(self) -> &'static str {
        match self {
            BitrateClass::Hq => "HQ",
            BitrateClass::Mq => "MQ",
            BitrateClass::Lq => "LQ",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "HQ" => Some(BitrateClass::Hq),
            "MQ" => Some(BitrateClass::Mq),
            "LQ" => Some(BitrateClass::Lq),
            _ => None,
        }
    }
}

impl fmt::Display for BitrateClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Bandwidth limitation applied between server and client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BandwidthClass {
    /// No effective limitation: cap at twice the video max bitrate.
    High,
    /// Cap slightly below the video max bitrate.
    Low,
}

impl BandwidthClass {
    /// All bandwidth classes in canonical matrix order.
    pub const ALL: [BandwidthClass; 2] = [BandwidthClass::High, BandwidthClass::Low];

    pub fn label(self) -> &'static str {
        match self {
            BandwidthClass::High => "High",
            BandwidthClass::Low => "Low",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "High" => Some(BandwidthClass::High),
            "Low" => Some(BandwidthClass::Low),
            _ => None,
        }
    }
}

impl fmt::Display for BandwidthClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Packet loss levels of the test matrix, in percent.
pub const PLR_LEVELS_PERCENT: [f64; 3] = [0.0, 0.1, 0.5];

/// Jitter levels of the test matrix, in milliseconds.
pub const JITTER_LEVELS_MS: [u32; 4] = [0, 10, 50, 100];

/// High-bandwidth cap as a multiple of the video max bitrate.
pub const HIGH_BANDWIDTH_FACTOR: f64 = 2.0;

/// Low-bandwidth cap as a fraction of the video max bitrate. The shaper is
/// configured at the max bitrate but the measured available bandwidth sits
/// 2.8% below it; the effective cap models that shortfall.
pub const LOW_BANDWIDTH_FACTOR: f64 = 0.972;

/// One cell of the influence-factor test matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCondition {
    pub condition_id: String,
    pub resolution: Resolution,
    pub bitrate_class: BitrateClass,
    pub bandwidth_class: BandwidthClass,
    pub plr_percent: f64,
    pub jitter_ms: u32,
}

impl TestCondition {
    pub fn new(
        resolution: Resolution,
        bitrate_class: BitrateClass,
        bandwidth_class: BandwidthClass,
        plr_percent: f64,
        jitter_ms: u32,
    ) -> Self {
        TestCondition {
            condition_id: condition_id(
                resolution,
                bitrate_class,
                bandwidth_class,
                plr_percent,
                jitter_ms,
            ),
            resolution,
            bitrate_class,
            bandwidth_class,
            plr_percent,
            jitter_ms,
        }
    }
}

/// Stable identifier for a condition: `{res}_{rate}_{bw}_p{plr}_j{jitter}`,
/// e.g. `HD720_LQ_High_p0.1_j50`. Integral PLR values drop the decimal point
/// so the zero-loss cell reads `p0`.
pub fn condition_id(
    resolution: Resolution,
    bitrate_class: BitrateClass,
    bandwidth_class: BandwidthClass,
    plr_percent: f64,
    jitter_ms: u32,
) -> String {
    format!(
        "{}_{}_{}_p{}_j{}",
        resolution.label(),
        bitrate_class.label(),
        bandwidth_class.label(),
        format_plr(plr_percent),
        jitter_ms
    )
}

fn format_plr(plr: f64) -> String {
    if plr.fract() == 0.0 {
        format!("{}", plr as i64)
    } else {
        format!("{:.1}", plr)
    }
}

/// Generate the full condition matrix: the Cartesian product of all factor
/// levels, iterated resolution -> bitrate class -> bandwidth class -> PLR ->
/// jitter, each in its canonical order. 2 x 3 x 2 x 3 x 4 = 144 conditions.
pub fn generate_condition_matrix() -> Vec<TestCondition> {
    let mut matrix = Vec::with_capacity(144);
    for &resolution in &Resolution::ALL {
        for &bitrate_class in &BitrateClass::ALL {
            for &bandwidth_class in &BandwidthClass::ALL {
                for &plr in &PLR_LEVELS_PERCENT {
                    for &jitter in &JITTER_LEVELS_MS {
                        matrix.push(TestCondition::new(
                            resolution,
                            bitrate_class,
                            bandwidth_class,
                            plr,
                            jitter,
                        ));
                    }
                }
            }
        }
    }
    matrix
}

/// CSV header of the condition matrix file.
pub const CONDITIONS_HEADER: &str =
    "condition_id,resolution,bitrate_class,bandwidth_class,plr_percent,jitter_ms";

/// Render the condition matrix as CSV. Output is byte-stable for a given
/// matrix, so repeated runs produce identical files.
pub fn conditions_to_csv(conditions: &[TestCondition]) -> String {
    let mut out = String::from(CONDITIONS_HEADER);
    out.push('\n');
    for c in conditions {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.condition_id,
            c.resolution.label(),
            c.bitrate_class.label(),
            c.bandwidth_class.label(),
            format_plr(c.plr_percent),
            c.jitter_ms
        ));
    }
    out
}

/// Per-source-file encoding record. Bitrates are one-second transmission
/// averages in kbit/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceProfile {
    pub resolution: Resolution,
    pub bitrate_class: BitrateClass,
    pub overall_bitrate_kbps: f64,
    pub video_max_bitrate_kbps: f64,
    pub audio_bitrate_kbps: f64,
    pub frame_rate_fps: f64,
    pub audio_sample_rate_hz: u32,
}

impl SourceProfile {
    /// Video bits available per pixel per frame, from the video max bitrate.
    pub fn bits_per_pixel_per_frame(&self) -> f64 {
        self.video_max_bitrate_kbps * 1000.0
            / (self.frame_rate_fps * self.resolution.pixel_count() as f64)
    }
}

/// The six built-in source profiles (two resolutions, three bitrate
/// classes). All files carry a 128 kbit/s audio track at 48 kHz and play at
/// 25 fps.
pub fn builtin_source_profiles() -> Vec<SourceProfile> {
    let profile = |resolution, bitrate_class, overall: f64, video_max: f64| SourceProfile {
        resolution,
        bitrate_class,
        overall_bitrate_kbps: overall,
        video_max_bitrate_kbps: video_max,
        audio_bitrate_kbps: 128.0,
        frame_rate_fps: 25.0,
        audio_sample_rate_hz: 48_000,
    };
    vec![
        profile(Resolution::Hd720, BitrateClass::Lq, 1389.0, 1477.0),
        profile(Resolution::Hd720, BitrateClass::Mq, 3461.0, 3664.0),
        profile(Resolution::Hd720, BitrateClass::Hq, 8040.0, 8313.0),
        profile(Resolution::Hd1080, BitrateClass::Lq, 2871.0, 3227.0),
        profile(Resolution::Hd1080, BitrateClass::Mq, 7457.0, 8069.0),
        // 13.1 Mbit/s overall, stored in kbit/s.
        profile(Resolution::Hd1080, BitrateClass::Hq, 13_100.0, 18_083.0),
    ]
}

/// Look up the profile for a (resolution, bitrate class) pair.
pub fn profile_for(
    profiles: &[SourceProfile],
    resolution: Resolution,
    bitrate_class: BitrateClass,
) -> Option<&SourceProfile> {
    profiles
        .iter()
        .find(|p| p.resolution == resolution && p.bitrate_class == bitrate_class)
}

/// Effective bandwidth cap in kbit/s for a profile under a bandwidth class:
/// twice the video max bitrate for `High`, 97.2% of it for `Low`.
pub fn effective_bandwidth_kbps(profile: &SourceProfile, bandwidth_class: BandwidthClass) -> f64 {
    match bandwidth_class {
        BandwidthClass::High => HIGH_BANDWIDTH_FACTOR * profile.video_max_bitrate_kbps,
        BandwidthClass::Low => LOW_BANDWIDTH_FACTOR * profile.video_max_bitrate_kbps,
    }
}

/// Smallest valid ACR score.
pub const ACR_MIN: u8 = 1;
/// Largest valid ACR score.
pub const ACR_MAX: u8 = 5;

/// A single subject's ACR score for one condition. Scores use the 5-point
/// categorical scale where excellent/good/fair/poor/bad map to 5..1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub condition_id: String,
    pub subject_id: String,
    pub score: u8,
}

/// Per-condition aggregate of subjective scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosRecord {
    pub condition_id: String,
    /// Arithmetic mean of the scores, in [1, 5].
    pub mos: f64,
    pub n_subjects: usize,
    /// Sample standard deviation (n-1 denominator), 0 when n = 1.
    pub stddev: f64,
    /// Half-width of the two-sided 95% confidence interval on the mean,
    /// t(0.975, n-1) * stddev / sqrt(n); 0 when n = 1.
    pub ci95_halfwidth: f64,
}

/// Names of the model input features, in vector order.
pub const FEATURE_NAMES: [&str; 11] = [
    "bits_per_pixel_per_frame",
    "av_delay_ms",
    "duration_s",
    "frame_count",
    "video_stream_size_kb",
    "audio_stream_size_kb",
    "overall_bitrate_kbps",
    "resolution_pixels",
    "plr_percent",
    "jitter_ms",
    "bandwidth_kbps",
];

/// Numeric model input for one condition: container-header features plus
/// the network side information. Field order matches [`FEATURE_NAMES`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub bits_per_pixel_per_frame: f64,
    pub av_delay_ms: f64,
    pub duration_s: f64,
    pub frame_count: f64,
    pub video_stream_size_kb: f64,
    pub audio_stream_size_kb: f64,
    pub overall_bitrate_kbps: f64,
    pub resolution_pixels: f64,
    pub plr_percent: f64,
    pub jitter_ms: f64,
    pub bandwidth_kbps: f64,
}

impl FeatureVector {
    /// Number of features.
    pub const DIM: usize = FEATURE_NAMES.len();

    /// Values in [`FEATURE_NAMES`] order.
    pub fn to_values(&self) -> [f64; Self::DIM] {
        [
            self.bits_per_pixel_per_frame,
            self.av_delay_ms,
            self.duration_s,
            self.frame_count,
            self.video_stream_size_kb,
            self.audio_stream_size_kb,
            self.overall_bitrate_kbps,
            self.resolution_pixels,
            self.plr_percent,
            self.jitter_ms,
            self.bandwidth_kbps,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_values().iter().all(|v| v.is_finite())
    }
}
