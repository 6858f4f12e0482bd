//! Ingestion: GTFS static schedules, GTFS-RT vehicle positions (protobuf or
//! NDJSON replay), and daily weather files, turned into validated trip
//! records and elementary-segment pace observations.

mod archive;
mod arrivals;
mod buffer;
mod explode;
mod gtfs;
mod quality;
mod rt;
mod weather;

pub use archive::{archive_processed, recovery_scan};
pub use arrivals::{detect_stop_arrivals, GEOFENCE_RADIUS_M};
pub use buffer::{BufferState, TripBuffer, TripBufferEntry};
pub use explode::explode_to_pace;
pub use gtfs::{load_gtfs_static, RouteTopology, ScheduleSnapshot, ScheduledTrip};
pub use quality::{build_trip_record, compute_delays, filter_outliers, QualityParams};
pub use rt::{parse_gtfs_rt, read_replay_ndjson, write_replay_ndjson, VehiclePosition};
pub use weather::{load_weather_csv, weather_for_date};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::WeatherDaily;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed feed: {0}")]
    MalformedFeed(String),
    #[error("empty feed: {0}")]
    EmptyFeed(String),
    #[error("empty trace for trip {0}: no stop geofence was ever entered")]
    EmptyTrace(String),
    #[error("missing weather for {0} (no report within 3 prior days)")]
    MissingWeather(NaiveDate),
    #[error("unknown segment {0}")]
    UnknownSegment(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Domain(#[from] crate::domain::DomainError),
    #[error("protobuf: {0}")]
    Protobuf(String),
}

/// One realized bus journey: observed arrivals, per-stop delays, weather and
/// a quality score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripRecord {
    pub trip_id: String,
    pub route_id: String,
    pub direction: u8,
    pub service_date: NaiveDate,
    /// (stop_id, observed arrival as UTC epoch seconds), order-preserving
    /// subset of the scheduled stop sequence.
    pub observed_arrivals: Vec<(String, f64)>,
    /// Seconds late (+) or early (−), aligned with `observed_arrivals`.
    pub delays_s: Vec<f64>,
    pub weather: WeatherDaily,
    pub quality_score: f64,
    pub completeness: f64,
    pub consistency: f64,
    pub plausibility: f64,
    /// Below the quality threshold: excluded from training sets.
    pub flagged: bool,
    /// Consecutive stop pairs with implausible implied speeds.
    pub implausible_pairs: Vec<(String, String)>,
    pub schedule_version: String,
}
