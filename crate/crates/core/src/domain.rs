//! Shared vocabulary types. Value objects only: everything is immutable after
//! construction and validation lives in the constructors.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo;

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("invalid coordinate: lat {lat}, lon {lon}")]
    InvalidPoint { lat: f64, lon: f64 },
    #[error("empty identifier for {0}")]
    EmptyId(&'static str),
    #[error("segment endpoints must differ (stop {0})")]
    DegenerateSegment(String),
    #[error("segment length {length_m} m disagrees with geometry length {geometry_m} m by more than 0.5%")]
    LengthMismatch { length_m: f64, geometry_m: f64 },
    #[error("segment geometry needs at least 2 points, got {0}")]
    ShortGeometry(usize),
    #[error("non-positive length: {0}")]
    NonPositiveLength(f64),
    #[error("pace must be finite and positive, got {0}")]
    InvalidPace(f64),
    #[error("negative weather quantity: {0}")]
    NegativeWeather(f64),
    #[error("enter_time {enter_time} outside service_date {service_date} ± 1 day")]
    TimeOutsideServiceDay { enter_time: i64, service_date: NaiveDate },
}

/// WGS84 coordinate, validated finite and in range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, DomainError> {
        if !lat.is_finite() || !lon.is_finite() || !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(DomainError::InvalidPoint { lat, lon });
        }
        Ok(Self { lat, lon })
    }

    /// Unchecked constructor for interpolated points that stay in range by
    /// construction (city-scale geometry only).
    pub(crate) fn raw(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stop {
    pub stop_id: String,
    pub location: GeoPoint,
    pub name: Option<String>,
}

impl Stop {
    pub fn new(stop_id: impl Into<String>, location: GeoPoint, name: Option<String>) -> Result<Self, DomainError> {
        let stop_id = stop_id.into();
        if stop_id.is_empty() {
            return Err(DomainError::EmptyId("stop_id"));
        }
        Ok(Self { stop_id, location, name })
    }
}

/// Directed pair of consecutive stops on a route, with its polyline geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub route_id: String,
    pub direction: u8,
    pub from_stop: String,
    pub to_stop: String,
    pub length_m: f64,
    pub geometry: Vec<GeoPoint>,
}

impl Segment {
    pub fn new(
        route_id: impl Into<String>,
        direction: u8,
        from_stop: impl Into<String>,
        to_stop: impl Into<String>,
        length_m: f64,
        geometry: Vec<GeoPoint>,
    ) -> Result<Self, DomainError> {
        let from_stop = from_stop.into();
        let to_stop = to_stop.into();
        if from_stop == to_stop {
            return Err(DomainError::DegenerateSegment(from_stop));
        }
        if geometry.len() < 2 {
            return Err(DomainError::ShortGeometry(geometry.len()));
        }
        if !(length_m > 0.0) {
            return Err(DomainError::NonPositiveLength(length_m));
        }
        let geometry_m = geo::polyline_length_m(&geometry);
        if (geometry_m - length_m).abs() > 0.005 * length_m {
            return Err(DomainError::LengthMismatch { length_m, geometry_m });
        }
        Ok(Self {
            route_id: route_id.into(),
            direction,
            from_stop,
            to_stop,
            length_m,
            geometry,
        })
    }

    /// Canonical segment identifier: `route:direction:from>to`.
    pub fn id(&self) -> String {
        segment_id(&self.route_id, self.direction, &self.from_stop, &self.to_stop)
    }

    /// Subdivides the segment into elementary segments of nominal length `e`.
    pub fn elementary(&self, e: f64) -> Vec<ElementarySegment> {
        let lengths = elementary_lengths(self.length_m, e);
        let seg_id = self.id();
        let mut cum = 0.0;
        lengths
            .iter()
            .enumerate()
            .map(|(index, &len)| {
                let centroid = geo::point_along(&self.geometry, cum + len / 2.0);
                cum += len;
                ElementarySegment {
                    segment_id: seg_id.clone(),
                    index,
                    length_m: len,
                    centroid,
                }
            })
            .collect()
    }
}

pub fn segment_id(route_id: &str, direction: u8, from_stop: &str, to_stop: &str) -> String {
    format!("{route_id}:{direction}:{from_stop}>{to_stop}")
}

/// Lengths of the elementary subdivision of a segment of length `l` with
/// nominal elementary length `e`. All pieces have length `e` except the last,
/// which carries the remainder; remainders shorter than `e/2` are merged into
/// the previous piece.
pub fn elementary_lengths(l: f64, e: f64) -> Vec<f64> {
    assert!(l > 0.0 && e > 0.0);
    if l <= e {
        return vec![l];
    }
    let k = (l / e).floor() as usize;
    let rem = l - k as f64 * e;
    if rem < 1e-9 {
        vec![e; k]
    } else if rem < e / 2.0 {
        let mut v = vec![e; k];
        *v.last_mut().unwrap() = e + rem;
        v
    } else {
        let mut v = vec![e; k + 1];
        *v.last_mut().unwrap() = rem;
        v
    }
}

/// Fixed-length subdivision of a segment; the model's prediction unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementarySegment {
    pub segment_id: String,
    pub index: usize,
    pub length_m: f64,
    pub centroid: GeoPoint,
}

impl ElementarySegment {
    /// Canonical elementary identifier: `segment_id#index`.
    pub fn id(&self) -> String {
        elementary_id(&self.segment_id, self.index)
    }
}

pub fn elementary_id(segment_id: &str, index: usize) -> String {
    format!("{segment_id}#{index}")
}

/// Cluster id sentinel for observations not yet assigned.
pub const CLUSTER_UNASSIGNED: i32 = -1;

/// One elementary-segment traversal: the modeling row. `pace_s_per_m` is the
/// regression target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaceObservation {
    pub elementary_id: String,
    pub segment_id: String,
    pub route_id: String,
    pub direction: u8,
    pub trip_id: String,
    pub service_date: NaiveDate,
    /// UTC epoch seconds at which the bus entered the elementary segment.
    pub enter_time: i64,
    pub pace_s_per_m: f64,
    pub centroid: GeoPoint,
    pub cluster_id: i32,
}

impl PaceObservation {
    pub fn validate(&self) -> Result<(), DomainError> {
        if !self.pace_s_per_m.is_finite() || self.pace_s_per_m <= 0.0 {
            return Err(DomainError::InvalidPace(self.pace_s_per_m));
        }
        // Overnight trips may spill into the neighbouring day.
        let day_start = self
            .service_date
            .and_hms_opt(0, 0, 0)
            .unwrap()
            .and_utc()
            .timestamp();
        if self.enter_time < day_start - 86_400 || self.enter_time > day_start + 2 * 86_400 {
            return Err(DomainError::TimeOutsideServiceDay {
                enter_time: self.enter_time,
                service_date: self.service_date,
            });
        }
        Ok(())
    }
}

/// Daily city-wide weather, joined to trips by service date.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherDaily {
    pub date: NaiveDate,
    pub temperature_c: f64,
    pub precipitation_mm: f64,
    pub snow_cm: f64,
}

impl WeatherDaily {
    pub fn new(date: NaiveDate, temperature_c: f64, precipitation_mm: f64, snow_cm: f64) -> Result<Self, DomainError> {
        if precipitation_mm < 0.0 {
            return Err(DomainError::NegativeWeather(precipitation_mm));
        }
        if snow_cm < 0.0 {
            return Err(DomainError::NegativeWeather(snow_cm));
        }
        Ok(Self { date, temperature_c, precipitation_mm, snow_cm })
    }
}
