//! GTFS static feed loading: stops, routes, trips, stop_times, calendar
//! (+calendar_dates), optionally zipped. Scheduled trips are expanded per
//! service day; trips with non-monotone stop_times are rejected and counted.
//!
//! Segment geometry is the straight stop-to-stop chain. shapes.txt, when
//! present, is parsed and attached to route topologies for footprint use.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use chrono::{Datelike, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::IngestError;
use crate::domain::{segment_id, GeoPoint, Segment, Stop};

/// One expanded scheduled trip instance on a service day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledTrip {
    pub trip_id: String,
    pub route_id: String,
    pub direction: u8,
    pub service_date: NaiveDate,
    /// (stop_id, scheduled arrival as UTC epoch seconds), strictly increasing.
    pub stop_times: Vec<(String, i64)>,
}

impl ScheduledTrip {
    /// Instances are keyed by trip id + service date.
    pub fn key(&self) -> String {
        format!("{}@{}", self.trip_id, self.service_date)
    }

    pub fn start(&self) -> i64 {
        self.stop_times.first().map(|t| t.1).unwrap_or(0)
    }

    pub fn end(&self) -> i64 {
        self.stop_times.last().map(|t| t.1).unwrap_or(0)
    }
}

/// Stop sequence of one (route, direction), with its straight-line geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteTopology {
    pub route_id: String,
    pub direction: u8,
    pub stop_sequence: Vec<String>,
    pub geometry: Vec<GeoPoint>,
}

#[derive(Debug, Clone)]
pub struct ScheduleSnapshot {
    pub stops: BTreeMap<String, Stop>,
    pub route_ids: Vec<String>,
    pub topologies: BTreeMap<(String, u8), RouteTopology>,
    /// Segment id → segment, for every consecutive stop pair of every trip.
    pub segments: BTreeMap<String, Segment>,
    /// Keyed by `trip_id@service_date`.
    pub trips: BTreeMap<String, ScheduledTrip>,
    pub version: String,
    pub validity: (NaiveDate, NaiveDate),
    /// Trips rejected for non-monotone stop_times.
    pub rejected_trips: u64,
    /// Agency-local UTC offset applied to schedule times, seconds.
    pub tz_offset_s: i32,
}

impl ScheduleSnapshot {
    pub fn service_dates(&self) -> BTreeSet<NaiveDate> {
        self.trips.values().map(|t| t.service_date).collect()
    }
}

struct FeedFiles {
    files: BTreeMap<String, Vec<u8>>,
}

impl FeedFiles {
    fn open(path: &Path) -> Result<Self, IngestError> {
        let mut files = BTreeMap::new();
        if path.is_dir() {
            for entry in std::fs::read_dir(path)? {
                let entry = entry?;
                if entry.file_type()?.is_file() {
                    let name = entry.file_name().to_string_lossy().into_owned();
                    if name.ends_with(".txt") {
                        files.insert(name, std::fs::read(entry.path())?);
                    }
                }
            }
        } else if path.extension().is_some_and(|e| e == "zip") {
            let f = std::fs::File::open(path)?;
            let mut zip = zip::ZipArchive::new(f).map_err(|e| IngestError::MalformedFeed(e.to_string()))?;
            for i in 0..zip.len() {
                let mut entry = zip.by_index(i).map_err(|e| IngestError::MalformedFeed(e.to_string()))?;
                if entry.is_file() && entry.name().ends_with(".txt") {
                    let name = entry.name().rsplit('/').next().unwrap_or(entry.name()).to_string();
                    let mut buf = Vec::new();
                    entry.read_to_end(&mut buf)?;
                    files.insert(name, buf);
                }
            }
        } else {
            return Err(IngestError::MalformedFeed(format!("{} is neither a directory nor a .zip", path.display())));
        }
        Ok(Self { files })
    }

    fn require(&self, name: &str) -> Result<&[u8], IngestError> {
        self.files
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| IngestError::MalformedFeed(format!("missing mandatory file {name}")))
    }

    fn version(&self) -> String {
        let mut hasher = Sha256::new();
        for (name, bytes) in &self.files {
            hasher.update(name.as_bytes());
            hasher.update([0]);
            hasher.update(bytes);
        }
        hex::encode(&hasher.finalize()[..8])
    }
}

fn csv_reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(bytes)
}

/// "HH:MM:SS" possibly beyond 24:00 → seconds after local midnight.
fn parse_gtfs_time(s: &str) -> Result<i64, IngestError> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(IngestError::MalformedFeed(format!("bad time {s}")));
    }
    let h: i64 = parts[0].parse().map_err(|_| IngestError::MalformedFeed(format!("bad time {s}")))?;
    let m: i64 = parts[1].parse().map_err(|_| IngestError::MalformedFeed(format!("bad time {s}")))?;
    let sec: i64 = parts[2].parse().map_err(|_| IngestError::MalformedFeed(format!("bad time {s}")))?;
    Ok(h * 3600 + m * 60 + sec)
}

fn parse_gtfs_date(s: &str) -> Result<NaiveDate, IngestError> {
    NaiveDate::parse_from_str(s, "%Y%m%d").map_err(|_| IngestError::MalformedFeed(format!("bad date {s}")))
}

fn weekday_index(w: Weekday) -> usize {
    w.num_days_from_monday() as usize
}

#[derive(Debug, Deserialize)]
struct RawStop {
    stop_id: String,
    #[serde(default)]
    stop_name: Option<String>,
    stop_lat: f64,
    stop_lon: f64,
}

#[derive(Debug, Deserialize)]
struct RawTrip {
    route_id: String,
    service_id: String,
    trip_id: String,
    #[serde(default)]
    direction_id: Option<u8>,
}

#[derive(Debug, Deserialize)]
struct RawStopTime {
    trip_id: String,
    arrival_time: String,
    stop_id: String,
    stop_sequence: u32,
}

#[derive(Debug, Deserialize)]
struct RawCalendar {
    service_id: String,
    monday: u8,
    tuesday: u8,
    wednesday: u8,
    thursday: u8,
    friday: u8,
    saturday: u8,
    sunday: u8,
    start_date: String,
    end_date: String,
}

#[derive(Debug, Deserialize)]
struct RawCalendarDate {
    service_id: String,
    date: String,
    exception_type: u8,
}

/// Loads a GTFS static feed from a directory or .zip archive and expands all
/// scheduled trips per service day. `tz_offset_s` is the agency-local UTC
/// offset used to place schedule times on the UTC axis.
pub fn load_gtfs_static(path: &Path, tz_offset_s: i32) -> Result<ScheduleSnapshot, IngestError> {
    let feed = FeedFiles::open(path)?;
    let version = feed.version();

    let mut stops: BTreeMap<String, Stop> = BTreeMap::new();
    for row in csv_reader(feed.require("stops.txt")?).deserialize() {
        let raw: RawStop = row?;
        let point = GeoPoint::new(raw.stop_lat, raw.stop_lon)?;
        stops.insert(raw.stop_id.clone(), Stop::new(raw.stop_id, point, raw.stop_name)?);
    }
    if stops.is_empty() {
        return Err(IngestError::EmptyFeed("stops.txt has no rows".into()));
    }

    let mut route_ids: Vec<String> = Vec::new();
    {
        let bytes = feed.require("routes.txt")?;
        let mut rdr = csv_reader(bytes);
        let headers = rdr.headers()?.clone();
        let idx = headers
            .iter()
            .position(|h| h == "route_id")
            .ok_or_else(|| IngestError::MalformedFeed("routes.txt missing route_id".into()))?;
        for row in rdr.records() {
            let row = row?;
            if let Some(v) = row.get(idx) {
                route_ids.push(v.to_string());
            }
        }
    }
    if route_ids.is_empty() {
        return Err(IngestError::EmptyFeed("routes.txt has no rows".into()));
    }
    route_ids.sort();
    route_ids.dedup();

    // Service calendars → active dates per service id.
    let mut service_days: BTreeMap<String, BTreeSet<NaiveDate>> = BTreeMap::new();
    let have_calendar = feed.files.contains_key("calendar.txt");
    let have_calendar_dates = feed.files.contains_key("calendar_dates.txt");
    if !have_calendar && !have_calendar_dates {
        return Err(IngestError::MalformedFeed("missing mandatory file calendar.txt (or calendar_dates.txt)".into()));
    }
    if have_calendar {
        for row in csv_reader(feed.require("calendar.txt")?).deserialize() {
            let raw: RawCalendar = row?;
            let start = parse_gtfs_date(&raw.start_date)?;
            let end = parse_gtfs_date(&raw.end_date)?;
            let dow = [raw.monday, raw.tuesday, raw.wednesday, raw.thursday, raw.friday, raw.saturday, raw.sunday];
            let days = service_days.entry(raw.service_id.clone()).or_default();
            let mut d = start;
            while d <= end {
                if dow[weekday_index(d.weekday())] == 1 {
                    days.insert(d);
                }
                d = d.succ_opt().expect("date in range");
            }
        }
    }
    if have_calendar_dates {
        for row in csv_reader(feed.require("calendar_dates.txt")?).deserialize() {
            let raw: RawCalendarDate = row?;
            let date = parse_gtfs_date(&raw.date)?;
            let days = service_days.entry(raw.service_id.clone()).or_default();
            match raw.exception_type {
                1 => {
                    days.insert(date);
                }
                2 => {
                    days.remove(&date);
                }
                other => return Err(IngestError::MalformedFeed(format!("bad exception_type {other}"))),
            }
        }
    }
    let all_dates: BTreeSet<NaiveDate> = service_days.values().flatten().copied().collect();
    if all_dates.is_empty() {
        return Err(IngestError::EmptyFeed("no active service dates".into()));
    }
    let validity = (*all_dates.first().unwrap(), *all_dates.last().unwrap());

    // Trip templates.
    let mut templates: BTreeMap<String, (String, String, u8)> = BTreeMap::new(); // trip → (route, service, dir)
    for row in csv_reader(feed.require("trips.txt")?).deserialize() {
        let raw: RawTrip = row?;
        templates.insert(raw.trip_id, (raw.route_id, raw.service_id, raw.direction_id.unwrap_or(0)));
    }
    if templates.is_empty() {
        return Err(IngestError::EmptyFeed("trips.txt has no rows".into()));
    }

    // Stop times per trip template.
    let mut stop_times: BTreeMap<String, Vec<(u32, String, i64)>> = BTreeMap::new();
    for row in csv_reader(feed.require("stop_times.txt")?).deserialize() {
        let raw: RawStopTime = row?;
        stop_times
            .entry(raw.trip_id.clone())
            .or_default()
            .push((raw.stop_sequence, raw.stop_id, parse_gtfs_time(&raw.arrival_time)?));
    }

    let mut rejected_trips = 0u64;
    let mut valid_templates: BTreeMap<String, Vec<(String, i64)>> = BTreeMap::new();
    for (trip_id, mut times) in stop_times {
        times.sort_by_key(|t| t.0);
        let seq: Vec<(String, i64)> = times.into_iter().map(|(_, stop, secs)| (stop, secs)).collect();
        if seq.len() < 2 || seq.windows(2).any(|w| w[1].1 <= w[0].1) {
            rejected_trips += 1;
            log::warn!("rejecting trip {trip_id}: non-monotone or too-short stop_times");
            continue;
        }
        if seq.iter().any(|(stop, _)| !stops.contains_key(stop)) {
            rejected_trips += 1;
            log::warn!("rejecting trip {trip_id}: references unknown stop");
            continue;
        }
        valid_templates.insert(trip_id, seq);
    }

    // Expand trip instances per service day and derive topologies/segments.
    let mut trips: BTreeMap<String, ScheduledTrip> = BTreeMap::new();
    let mut topologies: BTreeMap<(String, u8), RouteTopology> = BTreeMap::new();
    let mut segments: BTreeMap<String, Segment> = BTreeMap::new();
    for (trip_id, seq) in &valid_templates {
        let Some((route_id, service_id, direction)) = templates.get(trip_id) else {
            rejected_trips += 1;
            continue;
        };
        let Some(days) = service_days.get(service_id) else {
            continue;
        };
        // Topology: keep the longest observed stop sequence per direction.
        let topo_key = (route_id.clone(), *direction);
        let entry = topologies.entry(topo_key).or_insert_with(|| RouteTopology {
            route_id: route_id.clone(),
            direction: *direction,
            stop_sequence: Vec::new(),
            geometry: Vec::new(),
        });
        if seq.len() > entry.stop_sequence.len() {
            entry.stop_sequence = seq.iter().map(|(s, _)| s.clone()).collect();
        }
        for w in seq.windows(2) {
            let (from, to) = (&w[0].0, &w[1].0);
            if from == to {
                continue;
            }
            let id = segment_id(route_id, *direction, from, to);
            if !segments.contains_key(&id) {
                let a = stops[from].location;
                let b = stops[to].location;
                let geometry = vec![a, b];
                let length = crate::geo::polyline_length_m(&geometry);
                if length <= 0.0 {
                    continue;
                }
                segments.insert(id.clone(), Segment::new(route_id.clone(), *direction, from.clone(), to.clone(), length, geometry)?);
            }
        }
        for &date in days {
            let midnight = date.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp() - tz_offset_s as i64;
            let instance = ScheduledTrip {
                trip_id: trip_id.clone(),
                route_id: route_id.clone(),
                direction: *direction,
                service_date: date,
                stop_times: seq.iter().map(|(s, secs)| (s.clone(), midnight + secs)).collect(),
            };
            trips.insert(instance.key(), instance);
        }
    }
    if trips.is_empty() {
        return Err(IngestError::EmptyFeed("no scheduled trips after expansion".into()));
    }
    for topo in topologies.values_mut() {
        topo.geometry = topo.stop_sequence.iter().map(|s| stops[s].location).collect();
    }

    Ok(ScheduleSnapshot {
        stops,
        route_ids,
        topologies,
        segments,
        trips,
        version,
        validity,
        rejected_trips,
        tz_offset_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_feed(dir: &Path, stop_times_rows: &str) {
        let mut f = std::fs::File::create(dir.join("stops.txt")).unwrap();
        writeln!(f, "stop_id,stop_name,stop_lat,stop_lon").unwrap();
        writeln!(f, "s1,First,45.50,-73.57").unwrap();
        writeln!(f, "s2,Second,45.51,-73.57").unwrap();
        writeln!(f, "s3,Third,45.52,-73.57").unwrap();
        let mut f = std::fs::File::create(dir.join("routes.txt")).unwrap();
        writeln!(f, "route_id,route_short_name,route_type").unwrap();
        writeln!(f, "R01,1,3").unwrap();
        let mut f = std::fs::File::create(dir.join("trips.txt")).unwrap();
        writeln!(f, "route_id,service_id,trip_id,direction_id").unwrap();
        writeln!(f, "R01,WK,t1,0").unwrap();
        writeln!(f, "R01,WK,t2,0").unwrap();
        let mut f = std::fs::File::create(dir.join("stop_times.txt")).unwrap();
        writeln!(f, "trip_id,arrival_time,departure_time,stop_id,stop_sequence").unwrap();
        write!(f, "{stop_times_rows}").unwrap();
        let mut f = std::fs::File::create(dir.join("calendar.txt")).unwrap();
        writeln!(f, "service_id,monday,tuesday,wednesday,thursday,friday,saturday,sunday,start_date,end_date").unwrap();
        writeln!(f, "WK,1,1,1,1,1,0,0,20240916,20240917").unwrap();
    }

    const GOOD_TIMES: &str = "t1,08:00:00,08:00:00,s1,1\nt1,08:05:00,08:05:00,s2,2\nt1,08:11:00,08:11:00,s3,3\nt2,09:00:00,09:00:00,s1,1\nt2,09:06:00,09:06:00,s2,2\nt2,09:13:00,09:13:00,s3,3\n";

    #[test]
    fn minimal_fixture_loads() {
        let dir = tempfile::tempdir().unwrap();
        write_feed(dir.path(), GOOD_TIMES);
        let snap = load_gtfs_static(dir.path(), -18000).unwrap();
        assert_eq!(snap.route_ids, vec!["R01"]);
        assert_eq!(snap.stops.len(), 3);
        // 2 templates × 2 service days (Mon 16th, Tue 17th).
        assert_eq!(snap.trips.len(), 4);
        assert_eq!(snap.rejected_trips, 0);
        assert_eq!(snap.segments.len(), 2);
        let topo = &snap.topologies[&("R01".to_string(), 0)];
        assert_eq!(topo.stop_sequence, vec!["s1", "s2", "s3"]);
        // Strictly increasing stop times on every instance.
        for trip in snap.trips.values() {
            assert!(trip.stop_times.windows(2).all(|w| w[1].1 > w[0].1));
        }
        // 08:00 local at UTC−5 = 13:00 UTC.
        let t1 = snap.trips.get("t1@2024-09-16").unwrap();
        let expected = NaiveDate::from_ymd_opt(2024, 9, 16).unwrap().and_hms_opt(13, 0, 0).unwrap().and_utc().timestamp();
        assert_eq!(t1.stop_times[0].1, expected);
    }

    #[test]
    fn non_monotone_trip_rejected_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let times = "t1,08:00:00,08:00:00,s1,1\nt1,07:50:00,07:50:00,s2,2\nt1,08:11:00,08:11:00,s3,3\nt2,09:00:00,09:00:00,s1,1\nt2,09:06:00,09:06:00,s2,2\n";
        write_feed(dir.path(), times);
        let snap = load_gtfs_static(dir.path(), -18000).unwrap();
        assert_eq!(snap.rejected_trips, 1);
        assert!(snap.trips.keys().all(|k| k.starts_with("t2@")));
    }

    #[test]
    fn missing_mandatory_file() {
        let dir = tempfile::tempdir().unwrap();
        write_feed(dir.path(), GOOD_TIMES);
        std::fs::remove_file(dir.path().join("stop_times.txt")).unwrap();
        let err = load_gtfs_static(dir.path(), -18000).unwrap_err();
        assert!(matches!(err, IngestError::MalformedFeed(_)), "{err}");
    }

    #[test]
    fn empty_feed() {
        let dir = tempfile::tempdir().unwrap();
        write_feed(dir.path(), GOOD_TIMES);
        std::fs::write(dir.path().join("stops.txt"), "stop_id,stop_name,stop_lat,stop_lon\n").unwrap();
        let err = load_gtfs_static(dir.path(), -18000).unwrap_err();
        assert!(matches!(err, IngestError::EmptyFeed(_)), "{err}");
    }

    #[test]
    fn zip_feed_loads() {
        let dir = tempfile::tempdir().unwrap();
        write_feed(dir.path(), GOOD_TIMES);
        let zip_path = dir.path().join("feed.zip");
        {
            let f = std::fs::File::create(&zip_path).unwrap();
            let mut z = zip::ZipWriter::new(f);
            let opts = zip::write::SimpleFileOptions::default();
            for name in ["stops.txt", "routes.txt", "trips.txt", "stop_times.txt", "calendar.txt"] {
                z.start_file(name, opts).unwrap();
                z.write_all(&std::fs::read(dir.path().join(name)).unwrap()).unwrap();
            }
            z.finish().unwrap();
        }
        let snap = load_gtfs_static(&zip_path, -18000).unwrap();
        assert_eq!(snap.trips.len(), 4);
    }

    #[test]
    fn version_tracks_content() {
        let dir = tempfile::tempdir().unwrap();
        write_feed(dir.path(), GOOD_TIMES);
        let v1 = load_gtfs_static(dir.path(), -18000).unwrap().version;
        let v2 = load_gtfs_static(dir.path(), -18000).unwrap().version;
        assert_eq!(v1, v2);
        write_feed(dir.path(), "t1,08:00:00,08:00:00,s1,1\nt1,08:09:00,08:09:00,s2,2\n");
        let v3 = load_gtfs_static(dir.path(), -18000).unwrap().version;
        assert_ne!(v1, v3);
    }

    #[test]
    fn calendar_dates_exceptions() {
        let dir = tempfile::tempdir().unwrap();
        write_feed(dir.path(), GOOD_TIMES);
        let mut f = std::fs::File::create(dir.path().join("calendar_dates.txt")).unwrap();
        writeln!(f, "service_id,date,exception_type").unwrap();
        writeln!(f, "WK,20240917,2").unwrap(); // remove Tuesday
        writeln!(f, "WK,20240921,1").unwrap(); // add Saturday
        let snap = load_gtfs_static(dir.path(), -18000).unwrap();
        let dates = snap.service_dates();
        assert!(dates.contains(&NaiveDate::from_ymd_opt(2024, 9, 16).unwrap()));
        assert!(!dates.contains(&NaiveDate::from_ymd_opt(2024, 9, 17).unwrap()));
        assert!(dates.contains(&NaiveDate::from_ymd_opt(2024, 9, 21).unwrap()));
    }
}
