//! Elementary-segment explosion: each consecutive matched stop pair becomes
//! one segment traversal whose pace is spread uniformly over the segment's
//! elementary subdivision.

use std::collections::BTreeMap;

use crate::domain::{segment_id, PaceObservation, Segment};

use super::TripRecord;

/// Explodes a trip record into elementary pace observations. Segment travel
/// times come from consecutive matched arrivals; each elementary segment gets
/// the segment's uniform pace and an enter time interpolated by cumulative
/// length. Segments with non-positive travel time are skipped and counted.
pub fn explode_to_pace(
    record: &TripRecord,
    segments: &BTreeMap<String, Segment>,
    elementary_length_m: f64,
) -> (Vec<PaceObservation>, u64) {
    let mut out = Vec::new();
    let mut skipped = 0u64;
    for w in record.observed_arrivals.windows(2) {
        let (from_stop, t0) = (&w[0].0, w[0].1);
        let (to_stop, t1) = (&w[1].0, w[1].1);
        let travel_s = t1 - t0;
        if travel_s <= 0.0 {
            skipped += 1;
            continue;
        }
        let seg_id = segment_id(&record.route_id, record.direction, from_stop, to_stop);
        let Some(segment) = segments.get(&seg_id) else {
            skipped += 1;
            continue;
        };
        let pace = travel_s / segment.length_m;
        let mut cum = 0.0;
        for elem in segment.elementary(elementary_length_m) {
            let enter_time = t0 + travel_s * (cum / segment.length_m);
            cum += elem.length_m;
            out.push(PaceObservation {
                elementary_id: elem.id(),
                segment_id: seg_id.clone(),
                route_id: record.route_id.clone(),
                direction: record.direction,
                trip_id: record.trip_id.clone(),
                service_date: record.service_date,
                enter_time: enter_time.round() as i64,
                pace_s_per_m: pace,
                centroid: elem.centroid,
                cluster_id: crate::domain::CLUSTER_UNASSIGNED,
            });
        }
    }
    (out, skipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{GeoPoint, WeatherDaily};
    use crate::geo::offset;
    use chrono::NaiveDate;

    fn record(arrivals: Vec<(&str, f64)>) -> TripRecord {
        let d = NaiveDate::from_ymd_opt(2024, 9, 16).unwrap();
        TripRecord {
            trip_id: "t1".into(),
            route_id: "R01".into(),
            direction: 0,
            service_date: d,
            delays_s: vec![0.0; arrivals.len()],
            observed_arrivals: arrivals.into_iter().map(|(s, t)| (s.to_string(), t)).collect(),
            weather: WeatherDaily::new(d, 10.0, 0.0, 0.0).unwrap(),
            quality_score: 1.0,
            completeness: 1.0,
            consistency: 1.0,
            plausibility: 1.0,
            flagged: false,
            implausible_pairs: vec![],
            schedule_version: "v".into(),
        }
    }

    fn line_segments(lengths: &[f64]) -> BTreeMap<String, Segment> {
        let origin = GeoPoint::new(45.50, -73.57).unwrap();
        let mut out = BTreeMap::new();
        let mut cum = 0.0;
        for (i, &len) in lengths.iter().enumerate() {
            let a = offset(origin, 0.0, cum);
            cum += len;
            let b = offset(origin, 0.0, cum);
            let geom_len = crate::geo::polyline_length_m(&[a, b]);
            let seg = Segment::new("R01", 0, format!("s{i}"), format!("s{}", i + 1), geom_len, vec![a, b]).unwrap();
            out.insert(seg.id(), seg);
        }
        out
    }

    #[test]
    fn uniform_split_1000m_200s() {
        let segments = line_segments(&[1000.0]);
        let length = segments.values().next().unwrap().length_m;
        let rec = record(vec![("s0", 1000.0), ("s1", 1200.0)]);
        let (obs, skipped) = explode_to_pace(&rec, &segments, 100.0);
        assert_eq!(skipped, 0);
        assert_eq!(obs.len(), 10);
        for o in &obs {
            assert!((o.pace_s_per_m - 200.0 / length).abs() < 1e-12);
            assert!(o.pace_s_per_m > 0.0);
        }
        // Enter times advance by cumulative length: 20 s per 100 m piece.
        assert_eq!(obs[0].enter_time, 1000);
        assert!((obs[5].enter_time - 1100).abs() <= 1, "enter {}", obs[5].enter_time);
    }

    #[test]
    fn two_segments_of_ten_units() {
        let segments = line_segments(&[1000.0, 1000.0]);
        let rec = record(vec![("s0", 0.0), ("s1", 250.0), ("s2", 450.0)]);
        let (obs, skipped) = explode_to_pace(&rec, &segments, 100.0);
        assert_eq!(skipped, 0);
        assert_eq!(obs.len(), 20);
        // Count per segment.
        let first: usize = obs.iter().filter(|o| o.segment_id.contains("s0>s1")).count();
        assert_eq!(first, 10);
    }

    #[test]
    fn non_positive_travel_time_skipped() {
        let segments = line_segments(&[1000.0, 1000.0]);
        let rec = record(vec![("s0", 100.0), ("s1", 100.0), ("s2", 400.0)]);
        let (obs, skipped) = explode_to_pace(&rec, &segments, 100.0);
        assert_eq!(skipped, 1);
        assert_eq!(obs.len(), 10);
        assert!(obs.iter().all(|o| o.pace_s_per_m > 0.0));
    }

    #[test]
    fn unknown_segment_skipped() {
        let segments = line_segments(&[1000.0]);
        let rec = record(vec![("s5", 0.0), ("s6", 100.0)]);
        let (obs, skipped) = explode_to_pace(&rec, &segments, 100.0);
        assert!(obs.is_empty());
        assert_eq!(skipped, 1);
    }

    #[test]
    fn observation_count_matches_ceil_formula() {
        let lengths = [880.0, 1070.0, 670.0];
        let segments = line_segments(&lengths);
        let rec = record(vec![("s0", 0.0), ("s1", 200.0), ("s2", 420.0), ("s3", 560.0)]);
        let (obs, _) = explode_to_pace(&rec, &segments, 100.0);
        // Geometry lengths are within 0.5% of nominal; every remainder here
        // is ≥ E/2, so counts follow ceil(L/E).
        let expected: usize = segments.values().map(|s| (s.length_m / 100.0).ceil() as usize).sum();
        assert_eq!(obs.len(), expected);
    }
}
