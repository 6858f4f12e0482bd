//! Delay computation, 3-sigma outlier filtering and trip-record assembly
//! with the composite quality score.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::buffer::TripBufferEntry;
use super::gtfs::ScheduledTrip;
use super::{IngestError, TripRecord};
use crate::domain::{Stop, WeatherDaily};
use crate::geo::haversine_m;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityParams {
    /// ±window for corroborating a geofence arrival with a raw update.
    pub alignment_window_s: f64,
    /// Implied inter-stop speeds above this are implausible.
    pub max_speed_kmh: f64,
    pub weight_completeness: f64,
    pub weight_consistency: f64,
    pub weight_plausibility: f64,
    /// Records scoring below this are flagged and excluded from training.
    pub quality_threshold: f64,
}

impl Default for QualityParams {
    fn default() -> Self {
        Self {
            alignment_window_s: 120.0,
            max_speed_kmh: 100.0,
            weight_completeness: 0.5,
            weight_consistency: 0.25,
            weight_plausibility: 0.25,
            quality_threshold: 0.5,
        }
    }
}

/// Per-stop delays for geofence arrivals. A scheduled timepoint is matched
/// only when some raw position falls within ±`alignment_window_s` of the
/// arrival estimate; unmatched stops are excluded. Returns
/// (stop_id, observed_arrival, delay_s) triples.
pub fn compute_delays(
    observed: &[(String, f64)],
    trip: &ScheduledTrip,
    position_times: &[i64],
    alignment_window_s: f64,
) -> Vec<(String, f64, f64)> {
    let scheduled: BTreeMap<&str, i64> = trip.stop_times.iter().map(|(s, t)| (s.as_str(), *t)).collect();
    observed
        .iter()
        .filter(|(_, arrival)| {
            position_times
                .iter()
                .any(|&t| (t as f64 - arrival).abs() <= alignment_window_s)
        })
        .filter_map(|(stop_id, arrival)| {
            scheduled
                .get(stop_id.as_str())
                .map(|&sched| (stop_id.clone(), *arrival, arrival - sched as f64))
        })
        .collect()
}

/// 3-sigma filter: mean and population stdev are computed once over the whole
/// group (no iterative re-fitting); values with |x − mean| > k·σ are dropped.
/// Zero-variance groups keep everything. Returns the retention mask.
pub fn filter_outliers(values: &[f64], k_sigma: f64) -> Vec<bool> {
    let n = values.len();
    if n < 2 {
        return vec![true; n];
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let sigma = var.sqrt();
    if sigma == 0.0 {
        return vec![true; n];
    }
    values.iter().map(|v| (v - mean).abs() <= k_sigma * sigma).collect()
}

/// Weather for a service date, falling back to the nearest prior report
/// within 3 days.
pub fn lookup_weather(
    weather: &BTreeMap<NaiveDate, WeatherDaily>,
    date: NaiveDate,
) -> Result<WeatherDaily, IngestError> {
    for back in 0..=3 {
        let d = date - chrono::Days::new(back);
        if let Some(w) = weather.get(&d) {
            return Ok(*w);
        }
    }
    Err(IngestError::MissingWeather(date))
}

/// Assembles a validated TripRecord from a completed buffer entry. The
/// quality score is the weighted mean of completeness (matched stop
/// fraction), consistency (monotone arrivals) and plausibility (implied
/// inter-stop speeds under the ceiling).
pub fn build_trip_record(
    entry: &TripBufferEntry,
    trip: &ScheduledTrip,
    stops: &BTreeMap<String, Stop>,
    weather: &BTreeMap<NaiveDate, WeatherDaily>,
    schedule_version: &str,
    params: &QualityParams,
) -> Result<TripRecord, IngestError> {
    let arrivals = super::arrivals::detect_stop_arrivals(&entry.positions, trip, stops)?;
    let position_times: Vec<i64> = entry.positions.iter().map(|p| p.timestamp).collect();
    let matched = compute_delays(&arrivals, trip, &position_times, params.alignment_window_s);

    let completeness = matched.len() as f64 / trip.stop_times.len() as f64;

    let consistency = if matched.len() < 2 {
        1.0
    } else {
        let ordered = matched.windows(2).filter(|w| w[1].1 > w[0].1).count();
        ordered as f64 / (matched.len() - 1) as f64
    };

    let mut implausible_pairs = Vec::new();
    let plausibility = if matched.len() < 2 {
        1.0
    } else {
        let mut ok = 0usize;
        for w in matched.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let dt = b.1 - a.1;
            let dist = match (stops.get(&a.0), stops.get(&b.0)) {
                (Some(sa), Some(sb)) => haversine_m(sa.location, sb.location),
                _ => 0.0,
            };
            let speed_kmh = if dt > 0.0 { dist / dt * 3.6 } else { f64::INFINITY };
            if speed_kmh <= params.max_speed_kmh {
                ok += 1;
            } else {
                implausible_pairs.push((a.0.clone(), b.0.clone()));
            }
        }
        ok as f64 / (matched.len() - 1) as f64
    };

    let quality_score = params.weight_completeness * completeness
        + params.weight_consistency * consistency
        + params.weight_plausibility * plausibility;

    Ok(TripRecord {
        trip_id: trip.trip_id.clone(),
        route_id: trip.route_id.clone(),
        direction: trip.direction,
        service_date: trip.service_date,
        observed_arrivals: matched.iter().map(|(s, a, _)| (s.clone(), *a)).collect(),
        delays_s: matched.iter().map(|(_, _, d)| *d).collect(),
        weather: lookup_weather(weather, trip.service_date)?,
        quality_score,
        completeness,
        consistency,
        plausibility,
        flagged: quality_score < params.quality_threshold,
        implausible_pairs,
        schedule_version: schedule_version.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::GeoPoint;
    use crate::geo::offset;
    use crate::ingest::buffer::BufferState;
    use crate::ingest::rt::VehiclePosition;

    fn trip_with_schedule(n_stops: usize, spacing_s: i64) -> ScheduledTrip {
        ScheduledTrip {
            trip_id: "t1".into(),
            route_id: "R01".into(),
            direction: 0,
            service_date: NaiveDate::from_ymd_opt(2024, 9, 16).unwrap(),
            stop_times: (0..n_stops).map(|i| (format!("s{i}"), 1000 + spacing_s * i as i64)).collect(),
        }
    }

    #[test]
    fn delays_zero_when_on_schedule() {
        let trip = trip_with_schedule(3, 300);
        let observed: Vec<(String, f64)> = trip.stop_times.iter().map(|(s, t)| (s.clone(), *t as f64)).collect();
        let times: Vec<i64> = observed.iter().map(|(_, a)| *a as i64).collect();
        let delays = compute_delays(&observed, &trip, &times, 120.0);
        assert_eq!(delays.len(), 3);
        assert!(delays.iter().all(|(_, _, d)| *d == 0.0));
    }

    #[test]
    fn single_late_stop() {
        let trip = trip_with_schedule(2, 300);
        let observed = vec![("s0".to_string(), 1000.0), ("s1".to_string(), 1390.0)];
        let times = vec![1000, 1395];
        let delays = compute_delays(&observed, &trip, &times, 120.0);
        assert_eq!(delays[1].2, 90.0);
    }

    #[test]
    fn injected_offsets_recovered_exactly() {
        let trip = trip_with_schedule(4, 600);
        let offsets = [0.0, 30.0, -15.0, 120.0];
        let observed: Vec<(String, f64)> = trip
            .stop_times
            .iter()
            .zip(offsets)
            .map(|((s, t), off)| (s.clone(), *t as f64 + off))
            .collect();
        let times: Vec<i64> = observed.iter().map(|(_, a)| *a as i64).collect();
        let delays = compute_delays(&observed, &trip, &times, 120.0);
        let got: Vec<f64> = delays.iter().map(|(_, _, d)| *d).collect();
        assert_eq!(got, vec![0.0, 30.0, -15.0, 120.0]);
    }

    #[test]
    fn uncorroborated_arrival_unmatched() {
        let trip = trip_with_schedule(2, 300);
        let observed = vec![("s0".to_string(), 1000.0), ("s1".to_string(), 1300.0)];
        // No raw update anywhere near s1's arrival estimate.
        let times = vec![1000, 1020];
        let delays = compute_delays(&observed, &trip, &times, 120.0);
        assert_eq!(delays.len(), 1);
        assert_eq!(delays[0].0, "s0");
    }

    #[test]
    fn sigma_filter_textbook_group() {
        // {0,0,0,0,1000}: mean 200, σ = 400. |1000 − 200| = 800 ≤ 3σ = 1200,
        // so at k = 3 nothing is removed; at k = 1.5 (σ·1.5 = 600 < 800) the
        // 1000 goes.
        let vals = [0.0, 0.0, 0.0, 0.0, 1000.0];
        assert_eq!(filter_outliers(&vals, 3.0), vec![true; 5]);
        let mask15 = filter_outliers(&vals, 1.5);
        assert_eq!(mask15, vec![true, true, true, true, false]);
    }

    #[test]
    fn sigma_filter_zero_variance() {
        let vals = [5.0; 8];
        assert_eq!(filter_outliers(&vals, 3.0), vec![true; 8]);
    }

    #[test]
    fn sigma_filter_normal_rejection_rate() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(44);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let vals: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
        let rejected = filter_outliers(&vals, 3.0).iter().filter(|&&keep| !keep).count();
        let fraction = rejected as f64 / 10_000.0;
        // True rate 0.27% ± 0.15%.
        assert!((fraction - 0.0027).abs() < 0.0015, "rejection fraction {fraction}");
    }

    fn stops_along_line(n: usize, spacing_m: f64) -> BTreeMap<String, Stop> {
        let origin = GeoPoint::new(45.50, -73.57).unwrap();
        (0..n)
            .map(|i| {
                let p = offset(origin, 0.0, spacing_m * i as f64);
                (format!("s{i}"), Stop::new(format!("s{i}"), p, None).unwrap())
            })
            .collect()
    }

    fn entry_tracking_schedule(trip: &ScheduledTrip, stops: &BTreeMap<String, Stop>, step_s: i64) -> TripBufferEntry {
        // Drive the scheduled timeline exactly: position at each stop at its
        // scheduled time, with fill-in pings between stops.
        let mut positions = Vec::new();
        let stop_pts: Vec<(i64, GeoPoint)> = trip
            .stop_times
            .iter()
            .map(|(s, t)| (*t, stops[s].location))
            .collect();
        for w in stop_pts.windows(2) {
            let (t0, p0) = w[0];
            let (t1, p1) = w[1];
            let mut t = t0;
            while t < t1 {
                let frac = (t - t0) as f64 / (t1 - t0) as f64;
                let p = GeoPoint::new(p0.lat + frac * (p1.lat - p0.lat), p0.lon + frac * (p1.lon - p0.lon)).unwrap();
                positions.push(VehiclePosition {
                    vehicle_id: "v1".into(),
                    trip_id: Some(trip.trip_id.clone()),
                    route_id: Some(trip.route_id.clone()),
                    timestamp: t,
                    lat: p.lat,
                    lon: p.lon,
                });
                t += step_s;
            }
        }
        let (t_end, p_end) = *stop_pts.last().unwrap();
        positions.push(VehiclePosition {
            vehicle_id: "v1".into(),
            trip_id: Some(trip.trip_id.clone()),
            route_id: Some(trip.route_id.clone()),
            timestamp: t_end,
            lat: p_end.lat,
            lon: p_end.lon,
        });
        TripBufferEntry { trip_key: trip.key(), positions, last_update: t_end, state: BufferState::Complete }
    }

    fn weather_map() -> BTreeMap<NaiveDate, WeatherDaily> {
        let d = NaiveDate::from_ymd_opt(2024, 9, 16).unwrap();
        [(d, WeatherDaily::new(d, 15.0, 0.0, 0.0).unwrap())].into_iter().collect()
    }

    #[test]
    fn perfect_trip_scores_one() {
        let stops = stops_along_line(5, 700.0);
        let trip = trip_with_schedule(5, 120); // 700 m / 120 s ≈ 21 km/h
        let entry = entry_tracking_schedule(&trip, &stops, 10);
        let record = build_trip_record(&entry, &trip, &stops, &weather_map(), "v1", &QualityParams::default()).unwrap();
        assert_eq!(record.observed_arrivals.len(), 5);
        assert!((record.quality_score - 1.0).abs() < 1e-9, "score {}", record.quality_score);
        assert!(!record.flagged);
        assert_eq!(record.delays_s.len(), record.observed_arrivals.len());
        // Geofence arrivals lead the stop-center schedule by R/speed
        // (~17 s at 5.8 m/s); the lead is uniform, so consecutive arrival
        // gaps still match the schedule and the bias cancels in pace.
        for d in &record.delays_s {
            assert!(d.abs() < 100.0 / (700.0 / 120.0) + 2.0, "delay {d}");
        }
        for (w, sched) in record.observed_arrivals.windows(2).zip(trip.stop_times.windows(2)) {
            let gap = w[1].1 - w[0].1;
            let sched_gap = (sched[1].1 - sched[0].1) as f64;
            assert!((gap - sched_gap).abs() < 2.0, "gap {gap} vs {sched_gap}");
        }
    }

    #[test]
    fn completeness_term_is_matched_fraction() {
        let stops = stops_along_line(10, 700.0);
        let mut trip = trip_with_schedule(10, 120);
        // Only the first 6 stops are driven.
        trip.stop_times.truncate(10);
        let mut short = trip.clone();
        short.stop_times.truncate(6);
        let entry = entry_tracking_schedule(&short, &stops, 10);
        let record = build_trip_record(&entry, &trip, &stops, &weather_map(), "v1", &QualityParams::default()).unwrap();
        assert_eq!(record.observed_arrivals.len(), 6);
        assert!((record.completeness - 0.6).abs() < 1e-12);
        assert!((record.consistency - 1.0).abs() < 1e-12);
    }

    #[test]
    fn teleport_penalizes_plausibility() {
        let stops = stops_along_line(4, 5000.0);
        // 5 km between stops in 60 s ⇒ 300 km/h between every pair.
        let trip = trip_with_schedule(4, 60);
        let entry = entry_tracking_schedule(&trip, &stops, 5);
        let record = build_trip_record(&entry, &trip, &stops, &weather_map(), "v1", &QualityParams::default()).unwrap();
        assert!(record.plausibility < 1.0, "plausibility {}", record.plausibility);
        assert!(record.quality_score < 1.0);
        assert!(!record.implausible_pairs.is_empty());
    }

    #[test]
    fn weather_falls_back_three_days() {
        let d16 = NaiveDate::from_ymd_opt(2024, 9, 16).unwrap();
        let map = weather_map();
        assert!(lookup_weather(&map, d16 + chrono::Days::new(3)).is_ok());
        assert!(matches!(
            lookup_weather(&map, d16 + chrono::Days::new(4)),
            Err(IngestError::MissingWeather(_))
        ));
    }
}
