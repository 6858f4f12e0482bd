//! Geofence-based stop arrival detection. For each scheduled stop, the
//! observed arrival is the instant the trace first enters the 100 m circle
//! around the stop, linearly interpolated between the last position outside
//! and the first inside. Pure function of its inputs.

use std::collections::BTreeMap;

use super::gtfs::ScheduledTrip;
use super::rt::VehiclePosition;
use super::IngestError;
use crate::domain::Stop;
use crate::geo::haversine_m;

pub const GEOFENCE_RADIUS_M: f64 = 100.0;

/// Detects stop arrivals along the scheduled stop sequence. Stops whose
/// geofence is never entered are omitted; output order follows the stop
/// sequence. Errors with `EmptyTrace` when no stop is ever entered.
pub fn detect_stop_arrivals(
    positions: &[VehiclePosition],
    trip: &ScheduledTrip,
    stops: &BTreeMap<String, Stop>,
) -> Result<Vec<(String, f64)>, IngestError> {
    if positions.is_empty() {
        return Err(IngestError::EmptyTrace(trip.key()));
    }
    let mut out: Vec<(String, f64)> = Vec::new();
    // Scan resumes where the previous stop was found, keeping the output
    // order-preserving along the trace.
    let mut scan_from = 0usize;
    for (stop_id, _) in &trip.stop_times {
        let Some(stop) = stops.get(stop_id) else {
            continue;
        };
        let mut found: Option<(usize, f64)> = None;
        for i in scan_from..positions.len() {
            let p = &positions[i];
            let Ok(loc) = p.location() else { continue };
            let dist = haversine_m(loc, stop.location);
            if dist <= GEOFENCE_RADIUS_M {
                let arrival = if i == scan_from {
                    // Already inside at the scan start.
                    p.timestamp as f64
                } else {
                    let prev = &positions[i - 1];
                    let prev_dist = match prev.location() {
                        Ok(l) => haversine_m(l, stop.location),
                        Err(_) => dist,
                    };
                    if prev_dist <= GEOFENCE_RADIUS_M || prev_dist <= dist {
                        p.timestamp as f64
                    } else {
                        // Linear interpolation of the circle crossing between
                        // the last-outside and first-inside samples.
                        let t = (prev_dist - GEOFENCE_RADIUS_M) / (prev_dist - dist);
                        prev.timestamp as f64 + t * (p.timestamp - prev.timestamp) as f64
                    }
                };
                found = Some((i, arrival));
                break;
            }
        }
        if let Some((i, arrival)) = found {
            out.push((stop_id.clone(), arrival));
            scan_from = i;
        }
    }
    if out.is_empty() {
        return Err(IngestError::EmptyTrace(trip.key()));
    }
    Ok(out)
}
