//! Trip integrity buffer: accumulates vehicle positions per trip instance
//! until the trip goes stale (no update for an hour), then flushes it as
//! complete — or expired when it gathered too few positions to be usable.
//!
//! Single-writer structure: ingest and flush must be serialized per buffer
//! instance; reads of a flushed entry are free.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::gtfs::{ScheduleSnapshot, ScheduledTrip};
use super::rt::VehiclePosition;

/// Staleness bound: a trip with no update for this long is finished.
pub const TRIP_TIMEOUT_S: i64 = 3600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BufferState {
    Active,
    Complete,
    Expired,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripBufferEntry {
    /// `trip_id@service_date` instance key.
    pub trip_key: String,
    /// Sorted by timestamp, deduplicated on (vehicle_id, timestamp).
    pub positions: Vec<VehiclePosition>,
    pub last_update: i64,
    pub state: BufferState,
}

#[derive(Debug, Clone)]
pub struct TripBuffer {
    entries: BTreeMap<String, TripBufferEntry>,
    /// Entries flushed with fewer positions than this expire instead of
    /// completing.
    pub min_positions: usize,
}

impl Default for TripBuffer {
    fn default() -> Self {
        Self::new(5)
    }
}

impl TripBuffer {
    pub fn new(min_positions: usize) -> Self {
        Self { entries: BTreeMap::new(), min_positions }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, trip_key: &str) -> Option<&TripBufferEntry> {
        self.entries.get(trip_key)
    }

    pub fn total_positions(&self) -> usize {
        self.entries.values().map(|e| e.positions.len()).sum()
    }

    /// Appends a position to its trip entry, inserting out-of-order
    /// timestamps in order and dropping exact (vehicle_id, timestamp)
    /// duplicates. `trip_key` must already be resolved (see
    /// [`match_position`]).
    pub fn ingest(&mut self, trip_key: &str, position: VehiclePosition, now: i64) {
        let entry = self.entries.entry(trip_key.to_string()).or_insert_with(|| TripBufferEntry {
            trip_key: trip_key.to_string(),
            positions: Vec::new(),
            last_update: now,
            state: BufferState::Active,
        });
        entry.last_update = now;
        let dup = entry
            .positions
            .iter()
            .any(|p| p.vehicle_id == position.vehicle_id && p.timestamp == position.timestamp);
        if dup {
            return;
        }
        let at = entry.positions.partition_point(|p| p.timestamp <= position.timestamp);
        entry.positions.insert(at, position);
    }

    /// Removes entries stale for `TRIP_TIMEOUT_S` seconds and returns them,
    /// marked complete — or expired when they carry fewer than
    /// `min_positions` positions.
    pub fn flush(&mut self, now: i64) -> Vec<TripBufferEntry> {
        let stale: Vec<String> = self
            .entries
            .iter()
            .filter(|(_, e)| now - e.last_update >= TRIP_TIMEOUT_S)
            .map(|(k, _)| k.clone())
            .collect();
        let mut out = Vec::with_capacity(stale.len());
        for key in stale {
            let mut entry = self.entries.remove(&key).expect("key listed above");
            entry.state = if entry.positions.len() >= self.min_positions {
                BufferState::Complete
            } else {
                BufferState::Expired
            };
            out.push(entry);
        }
        out
    }
}

/// Resolves the trip instance for a position. Positions carrying a trip_id
/// match directly (scoped to the service day containing the timestamp);
/// otherwise the route's scheduled trip whose time window (±30 min slack)
/// contains the timestamp is chosen, ties broken by the nearest scheduled
/// start.
pub fn match_position(snapshot: &ScheduleSnapshot, position: &VehiclePosition) -> Option<String> {
    const SLACK_S: i64 = 1800;
    let candidates: Vec<&ScheduledTrip> = match (&position.trip_id, &position.route_id) {
        (Some(trip_id), _) => snapshot
            .trips
            .values()
            .filter(|t| &t.trip_id == trip_id)
            .collect(),
        (None, Some(route_id)) => snapshot
            .trips
            .values()
            .filter(|t| &t.route_id == route_id)
            .collect(),
        (None, None) => return None,
    };
    candidates
        .into_iter()
        .filter(|t| position.timestamp >= t.start() - SLACK_S && position.timestamp <= t.end() + SLACK_S)
        .min_by_key(|t| ((t.start() - position.timestamp).abs(), t.key()))
        .map(|t| t.key())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pos(vehicle: &str, ts: i64) -> VehiclePosition {
        VehiclePosition {
            vehicle_id: vehicle.into(),
            trip_id: Some("t1".into()),
            route_id: Some("R01".into()),
            timestamp: ts,
            lat: 45.5,
            lon: -73.57,
        }
    }

    #[test]
    fn ingest_single() {
        let mut buf = TripBuffer::default();
        buf.ingest("t1@2024-09-16", pos("v1", 100), 100);
        assert_eq!(buf.len(), 1);
        assert_eq!(buf.entry("t1@2024-09-16").unwrap().positions.len(), 1);
        assert_eq!(buf.entry("t1@2024-09-16").unwrap().state, BufferState::Active);
    }

    #[test]
    fn duplicate_is_idempotent() {
        let mut buf = TripBuffer::default();
        buf.ingest("k", pos("v1", 100), 100);
        buf.ingest("k", pos("v1", 100), 105);
        assert_eq!(buf.entry("k").unwrap().positions.len(), 1);
    }

    #[test]
    fn out_of_order_positions_sorted() {
        let mut buf = TripBuffer::default();
        buf.ingest("k", pos("v1", 300), 300);
        buf.ingest("k", pos("v1", 100), 301);
        buf.ingest("k", pos("v1", 200), 302);
        let ts: Vec<i64> = buf.entry("k").unwrap().positions.iter().map(|p| p.timestamp).collect();
        assert_eq!(ts, vec![100, 200, 300]);
    }

    #[test]
    fn flush_at_exact_timeout_boundary() {
        let mut buf = TripBuffer::new(2);
        for i in 0..20 {
            buf.ingest("k", pos("v1", i), 0);
        }
        // 3599 s stale: retained.
        assert!(buf.flush(3599).is_empty());
        assert_eq!(buf.len(), 1);
        // 3600 s stale: flushed complete.
        let flushed = buf.flush(3600);
        assert_eq!(flushed.len(), 1);
        assert_eq!(flushed[0].state, BufferState::Complete);
        assert!(buf.is_empty());
    }

    #[test]
    fn too_few_positions_expire() {
        let mut buf = TripBuffer::new(5);
        buf.ingest("k", pos("v1", 0), 0);
        buf.ingest("k", pos("v1", 10), 10);
        let flushed = buf.flush(4000);
        assert_eq!(flushed.len(), 1);
        assert_eq!(flushed[0].state, BufferState::Expired);
    }

    #[test]
    fn conservation_under_random_interleaving() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut buf = TripBuffer::new(1);
        let mut ingested = 0usize;
        let mut flushed = 0usize;
        let mut now = 0i64;
        let mut sent: std::collections::BTreeSet<(String, i64)> = Default::default();
        for step in 0..5000 {
            now += rng.random_range(0..200);
            if rng.random_bool(0.8) {
                let key = format!("trip{}", rng.random_range(0..20));
                let vehicle = format!("v{}", rng.random_range(0..5));
                let ts = now - rng.random_range(0..50);
                if sent.insert((format!("{key}/{vehicle}"), ts)) {
                    ingested += 1;
                }
                buf.ingest(&key, pos(&vehicle, ts), now);
            } else {
                flushed += buf.flush(now).iter().map(|e| e.positions.len()).sum::<usize>();
            }
            if step % 500 == 0 {
                assert_eq!(buf.total_positions() + flushed, ingested, "conservation at step {step}");
            }
        }
        flushed += buf.flush(now + TRIP_TIMEOUT_S).iter().map(|e| e.positions.len()).sum::<usize>();
        assert_eq!(flushed, ingested);
        assert!(buf.is_empty());
    }
}
