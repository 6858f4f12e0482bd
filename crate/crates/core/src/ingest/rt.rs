//! GTFS-RT vehicle positions. Accepts the protocol-buffer feed format (the
//! VehiclePosition subset of the public gtfs-realtime schema, declared inline
//! with prost) and a newline-delimited JSON replay format for fixtures.

use std::io::{BufRead, Write};
use std::path::Path;

use prost::Message;
use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::domain::GeoPoint;

/// One vehicle position observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehiclePosition {
    pub vehicle_id: String,
    #[serde(default)]
    pub trip_id: Option<String>,
    #[serde(default)]
    pub route_id: Option<String>,
    /// UTC epoch seconds.
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
}

impl VehiclePosition {
    pub fn location(&self) -> Result<GeoPoint, crate::domain::DomainError> {
        GeoPoint::new(self.lat, self.lon)
    }
}

// Wire-compatible subset of the public gtfs-realtime protobuf schema.
mod pb {
    use prost::Message;

    #[derive(Clone, PartialEq, Message)]
    pub struct FeedMessage {
        #[prost(message, optional, tag = "1")]
        pub header: Option<FeedHeader>,
        #[prost(message, repeated, tag = "2")]
        pub entity: Vec<FeedEntity>,
    }

    #[derive(Clone, PartialEq, Message)]
    pub struct FeedHeader {
        #[prost(string, tag = "1")]
        pub gtfs_realtime_version: String,
        #[prost(uint64, optional, tag = "3")]
        pub timestamp: Option<u64>,
    }

    #[derive(Clone, PartialEq, Message)]
    pub struct FeedEntity {
        #[prost(string, tag = "1")]
        pub id: String,
        #[prost(message, optional, tag = "4")]
        pub vehicle: Option<VehiclePosition>,
    }

    #[derive(Clone, PartialEq, Message)]
    pub struct VehiclePosition {
        #[prost(message, optional, tag = "1")]
        pub trip: Option<TripDescriptor>,
        #[prost(message, optional, tag = "2")]
        pub position: Option<Position>,
        #[prost(uint64, optional, tag = "5")]
        pub timestamp: Option<u64>,
        #[prost(message, optional, tag = "8")]
        pub vehicle: Option<VehicleDescriptor>,
    }

    #[derive(Clone, PartialEq, Message)]
    pub struct TripDescriptor {
        #[prost(string, optional, tag = "1")]
        pub trip_id: Option<String>,
        #[prost(string, optional, tag = "5")]
        pub route_id: Option<String>,
    }

    #[derive(Clone, PartialEq, Message)]
    pub struct Position {
        #[prost(float, tag = "1")]
        pub latitude: f32,
        #[prost(float, tag = "2")]
        pub longitude: f32,
    }

    #[derive(Clone, PartialEq, Message)]
    pub struct VehicleDescriptor {
        #[prost(string, optional, tag = "1")]
        pub id: Option<String>,
    }
}

/// Decodes a binary GTFS-RT FeedMessage into vehicle positions. Entities
/// without a position or timestamp are skipped.
pub fn parse_gtfs_rt(bytes: &[u8]) -> Result<Vec<VehiclePosition>, IngestError> {
    let feed = pb::FeedMessage::decode(bytes).map_err(|e| IngestError::Protobuf(e.to_string()))?;
    let mut out = Vec::new();
    for entity in feed.entity {
        let Some(vp) = entity.vehicle else { continue };
        let (Some(pos), Some(ts)) = (vp.position, vp.timestamp) else {
            continue;
        };
        let vehicle_id = vp.vehicle.and_then(|v| v.id).unwrap_or_else(|| entity.id.clone());
        let (trip_id, route_id) = match vp.trip {
            Some(t) => (t.trip_id, t.route_id),
            None => (None, None),
        };
        out.push(VehiclePosition {
            vehicle_id,
            trip_id,
            route_id,
            timestamp: ts as i64,
            lat: pos.latitude as f64,
            lon: pos.longitude as f64,
        });
    }
    Ok(out)
}

/// Encodes positions as a GTFS-RT FeedMessage (used by fixtures and tests).
pub fn encode_gtfs_rt(positions: &[VehiclePosition], feed_ts: u64) -> Vec<u8> {
    let feed = pb::FeedMessage {
        header: Some(pb::FeedHeader { gtfs_realtime_version: "2.0".into(), timestamp: Some(feed_ts) }),
        entity: positions
            .iter()
            .enumerate()
            .map(|(i, p)| pb::FeedEntity {
                id: format!("e{i}"),
                vehicle: Some(pb::VehiclePosition {
                    trip: Some(pb::TripDescriptor { trip_id: p.trip_id.clone(), route_id: p.route_id.clone() }),
                    position: Some(pb::Position { latitude: p.lat as f32, longitude: p.lon as f32 }),
                    timestamp: Some(p.timestamp as u64),
                    vehicle: Some(pb::VehicleDescriptor { id: Some(p.vehicle_id.clone()) }),
                }),
            })
            .collect(),
    };
    feed.encode_to_vec()
}

/// Reads the NDJSON replay format: one position object per line.
pub fn read_replay_ndjson(path: &Path) -> Result<Vec<VehiclePosition>, IngestError> {
    let f = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let pos: VehiclePosition = serde_json::from_str(&line)
            .map_err(|e| IngestError::MalformedFeed(format!("replay line {}: {e}", lineno + 1)))?;
        out.push(pos);
    }
    Ok(out)
}

pub fn write_replay_ndjson(path: &Path, positions: &[VehiclePosition]) -> Result<(), IngestError> {
    let mut f = std::fs::File::create(path)?;
    for p in positions {
        writeln!(f, "{}", serde_json::to_string(p).expect("serializable"))?;
    }
    Ok(())
}
