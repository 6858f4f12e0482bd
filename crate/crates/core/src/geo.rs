//! Small geodesic helpers shared by ingestion, hexgrid and the synthetic
//! generator. All distances are meters on a spherical earth; at city scale the
//! error against an ellipsoid is far below the 100 m geofence radius.

use crate::domain::GeoPoint;

/// Mean earth radius in meters (IUGG).
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Great-circle distance in meters.
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lon1) = (a.lat.to_radians(), a.lon.to_radians());
    let (lat2, lon2) = (b.lat.to_radians(), b.lon.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().asin()
}

/// Total polyline length in meters.
pub fn polyline_length_m(points: &[GeoPoint]) -> f64 {
    points.windows(2).map(|w| haversine_m(w[0], w[1])).sum()
}

/// Point reached by travelling `dist_m` along the polyline. Clamps to the
/// endpoints; interpolation is linear in lat/lon, fine for vertex spacings of
/// a few km.
pub fn point_along(points: &[GeoPoint], dist_m: f64) -> GeoPoint {
    assert!(!points.is_empty());
    if dist_m <= 0.0 {
        return points[0];
    }
    let mut remaining = dist_m;
    for w in points.windows(2) {
        let leg = haversine_m(w[0], w[1]);
        if remaining <= leg && leg > 0.0 {
            let t = remaining / leg;
            return GeoPoint::raw(
                w[0].lat + t * (w[1].lat - w[0].lat),
                w[0].lon + t * (w[1].lon - w[0].lon),
            );
        }
        remaining -= leg;
    }
    *points.last().unwrap()
}

/// Resamples the polyline so consecutive samples are at most `step_m` apart.
/// Original vertices are always included.
pub fn densify(points: &[GeoPoint], step_m: f64) -> Vec<GeoPoint> {
    assert!(step_m > 0.0);
    let mut out = Vec::with_capacity(points.len());
    if points.is_empty() {
        return out;
    }
    out.push(points[0]);
    for w in points.windows(2) {
        let leg = haversine_m(w[0], w[1]);
        if leg > step_m {
            let n = (leg / step_m).ceil() as usize;
            for i in 1..n {
                let t = i as f64 / n as f64;
                out.push(GeoPoint::raw(
                    w[0].lat + t * (w[1].lat - w[0].lat),
                    w[0].lon + t * (w[1].lon - w[0].lon),
                ));
            }
        }
        out.push(w[1]);
    }
    out
}

/// Destination point `dist_m` away from `start` along `bearing_deg`
/// (equirectangular approximation; used only to lay out synthetic fixtures).
pub fn offset(start: GeoPoint, bearing_deg: f64, dist_m: f64) -> GeoPoint {
    let b = bearing_deg.to_radians();
    let dlat = dist_m * b.cos() / EARTH_RADIUS_M;
    let dlon = dist_m * b.sin() / (EARTH_RADIUS_M * start.lat.to_radians().cos());
    GeoPoint::raw(start.lat + dlat.to_degrees(), start.lon + dlon.to_degrees())
}
