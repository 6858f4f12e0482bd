//! Hexagonal hierarchical spatial indexing over the public H3 cell encoding.
//!
//! The pipeline only needs four operations — `cell_of`, `cell_boundary`,
//! `footprint` and `ancestor` — so this module is a thin contract over the
//! `h3o` implementation of the H3 specification. Cell identifiers are
//! serialized as 16-hex-digit lowercase strings in all file formats.
//!
//! Aperture-7 grids are only approximately nested: for a small fraction of
//! points near cell boundaries, the parent of the containing cell at a finer
//! resolution differs from the containing cell at the coarser resolution.
//! `cell_of` keeps exact containment semantics (a point's cell always contains
//! it). `footprint` instead samples the geometry once at the resolution-10
//! step and coarsens by parent composition, so coarsening a fine footprint is
//! exactly monotone across resolutions.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use h3o::{CellIndex, LatLng, Resolution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::GeoPoint;
use crate::geo;

#[derive(Debug, Error, PartialEq)]
pub enum HexError {
    #[error("invalid coordinates ({0}, {1})")]
    InvalidPoint(f64, f64),
    #[error("invalid cell index {0:#x}")]
    InvalidCell(u64),
    #[error("invalid resolution {0} (must be 0..=15)")]
    InvalidResolution(u8),
    #[error("ancestor resolution {target} is finer than cell resolution {cell}")]
    NotAnAncestor { target: u8, cell: u8 },
    #[error("footprint needs at least 2 geometry points, got {0}")]
    ShortGeometry(usize),
}

/// One cell of the hexagonal hierarchical grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct HexCell(u64);

impl HexCell {
    pub fn from_raw(index: u64) -> Result<Self, HexError> {
        CellIndex::try_from(index)
            .map(|c| Self(c.into()))
            .map_err(|_| HexError::InvalidCell(index))
    }

    pub fn raw(self) -> u64 {
        self.0
    }

    fn cell(self) -> CellIndex {
        // Only constructed from valid indices.
        CellIndex::try_from(self.0).expect("HexCell holds a validated index")
    }

    pub fn resolution(self) -> u8 {
        self.cell().resolution().into()
    }

    /// Parent cell at a coarser resolution.
    pub fn ancestor(self, resolution: u8) -> Result<Self, HexError> {
        let res = to_resolution(resolution)?;
        self.cell()
            .parent(res)
            .map(|c| Self(c.into()))
            .ok_or(HexError::NotAnAncestor { target: resolution, cell: self.resolution() })
    }

    /// Closed vertex ring of the cell: 5–10 distinct vertices, first vertex
    /// repeated at the end.
    pub fn boundary(self) -> Vec<GeoPoint> {
        let ring = self.cell().boundary();
        let mut out: Vec<GeoPoint> = ring
            .iter()
            .map(|ll| GeoPoint::raw(ll.lat(), ll.lng()))
            .collect();
        if let Some(&first) = out.first() {
            out.push(first);
        }
        out
    }

    /// Spherical cell area in km².
    pub fn area_km2(self) -> f64 {
        self.cell().area_km2()
    }

    /// True when the two cells share an edge.
    pub fn is_neighbor(self, other: Self) -> bool {
        self.cell().is_neighbor_with(other.cell()).unwrap_or(false)
    }

    /// Centroid of the cell.
    pub fn center(self) -> GeoPoint {
        let ll = LatLng::from(self.cell());
        GeoPoint::raw(ll.lat(), ll.lng())
    }
}

impl fmt::Display for HexCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for HexCell {
    type Err = HexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let raw = u64::from_str_radix(s, 16).map_err(|_| HexError::InvalidCell(0))?;
        Self::from_raw(raw)
    }
}

impl From<HexCell> for String {
    fn from(c: HexCell) -> Self {
        c.to_string()
    }
}

impl TryFrom<String> for HexCell {
    type Error = HexError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

fn to_resolution(r: u8) -> Result<Resolution, HexError> {
    Resolution::try_from(r).map_err(|_| HexError::InvalidResolution(r))
}

/// Average hexagon edge length in meters at `resolution`.
pub fn edge_length_m(resolution: u8) -> Result<f64, HexError> {
    Ok(to_resolution(resolution)?.edge_length_km() * 1000.0)
}

/// Deterministic cell assignment for a point at a resolution.
pub fn cell_of(point: GeoPoint, resolution: u8) -> Result<HexCell, HexError> {
    let res = to_resolution(resolution)?;
    let ll = LatLng::new(point.lat, point.lon).map_err(|_| HexError::InvalidPoint(point.lat, point.lon))?;
    Ok(HexCell(ll.to_cell(res).into()))
}

/// Finest resolution used by the pipeline; footprints are sampled at this
/// resolution's step and coarsened by parent composition.
const FOOTPRINT_BASE_RES: u8 = 10;

/// Set of all cells touched by a polyline. The polyline is densified at half
/// the resolution-10 edge length (≈33 m, at most half the edge length of any
/// coarser target resolution) and each sample's resolution-10 cell is
/// coarsened to the target resolution.
pub fn footprint(geometry: &[GeoPoint], resolution: u8) -> Result<BTreeSet<HexCell>, HexError> {
    if geometry.len() < 2 {
        return Err(HexError::ShortGeometry(geometry.len()));
    }
    if resolution > FOOTPRINT_BASE_RES {
        return Err(HexError::InvalidResolution(resolution));
    }
    let step = edge_length_m(FOOTPRINT_BASE_RES)? / 2.0;
    let samples = geo::densify(geometry, step);
    let mut cells = BTreeSet::new();
    for p in samples {
        cells.insert(cell_of(p, FOOTPRINT_BASE_RES)?.ancestor(resolution)?);
    }
    Ok(cells)
}
