//! Web-Mercator slippy-map tile arithmetic.
//!
//! Tiles are half-open: a tile owns its west and north edges, so a point on
//! a shared edge belongs to exactly one tile (the one east of / south of the
//! line). All conversions go through normalized Mercator fractions in
//! `[0, 1]`, which keeps shared tile edges bit-identical between neighbours.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ZOOM: u8 = 22;
pub const TILE_SIZE: u32 = 256;
/// WGS84 semi-major axis, the Web-Mercator sphere radius.
pub const EARTH_RADIUS_M: f64 = 6_378_137.0;

/// `atan(sinh(pi))` in degrees.
pub fn max_latitude() -> f64 {
    PI.sinh().atan().to_degrees()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TileId {
    pub zoom: u8,
    pub x: u32,
    pub y: u32,
}

impl TileId {
    pub fn new(zoom: u8, x: u32, y: u32) -> Result<Self> {
        check_zoom(zoom)?;
        let n = 1u64 << zoom;
        if u64::from(x) >= n || u64::from(y) >= n {
            return Err(Error::domain(format!(
                "tile {zoom}/{x}/{y} outside the 2^{zoom} grid"
            )));
        }
        Ok(TileId { zoom, x, y })
    }

    /// Number of tiles along one axis at this zoom.
    pub fn grid_size(&self) -> u32 {
        1u32 << self.zoom
    }

    /// The four tiles at `zoom + 1` covering this tile.
    pub fn children(&self) -> Result<[TileId; 4]> {
        let z = self.zoom + 1;
        check_zoom(z)?;
        let (x, y) = (self.x * 2, self.y * 2);
        Ok([
            TileId { zoom: z, x, y },
            TileId { zoom: z, x: x + 1, y },
            TileId { zoom: z, x, y: y + 1 },
            TileId { zoom: z, x: x + 1, y: y + 1 },
        ])
    }
}

impl fmt::Display for TileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.zoom, self.x, self.y)
    }
}

impl FromStr for TileId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('/').collect();
        if parts.len() != 3 {
            return Err(Error::data(format!("bad tile address {s:?}")));
        }
        let parse = |p: &str| {
            p.parse::<u32>()
                .map_err(|_| Error::data(format!("bad tile address {s:?}")))
        };
        let zoom = parse(parts[0])?;
        let zoom = u8::try_from(zoom).map_err(|_| Error::data(format!("bad zoom in {s:?}")))?;
        TileId::new(zoom, parse(parts[1])?, parse(parts[2])?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    /// Builds a point, clamping latitude into the Web-Mercator band.
    pub fn new(lon: f64, lat: f64) -> Self {
        let max = max_latitude();
        GeoPoint {
            lon,
            lat: lat.clamp(-max, max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoBBox {
    pub west: f64,
    pub south: f64,
    pub east: f64,
    pub north: f64,
}

impl GeoBBox {
    pub fn new(west: f64, south: f64, east: f64, north: f64) -> Result<Self> {
        if !(west < east && south < north) {
            return Err(Error::domain(format!(
                "invalid bbox ({west}, {south}, {east}, {north}): need west < east and south < north"
            )));
        }
        if west < -180.0 || east > 180.0 {
            return Err(Error::domain("bbox longitudes must lie in [-180, 180]"));
        }
        Ok(GeoBBox {
            west,
            south,
            east,
            north,
        })
    }

    /// Half-open containment matching tile edge ownership: west and north
    /// edges are inside, east and south edges are not.
    pub fn contains_half_open(&self, p: GeoPoint) -> bool {
        self.west <= p.lon && p.lon < self.east && self.south < p.lat && p.lat <= self.north
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        self.west <= p.lon && p.lon <= self.east && self.south <= p.lat && p.lat <= self.north
    }

    pub fn intersects(&self, other: &GeoBBox) -> bool {
        self.west <= other.east
            && other.west <= self.east
            && self.south <= other.north
            && other.south <= self.north
    }
}

fn check_zoom(zoom: u8) -> Result<()> {
    if zoom > MAX_ZOOM {
        return Err(Error::domain(format!("zoom {zoom} above {MAX_ZOOM}")));
    }
    Ok(())
}

fn lon_of_fraction(fx: f64) -> f64 {
    fx * 360.0 - 180.0
}

fn lat_of_fraction(fy: f64) -> f64 {
    (PI * (1.0 - 2.0 * fy)).sinh().atan().to_degrees()
}

fn fraction_of_lon(lon: f64) -> f64 {
    (lon + 180.0) / 360.0
}

fn fraction_of_lat(lat: f64) -> f64 {
    let phi = lat.to_radians();
    (1.0 - (phi.tan() + 1.0 / phi.cos()).ln() / PI) / 2.0
}

fn west_edge(x: u32, n: u32) -> f64 {
    lon_of_fraction(f64::from(x) / f64::from(n))
}

fn north_edge(y: u32, n: u32) -> f64 {
    lat_of_fraction(f64::from(y) / f64::from(n))
}

/// Column owning `lon`; the closed-form estimate is corrected against the
/// edge values `tile_bounds` reports so both agree on every input.
fn column(lon: f64, n: u32) -> u32 {
    let est = (fraction_of_lon(lon) * f64::from(n)).floor();
    let mut x = est.clamp(0.0, f64::from(n - 1)) as u32;
    while x > 0 && lon < west_edge(x, n) {
        x -= 1;
    }
    while x + 1 < n && lon >= west_edge(x + 1, n) {
        x += 1;
    }
    x
}

fn row(lat: f64, n: u32) -> u32 {
    let est = (fraction_of_lat(lat) * f64::from(n)).floor();
    let mut y = if est.is_nan() {
        0
    } else {
        est.clamp(0.0, f64::from(n - 1)) as u32
    };
    while y > 0 && lat > north_edge(y, n) {
        y -= 1;
    }
    while y + 1 < n && lat <= north_edge(y + 1, n) {
        y += 1;
    }
    y
}

/// The tile at `zoom` containing `p`.
pub fn tile_of(p: GeoPoint, zoom: u8) -> Result<TileId> {
    check_zoom(zoom)?;
    let max = max_latitude();
    if !(p.lat >= -max && p.lat <= max) {
        return Err(Error::domain(format!(
            "latitude {} outside the Web-Mercator band ±{max}",
            p.lat
        )));
    }
    if !(p.lon >= -180.0 && p.lon <= 180.0) {
        return Err(Error::domain(format!("longitude {} outside [-180, 180]", p.lon)));
    }
    let n = 1u32 << zoom;
    Ok(TileId {
        zoom,
        x: column(p.lon, n),
        y: row(p.lat, n),
    })
}

pub fn tile_bounds(t: TileId) -> GeoBBox {
    let n = t.grid_size();
    GeoBBox {
        west: west_edge(t.x, n),
        south: north_edge(t.y + 1, n),
        east: west_edge(t.x + 1, n),
        north: north_edge(t.y, n),
    }
}

/// Maps a pixel position inside tile `t` to WGS84. Pixel `(0, 0)` is the
/// tile's northwest corner; interpolation is linear in Mercator meters.
pub fn pixel_to_geo(t: TileId, px: f64, py: f64, tile_size: u32) -> GeoPoint {
    let scale = f64::from(tile_size) * f64::from(t.grid_size());
    let gx = (f64::from(t.x) * f64::from(tile_size) + px) / scale;
    let gy = (f64::from(t.y) * f64::from(tile_size) + py) / scale;
    GeoPoint {
        lon: lon_of_fraction(gx),
        lat: lat_of_fraction(gy),
    }
}

/// Inverse of [`pixel_to_geo`]: position of `p` in tile `t`'s pixel frame
/// (may fall outside `[0, tile_size]` for points in other tiles).
pub fn geo_to_pixel(t: TileId, p: GeoPoint, tile_size: u32) -> (f64, f64) {
    let scale = f64::from(tile_size) * f64::from(t.grid_size());
    let px = fraction_of_lon(p.lon) * scale - f64::from(t.x) * f64::from(tile_size);
    let py = fraction_of_lat(p.lat) * scale - f64::from(t.y) * f64::from(tile_size);
    (px, py)
}

/// Meters per pixel at `lat` for 256-pixel tiles.
pub fn ground_resolution(lat: f64, zoom: u8) -> f64 {
    let circumference = 2.0 * PI * EARTH_RADIUS_M;
    circumference / (f64::from(TILE_SIZE) * 2f64.powi(i32::from(zoom))) * lat.to_radians().cos()
}

/// Spherical Mercator projection of `p` in meters (EPSG:3857).
pub fn to_mercator(p: GeoPoint) -> (f64, f64) {
    let x = EARTH_RADIUS_M * p.lon.to_radians();
    let y = EARTH_RADIUS_M * (PI / 4.0 + p.lat.to_radians() / 2.0).tan().ln();
    (x, y)
}

pub fn from_mercator(x: f64, y: f64) -> GeoPoint {
    GeoPoint {
        lon: (x / EARTH_RADIUS_M).to_degrees(),
        lat: (2.0 * (y / EARTH_RADIUS_M).exp().atan() - PI / 2.0).to_degrees(),
    }
}

/// Tiles whose half-open extent intersects `bbox`, treating the bbox with
/// the same edge convention. Sorted by `(x, y)`.
pub fn tiles_covering(bbox: GeoBBox, zoom: u8) -> Result<Vec<TileId>> {
    check_zoom(zoom)?;
    let n = 1u32 << zoom;
    let max = max_latitude();
    let north = bbox.north.min(max);
    let south = bbox.south.max(-max);
    if !(south < north) {
        return Ok(Vec::new());
    }

    let x_lo = column(bbox.west, n);
    let mut x_hi = column(bbox.east, n);
    if x_hi > x_lo && west_edge(x_hi, n) >= bbox.east {
        x_hi -= 1;
    }
    let y_lo = row(north, n);
    let mut y_hi = row(south, n);
    if y_hi > y_lo && north_edge(y_hi, n) <= south {
        y_hi -= 1;
    }

    let mut tiles = Vec::with_capacity(((x_hi - x_lo + 1) * (y_hi - y_lo + 1)) as usize);
    for x in x_lo..=x_hi {
        for y in y_lo..=y_hi {
            tiles.push(TileId { zoom, x, y });
        }
    }
    Ok(tiles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equator_prime_meridian_is_grid_center() {
        let t = tile_of(GeoPoint::new(0.0, 0.0), 19).unwrap();
        assert_eq!(t, TileId::new(19, 262_144, 262_144).unwrap());
    }

    #[test]
    fn far_east_longitude_hits_last_column() {
        let t = tile_of(GeoPoint::new(179.9999, 0.0), 19).unwrap();
        assert_eq!(t.x, (1 << 19) - 1);
    }

    #[test]
    fn berlin_golden_tile() {
        // Frozen from a standalone evaluation of the two closed-form slippy formulas:
        //   x = floor((13.405 + 180) / 360 * 2^19)
        //   y = floor((1 - asinh(tan(52.52°)) / pi) / 2 * 2^19)
        let t = tile_of(GeoPoint::new(13.4050, 52.5200), 19).unwrap();
        assert_eq!((t.x, t.y), (281_666, 171_942));
    }

    #[test]
    fn out_of_band_latitude_is_an_error() {
        let p = GeoPoint { lon: 0.0, lat: 86.0 };
        assert!(matches!(tile_of(p, 3), Err(Error::Domain(_))));
        assert!(tile_of(GeoPoint::new(0.0, 0.0), 23).is_err());
    }

    #[test]
    fn construction_clamps_latitude() {
        let p = GeoPoint::new(10.0, 89.0);
        assert_eq!(p.lat, max_latitude());
        assert!(tile_of(p, 5).is_ok());
    }

    #[test]
    fn world_tile_bounds() {
        let b = tile_bounds(TileId::new(0, 0, 0).unwrap());
        assert_eq!((b.west, b.east), (-180.0, 180.0));
        assert!((b.north - 85.051_128_779_8).abs() < 1e-9);
        assert!((b.south + 85.051_128_779_8).abs() < 1e-9);
    }

    #[test]
    fn first_quadrant_bounds() {
        let b = tile_bounds(TileId::new(1, 0, 0).unwrap());
        assert_eq!((b.west, b.east, b.south), (-180.0, 0.0, 0.0));
        assert!((b.north - 85.051_128_779_8).abs() < 1e-9);
    }

    #[test]
    fn ground_resolution_values() {
        assert!((ground_resolution(0.0, 19) - 0.29858).abs() < 1e-4);
        let ratio = ground_resolution(60.0, 19) / ground_resolution(0.0, 19);
        assert!((ratio - 0.5).abs() < 1e-12);
        assert!(ground_resolution(85.0511, 0) > 0.0);
    }

    #[test]
    fn pixel_corners() {
        let t = TileId::new(19, 274_000, 183_000).unwrap();
        let b = tile_bounds(t);
        let nw = pixel_to_geo(t, 0.0, 0.0, TILE_SIZE);
        assert_eq!((nw.lon, nw.lat), (b.west, b.north));
        let se = pixel_to_geo(t, 256.0, 256.0, TILE_SIZE);
        let diag = tile_bounds(TileId::new(19, t.x + 1, t.y + 1).unwrap());
        assert_eq!((se.lon, se.lat), (diag.west, diag.north));
    }

    #[test]
    fn pixel_midpoint_matches_mercator_mean() {
        let t = TileId::new(17, 68_000, 45_000).unwrap();
        let b = tile_bounds(t);
        let (x0, y0) = to_mercator(GeoPoint { lon: b.west, lat: b.north });
        let (x1, y1) = to_mercator(GeoPoint { lon: b.east, lat: b.south });
        let oracle = from_mercator((x0 + x1) / 2.0, (y0 + y1) / 2.0);
        let mid = pixel_to_geo(t, 128.0, 128.0, TILE_SIZE);
        assert!((mid.lon - oracle.lon).abs() < 1e-9);
        assert!((mid.lat - oracle.lat).abs() < 1e-9);
    }

    #[test]
    fn bbox_inside_one_tile() {
        let t = TileId::new(14, 8_600, 5_700).unwrap();
        let b = tile_bounds(t);
        let w = b.east - b.west;
        let h = b.north - b.south;
        let inner = GeoBBox::new(b.west + w * 0.2, b.south + h * 0.2, b.east - w * 0.2, b.north - h * 0.2)
            .unwrap();
        assert_eq!(tiles_covering(inner, 14).unwrap(), vec![t]);
    }

    #[test]
    fn exact_tile_bbox_excludes_edge_neighbours() {
        let t = TileId::new(12, 2_100, 1_400).unwrap();
        assert_eq!(tiles_covering(tile_bounds(t), 12).unwrap(), vec![t]);
    }

    #[test]
    fn tile_address_roundtrip() {
        let t: TileId = "19/281666/171942".parse().unwrap();
        assert_eq!(t.to_string(), "19/281666/171942");
        assert!("19/1/".parse::<TileId>().is_err());
        assert!("2/4/0".parse::<TileId>().is_err());
    }

    #[test]
    fn invalid_bbox_rejected() {
        assert!(GeoBBox::new(10.0, 0.0, 5.0, 1.0).is_err());
        assert!(GeoBBox::new(0.0, 1.0, 5.0, 1.0).is_err());
    }
}
