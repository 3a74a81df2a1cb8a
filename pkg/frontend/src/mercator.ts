// Web Mercator math for the slippy-tile map: geographic coordinates to
// world/tile/screen space and back. World space is the unit square that
// the whole map occupies at any zoom; a zoom-z tile grid is 2^z × 2^z
// tiles of TILE_SIZE pixels over that square.

export const TILE_SIZE = 256;

const MAX_LATITUDE = 85.05112878; // where the Mercator square closes

export interface Viewport {
  centerLat: number;
  centerLon: number;
  zoom: number;
  width: number;
  height: number;
}

export interface ScreenPoint {
  x: number;
  y: number;
}

export interface TileCoord {
  z: number;
  x: number;
  y: number;
}

function clamp(value: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, value));
}

/** Lat/lon (degrees) to [0,1]² world coordinates. */
export function latLonToWorld(lat: number, lon: number): ScreenPoint {
  const clampedLat = clamp(lat, -MAX_LATITUDE, MAX_LATITUDE);
  const phi = (clampedLat * Math.PI) / 180;
  const x = (lon + 180) / 360;
  const y = (1 - Math.log(Math.tan(phi) + 1 / Math.cos(phi)) / Math.PI) / 2;
  return { x, y };
}

/** Inverse of latLonToWorld. */
export function worldToLatLon(x: number, y: number): {
  lat: number;
  lon: number;
} {
  const lon = x * 360 - 180;
  const lat = (Math.atan(Math.sinh(Math.PI * (1 - 2 * y))) * 180) / Math.PI;
  return { lat, lon };
}

/** Map width/height in pixels at a zoom level. */
export function worldSizePx(zoom: number): number {
  return TILE_SIZE * Math.pow(2, zoom);
}

export function latLonToScreen(
  lat: number,
  lon: number,
  view: Viewport,
): ScreenPoint {
  const world = latLonToWorld(lat, lon);
  const center = latLonToWorld(view.centerLat, view.centerLon);
  const scale = worldSizePx(view.zoom);
  return {
    x: (world.x - center.x) * scale + view.width / 2,
    y: (world.y - center.y) * scale + view.height / 2,
  };
}

export function screenToLatLon(
  point: ScreenPoint,
  view: Viewport,
): { lat: number; lon: number } {
  const center = latLonToWorld(view.centerLat, view.centerLon);
  const scale = worldSizePx(view.zoom);
  return worldToLatLon(
    center.x + (point.x - view.width / 2) / scale,
    center.y + (point.y - view.height / 2) / scale,
  );
}

/** Tiles covering the viewport, row-major, clamped to the tile grid. */
export function visibleTiles(view: Viewport): TileCoord[] {
  const z = Math.round(view.zoom);
  const n = Math.pow(2, z);
  const center = latLonToWorld(view.centerLat, view.centerLon);
  const scale = worldSizePx(z);
  const left = center.x * scale - view.width / 2;
  const top = center.y * scale - view.height / 2;
  const x0 = clamp(Math.floor(left / TILE_SIZE), 0, n - 1);
  const y0 = clamp(Math.floor(top / TILE_SIZE), 0, n - 1);
  const x1 = clamp(Math.floor((left + view.width) / TILE_SIZE), 0, n - 1);
  const y1 = clamp(Math.floor((top + view.height) / TILE_SIZE), 0, n - 1);
  const tiles: TileCoord[] = [];
  for (let y = y0; y <= y1; y += 1) {
    for (let x = x0; x <= x1; x += 1) {
      tiles.push({ z, x, y });
    }
  }
  return tiles;
}

/** Screen position of a tile's top-left corner. */
export function tileOrigin(tile: TileCoord, view: Viewport): ScreenPoint {
  const center = latLonToWorld(view.centerLat, view.centerLon);
  const scale = worldSizePx(tile.z);
  return {
    x: tile.x * TILE_SIZE - center.x * scale + view.width / 2,
    y: tile.y * TILE_SIZE - center.y * scale + view.height / 2,
  };
}

/**
 * Approximate ground distance in meters between two nearby points
 * (equirectangular model; fine at street scale).
 */
export function approxDistanceM(
  a: { lat: number; lon: number },
  b: { lat: number; lon: number },
): number {
  const metersPerDegLat = 111320;
  const midLat = ((a.lat + b.lat) / 2) * (Math.PI / 180);
  const dLat = (b.lat - a.lat) * metersPerDegLat;
  const dLon = (b.lon - a.lon) * metersPerDegLat * Math.cos(midLat);
  return Math.hypot(dLat, dLon);
}
