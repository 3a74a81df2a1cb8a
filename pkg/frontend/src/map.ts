// Slippy-tile map with an SVG overlay. Tiles are positioned <img>
// elements from a standard {z}/{x}/{y} template; everything the console
// knows about — captures, the drawn path, the plan, stitch markers,
// uncovered intervals — is drawn into the overlay as plain SVG nodes so
// the rendered scene is an inspectable function of the server payloads.

import {
  TILE_SIZE,
  approxDistanceM,
  latLonToScreen,
  screenToLatLon,
  tileOrigin,
  visibleTiles,
  type Viewport,
} from './mercator.js';
import { decimateCaptures, snapForDisplay, type LatLon } from './state.js';
import type { CaptureRecord } from './types.js';

const SVG_NS = 'http://www.w3.org/2000/svg';

/** What the plan overlay needs; satisfied by both the /plan response and
 * the session payload, so either renders the identical overlay. */
export interface PlanLike {
  steps: { segment_id: string; lat: number; lon: number }[];
  switch_points: number[];
}

export interface MapOptions {
  width: number;
  height: number;
  tileTemplate?: string;
}

const DEFAULT_TILES = 'https://tile.openstreetmap.org/{z}/{x}/{y}.png';

const SEGMENT_PALETTE = [
  '#1f77b4', '#ff7f0e', '#2ca02c', '#d62728',
  '#9467bd', '#8c564b', '#e377c2', '#17becf',
];

export interface MapScene {
  captures: CaptureRecord[];
  drawnWaypoints: LatLon[];
  snapEnabled: boolean;
  plan: PlanLike | null;
  uncoveredIntervals: [number, number][];
}

export class SlippyMap {
  readonly container: HTMLElement;
  private readonly tileLayer: HTMLDivElement;
  private readonly overlay: SVGSVGElement;
  private readonly options: Required<MapOptions>;
  private view: Viewport;
  onMapClick: ((point: LatLon) => void) | null = null;

  constructor(container: HTMLElement, options: MapOptions) {
    this.container = container;
    this.options = {
      width: options.width,
      height: options.height,
      tileTemplate: options.tileTemplate ?? DEFAULT_TILES,
    };
    this.view = {
      centerLat: 0,
      centerLon: 0,
      zoom: 16,
      width: options.width,
      height: options.height,
    };

    container.classList.add('slippy-map');
    container.style.position = 'relative';
    container.style.overflow = 'hidden';
    container.style.width = `${options.width}px`;
    container.style.height = `${options.height}px`;

    this.tileLayer = document.createElement('div');
    this.tileLayer.className = 'tile-layer';
    container.appendChild(this.tileLayer);

    this.overlay = document.createElementNS(SVG_NS, 'svg');
    this.overlay.setAttribute('class', 'map-overlay');
    this.overlay.setAttribute('width', String(options.width));
    this.overlay.setAttribute('height', String(options.height));
    this.overlay.style.position = 'absolute';
    this.overlay.style.top = '0';
    this.overlay.style.left = '0';
    container.appendChild(this.overlay);

    container.addEventListener('click', (event) => {
      if (this.onMapClick === null) return;
      const rect = container.getBoundingClientRect();
      const point = screenToLatLon(
        { x: event.clientX - rect.left, y: event.clientY - rect.top },
        this.view,
      );
      this.onMapClick(point);
    });
  }

  setView(centerLat: number, centerLon: number, zoom: number): void {
    this.view = { ...this.view, centerLat, centerLon, zoom };
  }

  get viewport(): Viewport {
    return { ...this.view };
  }

  /** Full redraw from a scene; rendering holds no state of its own. */
  render(scene: MapScene): void {
    this.renderTiles();
    this.overlay.replaceChildren(
      this.renderCaptures(scene.captures),
      this.renderUncovered(scene),
      this.renderPlan(scene.plan),
      this.renderDrawnPath(scene),
    );
  }

  private renderTiles(): void {
    this.tileLayer.replaceChildren();
    for (const tile of visibleTiles(this.view)) {
      const origin = tileOrigin(tile, this.view);
      const img = document.createElement('img');
      img.className = 'map-tile';
      img.width = TILE_SIZE;
      img.height = TILE_SIZE;
      img.src = this.options.tileTemplate
        .replace('{z}', String(tile.z))
        .replace('{x}', String(tile.x))
        .replace('{y}', String(tile.y));
      img.style.position = 'absolute';
      img.style.left = `${origin.x}px`;
      img.style.top = `${origin.y}px`;
      this.tileLayer.appendChild(img);
    }
  }

  private renderCaptures(captures: CaptureRecord[]): SVGGElement {
    const group = document.createElementNS(SVG_NS, 'g');
    group.setAttribute('class', 'captures-layer');
    for (const capture of decimateCaptures(captures)) {
      const point = this.toScreen(capture);
      const dot = document.createElementNS(SVG_NS, 'circle');
      dot.setAttribute('class', 'capture-dot');
      dot.setAttribute('data-capture-id', capture.id);
      dot.setAttribute('cx', point.x.toFixed(1));
      dot.setAttribute('cy', point.y.toFixed(1));
      dot.setAttribute('r', '2');
      group.appendChild(dot);
    }
    return group;
  }

  private renderDrawnPath(scene: MapScene): SVGGElement {
    const group = document.createElementNS(SVG_NS, 'g');
    group.setAttribute('class', 'path-layer');
    if (scene.drawnWaypoints.length >= 2) {
      const line = document.createElementNS(SVG_NS, 'polyline');
      line.setAttribute('class', 'drawn-path');
      line.setAttribute('points', this.toPoints(scene.drawnWaypoints));
      group.appendChild(line);
    }
    for (const raw of scene.drawnWaypoints) {
      const shown = snapForDisplay(raw, scene.captures, scene.snapEnabled);
      const point = this.toScreen(shown);
      const marker = document.createElementNS(SVG_NS, 'circle');
      marker.setAttribute('class', 'waypoint-marker');
      marker.setAttribute('cx', point.x.toFixed(1));
      marker.setAttribute('cy', point.y.toFixed(1));
      marker.setAttribute('r', '4');
      group.appendChild(marker);
    }
    return group;
  }

  private renderPlan(plan: PlanLike | null): SVGGElement {
    const group = document.createElementNS(SVG_NS, 'g');
    group.setAttribute('class', 'plan-layer');
    if (plan === null || plan.steps.length === 0) return group;

    const colorOf = new Map<string, string>();
    for (const step of plan.steps) {
      if (!colorOf.has(step.segment_id)) {
        colorOf.set(
          step.segment_id,
          SEGMENT_PALETTE[colorOf.size % SEGMENT_PALETTE.length],
        );
      }
    }

    // One polyline per maximal run of steps from the same segment.
    const cuts = new Set(plan.switch_points);
    let runStart = 0;
    for (let i = 1; i <= plan.steps.length; i += 1) {
      if (i < plan.steps.length && !cuts.has(i)) continue;
      const run = plan.steps.slice(runStart, i);
      const leg = document.createElementNS(SVG_NS, 'polyline');
      leg.setAttribute('class', 'plan-leg');
      leg.setAttribute('data-segment-id', run[0].segment_id);
      leg.setAttribute('stroke', colorOf.get(run[0].segment_id)!);
      leg.setAttribute('points', this.toPoints(run));
      group.appendChild(leg);
      runStart = i;
    }

    for (const k of plan.switch_points) {
      const before = plan.steps[k - 1];
      const after = plan.steps[k];
      const point = this.toScreen({
        lat: (before.lat + after.lat) / 2,
        lon: (before.lon + after.lon) / 2,
      });
      const marker = document.createElementNS(SVG_NS, 'rect');
      marker.setAttribute('class', 'stitch-marker');
      marker.setAttribute('data-step-index', String(k));
      marker.setAttribute('x', (point.x - 5).toFixed(1));
      marker.setAttribute('y', (point.y - 5).toFixed(1));
      marker.setAttribute('width', '10');
      marker.setAttribute('height', '10');
      marker.setAttribute(
        'transform',
        `rotate(45 ${point.x.toFixed(1)} ${point.y.toFixed(1)})`,
      );
      group.appendChild(marker);
    }
    return group;
  }

  /** Highlight uncovered arc-length intervals along the drawn path. */
  private renderUncovered(scene: MapScene): SVGGElement {
    const group = document.createElementNS(SVG_NS, 'g');
    group.setAttribute('class', 'uncovered-layer');
    for (const [lo, hi] of scene.uncoveredIntervals) {
      const span = sliceByArcLength(scene.drawnWaypoints, lo, hi);
      if (span.length < 2) continue;
      const line = document.createElementNS(SVG_NS, 'polyline');
      line.setAttribute('class', 'uncovered-interval');
      line.setAttribute('data-from-m', lo.toFixed(1));
      line.setAttribute('data-to-m', hi.toFixed(1));
      line.setAttribute('points', this.toPoints(span));
      group.appendChild(line);
    }
    return group;
  }

  private toScreen(point: LatLon): { x: number; y: number } {
    return latLonToScreen(point.lat, point.lon, this.view);
  }

  private toPoints(points: LatLon[]): string {
    return points
      .map((p) => {
        const s = this.toScreen(p);
        return `${s.x.toFixed(1)},${s.y.toFixed(1)}`;
      })
      .join(' ');
  }
}

/** Sub-polyline between two arc lengths (meters) along a waypoint path. */
export function sliceByArcLength(
  waypoints: LatLon[],
  fromM: number,
  toM: number,
): LatLon[] {
  if (waypoints.length < 2 || toM <= fromM) return [];
  const result: LatLon[] = [];
  let travelled = 0;
  for (let i = 0; i < waypoints.length - 1; i += 1) {
    const a = waypoints[i];
    const b = waypoints[i + 1];
    const legLength = approxDistanceM(a, b);
    const legStart = travelled;
    const legEnd = travelled + legLength;
    if (legEnd > fromM && legStart < toM && legLength > 0) {
      const t0 = Math.max(0, (fromM - legStart) / legLength);
      const t1 = Math.min(1, (toM - legStart) / legLength);
      pushUnique(result, interpolate(a, b, t0));
      pushUnique(result, interpolate(a, b, t1));
    }
    travelled = legEnd;
  }
  return result;
}

function interpolate(a: LatLon, b: LatLon, t: number): LatLon {
  return {
    lat: a.lat + (b.lat - a.lat) * t,
    lon: a.lon + (b.lon - a.lon) * t,
  };
}

function pushUnique(points: LatLon[], point: LatLon): void {
  const last = points[points.length - 1];
  if (last !== undefined && last.lat === point.lat && last.lon === point.lon) {
    return;
  }
  points.push(point);
}
