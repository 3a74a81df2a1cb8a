// Console composition: gateway connection form, map with path drawing,
// plan inspection, and the session panel. All engine access goes through
// GatewayClient; this file only wires DOM events to state changes and
// re-renders.

import { ApiError, GatewayClient } from './api.js';
import { SlippyMap } from './map.js';
import { SessionPanel } from './session-panel.js';
import { ConsoleState } from './state.js';
import type { CaptureRecord } from './types.js';

export interface AppOptions {
  mapWidth?: number;
  mapHeight?: number;
  tileTemplate?: string;
  fetchFn?: typeof fetch;
}

export class ConsoleApp {
  readonly root: HTMLElement;
  readonly state = new ConsoleState();
  map!: SlippyMap;
  panel!: SessionPanel;
  client: GatewayClient | null = null;

  private readonly options: AppOptions;
  private gatewayInput!: HTMLInputElement;
  private snapToggle!: HTMLInputElement;
  private backendSelect!: HTMLSelectElement;
  private seedInput!: HTMLInputElement;
  private corridorInput!: HTMLInputElement;
  private gapInput!: HTMLInputElement;
  private planSummary!: HTMLDivElement;

  constructor(root: HTMLElement, options: AppOptions = {}) {
    this.root = root;
    this.options = options;
    this.buildLayout();
  }

  private buildLayout(): void {
    this.root.innerHTML = `
      <header class="toolbar">
        <label>gateway
          <input class="gateway-url" value="http://127.0.0.1:8008" />
        </label>
        <button class="connect-button">Connect</button>
        <label><input type="checkbox" class="snap-toggle" /> snap to captures</label>
        <button class="clear-button">Clear path</button>
        <button class="plan-button">Plan</button>
        <label>backend
          <select class="backend-select">
            <option value="mock-echo">mock-echo</option>
            <option value="mock-pose-stamp">mock-pose-stamp</option>
          </select>
        </label>
        <label>seed <input class="seed-input" type="number" value="0" /></label>
        <label>corridor m <input class="corridor-input" type="number" step="0.1" /></label>
        <label>gap max m <input class="gap-input" type="number" step="0.1" /></label>
        <button class="session-button">Start session</button>
      </header>
      <div class="plan-summary"></div>
      <main class="console-main">
        <div class="map-container"></div>
        <aside class="panel-container"></aside>
      </main>
    `;
    this.gatewayInput = this.query('.gateway-url');
    this.snapToggle = this.query('.snap-toggle');
    this.backendSelect = this.query('.backend-select');
    this.seedInput = this.query('.seed-input');
    this.corridorInput = this.query('.corridor-input');
    this.gapInput = this.query('.gap-input');
    this.planSummary = this.query('.plan-summary');

    this.map = new SlippyMap(this.query('.map-container'), {
      width: this.options.mapWidth ?? 800,
      height: this.options.mapHeight ?? 520,
      tileTemplate: this.options.tileTemplate,
    });
    this.map.onMapClick = (point) => {
      this.state.addWaypoint(point);
      this.renderMap();
    };

    this.query<HTMLButtonElement>('.connect-button')
      .addEventListener('click', () => {
        void this.connect(this.gatewayInput.value);
      });
    this.snapToggle.addEventListener('change', () => {
      this.state.snapEnabled = this.snapToggle.checked;
      this.renderMap();
    });
    this.query<HTMLButtonElement>('.clear-button')
      .addEventListener('click', () => {
        this.state.clearPath();
        this.planSummary.textContent = '';
        this.renderMap();
      });
    this.query<HTMLButtonElement>('.plan-button')
      .addEventListener('click', () => {
        void this.plan();
      });
    this.query<HTMLButtonElement>('.session-button')
      .addEventListener('click', () => {
        void this.startSession();
      });
  }

  async connect(gatewayUrl: string): Promise<void> {
    this.client = new GatewayClient(gatewayUrl, this.options.fetchFn);
    const panelContainer = this.query('.panel-container');
    panelContainer.replaceChildren();
    this.panel = new SessionPanel(panelContainer, this.client, this.state);
    this.panel.onChange = () => this.renderMap();
    const response = await this.client.captures();
    this.state.captures = response.captures;
    this.fitToCaptures(response.captures);
    this.renderMap();
  }

  async plan(): Promise<void> {
    if (this.client === null) return;
    try {
      const plan = await this.client.plan(
        this.state.submissionWaypoints(), this.overrides());
      this.state.setPlan(plan);
      this.planSummary.textContent =
        `${plan.steps.length} steps, ${plan.switch_points.length} switches, ` +
        `cost ${plan.total_cost.toFixed(2)}, ` +
        `coverage ${(plan.diagnostics.coverage_fraction * 100).toFixed(1)}%`;
    } catch (error) {
      if (error instanceof ApiError && error.code === 'no_coverage') {
        const detail = error.detail as { uncovered?: [number, number][] };
        this.state.setUncovered(detail?.uncovered ?? []);
        this.planSummary.textContent = `no coverage: ${error.message}`;
      } else {
        this.planSummary.textContent =
          error instanceof ApiError
            ? `${error.code}: ${error.message}`
            : String(error);
      }
    }
    this.renderMap();
  }

  async startSession(): Promise<void> {
    if (this.client === null) return;
    try {
      const session = await this.client.createSession({
        waypoints: this.state.submissionWaypoints(),
        seed: Number(this.seedInput.value) || 0,
        backend: this.backendSelect.value,
        ...this.overrides(),
      });
      this.state.setSession(session);
      this.panel.render();
      this.renderMap();
    } catch (error) {
      this.planSummary.textContent =
        error instanceof ApiError
          ? `${error.code}: ${error.message}`
          : String(error);
    }
  }

  /** Redraw the map from current state; pure view of the last payloads. */
  renderMap(): void {
    // Prefer the session's own plan once a session exists: the overlay
    // then reproduces exactly what the server manifest describes.
    const plan = this.state.activeSession ?? this.state.activePlan;
    this.map.render({
      captures: this.state.captures,
      drawnWaypoints: this.state.drawnWaypoints,
      snapEnabled: this.state.snapEnabled,
      plan,
      uncoveredIntervals: this.state.uncoveredIntervals,
    });
  }

  private overrides(): { corridor_m?: number; gap_max_m?: number } {
    const result: { corridor_m?: number; gap_max_m?: number } = {};
    if (this.corridorInput.value !== '') {
      result.corridor_m = Number(this.corridorInput.value);
    }
    if (this.gapInput.value !== '') {
      result.gap_max_m = Number(this.gapInput.value);
    }
    return result;
  }

  private fitToCaptures(captures: CaptureRecord[]): void {
    if (captures.length === 0) return;
    const lats = captures.map((c) => c.lat);
    const lons = captures.map((c) => c.lon);
    const centerLat = (Math.min(...lats) + Math.max(...lats)) / 2;
    const centerLon = (Math.min(...lons) + Math.max(...lons)) / 2;
    const zoom = fitZoom(
      Math.max(...lats) - Math.min(...lats),
      Math.max(...lons) - Math.min(...lons),
      this.map.viewport.width,
      this.map.viewport.height,
    );
    this.map.setView(centerLat, centerLon, zoom);
    this.state.centerLat = centerLat;
    this.state.centerLon = centerLon;
    this.state.zoom = zoom;
  }

  private query<T extends Element = HTMLElement>(selector: string): T {
    const node = this.root.querySelector<T>(selector);
    if (node === null) throw new Error(`missing element: ${selector}`);
    return node;
  }
}

/** Largest integer zoom at which the bounds fit inside the viewport
 * with a margin; Mercator latitude stretch is negligible at the street
 * scales the console targets. */
function fitZoom(
  latSpanDeg: number,
  lonSpanDeg: number,
  widthPx: number,
  heightPx: number,
): number {
  for (let zoom = 19; zoom > 2; zoom -= 1) {
    const worldPx = 256 * Math.pow(2, zoom);
    const spanX = (lonSpanDeg / 360) * worldPx;
    const spanY = (latSpanDeg / 360) * worldPx;
    if (spanX <= widthPx - 80 && spanY <= heightPx - 80) return zoom;
  }
  return 2;
}

// Browser entry point; tests construct ConsoleApp themselves.
const mountPoint =
  typeof document === 'undefined' ? null : document.getElementById('app');
if (mountPoint !== null) {
  const app = new ConsoleApp(mountPoint);
  const params = new URLSearchParams(window.location.search);
  const gateway = params.get('gateway');
  if (gateway !== null) void app.connect(gateway);
}
