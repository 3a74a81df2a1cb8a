// Console state: the viewport, the drawn path, the latest plan and
// session payloads, and the boundary-equality bookkeeping. The state
// never mutates engine data — it only stores what the gateway returned —
// and the waypoints submitted to the server are always the raw clicks.

import { approxDistanceM } from './mercator.js';
import type {
  CaptureRecord,
  PlanResponse,
  SessionResponse,
  StepResponse,
  Waypoint,
} from './types.js';

export const MAX_VISIBLE_CAPTURES = 5000;
export const SNAP_RADIUS_M = 15;

export type BoundaryIndicator = 'none' | 'green' | 'red' | 'conflict';

export interface LatLon {
  lat: number;
  lon: number;
}

/**
 * Thin captures down to at most MAX_VISIBLE_CAPTURES by uniform striding
 * so a dense corpus stays responsive; at or below the cap the input is
 * returned untouched.
 */
export function decimateCaptures(
  captures: CaptureRecord[],
  cap: number = MAX_VISIBLE_CAPTURES,
): CaptureRecord[] {
  if (captures.length <= cap) return captures;
  const stride = Math.ceil(captures.length / cap);
  return captures.filter((_, i) => i % stride === 0);
}

/**
 * Where to draw a waypoint marker: the nearest capture within
 * SNAP_RADIUS_M when snapping is on, else the raw click. Purely visual —
 * the raw click is what gets planned.
 */
export function snapForDisplay(
  raw: LatLon,
  captures: CaptureRecord[],
  snapEnabled: boolean,
): LatLon {
  if (!snapEnabled) return raw;
  let best: CaptureRecord | null = null;
  let bestDistance = SNAP_RADIUS_M;
  for (const capture of captures) {
    const distance = approxDistanceM(raw, capture);
    if (distance <= bestDistance) {
      best = capture;
      bestDistance = distance;
    }
  }
  return best === null ? raw : { lat: best.lat, lon: best.lon };
}

export class ConsoleState {
  centerLat = 0;
  centerLon = 0;
  zoom = 16;

  captures: CaptureRecord[] = [];
  snapEnabled = false;

  /** Raw clicked waypoints, exactly as submitted to the gateway. */
  drawnWaypoints: LatLon[] = [];

  /** Latest /plan response, or null before the first plan. */
  activePlan: PlanResponse | null = null;
  /** Uncovered [start_m, end_m] intervals from a no_coverage error. */
  uncoveredIntervals: [number, number][] = [];

  activeSession: SessionResponse | null = null;
  /** Frame index shown in the viewer. */
  playbackCursor = 0;
  /** Client-side lock: at most one in-flight step per session. */
  stepInFlight = false;

  /** last_frame_digest of the most recent chunk, for the boundary check. */
  private previousLastDigest: string | null = null;
  boundaryIndicator: BoundaryIndicator = 'none';
  loopClosureErrorM: number | null = null;

  addWaypoint(point: LatLon): void {
    this.drawnWaypoints.push(point);
  }

  clearPath(): void {
    this.drawnWaypoints = [];
    this.activePlan = null;
    this.uncoveredIntervals = [];
  }

  /** The waypoint list the gateway receives: raw clicks, never snapped. */
  submissionWaypoints(): Waypoint[] {
    return this.drawnWaypoints.map((w) => [w.lat, w.lon]);
  }

  setPlan(plan: PlanResponse): void {
    this.activePlan = plan;
    this.uncoveredIntervals = [];
    // A fresh plan starts a fresh workflow; any previous session is no
    // longer what the map should describe.
    this.activeSession = null;
  }

  setUncovered(intervals: [number, number][]): void {
    this.activePlan = null;
    this.uncoveredIntervals = intervals;
  }

  setSession(session: SessionResponse): void {
    this.activeSession = session;
    this.playbackCursor = 0;
    this.stepInFlight = false;
    this.previousLastDigest = null;
    this.boundaryIndicator = 'none';
    this.loopClosureErrorM = session.loop_closure_error_m;
  }

  /** True if the step may be sent; false while one is in flight. */
  beginStep(): boolean {
    if (this.stepInFlight) return false;
    this.stepInFlight = true;
    return true;
  }

  stepFailed(): void {
    this.stepInFlight = false;
  }

  /**
   * Fold a step response into the state. The boundary indicator is the
   * console's own digest comparison; if it ever disagrees with the
   * server's verdict the indicator reports the conflict instead of
   * trusting either side.
   */
  recordStep(step: StepResponse): void {
    this.stepInFlight = false;
    if (this.previousLastDigest === null) {
      this.boundaryIndicator = 'none';
    } else {
      const clientEqual =
        step.first_frame_digest === this.previousLastDigest;
      const serverEqual = step.boundary_matches_previous === true;
      if (clientEqual !== serverEqual) {
        this.boundaryIndicator = 'conflict';
      } else {
        this.boundaryIndicator = clientEqual ? 'green' : 'red';
      }
    }
    this.previousLastDigest = step.last_frame_digest;
    this.loopClosureErrorM = step.loop_closure_error_m;
    if (this.activeSession !== null) {
      this.activeSession.status = step.status;
      this.activeSession.chunks_done = step.chunk_index + 1;
      this.activeSession.frame_count = step.frame_count;
      this.activeSession.loop_closure_error_m = step.loop_closure_error_m;
    }
  }

  frameCount(): number {
    return this.activeSession === null ? 0 : this.activeSession.frame_count;
  }

  seekFrame(index: number): void {
    const last = Math.max(0, this.frameCount() - 1);
    this.playbackCursor = Math.min(last, Math.max(0, index));
  }
}
