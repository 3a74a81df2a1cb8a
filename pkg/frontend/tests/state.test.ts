import { describe, expect, it } from 'vitest';

import {
  ConsoleState,
  MAX_VISIBLE_CAPTURES,
  decimateCaptures,
  snapForDisplay,
} from '../src/state.js';
import type { CaptureRecord, StepResponse } from '../src/types.js';

function capture(id: string, lat: number, lon: number): CaptureRecord {
  return { id, lat, lon, trajectory_id: 't0', t: 0 };
}

function stepResponse(overrides: Partial<StepResponse>): StepResponse {
  return {
    api_version: '1',
    session_id: 'abc',
    chunk_index: 0,
    segment_frames: 73,
    boundary_matches_previous: null,
    first_frame_digest: 'd0',
    last_frame_digest: 'd1',
    status: 'active',
    frame_count: 73,
    loop_closure_error_m: null,
    ...overrides,
  };
}

describe('decimateCaptures', () => {
  it('returns small sets untouched', () => {
    const captures = [capture('a', 0, 0), capture('b', 0, 1)];
    expect(decimateCaptures(captures)).toBe(captures);
  });

  it('strides down to the cap', () => {
    const captures = Array.from({ length: 12_000 }, (_, i) =>
      capture(`c${i}`, 0, i * 1e-5));
    const thinned = decimateCaptures(captures);
    expect(thinned.length).toBeLessThanOrEqual(MAX_VISIBLE_CAPTURES);
    expect(thinned.length).toBeGreaterThan(MAX_VISIBLE_CAPTURES / 2);
    expect(thinned[0]).toBe(captures[0]);
    expect(thinned[1]).toBe(captures[3]); // stride ceil(12000/5000) = 3
  });
});

describe('snapForDisplay', () => {
  const captures = [capture('near', 0, 0), capture('far', 0.01, 0.01)];

  it('snaps to the nearest capture inside the radius', () => {
    const raw = { lat: 0.00005, lon: 0 }; // ~5.6 m from "near"
    const shown = snapForDisplay(raw, captures, true);
    expect(shown).toEqual({ lat: 0, lon: 0 });
  });

  it('keeps the raw point outside the radius', () => {
    const raw = { lat: 0.0005, lon: 0 }; // ~56 m away
    expect(snapForDisplay(raw, captures, true)).toEqual(raw);
  });

  it('is inert when the toggle is off', () => {
    const raw = { lat: 0.00005, lon: 0 };
    expect(snapForDisplay(raw, captures, false)).toBe(raw);
  });
});

describe('ConsoleState path drawing', () => {
  it('submits the raw clicks even with snapping enabled', () => {
    const state = new ConsoleState();
    state.snapEnabled = true;
    state.captures = [capture('near', 0, 0)];
    state.addWaypoint({ lat: 0.00005, lon: 0 });
    state.addWaypoint({ lat: 0.001, lon: 0.001 });
    expect(state.submissionWaypoints()).toEqual([
      [0.00005, 0],
      [0.001, 0.001],
    ]);
  });

  it('clears plan and uncovered intervals with the path', () => {
    const state = new ConsoleState();
    state.addWaypoint({ lat: 0, lon: 0 });
    state.setUncovered([[0, 10]]);
    state.clearPath();
    expect(state.drawnWaypoints).toEqual([]);
    expect(state.uncoveredIntervals).toEqual([]);
    expect(state.activePlan).toBeNull();
  });
});

describe('ConsoleState stepping', () => {
  it('allows only one in-flight step', () => {
    const state = new ConsoleState();
    expect(state.beginStep()).toBe(true);
    expect(state.beginStep()).toBe(false);
    state.stepFailed();
    expect(state.beginStep()).toBe(true);
    state.recordStep(stepResponse({}));
    expect(state.beginStep()).toBe(true);
  });

  it('shows no boundary verdict for the first chunk', () => {
    const state = new ConsoleState();
    state.recordStep(stepResponse({ boundary_matches_previous: null }));
    expect(state.boundaryIndicator).toBe('none');
  });

  it('goes green when digests chain and the server agrees', () => {
    const state = new ConsoleState();
    state.recordStep(stepResponse({ last_frame_digest: 'boundary' }));
    state.recordStep(stepResponse({
      chunk_index: 1,
      first_frame_digest: 'boundary',
      boundary_matches_previous: true,
    }));
    expect(state.boundaryIndicator).toBe('green');
  });

  it('goes red when both sides report a mismatch', () => {
    const state = new ConsoleState();
    state.recordStep(stepResponse({ last_frame_digest: 'boundary' }));
    state.recordStep(stepResponse({
      chunk_index: 1,
      first_frame_digest: 'different',
      boundary_matches_previous: false,
    }));
    expect(state.boundaryIndicator).toBe('red');
  });

  it('flags client/server disagreement instead of picking a side', () => {
    const state = new ConsoleState();
    state.recordStep(stepResponse({ last_frame_digest: 'boundary' }));
    state.recordStep(stepResponse({
      chunk_index: 1,
      first_frame_digest: 'boundary',
      boundary_matches_previous: false,
    }));
    expect(state.boundaryIndicator).toBe('conflict');
  });

  it('tracks completion in the active session', () => {
    const state = new ConsoleState();
    state.setSession({
      api_version: '1',
      session_id: 'abc',
      status: 'active',
      seed: 0,
      chunk_len: 73,
      chunks_total: 2,
      chunks_done: 0,
      frame_count: 0,
      chunk_boundaries: [],
      switch_points: [],
      backend_ids: [],
      backend_name: 'mock-echo',
      steps: [],
      loop_closure_error_m: null,
    });
    state.recordStep(stepResponse({}));
    state.recordStep(stepResponse({
      chunk_index: 1,
      status: 'complete',
      frame_count: 145,
      first_frame_digest: 'd1',
      boundary_matches_previous: true,
      loop_closure_error_m: 0.25,
    }));
    expect(state.activeSession?.status).toBe('complete');
    expect(state.activeSession?.frame_count).toBe(145);
    expect(state.loopClosureErrorM).toBe(0.25);
    expect(state.boundaryIndicator).toBe('green');
  });
});

describe('frame cursor', () => {
  it('clamps to the available frames', () => {
    const state = new ConsoleState();
    state.setSession({
      api_version: '1',
      session_id: 'abc',
      status: 'active',
      seed: 0,
      chunk_len: 73,
      chunks_total: 2,
      chunks_done: 1,
      frame_count: 73,
      chunk_boundaries: [],
      switch_points: [],
      backend_ids: ['p0'],
      backend_name: 'mock-echo',
      steps: [],
      loop_closure_error_m: null,
    });
    state.seekFrame(1000);
    expect(state.playbackCursor).toBe(72);
    state.seekFrame(-5);
    expect(state.playbackCursor).toBe(0);
  });
});
