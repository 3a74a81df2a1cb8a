// Gateway payload shapes. Field names mirror the HTTP JSON exactly so a
// parsed response can be used as-is.

export interface CaptureRecord {
  id: string;
  lat: number;
  lon: number;
  trajectory_id: string;
  t: number;
}

export interface CapturesResponse {
  api_version: string;
  captures: CaptureRecord[];
}

export interface PlanStep {
  pano_id: string;
  segment_id: string;
  s: number;
  lateral_m: number;
  heading_mismatch_deg: number;
  lat: number;
  lon: number;
}

export interface PlanDiagnostics {
  max_gap_m: number;
  coverage_fraction: number;
  switch_discontinuities_m: number[];
}

export interface PlanResponse {
  api_version: string;
  steps: PlanStep[];
  switch_points: number[];
  total_cost: number;
  path_length_m: number;
  diagnostics: PlanDiagnostics;
}

export interface SessionStep {
  pano_id: string;
  segment_id: string;
  s: number;
  lat: number;
  lon: number;
}

export interface SessionResponse {
  api_version: string;
  session_id: string;
  status: 'active' | 'complete';
  seed: number;
  chunk_len: number;
  chunks_total: number;
  chunks_done: number;
  frame_count: number;
  chunk_boundaries: number[];
  switch_points: number[];
  backend_ids: string[];
  backend_name: string;
  steps: SessionStep[];
  loop_closure_error_m: number | null;
}

export interface StepResponse {
  api_version: string;
  session_id: string;
  chunk_index: number;
  segment_frames: number;
  boundary_matches_previous: boolean | null;
  first_frame_digest: string;
  last_frame_digest: string;
  status: 'active' | 'complete';
  frame_count: number;
  loop_closure_error_m: number | null;
}

export interface ErrorBody {
  code: string;
  message: string;
  detail: unknown;
}

/** [lat, lon] or [lat, lon, alt] as the gateway accepts them. */
export type Waypoint = [number, number] | [number, number, number];

export interface PlannerOverrides {
  corridor_m?: number;
  gap_max_m?: number;
}

export interface SessionRequest extends PlannerOverrides {
  waypoints: Waypoint[];
  seed?: number;
  backend?: string;
  chunk_len?: number;
}
