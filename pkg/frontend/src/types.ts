export interface Bounds {
  min: [number, number, number];
  max: [number, number, number];
}

export interface HealthResponse {
  status: string;
  model_hash: string;
  scene_hash: string;
  p_min_db: number;
  p_max_db: number;
  bounds: Bounds;
}

export interface Footprint {
  type: 'box' | 'triangle';
  xy: [number, number][];
  z: [number, number];
}

export interface SceneOutline {
  bounds: Bounds;
  footprints: Footprint[];
  probes: [number, number, number][];
}

export interface PointResult {
  position: [number, number, number];
  p_norm: number;
  p_db: number;
}

export interface PredictRequest {
  tx: [number, number, number];
  pattern_id: number;
  height: number;
  resolution: number;
  point_queries?: [number, number, number][];
}

export interface PredictResponse {
  bounds: Bounds;
  resolution: number;
  p_min_db: number;
  p_max_db: number;
  values_norm: number[];
  point_results: PointResult[];
  elapsed_ms: number;
}

export interface HistoryEntry {
  position: [number, number, number];
  p_norm: number;
  p_db: number;
}

/** A rendered map pinned to the request that produced it. */
export interface MapView {
  seq: number;
  resolution: number;
  values: number[];
  pMinDb: number;
  pMaxDb: number;
}

export interface PlannerState {
  bounds: Bounds | null;
  scene: SceneOutline | null;
  tx: [number, number, number];
  patternId: number;
  height: number;
  resolution: number;
  showProbes: boolean;
  latestRequestSeq: number;
  map: MapView | null;
  history: HistoryEntry[];
  error: string | null;
}
