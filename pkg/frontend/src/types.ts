/** Wire types mirroring the JSON API. The UI never transforms these values:
 *  everything displayed is carried verbatim from a server response. */

export interface Fingerprints {
  dataset: string;
  model: string;
  embedding: string;
}

export interface Envelope {
  request: Record<string, unknown>;
  fingerprints: Fingerprints;
}

export interface SessionState {
  session_id: string;
  mixture: number[];
  record_id: number | null;
  adjustments: Record<string, number>;
  revision: number;
}

export interface SessionCreated extends Envelope {
  session_id: string;
  mixture: number[];
  revision: number;
}

export interface MixtureResponse extends Envelope {
  mixture: number[];
  revision: number;
}

export interface StateResponse extends Envelope {
  state: SessionState;
}

export interface Hit {
  id: number;
  distance: number;
  input: number[];
  output: number[];
}

export interface HitsResponse extends Envelope {
  hits: Hit[];
}

export interface PathStep {
  lambda: number;
  input: number[];
  predicted: number[];
  snapped_id: number;
  snap_distance: number;
  embed_xy: number[];
}

export interface InterpolateResponse extends Envelope {
  path: PathStep[];
}

export interface EmbeddingPage extends Envelope {
  space: string;
  ids: number[];
  xy: number[][];
  page: number;
  page_size: number;
  total: number;
}

export interface PointResponse extends Envelope {
  id: number;
  input: number[];
  output: number[];
  embed_xy: number[] | null;
  similarity_to_selection: number | null;
}

export interface SensitivityResponse extends Envelope {
  output_index: number;
  values: number[];
  tangent: number[];
  clamp_count: number;
}

export interface SimilarityPage extends Envelope {
  ids: number[];
  scores: number[];
  page: number;
  page_size: number;
  total: number;
}

export interface MetaResponse extends Envelope {
  n_records: number;
  input_names: string[];
  output_names: string[];
  stats: {
    out_mean: number[];
    out_std: number[];
    out_min: number[];
    out_max: number[];
    in_min: number[];
    in_max: number[];
    constant_outputs: boolean[];
  };
}
