/** Wire types of the annotation service API. */

export type MatchStatus = "proposed" | "confirmed" | "corrected" | "rejected";
export type SessionStatus = "proposed" | "in_review" | "finalized";

export interface TrajectoryView {
  visit_id: string;
  timestamps: number[];
  positions: [number, number][];
}

export interface TurningPointView {
  position: number;
  keyframe_index: number;
  angle_deg: number | null;
  origin: "auto" | "manual_added" | "manual_moved";
}

export interface MatchView {
  position: number;
  index_a: number;
  index_b: number;
  keyframe_a: number;
  keyframe_b: number;
  timestamp_a: number;
  timestamp_b: number;
  status: MatchStatus;
}

export interface SessionView {
  session_id: string;
  scene_id: string;
  status: SessionStatus;
  version: number;
  duration_a: number;
  duration_b: number;
  trajectory_a: TrajectoryView;
  trajectory_b: TrajectoryView;
  turning_points_a: TurningPointView[];
  turning_points_b: TurningPointView[];
  matches: MatchView[];
  artifacts: string[];
}

export interface CandidateView {
  keyframe_index: number;
  timestamp: number;
  position: [number, number];
  image_url: string | null;
}

export interface CandidateWindowView {
  match_position: number;
  target_keyframe_a: CandidateView;
  proposed_keyframe_b: number;
  candidates: CandidateView[];
}

export type CorrectionAction = "confirm" | "set" | "add" | "reject";

export interface CorrectionRequest {
  version: number;
  action: CorrectionAction;
  position?: number;
  keyframe_a?: number;
  keyframe_b?: number;
  annotator?: string;
}

export interface ErrorBody {
  code: string;
  message: string;
  detail?: Record<string, unknown>;
}
