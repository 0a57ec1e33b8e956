// Wire types mirroring the review service's JSON bodies (dataset-store schema).

export type ProvenanceSource = 'profile' | 'query';

export interface ToolCallRecord {
  platform: string;
  function: string;
  args: Record<string, unknown>;
}

export interface ProvenanceTag {
  call: number;
  param: string;
  source: ProvenanceSource;
}

export interface BehaviorRecord {
  platform: string;
  action: string;
}

export interface ProfileRecord {
  user_id: string;
  basic_features: Record<string, string>;
  implicit_features: Record<string, string>;
  history: Record<string, BehaviorRecord[]>;
}

export interface SampleRecord {
  id: string;
  user_id: string;
  scenario: string;
  query: string;
  gold: { calls: ToolCallRecord[] };
  provenance: ProvenanceTag[];
  status: string;
  split: string | null;
  profile?: ProfileRecord | null;
}

export interface SamplePage {
  items: SampleRecord[];
  page: number;
  page_size: number;
  total: number;
  pages: number;
}

export interface Progress {
  pending: number;
  accepted: number;
  rejected: number;
  total: number;
}

export interface DecisionBody {
  action: 'accept' | 'reject' | 'edit';
  annotator_id: string;
  timestamp: string;
  edited_gold?: { calls: ToolCallRecord[] } | null;
  edited_provenance?: ProvenanceTag[] | null;
}

export interface ViolationRecord {
  kind: string;
  call: number | null;
  param: string | null;
  detail: string;
}

export interface InvalidEditDetail {
  error: string;
  violations?: ViolationRecord[];
  provenance?: string;
}

export interface ExportManifest {
  counts: { accepted: number };
  by_split: Record<string, number>;
}
