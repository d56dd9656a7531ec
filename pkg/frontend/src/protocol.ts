// Wire protocol types, mirroring docs/protocol.md on the engine side.
// Frames are newline-delimited JSON objects over a WebSocket.

export type CommandKind = 'confirm' | 'text' | 'select' | 'escape';

export interface ConfirmCommand {
  kind: 'confirm';
  yes: boolean;
}

export interface TextCommand {
  kind: 'text';
  text: string;
}

export interface SelectCommand {
  kind: 'select';
  option: 'First' | 'Second' | 'Female' | 'Male';
}

export interface EscapeCommand {
  kind: 'escape';
}

export type Command = ConfirmCommand | TextCommand | SelectCommand | EscapeCommand;

export interface FtSamplePayload {
  t: number;
  fx: number;
  fy: number;
  fz: number;
  tx: number;
  ty: number;
  tz: number;
  touched: boolean;
}

export interface TrialInfo {
  label: string;
  index: number;
  total: number;
  distance_mm: number;
  presentation: string;
}

export interface StepperInfo {
  mm: number;
  steps: number;
}

export interface QuotaEntry {
  distance_mm: number;
  presented: number;
  total: number;
  available: boolean;
}

export interface SnapshotPayload {
  phase: string;
  prompt: string;
  debug_mode: boolean;
  participant_id: string | null;
  intake_field: string | null;
  response_enabled: boolean;
  records: number;
  correct_count: number;
  last_correct: boolean | null;
  ft_threshold: number;
  ft_recent: FtSamplePayload[];
  trial: TrialInfo | null;
  stepper: StepperInfo | null;
  quota: QuotaEntry[] | null;
  end_reason: string | null;
}

export interface TrialResultPayload {
  trial_no: number;
  label: string;
  presentation: string;
  distance_mm: number;
  response: string;
  correct: boolean;
  touched: [boolean, boolean];
}

export interface SessionEndPayload {
  reason: 'complete' | 'cancelled';
  detail: string | null;
  records: number;
}

export interface ErrorPayload {
  code: string;
  message: string;
}

export type GatewayEvent =
  | { kind: 'snapshot'; seq: number; payload: SnapshotPayload; ack?: string; ok?: boolean; duplicate?: boolean }
  | { kind: 'prompt'; seq: number; payload: { text: string } }
  | { kind: 'ft_live'; seq: number; payload: FtSamplePayload }
  | { kind: 'trial_result'; seq: number; payload: TrialResultPayload }
  | { kind: 'session_end'; seq: number; payload: SessionEndPayload }
  | { kind: 'error'; seq: number; payload: ErrorPayload; ack?: string };

export function encodeCommand(command: Command, requestId: string): string {
  return JSON.stringify({ ...command, request_id: requestId }) + '\n';
}

export function decodeEvent(frame: string): GatewayEvent {
  const parsed = JSON.parse(frame) as GatewayEvent;
  if (typeof parsed !== 'object' || parsed === null || !('kind' in parsed)) {
    throw new Error('frame is not a gateway event');
  }
  return parsed;
}
