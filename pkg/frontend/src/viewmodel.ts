// The console's entire display state, derived from gateway events.
//
// The model is intentionally stateless beyond the last snapshot: a snapshot
// overwrites every snapshot-derived field, so reconnecting mid-session
// reproduces the exact screen. Only the FT trace and the console tail grow
// between snapshots, and both are re-seeded from the snapshot on arrival.

import type { GatewayEvent, QuotaEntry, SnapshotPayload, StepperInfo, TrialInfo } from './protocol.js';

export interface FtPoint {
  t: number;
  fz: number;
  touched: boolean;
}

export interface ConsoleViewModel {
  connected: boolean;
  busy: boolean; // a command is awaiting acknowledgment
  phase: string;
  prompt: string;
  debugMode: boolean;
  participantId: string | null;
  intakeField: string | null;
  responseEnabled: boolean;
  records: number;
  correctCount: number;
  ftThreshold: number;
  ftTrace: FtPoint[];
  trial: TrialInfo | null;
  stepper: StepperInfo | null;
  quota: QuotaEntry[] | null;
  toast: string | null; // operator-only correctness flash
  error: string | null; // last rejected command, cleared by the next snapshot
  endReason: string | null;
  endDetail: string | null;
  consoleTail: string[];
}

export const FT_TRACE_CAP = 200;
export const CONSOLE_TAIL_CAP = 12;

export function initialViewModel(): ConsoleViewModel {
  return {
    connected: false,
    busy: false,
    phase: 'Connecting',
    prompt: '',
    debugMode: false,
    participantId: null,
    intakeField: null,
    responseEnabled: false,
    records: 0,
    correctCount: 0,
    ftThreshold: 0,
    ftTrace: [],
    trial: null,
    stepper: null,
    quota: null,
    toast: null,
    error: null,
    endReason: null,
    endDetail: null,
    consoleTail: [],
  };
}

function fromSnapshot(vm: ConsoleViewModel, snapshot: SnapshotPayload): ConsoleViewModel {
  return {
    ...vm,
    phase: snapshot.phase,
    prompt: snapshot.prompt,
    debugMode: snapshot.debug_mode,
    participantId: snapshot.participant_id,
    intakeField: snapshot.intake_field,
    responseEnabled: snapshot.response_enabled,
    records: snapshot.records,
    correctCount: snapshot.correct_count,
    ftThreshold: snapshot.ft_threshold,
    ftTrace: snapshot.ft_recent.map((s) => ({ t: s.t, fz: s.fz, touched: s.touched })),
    trial: snapshot.trial,
    stepper: snapshot.stepper,
    quota: snapshot.quota,
    toast:
      snapshot.records > 0 && snapshot.last_correct !== null
        ? snapshot.last_correct
          ? 'correct'
          : 'wrong'
        : null,
    error: null,
    endReason: snapshot.end_reason,
  };
}

export function applyEvent(vm: ConsoleViewModel, event: GatewayEvent): ConsoleViewModel {
  switch (event.kind) {
    case 'snapshot': {
      const next = fromSnapshot(vm, event.payload);
      if (event.ack !== undefined) next.busy = false;
      return next;
    }
    case 'prompt': {
      const tail = [...vm.consoleTail, event.payload.text].slice(-CONSOLE_TAIL_CAP);
      return { ...vm, consoleTail: tail };
    }
    case 'ft_live': {
      const point = { t: event.payload.t, fz: event.payload.fz, touched: event.payload.touched };
      return { ...vm, ftTrace: [...vm.ftTrace, point].slice(-FT_TRACE_CAP) };
    }
    case 'trial_result':
      return { ...vm, toast: event.payload.correct ? 'correct' : 'wrong' };
    case 'session_end':
      return { ...vm, endReason: event.payload.reason, endDetail: event.payload.detail };
    case 'error': {
      const next = { ...vm, error: event.payload.message };
      if (event.ack !== undefined) next.busy = false;
      return next;
    }
  }
}

export function setConnected(vm: ConsoleViewModel, connected: boolean): ConsoleViewModel {
  // A dropped link also drops any in-flight command; the reconnect snapshot resyncs.
  return connected ? { ...vm, connected } : { ...vm, connected, busy: false };
}

export function setBusy(vm: ConsoleViewModel, busy: boolean): ConsoleViewModel {
  return { ...vm, busy };
}

export function isTerminal(vm: ConsoleViewModel): boolean {
  return vm.phase === 'SessionComplete' || vm.phase === 'Cancelled';
}
