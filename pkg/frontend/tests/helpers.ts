import type { SnapshotPayload } from '../src/protocol.js';

export function snapshot(overrides: Partial<SnapshotPayload> = {}): SnapshotPayload {
  return {
    phase: 'AwaitDebugChoice',
    prompt: 'Debug mode: YES (Continue Y/N)',
    debug_mode: false,
    participant_id: null,
    intake_field: null,
    response_enabled: false,
    records: 0,
    correct_count: 0,
    last_correct: null,
    ft_threshold: 0.25,
    ft_recent: [],
    trial: null,
    stepper: null,
    quota: null,
    end_reason: null,
    ...overrides,
  };
}

export async function waitFor(
  condition: () => boolean,
  timeoutMs = 5000,
  what = 'condition',
): Promise<void> {
  const start = Date.now();
  while (!condition()) {
    if (Date.now() - start > timeoutMs) throw new Error(`timed out waiting for ${what}`);
    await new Promise((resolve) => setTimeout(resolve, 20));
  }
}
