// DOM renderer: one screen per engine phase, driven entirely by the view
// model. Prompts are rendered verbatim in a <pre> so the engine wording
// (including trailing spaces) reaches the operator byte for byte.
//
// Gender and the participant's response are buttons only; there is no text
// entry on those screens, enforcing the no-typing rule in the markup itself.

import type { Command } from './protocol.js';
import type { ConsoleViewModel } from './viewmodel.js';
import { isTerminal } from './viewmodel.js';
import { drawChart } from './ftchart.js';

export type Dispatch = (command: Command) => void;

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function button(
  doc: Document,
  label: string,
  action: string,
  onClick: () => void,
  disabled: boolean,
): HTMLButtonElement {
  const node = el(doc, 'button', 'action');
  node.textContent = label;
  node.dataset.action = action;
  node.disabled = disabled;
  node.addEventListener('click', onClick);
  return node;
}

function confirmButtons(doc: Document, dispatch: Dispatch, vm: ConsoleViewModel, yesLabel = 'Y', noLabel = 'N'): HTMLElement {
  const row = el(doc, 'div', 'button-row');
  row.appendChild(button(doc, yesLabel, 'confirm-yes', () => dispatch({ kind: 'confirm', yes: true }), vm.busy));
  row.appendChild(button(doc, noLabel, 'confirm-no', () => dispatch({ kind: 'confirm', yes: false }), vm.busy));
  return row;
}

function intakeScreen(doc: Document, vm: ConsoleViewModel, dispatch: Dispatch): HTMLElement {
  const screen = el(doc, 'div', 'screen screen-intake');
  if (vm.intakeField === 'gender') {
    const row = el(doc, 'div', 'button-row gender-options');
    row.appendChild(button(doc, 'Female', 'select-female', () => dispatch({ kind: 'select', option: 'Female' }), vm.busy));
    row.appendChild(button(doc, 'Male', 'select-male', () => dispatch({ kind: 'select', option: 'Male' }), vm.busy));
    screen.appendChild(row);
    return screen;
  }
  const form = el(doc, 'form', 'intake-form');
  const input = el(doc, 'input');
  input.dataset.field = vm.intakeField ?? '';
  input.setAttribute('autocomplete', 'off');
  const submit = button(doc, 'Enter', 'submit-text', () => undefined, vm.busy);
  submit.setAttribute('type', 'submit');
  form.appendChild(input);
  form.appendChild(submit);
  form.addEventListener('submit', (ev) => {
    ev.preventDefault();
    dispatch({ kind: 'text', text: input.value });
  });
  screen.appendChild(form);
  return screen;
}

function stepperScreen(doc: Document, vm: ConsoleViewModel, dispatch: Dispatch): HTMLElement {
  const screen = el(doc, 'div', 'screen screen-stepper');
  if (vm.stepper) {
    const card = el(doc, 'div', 'stepper-card');
    card.appendChild(el(doc, 'div', 'stepper-mm', `${vm.stepper.mm.toFixed(1)} mm`));
    card.appendChild(el(doc, 'div', 'stepper-steps', `${vm.stepper.steps.toFixed(2)} steps`));
    card.appendChild(
      el(doc, 'div', 'stepper-hint', 'set the stepper, then confirm'),
    );
    screen.appendChild(card);
  }
  const row = el(doc, 'div', 'button-row');
  row.appendChild(button(doc, 'Y', 'confirm-yes', () => dispatch({ kind: 'confirm', yes: true }), vm.busy));
  screen.appendChild(row);
  return screen;
}

function responseScreen(doc: Document, vm: ConsoleViewModel, dispatch: Dispatch): HTMLElement {
  const screen = el(doc, 'div', 'screen screen-response');
  const row = el(doc, 'div', 'button-row response-options');
  row.appendChild(button(doc, 'First', 'select-first', () => dispatch({ kind: 'select', option: 'First' }), vm.busy || !vm.responseEnabled));
  row.appendChild(button(doc, 'Second', 'select-second', () => dispatch({ kind: 'select', option: 'Second' }), vm.busy || !vm.responseEnabled));
  screen.appendChild(row);
  return screen;
}

function terminalScreen(doc: Document, vm: ConsoleViewModel): HTMLElement {
  const screen = el(doc, 'div', 'screen screen-terminal');
  const title = vm.phase === 'SessionComplete' ? 'session complete' : 'demo cancelled';
  screen.appendChild(el(doc, 'h2', 'terminal-title', title));
  screen.appendChild(
    el(doc, 'div', 'terminal-records', `${vm.records} trials persisted`),
  );
  if (vm.endDetail) screen.appendChild(el(doc, 'div', 'terminal-detail', vm.endDetail));
  return screen;
}

function waitingScreen(doc: Document, vm: ConsoleViewModel): HTMLElement {
  const screen = el(doc, 'div', 'screen screen-waiting');
  screen.appendChild(el(doc, 'div', 'spinner', '⋯'));
  screen.appendChild(el(doc, 'div', 'waiting-phase', vm.phase));
  return screen;
}

function phaseScreen(doc: Document, vm: ConsoleViewModel, dispatch: Dispatch): HTMLElement {
  switch (vm.phase) {
    case 'AwaitDebugChoice': {
      const screen = el(doc, 'div', 'screen screen-debug-choice');
      screen.appendChild(confirmButtons(doc, dispatch, vm));
      return screen;
    }
    case 'Intake':
      return intakeScreen(doc, vm, dispatch);
    case 'AwaitInitConfirm': {
      const screen = el(doc, 'div', 'screen screen-init-confirm');
      screen.appendChild(confirmButtons(doc, dispatch, vm));
      return screen;
    }
    case 'AwaitStepperMove':
      return stepperScreen(doc, vm, dispatch);
    case 'AwaitResponse':
      return responseScreen(doc, vm, dispatch);
    case 'SessionComplete':
    case 'Cancelled':
      return terminalScreen(doc, vm);
    default:
      return waitingScreen(doc, vm);
  }
}

function header(doc: Document, vm: ConsoleViewModel, dispatch: Dispatch): HTMLElement {
  const bar = el(doc, 'header', 'topbar');
  // After intake only the ID is ever shown; names stay off the screen.
  bar.appendChild(el(doc, 'span', 'participant', vm.participantId ? `ID: ${vm.participantId}` : ''));
  if (vm.trial) {
    bar.appendChild(
      el(doc, 'span', 'progress', `${vm.trial.label} ${vm.trial.index}/${vm.trial.total}`),
    );
  }
  if (vm.records > 0) {
    bar.appendChild(el(doc, 'span', 'score', `${vm.correctCount}/${vm.records} correct`));
  }
  if (!isTerminal(vm) && vm.phase !== 'Connecting') {
    bar.appendChild(button(doc, 'esc', 'escape', () => dispatch({ kind: 'escape' }), vm.busy));
  }
  return bar;
}

function quotaTable(doc: Document, vm: ConsoleViewModel): HTMLElement {
  const table = el(doc, 'table', 'quota');
  const head = el(doc, 'tr');
  for (const label of ['distance [mm]', 'presented', 'available']) {
    head.appendChild(el(doc, 'th', undefined, label));
  }
  table.appendChild(head);
  for (const row of vm.quota ?? []) {
    const tr = el(doc, 'tr', row.available ? 'available' : 'exhausted');
    tr.appendChild(el(doc, 'td', undefined, row.distance_mm.toFixed(1)));
    tr.appendChild(el(doc, 'td', undefined, `${row.presented}/${row.total}`));
    tr.appendChild(el(doc, 'td', undefined, row.available ? 'yes' : 'no'));
    table.appendChild(tr);
  }
  return table;
}

export function render(root: HTMLElement, vm: ConsoleViewModel, dispatch: Dispatch): void {
  const doc = root.ownerDocument;
  root.textContent = '';
  const shell = el(doc, 'div', 'console');

  shell.appendChild(header(doc, vm, dispatch));
  shell.appendChild(el(doc, 'pre', 'prompt', vm.prompt));
  shell.appendChild(phaseScreen(doc, vm, dispatch));

  if (vm.toast) shell.appendChild(el(doc, 'div', `toast toast-${vm.toast}`, vm.toast));
  if (vm.error) shell.appendChild(el(doc, 'div', 'error', vm.error));

  const canvas = el(doc, 'canvas', 'ft-chart');
  canvas.width = 640;
  canvas.height = 160;
  shell.appendChild(canvas);
  drawChart(canvas, vm.ftTrace, vm.ftThreshold);

  if (vm.quota) shell.appendChild(quotaTable(doc, vm));
  if (vm.consoleTail.length > 0) {
    shell.appendChild(el(doc, 'pre', 'console-tail', vm.consoleTail.join('\n')));
  }

  if (!vm.connected) {
    const overlay = el(doc, 'div', 'overlay');
    overlay.appendChild(el(doc, 'div', 'overlay-message', 'connection lost, reconnecting…'));
    shell.appendChild(overlay);
  }

  root.appendChild(shell);
}
