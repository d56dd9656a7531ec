// Glue: socket events update the view model, the view dispatches commands.

import type { Command, GatewayEvent } from './protocol.js';
import { GatewayClient, type WebSocketFactory } from './socket.js';
import {
  applyEvent,
  initialViewModel,
  setBusy,
  setConnected,
  type ConsoleViewModel,
} from './viewmodel.js';
import { render } from './view.js';

export class ConsoleApp {
  vm: ConsoleViewModel = initialViewModel();
  private client: GatewayClient;
  private readonly keyHandler = (ev: KeyboardEvent) => {
    if (ev.key === 'Escape') this.dispatch({ kind: 'escape' });
  };

  constructor(
    private readonly root: HTMLElement,
    url: string,
    makeSocket: WebSocketFactory,
  ) {
    this.client = new GatewayClient(url, {
      onEvent: (event) => this.handleEvent(event),
      onConnected: () => this.update(setConnected(this.vm, true)),
      onDisconnected: () => this.update(setConnected(this.vm, false)),
    }, makeSocket);
    root.ownerDocument.addEventListener('keydown', this.keyHandler);
    this.update(this.vm);
  }

  start(): void {
    this.client.connect();
  }

  dispatch = (command: Command): void => {
    if (!this.vm.connected) return; // stale commands never leave the overlay
    if (this.client.send(command)) {
      this.update(setBusy(this.vm, true));
    }
  };

  private handleEvent(event: GatewayEvent): void {
    this.update(applyEvent(this.vm, event));
  }

  private update(vm: ConsoleViewModel): void {
    this.vm = vm;
    render(this.root, vm, this.dispatch);
  }

  destroy(): void {
    this.root.ownerDocument.removeEventListener('keydown', this.keyHandler);
    this.client.destroy();
  }
}
