// Browser entry point. The gateway address comes from the ?gateway= query
// parameter, e.g.  index.html?gateway=ws://127.0.0.1:8765

import { ConsoleApp } from './app.js';

const params = new URLSearchParams(window.location.search);
const url = params.get('gateway') ?? `ws://${window.location.hostname}:8765`;

const root = document.getElementById('app');
if (!root) throw new Error('missing #app element');

const app = new ConsoleApp(root, url, (address) => new WebSocket(address));
app.start();
