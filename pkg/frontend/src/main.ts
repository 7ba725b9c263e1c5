import './style.css';
import { mountApp } from './app';
import { createClient } from './gateway';
import { showToast } from './toast';

const root = document.getElementById('app');
if (root) {
  // same-origin in production; the dev server proxies /api to the gateway
  mountApp(document, root, createClient('')).catch((err: Error) => {
    showToast(document, `cannot reach gateway: ${err.message}`, 60_000);
  });
}
