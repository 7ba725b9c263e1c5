// One peer's panel: live view canvas, state badge, advance buttons, IM box.
// The socket and raster are injectable because the test runner's DOM has
// neither a real 2D context nor a browser network stack.

import { DecodedFrame, Pixel, decodeFrameMessage, pixelAt } from './frames';
import { AdvanceTarget, GatewayClient, PeerState, stateLabel } from './gateway';
import { showToast } from './toast';

export interface Raster {
  draw(pixels: Uint8ClampedArray<ArrayBuffer>, width: number, height: number): void;
}

export function canvasRaster(canvas: HTMLCanvasElement): Raster | null {
  const ctx = canvas.getContext('2d');
  if (!ctx) return null;
  return {
    draw(pixels, width, height) {
      if (canvas.width !== width) canvas.width = width;
      if (canvas.height !== height) canvas.height = height;
      ctx.putImageData(new ImageData(pixels, width, height), 0, 0);
    },
  };
}

export interface PanelOptions {
  statePollMs?: number;
  retryMs?: number;
  makeRaster?: (canvas: HTMLCanvasElement) => Raster | null;
  socketFactory?: (url: string) => WebSocket;
}

export interface Panel {
  peer: string;
  el: HTMLElement;
  lastFrame: DecodedFrame | null;
  lastState: PeerState | null;
  /** Pixel as handed to the canvas for the most recent frame. */
  readPixel(x: number, y: number): Pixel;
  advance(target: AdvanceTarget): Promise<void>;
  dispose(): void;
}

export function createPanel(
  doc: Document,
  client: GatewayClient,
  peer: string,
  opts: PanelOptions = {},
): Panel {
  const statePollMs = opts.statePollMs ?? 200;
  const retryMs = opts.retryMs ?? 1000;
  const socketFactory = opts.socketFactory ?? ((url: string) => new WebSocket(url));

  const el = doc.createElement('section');
  el.className = 'panel';
  el.tabIndex = 0;
  el.dataset.peer = peer;
  el.innerHTML = `
    <header>
      <h2>peer ${peer}</h2>
      <span class="badge" data-badge>…</span>
      <span class="conn" data-conn>connecting</span>
    </header>
    <canvas data-view width="320" height="240"></canvas>
    <div class="controls">
      <button type="button" data-advance-local>advance local</button>
      <button type="button" data-advance-remote>advance remote</button>
      <form data-im-form>
        <input data-im placeholder="IM text" autocomplete="off">
        <button type="submit">send IM</button>
      </form>
    </div>
  `;

  const badge = el.querySelector('[data-badge]') as HTMLElement;
  const conn = el.querySelector('[data-conn]') as HTMLElement;
  const canvas = el.querySelector('[data-view]') as HTMLCanvasElement;
  const imInput = el.querySelector('[data-im]') as HTMLInputElement;
  const raster = (opts.makeRaster ?? canvasRaster)(canvas);

  let disposed = false;
  let socket: WebSocket | null = null;
  let retryTimer: ReturnType<typeof setTimeout> | null = null;

  const panel: Panel = {
    peer,
    el,
    lastFrame: null,
    lastState: null,
    readPixel(x, y) {
      if (!panel.lastFrame) throw new Error(`no frame received for ${peer}`);
      return pixelAt(panel.lastFrame, x, y);
    },
    async advance(target) {
      try {
        await client.advance(peer, target);
      } catch (err) {
        showToast(doc, `advance ${target} on ${peer} failed: ${(err as Error).message}`);
      }
    },
    dispose() {
      disposed = true;
      clearInterval(pollTimer);
      if (retryTimer !== null) clearTimeout(retryTimer);
      socket?.close();
    },
  };

  async function pollState() {
    try {
      const state = await client.state(peer);
      panel.lastState = state;
      badge.textContent = stateLabel(state);
      badge.dataset.mode = state.mode;
    } catch {
      // gateway unreachable; the socket status already shows it
    }
  }

  function connect() {
    retryTimer = null;
    const ws = socketFactory(client.viewSocketUrl(peer));
    socket = ws;
    ws.binaryType = 'arraybuffer';
    ws.onopen = () => {
      conn.textContent = 'live';
      conn.dataset.state = 'live';
    };
    ws.onmessage = (ev: MessageEvent) => {
      if (!(ev.data instanceof ArrayBuffer)) return;
      const frame = decodeFrameMessage(ev.data);
      panel.lastFrame = frame;
      raster?.draw(frame.pixels, frame.width, frame.height);
    };
    ws.onclose = () => {
      if (disposed) return;
      conn.textContent = 'reconnecting';
      conn.dataset.state = 'reconnecting';
      if (retryTimer === null) retryTimer = setTimeout(connect, retryMs);
    };
    ws.onerror = () => ws.close();
  }

  el.querySelector('[data-advance-local]')!.addEventListener('click', () => {
    void panel.advance('local');
  });
  el.querySelector('[data-advance-remote]')!.addEventListener('click', () => {
    void panel.advance('remote');
  });
  el.querySelector('[data-im-form]')!.addEventListener('submit', (ev) => {
    ev.preventDefault();
    const text = imInput.value;
    imInput.value = '';
    client.sendIm(peer, text).catch((err: Error) => {
      showToast(doc, `IM to ${peer} failed: ${err.message}`);
    });
  });

  const pollTimer = setInterval(() => void pollState(), statePollMs);
  void pollState();
  connect();
  return panel;
}
