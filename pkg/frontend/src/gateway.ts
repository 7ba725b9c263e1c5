// Thin client for the gateway's JSON endpoints. All mutations go through
// here so error surfacing is uniform.

export class HttpError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export interface PeerState {
  peer: string;
  mode: 'primary' | 'tiled';
  num_cams: number;
  strategy: string;
  primary_ordinal?: number;
}

export interface CameraInfo {
  ordinal: number;
  name: string;
  width: number;
  height: number;
  fps: number;
  format: string;
  warm_up_ms: number;
  latency_ms: number;
}

export type AdvanceTarget = 'local' | 'remote';

async function request(url: string, init?: RequestInit): Promise<unknown> {
  const res = await fetch(url, init);
  if (!res.ok) {
    let detail = res.statusText;
    try {
      const body = (await res.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // non-JSON error body, keep the status text
    }
    throw new HttpError(res.status, `${res.status}: ${detail}`);
  }
  return res.json();
}

export interface GatewayClient {
  base: string;
  peers(): Promise<string[]>;
  state(peer: string): Promise<PeerState>;
  cameras(peer: string): Promise<CameraInfo[]>;
  advance(peer: string, target: AdvanceTarget): Promise<void>;
  sendIm(peer: string, text: string): Promise<void>;
  viewSocketUrl(peer: string): string;
}

export function createClient(base = ''): GatewayClient {
  return {
    base,
    peers: () => request(`${base}/api/peers`) as Promise<string[]>,
    state: (peer) => request(`${base}/api/${peer}/state`) as Promise<PeerState>,
    cameras: (peer) => request(`${base}/api/${peer}/cameras`) as Promise<CameraInfo[]>,
    async advance(peer, target) {
      await request(`${base}/api/${peer}/advance/${target}`, { method: 'POST' });
    },
    async sendIm(peer, text) {
      await request(`${base}/api/${peer}/im`, {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify({ text }),
      });
    },
    viewSocketUrl(peer) {
      const root = base || window.location.origin;
      return `${root.replace(/^http/, 'ws')}/api/${peer}/view`;
    },
  };
}

export function stateLabel(state: PeerState): string {
  return state.mode === 'primary' ? `primary ${state.primary_ordinal}` : 'tiled';
}
