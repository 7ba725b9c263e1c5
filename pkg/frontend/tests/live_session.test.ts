// Full-stack check against a real gateway process: the two panels drive a
// live session end to end, including the timing budget for a remote
// advance. Needs the Python package installed (pip install -e ..).

import { ChildProcess, spawn } from 'node:child_process';
import { mkdtempSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { afterAll, beforeAll, describe, expect, it, vi } from 'vitest';

import { App, mountApp } from '../src/app';
import { createClient } from '../src/gateway';
import { Raster } from '../src/panel';

const PORT = 8741;
const BASE = `http://127.0.0.1:${PORT}`;
const STREAM_FPS = 10;
const LINK_MS = 25;

// 320x240 sources on a 240-tall canvas fill it exactly, so the provenance
// marker of the displayed primary camera lands at canvas pixel (0,0).
const SESSION_YAML = `
clock: virtual
seed: 5
link: {a_to_b_ms: ${LINK_MS}, b_to_a_ms: ${LINK_MS}}
peers:
  A:
    target_height: 240
    cameras:
      - {name: a1, capabilities: [{width: 320, height: 240, fps: 30}]}
      - {name: a2, capabilities: [{width: 320, height: 240, fps: 30}]}
  B:
    target_height: 240
    cameras:
      - {name: b1, capabilities: [{width: 320, height: 240, fps: 30}]}
      - {name: b2, capabilities: [{width: 320, height: 240, fps: 30}]}
      - {name: b3, capabilities: [{width: 320, height: 240, fps: 30}]}
`;

const sleep = (ms: number) => new Promise((r) => setTimeout(r, ms));

async function waitUntil(pred: () => boolean, budgetMs: number): Promise<number> {
  const start = performance.now();
  while (!pred()) {
    if (performance.now() - start > budgetMs) break;
    await sleep(5);
  }
  return performance.now() - start;
}

describe('live session through the gateway', () => {
  let proc: ChildProcess;
  let procLog = '';
  let app: App;
  const recorder: Raster = { draw() {} };

  const badge = (peer: string) =>
    app.panel(peer).el.querySelector('[data-badge]')!.textContent;
  const conn = (peer: string) =>
    (app.panel(peer).el.querySelector('[data-conn]') as HTMLElement).textContent;
  const click = (peer: string, selector: string) =>
    (app.panel(peer).el.querySelector(selector) as HTMLElement).click();

  beforeAll(async () => {
    const dir = mkdtempSync(join(tmpdir(), 'mcam-ui-'));
    const cfg = join(dir, 'session.yaml');
    writeFileSync(cfg, SESSION_YAML);
    proc = spawn('python3', [
      '-m', 'mcam.cli', 'serve',
      '--config', cfg,
      '--bind', `127.0.0.1:${PORT}`,
      '--stream-fps', String(STREAM_FPS),
    ]);
    proc.stdout?.on('data', (d) => { procLog += d; });
    proc.stderr?.on('data', (d) => { procLog += d; });

    const deadline = Date.now() + 20_000;
    for (;;) {
      try {
        const res = await fetch(`${BASE}/api/peers`);
        if (res.ok) break;
      } catch {
        // not up yet
      }
      if (Date.now() > deadline) {
        throw new Error(`gateway did not come up:\n${procLog}`);
      }
      await sleep(100);
    }

    app = await mountApp(document, document.body, createClient(BASE), {
      statePollMs: 25,
      retryMs: 200,
      makeRaster: () => recorder,
    });
  });

  afterAll(async () => {
    app?.dispose();
    if (proc && proc.exitCode === null) {
      proc.kill('SIGTERM');
      await new Promise((r) => proc.on('exit', r));
    }
  });

  it('connects both panels and shows their initial primary view', async () => {
    await vi.waitFor(
      () => {
        expect(conn('A')).toBe('live');
        expect(conn('B')).toBe('live');
        expect(badge('A')).toBe('primary 1');
        expect(badge('B')).toBe('primary 1');
        expect(app.panel('B').lastFrame).not.toBeNull();
      },
      { timeout: 10_000 },
    );
    const px = app.panel('B').readPixel(0, 0);
    expect(px.r).toBe(1);
    expect(px.b).toBe(255);
  });

  it('advance remote on panel A reaches panel B within the link delay plus two stream frames', async () => {
    const b = app.panel('B');
    expect(badge('B')).toBe('primary 1');

    const start = performance.now();
    click('A', '[data-advance-remote]');
    await waitUntil(
      () => badge('B') === 'primary 2' && b.readPixel(0, 0).r === 2,
      5_000,
    );
    const elapsed = performance.now() - start;

    expect(badge('B')).toBe('primary 2');
    expect(b.readPixel(0, 0).r).toBe(2);
    expect(elapsed).toBeLessThanOrEqual(LINK_MS + 2 * (1000 / STREAM_FPS));
  });

  it('Space on the focused panel advances the far peer', async () => {
    app.panel('A').el.focus();
    app.panel('A').el.dispatchEvent(
      new KeyboardEvent('keydown', { key: ' ', bubbles: true }),
    );
    await waitUntil(
      () => badge('B') === 'primary 3' && app.panel('B').readPixel(0, 0).r === 3,
      5_000,
    );
    expect(badge('B')).toBe('primary 3');
    expect(app.panel('B').readPixel(0, 0).r).toBe(3);
  });

  it('Enter on the focused panel advances its own view', async () => {
    app.panel('A').el.focus();
    app.panel('A').el.dispatchEvent(
      new KeyboardEvent('keydown', { key: 'Enter', bubbles: true }),
    );
    await waitUntil(() => badge('A') === 'primary 2', 5_000);
    expect(badge('A')).toBe('primary 2');
  });

  it('an IM from panel A advances panel B into tiled mode', async () => {
    const input = app.panel('A').el.querySelector('[data-im]') as HTMLInputElement;
    input.value = 'next camera please';
    app.panel('A').el.querySelector('[data-im-form]')!.dispatchEvent(
      new Event('submit', { bubbles: true, cancelable: true }),
    );
    await waitUntil(() => badge('B') === 'tiled', 5_000);
    expect(badge('B')).toBe('tiled');
  });
});
