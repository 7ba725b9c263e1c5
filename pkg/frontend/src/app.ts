// Mounts one panel per gateway peer, side by side, plus the hotkey toggle.
// Enter advances the focused panel's local view, Space its remote view;
// the toggle makes both keys inert without touching the buttons.

import { GatewayClient } from './gateway';
import { Panel, PanelOptions, createPanel } from './panel';

export interface App {
  root: HTMLElement;
  panels: Panel[];
  panel(peer: string): Panel;
  hotkeysEnabled(): boolean;
  dispose(): void;
}

export async function mountApp(
  doc: Document,
  root: HTMLElement,
  client: GatewayClient,
  opts: PanelOptions = {},
): Promise<App> {
  const peers = await client.peers();

  const bar = doc.createElement('header');
  bar.className = 'topbar';
  bar.innerHTML = `
    <h1>mcam</h1>
    <label class="hotkeys">
      <input type="checkbox" data-hotkeys checked>
      Enter/Space switching
    </label>
  `;
  const hotkeys = bar.querySelector('[data-hotkeys]') as HTMLInputElement;

  const row = doc.createElement('main');
  row.className = 'panels';

  root.replaceChildren(bar, row);
  const panels = peers.map((peer) => {
    const p = createPanel(doc, client, peer, opts);
    row.appendChild(p.el);
    return p;
  });

  function onKeydown(ev: KeyboardEvent) {
    if (!hotkeys.checked) return;
    const target = ev.target as HTMLElement | null;
    // keys typed into buttons or the IM box belong to those widgets
    if (target?.closest('button, input, textarea')) return;
    const panel = panels.find((p) => p.el === target || p.el.contains(target as Node));
    if (!panel) return;
    if (ev.key === 'Enter') {
      ev.preventDefault();
      void panel.advance('local');
    } else if (ev.key === ' ') {
      ev.preventDefault();
      void panel.advance('remote');
    }
  }
  doc.addEventListener('keydown', onKeydown);

  return {
    root,
    panels,
    panel(peer) {
      const p = panels.find((x) => x.peer === peer);
      if (!p) throw new Error(`no panel for peer ${peer}`);
      return p;
    },
    hotkeysEnabled: () => hotkeys.checked,
    dispose() {
      doc.removeEventListener('keydown', onKeydown);
      panels.forEach((p) => p.dispose());
    },
  };
}
