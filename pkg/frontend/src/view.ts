import type { TriageApi } from './api.js';
import { renderMap } from './map.js';
import type { QueueController, QueueSnapshot } from './queue.js';
import { CLASS_NAMES } from './types.js';

type OverlayKind = 'none' | 'hog' | 'hough' | 'salience';

/** DOM renderer: one detail pane driven by queue snapshots. */
export class QueueView {
  private overlay: OverlayKind = 'none';
  private overlayCache = new Map<string, { hog_png: string; hough_png: string; salience_png: string | null }>();

  constructor(
    private readonly root: HTMLElement,
    private readonly controller: QueueController,
    private readonly api: TriageApi,
  ) {
    controller.onChange((snap) => this.render(snap));
  }

  attachKeyboard(target: { addEventListener: HTMLElement['addEventListener'] }): void {
    target.addEventListener('keydown', (ev) => {
      const e = ev as KeyboardEvent;
      if (e.key.toLowerCase() === 'h') {
        this.cycleOverlay();
        this.render(this.controller.snapshot());
        return;
      }
      void this.controller.handleKey(e.key);
    });
  }

  private cycleOverlay(): void {
    const order: OverlayKind[] = ['none', 'hog', 'hough', 'salience'];
    this.overlay = order[(order.indexOf(this.overlay) + 1) % order.length]!;
  }

  render(snap: QueueSnapshot): void {
    this.root.textContent = '';
    if (snap.status === 'loading') {
      this.root.append(el('div', 'banner', 'loading queue...'));
      return;
    }
    if (snap.status === 'unreachable') {
      const banner = el('div', 'banner banner-error', 'service unreachable - nothing was lost; ');
      const retry = el('button', 'retry', 'retry') as HTMLButtonElement;
      retry.addEventListener('click', () => void this.controller.load());
      banner.append(retry);
      this.root.append(banner);
      return;
    }
    if (!snap.current) {
      this.root.append(el('div', 'banner banner-clear', 'queue clear - no flagged items pending'));
      return;
    }

    const item = snap.current;
    const header = el('div', 'header');
    header.append(
      el('span', 'position', `${snap.position} / ${snap.total}`),
      el('span', 'sample-id', item.id),
    );

    const image = document.createElement('img');
    image.className = 'sample-image';
    image.alt = item.id;
    image.src = this.imageSource(item.id, item.image_url);

    const bars = el('div', 'confidences');
    item.confidences.forEach((c, cls) => {
      const row = el('div', 'confidence-row');
      const fill = el('div', 'confidence-fill');
      fill.style.width = `${Math.round(c * 100)}%`;
      fill.dataset.cls = String(cls);
      const bar = el('div', 'confidence-bar');
      bar.append(fill);
      row.append(el('span', 'confidence-label', `${CLASS_NAMES[cls]} ${(c * 100).toFixed(1)}%`), bar);
      bars.append(row);
    });

    const tally = el('div', 'votes', `votes: ${summarizeVotes(item.votes)}`);
    const mapBox = el('div', 'map-box');
    renderMap(mapBox, item.lat, item.lon);

    const controls = el(
      'div',
      'controls',
      'keys: C confirm - R reject - 0/1/2 relabel - H overlay',
    );
    const buttons = el('div', 'buttons');
    for (const [label, verdict, newLabel] of [
      ['confirm (C)', 'confirm', undefined],
      ['reject (R)', 'reject', undefined],
      ['no utility (0)', 'relabel', 0],
      ['utility (1)', 'relabel', 1],
      ['vegetation (2)', 'relabel', 2],
    ] as const) {
      const btn = el('button', 'verdict', label) as HTMLButtonElement;
      btn.disabled = snap.inFlight;
      btn.addEventListener('click', () => void this.controller.submit(verdict, newLabel));
      buttons.append(btn);
    }

    this.root.append(header, image, el('div', 'overlay-state', `overlay: ${this.overlay}`), bars, tally, mapBox, controls, buttons);
    if (snap.toast) this.root.append(el('div', 'toast', snap.toast));
  }

  private imageSource(id: string, fallback: string): string {
    if (this.overlay === 'none') return fallback;
    const cached = this.overlayCache.get(id);
    if (!cached) {
      void this.api.overlays(id).then((paths) => {
        this.overlayCache.set(id, paths);
        this.render(this.controller.snapshot());
      });
      return fallback;
    }
    const src = this.overlay === 'hog' ? cached.hog_png : this.overlay === 'hough' ? cached.hough_png : cached.salience_png;
    return src ?? fallback;
  }
}

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text) node.textContent = text;
  return node;
}

function summarizeVotes(votes: number[]): string {
  if (!votes.length) return 'n/a';
  const counts = [0, 0, 0];
  for (const v of votes) counts[v] = (counts[v] ?? 0) + 1;
  return counts.map((n, cls) => `${cls}:${n}`).join('  ');
}
