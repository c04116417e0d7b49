import { ApiError, TriageApi } from './api.js';
import type { FlaggedItem, ReviewVerdict, ReviewStatus } from './types.js';

export type QueueStatus = 'loading' | 'ready' | 'unreachable';

export interface QueueSnapshot {
  status: QueueStatus;
  current: FlaggedItem | null;
  position: number; // 1-based among remaining pending items
  total: number; // pending items at load time
  inFlight: boolean;
  toast: string | null;
}

const KEY_VERDICTS: Record<string, Partial<ReviewVerdict>> = {
  c: { verdict: 'confirm' },
  r: { verdict: 'reject' },
  '0': { verdict: 'relabel', new_label: 0 },
  '1': { verdict: 'relabel', new_label: 1 },
  '2': { verdict: 'relabel', new_label: 2 },
};

const STATUS_OF: Record<ReviewVerdict['verdict'], ReviewStatus> = {
  confirm: 'confirmed',
  reject: 'rejected',
  relabel: 'relabeled',
};

/**
 * Review-queue state machine.  All durable state lives in the service; this
 * controller only tracks the cursor, one in-flight request, and transient
 * error banners, so a page reload rebuilds the same view from the API alone.
 */
export class QueueController {
  private items: FlaggedItem[] = [];
  private cursor = 0;
  private status: QueueStatus = 'loading';
  private inFlight = false;
  private toast: string | null = null;
  private listeners: Array<(snap: QueueSnapshot) => void> = [];

  constructor(private readonly api: TriageApi) {}

  onChange(listener: (snap: QueueSnapshot) => void): void {
    this.listeners.push(listener);
  }

  private emit(): void {
    const snap = this.snapshot();
    for (const fn of this.listeners) fn(snap);
  }

  snapshot(): QueueSnapshot {
    return {
      status: this.status,
      current: this.current(),
      position: this.items.length ? this.cursor + 1 : 0,
      total: this.items.length,
      inFlight: this.inFlight,
      toast: this.toast,
    };
  }

  current(): FlaggedItem | null {
    return this.items[this.cursor] ?? null;
  }

  /** Pull the pending queue from the service; safe to call again to retry. */
  async load(): Promise<void> {
    this.status = 'loading';
    this.toast = null;
    this.emit();
    try {
      const page = await this.api.listFlagged(500, 0, 'pending');
      this.items = page.items;
      this.cursor = 0;
      this.status = 'ready';
    } catch {
      this.status = 'unreachable';
    }
    this.emit();
  }

  /** Map a pressed key to a verdict; unknown keys are ignored. */
  async handleKey(key: string): Promise<void> {
    const partial = KEY_VERDICTS[key.toLowerCase()];
    if (!partial) return;
    await this.submit(partial.verdict!, partial.new_label);
  }

  async submit(verdict: ReviewVerdict['verdict'], newLabel?: number): Promise<void> {
    const item = this.current();
    if (!item || this.inFlight) return;

    const body: ReviewVerdict = { sample_id: item.id, verdict };
    if (verdict === 'relabel') body.new_label = newLabel;

    // optimistic: show the verdict immediately, roll back if the POST fails
    const before: { status: ReviewStatus; new_label: number | null } = {
      status: item.status,
      new_label: item.new_label,
    };
    item.status = STATUS_OF[verdict];
    item.new_label = verdict === 'relabel' ? (newLabel ?? null) : null;
    this.inFlight = true;
    this.toast = null;
    this.emit();

    try {
      await this.api.submitReview(body);
      this.items.splice(this.cursor, 1); // reviewed items leave the pending queue
      if (this.cursor >= this.items.length) this.cursor = Math.max(this.items.length - 1, 0);
    } catch (err) {
      item.status = before.status;
      item.new_label = before.new_label;
      this.toast = err instanceof ApiError ? `rejected by service: ${err.message}` : 'network failure; item kept, retry when online';
    } finally {
      this.inFlight = false;
      this.emit();
    }
  }
}
