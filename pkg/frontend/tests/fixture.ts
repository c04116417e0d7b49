import type { FlaggedItem, ReviewStatus } from '../src/types.js';

/**
 * Stateful in-memory stand-in for the triage service: the same REST
 * semantics (pending filter, latest-wins verdicts) behind a fetch-shaped
 * function, so tests drive the real client code end to end.
 */
export class FixtureService {
  items: FlaggedItem[] = [];
  posts: Array<Record<string, unknown>> = [];
  offline = false;

  constructor(nFlagged = 13) {
    for (let i = 0; i < nFlagged; i++) {
      const conf2 = 0.9 - 0.01 * i;
      this.items.push({
        id: `s${String(i).padStart(3, '0')}`,
        lat: 37 + i * 0.001,
        lon: -122,
        image_url: `/api/samples/s${String(i).padStart(3, '0')}/image`,
        predicted: 2,
        confidences: [0.05, 0.95 - conf2, conf2],
        votes: [2, 2, 2],
        status: 'pending',
        new_label: null,
      });
    }
  }

  fetch = async (url: string | URL | Request, init?: RequestInit): Promise<Response> => {
    if (this.offline) throw new TypeError('fetch failed');
    const target = typeof url === 'string' ? url : url instanceof URL ? url.toString() : url.url;
    const parsed = new URL(target, 'http://fixture');

    if (parsed.pathname === '/api/flagged') {
      const status = parsed.searchParams.get('status');
      const limit = Number(parsed.searchParams.get('limit') ?? 50);
      const offset = Number(parsed.searchParams.get('offset') ?? 0);
      let rows = [...this.items].sort((a, b) => b.confidences[2] - a.confidences[2] || a.id.localeCompare(b.id));
      if (status) rows = rows.filter((r) => r.status === status);
      return json({ items: rows.slice(offset, offset + limit), total: rows.length });
    }

    if (parsed.pathname === '/api/reviews' && init?.method === 'POST') {
      const body = JSON.parse(String(init.body)) as Record<string, unknown>;
      this.posts.push(body);
      const item = this.items.find((r) => r.id === body.sample_id);
      if (!item) return json({ detail: 'unknown sample' }, 404);
      const verdict = body.verdict as string;
      const statusOf: Record<string, ReviewStatus> = { confirm: 'confirmed', reject: 'rejected', relabel: 'relabeled' };
      if (!(verdict in statusOf)) return json({ detail: 'bad verdict' }, 400);
      if (verdict === 'relabel' && ![0, 1, 2].includes(body.new_label as number)) {
        return json({ detail: 'relabel requires new_label' }, 400);
      }
      item.status = statusOf[verdict]!;
      item.new_label = verdict === 'relabel' ? (body.new_label as number) : null;
      return json(item);
    }

    if (/^\/api\/samples\/[^/]+\/overlays$/.test(parsed.pathname)) {
      const id = parsed.pathname.split('/')[3];
      return json({ hog_png: `/overlays/${id}_hog.png`, hough_png: `/overlays/${id}_hough.png`, salience_png: null });
    }

    return json({ detail: 'not found' }, 404);
  };
}

function json(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}
