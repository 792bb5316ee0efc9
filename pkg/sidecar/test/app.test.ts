import { AddressInfo } from 'node:net';
import { Server } from 'node:http';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { createApp } from '../src/app';
import {
  d2qResponseSchema,
  healthResponseSchema,
  rerankResponseSchema,
} from '../src/schemas';
import { crossScore } from '../src/scoring';
import { generateQuestions } from '../src/questions';

let server: Server;
let base: string;

beforeAll(async () => {
  const app = createApp({ d2qModel: 'test-d2q', rerankModel: 'test-rerank', seed: 42 });
  await new Promise<void>((resolve) => {
    server = app.listen(0, () => resolve());
  });
  base = `http://127.0.0.1:${(server.address() as AddressInfo).port}`;
});

afterAll(() => {
  server.close();
});

async function post(path: string, body: unknown): Promise<Response> {
  return fetch(`${base}${path}`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify(body),
  });
}

describe('/health', () => {
  it('reports readiness and pinned model names', async () => {
    const res = await fetch(`${base}/health`);
    expect(res.status).toBe(200);
    const parsed = healthResponseSchema.parse(await res.json());
    expect(parsed.ready).toBe(true);
    expect(parsed.models.doc2query).toBe('test-d2q');
  });

  it('returns 503 while warming up', async () => {
    const warm = createApp({
      d2qModel: 'm',
      rerankModel: 'm',
      seed: 0,
      warmupMs: 60_000,
    });
    const warmServer: Server = await new Promise((resolve) => {
      const s = warm.listen(0, () => resolve(s));
    });
    const port = (warmServer.address() as AddressInfo).port;
    const res = await fetch(`http://127.0.0.1:${port}/health`);
    expect(res.status).toBe(503);
    const d2q = await fetch(`http://127.0.0.1:${port}/doc2query`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ text: 'x', n: 1 }),
    });
    expect(d2q.status).toBe(503);
    warmServer.close();
  });
});

describe('/doc2query', () => {
  it('round-trips the schema and respects n', async () => {
    const res = await post('/doc2query', { text: 'solar rooftop panels on city roofs', n: 5 });
    expect(res.status).toBe(200);
    const parsed = d2qResponseSchema.parse(await res.json());
    expect(parsed.queries.length).toBeGreaterThanOrEqual(1);
    expect(parsed.queries.length).toBeLessThanOrEqual(5);
    expect(parsed.queries.every((q) => q.length > 0)).toBe(true);
    expect(parsed.model).toBe('test-d2q');
  });

  it('n=1 yields exactly one non-empty string', async () => {
    const res = await post('/doc2query', { text: 'battery recycling plant', n: 1 });
    const parsed = d2qResponseSchema.parse(await res.json());
    expect(parsed.queries).toHaveLength(1);
    expect(parsed.queries[0]).not.toBe('');
  });

  it('rejects empty text with 400', async () => {
    const res = await post('/doc2query', { text: '', n: 3 });
    expect(res.status).toBe(400);
  });

  it('rejects out-of-range n with 400', async () => {
    expect((await post('/doc2query', { text: 'x', n: 0 })).status).toBe(400);
    expect((await post('/doc2query', { text: 'x', n: 21 })).status).toBe(400);
    expect((await post('/doc2query', { text: 'x', n: 2.5 })).status).toBe(400);
  });

  it('is deterministic for a fixed seed', async () => {
    const a = await (await post('/doc2query', { text: 'wind turbine blades', n: 4 })).json();
    const b = await (await post('/doc2query', { text: 'wind turbine blades', n: 4 })).json();
    expect(a).toEqual(b);
  });
});

describe('/rerank', () => {
  it('aligns scores with docs positionally', async () => {
    const docs = Array.from({ length: 17 }, (_, i) => ({
      id: `d${i}`,
      text: i % 3 === 0 ? 'grid storage systems' : 'unrelated pottery notes',
    }));
    const res = await post('/rerank', { query: 'grid storage', docs });
    expect(res.status).toBe(200);
    const parsed = rerankResponseSchema.parse(await res.json());
    expect(parsed.scores).toHaveLength(docs.length);
    expect(parsed.scores.every(Number.isFinite)).toBe(true);
  });

  it('returns empty scores for zero docs', async () => {
    const res = await post('/rerank', { query: 'q', docs: [] });
    const parsed = rerankResponseSchema.parse(await res.json());
    expect(parsed.scores).toEqual([]);
  });

  it('gives duplicate texts equal scores', async () => {
    const res = await post('/rerank', {
      query: 'carbon capture',
      docs: [
        { id: 'a', text: 'carbon capture pilot plant' },
        { id: 'b', text: 'carbon capture pilot plant' },
      ],
    });
    const { scores } = rerankResponseSchema.parse(await res.json());
    expect(scores[0]).toBe(scores[1]);
  });

  it('scores an on-topic pair above an off-topic pair', async () => {
    const res = await post('/rerank', {
      query: 'battery recycling facility',
      docs: [
        { id: 'on', text: 'a new battery recycling facility opened this year' },
        { id: 'off', text: 'museum hosts a pottery exhibition downtown' },
      ],
    });
    const { scores } = rerankResponseSchema.parse(await res.json());
    expect(scores[0]).toBeGreaterThan(scores[1]);
  });

  it('rejects schema violations with 400', async () => {
    expect((await post('/rerank', { query: 'q' })).status).toBe(400);
    expect((await post('/rerank', { query: 'q', docs: [{ id: 1, text: 'x' }] })).status).toBe(400);
  });

  it('rejects oversized doc lists with 413', async () => {
    const docs = Array.from({ length: 1001 }, (_, i) => ({ id: `d${i}`, text: 'x' }));
    const res = await post('/rerank', { query: 'q', docs });
    expect(res.status).toBe(413);
  });

  it('rejects oversized payloads with 413', async () => {
    const docs = [{ id: 'big', text: 'y'.repeat(3 * 1024 * 1024) }];
    const res = await post('/rerank', { query: 'q', docs });
    expect(res.status).toBe(413);
  });
});

describe('backends', () => {
  it('question generation is a pure function of (text, n, seed)', () => {
    const a = generateQuestions('solar rooftop output growth', 5, 7);
    const b = generateQuestions('solar rooftop output growth', 5, 7);
    const c = generateQuestions('solar rooftop output growth', 5, 8);
    expect(a).toEqual(b);
    expect(a).not.toEqual(c);
    expect(new Set(a).size).toBe(a.length);
  });

  it('cross score grows with query-term coverage', () => {
    const q = 'solar rooftop capacity';
    const none = crossScore(q, 'pottery class schedule');
    const one = crossScore(q, 'rooftop garden plans');
    const all = crossScore(q, 'solar rooftop capacity report');
    expect(none).toBe(0);
    expect(one).toBeGreaterThan(none);
    expect(all).toBeGreaterThan(one);
  });

  it('matches the recorded golden fixture for the pinned seed', async () => {
    const golden = await import('./golden_doc2query.json');
    const queries = generateQuestions(golden.text, golden.n, golden.seed);
    expect(queries).toEqual(golden.queries);
  });
});
