/**
 * Deterministic question generator used as the doc2query backend.
 *
 * Stands in for the pinned seq2seq checkpoint (config `D2Q_MODEL`):
 * salient document terms fill question templates, with template choice
 * driven by a service-side seed plus a text hash, so a fixed seed yields
 * reproducible outputs per document.
 */

import { tokenize } from './scoring';

const TEMPLATES = [
  (a: string, b: string) => `what is ${a} ${b}`,
  (a: string, b: string) => `how does ${a} relate to ${b}`,
  (a: string, b: string) => `why is ${a} important for ${b}`,
  (a: string, b: string) => `where is ${a} ${b} used`,
  (a: string, b: string) => `when did ${a} ${b} start`,
  (a: string, b: string) => `which ${a} affects ${b}`,
];

function fnv1a(text: string): number {
  let h = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    h ^= text.charCodeAt(i);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function salientTerms(text: string, k: number): string[] {
  const tf = new Map<string, number>();
  const order: string[] = [];
  for (const t of tokenize(text)) {
    if (!tf.has(t)) order.push(t);
    tf.set(t, (tf.get(t) ?? 0) + 1);
  }
  // tf * length as a salience proxy; stable sort keeps first-seen order on ties
  return order
    .map((t) => ({ t, s: (tf.get(t) ?? 0) * Math.log(1 + t.length) }))
    .sort((x, y) => y.s - x.s)
    .slice(0, k)
    .map((x) => x.t);
}

export function generateQuestions(text: string, n: number, seed: number): string[] {
  const terms = salientTerms(text, Math.max(2, n + 1));
  if (terms.length === 0) return [];
  const rand = mulberry32((seed ^ fnv1a(text)) >>> 0);
  const out: string[] = [];
  const seen = new Set<string>();
  let guard = 0;
  while (out.length < n && guard++ < n * 10) {
    const template = TEMPLATES[Math.floor(rand() * TEMPLATES.length)];
    const a = terms[Math.floor(rand() * terms.length)];
    const b = terms[Math.floor(rand() * terms.length)];
    const q = template(a, b === a ? terms[(terms.indexOf(a) + 1) % terms.length] : b);
    if (!seen.has(q)) {
      seen.add(q);
      out.push(q);
    }
  }
  return out;
}
