/**
 * Deterministic lexical cross-scorer used as the rerank backend.
 *
 * Stands in for the pinned neural cross-encoder (config `RERANK_MODEL`)
 * in environments where checkpoint downloads are unavailable: scores are
 * a pure function of (query, document text), so duplicate texts always
 * receive equal scores and runs are reproducible.
 */

const TOKEN = /[\p{L}\p{N}]+/gu;

export function tokenize(text: string): string[] {
  return (text.toLowerCase().match(TOKEN) ?? []) as string[];
}

function termWeight(term: string): number {
  // longer terms are rarer in natural text; log keeps weights bounded
  return Math.log(1 + term.length);
}

export function crossScore(query: string, docText: string): number {
  const queryTerms = new Set(tokenize(query));
  if (queryTerms.size === 0) return 0;
  const tf = new Map<string, number>();
  for (const t of tokenize(docText)) {
    tf.set(t, (tf.get(t) ?? 0) + 1);
  }
  let score = 0;
  for (const t of queryTerms) {
    const f = tf.get(t) ?? 0;
    if (f > 0) {
      score += termWeight(t) * (f / (f + 1));
    }
  }
  // mild length normalization so padding cannot inflate scores
  const len = Math.max(1, tf.size);
  return score / Math.log(8 + len);
}
