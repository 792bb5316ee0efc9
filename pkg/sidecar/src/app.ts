import express, { Express, NextFunction, Request, Response } from 'express';

import {
  MAX_BODY_BYTES,
  MAX_DOCS_PER_REQUEST,
  d2qRequestSchema,
  rerankRequestSchema,
} from './schemas';
import { crossScore } from './scoring';
import { generateQuestions } from './questions';

export interface AppConfig {
  d2qModel: string;
  rerankModel: string;
  seed: number;
  /** simulated model warmup; deterministic backends default to 0 */
  warmupMs?: number;
}

export function configFromEnv(): AppConfig {
  return {
    d2qModel: process.env.D2Q_MODEL ?? 'deterministic-template-d2q-v1',
    rerankModel: process.env.RERANK_MODEL ?? 'deterministic-lexical-cross-scorer-v1',
    seed: Number(process.env.SIDECAR_SEED ?? '0') >>> 0,
  };
}

export function createApp(config: AppConfig): Express {
  const app = express();
  app.use(express.json({ limit: MAX_BODY_BYTES }));

  // clients must treat non-ready as retryable; with the deterministic
  // backends readiness is immediate unless a warmup is configured
  const readyAt = Date.now() + (config.warmupMs ?? 0);
  const isReady = () => Date.now() >= readyAt;

  app.get('/health', (_req: Request, res: Response) => {
    res.status(isReady() ? 200 : 503).json({
      ready: isReady(),
      models: { doc2query: config.d2qModel, rerank: config.rerankModel },
    });
  });

  app.post('/doc2query', (req: Request, res: Response) => {
    if (!isReady()) return res.status(503).json({ error: 'model loading' });
    const parsed = d2qRequestSchema.safeParse(req.body);
    if (!parsed.success) {
      return res.status(400).json({ error: parsed.error.issues[0]?.message ?? 'bad request' });
    }
    const { text, n } = parsed.data;
    const queries = generateQuestions(text, n, config.seed).filter((q) => q.length > 0);
    return res.json({ queries: queries.slice(0, n), model: config.d2qModel });
  });

  app.post('/rerank', (req: Request, res: Response) => {
    if (!isReady()) return res.status(503).json({ error: 'model loading' });
    const parsed = rerankRequestSchema.safeParse(req.body);
    if (!parsed.success) {
      return res.status(400).json({ error: parsed.error.issues[0]?.message ?? 'bad request' });
    }
    const { query, docs } = parsed.data;
    if (docs.length > MAX_DOCS_PER_REQUEST) {
      return res.status(413).json({ error: `at most ${MAX_DOCS_PER_REQUEST} docs per request` });
    }
    const scores = docs.map((d) => crossScore(query, d.text));
    return res.json({ scores });
  });

  // body-parser rejects oversized payloads; surface them as 413
  app.use((err: Error & { type?: string }, _req: Request, res: Response, next: NextFunction) => {
    if (err.type === 'entity.too.large') {
      return res.status(413).json({ error: 'payload too large' });
    }
    if (err.type === 'entity.parse.failed') {
      return res.status(400).json({ error: 'invalid JSON body' });
    }
    return next(err);
  });

  return app;
}
