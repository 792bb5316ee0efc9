import { z } from 'zod';

export const MAX_DOCS_PER_REQUEST = 1000;
export const MAX_BODY_BYTES = 2 * 1024 * 1024;

export const d2qRequestSchema = z.object({
  text: z.string().min(1),
  n: z.number().int().min(1).max(20),
});

export const d2qResponseSchema = z.object({
  queries: z.array(z.string().min(1)),
  model: z.string(),
});

export const rerankRequestSchema = z.object({
  query: z.string(),
  docs: z.array(
    z.object({
      id: z.string(),
      text: z.string(),
    })
  ),
});

export const rerankResponseSchema = z.object({
  scores: z.array(z.number().finite()),
});

export const healthResponseSchema = z.object({
  ready: z.boolean(),
  models: z.object({
    doc2query: z.string(),
    rerank: z.string(),
  }),
});

export type D2QRequest = z.infer<typeof d2qRequestSchema>;
export type D2QResponse = z.infer<typeof d2qResponseSchema>;
export type RerankRequest = z.infer<typeof rerankRequestSchema>;
export type RerankResponse = z.infer<typeof rerankResponseSchema>;
