import { configFromEnv, createApp } from './app';

const port = Number(process.env.PORT ?? '8901');
const config = configFromEnv();
const app = createApp(config);

app.listen(port, () => {
  console.log(
    `sidecar listening on :${port} (doc2query=${config.d2qModel}, rerank=${config.rerankModel})`
  );
});
