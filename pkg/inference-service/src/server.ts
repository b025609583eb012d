import { EngineSlot, createApp } from "./app";
import { loadConfig } from "./config";
import { HeuristicEngine } from "./heuristic";

const config = loadConfig();
const slot: EngineSlot = { engine: null };
const app = createApp(slot, config);

const server = app.listen(config.port, () => {
  if (config.samCheckpoint || config.gdinoCheckpoint) {
    console.warn(
      "checkpoint env vars are set (SF_SAM_CKPT/SF_GDINO_CKPT) but this build " +
        "bundles no model runtime; serving the built-in classical engine. " +
        "Plug a model runtime in behind the Engine interface to use them.",
    );
  }
  slot.engine = new HeuristicEngine();
  console.log(
    `inference service on :${config.port} (device=${config.device}, ` +
      `detector=${slot.engine.detectorId}, segmenter=${slot.engine.segmenterId})`,
  );
});

process.on("SIGTERM", () => server.close());
process.on("SIGINT", () => server.close());
