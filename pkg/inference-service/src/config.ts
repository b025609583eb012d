export interface ServiceConfig {
  port: number;
  device: string;
  samCheckpoint: string;
  gdinoCheckpoint: string;
  maxImageSide: number;
  bodyLimit: string;
}

export function loadConfig(env: NodeJS.ProcessEnv = process.env): ServiceConfig {
  return {
    port: intFrom(env.SF_PORT, 8788),
    device: env.SF_DEVICE ?? "cpu",
    samCheckpoint: env.SF_SAM_CKPT ?? "",
    gdinoCheckpoint: env.SF_GDINO_CKPT ?? "",
    maxImageSide: intFrom(env.SF_MAX_SIDE, 4096),
    bodyLimit: env.SF_BODY_LIMIT ?? "64mb",
  };
}

function intFrom(raw: string | undefined, fallback: number): number {
  if (!raw) return fallback;
  const v = Number.parseInt(raw, 10);
  if (!Number.isFinite(v) || v <= 0) {
    throw new Error(`bad integer in environment: ${raw}`);
  }
  return v;
}
