// Training-progress model: kappa history with the stop guide line, labeled
// counts, staleness, and the stop banner. The banner mirrors the server's
// stop_recommended, which is sticky server-side (the kappa history is
// append-only), so a later dip never clears an announced stop.

import { StatusReport } from "./api.js";

export const STALE_AFTER_MS = 30_000;

export interface ProgressModel {
  labeled: number;
  remaining: number;
  modelVersion: number;
  kappas: number[];
  banner: boolean;
  stale: boolean;
  coldStart: boolean;
}

export function progressModel(
  status: StatusReport | null,
  fetchedAtMs: number,
  nowMs: number,
): ProgressModel {
  if (status === null) {
    return {
      labeled: 0,
      remaining: 0,
      modelVersion: 0,
      kappas: [],
      banner: false,
      stale: true,
      coldStart: true,
    };
  }
  return {
    labeled: status.labeled,
    remaining: status.remaining,
    modelVersion: status.model_version,
    kappas: status.kappas,
    banner: status.stop_recommended,
    stale: nowMs - fetchedAtMs > STALE_AFTER_MS,
    coldStart: status.model_version === 0,
  };
}

/** Chart-space points for the kappa history, y scaled to [0, 1]. */
export function kappaChartPoints(
  kappas: number[],
  width: number,
  height: number,
): { x: number; y: number }[] {
  return kappas.map((kappa, index) => ({
    x: (index / Math.max(1, kappas.length - 1)) * width,
    y: height - Math.max(0, Math.min(1, kappa)) * height,
  }));
}

export function drawKappaChart(
  canvas: HTMLCanvasElement,
  kappas: number[],
  guideline = 0.99,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const guideY = canvas.height - guideline * canvas.height;
  ctx.strokeStyle = "#c0392b";
  ctx.setLineDash([4, 4]);
  ctx.beginPath();
  ctx.moveTo(0, guideY);
  ctx.lineTo(canvas.width, guideY);
  ctx.stroke();
  ctx.setLineDash([]);
  ctx.strokeStyle = "#2b8a3e";
  ctx.beginPath();
  kappaChartPoints(kappas, canvas.width, canvas.height).forEach((point, index) => {
    if (index === 0) ctx.moveTo(point.x, point.y);
    else ctx.lineTo(point.x, point.y);
  });
  ctx.stroke();
}
