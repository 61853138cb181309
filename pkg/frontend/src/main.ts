// DOM wiring for the annotation console: keyboard-first labeling, a polled
// progress panel with the stop banner, and the threshold explorer.

import { ApiClient, StatusReport } from "./api.js";
import { AnnotationConsole } from "./console.js";
import { drawKappaChart, progressModel } from "./progress.js";
import {
  ThresholdModel,
  formatRow,
  initialThresholdModel,
  selectIndex,
  selectedRow,
  sliderDisabled,
} from "./threshold.js";

const POLL_MS = 5_000;

const api = new ApiClient("");
const annotator = `console-${Math.random().toString(36).slice(2, 8)}`;
const konsole = new AnnotationConsole(api, annotator, 10);

const el = (id: string) => document.getElementById(id)!;
const tweetText = el("tweet-text");
const queueInfo = el("queue-info");
const errorBox = el("error-box");
const retryButton = el("retry-button") as HTMLButtonElement;
const banner = el("stop-banner");
const progressInfo = el("progress-info");
const chart = el("kappa-chart") as HTMLCanvasElement;
const slider = el("threshold-slider") as HTMLInputElement;
const thresholdInfo = el("threshold-info");

let lastStatus: StatusReport | null = null;
let lastStatusAt = 0;
let thresholdModel: ThresholdModel = initialThresholdModel(null);

function renderConsole(): void {
  const snap = konsole.snapshot();
  if (snap.current) {
    tweetText.textContent = snap.current.text;
  } else {
    tweetText.textContent = snap.exhausted ? "Pool exhausted — nothing left to label." : "Loading…";
  }
  queueInfo.textContent =
    `queued ${snap.queueDepth} · submitted ${snap.submitted} · ` +
    `server total ${snap.labeledCount}` + (snap.inFlight ? " · saving…" : "");
  errorBox.textContent = snap.lastError ?? "";
  retryButton.style.display = snap.retry ? "inline-block" : "none";
}

function renderProgress(): void {
  const model = progressModel(lastStatus, lastStatusAt, Date.now());
  banner.style.display = model.banner ? "block" : "none";
  progressInfo.textContent = model.coldStart
    ? "cold start: no model trained yet"
    : `labeled ${model.labeled} · remaining ${model.remaining} · model v${model.modelVersion}` +
      (model.stale ? " · status stale" : "");
  drawKappaChart(chart, model.kappas);
}

function renderThreshold(): void {
  slider.disabled = sliderDisabled(thresholdModel);
  if (thresholdModel.rows) {
    slider.max = String(thresholdModel.rows.length - 1);
    slider.value = String(thresholdModel.index);
  }
  thresholdInfo.textContent = formatRow(selectedRow(thresholdModel));
}

async function act(choice: 0 | 1 | "skip"): Promise<void> {
  await konsole.choose(choice);
  renderConsole();
}

document.addEventListener("keydown", (event) => {
  if (event.key === "1") void act(1);
  else if (event.key === "0") void act(0);
  else if (event.key === " ") {
    event.preventDefault();
    void act("skip");
  }
});
el("relevant-button").addEventListener("click", () => void act(1));
el("irrelevant-button").addEventListener("click", () => void act(0));
el("skip-button").addEventListener("click", () => void act("skip"));
retryButton.addEventListener("click", () => void konsole.retry().then(renderConsole));
slider.addEventListener("input", () => {
  thresholdModel = selectIndex(thresholdModel, Number(slider.value));
  renderThreshold();
});

async function pollStatus(): Promise<void> {
  try {
    lastStatus = await api.status();
    lastStatusAt = Date.now();
  } catch {
    // keep the previous snapshot; staleness indicator takes over
  }
  renderProgress();
}

async function start(): Promise<void> {
  await konsole.refill().catch(() => undefined);
  renderConsole();
  await pollStatus();
  setInterval(pollStatus, POLL_MS);
  try {
    thresholdModel = initialThresholdModel(await api.sweepRows());
  } catch {
    thresholdModel = initialThresholdModel(null);
  }
  renderThreshold();
}

void start();
