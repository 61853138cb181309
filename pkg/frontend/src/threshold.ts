// Threshold-slider model over server-computed sweep rows. The slider indexes
// the server's threshold grid directly; all displayed numbers come from the
// selected row, no client-side metric math.

import { SweepRow } from "./api.js";

export interface ThresholdModel {
  rows: SweepRow[] | null;
  index: number;
}

export function initialThresholdModel(rows: SweepRow[] | null): ThresholdModel {
  return { rows, index: 0 };
}

export function selectIndex(model: ThresholdModel, index: number): ThresholdModel {
  if (!model.rows || model.rows.length === 0) return model;
  const clamped = Math.max(0, Math.min(model.rows.length - 1, Math.round(index)));
  return { rows: model.rows, index: clamped };
}

export function selectedRow(model: ThresholdModel): SweepRow | null {
  if (!model.rows || model.rows.length === 0) return null;
  return model.rows[model.index];
}

export function sliderDisabled(model: ThresholdModel): boolean {
  return !model.rows || model.rows.length === 0;
}

export function formatRow(row: SweepRow | null): string {
  if (row === null) return "no sweep data; run the sweep command and restart the service";
  const fmt = (value: number | null) => (value === null ? "NA" : value.toFixed(3));
  return (
    `T=${row.threshold}  retained=${row.retained}  ` +
    `P=${fmt(row.precision)} R=${fmt(row.recall)} F1=${fmt(row.f1)} acc=${fmt(row.accuracy)}`
  );
}
