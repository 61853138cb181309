// Typed client for the annotation service API. Every number the console
// displays comes from these responses; the client computes no metrics.

export interface TweetRecord {
  id: string;
  text: string;
}

export interface LabelAck {
  ack: boolean;
  labeled_count: number;
  retrain_scheduled: boolean;
  superseded?: boolean;
}

export interface StatusReport {
  labeled: number;
  remaining: number;
  kappas: number[];
  stop_recommended: boolean;
  model_version: number;
}

export interface SweepRow {
  threshold: number;
  retained: number;
  precision: number | null;
  recall: number | null;
  f1: number | null;
  accuracy: number | null;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function bodyError(response: Response): Promise<ApiError> {
  let message = `HTTP ${response.status}`;
  try {
    const body = await response.json();
    if (body && typeof body.error === "string") message = body.error;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(response.status, message);
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private url(path: string): string {
    return this.baseUrl + path;
  }

  async nextBatch(n: number): Promise<TweetRecord[]> {
    const response = await fetch(this.url(`/queue/next?n=${n}`));
    if (!response.ok) throw await bodyError(response);
    return (await response.json()) as TweetRecord[];
  }

  async submitLabel(id: string, label: 0 | 1, annotator: string): Promise<LabelAck> {
    const response = await fetch(this.url("/labels"), {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ id, label, annotator }),
    });
    if (!response.ok) throw await bodyError(response);
    return (await response.json()) as LabelAck;
  }

  async status(): Promise<StatusReport> {
    const response = await fetch(this.url("/status"));
    if (!response.ok) throw await bodyError(response);
    return (await response.json()) as StatusReport;
  }

  /** Sweep rows from the server, or null when no sweep data exists yet. */
  async sweepRows(): Promise<SweepRow[] | null> {
    const response = await fetch(this.url("/sweep"));
    if (response.status === 404) return null;
    if (!response.ok) throw await bodyError(response);
    return parseSweepRows(await response.text());
  }
}

/** Parse the server's tab-separated sweep output (NA marks undefined). */
export function parseSweepRows(text: string): SweepRow[] {
  const rows: SweepRow[] = [];
  const num = (field: string): number | null => (field === "NA" ? null : Number(field));
  for (const line of text.split("\n")) {
    if (!line.trim() || line.startsWith("threshold")) continue;
    const parts = line.split("\t");
    if (parts.length < 6) continue;
    rows.push({
      threshold: Number(parts[0]),
      retained: Number(parts[1]),
      precision: num(parts[2]),
      recall: num(parts[3]),
      f1: num(parts[4]),
      accuracy: num(parts[5]),
    });
  }
  return rows;
}
