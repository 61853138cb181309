// Labeling state machine: a prefetched queue of tweets, one in-flight label
// at a time, explicit retry on network failure, and a guarantee that an id
// acknowledged by the server is never presented again in this session.

import { ApiClient, ApiError, TweetRecord } from "./api.js";

export type Choice = 0 | 1 | "skip";

export interface PendingRetry {
  tweet: TweetRecord;
  label: 0 | 1;
  attempts: number;
}

export interface ConsoleSnapshot {
  current: TweetRecord | null;
  queueDepth: number;
  submitted: number;
  labeledCount: number;
  inFlight: boolean;
  retry: PendingRetry | null;
  exhausted: boolean;
  lastError: string | null;
}

export class AnnotationConsole {
  private queue: TweetRecord[] = [];
  private presented = new Set<string>(); // ids ever shown; refills skip them
  private acked = new Set<string>(); // ids the server acknowledged
  private inFlight = false;
  private retryState: PendingRetry | null = null;
  private submitted = 0;
  private labeledCount = 0;
  private exhausted = false;
  private lastError: string | null = null;

  constructor(
    private api: ApiClient,
    private annotator: string,
    private prefetch: number = 10,
  ) {}

  snapshot(): ConsoleSnapshot {
    return {
      current: this.current(),
      queueDepth: this.queue.length,
      submitted: this.submitted,
      labeledCount: this.labeledCount,
      inFlight: this.inFlight,
      retry: this.retryState,
      exhausted: this.exhausted,
      lastError: this.lastError,
    };
  }

  current(): TweetRecord | null {
    return this.queue.length ? this.queue[0] : null;
  }

  ackedIds(): ReadonlySet<string> {
    return this.acked;
  }

  /** Top up the local queue from the server, never re-adding seen ids. */
  async refill(): Promise<void> {
    if (this.queue.length >= this.prefetch) return;
    const batch = await this.api.nextBatch(this.prefetch * 2);
    for (const tweet of batch) {
      if (!this.presented.has(tweet.id) && !this.acked.has(tweet.id)) {
        this.presented.add(tweet.id);
        this.queue.push(tweet);
      }
    }
    this.exhausted = this.queue.length === 0;
  }

  /**
   * Apply the user's choice to the current tweet. Labels advance the queue
   * only after the server acknowledgment; a network failure keeps the label
   * locally with a visible retry state and never silently drops it.
   */
  async choose(choice: Choice): Promise<void> {
    if (this.inFlight || this.retryState) return; // at most one outstanding label
    const tweet = this.current();
    if (!tweet) return;
    if (choice === "skip") {
      this.queue.shift();
      this.queue.push(tweet); // revisit skipped items after the rest
      await this.refill();
      return;
    }
    await this.submit(tweet, choice);
  }

  async retry(): Promise<void> {
    const pending = this.retryState;
    if (!pending || this.inFlight) return;
    this.retryState = null;
    await this.submit(pending.tweet, pending.label, pending.attempts);
  }

  private async submit(tweet: TweetRecord, label: 0 | 1, attempts = 0): Promise<void> {
    this.inFlight = true;
    this.lastError = null;
    try {
      const ack = await this.api.submitLabel(tweet.id, label, this.annotator);
      this.acked.add(tweet.id);
      this.submitted += 1;
      this.labeledCount = ack.labeled_count;
      this.advancePast(tweet.id);
    } catch (error) {
      if (error instanceof ApiError) {
        // the server made a decision (e.g. duplicate): surface it and move on
        this.lastError = error.message;
        this.acked.add(tweet.id);
        this.advancePast(tweet.id);
      } else {
        // network failure: hold the label for retry, do not advance
        this.retryState = { tweet, label, attempts: attempts + 1 };
        this.lastError = "network failure; label held for retry";
        this.inFlight = false;
        return;
      }
    }
    this.inFlight = false;
    await this.refill().catch(() => {
      this.lastError = "queue refill failed; will retry on next action";
    });
  }

  private advancePast(id: string): void {
    this.queue = this.queue.filter((t) => t.id !== id);
    this.exhausted = this.queue.length === 0 && this.exhausted;
  }
}
