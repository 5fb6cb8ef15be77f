import { ApiClient, ApiError } from "./api.js";
import type {
  Candidate,
  CandidateFilters,
  CandidateStatus,
  DecisionAction,
  MappingLevel,
  QueryResponse,
  Stats,
} from "./types.js";

export interface Toast {
  kind: "info" | "error";
  message: string;
}

const ACTION_TO_STATUS: Record<DecisionAction, CandidateStatus> = {
  accept: "accepted",
  reject: "rejected",
  reset: "pending",
};

/**
 * State behind the review queue: filters, pagination, optimistic decisions
 * with revert on failure, bulk actions, and the stats snapshot. All state is
 * derived from API responses; a decision only sticks once the server
 * confirms it (optimistic status is rolled back on any error).
 */
export class QueueViewModel {
  filters: CandidateFilters = {};
  page = 1;
  pageSize = 50;
  total = 0;
  items: Candidate[] = [];
  stats: Stats | null = null;
  toasts: Toast[] = [];
  loading = false;
  connectionError: string | null = null;
  reviewer = "expert";

  constructor(private readonly api: ApiClient) {}

  async refresh(): Promise<void> {
    this.loading = true;
    try {
      const page = await this.api.listCandidates(this.filters, this.page, this.pageSize);
      this.items = page.items;
      this.total = page.total;
      this.connectionError = null;
    } catch (err) {
      this.connectionError = err instanceof Error ? err.message : String(err);
    } finally {
      this.loading = false;
    }
  }

  async setLevelFilter(level: MappingLevel | undefined): Promise<void> {
    this.filters = { ...this.filters, level };
    if (!level) delete this.filters.level;
    this.page = 1;
    await this.refresh();
  }

  async setStatusFilter(status: CandidateStatus | undefined): Promise<void> {
    this.filters = { ...this.filters, status };
    if (!status) delete this.filters.status;
    this.page = 1;
    await this.refresh();
  }

  async goToPage(page: number): Promise<void> {
    this.page = Math.max(1, page);
    await this.refresh();
  }

  /** Optimistically flip the row, then confirm with the server. */
  async decide(candidateId: string, action: DecisionAction): Promise<void> {
    const row = this.items.find((c) => c.id === candidateId);
    const previous = row?.status;
    if (row) row.status = ACTION_TO_STATUS[action];
    try {
      const confirmed = await this.api.decide(candidateId, action, this.reviewer);
      if (row) row.status = confirmed.status;
    } catch (err) {
      if (row && previous !== undefined) row.status = previous;
      this.pushToast("error", this.describeError(err));
      throw err;
    }
  }

  /** Bulk decision over the active level filter; refreshes the queue. */
  async bulkDecide(action: "accept" | "reject"): Promise<number> {
    const level = this.filters.level;
    if (!level) {
      this.pushToast("error", "select a level filter before a bulk action");
      return 0;
    }
    try {
      const affected = await this.api.bulkDecide(level, action, this.reviewer);
      this.pushToast("info", `${action} applied to ${affected} level-${level} candidates`);
      await this.refresh();
      return affected;
    } catch (err) {
      this.pushToast("error", this.describeError(err));
      throw err;
    }
  }

  async loadStats(): Promise<void> {
    try {
      this.stats = await this.api.stats();
    } catch (err) {
      this.connectionError = err instanceof Error ? err.message : String(err);
    }
  }

  pushToast(kind: Toast["kind"], message: string): void {
    this.toasts.push({ kind, message });
    if (this.toasts.length > 5) this.toasts.shift();
  }

  private describeError(err: unknown): string {
    if (err instanceof ApiError) {
      return err.status ? `HTTP ${err.status}: ${err.message}` : err.message;
    }
    return err instanceof Error ? err.message : String(err);
  }
}

/** State behind the ask panel: question, answer, failure trace. */
export class AskViewModel {
  question = "";
  response: QueryResponse | null = null;
  failure: { reason: string; attempts: unknown[] } | null = null;
  traceOpen = false;
  busy = false;

  constructor(private readonly api: ApiClient) {}

  async ask(): Promise<void> {
    if (!this.question.trim()) return;
    this.busy = true;
    this.response = null;
    this.failure = null;
    try {
      this.response = await this.api.ask(this.question);
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        const detail = err.detail as { error?: string; attempts?: unknown[] };
        this.failure = {
          reason: detail?.error ?? "query generation failed",
          attempts: detail?.attempts ?? [],
        };
        this.traceOpen = true;
      } else {
        this.failure = {
          reason: err instanceof Error ? err.message : String(err),
          attempts: [],
        };
      }
    } finally {
      this.busy = false;
    }
  }
}
