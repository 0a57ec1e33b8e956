// Review session view-model: queue paging, sample detail with editable
// parameter rows, decision submission. All state is server-authoritative;
// every mutation round-trips through POST /decision and the queue and
// progress are re-fetched afterwards.

import {
  ConflictError,
  InvalidEditError,
  ReviewApi,
  ServiceUnreachableError,
} from './api';
import type {
  DecisionBody,
  Progress,
  ProvenanceSource,
  ProvenanceTag,
  SamplePage,
  SampleRecord,
  ToolCallRecord,
} from './types';

export interface ParameterRow {
  call: number;
  param: string;
  valueText: string; // JSON literal text shown in the input
  source: ProvenanceSource;
  added: boolean;
  violation: string | null;
}

export function parseValueText(text: string): unknown {
  try {
    return JSON.parse(text);
  } catch {
    return text; // bare words edit as plain strings
  }
}

export function rowsFromSample(sample: SampleRecord): ParameterRow[] {
  const sources = new Map<string, ProvenanceSource>();
  for (const tag of sample.provenance) {
    sources.set(`${tag.call}:${tag.param}`, tag.source);
  }
  const rows: ParameterRow[] = [];
  sample.gold.calls.forEach((call, index) => {
    for (const [param, value] of Object.entries(call.args)) {
      rows.push({
        call: index,
        param,
        valueText: JSON.stringify(value),
        source: sources.get(`${index}:${param}`) ?? 'query',
        added: false,
        violation: null,
      });
    }
  });
  return rows;
}

export class ReviewSession {
  queue: SamplePage | null = null;
  progress: Progress | null = null;
  current: SampleRecord | null = null;
  rows: ParameterRow[] = [];
  dirty = false;
  banner: string | null = null;
  editError: string | null = null;
  lastExport: { destination: string; accepted: number } | null = null;
  page = 1;
  onChange: (() => void) | null = null;

  constructor(
    private api: ReviewApi,
    public annotatorId: string = 'annotator',
    private clock: () => string = () => new Date().toISOString(),
    public pageSize: number = 10,
  ) {}

  private notify(): void {
    this.onChange?.();
  }

  async loadQueue(page: number = this.page): Promise<void> {
    try {
      const [queue, progress] = await Promise.all([
        this.api.listPending(page, this.pageSize),
        this.api.progress(),
      ]);
      this.queue = queue;
      this.progress = progress;
      this.page = queue.page;
      this.banner = null;
    } catch (err) {
      if (err instanceof ServiceUnreachableError) {
        this.banner = 'Review service unreachable. Is it running?';
      } else {
        this.banner = String(err);
      }
    }
    this.notify();
  }

  async nextPage(): Promise<void> {
    if (this.queue && this.page < this.queue.pages) {
      await this.loadQueue(this.page + 1);
    }
  }

  async prevPage(): Promise<void> {
    if (this.page > 1) {
      await this.loadQueue(this.page - 1);
    }
  }

  async select(id: string): Promise<void> {
    try {
      const sample = await this.api.getSample(id);
      this.current = sample;
      this.rows = rowsFromSample(sample);
      this.dirty = false;
      this.editError = null;
      this.banner = null;
    } catch (err) {
      this.banner = String(err);
    }
    this.notify();
  }

  row(call: number, param: string): ParameterRow | undefined {
    return this.rows.find((r) => r.call === call && r.param === param);
  }

  toggleProvenance(call: number, param: string): void {
    const row = this.row(call, param);
    if (!row) return;
    row.source = row.source === 'profile' ? 'query' : 'profile';
    this.dirty = true;
    this.notify();
  }

  setValueText(call: number, param: string, text: string): void {
    const row = this.row(call, param);
    if (!row || row.valueText === text) return;
    row.valueText = text;
    this.dirty = true;
    this.notify();
  }

  addArgument(call: number, param: string, valueText: string): void {
    if (!param || this.row(call, param)) return;
    this.rows.push({
      call, param, valueText, source: 'query', added: true, violation: null,
    });
    this.dirty = true;
    this.notify();
  }

  removeArgument(call: number, param: string): void {
    const index = this.rows.findIndex((r) => r.call === call && r.param === param);
    if (index < 0) return;
    this.rows.splice(index, 1);
    this.dirty = true;
    this.notify();
  }

  private editedGold(): { calls: ToolCallRecord[] } {
    const sample = this.current!;
    const calls = sample.gold.calls.map((call, index) => {
      const args: Record<string, unknown> = {};
      for (const row of this.rows) {
        if (row.call === index) {
          args[row.param] = parseValueText(row.valueText);
        }
      }
      return { platform: call.platform, function: call.function, args };
    });
    return { calls };
  }

  private editedProvenance(): ProvenanceTag[] {
    return this.rows.map((row) => ({
      call: row.call,
      param: row.param,
      source: row.source,
    }));
  }

  /** Submit accept/reject, or an edit decision when rows were touched. */
  async submit(action: 'accept' | 'reject'): Promise<boolean> {
    if (!this.current) return false;
    const sampleId = this.current.id;
    const body: DecisionBody = {
      action: this.dirty && action === 'accept' ? 'edit' : action,
      annotator_id: this.annotatorId,
      timestamp: this.clock(),
    };
    if (body.action === 'edit') {
      body.edited_gold = this.editedGold();
      body.edited_provenance = this.editedProvenance();
    }
    try {
      await this.api.submitDecision(sampleId, body);
    } catch (err) {
      if (err instanceof InvalidEditError) {
        this.applyViolations(err);
        this.notify();
        return false;
      }
      if (err instanceof ConflictError) {
        await this.loadQueue(); // refresh, then keep the conflict visible
        this.banner = `Sample ${sampleId} was already decided elsewhere.`;
        this.notify();
        return false;
      }
      this.banner = String(err);
      this.notify();
      return false;
    }
    this.editError = null;
    await this.loadQueue();
    await this.advance(sampleId);
    return true;
  }

  private applyViolations(err: InvalidEditError): void {
    this.editError = err.detail.provenance ?? err.detail.error ?? 'invalid edit';
    for (const row of this.rows) {
      row.violation = null;
    }
    for (const violation of err.detail.violations ?? []) {
      if (violation.param == null || violation.call == null) continue;
      const row = this.row(violation.call, violation.param);
      if (row) {
        row.violation = `${violation.kind}: ${violation.detail}`;
      }
    }
  }

  private async advance(decidedId: string): Promise<void> {
    const next = this.queue?.items.find((s) => s.id !== decidedId);
    if (next) {
      await this.select(next.id);
    } else {
      this.current = null;
      this.rows = [];
      this.dirty = false;
      this.notify();
    }
  }

  async exportBenchmark(destination: string): Promise<void> {
    try {
      const manifest = await this.api.exportBenchmark(destination);
      this.lastExport = { destination, accepted: manifest.counts.accepted };
      this.banner = null;
    } catch (err) {
      this.banner = String(err);
    }
    this.notify();
  }
}
