// Thin fetch client for the review service endpoints.

import type {
  DecisionBody,
  ExportManifest,
  InvalidEditDetail,
  Progress,
  SamplePage,
  SampleRecord,
} from './types';

export class ServiceUnreachableError extends Error {}

export class ConflictError extends Error {}

export class InvalidEditError extends Error {
  constructor(public detail: InvalidEditDetail) {
    super(detail.error ?? 'invalid edit');
  }
}

export interface ReviewApi {
  listPending(page: number, pageSize: number, scenario?: string): Promise<SamplePage>;
  getSample(id: string): Promise<SampleRecord>;
  submitDecision(id: string, body: DecisionBody): Promise<SampleRecord>;
  progress(): Promise<Progress>;
  exportBenchmark(destination: string): Promise<ExportManifest>;
}

async function request(url: string, init?: RequestInit): Promise<Response> {
  let response: Response;
  try {
    response = await fetch(url, init);
  } catch (err) {
    throw new ServiceUnreachableError(String(err));
  }
  if (response.status === 409) {
    throw new ConflictError(await response.text());
  }
  if (response.status === 422) {
    const body = await response.json().catch(() => ({ detail: { error: 'invalid' } }));
    const detail = (body.detail ?? body) as InvalidEditDetail | string;
    if (typeof detail === 'string') {
      throw new InvalidEditError({ error: detail });
    }
    throw new InvalidEditError(detail);
  }
  if (!response.ok) {
    throw new Error(`HTTP ${response.status}: ${await response.text()}`);
  }
  return response;
}

export class HttpReviewApi implements ReviewApi {
  constructor(private baseUrl: string = '') {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async listPending(page: number, pageSize: number, scenario = ''): Promise<SamplePage> {
    const params = new URLSearchParams({
      status: 'pending',
      page: String(page),
      page_size: String(pageSize),
    });
    if (scenario) params.set('scenario', scenario);
    const response = await request(this.url(`/api/samples?${params}`));
    return response.json();
  }

  async getSample(id: string): Promise<SampleRecord> {
    const response = await request(this.url(`/api/samples/${id}`));
    return response.json();
  }

  async submitDecision(id: string, body: DecisionBody): Promise<SampleRecord> {
    const response = await request(this.url(`/api/samples/${id}/decision`), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    return response.json();
  }

  async progress(): Promise<Progress> {
    const response = await request(this.url('/api/progress'));
    return response.json();
  }

  async exportBenchmark(destination: string): Promise<ExportManifest> {
    const response = await request(this.url('/api/export'), {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ destination }),
    });
    return response.json();
  }
}
