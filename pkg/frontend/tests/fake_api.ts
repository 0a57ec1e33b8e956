// In-memory stand-in for the review service, mirroring its semantics:
// stable (scenario, id) ordering, conflict on double-decide, invalid-edit
// violations for unknown parameters, incomplete-provenance rejection.

import { ConflictError, InvalidEditError, ReviewApi, ServiceUnreachableError } from '../src/api';
import type {
  DecisionBody,
  ExportManifest,
  Progress,
  SamplePage,
  SampleRecord,
  ViolationRecord,
} from '../src/types';

export function makeSample(i: number, scenario = 'shopping'): SampleRecord {
  return {
    id: `smp_${i}`,
    user_id: 'usr_1',
    scenario,
    query: `order item${i} for me`,
    gold: {
      calls: [
        { platform: 'ShopHub', function: 'orderItem', args: { itemId: `item${i}` } },
      ],
    },
    provenance: [{ call: 0, param: 'itemId', source: 'query' }],
    status: 'model_verified',
    split: i % 2 === 0 ? 'test' : 'train',
    profile: {
      user_id: 'usr_1',
      basic_features: { username: 'WineTraveler38' },
      implicit_features: { shopping: 'premium' },
      history: { shopping: [{ platform: 'ShopHub', action: 'Bought wine' }] },
    },
  };
}

const KNOWN_PARAMS = new Set(['itemId', 'note']);

export class FakeApi implements ReviewApi {
  samples = new Map<string, SampleRecord>();
  decided = new Set<string>();
  unreachable = false;
  exports: { destination: string; ids: string[] }[] = [];

  constructor(count = 3) {
    for (let i = 0; i < count; i++) {
      const sample = makeSample(i);
      this.samples.set(sample.id, sample);
    }
  }

  private check(): void {
    if (this.unreachable) throw new ServiceUnreachableError('down');
  }

  async listPending(page: number, pageSize: number, scenario = ''): Promise<SamplePage> {
    this.check();
    let items = [...this.samples.values()]
      .filter((s) => s.status === 'model_verified' && !this.decided.has(s.id))
      .filter((s) => !scenario || s.scenario === scenario)
      .sort((a, b) => (a.scenario + a.id).localeCompare(b.scenario + b.id));
    const total = items.length;
    const pages = Math.max(Math.ceil(total / pageSize), 1);
    items = items.slice((page - 1) * pageSize, page * pageSize);
    return { items, page, page_size: pageSize, total, pages };
  }

  async getSample(id: string): Promise<SampleRecord> {
    this.check();
    const sample = this.samples.get(id);
    if (!sample) throw new Error('HTTP 404');
    return structuredClone(sample);
  }

  async submitDecision(id: string, body: DecisionBody): Promise<SampleRecord> {
    this.check();
    const sample = this.samples.get(id);
    if (!sample) throw new Error('HTTP 404');
    if (this.decided.has(id)) throw new ConflictError(`sample ${id} already decided`);

    let updated = structuredClone(sample);
    if (body.action === 'edit') {
      const violations: ViolationRecord[] = [];
      for (const call of body.edited_gold?.calls ?? []) {
        for (const param of Object.keys(call.args)) {
          if (!KNOWN_PARAMS.has(param)) {
            violations.push({
              kind: 'hallucinated-parameter', call: 0, param,
              detail: `orderItem has no parameter '${param}'`,
            });
          }
        }
      }
      if (violations.length) {
        throw new InvalidEditError({ error: 'invalid-edit', violations });
      }
      const gold = body.edited_gold ?? sample.gold;
      const provenance = body.edited_provenance ?? sample.provenance;
      const goldKeys = new Set(
        gold.calls.flatMap((c, i) => Object.keys(c.args).map((p) => `${i}:${p}`)),
      );
      const provKeys = new Set(provenance.map((t) => `${t.call}:${t.param}`));
      if (
        goldKeys.size !== provKeys.size ||
        [...goldKeys].some((k) => !provKeys.has(k))
      ) {
        throw new InvalidEditError({ error: 'invalid-edit', provenance: 'incomplete' });
      }
      updated = { ...updated, gold, provenance, status: 'accepted' };
    } else {
      updated = {
        ...updated,
        status: body.action === 'accept' ? 'accepted' : 'rejected',
      };
    }
    this.samples.set(id, updated);
    this.decided.add(id);
    return structuredClone(updated);
  }

  async progress(): Promise<Progress> {
    this.check();
    const all = [...this.samples.values()];
    return {
      pending: all.filter((s) => s.status === 'model_verified' && !this.decided.has(s.id)).length,
      accepted: all.filter((s) => s.status === 'accepted').length,
      rejected: all.filter((s) => s.status === 'rejected').length,
      total: all.length,
    };
  }

  async exportBenchmark(destination: string): Promise<ExportManifest> {
    this.check();
    const accepted = [...this.samples.values()].filter((s) => s.status === 'accepted');
    this.exports.push({ destination, ids: accepted.map((s) => s.id) });
    const by_split: Record<string, number> = {};
    for (const s of accepted) {
      const key = s.split ?? 'unsplit';
      by_split[key] = (by_split[key] ?? 0) + 1;
    }
    return { counts: { accepted: accepted.length }, by_split };
  }
}
