// @vitest-environment happy-dom

import { beforeEach, describe, expect, it } from 'vitest';

import { initApp } from '../src/main';
import type { ReviewSession } from '../src/state';
import { FakeApi } from './fake_api';

async function until(check: () => boolean, timeoutMs = 2000): Promise<void> {
  const start = Date.now();
  while (!check()) {
    if (Date.now() - start > timeoutMs) throw new Error('condition never held');
    await new Promise((resolve) => setTimeout(resolve, 10));
  }
}

function rowEl(root: HTMLElement, call: number, param: string): HTMLElement {
  const row = [...root.querySelectorAll<HTMLElement>('.param-row')].find(
    (r) => r.dataset.call === String(call) && r.dataset.param === param,
  );
  if (!row) throw new Error(`no row for ${call}:${param}`);
  return row;
}

describe('review UI', () => {
  let root: HTMLElement;
  let api: FakeApi;
  let session: ReviewSession;

  beforeEach(async () => {
    document.body.innerHTML = '<div id="app"></div>';
    root = document.getElementById('app')!;
    api = new FakeApi(3);
    session = initApp(root, api, 'ann_dom');
    await until(() => root.querySelectorAll('.queue-item').length === 3);
  });

  it('renders the pending queue with progress', () => {
    expect(root.querySelector('.progress')!.textContent).toContain('pending 3');
    expect(root.querySelectorAll('.queue-item')).toHaveLength(3);
  });

  it('opens detail with one parameter row per gold pair', async () => {
    (root.querySelector('.queue-open') as HTMLButtonElement).click();
    await until(() => session.current?.id === 'smp_0');
    const rows = root.querySelectorAll('.param-row');
    expect(rows).toHaveLength(1);
    expect(rowEl(root, 0, 'itemId').querySelector('.prov-toggle')!.textContent).toBe(
      'query',
    );
    expect(root.querySelector('.query-text')!.textContent).toContain('order item0');
  });

  it('toggle + accept persists the provenance edit and advances', async () => {
    (root.querySelector('.queue-open') as HTMLButtonElement).click();
    await until(() => session.current?.id === 'smp_0');
    (rowEl(root, 0, 'itemId').querySelector('.prov-toggle') as HTMLButtonElement).click();
    await until(() => session.dirty);
    expect(root.querySelector('#accept')!.textContent).toContain('Save edits');
    (root.querySelector('#accept') as HTMLButtonElement).click();
    await until(() => session.current?.id === 'smp_1');
    expect(api.samples.get('smp_0')!.provenance[0]!.source).toBe('profile');
    expect(root.querySelector('.progress')!.textContent).toContain('accepted 1');
  });

  it('invalid edit renders the violation inline next to the row', async () => {
    (root.querySelector('.queue-open') as HTMLButtonElement).click();
    await until(() => session.current?.id === 'smp_0');
    session.addArgument(0, 'bogus', '"x"');
    (root.querySelector('#accept') as HTMLButtonElement).click();
    await until(() => session.row(0, 'bogus')?.violation != null);
    const violation = rowEl(root, 0, 'bogus').querySelector('.violation');
    expect(violation!.textContent).toContain('hallucinated-parameter');
    expect(session.current?.id).toBe('smp_0');
  });

  it('shows the all-reviewed state once the queue drains', async () => {
    for (const id of ['smp_0', 'smp_1', 'smp_2']) {
      await session.select(id);
      await session.submit('accept');
    }
    await until(() => root.querySelector('.empty-state') !== null);
    expect(root.querySelector('.empty-state')!.textContent).toContain('All reviewed');
  });

  it('keyboard shortcut accepts the open sample', async () => {
    (root.querySelector('.queue-open') as HTMLButtonElement).click();
    await until(() => session.current?.id === 'smp_0');
    document.dispatchEvent(new KeyboardEvent('keydown', { key: 'a', bubbles: true }));
    await until(() => api.samples.get('smp_0')!.status === 'accepted');
  });

  it('shows a banner when the service is unreachable', async () => {
    api.unreachable = true;
    await session.loadQueue();
    await until(() => root.querySelector('.banner') !== null);
    expect(root.querySelector('.banner')!.textContent).toMatch(/unreachable/i);
  });
});
