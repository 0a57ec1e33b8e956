// DOM rendering: full re-render on every state change, no local state.

import type { ReviewSession } from './state';
import type { SampleRecord } from './types';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = '',
  text = '',
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

function renderProgress(session: ReviewSession): HTMLElement {
  const bar = el('div', 'progress');
  const p = session.progress;
  bar.textContent = p
    ? `pending ${p.pending} · accepted ${p.accepted} · rejected ${p.rejected} · total ${p.total}`
    : 'progress unavailable';
  return bar;
}

function renderQueue(session: ReviewSession): HTMLElement {
  const panel = el('section', 'queue');
  panel.append(el('h2', '', 'Review queue'));
  const queue = session.queue;
  if (!queue) {
    panel.append(el('p', 'queue-loading', 'Loading…'));
    return panel;
  }
  if (queue.total === 0) {
    panel.append(el('p', 'empty-state', 'All reviewed 🎉'));
    return panel;
  }
  const list = el('ul', 'queue-list');
  for (const sample of queue.items) {
    const item = el('li', 'queue-item');
    item.dataset.sampleId = sample.id;
    if (session.current?.id === sample.id) item.classList.add('selected');
    const button = el('button', 'queue-open', `${sample.scenario} · ${sample.id}`);
    button.addEventListener('click', () => void session.select(sample.id));
    item.append(button, el('span', 'queue-query', sample.query));
    list.append(item);
  }
  panel.append(list);

  const pager = el('div', 'pager');
  const prev = el('button', 'page-prev', '← prev');
  prev.disabled = queue.page <= 1;
  prev.addEventListener('click', () => void session.prevPage());
  const next = el('button', 'page-next', 'next →');
  next.disabled = queue.page >= queue.pages;
  next.addEventListener('click', () => void session.nextPage());
  pager.append(prev, el('span', 'page-info', `page ${queue.page}/${queue.pages}`), next);
  panel.append(pager);
  return panel;
}

function renderProfile(sample: SampleRecord): HTMLElement {
  const panel = el('div', 'profile-panel');
  panel.append(el('h3', '', 'User profile'));
  const profile = sample.profile;
  if (!profile) {
    panel.append(el('p', '', '(no profile attached)'));
    return panel;
  }
  const dl = el('dl', 'features');
  for (const [section, features] of [
    ['basic', profile.basic_features],
    ['implicit', profile.implicit_features],
  ] as const) {
    for (const [label, value] of Object.entries(features)) {
      dl.append(el('dt', `feature-${section}`, label));
      dl.append(el('dd', '', value));
    }
  }
  panel.append(dl);
  const historyEntries = Object.entries(profile.history);
  if (historyEntries.length) {
    const list = el('ul', 'history');
    for (const [scenario, records] of historyEntries) {
      for (const record of records) {
        list.append(el('li', '', `[${scenario}] ${record.platform}: ${record.action}`));
      }
    }
    panel.append(el('h4', '', 'History'), list);
  }
  return panel;
}

function renderDetail(session: ReviewSession): HTMLElement {
  const panel = el('section', 'detail');
  const sample = session.current;
  if (!sample) {
    panel.append(el('p', 'detail-empty', 'Select a sample from the queue.'));
    return panel;
  }
  panel.append(el('h2', '', `Sample ${sample.id}`));
  panel.append(renderProfile(sample));
  panel.append(el('h3', '', 'Query'));
  panel.append(el('blockquote', 'query-text', sample.query));
  panel.append(el('h3', '', 'Gold calls'));

  if (session.editError) {
    panel.append(el('p', 'edit-error', session.editError));
  }

  sample.gold.calls.forEach((call, index) => {
    const box = el('div', 'call');
    box.append(el('h4', 'call-title', `${call.platform}.${call.function}()`));
    const table = el('div', 'param-rows');
    for (const row of session.rows.filter((r) => r.call === index)) {
      const line = el('div', 'param-row');
      line.dataset.call = String(row.call);
      line.dataset.param = row.param;
      line.append(el('span', 'param-name', row.param));

      const value = el('input', 'param-value') as HTMLInputElement;
      value.value = row.valueText;
      value.addEventListener('change', () =>
        session.setValueText(row.call, row.param, value.value),
      );
      line.append(value);

      const toggle = el('button', 'prov-toggle', row.source);
      toggle.classList.add(row.source);
      toggle.title = 'Toggle profile/query provenance';
      toggle.addEventListener('click', () =>
        session.toggleProvenance(row.call, row.param),
      );
      line.append(toggle);

      const remove = el('button', 'param-remove', '✕');
      remove.title = 'Remove this argument';
      remove.addEventListener('click', () =>
        session.removeArgument(row.call, row.param),
      );
      line.append(remove);

      if (row.violation) {
        line.append(el('span', 'violation', row.violation));
      }
      table.append(line);
    }
    box.append(table);

    const adder = el('div', 'param-add');
    const name = el('input', 'add-name') as HTMLInputElement;
    name.placeholder = 'argument name';
    const value = el('input', 'add-value') as HTMLInputElement;
    value.placeholder = 'value (JSON or text)';
    const add = el('button', 'add-arg', '+ add argument');
    add.addEventListener('click', () => {
      session.addArgument(index, name.value.trim(), value.value || '""');
    });
    adder.append(name, value, add);
    box.append(adder);
    panel.append(box);
  });

  const actions = el('div', 'actions');
  const accept = el('button', 'accept', session.dirty ? 'Save edits & accept' : 'Accept');
  accept.id = 'accept';
  accept.addEventListener('click', () => void session.submit('accept'));
  const reject = el('button', 'reject', 'Reject');
  reject.id = 'reject';
  reject.addEventListener('click', () => void session.submit('reject'));
  actions.append(accept, reject);
  panel.append(actions);
  panel.append(el('p', 'hint', 'Shortcuts: a = accept, r = reject'));
  return panel;
}

export function render(root: HTMLElement, session: ReviewSession): void {
  root.innerHTML = '';
  const app = el('div', 'app');
  app.append(el('h1', '', 'Sample review'));
  if (session.banner) {
    app.append(el('div', 'banner', session.banner));
  }
  if (session.lastExport) {
    app.append(
      el(
        'div',
        'export-note',
        `Exported ${session.lastExport.accepted} samples to ${session.lastExport.destination}`,
      ),
    );
  }
  app.append(renderProgress(session));
  const main = el('main', 'columns');
  main.append(renderQueue(session), renderDetail(session));
  app.append(main);
  root.append(app);
}
