// DOM rendering. The store is the single source of truth; these functions
// project it into the page and nothing flows back.

import type { SessionStore } from './store.js';
import type { ConnectionStatus } from './types.js';
import { MAX_EVENTS } from './store.js';

export function renderStatus(banner: HTMLElement, status: ConnectionStatus, attempt: number): void {
  banner.dataset.status = status;
  if (status === 'open') {
    banner.textContent = 'connected';
    banner.classList.remove('banner-error');
  } else if (status === 'connecting') {
    banner.textContent = attempt === 0 ? 'connecting…' : `reconnecting (attempt ${attempt + 1})…`;
    banner.classList.add('banner-error');
  } else {
    banner.textContent = 'connection lost, retrying automatically';
    banner.classList.add('banner-error');
  }
}

export function renderEventTable(tbody: HTMLElement, store: SessionStore): void {
  const doc = tbody.ownerDocument;
  while (tbody.childNodes.length > store.events.length) {
    tbody.removeChild(tbody.firstChild as Node);
  }
  // rows already rendered stay; append the tail
  for (let i = tbody.childNodes.length; i < store.events.length; i += 1) {
    const row = store.events[i];
    const tr = doc.createElement('tr');
    tr.className = row.flagged ? 'event flagged' : `event ${row.type}`;
    const cells = [row.type, row.pageUrl, row.detail, row.observedAt];
    for (const text of cells) {
      const td = doc.createElement('td');
      td.textContent = text;
      tr.appendChild(td);
    }
    tbody.appendChild(tr);
  }
  while (tbody.childNodes.length > MAX_EVENTS) {
    tbody.removeChild(tbody.firstChild as Node);
  }
}

function renderCountList(doc: Document, title: string, counts: Map<string, number>): HTMLElement {
  const section = doc.createElement('div');
  section.className = 'count-list';
  const heading = doc.createElement('h3');
  heading.textContent = title;
  section.appendChild(heading);
  const list = doc.createElement('ul');
  const ranked = [...counts.entries()].sort((a, b) => b[1] - a[1] || a[0].localeCompare(b[0]));
  for (const [name, count] of ranked) {
    const item = doc.createElement('li');
    item.textContent = `${name}: ${count}`;
    list.appendChild(item);
  }
  section.appendChild(list);
  return section;
}

export function renderSummaryPanel(panel: HTMLElement, store: SessionStore): void {
  const doc = panel.ownerDocument;
  panel.replaceChildren();
  const totals = doc.createElement('p');
  totals.className = 'totals';
  const requests = store.lastSummary?.requests ?? store.events.filter((e) => e.type === 'request' || e.type === 'bad_request').length;
  totals.textContent = `${store.flagged.length} flagged transfers · ${requests} requests seen`;
  panel.appendChild(totals);
  panel.appendChild(renderCountList(doc, 'By company', store.companyCounts));
  panel.appendChild(renderCountList(doc, 'By country', store.countryCounts));
}

export function renderFlaggedGroups(container: HTMLElement, store: SessionStore): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  for (const [pageUrl, rows] of store.flaggedByPage()) {
    const group = doc.createElement('details');
    group.className = 'page-group';
    group.open = true;
    const summary = doc.createElement('summary');
    summary.textContent = `${pageUrl} (${rows.length} flagged)`;
    group.appendChild(summary);
    const list = doc.createElement('ul');
    for (const row of rows) {
      const item = doc.createElement('li');
      item.className = 'flagged-row';
      item.textContent = `${row.request_url} → ${row.company} (${row.country}, ${row.service_type})`;
      list.appendChild(item);
    }
    group.appendChild(list);
    container.appendChild(group);
  }
}

export function renderEmptyState(container: HTMLElement, visible: boolean): void {
  container.hidden = !visible;
}
