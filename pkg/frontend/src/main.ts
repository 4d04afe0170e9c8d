import { StreamConnection } from './connection.js';
import { exportSessionCsv } from './export.js';
import {
  renderEmptyState,
  renderEventTable,
  renderFlaggedGroups,
  renderStatus,
  renderSummaryPanel,
} from './render.js';
import { SessionStore } from './store.js';

const DEFAULT_ENDPOINT = 'ws://127.0.0.1:8765';

function endpointUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get('ws');
  return fromQuery || DEFAULT_ENDPOINT;
}

function element<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing #${id}`);
  return found as T;
}

function main(): void {
  const store = new SessionStore();
  const banner = element('status-banner');
  const tbody = element('event-rows');
  const summaryPanel = element('summary-panel');
  const flaggedGroups = element('flagged-groups');
  const emptyState = element('empty-state');
  const exportButton = element<HTMLButtonElement>('export-button');

  const repaint = () => {
    renderEventTable(tbody, store);
    renderSummaryPanel(summaryPanel, store);
    renderFlaggedGroups(flaggedGroups, store);
    renderEmptyState(emptyState, store.received === 0);
    exportButton.disabled = store.received === 0;
  };

  const connection = new StreamConnection(endpointUrl(), {
    onMessage: (message) => {
      if (store.apply(message)) repaint();
    },
    onStatus: (status, attempt) => renderStatus(banner, status, attempt),
  });

  exportButton.addEventListener('click', () => {
    const blob = new Blob([exportSessionCsv(store.flagged)], { type: 'text/csv' });
    const link = document.createElement('a');
    link.href = URL.createObjectURL(blob);
    link.download = 'session-flagged-requests.csv';
    link.click();
    URL.revokeObjectURL(link.href);
  });

  repaint();
  connection.connect();
}

main();
