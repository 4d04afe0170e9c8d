// Session export: the scanner's bad-requests.csv schema minus the entity
// columns, which have no meaning during free navigation.

import type { BadRequestPayload } from './types.js';

export const EXPORT_COLUMNS = [
  'request_url',
  'matched_pattern',
  'group_name',
  'company',
  'country',
  'service_type',
  'resource_hint',
  'observed_at',
] as const;

function csvField(value: string): string {
  if (/[",\n\r]/.test(value)) {
    return '"' + value.replace(/"/g, '""') + '"';
  }
  return value;
}

export function exportSessionCsv(flagged: readonly BadRequestPayload[]): string {
  const lines = [EXPORT_COLUMNS.join(',')];
  for (const row of flagged) {
    lines.push(EXPORT_COLUMNS.map((column) => csvField(String(row[column]))).join(','));
  }
  return lines.join('\n') + '\n';
}
